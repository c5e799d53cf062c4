#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "licra/env.hpp"
#include "licra/mdp.hpp"
#include "licra/rng.hpp"

namespace licra {

/// Portfolio-rebalancing problem: wealth split between a risky and a
/// risk-free asset, discrete moves of a fixed fraction between them, a flat
/// transaction fee per move, and a terminal square-root utility.
struct MertonParams {
    double risk_free_rate = 0.01; // r
    double risky_return = 0.05;   // mu
    double volatility = 1.0;      // sigma
    double dt = 0.01;             // time step
    int horizon = 75;             // steps per episode
    double move_fraction = 0.1;   // share of the source asset moved per action
    double transaction_cost = 1.0;
    double initial_risky = 50.0;
    double initial_riskfree = 50.0;
    // When set, fees are taken out of the cash position instead of being
    // charged to the return stream.
    bool deduct_cost_from_wealth = false;

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
        if (volatility < 0.0) throw std::invalid_argument("volatility must be nonnegative");
        if (!(move_fraction > 0.0) || move_fraction >= 1.0)
            throw std::invalid_argument("move_fraction must lie in (0, 1)");
        if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
        if (initial_risky < 0.0 || initial_riskfree < 0.0)
            throw std::invalid_argument("initial wealths must be nonnegative");
    }
};

struct MertonState {
    double risky = 0.0;    // s
    double riskfree = 0.0; // c
    int t = 0;
};

enum MertonAction : int {
    kMertonNull = 0,
    kMertonToRiskFree = 1, // move a fraction of the risky asset into cash
    kMertonToRisky = 2     // move a fraction of the cash into the risky asset
};

inline double merton_utility(double risky, double riskfree) {
    return 2.0 * std::sqrt(std::max(risky + riskfree, 0.0));
}

struct MertonStepResult {
    MertonState next;
    double reward = 0.0;
    double cost = 0.0;
    bool intervened = false;
};

/// One step of the wealth dynamics followed by the optional asset move.
/// The cash position compounds at the risk-free rate; the risky position
/// carries the drift and the Brownian shock, so total wealth follows
/// dW = (r + p (mu - r)) W dt + W p sigma dB with p the risky share.
/// Rewards are zero except on the final step, which pays the terminal
/// utility of the post-move wealth. Exactly one normal draw is consumed per
/// step regardless of the action.
inline MertonStepResult merton_step(const MertonState& state, const MertonParams& params,
                                    int action, RngStream& rng) {
    if (state.t >= params.horizon)
        throw std::logic_error("episode is over at step " + std::to_string(state.t));
    if (action < 0 || action > 2) throw std::out_of_range("unknown portfolio action");

    double shock = rng.normal();
    MertonStepResult out;
    out.next.riskfree = state.riskfree * (1.0 + params.risk_free_rate * params.dt);
    out.next.risky = std::max(
        0.0, state.risky * (1.0 + params.risky_return * params.dt +
                            params.volatility * std::sqrt(params.dt) * shock));
    out.next.t = state.t + 1;

    if (action == kMertonToRiskFree) {
        double moved = params.move_fraction * out.next.risky;
        out.next.risky -= moved;
        out.next.riskfree += moved;
        out.intervened = true;
    } else if (action == kMertonToRisky) {
        double moved = params.move_fraction * out.next.riskfree;
        out.next.riskfree -= moved;
        out.next.risky += moved;
        out.intervened = true;
    }
    if (out.intervened) {
        if (params.deduct_cost_from_wealth) {
            double fee = params.transaction_cost;
            double from_cash = std::min(fee, out.next.riskfree);
            out.next.riskfree -= from_cash;
            out.next.risky = std::max(0.0, out.next.risky - (fee - from_cash));
        } else {
            out.cost = params.transaction_cost;
        }
    }
    if (out.next.t == params.horizon)
        out.reward = merton_utility(out.next.risky, out.next.riskfree);
    return out;
}

/// Bucketing of the continuous (wealth, risky-share) state: logarithmic
/// wealth buckets around the initial wealth, uniform share buckets.
struct MertonGrid {
    int wealth_buckets = 0;
    int split_buckets = 0;
    double log_w_lo = 0.0;
    double log_w_hi = 0.0;

    static MertonGrid make(const MertonParams& params, int wealth_buckets, int split_buckets) {
        if (wealth_buckets < 1 || split_buckets < 2)
            throw std::invalid_argument("need >= 1 wealth bucket and >= 2 split buckets");
        MertonGrid g;
        g.wealth_buckets = wealth_buckets;
        g.split_buckets = split_buckets;
        double w0 = std::max(params.initial_risky + params.initial_riskfree, 1e-9);
        double spread =
            2.5 * std::max(params.volatility, 0.05) * std::sqrt(params.horizon * params.dt);
        g.log_w_lo = std::log(w0) - spread;
        g.log_w_hi = std::log(w0) + spread;
        return g;
    }

    int states() const { return wealth_buckets * split_buckets; }

    int wealth_index(double wealth) const {
        if (wealth_buckets == 1) return 0;
        double x = (std::log(std::max(wealth, 1e-12)) - log_w_lo) / (log_w_hi - log_w_lo);
        int idx = static_cast<int>(std::floor(x * wealth_buckets));
        return std::clamp(idx, 0, wealth_buckets - 1);
    }
    int split_index(double share) const {
        int idx = static_cast<int>(std::floor(share * split_buckets));
        return std::clamp(idx, 0, split_buckets - 1);
    }
    int observe(double risky, double riskfree) const {
        double w = risky + riskfree;
        double p = w > 0.0 ? risky / w : 0.0;
        return wealth_index(w) * split_buckets + split_index(p);
    }
    double wealth_center(int w_idx) const {
        if (wealth_buckets == 1) return std::exp(0.5 * (log_w_lo + log_w_hi));
        double step = (log_w_hi - log_w_lo) / wealth_buckets;
        return std::exp(log_w_lo + (w_idx + 0.5) * step);
    }
    double split_center(int p_idx) const { return (p_idx + 0.5) / split_buckets; }
};

/// Episodic environment over the bucketed observation space. The underlying
/// state stays continuous; only the observation is coarse.
class MertonDiscreteEnv : public DiscreteEnv {
  public:
    MertonDiscreteEnv(MertonParams params, int wealth_buckets, int split_buckets,
                      double gamma = 0.99)
        : params_(params), grid_(MertonGrid::make(params, wealth_buckets, split_buckets)),
          gamma_(gamma) {
        params_.validate();
    }

    int observation_count() const override { return grid_.states(); }
    int action_count() const override { return 2; }
    int horizon() const override { return params_.horizon; }
    double gamma() const override { return gamma_; }

    int reset(RngStream&) override {
        state_ = {params_.initial_risky, params_.initial_riskfree, 0};
        return grid_.observe(state_.risky, state_.riskfree);
    }

    TransitionSample step(int action, RngStream& rng) override {
        MertonStepResult r = merton_step(state_, params_, action, rng);
        TransitionSample t;
        t.state = grid_.observe(state_.risky, state_.riskfree);
        t.action = action;
        t.reward = r.reward;
        t.cost = r.cost;
        t.intervened = r.intervened;
        state_ = r.next;
        t.next_state = grid_.observe(state_.risky, state_.riskfree);
        return t;
    }

    const MertonState& state() const { return state_; }
    const MertonGrid& grid() const { return grid_; }

  private:
    MertonParams params_;
    MertonGrid grid_;
    double gamma_;
    MertonState state_;
};

struct MertonDiscretization {
    TabularMdp mdp;
    CostSpec cost;
    MertonGrid grid;
};

/// Stationary tabular projection of the wealth dynamics for the exact
/// oracle: transition rows are Monte-Carlo bucket-to-bucket frequencies from
/// each bucket center, and the reward is the annuitized terminal utility
/// (1 - gamma) * u(bucket), whose discounted sum recovers u exactly when the
/// utility is constant. This is a diagnostic proxy; learners train on the
/// episodic environment.
inline MertonDiscretization merton_discretize(const MertonParams& params, int wealth_buckets,
                                              int split_buckets, int samples_per_bucket,
                                              std::uint64_t seed, double gamma = 0.99) {
    params.validate();
    if (samples_per_bucket < 100)
        throw std::invalid_argument("insufficient samples per bucket (" +
                                    std::to_string(samples_per_bucket) +
                                    "); transition estimates need at least 100");
    MertonDiscretization out;
    out.grid = MertonGrid::make(params, wealth_buckets, split_buckets);
    const int n = out.grid.states();
    out.mdp = TabularMdp::zeros(n, 2, gamma);
    out.cost = CostSpec::fixed(params.transaction_cost);
    RngStream rng = rng_stream(seed, "merton/discretize");

    std::vector<long> counts(n, 0);
    for (int w_idx = 0; w_idx < wealth_buckets; ++w_idx) {
        for (int p_idx = 0; p_idx < split_buckets; ++p_idx) {
            int s_idx = w_idx * split_buckets + p_idx;
            double wealth = out.grid.wealth_center(w_idx);
            double share = out.grid.split_center(p_idx);
            for (int a = 0; a <= 2; ++a) {
                std::fill(counts.begin(), counts.end(), 0);
                for (int k = 0; k < samples_per_bucket; ++k) {
                    MertonState state{share * wealth, (1.0 - share) * wealth, 0};
                    MertonStepResult r = merton_step(state, params, a, rng);
                    ++counts[out.grid.observe(r.next.risky, r.next.riskfree)];
                }
                for (int next = 0; next < n; ++next)
                    out.mdp.p(a, s_idx, next) =
                        static_cast<double>(counts[next]) / samples_per_bucket;
                out.mdp.r(a, s_idx) = (1.0 - gamma) * 2.0 * std::sqrt(wealth);
            }
        }
    }
    require_valid(out.mdp);
    return out;
}

} // namespace licra
