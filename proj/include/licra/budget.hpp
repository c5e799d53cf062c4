#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "licra/env.hpp"
#include "licra/exact.hpp"
#include "licra/mdp.hpp"

namespace licra {

enum class BudgetMode {
    kSoft, // penalty reshaping: exceeding the budget pays -delta forever
    kHard  // interventions are masked once the budget cannot cover them
};

enum class ChargeMode {
    kUnit,    // every intervention draws 1 from the budget
    kCostCeil // each intervention draws ceil(cost(s, a)), a fuel-like charge
};

/// Budget on the number (or charge total) of interventions per episode.
struct BudgetSpec {
    int n = 0;              // allowed budget
    double delta = 0.0;     // over-budget penalty; ignored when auto_delta
    bool auto_delta = true; // size delta from the instance
    BudgetMode mode = BudgetMode::kSoft;
    ChargeMode charge = ChargeMode::kUnit;

    void validate() const {
        if (n < 0) throw std::invalid_argument("budget n must be nonnegative");
        if (!auto_delta && !(delta > 0.0))
            throw std::invalid_argument("budget delta must be positive");
    }
};

/// Penalty large enough that exceeding the budget can never pay at desk
/// scale: ten times the largest per-step gain, amplified by the horizon
/// factor 1/(1-gamma).
inline double auto_delta(const TabularMdp& mdp, const CostSpec& cost) {
    double max_gain = 0.0;
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 1; a <= mdp.n_actions; ++a)
            max_gain = std::max(max_gain, mdp.r(a, s) - cost(mdp, s, a));
    return 10.0 * (mdp.max_abs_reward() + std::max(max_gain, 0.0)) / (1.0 - mdp.gamma);
}

inline double resolve_delta(const BudgetSpec& budget, const TabularMdp& mdp,
                            const CostSpec& cost) {
    return budget.auto_delta ? auto_delta(mdp, cost) : budget.delta;
}

inline int intervention_charge(const BudgetSpec& budget, double cost_paid) {
    if (budget.charge == ChargeMode::kUnit) return 1;
    return std::max(1, static_cast<int>(std::ceil(cost_paid)));
}

/// Product model over (state, remaining budget). The budget coordinate runs
/// over z in {-1, 0, ..., n}; all over-budget levels collapse into the
/// single absorbing stratum z = -1, which is reward-equivalent to any deeper
/// level. Stratum layout: product state = (z + 1) * base_states + s.
struct AugmentedMdp {
    TabularMdp mdp;
    CostSpec cost;
    int base_states = 0;
    int budget_n = 0;
    double delta = 0.0;

    int strata() const { return budget_n + 2; }
    int index(int s, int z) const { return (z + 1) * base_states + s; }
    int base_state(int idx) const { return idx % base_states; }
    int budget_level(int idx) const { return idx / base_states - 1; }
};

/// Builds the augmented model: interventions decrement the budget
/// coordinate, rewards equal the base rewards while z >= 0 and -delta once
/// the budget has been exceeded. The result is a well-formed model, so every
/// exact-solver routine applies unchanged.
inline AugmentedMdp augment_mdp(const TabularMdp& base, const CostSpec& cost,
                                const BudgetSpec& budget, std::size_t max_states = 200000) {
    budget.validate();
    const int strata = budget.n + 2;
    const std::size_t product = static_cast<std::size_t>(strata) * base.n_states;
    if (product > max_states)
        throw std::invalid_argument("augmented product has " + std::to_string(product) +
                                    " states, above the limit of " + std::to_string(max_states));

    AugmentedMdp out;
    out.base_states = base.n_states;
    out.budget_n = budget.n;
    out.delta = resolve_delta(budget, base, cost);
    out.mdp = TabularMdp::zeros(static_cast<int>(product), base.n_actions, base.gamma);
    out.mdp.action_magnitude = base.action_magnitude;

    for (int z = -1; z <= budget.n; ++z) {
        for (int s = 0; s < base.n_states; ++s) {
            const int from = out.index(s, z);
            // Null action keeps the budget level.
            auto null_row = base.row(kNullAction, s);
            for (int next = 0; next < base.n_states; ++next)
                out.mdp.p(kNullAction, from, out.index(next, z)) = null_row[next];
            out.mdp.r(kNullAction, from) = z >= 0 ? base.r(kNullAction, s) : -out.delta;
            // Interventions decrement it (clamped at the absorbing stratum).
            for (int a = 1; a <= base.n_actions; ++a) {
                int z_next = std::max(z - intervention_charge(budget, cost(base, s, a)), -1);
                auto row = base.row(a, s);
                for (int next = 0; next < base.n_states; ++next)
                    out.mdp.p(a, from, out.index(next, z_next)) = row[next];
                out.mdp.r(a, from) = z >= 0 ? base.r(a, s) : -out.delta;
            }
        }
    }

    // The cost structure carries over pointwise; a state-dependent term sees
    // the base state of each product state.
    switch (cost.form()) {
    case CostForm::kZero:
    case CostForm::kFixed:
    case CostForm::kFixedPlusProportional: out.cost = cost; break;
    case CostForm::kFixedPlusStateDependent: {
        int base_states = base.n_states;
        CostSpec inner = cost;
        TabularMdp base_copy = base;
        out.cost = CostSpec::fixed_plus_state_dependent(
            cost.kappa(), [inner, base_copy, base_states](int s, int a) {
                return inner(base_copy, s % base_states, a) - inner.kappa();
            });
        break;
    }
    }
    return out;
}

/// Values on one budget stratum of an augmented solution.
inline ValueFunction stratum_values(const AugmentedMdp& aug, const ValueFunction& v, int z) {
    ValueFunction out(aug.base_states);
    for (int s = 0; s < aug.base_states; ++s) out[s] = v[aug.index(s, z)];
    return out;
}

/// Episodic wrapper that tracks the remaining budget in the observation.
/// Soft mode reshapes rewards to -delta once the budget has been exceeded;
/// hard mode masks interventions that the remaining budget cannot cover, so
/// a violation is impossible by construction.
class BudgetEnv : public DiscreteEnv {
  public:
    BudgetEnv(DiscreteEnv& inner, BudgetSpec budget, double delta)
        : inner_(inner), budget_(budget), delta_(delta) {
        budget_.validate();
        if (budget_.mode == BudgetMode::kSoft && !(delta_ > 0.0))
            throw std::invalid_argument("soft budget mode needs a positive delta");
    }

    int observation_count() const override {
        return (budget_.n + 2) * inner_.observation_count();
    }
    int action_count() const override { return inner_.action_count(); }
    int horizon() const override { return inner_.horizon(); }
    double gamma() const override { return inner_.gamma(); }

    int reset(RngStream& rng) override {
        z_ = budget_.n;
        int s = inner_.reset(rng);
        return observe(s);
    }

    TransitionSample step(int action, RngStream& rng) override {
        if (budget_.mode == BudgetMode::kHard && action != kNullAction &&
            !intervention_allowed())
            throw std::logic_error("intervention taken while masked by the budget");
        int z_before = z_;
        TransitionSample t = inner_.step(action, rng);
        if (t.intervened) z_ = std::max(z_ - intervention_charge(budget_, t.cost), -1);
        t.state = observe_at(t.state, z_before);
        t.next_state = observe_at(t.next_state, z_);
        if (z_before < 0) t.reward = -delta_;
        return t;
    }

    bool intervention_allowed() const override {
        if (!inner_.intervention_allowed()) return false;
        if (budget_.mode == BudgetMode::kHard) {
            // Enough budget for the cheapest possible charge.
            return z_ >= 1;
        }
        return true;
    }

    int budget_level() const { return z_; }

  private:
    int observe(int s) const { return observe_at(s, z_); }
    int observe_at(int s, int z) const { return (z + 1) * inner_.observation_count() + s; }

    DiscreteEnv& inner_;
    BudgetSpec budget_;
    double delta_;
    int z_ = 0;
};

/// Wraps an environment with budget tracking. Delta is resolved by the
/// caller (auto sizing needs a tabular model; for plain environments pass an
/// explicit value).
inline BudgetEnv augment_env(DiscreteEnv& env, const BudgetSpec& budget, double delta) {
    return BudgetEnv(env, budget, delta);
}

/// Agent under audit: maps an observation to an action.
using PolicyFn = std::function<int(int observation, RngStream& rng)>;

inline PolicyFn policy_fn(const ImpulsePolicy& policy) {
    return [policy](int obs, RngStream&) { return policy.executed_action(obs); };
}

/// Fraction of episodes whose executed interventions exceed the budget n.
inline double check_budget_satisfaction(const PolicyFn& policy, DiscreteEnv& env, int n,
                                        int episodes, std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    RngStream env_rng = rng_stream(seed, "budget_audit/env");
    RngStream policy_rng = rng_stream(seed, "budget_audit/policy");
    int violations = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        int s = env.reset(env_rng);
        long interventions = 0;
        for (int t = 0; t < env.horizon(); ++t) {
            int a = policy(s, policy_rng);
            if (a != kNullAction && !env.intervention_allowed()) a = kNullAction;
            TransitionSample sample = env.step(a, env_rng);
            if (sample.intervened) ++interventions;
            s = sample.next_state;
        }
        if (interventions > n) ++violations;
    }
    return static_cast<double>(violations) / episodes;
}

} // namespace licra
