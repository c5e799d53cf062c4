#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "licra/common.hpp"
#include "licra/mdp.hpp"

namespace licra {

using ValueFunction = std::vector<double>;

/// Paired decision rule: a binary intervene flag per state and, where it is
/// set, the action to apply. Where intervene is false the executed action is
/// the null action.
struct ImpulsePolicy {
    std::vector<std::uint8_t> intervene;
    std::vector<int> action;

    static ImpulsePolicy never(int n_states) {
        ImpulsePolicy p;
        p.intervene.assign(n_states, 0);
        p.action.assign(n_states, kNullAction);
        return p;
    }

    int executed_action(int s) const { return intervene[s] ? action[s] : kNullAction; }
};

/// Value of intervening now at s with non-null action a:
/// R(s,a) - c(s,a) + gamma * sum_s' P(s'; a, s) v(s').
/// Summation is fixed left-to-right so results are schedule-independent.
inline double intervention_value(const TabularMdp& mdp, const CostSpec& cost,
                                 const ValueFunction& v, int s, int a) {
    if (a == kNullAction)
        throw std::invalid_argument("intervention_value requires a non-null action");
    mdp.check_state(s);
    mdp.check_action(a);
    double acc = 0.0;
    auto row = mdp.row(a, s);
    for (int next = 0; next < mdp.n_states; ++next) acc += row[next] * v[next];
    return mdp.r(a, s) - cost(mdp, s, a) + mdp.gamma * acc;
}

/// Value of doing nothing at s: R(s,0) + gamma * sum_s' P(s'; 0, s) v(s').
inline double null_branch_value(const TabularMdp& mdp, const ValueFunction& v, int s) {
    double acc = 0.0;
    auto row = mdp.row(kNullAction, s);
    for (int next = 0; next < mdp.n_states; ++next) acc += row[next] * v[next];
    return mdp.r(kNullAction, s) + mdp.gamma * acc;
}

/// Best intervention value at s, with the achieving action (lowest index on
/// ties). Returns the null branch value alone when there are no actions.
inline std::pair<double, int> best_intervention(const TabularMdp& mdp, const CostSpec& cost,
                                                const ValueFunction& v, int s) {
    double best = -std::numeric_limits<double>::infinity();
    int best_action = kNullAction;
    for (int a = 1; a <= mdp.n_actions; ++a) {
        double val = intervention_value(mdp, cost, v, s, a);
        if (val > best) {
            best = val;
            best_action = a;
        }
    }
    return {best, best_action};
}

/// One application of the impulse Bellman operator: at every state, the max
/// of the best-intervention branch and the null branch. The input is not
/// modified.
inline ValueFunction bellman_apply(const TabularMdp& mdp, const CostSpec& cost,
                                   const ValueFunction& v) {
    ValueFunction out(mdp.n_states, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
        double keep = null_branch_value(mdp, v, s);
        if (mdp.n_actions == 0) {
            out[s] = keep;
            continue;
        }
        auto [act, _] = best_intervention(mdp, cost, v, s);
        out[s] = std::max(act, keep);
    }
    return out;
}

struct ValueIterationResult {
    ValueFunction v;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> residual_history;
};

inline double sup_norm_diff(const ValueFunction& a, const ValueFunction& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Iterates v <- Tv from v == 0 until the sup-norm residual drops below tol.
/// Residuals decay geometrically at rate gamma, so termination is guaranteed
/// for gamma < 1; exceeding max_iters raises SolverError with the last
/// residual.
inline ValueIterationResult value_iteration(const TabularMdp& mdp, const CostSpec& cost,
                                            double tol = 1e-10, int max_iters = 1000000) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration tolerance must be positive");
    ValueIterationResult res;
    res.v.assign(mdp.n_states, 0.0);
    for (int k = 1; k <= max_iters; ++k) {
        ValueFunction next = bellman_apply(mdp, cost, res.v);
        double diff = sup_norm_diff(next, res.v);
        res.v = std::move(next);
        res.iterations = k;
        res.residual = diff;
        res.residual_history.push_back(diff);
        if (diff < tol) return res;
    }
    throw SolverError("value iteration did not converge within " + std::to_string(max_iters) +
                          " iterations; final residual " + fmt_double(res.residual),
                      res.residual);
}

/// Greedy policy read-out from a (near-)fixed point. Intervenes only where
/// the intervention branch beats the null branch by more than kTieEpsilon;
/// ties keep the null action.
inline ImpulsePolicy extract_policy(const TabularMdp& mdp, const CostSpec& cost,
                                    const ValueFunction& v_star) {
    ImpulsePolicy policy = ImpulsePolicy::never(mdp.n_states);
    if (mdp.n_actions == 0) return policy;
    for (int s = 0; s < mdp.n_states; ++s) {
        auto [act_value, act] = best_intervention(mdp, cost, v_star, s);
        double keep = null_branch_value(mdp, v_star, s);
        if (act_value > keep + kTieEpsilon) {
            policy.intervene[s] = 1;
            policy.action[s] = act;
        }
    }
    return policy;
}

/// Exact evaluation of a fixed policy pair by solving the linear system
/// (I - gamma * P_pi) v = r_pi. Uses a dense LU solve up to 2000 states and
/// damped fixed-point iteration beyond that; either way the verified
/// residual of the linear system is below 1e-10 * scale.
inline ValueFunction evaluate_policy(const TabularMdp& mdp, const CostSpec& cost,
                                     const ImpulsePolicy& policy) {
    const int n = mdp.n_states;
    if (static_cast<int>(policy.intervene.size()) != n ||
        static_cast<int>(policy.action.size()) != n)
        throw std::invalid_argument("policy size does not match the MDP");

    std::vector<double> r_pi(n);
    for (int s = 0; s < n; ++s)
        r_pi[s] = effective_reward(mdp, cost, s, policy.executed_action(s));

    ValueFunction v(n, 0.0);
    if (n <= 2000) {
        Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd rhs(n);
        for (int s = 0; s < n; ++s) {
            int a = policy.executed_action(s);
            for (int next = 0; next < n; ++next) system(s, next) -= mdp.gamma * mdp.p(a, s, next);
            rhs(s) = r_pi[s];
        }
        Eigen::VectorXd sol = system.partialPivLu().solve(rhs);
        for (int s = 0; s < n; ++s) v[s] = sol(s);
    } else {
        // Linear fixed point v = r + gamma P v; contraction rate gamma.
        double reward_bound = 0.0;
        for (double x : r_pi) reward_bound = std::max(reward_bound, std::abs(x));
        int iters = static_cast<int>(
            std::ceil(std::log(1e-11 * (1.0 - mdp.gamma) / std::max(reward_bound, 1e-300)) /
                      std::log(std::max(mdp.gamma, 1e-12))));
        iters = std::max(iters, 1);
        for (int k = 0; k < iters; ++k) {
            ValueFunction next(n, 0.0);
            for (int s = 0; s < n; ++s) {
                int a = policy.executed_action(s);
                double acc = 0.0;
                auto row = mdp.row(a, s);
                for (int j = 0; j < n; ++j) acc += row[j] * v[j];
                next[s] = r_pi[s] + mdp.gamma * acc;
            }
            v = std::move(next);
        }
    }

    // Verify the linear-system residual; failure indicates a numerical
    // problem rather than a modelling one (the system is nonsingular for
    // gamma < 1).
    double scale = 1.0;
    for (int s = 0; s < n; ++s) scale = std::max(scale, std::abs(v[s]));
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
        int a = policy.executed_action(s);
        double acc = 0.0;
        auto row = mdp.row(a, s);
        for (int j = 0; j < n; ++j) acc += row[j] * v[j];
        residual = std::max(residual, std::abs(v[s] - mdp.gamma * acc - r_pi[s]));
    }
    if (residual > 1e-10 * scale)
        throw SolverError("policy evaluation residual " + fmt_double(residual) +
                              " exceeds tolerance",
                          residual);
    return v;
}

/// Textbook value iteration over the full action set (null included) on the
/// raw rewards, ignoring intervention costs. This is the standard-RL
/// baseline route: with zero costs the impulse fixed point must match it.
inline ValueIterationResult classical_value_iteration(const TabularMdp& mdp, double tol = 1e-10,
                                                      int max_iters = 1000000) {
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    ValueIterationResult res;
    res.v.assign(mdp.n_states, 0.0);
    for (int k = 1; k <= max_iters; ++k) {
        ValueFunction next(mdp.n_states, 0.0);
        for (int s = 0; s < mdp.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a <= mdp.n_actions; ++a) {
                double acc = 0.0;
                auto row = mdp.row(a, s);
                for (int j = 0; j < mdp.n_states; ++j) acc += row[j] * res.v[j];
                best = std::max(best, mdp.r(a, s) + mdp.gamma * acc);
            }
            next[s] = best;
        }
        double diff = sup_norm_diff(next, res.v);
        res.v = std::move(next);
        res.iterations = k;
        res.residual = diff;
        res.residual_history.push_back(diff);
        if (diff < tol) return res;
    }
    throw SolverError("classical value iteration did not converge", res.residual);
}

} // namespace licra
