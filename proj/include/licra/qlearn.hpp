#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "licra/common.hpp"
#include "licra/env.hpp"
#include "licra/exact.hpp"
#include "licra/mdp.hpp"
#include "licra/rng.hpp"

namespace licra {

/// Two-table action values: q_act(s, a) is the value of intervening with a
/// at s, q_null(s) the value of the null branch. A sampled transition only
/// reveals the executed branch, so the two branches are learned separately;
/// the state value is the max over both.
struct QTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> q_act;  // [s * n_actions + (a - 1)]
    std::vector<double> q_null; // [s]

    static QTable zeros(int n_states, int n_actions, double init = 0.0) {
        QTable q;
        q.n_states = n_states;
        q.n_actions = n_actions;
        q.q_act.assign(static_cast<std::size_t>(n_states) * n_actions, init);
        q.q_null.assign(n_states, init);
        return q;
    }

    double act(int s, int a) const {
        return q_act[static_cast<std::size_t>(s) * n_actions + (a - 1)];
    }
    double& act(int s, int a) {
        return q_act[static_cast<std::size_t>(s) * n_actions + (a - 1)];
    }

    /// Best intervention value and its action (lowest index wins ties).
    std::pair<double, int> best_act(int s) const {
        double best = -std::numeric_limits<double>::infinity();
        int best_action = kNullAction;
        for (int a = 1; a <= n_actions; ++a) {
            double v = act(s, a);
            if (v > best) {
                best = v;
                best_action = a;
            }
        }
        return {best, best_action};
    }

    /// Greedy state value max(max_a q_act, q_null).
    double state_value(int s) const {
        double v = q_null[s];
        for (int a = 1; a <= n_actions; ++a) v = std::max(v, act(s, a));
        return v;
    }

    ValueFunction values() const {
        ValueFunction v(n_states);
        for (int s = 0; s < n_states; ++s) v[s] = state_value(s);
        return v;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : q_act) m = std::max(m, std::abs(x));
        for (double x : q_null) m = std::max(m, std::abs(x));
        return m;
    }
};

/// How the epsilon-exploration draw picks among actions. Uniform treats the
/// null action as one more arm. Branch first flips intervene/wait and only
/// then picks an arm, which halves the exploration cost paid in costly
/// environments; it mirrors the nested decision structure of the learner.
enum class ExploreMode { kUniform, kBranch };

/// Learning-rate and exploration schedule. The per-entry rate
/// alpha0 / (1 + visits)^omega with omega in (0.5, 1] satisfies the usual
/// stochastic-approximation conditions (sum alpha = inf, sum alpha^2 < inf).
struct LearnSchedule {
    double alpha0 = 1.0;
    double omega = 0.7;
    double epsilon0 = 1.0;
    double epsilon_min = 0.05;
    double epsilon_decay = 0.999; // per episode
    double optimistic_init = 0.0;
    ExploreMode explore = ExploreMode::kUniform;

    void validate() const {
        if (!(alpha0 > 0.0) || alpha0 > 1.0)
            throw std::invalid_argument("alpha0 must lie in (0, 1]");
        if (!(omega > 0.5) || omega > 1.0)
            throw std::invalid_argument("omega must lie in (0.5, 1]");
        if (epsilon0 < 0.0 || epsilon0 > 1.0 || epsilon_min < 0.0 || epsilon_min > 1.0)
            throw std::invalid_argument("epsilon bounds must lie in [0, 1]");
        if (!(epsilon_decay > 0.0) || epsilon_decay > 1.0)
            throw std::invalid_argument("epsilon_decay must lie in (0, 1]");
    }

    double epsilon_at(int episode) const {
        return std::max(epsilon_min, epsilon0 * std::pow(epsilon_decay, episode));
    }
};

/// Per-entry visit counters backing the learning-rate decay.
struct VisitCounts {
    std::vector<long> act;   // [s * n_actions + (a - 1)]
    std::vector<long> null_; // [s]
    int n_actions = 0;

    static VisitCounts zeros(int n_states, int n_actions) {
        VisitCounts c;
        c.n_actions = n_actions;
        c.act.assign(static_cast<std::size_t>(n_states) * std::max(n_actions, 1), 0);
        c.null_.assign(n_states, 0);
        return c;
    }

    long& act_count(int s, int a) {
        return act[static_cast<std::size_t>(s) * n_actions + (a - 1)];
    }
    long total(int s) const {
        long t = null_[s];
        for (int a = 1; a <= n_actions; ++a)
            t += act[static_cast<std::size_t>(s) * n_actions + (a - 1)];
        return t;
    }
};

inline double learning_rate(const LearnSchedule& sched, long visits) {
    return sched.alpha0 / std::pow(1.0 + static_cast<double>(visits), sched.omega);
}

/// One model-free update of the executed branch:
///   q <- q + alpha * (reward - cost + gamma * v(next) - q)
/// with v the greedy branch max. Returns the applied increment.
inline double q_update_sampled(QTable& q, const TransitionSample& t, double gamma,
                               const LearnSchedule& sched, VisitCounts& visits) {
    double v_next = q.state_value(t.next_state);
    if (t.intervened) {
        double target = (t.reward - t.cost) + gamma * v_next;
        double alpha = learning_rate(sched, visits.act_count(t.state, t.action));
        ++visits.act_count(t.state, t.action);
        double delta = alpha * (target - q.act(t.state, t.action));
        q.act(t.state, t.action) += delta;
        return delta;
    }
    double target = t.reward + gamma * v_next;
    double alpha = learning_rate(sched, visits.null_[t.state]);
    ++visits.null_[t.state];
    double delta = alpha * (target - q.q_null[t.state]);
    q.q_null[t.state] += delta;
    return delta;
}

/// Model-based (known kernel) update of every entry at state s, targets
/// taken in expectation. Used to validate the online learner against exact
/// dynamic programming. Returns the largest absolute increment.
inline double q_update_model_based(QTable& q, const TabularMdp& mdp, const CostSpec& cost, int s,
                                   const LearnSchedule& sched, VisitCounts& visits) {
    mdp.check_state(s);
    double max_delta = 0.0;
    ValueFunction v = q.values();
    for (int a = 1; a <= mdp.n_actions; ++a) {
        double target = intervention_value(mdp, cost, v, s, a);
        double alpha = learning_rate(sched, visits.act_count(s, a));
        ++visits.act_count(s, a);
        double delta = alpha * (target - q.act(s, a));
        q.act(s, a) += delta;
        max_delta = std::max(max_delta, std::abs(delta));
    }
    double target = null_branch_value(mdp, v, s);
    double alpha = learning_rate(sched, visits.null_[s]);
    ++visits.null_[s];
    double delta = alpha * (target - q.q_null[s]);
    q.q_null[s] += delta;
    return std::max(max_delta, std::abs(delta));
}

/// Synchronous model-based sweep with a fixed step: every entry is updated
/// from a snapshot of the table. With alpha = 1 the induced state values
/// reproduce the value-iteration trajectory exactly.
inline double q_sweep_model_based(QTable& q, const TabularMdp& mdp, const CostSpec& cost,
                                  double alpha) {
    QTable old = q;
    ValueFunction v = old.values();
    double max_delta = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 1; a <= mdp.n_actions; ++a) {
            double target = intervention_value(mdp, cost, v, s, a);
            double delta = alpha * (target - old.act(s, a));
            q.act(s, a) = old.act(s, a) + delta;
            max_delta = std::max(max_delta, std::abs(delta));
        }
        double target = null_branch_value(mdp, v, s);
        double delta = alpha * (target - old.q_null[s]);
        q.q_null[s] = old.q_null[s] + delta;
        max_delta = std::max(max_delta, std::abs(delta));
    }
    return max_delta;
}

/// Epsilon-greedy branch choice. Greedy picks null unless the best
/// intervention beats it by more than kTieEpsilon. When interventions are
/// masked (budget exhausted in hard mode) the choice is forced to null.
inline int behavior_policy(const QTable& q, int s, double epsilon, RngStream& rng,
                           bool allow_intervene = true,
                           ExploreMode mode = ExploreMode::kUniform) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("epsilon must lie in [0, 1]");
    if (!allow_intervene || q.n_actions == 0) return kNullAction;
    if (rng.uniform() < epsilon) {
        if (mode == ExploreMode::kBranch)
            return rng.uniform_int(2) == 0 ? kNullAction : 1 + rng.uniform_int(q.n_actions);
        return rng.uniform_int(q.n_actions + 1);
    }
    auto [best, best_action] = q.best_act(s);
    if (q.q_null[s] >= best - kTieEpsilon) return kNullAction;
    return best_action;
}

/// Greedy impulse policy read off a learned table.
inline ImpulsePolicy policy_from_qtable(const QTable& q) {
    ImpulsePolicy policy = ImpulsePolicy::never(q.n_states);
    for (int s = 0; s < q.n_states; ++s) {
        if (q.n_actions == 0) continue;
        auto [best, best_action] = q.best_act(s);
        if (best > q.q_null[s] + kTieEpsilon) {
            policy.intervene[s] = 1;
            policy.action[s] = best_action;
        }
    }
    return policy;
}

/// Per-episode training record. Returns are undiscounted sums of effective
/// rewards (reward minus cost); reward_sums leave the costs out.
struct LearnerDiagnostics {
    std::vector<double> episode_returns;
    std::vector<double> episode_rewards;
    std::vector<long> episode_interventions;
    std::vector<long> cumulative_interventions;
    std::vector<double> epsilons;
    std::vector<double> oracle_gap; // empty unless an oracle was supplied
    double max_abs_q = 0.0;
    long total_steps = 0;
};

struct TrainResult {
    QTable q;
    ImpulsePolicy policy;
    LearnerDiagnostics diag;
    VisitCounts visits;
};

/// Episodic two-table Q-learning on an environment. Fully deterministic
/// given (environment, schedule, seed): the behavior and environment streams
/// are derived from the seed by name. A run owns its table; parallelism is
/// across runs only.
inline TrainResult train(DiscreteEnv& env, const LearnSchedule& sched, int episodes,
                         std::uint64_t seed, const ValueFunction* oracle = nullptr) {
    sched.validate();
    if (episodes < 0) throw std::invalid_argument("episodes must be >= 0");
    TrainResult out;
    out.q = QTable::zeros(env.observation_count(), env.action_count(), sched.optimistic_init);
    out.visits = VisitCounts::zeros(env.observation_count(), env.action_count());

    RngStream env_rng = rng_stream(seed, "env");
    RngStream behavior_rng = rng_stream(seed, "behavior");
    const double gamma = env.gamma();
    long cumulative = 0;

    for (int ep = 0; ep < episodes; ++ep) {
        double eps = sched.epsilon_at(ep);
        int s = env.reset(env_rng);
        double ret = 0.0, reward_sum = 0.0;
        long interventions = 0;
        for (int t = 0; t < env.horizon(); ++t) {
            int a = behavior_policy(out.q, s, eps, behavior_rng, env.intervention_allowed(),
                                    sched.explore);
            TransitionSample sample;
            try {
                sample = env.step(a, env_rng);
            } catch (const std::exception& e) {
                throw std::runtime_error("environment step failed at episode " +
                                         std::to_string(ep) + ", step " + std::to_string(t) +
                                         ": " + e.what());
            }
            q_update_sampled(out.q, sample, gamma, sched, out.visits);
            ret += sample.reward - sample.cost;
            reward_sum += sample.reward;
            if (sample.intervened) ++interventions;
            s = sample.next_state;
            ++out.diag.total_steps;
        }
        cumulative += interventions;
        out.diag.episode_returns.push_back(ret);
        out.diag.episode_rewards.push_back(reward_sum);
        out.diag.episode_interventions.push_back(interventions);
        out.diag.cumulative_interventions.push_back(cumulative);
        out.diag.epsilons.push_back(eps);
        out.diag.max_abs_q = std::max(out.diag.max_abs_q, out.q.max_abs());
        if (oracle) out.diag.oracle_gap.push_back(sup_norm_diff(out.q.values(), *oracle));
    }
    out.policy = policy_from_qtable(out.q);
    return out;
}

/// Convenience overload: runs the learner on a TabularMdp with uniform
/// random episode starts.
inline TrainResult train(const TabularMdp& mdp, const CostSpec& cost, const LearnSchedule& sched,
                         int episodes, int horizon, std::uint64_t seed,
                         const ValueFunction* oracle = nullptr) {
    MdpEnv env(mdp, cost, horizon);
    return train(env, sched, episodes, seed, oracle);
}

/// Flat single-table baseline: standard Q-learning over the action set with
/// the null action folded in, on effective rewards, with the same schedule
/// machinery as the impulse learner.
struct FlatResult {
    int n_states = 0;
    int n_actions = 0;               // non-null actions
    std::vector<double> q;           // [s * (n_actions + 1) + a]
    LearnerDiagnostics diag;

    double value(int s, int a) const {
        return q[static_cast<std::size_t>(s) * (n_actions + 1) + a];
    }
    double state_value(int s) const {
        double best = value(s, 0);
        for (int a = 1; a <= n_actions; ++a) best = std::max(best, value(s, a));
        return best;
    }
    ValueFunction values() const {
        ValueFunction v(n_states);
        for (int s = 0; s < n_states; ++s) v[s] = state_value(s);
        return v;
    }
    int greedy_action(int s) const {
        int best_a = 0;
        double best = value(s, 0);
        for (int a = 1; a <= n_actions; ++a)
            if (value(s, a) > best) {
                best = value(s, a);
                best_a = a;
            }
        return best_a;
    }
};

inline FlatResult train_flat_baseline(DiscreteEnv& env, const LearnSchedule& sched, int episodes,
                                      std::uint64_t seed) {
    sched.validate();
    FlatResult out;
    out.n_states = env.observation_count();
    out.n_actions = env.action_count();
    const int axis = out.n_actions + 1;
    out.q.assign(static_cast<std::size_t>(out.n_states) * axis, sched.optimistic_init);
    std::vector<long> visits(out.q.size(), 0);

    RngStream env_rng = rng_stream(seed, "env");
    RngStream behavior_rng = rng_stream(seed, "behavior");
    const double gamma = env.gamma();
    long cumulative = 0;

    for (int ep = 0; ep < episodes; ++ep) {
        double eps = sched.epsilon_at(ep);
        int s = env.reset(env_rng);
        double ret = 0.0, reward_sum = 0.0;
        long interventions = 0;
        for (int t = 0; t < env.horizon(); ++t) {
            int a;
            if (!env.intervention_allowed())
                a = kNullAction;
            else if (behavior_rng.uniform() < eps)
                a = behavior_rng.uniform_int(axis);
            else
                a = out.greedy_action(s);
            TransitionSample sample = env.step(a, env_rng);
            double target = (sample.reward - sample.cost) + gamma * out.state_value(sample.next_state);
            std::size_t idx = static_cast<std::size_t>(s) * axis + a;
            double alpha = learning_rate(sched, visits[idx]);
            ++visits[idx];
            out.q[idx] += alpha * (target - out.q[idx]);
            ret += sample.reward - sample.cost;
            reward_sum += sample.reward;
            if (sample.intervened) ++interventions;
            s = sample.next_state;
            ++out.diag.total_steps;
        }
        cumulative += interventions;
        out.diag.episode_returns.push_back(ret);
        out.diag.episode_rewards.push_back(reward_sum);
        out.diag.episode_interventions.push_back(interventions);
        out.diag.cumulative_interventions.push_back(cumulative);
        out.diag.epsilons.push_back(eps);
        for (double x : out.q) out.diag.max_abs_q = std::max(out.diag.max_abs_q, std::abs(x));
    }
    return out;
}

inline FlatResult train_flat_baseline(const TabularMdp& mdp, const CostSpec& cost,
                                      const LearnSchedule& sched, int episodes, int horizon,
                                      std::uint64_t seed) {
    MdpEnv env(mdp, cost, horizon);
    return train_flat_baseline(env, sched, episodes, seed);
}

} // namespace licra
