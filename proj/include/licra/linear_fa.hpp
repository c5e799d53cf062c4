#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "licra/common.hpp"
#include "licra/env.hpp"
#include "licra/exact.hpp"
#include "licra/mdp.hpp"
#include "licra/qlearn.hpp"
#include "licra/rng.hpp"

namespace licra {

/// Linearly independent basis over branch pairs (s, a) with a = 0 for the
/// null branch. basis() writes the feature vector for one pair into a
/// caller-provided buffer of length dimension.
struct FeatureMap {
    int dimension = 0;
    int n_states = 0;
    int n_actions = 0;
    std::function<void(int s, int a, std::span<double> out)> basis;
    std::vector<std::string> labels;

    std::vector<double> eval(int s, int a) const {
        std::vector<double> out(dimension, 0.0);
        basis(s, a, out);
        return out;
    }
};

struct WeightVector {
    std::vector<double> r;
    long steps = 0;

    static WeightVector zeros(int dimension) {
        WeightVector w;
        w.r.assign(dimension, 0.0);
        return w;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : r) m = std::max(m, std::abs(x));
        return m;
    }
};

/// Exact-representation features: one indicator per (state, branch) pair.
inline FeatureMap feature_onehot(int n_states, int n_actions) {
    FeatureMap f;
    f.n_states = n_states;
    f.n_actions = n_actions;
    f.dimension = n_states * (n_actions + 1);
    f.basis = [n_actions](int s, int a, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[static_cast<std::size_t>(s) * (n_actions + 1) + a] = 1.0;
    };
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a <= n_actions; ++a)
            f.labels.push_back("onehot(s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")");
    return f;
}

/// Coarse features: states pooled into contiguous groups, one indicator per
/// (group, branch) pair.
inline FeatureMap feature_aggregate(int n_states, int n_actions, int n_groups) {
    if (n_groups < 1 || n_groups > n_states)
        throw std::invalid_argument("group count must lie in [1, n_states]");
    FeatureMap f;
    f.n_states = n_states;
    f.n_actions = n_actions;
    f.dimension = n_groups * (n_actions + 1);
    f.basis = [n_states, n_actions, n_groups](int s, int a, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        int g = static_cast<int>(static_cast<long>(s) * n_groups / n_states);
        out[static_cast<std::size_t>(g) * (n_actions + 1) + a] = 1.0;
    };
    for (int g = 0; g < n_groups; ++g)
        for (int a = 0; a <= n_actions; ++a)
            f.labels.push_back("group(g=" + std::to_string(g) + ",a=" + std::to_string(a) + ")");
    return f;
}

/// Radial bumps over the normalized state coordinate, one block per branch.
inline FeatureMap feature_rbf(int n_states, int n_actions, int n_centers, double bandwidth) {
    if (n_centers < 1) throw std::invalid_argument("need at least one center");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    FeatureMap f;
    f.n_states = n_states;
    f.n_actions = n_actions;
    f.dimension = n_centers * (n_actions + 1);
    double denom = n_states > 1 ? static_cast<double>(n_states - 1) : 1.0;
    f.basis = [n_actions, n_centers, bandwidth, denom](int s, int a, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        double x = static_cast<double>(s) / denom;
        for (int j = 0; j < n_centers; ++j) {
            double c = n_centers > 1 ? static_cast<double>(j) / (n_centers - 1) : 0.5;
            double d = (x - c) / bandwidth;
            out[static_cast<std::size_t>(a) * n_centers + j] = std::exp(-0.5 * d * d);
        }
    };
    for (int a = 0; a <= n_actions; ++a)
        for (int j = 0; j < n_centers; ++j)
            f.labels.push_back("rbf(a=" + std::to_string(a) + ",c=" + std::to_string(j) + ")");
    return f;
}

/// Polynomial features (degree <= 2) of the normalized state coordinate,
/// one block per branch.
inline FeatureMap feature_poly(int n_states, int n_actions, int degree) {
    if (degree < 0 || degree > 2) throw std::invalid_argument("degree must be 0, 1, or 2");
    FeatureMap f;
    f.n_states = n_states;
    f.n_actions = n_actions;
    int terms = degree + 1;
    f.dimension = terms * (n_actions + 1);
    double denom = n_states > 1 ? static_cast<double>(n_states - 1) : 1.0;
    f.basis = [terms, denom](int s, int a, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        double x = static_cast<double>(s) / denom;
        double m = 1.0;
        for (int j = 0; j < terms; ++j) {
            out[static_cast<std::size_t>(a) * terms + j] = m;
            m *= x;
        }
    };
    for (int a = 0; a <= n_actions; ++a)
        for (int j = 0; j < terms; ++j)
            f.labels.push_back("poly(a=" + std::to_string(a) + ",deg=" + std::to_string(j) + ")");
    return f;
}

/// Linear estimate (Phi r)(s, a).
inline double q_hat(const FeatureMap& f, const WeightVector& w, int s, int a) {
    if (static_cast<int>(w.r.size()) != f.dimension)
        throw std::invalid_argument("weight vector length " + std::to_string(w.r.size()) +
                                    " does not match feature dimension " +
                                    std::to_string(f.dimension));
    std::vector<double> phi(f.dimension, 0.0);
    f.basis(s, a, phi);
    double dot = 0.0;
    for (int k = 0; k < f.dimension; ++k) dot += phi[k] * w.r[k];
    return dot;
}

namespace detail {

inline double fa_q(const FeatureMap& f, const WeightVector& w, int s, int a,
                   std::vector<double>& buf) {
    f.basis(s, a, buf);
    double dot = 0.0;
    for (int k = 0; k < f.dimension; ++k) dot += buf[k] * w.r[k];
    return dot;
}

// Greedy branch max; identical comparison order to QTable::state_value so
// one-hot runs and tabular runs agree bit for bit.
inline double fa_state_value(const FeatureMap& f, const WeightVector& w, int n_actions, int s,
                             std::vector<double>& buf) {
    double v = fa_q(f, w, s, kNullAction, buf);
    for (int a = 1; a <= n_actions; ++a) v = std::max(v, fa_q(f, w, s, a, buf));
    return v;
}

} // namespace detail

/// One stochastic-approximation step on the executed pair z = (s, a):
///   r <- r + step * phi(z) * (theta(z) + gamma * v(next) - (Phi r)(z))
/// where theta is the observed effective reward and v the greedy branch max
/// under the current weights. Returns the temporal-difference error.
inline double fa_update(WeightVector& w, const FeatureMap& f, int n_actions, double gamma,
                        const TransitionSample& t, double step, std::vector<double>& buf) {
    if (!(step >= 0.0)) throw std::invalid_argument("step must be nonnegative");
    double v_next = detail::fa_state_value(f, w, n_actions, t.next_state, buf);
    double target =
        t.intervened ? (t.reward - t.cost) + gamma * v_next : t.reward + gamma * v_next;
    f.basis(t.state, t.action, buf);
    double qz = 0.0;
    for (int k = 0; k < f.dimension; ++k) qz += buf[k] * w.r[k];
    double td = target - qz;
    if (!std::isfinite(td))
        throw SolverError("non-finite temporal difference at step " + std::to_string(w.steps),
                          td);
    for (int k = 0; k < f.dimension; ++k)
        if (buf[k] != 0.0) w.r[k] += step * buf[k] * td;
    ++w.steps;
    return td;
}

/// Exact-kernel variant: the continuation value of the next state is taken
/// in expectation over the model instead of from the single sampled
/// successor. Used in verification mode.
inline double fa_update_model(WeightVector& w, const FeatureMap& f, const TabularMdp& mdp,
                              const CostSpec& cost, const TransitionSample& t, double step,
                              std::vector<double>& buf) {
    if (!(step >= 0.0)) throw std::invalid_argument("step must be nonnegative");
    double expected = 0.0;
    auto row = mdp.row(t.action, t.state);
    for (int next = 0; next < mdp.n_states; ++next) {
        if (row[next] == 0.0) continue;
        expected += row[next] * detail::fa_state_value(f, w, mdp.n_actions, next, buf);
    }
    double theta = effective_reward(mdp, cost, t.state, t.action);
    double target = theta + mdp.gamma * expected;
    f.basis(t.state, t.action, buf);
    double qz = 0.0;
    for (int k = 0; k < f.dimension; ++k) qz += buf[k] * w.r[k];
    double td = target - qz;
    if (!std::isfinite(td))
        throw SolverError("non-finite temporal difference at step " + std::to_string(w.steps),
                          td);
    for (int k = 0; k < f.dimension; ++k)
        if (buf[k] != 0.0) w.r[k] += step * buf[k] * td;
    ++w.steps;
    return td;
}

/// How training steps decay. Global is the documented Robbins-Monro default
/// c / (1 + t)^0.7 on the step clock; visit-count reuses the tabular
/// per-pair rates, which makes one-hot runs reproduce the tabular learner
/// exactly.
enum class FaStepMode { kGlobal, kVisitCount };

struct FaSchedule {
    double step_c = 0.5;
    double step_omega = 0.7;
    double alpha0 = 1.0;
    double omega = 0.7;
    double epsilon0 = 1.0;
    double epsilon_min = 0.05;
    double epsilon_decay = 0.999;
    ExploreMode explore = ExploreMode::kUniform;
    FaStepMode step_mode = FaStepMode::kGlobal;
    bool model_target = false;
    double divergence_bound = 1e6;

    void validate() const {
        if (!(step_c > 0.0)) throw std::invalid_argument("step_c must be positive");
        if (!(step_omega > 0.5) || step_omega > 1.0)
            throw std::invalid_argument("step_omega must lie in (0.5, 1]");
        if (!(alpha0 > 0.0) || alpha0 > 1.0)
            throw std::invalid_argument("alpha0 must lie in (0, 1]");
        if (!(omega > 0.5) || omega > 1.0)
            throw std::invalid_argument("omega must lie in (0.5, 1]");
        if (!(divergence_bound > 0.0))
            throw std::invalid_argument("divergence bound must be positive");
    }

    double epsilon_at(int episode) const {
        return std::max(epsilon_min, epsilon0 * std::pow(epsilon_decay, episode));
    }
};

struct FaResult {
    WeightVector w;
    LearnerDiagnostics diag;
    std::vector<double> episode_mean_td; // windowed Bellman-error estimate
};

namespace detail {

inline int fa_behavior(const FeatureMap& f, const WeightVector& w, int n_actions, int s,
                       double eps, RngStream& rng, bool allow, ExploreMode mode,
                       std::vector<double>& buf) {
    if (!allow || n_actions == 0) return kNullAction;
    if (rng.uniform() < eps) {
        if (mode == ExploreMode::kBranch)
            return rng.uniform_int(2) == 0 ? kNullAction : 1 + rng.uniform_int(n_actions);
        return rng.uniform_int(n_actions + 1);
    }
    double best = -std::numeric_limits<double>::infinity();
    int best_action = kNullAction;
    for (int a = 1; a <= n_actions; ++a) {
        double v = fa_q(f, w, s, a, buf);
        if (v > best) {
            best = v;
            best_action = a;
        }
    }
    if (fa_q(f, w, s, kNullAction, buf) >= best - kTieEpsilon) return kNullAction;
    return best_action;
}

inline FaResult train_fa_loop(DiscreteEnv& env, const FeatureMap& f, const FaSchedule& sched,
                              int episodes, std::uint64_t seed, const TabularMdp* mdp,
                              const CostSpec* cost) {
    sched.validate();
    if (episodes < 0) throw std::invalid_argument("episodes must be >= 0");
    if (f.n_states != env.observation_count() || f.n_actions != env.action_count())
        throw std::invalid_argument("feature map shape does not match the environment");
    if (sched.model_target && mdp == nullptr)
        throw std::invalid_argument("model-target training requires a known model");

    FaResult out;
    out.w = WeightVector::zeros(f.dimension);
    VisitCounts visits = VisitCounts::zeros(env.observation_count(), env.action_count());
    std::vector<double> buf(f.dimension, 0.0);

    RngStream env_rng = rng_stream(seed, "env");
    RngStream behavior_rng = rng_stream(seed, "behavior");
    const double gamma = env.gamma();
    long global_step = 0;
    long cumulative = 0;

    for (int ep = 0; ep < episodes; ++ep) {
        double eps = sched.epsilon_at(ep);
        int s = env.reset(env_rng);
        double ret = 0.0, reward_sum = 0.0, td_abs_sum = 0.0;
        long interventions = 0;
        for (int t = 0; t < env.horizon(); ++t) {
            int a = fa_behavior(f, out.w, env.action_count(), s, eps, behavior_rng,
                                env.intervention_allowed(), sched.explore, buf);
            TransitionSample sample = env.step(a, env_rng);
            double step;
            if (sched.step_mode == FaStepMode::kVisitCount) {
                long& count = sample.intervened ? visits.act_count(sample.state, sample.action)
                                                : visits.null_[sample.state];
                step = sched.alpha0 / std::pow(1.0 + static_cast<double>(count), sched.omega);
                ++count;
            } else {
                step = sched.step_c /
                       std::pow(1.0 + static_cast<double>(global_step), sched.step_omega);
            }
            ++global_step;
            double td = sched.model_target
                            ? fa_update_model(out.w, f, *mdp, *cost, sample, step, buf)
                            : fa_update(out.w, f, env.action_count(), gamma, sample, step, buf);
            td_abs_sum += std::abs(td);
            ret += sample.reward - sample.cost;
            reward_sum += sample.reward;
            if (sample.intervened) ++interventions;
            s = sample.next_state;
            ++out.diag.total_steps;
        }
        if (out.w.max_abs() > sched.divergence_bound)
            throw SolverError("weights diverged after episode " + std::to_string(ep) +
                                  "; max |r| = " + fmt_double(out.w.max_abs()),
                              out.w.max_abs());
        cumulative += interventions;
        out.diag.episode_returns.push_back(ret);
        out.diag.episode_rewards.push_back(reward_sum);
        out.diag.episode_interventions.push_back(interventions);
        out.diag.cumulative_interventions.push_back(cumulative);
        out.diag.epsilons.push_back(eps);
        out.diag.max_abs_q = std::max(out.diag.max_abs_q, out.w.max_abs());
        out.episode_mean_td.push_back(td_abs_sum / env.horizon());
    }
    return out;
}

} // namespace detail

/// Online training of the linear estimate on an environment.
inline FaResult train_fa(DiscreteEnv& env, const FeatureMap& f, const FaSchedule& sched,
                         int episodes, std::uint64_t seed) {
    return detail::train_fa_loop(env, f, sched, episodes, seed, nullptr, nullptr);
}

/// Overload on a known model (enables model-target verification mode).
inline FaResult train_fa(const TabularMdp& mdp, const CostSpec& cost, const FeatureMap& f,
                         const FaSchedule& sched, int episodes, int horizon,
                         std::uint64_t seed) {
    MdpEnv env(mdp, cost, horizon);
    return detail::train_fa_loop(env, f, sched, episodes, seed, &mdp, &cost);
}

/// Recovered per-state values max_a (Phi r)(s, a).
inline ValueFunction fa_values(const FeatureMap& f, const WeightVector& w) {
    ValueFunction v(f.n_states);
    std::vector<double> buf(f.dimension, 0.0);
    for (int s = 0; s < f.n_states; ++s)
        v[s] = detail::fa_state_value(f, w, f.n_actions, s, buf);
    return v;
}

/// Stationary weights of the branch pairs (s, a) under the uniform behavior
/// policy: the state chain mixes all actions equally, and each pair gets its
/// state's stationary mass split evenly. Damped power iteration keeps
/// periodic chains convergent.
inline std::vector<double> stationary_pair_weights(const TabularMdp& mdp) {
    const int n = mdp.n_states;
    const int axis = mdp.n_actions + 1;
    std::vector<double> d(n, 1.0 / n), next(n, 0.0);
    for (int iter = 0; iter < 200000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < n; ++s) {
            double mass = d[s] / axis;
            for (int a = 0; a < axis; ++a) {
                auto row = mdp.row(a, s);
                for (int j = 0; j < n; ++j) next[j] += mass * row[j];
            }
        }
        double diff = 0.0;
        for (int j = 0; j < n; ++j) {
            next[j] = 0.5 * d[j] + 0.5 * next[j];
            diff += std::abs(next[j] - d[j]);
        }
        d = next;
        if (diff < 1e-14) break;
    }
    std::vector<double> pair(static_cast<std::size_t>(n) * axis, 0.0);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < axis; ++a) pair[static_cast<std::size_t>(s) * axis + a] = d[s] / axis;
    return pair;
}

/// Pair weights matching episodic training with uniform restarts: the state
/// occupancy averaged over a horizon from a uniform start, split evenly over
/// the uniform behavior's arms. Strictly positive even on absorbing chains.
inline std::vector<double> episodic_pair_weights(const TabularMdp& mdp, int horizon) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    const int n = mdp.n_states;
    const int axis = mdp.n_actions + 1;
    std::vector<double> d(n, 1.0 / n), occupancy(n, 0.0), next(n, 0.0);
    for (int t = 0; t < horizon; ++t) {
        for (int s = 0; s < n; ++s) occupancy[s] += d[s] / horizon;
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < n; ++s) {
            double mass = d[s] / axis;
            for (int a = 0; a < axis; ++a) {
                auto row = mdp.row(a, s);
                for (int j = 0; j < n; ++j) next[j] += mass * row[j];
            }
        }
        d = next;
    }
    std::vector<double> pair(static_cast<std::size_t>(n) * axis, 0.0);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < axis; ++a)
            pair[static_cast<std::size_t>(s) * axis + a] = occupancy[s] / axis;
    return pair;
}

namespace detail {

inline Eigen::MatrixXd feature_matrix(const TabularMdp& mdp, const FeatureMap& f) {
    const int axis = mdp.n_actions + 1;
    Eigen::MatrixXd phi(mdp.n_states * axis, f.dimension);
    std::vector<double> buf(f.dimension, 0.0);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < axis; ++a) {
            f.basis(s, a, buf);
            for (int k = 0; k < f.dimension; ++k) phi(s * axis + a, k) = buf[k];
        }
    return phi;
}

// One application of the branch Bellman operator to a pair-indexed vector:
// (F q)(s, a) = R(s,a) - C(s,a) + gamma * sum_s' P(s'; a, s) max_a' q(s', a').
inline Eigen::VectorXd pair_bellman(const TabularMdp& mdp, const CostSpec& cost,
                                    const Eigen::VectorXd& q) {
    const int axis = mdp.n_actions + 1;
    std::vector<double> v(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        double best = q(s * axis);
        for (int a = 1; a < axis; ++a) best = std::max(best, q(s * axis + a));
        v[s] = best;
    }
    Eigen::VectorXd out(mdp.n_states * axis);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < axis; ++a) {
            double acc = 0.0;
            auto row = mdp.row(a, s);
            for (int j = 0; j < mdp.n_states; ++j) acc += row[j] * v[j];
            out(s * axis + a) = effective_reward(mdp, cost, s, a) + mdp.gamma * acc;
        }
    return out;
}

inline double weighted_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& d) {
    return std::sqrt((d.array() * x.array().square()).sum());
}

} // namespace detail

/// Smallest eigenvalue of the weighted Gram matrix Phi^T D Phi; values at or
/// below ~1e-8 mean the basis is rank deficient under that sampling
/// distribution.
inline double gram_min_eigenvalue(const TabularMdp& mdp, const FeatureMap& f,
                                  std::span<const double> d_weights) {
    Eigen::MatrixXd phi = detail::feature_matrix(mdp, f);
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(d_weights.data(), d_weights.size());
    Eigen::MatrixXd gram = phi.transpose() * d.asDiagonal() * phi;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    return eig.eigenvalues().minCoeff();
}

struct ProjectedFixedPoint {
    WeightVector w;
    int iterations = 0;
    double residual = 0.0;
};

/// Deterministic route to the limit weights: iterate the D-weighted
/// projection of the branch Bellman operator until the weights stop moving.
/// Serves as the independent oracle for the stochastic trainer.
inline ProjectedFixedPoint solve_projected_fixed_point(const TabularMdp& mdp,
                                                       const CostSpec& cost, const FeatureMap& f,
                                                       std::span<const double> d_weights,
                                                       double tol = 1e-12,
                                                       int max_iters = 200000) {
    const int axis = mdp.n_actions + 1;
    Eigen::MatrixXd phi = detail::feature_matrix(mdp, f);
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(d_weights.data(), d_weights.size());
    Eigen::MatrixXd gram = phi.transpose() * d.asDiagonal() * phi;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.eigenvalues().minCoeff() <= 1e-8)
        throw std::invalid_argument("feature matrix is rank deficient: smallest Gram eigenvalue " +
                                    fmt_double(eig.eigenvalues().minCoeff()));
    Eigen::LDLT<Eigen::MatrixXd> solver(gram);

    Eigen::VectorXd r = Eigen::VectorXd::Zero(f.dimension);
    ProjectedFixedPoint out;
    for (int k = 1; k <= max_iters; ++k) {
        Eigen::VectorXd fq = detail::pair_bellman(mdp, cost, phi * r);
        Eigen::VectorXd r_next = solver.solve(phi.transpose() * (d.asDiagonal() * fq));
        double diff = (r_next - r).lpNorm<Eigen::Infinity>();
        r = r_next;
        out.iterations = k;
        out.residual = diff;
        if (diff < tol) break;
    }
    if (out.residual >= tol)
        throw SolverError("projected fixed-point iteration did not converge; residual " +
                              fmt_double(out.residual),
                          out.residual);
    out.w.r.assign(r.data(), r.data() + f.dimension);
    (void)axis;
    return out;
}

struct BoundCheck {
    double lhs = 0.0;              // ||Phi r - Q*||_D
    double rhs = 0.0;              // (1 - gamma^2)^{-1/2} ||Pi Q* - Q*||_D + 1e-8
    double factor = 0.0;           // (1 - gamma^2)^{-1/2}
    double projection_error = 0.0; // ||Pi Q* - Q*||_D
    double gram_min_eig = 0.0;
    bool holds = false;
};

/// Checks the approximation-error bound of the linear limit point against
/// the exact branch values: ||Phi r - Q*||_D <= (1-gamma^2)^{-1/2}
/// ||Pi Q* - Q*||_D, all norms weighted by the sampling distribution D.
inline BoundCheck verify_error_bound(const TabularMdp& mdp, const CostSpec& cost,
                                     const FeatureMap& f, const WeightVector& w,
                                     std::span<const double> d_weights) {
    const int axis = mdp.n_actions + 1;
    const int pairs = mdp.n_states * axis;
    if (pairs > 2000)
        throw std::invalid_argument("exact branch values need a small model; got " +
                                    std::to_string(pairs) + " pairs");
    if (static_cast<int>(d_weights.size()) != pairs)
        throw std::invalid_argument("weight vector D has the wrong length");
    for (double x : d_weights)
        if (!(x > 0.0)) throw std::invalid_argument("D must be strictly positive");

    BoundCheck out;
    out.gram_min_eig = gram_min_eigenvalue(mdp, f, d_weights);
    if (out.gram_min_eig <= 1e-8)
        throw std::invalid_argument("feature matrix is rank deficient: smallest Gram eigenvalue " +
                                    fmt_double(out.gram_min_eig));

    // Exact per-branch values from the dynamic-programming fixed point.
    auto vi = value_iteration(mdp, cost, 1e-12);
    Eigen::VectorXd q_star(pairs);
    for (int s = 0; s < mdp.n_states; ++s) {
        q_star(s * axis + kNullAction) = null_branch_value(mdp, vi.v, s);
        for (int a = 1; a < axis; ++a)
            q_star(s * axis + a) = intervention_value(mdp, cost, vi.v, s, a);
    }

    Eigen::MatrixXd phi = detail::feature_matrix(mdp, f);
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(d_weights.data(), d_weights.size());
    Eigen::MatrixXd gram = phi.transpose() * d.asDiagonal() * phi;
    Eigen::LDLT<Eigen::MatrixXd> solver(gram);
    Eigen::VectorXd projected = phi * solver.solve(phi.transpose() * (d.asDiagonal() * q_star));

    Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(w.r.data(), w.r.size());
    out.factor = 1.0 / std::sqrt(1.0 - mdp.gamma * mdp.gamma);
    out.projection_error = detail::weighted_norm(projected - q_star, d);
    out.lhs = detail::weighted_norm(phi * r - q_star, d);
    out.rhs = out.factor * out.projection_error + 1e-8;
    out.holds = out.lhs <= out.rhs;
    return out;
}

/// Exact mean update direction at r under pair distribution D:
/// Phi^T D (F(Phi r) - Phi r). Zero exactly at the projected fixed point.
inline std::vector<double> mean_update_exact(const TabularMdp& mdp, const CostSpec& cost,
                                             const FeatureMap& f, const WeightVector& w,
                                             std::span<const double> d_weights) {
    Eigen::MatrixXd phi = detail::feature_matrix(mdp, f);
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(d_weights.data(), d_weights.size());
    Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(w.r.data(), w.r.size());
    Eigen::VectorXd q = phi * r;
    Eigen::VectorXd res = detail::pair_bellman(mdp, cost, q) - q;
    Eigen::VectorXd mean = phi.transpose() * (d.asDiagonal() * res);
    return std::vector<double>(mean.data(), mean.data() + f.dimension);
}

/// Monte-Carlo estimate of the same mean update: pairs drawn from D,
/// successors from the kernel, targets from the sampled branch read-out.
inline std::vector<double> mean_update_mc(const TabularMdp& mdp, const CostSpec& cost,
                                          const FeatureMap& f, const WeightVector& w,
                                          std::span<const double> d_weights, int samples,
                                          std::uint64_t seed) {
    const int axis = mdp.n_actions + 1;
    RngStream rng = rng_stream(seed, "fa/mean_update");
    std::vector<double> acc(f.dimension, 0.0);
    std::vector<double> buf(f.dimension, 0.0);
    for (int i = 0; i < samples; ++i) {
        int pair = rng.sample_discrete(d_weights);
        int s = pair / axis;
        int a = pair % axis;
        TransitionSample t = sample_transition(mdp, cost, s, a, rng);
        double v_next = detail::fa_state_value(f, w, mdp.n_actions, t.next_state, buf);
        double theta = t.reward - t.cost;
        f.basis(s, a, buf);
        double qz = 0.0;
        for (int k = 0; k < f.dimension; ++k) qz += buf[k] * w.r[k];
        double td = theta + mdp.gamma * v_next - qz;
        for (int k = 0; k < f.dimension; ++k) acc[k] += buf[k] * td;
    }
    for (double& x : acc) x /= samples;
    return acc;
}

} // namespace licra
