#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "licra/mdp.hpp"
#include "licra/rng.hpp"

namespace licra {

/// A named model together with its cost structure.
struct Instance {
    std::string name;
    TabularMdp mdp;
    CostSpec cost;
};

/// Seeded random model: Dirichlet(1) transition rows, rewards uniform on
/// [-1, 1]. Costs are attached separately (see random_cost).
inline TabularMdp make_random_mdp(std::uint64_t seed, int n_states, int n_actions,
                                  double gamma = 0.9) {
    if (n_states < 1 || n_actions < 0) throw std::invalid_argument("bad random MDP shape");
    RngStream rng = rng_stream(seed, "instances/random_mdp");
    TabularMdp m = TabularMdp::zeros(n_states, n_actions, gamma);
    for (int a = 0; a <= n_actions; ++a) {
        for (int s = 0; s < n_states; ++s) {
            double sum = 0.0;
            std::vector<double> raw(n_states);
            for (int next = 0; next < n_states; ++next) {
                // -log(U) is Exp(1); normalizing gives Dirichlet(1) rows.
                double u = rng.uniform();
                raw[next] = -std::log(1.0 - u);
                sum += raw[next];
            }
            for (int next = 0; next < n_states; ++next) m.p(a, s, next) = raw[next] / sum;
            m.r(a, s) = 2.0 * rng.uniform() - 1.0;
        }
        if (a > 0) m.action_magnitude[a] = static_cast<double>(a);
    }
    return m;
}

/// Seeded random model whose states cluster into groups with shared
/// dynamics and rewards up to a relative perturbation tau. Aggregation over
/// the true groups is then an appropriate linear model class, which is what
/// the coarse-feature verification suite needs.
inline TabularMdp make_block_mdp(std::uint64_t seed, int groups, int per_group, int n_actions,
                                 double gamma, double tau = 0.1) {
    if (groups < 1 || per_group < 1 || n_actions < 0)
        throw std::invalid_argument("bad block MDP shape");
    RngStream rng = rng_stream(seed, "instances/block_mdp");
    const int n = groups * per_group;
    TabularMdp mdp = TabularMdp::zeros(n, n_actions, gamma);
    std::vector<double> group_p(static_cast<std::size_t>(n_actions + 1) * groups * groups);
    std::vector<double> group_r(static_cast<std::size_t>(n_actions + 1) * groups);
    for (int a = 0; a <= n_actions; ++a) {
        for (int g = 0; g < groups; ++g) {
            double sum = 0.0;
            std::vector<double> raw(groups);
            for (int h = 0; h < groups; ++h) {
                raw[h] = -std::log(1.0 - rng.uniform());
                sum += raw[h];
            }
            for (int h = 0; h < groups; ++h)
                group_p[(static_cast<std::size_t>(a) * groups + g) * groups + h] = raw[h] / sum;
            group_r[static_cast<std::size_t>(a) * groups + g] = 2.0 * rng.uniform() - 1.0;
        }
    }
    for (int a = 0; a <= n_actions; ++a) {
        for (int s = 0; s < n; ++s) {
            int g = s / per_group;
            double sum = 0.0;
            std::vector<double> raw(n);
            for (int s2 = 0; s2 < n; ++s2) {
                int h = s2 / per_group;
                double base =
                    group_p[(static_cast<std::size_t>(a) * groups + g) * groups + h] / per_group;
                raw[s2] = base * (1.0 + tau * (2.0 * rng.uniform() - 1.0));
                sum += raw[s2];
            }
            for (int s2 = 0; s2 < n; ++s2) mdp.p(a, s, s2) = raw[s2] / sum;
            mdp.r(a, s) = group_r[static_cast<std::size_t>(a) * groups + g] +
                          tau * (2.0 * rng.uniform() - 1.0);
        }
    }
    return mdp;
}

/// Seeded random cost drawn over the closed forms (zero excluded unless
/// allow_zero). kappa in [0.1, 2], lambda in [0, 1].
inline CostSpec random_cost(std::uint64_t seed, bool allow_zero = true) {
    RngStream rng = rng_stream(seed, "instances/random_cost");
    int pick = rng.uniform_int(allow_zero ? 3 : 2);
    double kappa = 0.1 + 1.9 * rng.uniform();
    double lambda = rng.uniform();
    if (allow_zero && pick == 2) return CostSpec::zero();
    if (pick == 1) return CostSpec::fixed_plus_proportional(kappa, lambda);
    return CostSpec::fixed(kappa);
}

namespace detail {

inline Instance make_chain1() {
    // Single state, gamma 0.5. Doing nothing pays 1 forever: v* = 2. The
    // lone intervention repeats the same loop at cost 0.5, so it never pays.
    Instance inst;
    inst.name = "chain1";
    inst.mdp = TabularMdp::zeros(1, 1, 0.5);
    inst.mdp.p(0, 0, 0) = 1.0;
    inst.mdp.p(1, 0, 0) = 1.0;
    inst.mdp.r(0, 0) = 1.0;
    inst.mdp.r(1, 0) = 1.0;
    inst.cost = CostSpec::fixed(0.5);
    return inst;
}

inline Instance make_chain2() {
    // Two-state chain, gamma 0.9, fixed cost 0.2. State 1 is absorbing and
    // pays 1 under the null action, so v*(1) = 10. State 0 pays nothing
    // under null; paying the cost to jump to state 1 yields
    // 0 - 0.2 + 0.9 * 10 = 8.8, which beats waiting (0.9 * v*(0)).
    Instance inst;
    inst.name = "chain2";
    inst.mdp = TabularMdp::zeros(2, 1, 0.9);
    inst.mdp.p(0, 0, 0) = 1.0;
    inst.mdp.p(0, 1, 1) = 1.0;
    inst.mdp.p(1, 0, 1) = 1.0;
    inst.mdp.p(1, 1, 1) = 1.0;
    inst.mdp.r(0, 0) = 0.0;
    inst.mdp.r(0, 1) = 1.0;
    inst.mdp.r(1, 0) = 0.0;
    inst.mdp.r(1, 1) = 1.0;
    inst.cost = CostSpec::fixed(0.2);
    return inst;
}

inline Instance make_loop2() {
    // Two states, gamma 0.8, fixed cost 0.3. The intervention swaps states.
    // Hand fixed point: v*(1) = 1 / (1 - 0.8) = 5 (keep collecting 1),
    // v*(0) = max(0.2 + 0.8 v0, -0.3 + 0.8 * 5) = 3.7 (jump).
    Instance inst;
    inst.name = "loop2";
    inst.mdp = TabularMdp::zeros(2, 1, 0.8);
    inst.mdp.p(0, 0, 0) = 1.0;
    inst.mdp.p(0, 1, 1) = 1.0;
    inst.mdp.p(1, 0, 1) = 1.0;
    inst.mdp.p(1, 1, 0) = 1.0;
    inst.mdp.r(0, 0) = 0.2;
    inst.mdp.r(0, 1) = 1.0;
    inst.mdp.r(1, 0) = 0.0;
    inst.mdp.r(1, 1) = 0.0;
    inst.cost = CostSpec::fixed(0.3);
    return inst;
}

inline Instance make_stoch3() {
    // Three states, two actions with magnitudes 1 and 2, stochastic kernel,
    // quasi-linear cost 0.25 + 0.25 |a|. State 2 is the earner.
    Instance inst;
    inst.name = "stoch3";
    inst.mdp = TabularMdp::zeros(3, 2, 0.85);
    auto set_row = [&](int a, int s, double p0, double p1, double p2) {
        inst.mdp.p(a, s, 0) = p0;
        inst.mdp.p(a, s, 1) = p1;
        inst.mdp.p(a, s, 2) = p2;
    };
    set_row(0, 0, 0.9, 0.1, 0.0);
    set_row(0, 1, 0.0, 0.9, 0.1);
    set_row(0, 2, 0.1, 0.0, 0.9);
    inst.mdp.r(0, 0) = -0.1;
    inst.mdp.r(0, 1) = 0.1;
    inst.mdp.r(0, 2) = 1.0;
    set_row(1, 0, 0.0, 1.0, 0.0);
    set_row(1, 1, 0.0, 0.0, 1.0);
    set_row(1, 2, 0.0, 0.0, 1.0);
    inst.mdp.r(1, 0) = 0.0;
    inst.mdp.r(1, 1) = 0.0;
    inst.mdp.r(1, 2) = 0.8;
    set_row(2, 0, 0.0, 0.0, 1.0);
    set_row(2, 1, 0.0, 0.0, 1.0);
    set_row(2, 2, 0.0, 0.0, 1.0);
    inst.mdp.r(2, 0) = -0.2;
    inst.mdp.r(2, 1) = 0.2;
    inst.mdp.r(2, 2) = 1.0;
    inst.mdp.action_magnitude[1] = 1.0;
    inst.mdp.action_magnitude[2] = 2.0;
    inst.cost = CostSpec::fixed_plus_proportional(0.25, 0.25);
    return inst;
}

inline Instance make_gridline6() {
    // Six-state line that drifts left under the null action; the
    // intervention pushes two cells right. Rewards grow to the right.
    Instance inst;
    inst.name = "gridline6";
    inst.mdp = TabularMdp::zeros(6, 1, 0.9);
    for (int s = 0; s < 6; ++s) {
        int left = std::max(s - 1, 0);
        inst.mdp.p(0, s, left) += 0.7;
        inst.mdp.p(0, s, s) += 0.3;
        inst.mdp.r(0, s) = 0.2 * s;
        int right = std::min(s + 2, 5);
        inst.mdp.p(1, s, right) += 0.9;
        inst.mdp.p(1, s, s) += 0.1;
        inst.mdp.r(1, s) = 0.0;
    }
    inst.cost = CostSpec::fixed(0.4);
    return inst;
}

inline Instance make_menucost4() {
    // Four freshness levels that decay toward 0; the intervention resets to
    // the top level for a fixed charge, the classic menu-cost shape.
    Instance inst;
    inst.name = "menucost4";
    inst.mdp = TabularMdp::zeros(4, 1, 0.8);
    for (int s = 0; s < 4; ++s) {
        int down = std::max(s - 1, 0);
        inst.mdp.p(0, s, down) += 0.8;
        inst.mdp.p(0, s, s) += 0.2;
        inst.mdp.r(0, s) = 0.35 * s;
        inst.mdp.p(1, s, 3) = 1.0;
        inst.mdp.r(1, s) = 0.0;
    }
    inst.cost = CostSpec::fixed(0.3);
    return inst;
}

} // namespace detail

/// Names of the fixed small instances used by the online-learning
/// convergence checks.
inline std::vector<std::string> qconv_suite_names() {
    return {"chain2", "loop2", "stoch3", "gridline6", "menucost4"};
}

/// Instance registry. Known names: chain1, chain2, loop2, stoch3,
/// gridline6, menucost4.
inline Instance make_instance(const std::string& name) {
    if (name == "chain1") return detail::make_chain1();
    if (name == "chain2") return detail::make_chain2();
    if (name == "loop2") return detail::make_loop2();
    if (name == "stoch3") return detail::make_stoch3();
    if (name == "gridline6") return detail::make_gridline6();
    if (name == "menucost4") return detail::make_menucost4();
    throw std::invalid_argument("unknown instance name: " + name);
}

} // namespace licra
