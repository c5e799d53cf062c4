#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "licra/exact.hpp"
#include "licra/instances.hpp"

using namespace licra;

namespace {

ValueFunction random_values(std::uint64_t seed, int n, double scale = 5.0) {
    RngStream rng = rng_stream(seed, "test/values");
    ValueFunction v(n);
    for (int i = 0; i < n; ++i) v[i] = scale * (2.0 * rng.uniform() - 1.0);
    return v;
}

// Independent route for the zero-cost case: the textbook optimality operator
// over the full action set, written as plainly as possible.
ValueFunction classical_operator(const TabularMdp& m, const ValueFunction& v) {
    ValueFunction out(m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        double best = -1e300;
        for (int a = 0; a <= m.n_actions; ++a) {
            double q = m.r(a, s);
            for (int next = 0; next < m.n_states; ++next)
                q += m.gamma * m.p(a, s, next) * v[next];
            best = std::max(best, q);
        }
        out[s] = best;
    }
    return out;
}

} // namespace

TEST_CASE("intervention value with zero discount is the net reward") {
    TabularMdp m = TabularMdp::zeros(1, 1, 0.0);
    m.p(0, 0, 0) = 1.0;
    m.p(1, 0, 0) = 1.0;
    m.r(1, 0) = 1.0;
    ValueFunction v = {123.0};
    REQUIRE(intervention_value(m, CostSpec::fixed(0.5), v, 0, 1) == Catch::Approx(0.5));
}

TEST_CASE("intervention value on an absorbing state") {
    // v(s) = 10, gamma. = 0.9, R = 0, c = 1: -1 + 9 = 8.
    TabularMdp m = TabularMdp::zeros(1, 1, 0.9);
    m.p(0, 0, 0) = 1.0;
    m.p(1, 0, 0) = 1.0;
    ValueFunction v = {10.0};
    REQUIRE(intervention_value(m, CostSpec::fixed(1.0), v, 0, 1) == Catch::Approx(8.0));
}

TEST_CASE("intervention value matches an independent dot product") {
    TabularMdp m = make_random_mdp(404, 3, 2);
    CostSpec cost = CostSpec::fixed(0.7);
    ValueFunction v = random_values(5, 3);
    for (int s = 0; s < 3; ++s) {
        for (int a = 1; a <= 2; ++a) {
            double expected = m.r(a, s) - 0.7;
            for (int next = 0; next < 3; ++next)
                expected += m.gamma * m.p(a, s, next) * v[next];
            REQUIRE(std::abs(intervention_value(m, cost, v, s, a) - expected) < 1e-12);
        }
    }
}

TEST_CASE("intervention value rejects the null action") {
    TabularMdp m = make_random_mdp(1, 2, 1);
    ValueFunction v(2, 0.0);
    REQUIRE_THROWS_AS(intervention_value(m, CostSpec::fixed(1.0), v, 0, kNullAction),
                      std::invalid_argument);
}

TEST_CASE("a dominating cost reduces the Bellman operator to the null branch") {
    TabularMdp m = make_random_mdp(77, 5, 2);
    double kappa = 2.0 * m.max_abs_reward() / (1.0 - m.gamma) + 1.0;
    CostSpec cost = CostSpec::fixed(kappa);
    ValueFunction v = random_values(6, 5, 1.0 / (1.0 - m.gamma));
    ValueFunction tv = bellman_apply(m, cost, v);
    for (int s = 0; s < m.n_states; ++s)
        REQUIRE(tv[s] == Catch::Approx(null_branch_value(m, v, s)));
}

TEST_CASE("zero cost collapses to the classical optimality operator") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        TabularMdp m = make_random_mdp(seed, 4, 3);
        ValueFunction v = random_values(seed + 100, 4);
        ValueFunction ours = bellman_apply(m, CostSpec::zero(), v);
        ValueFunction classical = classical_operator(m, v);
        REQUIRE(sup_norm_diff(ours, classical) < 1e-12);
    }
}

TEST_CASE("the converged value function is a fixed point") {
    Instance inst = make_instance("stoch3");
    auto res = value_iteration(inst.mdp, inst.cost, 1e-12);
    ValueFunction tv = bellman_apply(inst.mdp, inst.cost, res.v);
    REQUIRE(sup_norm_diff(tv, res.v) < 1e-10);
}

TEST_CASE("single-state value iteration sums the geometric series") {
    Instance inst = make_instance("chain1");
    auto res = value_iteration(inst.mdp, inst.cost, 1e-12);
    REQUIRE(res.v[0] == Catch::Approx(2.0).margin(1e-10));
}

TEST_CASE("chain2 converges to the hand-solved fixed point") {
    Instance inst = make_instance("chain2");
    auto res = value_iteration(inst.mdp, inst.cost, 1e-12);
    REQUIRE(res.v[0] == Catch::Approx(8.8).margin(1e-9));
    REQUIRE(res.v[1] == Catch::Approx(10.0).margin(1e-9));
}

TEST_CASE("zero-cost impulse solution equals classical value iteration") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        TabularMdp m = make_random_mdp(seed + 50, 6, 2);
        auto impulse = value_iteration(m, CostSpec::zero(), 1e-12);
        auto classical = classical_value_iteration(m, 1e-12);
        REQUIRE(sup_norm_diff(impulse.v, classical.v) < 1e-10);
    }
}

TEST_CASE("value iteration reports non-convergence") {
    Instance inst = make_instance("chain2");
    REQUIRE_THROWS_AS(value_iteration(inst.mdp, inst.cost, 1e-12, 3), SolverError);
}

TEST_CASE("extract_policy never intervenes under a dominating cost") {
    TabularMdp m = make_random_mdp(8, 5, 3);
    double kappa = 2.0 * m.max_abs_reward() / (1.0 - m.gamma) + 0.5;
    CostSpec cost = CostSpec::fixed(kappa);
    auto res = value_iteration(m, cost, 1e-10);
    ImpulsePolicy policy = extract_policy(m, cost, res.v);
    for (int s = 0; s < m.n_states; ++s) REQUIRE_FALSE(policy.intervene[s]);
}

TEST_CASE("chain2 policy intervenes exactly at the paying state") {
    Instance inst = make_instance("chain2");
    auto res = value_iteration(inst.mdp, inst.cost, 1e-10);
    ImpulsePolicy policy = extract_policy(inst.mdp, inst.cost, res.v);
    REQUIRE(policy.intervene[0]);
    REQUIRE(policy.action[0] == 1);
    REQUIRE_FALSE(policy.intervene[1]);
}

TEST_CASE("with zero cost and a dominated null action, every state intervenes") {
    // The intervention strictly beats waiting everywhere: same kernel, but
    // the null action pays 1 less.
    TabularMdp m = make_random_mdp(21, 4, 2);
    for (int s = 0; s < m.n_states; ++s) {
        for (int next = 0; next < m.n_states; ++next) m.p(0, s, next) = m.p(1, s, next);
        m.r(0, s) = m.r(1, s) - 1.0;
    }
    auto res = value_iteration(m, CostSpec::zero(), 1e-10);
    ImpulsePolicy policy = extract_policy(m, CostSpec::zero(), res.v);
    for (int s = 0; s < m.n_states; ++s) REQUIRE(policy.intervene[s]);
}

TEST_CASE("never-intervene policy solves the null-kernel system") {
    Instance inst = make_instance("chain1");
    ValueFunction v = evaluate_policy(inst.mdp, inst.cost, ImpulsePolicy::never(1));
    REQUIRE(v[0] == Catch::Approx(2.0).margin(1e-10));
}

TEST_CASE("evaluating the extracted optimal policy recovers the fixed point") {
    for (const auto& name : qconv_suite_names()) {
        Instance inst = make_instance(name);
        auto res = value_iteration(inst.mdp, inst.cost, 1e-10);
        ImpulsePolicy policy = extract_policy(inst.mdp, inst.cost, res.v);
        ValueFunction v_pi = evaluate_policy(inst.mdp, inst.cost, policy);
        REQUIRE(sup_norm_diff(v_pi, res.v) < 1e-8);
    }
}

TEST_CASE("policy evaluation agrees with a Monte-Carlo rollout oracle") {
    TabularMdp m = make_random_mdp(777, 4, 2, 0.85);
    CostSpec cost = CostSpec::fixed(0.4);
    // An arbitrary fixed policy.
    ImpulsePolicy policy = ImpulsePolicy::never(4);
    policy.intervene[1] = 1;
    policy.action[1] = 2;
    policy.intervene[3] = 1;
    policy.action[3] = 1;

    ValueFunction v = evaluate_policy(m, cost, policy);

    // Discounted return from state 0, truncated where the tail is < 1e-10.
    const int start = 0;
    const int episode_len =
        static_cast<int>(std::ceil(std::log(1e-10) / std::log(m.gamma)));
    const int episodes = 4000;
    RngStream rng = rng_stream(12345, "test/mc_oracle");
    double sum = 0.0, sum_sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
        int s = start;
        double ret = 0.0, discount = 1.0;
        for (int t = 0; t < episode_len; ++t) {
            int a = policy.executed_action(s);
            TransitionSample tr = sample_transition(m, cost, s, a, rng);
            ret += discount * (tr.reward - tr.cost);
            discount *= m.gamma;
            s = tr.next_state;
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    double mean = sum / episodes;
    double se = std::sqrt((sum_sq / episodes - mean * mean) / episodes);
    REQUIRE(std::abs(mean - v[start]) < 3.0 * se + 1e-9);
}

TEST_CASE("the Bellman operator contracts at rate gamma") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        RngStream shape = rng_stream(seed, "test/contraction_shape");
        int n = 2 + shape.uniform_int(19);
        int m_actions = 1 + shape.uniform_int(5);
        TabularMdp m = make_random_mdp(seed, n, m_actions, 0.1 + 0.89 * shape.uniform());
        CostSpec cost = random_cost(seed);
        ValueFunction v = random_values(seed * 2 + 1, n);
        ValueFunction w = random_values(seed * 2 + 2, n);
        double lhs = sup_norm_diff(bellman_apply(m, cost, v), bellman_apply(m, cost, w));
        double rhs = m.gamma * sup_norm_diff(v, w);
        REQUIRE(lhs <= rhs + 1e-12);
    }
}

TEST_CASE("value iteration residuals decay monotonically at rate gamma") {
    for (const auto& name : qconv_suite_names()) {
        Instance inst = make_instance(name);
        auto res = value_iteration(inst.mdp, inst.cost, 1e-9);
        for (std::size_t k = 1; k < res.residual_history.size(); ++k)
            REQUIRE(res.residual_history[k] <=
                    inst.mdp.gamma * res.residual_history[k - 1] + 1e-12);
    }
}

TEST_CASE("never-intervene threshold") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        TabularMdp m = make_random_mdp(seed, 5, 2);
        double kappa = 2.0 * m.max_abs_reward() / (1.0 - m.gamma) + 1e-6;
        CostSpec cost = CostSpec::fixed(kappa);
        auto res = value_iteration(m, cost, 1e-10);
        ImpulsePolicy policy = extract_policy(m, cost, res.v);
        for (int s = 0; s < m.n_states; ++s) REQUIRE_FALSE(policy.intervene[s]);
    }
}
