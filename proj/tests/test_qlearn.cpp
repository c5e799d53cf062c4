#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "licra/instances.hpp"
#include "licra/qlearn.hpp"

using namespace licra;

TEST_CASE("model-based update with full step and zero discount stores net rewards") {
    TabularMdp m = TabularMdp::zeros(1, 1, 0.0);
    m.p(0, 0, 0) = 1.0;
    m.p(1, 0, 0) = 1.0;
    m.r(1, 0) = 1.0;
    CostSpec cost = CostSpec::fixed(0.5);
    QTable q = QTable::zeros(1, 1);
    VisitCounts visits = VisitCounts::zeros(1, 1);
    LearnSchedule sched; // alpha0 = 1 and zero prior visits give a full step
    q_update_model_based(q, m, cost, 0, sched, visits);
    REQUIRE(q.act(0, 1) == Catch::Approx(0.5));
}

TEST_CASE("full-step synchronous sweeps reproduce the value-iteration trajectory") {
    Instance inst = make_instance("stoch3");
    QTable q = QTable::zeros(3, 2);
    ValueFunction v(3, 0.0);
    for (int k = 0; k < 60; ++k) {
        q_sweep_model_based(q, inst.mdp, inst.cost, 1.0);
        v = bellman_apply(inst.mdp, inst.cost, v);
        REQUIRE(sup_norm_diff(q.values(), v) < 1e-10);
    }
}

TEST_CASE("model-based updates converge to the chain2 fixed point") {
    Instance inst = make_instance("chain2");
    QTable q = QTable::zeros(2, 1);
    for (int k = 0; k < 400; ++k) q_sweep_model_based(q, inst.mdp, inst.cost, 1.0);
    REQUIRE(q.state_value(0) == Catch::Approx(8.8).margin(1e-8));
    REQUIRE(q.state_value(1) == Catch::Approx(10.0).margin(1e-8));
}

TEST_CASE("sampled updates on a single-state loop sum the geometric series") {
    // Null action only, R = 1, gamma = 0.5: q_null -> 2.
    TabularMdp m = TabularMdp::zeros(1, 0, 0.5);
    m.p(0, 0, 0) = 1.0;
    m.r(0, 0) = 1.0;
    QTable q = QTable::zeros(1, 0);
    VisitCounts visits = VisitCounts::zeros(1, 0);
    LearnSchedule sched;
    sched.omega = 0.7;
    RngStream rng = rng_stream(1, "qlearn/loop");
    for (int k = 0; k < 10000; ++k) {
        TransitionSample t = sample_transition(m, CostSpec::zero(), 0, kNullAction, rng);
        q_update_sampled(q, t, m.gamma, sched, visits);
    }
    REQUIRE(q.q_null[0] == Catch::Approx(2.0).margin(1e-3));
}

TEST_CASE("sampled training on chain2 reaches the oracle values") {
    Instance inst = make_instance("chain2");
    auto oracle = value_iteration(inst.mdp, inst.cost, 1e-11);
    LearnSchedule sched;
    sched.explore = ExploreMode::kBranch;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        TrainResult res = train(inst.mdp, inst.cost, sched, 4000, 50, seed);
        REQUIRE(res.diag.total_steps == 200000);
        REQUIRE(sup_norm_diff(res.q.values(), oracle.v) < 0.05);
    }
}

TEST_CASE("a dominating cost is learned as never-intervene") {
    TabularMdp m = make_random_mdp(3, 4, 2, 0.8);
    double kappa = 2.0 * m.max_abs_reward() / (1.0 - m.gamma) + 1.0;
    CostSpec cost = CostSpec::fixed(kappa);
    TrainResult res = train(m, cost, LearnSchedule{}, 2000, 40, 7);
    for (int s = 0; s < m.n_states; ++s) REQUIRE_FALSE(res.policy.intervene[s]);
}

TEST_CASE("greedy behavior picks null when interventions look terrible") {
    QTable q = QTable::zeros(1, 3);
    for (int a = 1; a <= 3; ++a) q.act(0, a) = -1e9;
    RngStream rng = rng_stream(2, "qlearn/greedy");
    for (int i = 0; i < 20; ++i) REQUIRE(behavior_policy(q, 0, 0.0, rng) == kNullAction);
}

TEST_CASE("full exploration is uniform over the null action and all arms") {
    QTable q = QTable::zeros(1, 3);
    RngStream rng = rng_stream(3, "qlearn/explore");
    std::vector<int> counts(4, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[behavior_policy(q, 0, 1.0, rng)];
    for (int c : counts) REQUIRE(std::abs(c / static_cast<double>(n) - 0.25) < 0.01);
}

TEST_CASE("branch exploration halves the intervention probability") {
    QTable q = QTable::zeros(1, 3);
    RngStream rng = rng_stream(4, "qlearn/branch");
    int nulls = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        if (behavior_policy(q, 0, 1.0, rng, true, ExploreMode::kBranch) == kNullAction) ++nulls;
    REQUIRE(std::abs(nulls / static_cast<double>(n) - 0.5) < 0.01);
}

TEST_CASE("exact branch ties resolve to null") {
    QTable q = QTable::zeros(1, 2);
    q.q_null[0] = 1.25;
    q.act(0, 1) = 1.25;
    q.act(0, 2) = 0.5;
    RngStream rng = rng_stream(5, "qlearn/tie");
    REQUIRE(behavior_policy(q, 0, 0.0, rng) == kNullAction);
}

TEST_CASE("zero episodes return the initial table and a never-intervene policy") {
    Instance inst = make_instance("chain2");
    TrainResult res = train(inst.mdp, inst.cost, LearnSchedule{}, 0, 50, 11);
    REQUIRE(res.q.max_abs() == 0.0);
    for (int s = 0; s < 2; ++s) REQUIRE_FALSE(res.policy.intervene[s]);
    REQUIRE(res.diag.episode_returns.empty());
}

TEST_CASE("training on chain2 with defaults recovers the oracle policy") {
    Instance inst = make_instance("chain2");
    auto oracle = value_iteration(inst.mdp, inst.cost, 1e-11);
    ImpulsePolicy best = extract_policy(inst.mdp, inst.cost, oracle.v);
    TrainResult res = train(inst.mdp, inst.cost, LearnSchedule{}, 3000, 50, 1);
    REQUIRE(res.policy.intervene == best.intervene);
    REQUIRE(res.policy.action[0] == best.action[0]);
}

TEST_CASE("identical seeds reproduce diagnostics bitwise") {
    Instance inst = make_instance("stoch3");
    LearnSchedule sched;
    TrainResult a = train(inst.mdp, inst.cost, sched, 500, 30, 99);
    TrainResult b = train(inst.mdp, inst.cost, sched, 500, 30, 99);
    REQUIRE(a.diag.episode_returns == b.diag.episode_returns);
    REQUIRE(a.diag.episode_interventions == b.diag.episode_interventions);
    REQUIRE(a.q.q_act == b.q.q_act);
    REQUIRE(a.q.q_null == b.q.q_null);
}

TEST_CASE("q values stay inside the divergence bound throughout training") {
    for (const auto& name : qconv_suite_names()) {
        Instance inst = make_instance(name);
        TrainResult res = train(inst.mdp, inst.cost, LearnSchedule{}, 1000, 40, 5);
        double bound = 2.0 * (inst.mdp.max_abs_reward() + inst.cost.max_cost(inst.mdp)) /
                       (1.0 - inst.mdp.gamma);
        REQUIRE(res.diag.max_abs_q <= bound);
    }
}

TEST_CASE("learned intervention set matches the oracle on well-visited states") {
    Instance inst = make_instance("menucost4");
    auto oracle = value_iteration(inst.mdp, inst.cost, 1e-11);
    ImpulsePolicy best = extract_policy(inst.mdp, inst.cost, oracle.v);
    TrainResult res = train(inst.mdp, inst.cost, LearnSchedule{}, 5000, 40, 17);
    for (int s = 0; s < inst.mdp.n_states; ++s) {
        if (res.visits.total(s) < 100) continue;
        REQUIRE(static_cast<bool>(res.policy.intervene[s]) ==
                static_cast<bool>(best.intervene[s]));
    }
}

TEST_CASE("flat baseline on a single-state loop learns the geometric value") {
    TabularMdp m = TabularMdp::zeros(1, 0, 0.5);
    m.p(0, 0, 0) = 1.0;
    m.r(0, 0) = 1.0;
    FlatResult res = train_flat_baseline(m, CostSpec::zero(), LearnSchedule{}, 400, 40, 3);
    REQUIRE(res.value(0, 0) == Catch::Approx(2.0).margin(1e-3));
}

TEST_CASE("with zero costs both learners agree with the exact oracle") {
    TabularMdp m = make_random_mdp(42, 3, 2, 0.8);
    CostSpec cost = CostSpec::zero();
    auto oracle = value_iteration(m, cost, 1e-11);
    LearnSchedule sched;
    TrainResult impulse = train(m, cost, sched, 6000, 40, 21);
    FlatResult flat = train_flat_baseline(m, cost, sched, 6000, 40, 21);
    REQUIRE(sup_norm_diff(impulse.q.values(), oracle.v) < 0.05);
    REQUIRE(sup_norm_diff(flat.values(), oracle.v) < 0.05);
}

TEST_CASE("flat baseline converges on chain2") {
    Instance inst = make_instance("chain2");
    auto oracle = value_iteration(inst.mdp, inst.cost, 1e-11);
    FlatResult res = train_flat_baseline(inst.mdp, inst.cost, LearnSchedule{}, 4000, 50, 13);
    REQUIRE(sup_norm_diff(res.values(), oracle.v) < 0.05);
}

TEST_CASE("schedule parameters are validated") {
    LearnSchedule sched;
    sched.omega = 0.5;
    REQUIRE_THROWS_AS(sched.validate(), std::invalid_argument);
    sched.omega = 0.7;
    sched.alpha0 = 0.0;
    REQUIRE_THROWS_AS(sched.validate(), std::invalid_argument);
}
