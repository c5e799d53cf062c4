#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "licra/instances.hpp"
#include "licra/mdp.hpp"

using namespace licra;

namespace {

TabularMdp tiny_mdp() {
    TabularMdp m = TabularMdp::zeros(2, 1, 0.9);
    m.p(0, 0, 0) = 1.0;
    m.p(0, 1, 1) = 1.0;
    m.p(1, 0, 1) = 1.0;
    m.p(1, 1, 0) = 1.0;
    m.r(0, 0) = 0.5;
    m.r(0, 1) = -0.25;
    m.r(1, 0) = 1.0;
    m.r(1, 1) = 2.0;
    return m;
}

} // namespace

TEST_CASE("effective_reward subtracts the intervention cost") {
    TabularMdp m = tiny_mdp();
    // R = 1, fixed cost 0.5 -> 0.5.
    REQUIRE(effective_reward(m, CostSpec::fixed(0.5), 0, 1) == Catch::Approx(0.5));
}

TEST_CASE("effective_reward of the null action ignores the cost spec") {
    TabularMdp m = tiny_mdp();
    double base = effective_reward(m, CostSpec::zero(), 1, kNullAction);
    REQUIRE(base == Catch::Approx(-0.25));
    REQUIRE(effective_reward(m, CostSpec::fixed(3.0), 1, kNullAction) == Catch::Approx(base));
    REQUIRE(effective_reward(m, CostSpec::fixed_plus_proportional(1.0, 2.0), 1, kNullAction) ==
            Catch::Approx(base));
}

TEST_CASE("proportional cost uses the action magnitude") {
    // R = 2, kappa = 1, lambda = 0.5, |a| = 2: 2 - (1 + 0.5 * 2) = 0.
    TabularMdp m = tiny_mdp();
    m.r(1, 1) = 2.0;
    m.action_magnitude[1] = 2.0;
    REQUIRE(effective_reward(m, CostSpec::fixed_plus_proportional(1.0, 0.5), 1, 1) ==
            Catch::Approx(0.0));
}

TEST_CASE("effective_reward rejects out-of-range indices") {
    TabularMdp m = tiny_mdp();
    REQUIRE_THROWS_AS(effective_reward(m, CostSpec::zero(), 2, 0), std::out_of_range);
    REQUIRE_THROWS_AS(effective_reward(m, CostSpec::zero(), 0, 2), std::out_of_range);
    REQUIRE_THROWS_AS(effective_reward(m, CostSpec::zero(), -1, 0), std::out_of_range);
}

TEST_CASE("cost specs require a strictly positive kappa") {
    REQUIRE_THROWS_AS(CostSpec::fixed(0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(CostSpec::fixed(-1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(CostSpec::fixed_plus_proportional(0.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(CostSpec::fixed_plus_proportional(1.0, -0.5), std::invalid_argument);
}

TEST_CASE("minimal boundedness holds over random cost specs") {
    // Property: for every non-zero form, cost(s, a != 0) >= kappa > 0.
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        CostSpec cost = random_cost(seed, /*allow_zero=*/false);
        TabularMdp m = make_random_mdp(seed, 4, 3);
        REQUIRE(cost.kappa() > 0.0);
        for (int s = 0; s < m.n_states; ++s) {
            REQUIRE(cost(m, s, kNullAction) == 0.0);
            for (int a = 1; a <= m.n_actions; ++a) REQUIRE(cost(m, s, a) >= cost.kappa());
        }
    }
}

TEST_CASE("sample_transition follows a one-hot kernel") {
    TabularMdp m = tiny_mdp();
    RngStream rng = rng_stream(5, "mdp/deterministic");
    for (int i = 0; i < 50; ++i) {
        TransitionSample t = sample_transition(m, CostSpec::fixed(0.5), 0, 1, rng);
        REQUIRE(t.next_state == 1);
        REQUIRE(t.intervened);
        REQUIRE(t.reward == Catch::Approx(1.0));
        REQUIRE(t.cost == Catch::Approx(0.5));
    }
}

TEST_CASE("sample_transition matches a uniform kernel empirically") {
    TabularMdp m = TabularMdp::zeros(2, 0, 0.9);
    m.p(0, 0, 0) = 0.5;
    m.p(0, 0, 1) = 0.5;
    m.p(0, 1, 0) = 0.5;
    m.p(0, 1, 1) = 0.5;
    RngStream rng = rng_stream(17, "mdp/uniform");
    const int n = 100000;
    int zeros = 0;
    for (int i = 0; i < n; ++i)
        if (sample_transition(m, CostSpec::zero(), 0, 0, rng).next_state == 0) ++zeros;
    REQUIRE(std::abs(zeros / static_cast<double>(n) - 0.5) < 0.01);
}

TEST_CASE("null samples never carry cost") {
    TabularMdp m = tiny_mdp();
    RngStream rng = rng_stream(23, "mdp/null");
    TransitionSample t = sample_transition(m, CostSpec::fixed(2.0), 0, kNullAction, rng);
    REQUIRE_FALSE(t.intervened);
    REQUIRE(t.cost == 0.0);
}

TEST_CASE("sample streams are bitwise reproducible") {
    TabularMdp m = make_random_mdp(99, 6, 2);
    CostSpec cost = CostSpec::fixed(0.3);
    RngStream a = rng_stream(31, "mdp/repro");
    RngStream b = rng_stream(31, "mdp/repro");
    for (int i = 0; i < 500; ++i) {
        TransitionSample ta = sample_transition(m, cost, i % m.n_states, i % 3, a);
        TransitionSample tb = sample_transition(m, cost, i % m.n_states, i % 3, b);
        REQUIRE(ta.next_state == tb.next_state);
        REQUIRE(ta.reward == tb.reward);
        REQUIRE(ta.cost == tb.cost);
    }
}

TEST_CASE("validate accepts a well-formed model") {
    REQUIRE(validate(tiny_mdp()).empty());
}

TEST_CASE("validate names a short transition row") {
    TabularMdp m = tiny_mdp();
    m.p(1, 0, 1) = 0.9;
    auto violations = validate(m);
    REQUIRE(violations.size() == 1);
    REQUIRE(violations[0].find("action 1") != std::string::npos);
    REQUIRE(violations[0].find("state 0") != std::string::npos);
}

TEST_CASE("validate names a negative probability entry") {
    TabularMdp m = tiny_mdp();
    m.p(0, 1, 0) = -0.1;
    m.p(0, 1, 1) = 1.1;
    auto violations = validate(m);
    REQUIRE_FALSE(violations.empty());
    bool found = false;
    for (const auto& v : violations)
        if (v.find("negative probability") != std::string::npos &&
            v.find("next 0") != std::string::npos)
            found = true;
    REQUIRE(found);
}

TEST_CASE("validate rejects gamma at or above one") {
    TabularMdp m = tiny_mdp();
    m.gamma = 1.0;
    REQUIRE_FALSE(validate(m).empty());
}
