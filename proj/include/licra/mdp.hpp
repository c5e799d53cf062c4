#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "licra/common.hpp"
#include "licra/rng.hpp"

namespace licra {

/// Action index 0 is the distinguished null action ("do nothing"); indices
/// 1..n_actions are the costly interventions. Keeping the null action on the
/// dense action axis gives every module the same indexing.
inline constexpr int kNullAction = 0;

/// Finite MDP with a designated null action.
///
/// Layout: transition is [a][s][s'] row-major with a over n_actions+1
/// entries (null first), reward is [a][s]. Rows are probability vectors.
/// action_magnitude maps each action to the real-valued size used by
/// proportional cost forms; the null action has magnitude 0. The reward of
/// the null action may be negative (a standing drift penalty is allowed).
///
/// Instances are immutable after construction by convention and safe to
/// share across threads.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0; // count of non-null actions
    double gamma = 0.0;
    std::vector<double> transition;       // (n_actions+1) * n_states * n_states
    std::vector<double> reward;           // (n_actions+1) * n_states
    std::vector<double> action_magnitude; // n_actions+1, [0] == 0

    int action_axis() const { return n_actions + 1; }

    static TabularMdp zeros(int n_states, int n_actions, double gamma) {
        TabularMdp m;
        m.n_states = n_states;
        m.n_actions = n_actions;
        m.gamma = gamma;
        m.transition.assign(static_cast<std::size_t>(n_actions + 1) * n_states * n_states, 0.0);
        m.reward.assign(static_cast<std::size_t>(n_actions + 1) * n_states, 0.0);
        m.action_magnitude.assign(n_actions + 1, 0.0);
        for (int a = 1; a <= n_actions; ++a) m.action_magnitude[a] = 1.0;
        return m;
    }

    double p(int a, int s, int next) const {
        return transition[(static_cast<std::size_t>(a) * n_states + s) * n_states + next];
    }
    double& p(int a, int s, int next) {
        return transition[(static_cast<std::size_t>(a) * n_states + s) * n_states + next];
    }
    std::span<const double> row(int a, int s) const {
        return {transition.data() + (static_cast<std::size_t>(a) * n_states + s) * n_states,
                static_cast<std::size_t>(n_states)};
    }
    double r(int a, int s) const { return reward[static_cast<std::size_t>(a) * n_states + s]; }
    double& r(int a, int s) { return reward[static_cast<std::size_t>(a) * n_states + s]; }

    double magnitude(int a) const { return action_magnitude[a]; }

    double max_abs_reward() const {
        double m = 0.0;
        for (double x : reward) m = std::max(m, std::abs(x));
        return m;
    }

    void check_state(int s) const {
        if (s < 0 || s >= n_states)
            throw std::out_of_range("state index " + std::to_string(s) + " out of range [0, " +
                                    std::to_string(n_states) + ")");
    }
    void check_action(int a) const {
        if (a < 0 || a > n_actions)
            throw std::out_of_range("action index " + std::to_string(a) + " out of range [0, " +
                                    std::to_string(n_actions) + "]");
    }
};

/// Functional form of the intervention cost c(s, a). The null action is
/// always free; every other action costs at least kappa > 0 (minimal
/// boundedness), which is what makes "when to act" a nontrivial decision.
enum class CostForm { kZero, kFixed, kFixedPlusProportional, kFixedPlusStateDependent };

/// Intervention cost specification. Closed forms are plain data so that
/// experiment configs can serialize them; the state-dependent form carries a
/// callable and is therefore not expressible in config files.
class CostSpec {
  public:
    using StateTerm = std::function<double(int state, int action)>;

    CostSpec() : form_(CostForm::kZero) {}

    static CostSpec zero() { return CostSpec(); }

    static CostSpec fixed(double kappa) {
        require_positive_kappa(kappa);
        CostSpec c;
        c.form_ = CostForm::kFixed;
        c.kappa_ = kappa;
        return c;
    }

    static CostSpec fixed_plus_proportional(double kappa, double lambda) {
        require_positive_kappa(kappa);
        if (lambda < 0.0) throw std::invalid_argument("cost lambda must be nonnegative");
        CostSpec c;
        c.form_ = CostForm::kFixedPlusProportional;
        c.kappa_ = kappa;
        c.lambda_ = lambda;
        return c;
    }

    static CostSpec fixed_plus_state_dependent(double kappa, StateTerm term) {
        require_positive_kappa(kappa);
        if (!term) throw std::invalid_argument("state-dependent cost requires a term callable");
        CostSpec c;
        c.form_ = CostForm::kFixedPlusStateDependent;
        c.kappa_ = kappa;
        c.term_ = std::move(term);
        return c;
    }

    CostForm form() const { return form_; }
    double kappa() const { return kappa_; }
    double lambda() const { return lambda_; }

    /// Cost of taking action a in state s; zero for the null action.
    double operator()(const TabularMdp& mdp, int s, int a) const {
        if (a == kNullAction) return 0.0;
        switch (form_) {
        case CostForm::kZero: return 0.0;
        case CostForm::kFixed: return kappa_;
        case CostForm::kFixedPlusProportional:
            return kappa_ + lambda_ * std::abs(mdp.magnitude(a));
        case CostForm::kFixedPlusStateDependent: return kappa_ + term_(s, a);
        }
        return 0.0;
    }

    /// Upper bound of the cost over the given MDP (used for Q-value bounds
    /// and penalty sizing).
    double max_cost(const TabularMdp& mdp) const {
        double m = 0.0;
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 1; a <= mdp.n_actions; ++a) m = std::max(m, (*this)(mdp, s, a));
        return m;
    }

  private:
    static void require_positive_kappa(double kappa) {
        if (!(kappa > 0.0))
            throw std::invalid_argument("cost kappa must be strictly positive; "
                                        "use CostSpec::zero() for the costless case");
    }

    CostForm form_;
    double kappa_ = 0.0;
    double lambda_ = 0.0;
    StateTerm term_;
};

/// One observed transition. Reward and cost are kept separate: the budget
/// module and the diagnostics need the decomposition, not the net value.
struct TransitionSample {
    int state = 0;
    int action = kNullAction;
    double reward = 0.0;
    double cost = 0.0;
    int next_state = 0;
    bool intervened = false;
};

/// Net one-step payoff R(s, a) - c(s, a); the null action contributes no
/// cost by definition.
inline double effective_reward(const TabularMdp& mdp, const CostSpec& cost, int s, int a) {
    mdp.check_state(s);
    mdp.check_action(a);
    return mdp.r(a, s) - cost(mdp, s, a);
}

/// Draws s' ~ P(.|s, a) and fills the sample record. Deterministic given the
/// stream state.
inline TransitionSample sample_transition(const TabularMdp& mdp, const CostSpec& cost, int s,
                                          int a, RngStream& rng) {
    mdp.check_state(s);
    mdp.check_action(a);
    TransitionSample t;
    t.state = s;
    t.action = a;
    t.intervened = (a != kNullAction);
    t.reward = mdp.r(a, s);
    t.cost = cost(mdp, s, a);
    t.next_state = rng.sample_discrete(mdp.row(a, s));
    return t;
}

/// Checks the model invariants and reports every violation with the
/// offending index. An empty result means the model is well formed.
inline std::vector<std::string> validate(const TabularMdp& mdp) {
    std::vector<std::string> out;
    if (mdp.n_states <= 0) out.push_back("n_states must be positive");
    if (mdp.n_actions < 0) out.push_back("n_actions must be nonnegative");
    if (!(mdp.gamma >= 0.0) || !(mdp.gamma < 1.0))
        out.push_back("gamma must lie in [0, 1); got " + fmt_double(mdp.gamma));
    const std::size_t axis = static_cast<std::size_t>(mdp.n_actions) + 1;
    if (mdp.transition.size() !=
        axis * static_cast<std::size_t>(mdp.n_states) * static_cast<std::size_t>(mdp.n_states))
        out.push_back("transition tensor has wrong size");
    if (mdp.reward.size() != axis * static_cast<std::size_t>(mdp.n_states))
        out.push_back("reward tensor has wrong size");
    if (mdp.action_magnitude.size() != axis)
        out.push_back("action_magnitude has wrong size");
    if (!out.empty()) return out; // structural problems make index checks meaningless

    for (int a = 0; a <= mdp.n_actions; ++a) {
        for (int s = 0; s < mdp.n_states; ++s) {
            double sum = 0.0;
            for (int next = 0; next < mdp.n_states; ++next) {
                double p = mdp.p(a, s, next);
                if (p < 0.0)
                    out.push_back("negative probability at (action " + std::to_string(a) +
                                  ", state " + std::to_string(s) + ", next " +
                                  std::to_string(next) + "): " + fmt_double(p));
                if (!std::isfinite(p))
                    out.push_back("non-finite probability at (action " + std::to_string(a) +
                                  ", state " + std::to_string(s) + ", next " +
                                  std::to_string(next) + ")");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                out.push_back("transition row (action " + std::to_string(a) + ", state " +
                              std::to_string(s) + ") sums to " + fmt_double(sum));
            if (!std::isfinite(mdp.r(a, s)))
                out.push_back("non-finite reward at (action " + std::to_string(a) + ", state " +
                              std::to_string(s) + ")");
        }
    }
    if (!mdp.action_magnitude.empty() && mdp.action_magnitude[0] != 0.0)
        out.push_back("null action must have magnitude 0");
    return out;
}

/// Convenience guard: throws with the full violation list.
inline void require_valid(const TabularMdp& mdp) {
    auto violations = validate(mdp);
    if (violations.empty()) return;
    std::string msg = "invalid MDP:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw std::invalid_argument(msg);
}

} // namespace licra
