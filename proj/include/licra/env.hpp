#pragma once

#include <memory>
#include <stdexcept>

#include "licra/mdp.hpp"
#include "licra/rng.hpp"

namespace licra {

/// Episodic environment with a finite observation table and the null action
/// at index 0. Environments own mutable episode state; one instance per run.
/// reset() starts a new episode and returns the initial observation; step()
/// advances it. Some wrappers disallow interventions in parts of the state
/// space, which behavior policies must respect via intervention_allowed().
class DiscreteEnv {
  public:
    virtual ~DiscreteEnv() = default;

    virtual int observation_count() const = 0;
    virtual int action_count() const = 0; // non-null actions
    virtual int horizon() const = 0;
    virtual double gamma() const = 0;

    virtual int reset(RngStream& rng) = 0;
    virtual TransitionSample step(int action, RngStream& rng) = 0;

    /// Whether a non-null action may be taken at the current state.
    virtual bool intervention_allowed() const { return true; }
};

/// Runs a TabularMdp as an episodic environment with a fixed horizon.
/// Episodes start uniformly at random by default (good state coverage for
/// online learners) or from a fixed state.
class MdpEnv : public DiscreteEnv {
  public:
    MdpEnv(TabularMdp mdp, CostSpec cost, int horizon, int start_state = -1)
        : mdp_(std::move(mdp)), cost_(std::move(cost)), horizon_(horizon),
          start_state_(start_state) {
        if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");
        if (start_state_ >= 0) mdp_.check_state(start_state_);
    }

    int observation_count() const override { return mdp_.n_states; }
    int action_count() const override { return mdp_.n_actions; }
    int horizon() const override { return horizon_; }
    double gamma() const override { return mdp_.gamma; }

    int reset(RngStream& rng) override {
        state_ = start_state_ >= 0 ? start_state_ : rng.uniform_int(mdp_.n_states);
        return state_;
    }

    TransitionSample step(int action, RngStream& rng) override {
        TransitionSample t = sample_transition(mdp_, cost_, state_, action, rng);
        state_ = t.next_state;
        return t;
    }

    const TabularMdp& mdp() const { return mdp_; }
    const CostSpec& cost() const { return cost_; }

  private:
    TabularMdp mdp_;
    CostSpec cost_;
    int horizon_;
    int start_state_;
    int state_ = 0;
};

} // namespace licra
