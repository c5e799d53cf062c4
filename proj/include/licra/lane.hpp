#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "licra/env.hpp"
#include "licra/mdp.hpp"

namespace licra {

/// Single-lane driving task: the vehicle coasts against drag, accelerations
/// cost K + a^2, and three marked zones penalize crawling below v_min, with
/// strictly increasing penalties toward the last zone. Reaching the goal
/// position pays a one-time reward.
struct LaneParams {
    double fixed_cost = 1.0; // K
    std::vector<double> accel_grid = {-1.0, -0.5, 0.0, 0.5, 1.0};
    double v_min = 0.5;
    double drag = 0.05;
    std::array<std::array<double, 2>, 3> zones = {{{20.0, 30.0}, {45.0, 55.0}, {70.0, 80.0}}};
    std::array<double, 3> zone_penalties = {1.0, 2.0, 4.0}; // subtracted from the reward
    double goal_position = 100.0;
    double goal_reward = 20.0;
    double max_velocity = 3.0;
    int horizon = 200;

    void validate() const {
        if (!(fixed_cost > 0.0)) throw std::invalid_argument("fixed cost K must be positive");
        if (accel_grid.empty()) throw std::invalid_argument("empty acceleration grid");
        for (double a : accel_grid)
            if (a < -1.0 || a > 1.0)
                throw std::invalid_argument("accelerations must lie in [-1, 1]");
        if (!(zone_penalties[0] < zone_penalties[1] && zone_penalties[1] < zone_penalties[2]))
            throw std::invalid_argument("zone penalties must increase strictly");
        for (int k = 0; k < 3; ++k) {
            if (!(zones[k][0] < zones[k][1]))
                throw std::invalid_argument("zone " + std::to_string(k + 1) + " is empty");
            if (k > 0 && zones[k][0] < zones[k - 1][1])
                throw std::invalid_argument("zones must be disjoint and ordered");
        }
        if (!(drag >= 0.0)) throw std::invalid_argument("drag must be nonnegative");
        if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    }
};

struct LaneState {
    double position = 0.0;
    double velocity = 0.0;
    int t = 0;
};

/// Zone index 1..3 containing the position, 0 if outside all zones.
inline int lane_zone(const LaneParams& params, double position) {
    for (int k = 0; k < 3; ++k)
        if (position >= params.zones[k][0] && position < params.zones[k][1]) return k + 1;
    return 0;
}

struct LaneStepResult {
    LaneState next;
    double reward = 0.0;
    double cost = 0.0;
    bool intervened = false;
    int zone_violated = 0; // 1..3 when crawling below v_min inside a zone
};

/// Deterministic kinematics: velocity loses drag, gains the chosen
/// acceleration, and is clamped to [0, max]; position advances by the new
/// velocity. Action index 0 is the free null action (no acceleration);
/// index k >= 1 applies accel_grid[k-1] at cost K + a^2 (a grid value of 0
/// still pays K). The goal reward is paid once, on the step that crosses
/// the goal position.
inline LaneStepResult lane_step(const LaneState& state, const LaneParams& params, int action) {
    if (action < 0 || action > static_cast<int>(params.accel_grid.size()))
        throw std::out_of_range("unknown lane action index " + std::to_string(action));
    double accel = 0.0;
    LaneStepResult out;
    if (action != kNullAction) {
        accel = params.accel_grid[action - 1];
        out.intervened = true;
        out.cost = params.fixed_cost + accel * accel;
    }
    out.next.velocity =
        std::clamp(state.velocity - params.drag + accel, 0.0, params.max_velocity);
    out.next.position = state.position + out.next.velocity;
    out.next.t = state.t + 1;

    if (state.position < params.goal_position && out.next.position >= params.goal_position)
        out.reward += params.goal_reward;
    int zone = lane_zone(params, out.next.position);
    if (zone != 0 && out.next.velocity < params.v_min) {
        out.reward -= params.zone_penalties[zone - 1];
        out.zone_violated = zone;
    }
    return out;
}

/// Position/velocity grid with an absorbing goal state appended.
struct LaneGrid {
    int pos_buckets = 0;
    int vel_buckets = 0;
    double pos_hi = 0.0;
    double vel_hi = 0.0;

    int states() const { return pos_buckets * vel_buckets + 1; }
    int goal_state() const { return pos_buckets * vel_buckets; }

    double pos_center(int i) const { return (i + 0.5) * pos_hi / pos_buckets; }
    double vel_center(int j) const { return (j + 0.5) * vel_hi / vel_buckets; }

    int nearest(double position, double velocity) const {
        int i = std::clamp(static_cast<int>(std::floor(position / pos_hi * pos_buckets)), 0,
                           pos_buckets - 1);
        int j = std::clamp(static_cast<int>(std::floor(velocity / vel_hi * vel_buckets)), 0,
                           vel_buckets - 1);
        return i * vel_buckets + j;
    }
};

struct LaneDiscretization {
    TabularMdp mdp;
    CostSpec cost;
    LaneGrid grid;
    LaneParams params;
};

/// Tabular projection of the deterministic kinematics: each (bucket center,
/// action) step lands between grid points, and the landing mass is split
/// bilinearly over the four neighbors so that expected motion matches the
/// continuous step (plain nearest-bucket rounding would freeze slow decay
/// like drag below the bucket width).
inline LaneDiscretization lane_discretize(const LaneParams& params, int pos_buckets,
                                          int vel_buckets, double gamma = 0.995) {
    params.validate();
    if (pos_buckets < 2 || vel_buckets < 2)
        throw std::invalid_argument("need at least 2 buckets per axis");
    LaneDiscretization out;
    out.params = params;
    out.grid.pos_buckets = pos_buckets;
    out.grid.vel_buckets = vel_buckets;
    out.grid.pos_hi = params.goal_position;
    out.grid.vel_hi = params.max_velocity;

    const int n = out.grid.states();
    const int actions = static_cast<int>(params.accel_grid.size());
    out.mdp = TabularMdp::zeros(n, actions, gamma);
    for (int a = 1; a <= actions; ++a) out.mdp.action_magnitude[a] = params.accel_grid[a - 1];

    const double pos_step = out.grid.pos_hi / pos_buckets;
    const double vel_step = out.grid.vel_hi / vel_buckets;
    for (int i = 0; i < pos_buckets; ++i) {
        for (int j = 0; j < vel_buckets; ++j) {
            const int from = i * vel_buckets + j;
            LaneState center{out.grid.pos_center(i), out.grid.vel_center(j), 0};
            for (int a = 0; a <= actions; ++a) {
                LaneStepResult r = lane_step(center, params, a);
                out.mdp.r(a, from) = r.reward;
                if (r.next.position >= params.goal_position) {
                    out.mdp.p(a, from, out.grid.goal_state()) = 1.0;
                    continue;
                }
                // Fractional grid coordinates of the landing point.
                double x = r.next.position / pos_step - 0.5;
                double y = r.next.velocity / vel_step - 0.5;
                int i0 = std::clamp(static_cast<int>(std::floor(x)), 0, pos_buckets - 1);
                int j0 = std::clamp(static_cast<int>(std::floor(y)), 0, vel_buckets - 1);
                int i1 = std::min(i0 + 1, pos_buckets - 1);
                int j1 = std::min(j0 + 1, vel_buckets - 1);
                double fx = std::clamp(x - i0, 0.0, 1.0);
                double fy = std::clamp(y - j0, 0.0, 1.0);
                out.mdp.p(a, from, i0 * vel_buckets + j0) += (1.0 - fx) * (1.0 - fy);
                out.mdp.p(a, from, i0 * vel_buckets + j1) += (1.0 - fx) * fy;
                out.mdp.p(a, from, i1 * vel_buckets + j0) += fx * (1.0 - fy);
                out.mdp.p(a, from, i1 * vel_buckets + j1) += fx * fy;
            }
        }
    }
    for (int a = 0; a <= actions; ++a) out.mdp.p(a, out.grid.goal_state(), out.grid.goal_state()) = 1.0;

    double k = params.fixed_cost;
    std::vector<double> grid_copy = params.accel_grid;
    out.cost = CostSpec::fixed_plus_state_dependent(
        k, [grid_copy](int, int a) { return grid_copy[a - 1] * grid_copy[a - 1]; });
    require_valid(out.mdp);
    return out;
}

struct LaneRollout {
    std::array<long, 3> zone_violations = {0, 0, 0};
    long interventions = 0;
    double reward_sum = 0.0;
    double cost_sum = 0.0;
    bool reached_goal = false;
};

/// Deterministic rollout of a tabular policy (indexed on the lane grid)
/// through the continuous kinematics from a standing start.
inline LaneRollout lane_rollout(const LaneParams& params, const LaneGrid& grid,
                                const ImpulsePolicy& policy) {
    LaneRollout out;
    LaneState state;
    bool done = false;
    for (int t = 0; t < params.horizon && !done; ++t) {
        int obs = grid.nearest(state.position, state.velocity);
        int a = policy.executed_action(obs);
        LaneStepResult r = lane_step(state, params, a);
        if (r.intervened) ++out.interventions;
        if (r.zone_violated != 0) ++out.zone_violations[r.zone_violated - 1];
        out.reward_sum += r.reward;
        out.cost_sum += r.cost;
        if (r.next.position >= params.goal_position) {
            out.reached_goal = true;
            done = true;
        }
        state = r.next;
    }
    return out;
}

/// Episodic environment over the lane grid observation.
class LaneDiscreteEnv : public DiscreteEnv {
  public:
    LaneDiscreteEnv(LaneParams params, int pos_buckets, int vel_buckets, double gamma = 0.995)
        : params_(params), gamma_(gamma) {
        params_.validate();
        grid_.pos_buckets = pos_buckets;
        grid_.vel_buckets = vel_buckets;
        grid_.pos_hi = params.goal_position;
        grid_.vel_hi = params.max_velocity;
    }

    int observation_count() const override { return grid_.states(); }
    int action_count() const override { return static_cast<int>(params_.accel_grid.size()); }
    int horizon() const override { return params_.horizon; }
    double gamma() const override { return gamma_; }

    int reset(RngStream&) override {
        state_ = LaneState{};
        done_ = false;
        return observe();
    }

    TransitionSample step(int action, RngStream&) override {
        TransitionSample t;
        t.state = observe();
        if (done_) { // goal reached: absorbing, free, rewardless
            t.action = kNullAction;
            t.next_state = t.state;
            return t;
        }
        LaneStepResult r = lane_step(state_, params_, action);
        t.action = action;
        t.reward = r.reward;
        t.cost = r.cost;
        t.intervened = r.intervened;
        state_ = r.next;
        if (state_.position >= params_.goal_position) done_ = true;
        t.next_state = observe();
        return t;
    }

    const LaneState& state() const { return state_; }

  private:
    int observe() const {
        return done_ ? grid_.goal_state() : grid_.nearest(state_.position, state_.velocity);
    }

    LaneParams params_;
    LaneGrid grid_;
    double gamma_;
    LaneState state_;
    bool done_ = false;
};

} // namespace licra
