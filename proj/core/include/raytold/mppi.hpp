#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raytold/common.hpp"
#include "raytold/crowd.hpp"
#include "raytold/env.hpp"
#include "raytold/lidar.hpp"
#include "raytold/reward.hpp"
#include "raytold/told.hpp"

namespace raytold::mppi {

struct PlannerConfig {
    int horizon = 30;
    int samples = 256;
    int iterations = 3;
    double lambda = 1.0;
    double gamma = 0.99;
    double alpha = 0.0;  // policy mixture ratio, [0, 0.2] in the reference setup
    std::array<double, 2> noise_std{0.5, 0.5};  // normalized action units
    bool use_terminal_value = false;
    bool use_policy_mixture = false;
    int workers = 1;  // > 1 evaluates candidates on a TBB arena of that size
    bool record_candidates = false;

    void validate() const;
    /// floor(alpha * K) when mixture sampling is on, else 0.
    int policy_seeded_count() const;
    bool needs_model() const { return use_terminal_value || use_policy_mixture; }
};

using ActionSequence = std::vector<NormAction>;

/// Everything a rollout needs besides the candidate and the obstacle forecast.
struct RolloutContext {
    WorldConfig world;
    LidarConfig lidar;
    RewardParams reward;
    Vec2 goal{19.0, 0.0};
};

struct PlanResult {
    Action first_action;       // physical units
    ActionSequence mean;       // optimized mean, normalized
    ActionSequence warm_start; // mean before the first iteration
    std::vector<double> returns;  // final iteration, per candidate
    std::vector<double> weights;  // final iteration, per candidate
    double effective_sample_size = 0.0;
    int policy_seeded = 0;
    int non_finite = 0;  // accumulated over all iterations
    std::vector<ActionSequence> candidates;  // final iteration, only with record_candidates
};

/// Constant-velocity forecast: entry t holds positions advanced by t*dt, clamped to the map.
/// Returns horizon_steps + 1 snapshots, entry 0 being the input crowd.
std::vector<Crowd> predict_obstacles_cv(std::span<const Obstacle> crowd, int horizon_steps, double dt,
                                        const WorldConfig& world);

/// Drops the first entry and appends a zero action; an empty input yields all zeros.
ActionSequence shift_warm_start(const ActionSequence& prev, int horizon);

/// exp((R_k - max R) / lambda), normalized. Non-finite returns get zero weight. Throws
/// std::runtime_error when every return is non-finite.
std::vector<double> softmax_weights(std::span<const double> returns, double lambda);

/// sum_k w_k * candidates[k], accumulated in candidate order.
ActionSequence weighted_mean(std::span<const ActionSequence> candidates, std::span<const double> weights);

/// Discounted physics return of one candidate. Rewards are taken at the post-step state against
/// snapshot t + 1. Writes the terminal state when requested.
double discounted_physics_return(std::span<const NormAction> candidate, const VehicleState& ego,
                                 std::span<const Crowd> snapshots, double gamma, const RolloutContext& ctx,
                                 VehicleState* terminal = nullptr);

/// Observation of the imagined terminal state against the last snapshot.
Observation terminal_observation(const VehicleState& terminal, std::span<const Crowd> snapshots,
                                 const RolloutContext& ctx);

/// Physics return plus gamma^H * Q(z_H, pi(z_H)) when the config enables the terminal value.
double rollout_return(std::span<const NormAction> candidate, const VehicleState& ego,
                      std::span<const Crowd> snapshots, const PlannerConfig& cfg, const RolloutContext& ctx,
                      const told::ToldModel* model);

/// One receding-horizon solve. `prev_mean` is the previous solution (empty at episode start).
/// Throws ConfigError when the config needs a model and none is given.
PlanResult plan(const VehicleState& ego, std::span<const Obstacle> crowd, const RolloutContext& ctx,
                const told::ToldModel* model, const PlannerConfig& cfg, const ActionSequence& prev_mean, Rng& rng);

/// Compact JSON record: return summary, ESS, seeded and non-finite counts.
std::string plan_diagnostics_json(const PlanResult& result);

/// Keeps the warm start between calls within an episode.
class Planner {
public:
    Planner(PlannerConfig cfg, RolloutContext ctx, const told::ToldModel* model);

    void reset() { mean_.clear(); }
    PlanResult plan(const VehicleState& ego, std::span<const Obstacle> crowd, Rng& rng);

    const PlannerConfig& config() const { return cfg_; }
    const ActionSequence& mean() const { return mean_; }

private:
    PlannerConfig cfg_;
    RolloutContext ctx_;
    const told::ToldModel* model_;
    ActionSequence mean_;
};

}  // namespace raytold::mppi
