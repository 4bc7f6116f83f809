#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>

#include "raytold/environment.hpp"
#include "raytold/mppi.hpp"
#include "raytold/told.hpp"

namespace raytold::training {

struct TrainingConfig {
    std::int64_t env_steps = 200000;
    std::int64_t seed_steps = 5000;     // uniform random actions before the planner takes over
    double updates_per_env_step = 0.05;
    double exploration_std = 0.1;       // added to executed planner actions (normalized units)
    std::uint64_t seed = 1;
    /// Cheaper planner used while collecting data.
    mppi::PlannerConfig collect_planner = [] {
        mppi::PlannerConfig p;
        p.samples = 32;
        p.iterations = 1;
        p.alpha = 0.125;
        p.use_policy_mixture = true;
        p.use_terminal_value = true;
        return p;
    }();

    void validate() const;
};

struct EpisodeStats {
    int steps = 0;
    EpisodeStatus status = EpisodeStatus::Running;
    double episode_return = 0.0;
};

/// Runs one episode to termination and appends every transition to `buffer`. With a null
/// `planner_cfg` actions are uniform in [-1, 1]^2; otherwise the planner (seeded from `model`)
/// acts and Gaussian exploration noise is added before clipping.
EpisodeStats collect_episode(const told::ToldModel* model, const mppi::PlannerConfig* planner_cfg,
                             Environment& env, std::uint64_t crowd_seed, told::ReplayBuffer& buffer,
                             double exploration_std, Rng& rng);

struct ProgressRecord {
    std::int64_t train_step = 0;
    std::int64_t env_steps = 0;
    std::size_t buffer_size = 0;
    told::LossReport loss;
};

/// JSON line: {"step":..,"env_steps":..,"buffer":..,"reward":..,"value":..,"policy":..,"latent":..,"total":..}
std::string progress_json(const ProgressRecord& record);

struct TrainingSummary {
    std::int64_t env_steps = 0;
    std::int64_t train_steps = 0;
    int episodes = 0;
    int successes = 0;
    int collisions = 0;
};

/// Alternates episode collection and gradient updates until `cfg.env_steps` environment steps
/// have been collected. `on_progress` sees every update.
TrainingSummary train(const TrainingConfig& cfg, const SimConfig& sim, told::ToldTrainer& trainer,
                      told::ReplayBuffer& buffer, const std::function<void(const ProgressRecord&)>& on_progress = {});

}  // namespace raytold::training
