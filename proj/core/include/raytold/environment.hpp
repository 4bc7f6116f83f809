#pragma once

#include <cstdint>
#include <vector>

#include "raytold/crowd.hpp"
#include "raytold/env.hpp"
#include "raytold/lidar.hpp"
#include "raytold/reward.hpp"

namespace raytold {

/// Full simulator configuration.
struct SimConfig {
    WorldConfig world;
    SfmParams sfm;
    LidarConfig lidar;

    void validate() const;
    /// Reward constants with the collision and goal thresholds taken from the world.
    RewardParams reward_params() const;
};

/// One closed-loop arena: the ego, its crowd and the episode bookkeeping.
class Environment {
public:
    struct StepResult {
        Observation observation;
        RewardBreakdown reward;
        double clearance = 0.0;
        EpisodeStatus status = EpisodeStatus::Running;
    };

    explicit Environment(SimConfig cfg);

    /// Spawns a fresh crowd from `crowd_seed` and puts the ego at the start pose.
    Observation reset(std::uint64_t crowd_seed);

    /// Applies a physical action (clipped), advances the crowd, senses and scores. Throws
    /// std::logic_error once the episode has ended.
    StepResult step(const Action& action);

    const SimConfig& config() const { return cfg_; }
    const VehicleState& ego() const { return ego_; }
    const Crowd& crowd() const { return crowd_; }
    const RayScan& scan() const { return scan_; }
    const Observation& observation() const { return observation_; }
    double clearance() const { return clearance_; }
    EpisodeStatus status() const { return status_; }
    int steps() const { return steps_; }

private:
    void sense();

    SimConfig cfg_;
    RewardParams reward_params_;
    Rng rng_;
    VehicleState ego_;
    Crowd crowd_;
    RayScan scan_;
    Observation observation_;
    double clearance_ = 0.0;
    EpisodeStatus status_ = EpisodeStatus::Running;
    int steps_ = 0;
};

}  // namespace raytold
