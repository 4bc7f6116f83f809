#include "raytold/environment.hpp"

#include <stdexcept>

namespace raytold {

void SimConfig::validate() const {
    world.validate();
    sfm.validate();
    lidar.validate();
}

RewardParams SimConfig::reward_params() const {
    RewardParams p;
    p.collision_clearance = world.collision_clearance;
    p.goal_radius = world.goal_radius;
    return p;
}

Environment::Environment(SimConfig cfg) : cfg_(std::move(cfg)), reward_params_(cfg_.reward_params()) {
    cfg_.validate();
}

void Environment::sense() {
    scan_ = cast_rays(ego_, crowd_, cfg_.lidar, cfg_.world);
    clearance_ = min_clearance(scan_);
    observation_ = assemble_observation(ego_, cfg_.world.goal, scan_, cfg_.lidar);
}

Observation Environment::reset(std::uint64_t crowd_seed) {
    rng_.seed(crowd_seed);
    crowd_ = spawn_crowd(rng_, cfg_.world, cfg_.sfm);
    ego_ = initial_vehicle_state(cfg_.world);
    steps_ = 0;
    sense();
    status_ = episode_status(ego_, clearance_, steps_, cfg_.world);
    return observation_;
}

Environment::StepResult Environment::step(const Action& action) {
    if (status_ != EpisodeStatus::Running) {
        throw std::logic_error("Environment::step: episode already ended");
    }
    ego_ = step_vehicle(ego_, clip_action(action), cfg_.world);
    crowd_ = step_crowd(crowd_, cfg_.sfm, cfg_.world, cfg_.world.dt, rng_);
    ++steps_;
    sense();
    StepResult r;
    r.reward = compute_reward(ego_, clearance_, cfg_.world.goal, reward_params_);
    r.clearance = clearance_;
    status_ = episode_status(ego_, clearance_, steps_, cfg_.world);
    r.status = status_;
    r.observation = observation_;
    return r;
}

}  // namespace raytold
