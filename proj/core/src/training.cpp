#include "raytold/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>

#include <nlohmann/json.hpp>

namespace raytold::training {

void TrainingConfig::validate() const {
    if (env_steps < 0 || seed_steps < 0) {
        throw ConfigError("train: env_steps and seed_steps must be non-negative");
    }
    if (!(updates_per_env_step >= 0.0) || !(exploration_std >= 0.0)) {
        throw ConfigError("train: updates_per_env_step and exploration_std must be non-negative");
    }
    collect_planner.validate();
}

EpisodeStats collect_episode(const told::ToldModel* model, const mppi::PlannerConfig* planner_cfg,
                             Environment& env, std::uint64_t crowd_seed, told::ReplayBuffer& buffer,
                             double exploration_std, Rng& rng) {
    env.reset(crowd_seed);
    std::optional<mppi::Planner> planner;
    if (planner_cfg != nullptr) {
        mppi::RolloutContext ctx{env.config().world, env.config().lidar, env.config().reward_params(),
                                 env.config().world.goal};
        planner.emplace(*planner_cfg, ctx, model);
    }
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    EpisodeStats stats;
    while (env.status() == EpisodeStatus::Running) {
        NormAction a;
        if (planner) {
            a = planner->plan(env.ego(), env.crowd(), rng).mean.front();
            if (exploration_std > 0.0) {
                for (double& v : a) {
                    v = std::clamp(v + exploration_std * noise(rng), -1.0, 1.0);
                }
            }
        } else {
            a = {uniform(rng), uniform(rng)};
        }
        told::Transition t;
        t.obs = env.observation();
        t.action = a;
        const Environment::StepResult r = env.step(to_physical(a));
        t.reward = r.reward.total;
        t.next_obs = r.observation;
        // Time-limit truncation is not a terminal state for bootstrapping.
        t.done = r.status == EpisodeStatus::Success || r.status == EpisodeStatus::Collision;
        buffer.push(std::move(t));
        stats.episode_return += r.reward.total;
        ++stats.steps;
    }
    if (env.status() == EpisodeStatus::Timeout) {
        buffer.end_episode();
    }
    stats.status = env.status();
    return stats;
}

std::string progress_json(const ProgressRecord& record) {
    nlohmann::json j;
    j["step"] = record.train_step;
    j["env_steps"] = record.env_steps;
    j["buffer"] = record.buffer_size;
    j["reward"] = record.loss.reward;
    j["value"] = record.loss.value;
    j["policy"] = record.loss.policy;
    j["latent"] = record.loss.latent;
    j["total"] = record.loss.total;
    return j.dump();
}

TrainingSummary train(const TrainingConfig& cfg, const SimConfig& sim, told::ToldTrainer& trainer,
                      told::ReplayBuffer& buffer, const std::function<void(const ProgressRecord&)>& on_progress) {
    cfg.validate();
    Environment env(sim);
    Rng rng(derive_seed(cfg.seed, 0x7261696eull));
    TrainingSummary summary;
    double update_credit = 0.0;
    const int window = trainer.model().config.unroll;

    while (summary.env_steps < cfg.env_steps) {
        const std::uint64_t crowd_seed = derive_seed(cfg.seed, 0x63726f77ull, static_cast<std::uint64_t>(summary.episodes));
        const bool warmup = summary.env_steps < cfg.seed_steps;
        // Planners read an immutable snapshot that only changes between episodes.
        const std::shared_ptr<const told::ToldModel> snapshot = warmup ? nullptr : trainer.snapshot();
        const EpisodeStats stats = collect_episode(snapshot.get(), warmup ? nullptr : &cfg.collect_planner, env,
                                                   crowd_seed, buffer, cfg.exploration_std, rng);
        summary.env_steps += stats.steps;
        ++summary.episodes;
        summary.successes += stats.status == EpisodeStatus::Success ? 1 : 0;
        summary.collisions += stats.status == EpisodeStatus::Collision ? 1 : 0;

        if (buffer.valid_starts(window).empty()) {
            continue;
        }
        update_credit += cfg.updates_per_env_step * static_cast<double>(stats.steps);
        while (update_credit >= 1.0) {
            update_credit -= 1.0;
            ProgressRecord record;
            record.loss = trainer.train_step(buffer, rng);
            record.train_step = trainer.steps();
            record.env_steps = summary.env_steps;
            record.buffer_size = buffer.size();
            ++summary.train_steps;
            if (on_progress) {
                on_progress(record);
            }
        }
    }
    return summary;
}

}  // namespace raytold::training
