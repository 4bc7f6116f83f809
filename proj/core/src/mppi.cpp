#include "raytold/mppi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace raytold::mppi {
namespace {

template <typename Fn>
void for_each_candidate(int count, int workers, Fn&& fn) {
    if (workers <= 1) {
        for (int k = 0; k < count; ++k) {
            fn(k);
        }
        return;
    }
    tbb::task_arena arena(workers);
    arena.execute([&] { tbb::parallel_for(0, count, [&](int k) { fn(k); }); });
}

NormAction clip_normalized(const NormAction& a) {
    return {std::clamp(a[0], -1.0, 1.0), std::clamp(a[1], -1.0, 1.0)};
}

}  // namespace

void PlannerConfig::validate() const {
    if (horizon < 1 || samples < 1 || iterations < 1) {
        throw ConfigError("planner: horizon, samples and iterations must be at least 1");
    }
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("planner: lambda must be positive");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw ConfigError("planner: gamma must lie in [0, 1]");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("planner: alpha must lie in [0, 1]");
    }
    if (noise_std[0] < 0.0 || noise_std[1] < 0.0) {
        throw ConfigError("planner: noise_std must be non-negative");
    }
    if (use_policy_mixture && policy_seeded_count() < 1) {
        throw ConfigError("planner: alpha * samples must be at least 1 when policy mixture is enabled");
    }
}

int PlannerConfig::policy_seeded_count() const {
    if (!use_policy_mixture) {
        return 0;
    }
    return static_cast<int>(std::floor(alpha * static_cast<double>(samples) + 1e-9));
}

std::vector<Crowd> predict_obstacles_cv(std::span<const Obstacle> crowd, int horizon_steps, double dt,
                                        const WorldConfig& world) {
    if (horizon_steps < 1) {
        throw std::invalid_argument("predict_obstacles_cv: horizon_steps must be at least 1");
    }
    std::vector<Crowd> snapshots;
    snapshots.reserve(static_cast<std::size_t>(horizon_steps) + 1);
    snapshots.emplace_back(crowd.begin(), crowd.end());
    for (int t = 1; t <= horizon_steps; ++t) {
        Crowd snap(crowd.begin(), crowd.end());
        const double elapsed = static_cast<double>(t) * dt;
        for (Obstacle& o : snap) {
            o.pos = clamp_to_map(o.pos + o.vel * elapsed, o.radius, world);
        }
        snapshots.push_back(std::move(snap));
    }
    return snapshots;
}

ActionSequence shift_warm_start(const ActionSequence& prev, int horizon) {
    ActionSequence next(static_cast<std::size_t>(horizon), NormAction{0.0, 0.0});
    for (std::size_t t = 1; t < prev.size() && t - 1 < next.size(); ++t) {
        next[t - 1] = prev[t];
    }
    return next;
}

std::vector<double> softmax_weights(std::span<const double> returns, double lambda) {
    double best = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (double r : returns) {
        if (std::isfinite(r)) {
            best = std::max(best, r);
            any = true;
        }
    }
    if (!any) {
        throw std::runtime_error("mppi: every rollout return is non-finite");
    }
    std::vector<double> w(returns.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < returns.size(); ++k) {
        if (std::isfinite(returns[k])) {
            w[k] = std::exp((returns[k] - best) / lambda);
            total += w[k];
        }
    }
    for (double& v : w) {
        v /= total;
    }
    return w;
}

ActionSequence weighted_mean(std::span<const ActionSequence> candidates, std::span<const double> weights) {
    if (candidates.empty() || candidates.size() != weights.size()) {
        throw std::invalid_argument("weighted_mean: candidate/weight count mismatch");
    }
    ActionSequence mean(candidates.front().size(), NormAction{0.0, 0.0});
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        for (std::size_t t = 0; t < mean.size(); ++t) {
            mean[t][0] += weights[k] * candidates[k][t][0];
            mean[t][1] += weights[k] * candidates[k][t][1];
        }
    }
    return mean;
}

double discounted_physics_return(std::span<const NormAction> candidate, const VehicleState& ego,
                                 std::span<const Crowd> snapshots, double gamma, const RolloutContext& ctx,
                                 VehicleState* terminal) {
    if (snapshots.size() < candidate.size() + 1) {
        throw std::invalid_argument("rollout: need one obstacle snapshot per step plus the initial one");
    }
    VehicleState s = ego;
    double total = 0.0;
    double discount = 1.0;
    for (std::size_t t = 0; t < candidate.size(); ++t) {
        s = step_vehicle(s, to_physical(candidate[t]), ctx.world);
        const double d_obs = obstacle_clearance(s, snapshots[t + 1], ctx.lidar, ctx.world);
        total += discount * compute_reward(s, d_obs, ctx.goal, ctx.reward).total;
        discount *= gamma;
    }
    if (terminal != nullptr) {
        *terminal = s;
    }
    return total;
}

Observation terminal_observation(const VehicleState& terminal, std::span<const Crowd> snapshots,
                                 const RolloutContext& ctx) {
    const Crowd& last = snapshots.back();
    return assemble_observation(terminal, ctx.goal, cast_rays(terminal, last, ctx.lidar, ctx.world), ctx.lidar);
}

double rollout_return(std::span<const NormAction> candidate, const VehicleState& ego,
                      std::span<const Crowd> snapshots, const PlannerConfig& cfg, const RolloutContext& ctx,
                      const told::ToldModel* model) {
    if (static_cast<int>(candidate.size()) != cfg.horizon) {
        throw std::invalid_argument("rollout_return: candidate length must equal the horizon");
    }
    VehicleState terminal;
    double total = discounted_physics_return(candidate, ego, snapshots.first(candidate.size() + 1), cfg.gamma, ctx,
                                             &terminal);
    if (cfg.use_terminal_value) {
        if (model == nullptr) {
            throw ConfigError("rollout_return: terminal value requires a model");
        }
        const Observation x = terminal_observation(terminal, snapshots.first(candidate.size() + 1), ctx);
        const nnet::Matrix col = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
        total += std::pow(cfg.gamma, cfg.horizon) * told::terminal_values(*model, col)(0);
    }
    return total;
}

PlanResult plan(const VehicleState& ego, std::span<const Obstacle> crowd, const RolloutContext& ctx,
                const told::ToldModel* model, const PlannerConfig& cfg, const ActionSequence& prev_mean, Rng& rng) {
    cfg.validate();
    if (cfg.needs_model() && model == nullptr) {
        throw ConfigError("plan: the planner configuration requires a trained model");
    }
    const int H = cfg.horizon;
    const int K = cfg.samples;
    const auto h = static_cast<std::size_t>(H);

    PlanResult result;
    result.warm_start = shift_warm_start(prev_mean, H);
    result.policy_seeded = cfg.policy_seeded_count();
    ActionSequence mean = result.warm_start;

    ActionSequence policy_seq;
    if (result.policy_seeded > 0) {
        const Observation x = assemble_observation(ego, ctx.goal, cast_rays(ego, crowd, ctx.lidar, ctx.world), ctx.lidar);
        policy_seq = told::latent_policy_rollout(*model, x, H);
    }

    const std::vector<Crowd> snapshots = predict_obstacles_cv(crowd, H, ctx.world.dt, ctx.world);
    const double terminal_discount = std::pow(cfg.gamma, H);
    const int obs_dim = ctx.lidar.observation_size();

    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<ActionSequence> candidates(static_cast<std::size_t>(K), ActionSequence(h));
    std::vector<double> returns(static_cast<std::size_t>(K), 0.0);
    std::vector<VehicleState> terminals(static_cast<std::size_t>(K));
    std::vector<double> weights;

    for (int m = 0; m < cfg.iterations; ++m) {
        for (int k = 0; k < K; ++k) {
            const ActionSequence& base = k < result.policy_seeded ? policy_seq : mean;
            auto& cand = candidates[static_cast<std::size_t>(k)];
            for (std::size_t t = 0; t < h; ++t) {
                const double e0 = cfg.noise_std[0] * unit(rng);
                const double e1 = cfg.noise_std[1] * unit(rng);
                cand[t] = clip_normalized({base[t][0] + e0, base[t][1] + e1});
            }
        }

        for_each_candidate(K, cfg.workers, [&](int k) {
            const auto ki = static_cast<std::size_t>(k);
            returns[ki] = discounted_physics_return(candidates[ki], ego, snapshots, cfg.gamma, ctx, &terminals[ki]);
        });

        if (cfg.use_terminal_value) {
            nnet::Matrix obs(obs_dim, K);
            for_each_candidate(K, cfg.workers, [&](int k) {
                const Observation x = terminal_observation(terminals[static_cast<std::size_t>(k)], snapshots, ctx);
                obs.col(k) = Eigen::Map<const Eigen::VectorXd>(x.data(), obs_dim);
            });
            const Eigen::VectorXd values = told::terminal_values(*model, obs);
            for (int k = 0; k < K; ++k) {
                returns[static_cast<std::size_t>(k)] += terminal_discount * values(k);
            }
        }

        for (double r : returns) {
            if (!std::isfinite(r)) {
                ++result.non_finite;
            }
        }
        weights = softmax_weights(returns, cfg.lambda);
        mean = weighted_mean(candidates, weights);
    }

    double sum_sq = 0.0;
    for (double w : weights) {
        sum_sq += w * w;
    }
    result.effective_sample_size = 1.0 / sum_sq;
    result.first_action = to_physical(mean.front());
    result.mean = std::move(mean);
    result.returns = std::move(returns);
    result.weights = std::move(weights);
    if (cfg.record_candidates) {
        result.candidates = std::move(candidates);
    }
    return result;
}

std::string plan_diagnostics_json(const PlanResult& result) {
    std::vector<double> finite;
    finite.reserve(result.returns.size());
    for (double r : result.returns) {
        if (std::isfinite(r)) {
            finite.push_back(r);
        }
    }
    std::sort(finite.begin(), finite.end());
    nlohmann::json j;
    if (!finite.empty()) {
        const auto quantile = [&](double q) {
            return finite[static_cast<std::size_t>(q * static_cast<double>(finite.size() - 1))];
        };
        double sum = 0.0;
        for (double r : finite) {
            sum += r;
        }
        j["returns"] = {{"min", finite.front()},
                        {"q25", quantile(0.25)},
                        {"median", quantile(0.5)},
                        {"q75", quantile(0.75)},
                        {"max", finite.back()},
                        {"mean", sum / static_cast<double>(finite.size())}};
    }
    j["ess"] = result.effective_sample_size;
    j["policy_seeded"] = result.policy_seeded;
    j["non_finite"] = result.non_finite;
    j["first_action"] = {result.first_action.accel, result.first_action.steer};
    return j.dump();
}

Planner::Planner(PlannerConfig cfg, RolloutContext ctx, const told::ToldModel* model)
    : cfg_(std::move(cfg)), ctx_(std::move(ctx)), model_(model) {
    cfg_.validate();
    if (cfg_.needs_model() && model_ == nullptr) {
        throw ConfigError("Planner: the planner configuration requires a trained model");
    }
}

PlanResult Planner::plan(const VehicleState& ego, std::span<const Obstacle> crowd, Rng& rng) {
    PlanResult r = mppi::plan(ego, crowd, ctx_, model_, cfg_, mean_, rng);
    mean_ = r.mean;
    return r;
}

}  // namespace raytold::mppi
