#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "raytold/bench.hpp"
#include "raytold/lidar.hpp"
#include "raytold/mppi.hpp"
#include "raytold/nnet.hpp"
#include "raytold/told.hpp"
#include "raytold/training.hpp"

namespace {

using namespace raytold;

struct Scene {
    VehicleState ego{10.0, 0.0, 0.3, 1.0};
    Crowd crowd;
};

Scene default_scene(std::uint64_t seed = 3) {
    Rng rng(seed);
    Scene s;
    s.crowd = spawn_crowd(rng, WorldConfig{}, SfmParams{});
    return s;
}

void BM_CastRays(benchmark::State& state) {
    const Scene s = default_scene();
    const WorldConfig world;
    const LidarConfig lidar;
    for (auto _ : state) {
        benchmark::DoNotOptimize(cast_rays(s.ego, s.crowd, lidar, world));
    }
    state.counters["obstacles"] = static_cast<double>(s.crowd.size());
}
BENCHMARK(BM_CastRays);

void BM_ObstacleClearance(benchmark::State& state) {
    const Scene s = default_scene();
    const WorldConfig world;
    const LidarConfig lidar;
    for (auto _ : state) {
        benchmark::DoNotOptimize(obstacle_clearance(s.ego, s.crowd, lidar, world));
    }
}
BENCHMARK(BM_ObstacleClearance);

void BM_StepCrowd(benchmark::State& state) {
    const Scene s = default_scene();
    const WorldConfig world;
    const SfmParams sfm;
    Rng rng(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(step_crowd(s.crowd, sfm, world, world.dt, rng));
    }
}
BENCHMARK(BM_StepCrowd);

// Encoder-sized MLP (186 -> 256 -> 256 -> 128) on a batch of `range(0)` columns.
void BM_MlpForwardBatch(benchmark::State& state) {
    Rng rng(1);
    const told::ToldConfig cfg;
    const nnet::ParamSet p = nnet::init_params(cfg.encoder_spec(), rng);
    const nnet::Matrix x = nnet::Matrix::Random(cfg.obs_dim, state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(nnet::forward_batch(p, x));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForwardBatch)->Arg(1)->Arg(32)->Arg(256);

// One planning call; range(0) selects plain MPPI (0) or the a10 configuration with a model (1).
void BM_Plan(benchmark::State& state) {
    const Scene s = default_scene();
    const bool learned = state.range(0) != 0;
    const told::ToldModel model = told::ToldModel::create(told::ToldConfig{}, 1);
    const mppi::PlannerConfig cfg =
        bench::planner_config_for(*bench::find_method(learned ? "raytold-a10" : "mppi"), mppi::PlannerConfig{});
    const SimConfig sim;
    const mppi::RolloutContext ctx{sim.world, sim.lidar, sim.reward_params(), sim.world.goal};
    mppi::Planner planner(cfg, ctx, learned ? &model : nullptr);
    Rng rng(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(planner.plan(s.ego, s.crowd, rng));
    }
}
BENCHMARK(BM_Plan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    const told::ToldConfig cfg;
    told::ToldTrainer trainer(told::ToldModel::create(cfg, 1));
    told::ReplayBuffer buffer(5000);
    Environment env(SimConfig{});
    Rng rng(1);
    while (buffer.size() < 2000) {
        training::collect_episode(nullptr, nullptr, env, rng(), buffer, 0.0, rng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(trainer.train_step(buffer, rng));
    }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
