// Command-line entry point: train, bench, rollout, export-latents.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 bad configuration,
// 4 unusable checkpoint.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "raytold/bench.hpp"
#include "raytold/config.hpp"
#include "raytold/training.hpp"

namespace {

using namespace raytold;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitCheckpoint = 4;

// Flags shared by every subcommand: the config file plus the headline hyperparameters.
struct CommonOptions {
    std::string config_path;
    std::optional<int> horizon;
    std::optional<int> eval_steps;
    std::optional<int> samples;
    std::optional<int> iterations;
    std::optional<double> lambda;
    std::optional<double> gamma;
    std::optional<int> lidar_rays;
    std::optional<double> obstacle_radius;
    std::vector<double> map_size;
    std::optional<int> batch_size;
    std::optional<double> learning_rate;
    std::optional<std::size_t> buffer_size;
    std::optional<int> workers;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("-c,--config", o.config_path, "YAML configuration file")->check(CLI::ExistingFile);
    app->add_option("--horizon", o.horizon, "planning horizon H");
    app->add_option("--eval-steps", o.eval_steps, "episode step limit");
    app->add_option("--samples", o.samples, "MPPI samples K");
    app->add_option("--iterations", o.iterations, "MPPI iterations M");
    app->add_option("--lambda", o.lambda, "softmax temperature");
    app->add_option("--gamma", o.gamma, "discount factor (planner and model)");
    app->add_option("--lidar-rays", o.lidar_rays, "number of LiDAR rays");
    app->add_option("--obstacle-radius", o.obstacle_radius, "obstacle radius in m");
    app->add_option("--map-size", o.map_size, "map width and height in m")->expected(2);
    app->add_option("--batch-size", o.batch_size, "training batch size");
    app->add_option("--learning-rate", o.learning_rate, "Adam learning rate");
    app->add_option("--buffer-size", o.buffer_size, "replay buffer capacity");
    app->add_option("--workers", o.workers, "parallel episodes");
}

AppConfig resolve_config(const CommonOptions& o) {
    AppConfig cfg = o.config_path.empty() ? parse_config("") : load_config(o.config_path);
    if (o.horizon) cfg.planner.horizon = *o.horizon;
    if (o.eval_steps) cfg.sim.world.max_steps = *o.eval_steps;
    if (o.samples) cfg.planner.samples = *o.samples;
    if (o.iterations) cfg.planner.iterations = *o.iterations;
    if (o.lambda) cfg.planner.lambda = *o.lambda;
    if (o.gamma) {
        cfg.planner.gamma = *o.gamma;
        cfg.train.collect_planner.gamma = *o.gamma;
        cfg.model.gamma = *o.gamma;
    }
    if (o.lidar_rays) cfg.sim.lidar.num_rays = *o.lidar_rays;
    if (o.obstacle_radius) cfg.sim.world.obstacle_radius = *o.obstacle_radius;
    if (o.map_size.size() == 2) {
        cfg.sim.world.map_half_extents = {0.5 * o.map_size[0], 0.5 * o.map_size[1]};
    }
    if (o.batch_size) cfg.model.batch_size = *o.batch_size;
    if (o.learning_rate) cfg.model.learning_rate = *o.learning_rate;
    if (o.buffer_size) cfg.model.buffer_capacity = *o.buffer_size;
    if (o.workers) cfg.bench.workers = *o.workers;
    cfg.finalize();
    return cfg;
}

std::vector<bench::MethodSpec> resolve_methods(const std::vector<std::string>& names) {
    std::vector<bench::MethodSpec> methods;
    for (const std::string& name : names) {
        const auto m = bench::find_method(name);
        if (!m) {
            throw ConfigError("unknown method '" + name + "' (expected mppi, raytold-a0, raytold-a10, raytold-a20)");
        }
        methods.push_back(*m);
    }
    return methods;
}

std::optional<told::ToldModel> load_model(const std::string& path, const AppConfig& cfg) {
    if (path.empty()) {
        return std::nullopt;
    }
    return told::ToldModel::load(path, cfg.model);
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    return out;
}

struct TrainArgs {
    std::optional<std::int64_t> steps;
    std::optional<std::uint64_t> seed;
    std::string checkpoint_out;
    std::string progress_log;
};

int run_train(const CommonOptions& common, const TrainArgs& args) {
    AppConfig cfg = resolve_config(common);
    if (args.steps) cfg.train.env_steps = *args.steps;
    if (args.seed) cfg.train.seed = *args.seed;
    cfg.finalize();

    told::ToldTrainer trainer(told::ToldModel::create(cfg.model, cfg.train.seed));
    told::ReplayBuffer buffer(cfg.model.buffer_capacity);
    std::ofstream log_file;
    std::ostream* log = nullptr;
    if (args.progress_log == "-") {
        log = &std::cerr;
    } else if (!args.progress_log.empty()) {
        log_file = open_output(args.progress_log);
        log = &log_file;
    }
    const auto started = std::chrono::steady_clock::now();
    const training::TrainingSummary summary =
        training::train(cfg.train, cfg.sim, trainer, buffer, [&](const training::ProgressRecord& record) {
            if (log != nullptr) {
                *log << training::progress_json(record) << '\n';
            }
        });
    trainer.model().save(args.checkpoint_out);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::cout << "env_steps=" << summary.env_steps << " train_steps=" << summary.train_steps
              << " episodes=" << summary.episodes << " successes=" << summary.successes
              << " collisions=" << summary.collisions << " seconds=" << seconds << '\n'
              << "checkpoint written to " << args.checkpoint_out << '\n';
    return 0;
}

struct BenchArgs {
    std::string checkpoint;
    std::vector<std::string> methods;
    std::optional<int> n;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string diagnostics;
    bool latents = false;
};

int run_bench(const CommonOptions& common, const BenchArgs& args) {
    AppConfig cfg = resolve_config(common);
    if (!args.methods.empty()) cfg.bench.methods = args.methods;
    if (args.n) cfg.bench.n = *args.n;
    if (args.seed) cfg.bench.seed = *args.seed;
    cfg.finalize();

    const std::vector<bench::MethodSpec> methods = resolve_methods(cfg.bench.methods);
    const std::optional<told::ToldModel> model = load_model(args.checkpoint, cfg);
    bench::BenchmarkOptions options;
    options.workers = cfg.bench.workers;
    options.episode.crowd_stride = cfg.bench.crowd_stride;
    options.episode.record_latents = args.latents;
    std::ofstream diag;
    if (!args.diagnostics.empty()) {
        diag = open_output(args.diagnostics);
        options.episode.diagnostics = &diag;
    }
    const bench::BenchmarkResult result = bench::run_benchmark(cfg.bench.n, methods, cfg.bench.seed, cfg.sim,
                                                               cfg.planner, model ? &*model : nullptr, options);
    bench::export_benchmark(args.out_dir, result, config_hash(cfg));
    bench::write_summary_csv(std::cout, result.summaries, config_hash(cfg));
    return 0;
}

struct RolloutArgs {
    std::string checkpoint;
    std::string method = "mppi";
    std::uint64_t seed = 1;
    int index = 0;
    std::string out_dir;
    std::string diagnostics;
};

int run_rollout(const CommonOptions& common, const RolloutArgs& args) {
    const AppConfig cfg = resolve_config(common);
    const bench::MethodSpec method = resolve_methods({args.method}).front();
    const std::optional<told::ToldModel> model = load_model(args.checkpoint, cfg);
    bench::EpisodeOptions options;
    options.crowd_stride = 1;
    options.record_latents = model.has_value();
    std::ofstream diag;
    if (!args.diagnostics.empty()) {
        diag = open_output(args.diagnostics);
        options.diagnostics = &diag;
    }
    const bench::EpisodeRecord record = bench::run_episode(bench::ScenarioSeed{args.seed, args.index}, method, cfg.sim,
                                                           cfg.planner, model ? &*model : nullptr, options);
    bench::export_records(args.out_dir, std::span(&record, 1));
    std::cout << "status=" << to_string(record.status) << " steps=" << record.steps
              << " safety_margin=" << bench::episode_safety_margin(record) << '\n';
    return 0;
}

struct ExportArgs {
    std::string checkpoint;
    std::string method = "mppi";
    int n = 10;
    std::uint64_t seed = 1;
    std::string out;
};

int run_export_latents(const CommonOptions& common, const ExportArgs& args) {
    const AppConfig cfg = resolve_config(common);
    const bench::MethodSpec method = resolve_methods({args.method}).front();
    const told::ToldModel model = told::ToldModel::load(args.checkpoint, cfg.model);
    bench::EpisodeOptions options;
    options.crowd_stride = 0;
    options.record_latents = true;
    std::vector<bench::EpisodeRecord> records;
    for (int i = 0; i < args.n; ++i) {
        records.push_back(bench::run_episode(bench::ScenarioSeed{args.seed, i}, method, cfg.sim, cfg.planner, &model,
                                             options));
    }
    std::ofstream out = open_output(args.out);
    bench::write_latents_csv(out, records);
    if (!out.flush()) {
        throw std::runtime_error("write failed: " + args.out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crowd navigation with a latent world model: training, benchmarking and data export"};
    app.require_subcommand(1);

    CommonOptions common;

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train the latent model and write a checkpoint");
    add_common(train, common);
    train->add_option("--steps", train_args.steps, "environment steps to collect");
    train->add_option("--seed", train_args.seed, "training seed");
    train->add_option("-o,--checkpoint-out", train_args.checkpoint_out, "checkpoint path")->required();
    train->add_option("--progress-log", train_args.progress_log, "JSON-lines progress file ('-' for stderr)");

    BenchArgs bench_args;
    CLI::App* bench_cmd = app.add_subcommand("bench", "run paired scenarios for several methods");
    add_common(bench_cmd, common);
    bench_cmd->add_option("--checkpoint", bench_args.checkpoint, "model checkpoint for learned methods");
    bench_cmd->add_option("--methods", bench_args.methods, "methods to compare, first is the reference")
        ->delimiter(',');
    bench_cmd->add_option("--n", bench_args.n, "number of scenarios");
    bench_cmd->add_option("--seed", bench_args.seed, "master scenario seed");
    bench_cmd->add_option("-o,--out", bench_args.out_dir, "output directory")->required();
    bench_cmd->add_option("--diagnostics", bench_args.diagnostics, "per-plan JSON-lines file (forces one worker)");
    bench_cmd->add_flag("--latents", bench_args.latents, "also export latents (needs --checkpoint)");

    RolloutArgs rollout_args;
    CLI::App* rollout = app.add_subcommand("rollout", "run one scenario with full export");
    add_common(rollout, common);
    rollout->add_option("--checkpoint", rollout_args.checkpoint, "model checkpoint");
    rollout->add_option("--method", rollout_args.method, "planner variant")->capture_default_str();
    rollout->add_option("--seed", rollout_args.seed, "master scenario seed")->capture_default_str();
    rollout->add_option("--index", rollout_args.index, "scenario index")->capture_default_str();
    rollout->add_option("-o,--out", rollout_args.out_dir, "output directory")->required();
    rollout->add_option("--diagnostics", rollout_args.diagnostics, "per-plan JSON-lines file");

    ExportArgs export_args;
    CLI::App* export_cmd = app.add_subcommand("export-latents", "encode closed-loop observations into a latent table");
    add_common(export_cmd, common);
    export_cmd->add_option("--checkpoint", export_args.checkpoint, "model checkpoint")->required();
    export_cmd->add_option("--method", export_args.method, "planner driving the episodes")->capture_default_str();
    export_cmd->add_option("--n", export_args.n, "number of scenarios")->capture_default_str();
    export_cmd->add_option("--seed", export_args.seed, "master scenario seed")->capture_default_str();
    export_cmd->add_option("-o,--out", export_args.out, "latent CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (train->parsed()) return run_train(common, train_args);
        if (bench_cmd->parsed()) return run_bench(common, bench_args);
        if (rollout->parsed()) return run_rollout(common, rollout_args);
        return run_export_latents(common, export_args);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return kExitCheckpoint;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
