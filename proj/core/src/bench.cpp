#include "raytold/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace raytold::bench {

namespace {

constexpr std::uint64_t kCrowdStream = 0x63726f7764ull;
constexpr std::uint64_t kPlannerStream = 0x706c616e6eull;

void set_precision(std::ostream& out) {
    out << std::setprecision(17);
}

// Signed relative change in percent; an exact zero baseline only compares equal to itself.
double relative_change(double value, double base) {
    if (base == 0.0) {
        return value == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    }
    return (value - base) / std::abs(base) * 100.0;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    set_precision(out);
    return out;
}

void check_written(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

}  // namespace

std::uint64_t ScenarioSeed::crowd_seed() const {
    return derive_seed(master, static_cast<std::uint64_t>(index), kCrowdStream);
}

std::uint64_t ScenarioSeed::planner_seed() const {
    return derive_seed(master, static_cast<std::uint64_t>(index), kPlannerStream);
}

const std::vector<MethodSpec>& method_registry() {
    static const std::vector<MethodSpec> methods{
        {"mppi", 0.0, false, false},
        {"raytold-a0", 0.0, true, false},
        {"raytold-a10", 0.1, true, true},
        {"raytold-a20", 0.2, true, true},
    };
    return methods;
}

std::optional<MethodSpec> find_method(std::string_view name) {
    for (const MethodSpec& m : method_registry()) {
        if (m.name == name) {
            return m;
        }
    }
    return std::nullopt;
}

mppi::PlannerConfig planner_config_for(const MethodSpec& method, const mppi::PlannerConfig& base) {
    mppi::PlannerConfig cfg = base;
    cfg.alpha = method.alpha;
    cfg.use_terminal_value = method.terminal_value;
    cfg.use_policy_mixture = method.policy_mixture;
    return cfg;
}

EpisodeRecord run_episode(const ScenarioSeed& scenario, const MethodSpec& method, const SimConfig& sim,
                          const mppi::PlannerConfig& base, const told::ToldModel* model,
                          const EpisodeOptions& options) {
    if (method.needs_model() && model == nullptr) {
        throw ConfigError("method " + method.name + " needs a model checkpoint");
    }
    if (options.record_latents && model == nullptr) {
        throw ConfigError("latent recording needs a model checkpoint");
    }
    const mppi::PlannerConfig cfg = planner_config_for(method, base);
    cfg.validate();

    Environment env(sim);
    env.reset(scenario.crowd_seed());
    mppi::RolloutContext ctx{sim.world, sim.lidar, sim.reward_params(), sim.world.goal};
    mppi::Planner planner(cfg, ctx, model);
    Rng rng(scenario.planner_seed());

    EpisodeRecord record;
    record.method = method.name;
    record.index = scenario.index;
    record.dt = sim.world.dt;
    record.initial_crowd_hash = crowd_hash(env.crowd());

    auto observe = [&] {
        record.trajectory.push_back(env.ego());
        record.min_clearance.push_back(env.clearance());
        if (options.crowd_stride > 0 && env.steps() % options.crowd_stride == 0) {
            record.crowd_snapshots.emplace_back(env.steps(), env.crowd());
        }
        if (options.record_latents) {
            record.latents.push_back(told::encode(*model, env.observation()));
        }
    };

    observe();
    while (env.status() == EpisodeStatus::Running) {
        const mppi::PlanResult result = planner.plan(env.ego(), env.crowd(), rng);
        if (options.diagnostics != nullptr) {
            *options.diagnostics << mppi::plan_diagnostics_json(result) << '\n';
        }
        env.step(result.first_action);
        observe();
    }
    record.status = env.status();
    record.steps = env.steps();
    return record;
}

double episode_safety_margin(const EpisodeRecord& record) {
    if (record.min_clearance.empty()) {
        throw std::invalid_argument("episode_safety_margin: empty record");
    }
    if (record.min_clearance.size() == 1) {
        return record.min_clearance.front();
    }
    double sum = 0.0;
    for (std::size_t i = 1; i < record.min_clearance.size(); ++i) {
        sum += record.min_clearance[i];
    }
    return sum / static_cast<double>(record.min_clearance.size() - 1);
}

MethodSummary summarize(std::string method, std::span<const EpisodeRecord> records) {
    MethodSummary s;
    s.method = std::move(method);
    s.episodes = static_cast<int>(records.size());
    if (records.empty()) {
        return s;
    }
    double margin = 0.0;
    for (const EpisodeRecord& r : records) {
        s.successes += r.status == EpisodeStatus::Success ? 1 : 0;
        s.collisions += r.status == EpisodeStatus::Collision ? 1 : 0;
        s.timeouts += r.status == EpisodeStatus::Timeout ? 1 : 0;
        margin += episode_safety_margin(r);
    }
    const double n = static_cast<double>(s.episodes);
    s.success_rate = s.successes / n;
    s.collision_rate = s.collisions / n;
    s.timeout_rate = s.timeouts / n;
    s.safety_margin = margin / n;
    return s;
}

void fill_improvements(std::span<MethodSummary> summaries) {
    if (summaries.empty()) {
        return;
    }
    const MethodSummary base = summaries.front();
    for (MethodSummary& s : summaries) {
        s.success_improvement = relative_change(s.success_rate, base.success_rate);
        s.collision_improvement = relative_change(s.collision_rate, base.collision_rate);
        s.safety_improvement = relative_change(s.safety_margin, base.safety_margin);
    }
}

BenchmarkResult run_benchmark(int n_scenarios, std::span<const MethodSpec> methods, std::uint64_t master_seed,
                              const SimConfig& sim, const mppi::PlannerConfig& base, const told::ToldModel* model,
                              const BenchmarkOptions& options) {
    if (n_scenarios < 1) {
        throw std::invalid_argument("run_benchmark: n must be >= 1");
    }
    if (methods.empty()) {
        throw std::invalid_argument("run_benchmark: no methods");
    }
    for (const MethodSpec& m : methods) {
        if (m.needs_model() && model == nullptr) {
            throw ConfigError("method " + m.name + " needs a model checkpoint");
        }
        planner_config_for(m, base).validate();
    }

    BenchmarkResult result;
    result.records.assign(methods.size(), std::vector<EpisodeRecord>(static_cast<std::size_t>(n_scenarios)));
    const std::size_t jobs = methods.size() * static_cast<std::size_t>(n_scenarios);
    auto run_job = [&](std::size_t job) {
        const std::size_t m = job / static_cast<std::size_t>(n_scenarios);
        const int i = static_cast<int>(job % static_cast<std::size_t>(n_scenarios));
        result.records[m][static_cast<std::size_t>(i)] =
            run_episode(ScenarioSeed{master_seed, i}, methods[m], sim, base, model, options.episode);
    };

    // A shared diagnostics stream keeps its line order only when episodes run one at a time.
    if (options.workers > 1 && options.episode.diagnostics == nullptr) {
        tbb::task_arena arena(options.workers);
        arena.execute([&] {
            tbb::parallel_for(std::size_t{0}, jobs, [&](std::size_t job) { run_job(job); });
        });
    } else {
        for (std::size_t job = 0; job < jobs; ++job) {
            run_job(job);
        }
    }

    for (std::size_t m = 0; m < methods.size(); ++m) {
        result.summaries.push_back(summarize(methods[m].name, result.records[m]));
    }
    fill_improvements(result.summaries);
    return result;
}

void write_summary_csv(std::ostream& out, std::span<const MethodSummary> summaries, std::string_view config_hash) {
    set_precision(out);
    out << "# config_hash=" << config_hash << '\n';
    out << "# " << kSafetyMarginDefinition << '\n';
    out << "# improvement columns: signed relative change against the first method, percent\n";
    out << "method,episodes,success_rate,success_improvement_pct,collision_rate,collision_improvement_pct,"
           "safety_margin,safety_improvement_pct,timeout_rate\n";
    for (const MethodSummary& s : summaries) {
        out << s.method << ',' << s.episodes << ',' << s.success_rate << ',' << s.success_improvement << ','
            << s.collision_rate << ',' << s.collision_improvement << ',' << s.safety_margin << ','
            << s.safety_improvement << ',' << s.timeout_rate << '\n';
    }
}

void write_trajectory_csv(std::ostream& out, const EpisodeRecord& record) {
    set_precision(out);
    out << "t,x,y,theta,v,min_clearance\n";
    for (std::size_t i = 0; i < record.trajectory.size(); ++i) {
        const VehicleState& s = record.trajectory[i];
        out << static_cast<double>(i) * record.dt << ',' << s.x << ',' << s.y << ',' << s.theta << ',' << s.v << ','
            << record.min_clearance[i] << '\n';
    }
}

void write_crowd_csv(std::ostream& out, const EpisodeRecord& record) {
    set_precision(out);
    out << "t,id,x,y,vx,vy,radius\n";
    for (const auto& [step, crowd] : record.crowd_snapshots) {
        const double t = static_cast<double>(step) * record.dt;
        for (std::size_t j = 0; j < crowd.size(); ++j) {
            const Obstacle& o = crowd[j];
            out << t << ',' << j << ',' << o.pos.x << ',' << o.pos.y << ',' << o.vel.x << ',' << o.vel.y << ','
                << o.radius << '\n';
        }
    }
}

void write_latents_csv(std::ostream& out, std::span<const EpisodeRecord> records) {
    set_precision(out);
    std::size_t dim = 0;
    for (const EpisodeRecord& r : records) {
        if (!r.latents.empty()) {
            dim = r.latents.front().size();
            break;
        }
    }
    for (std::size_t k = 0; k < dim; ++k) {
        out << 'z' << k << ',';
    }
    out << "clearance\n";
    for (const EpisodeRecord& r : records) {
        for (std::size_t i = 0; i < r.latents.size(); ++i) {
            for (double v : r.latents[i]) {
                out << v << ',';
            }
            out << r.min_clearance[i] << '\n';
        }
    }
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,x,y,theta,v,min_clearance", 0) != 0) {
        throw std::runtime_error("read_trajectory_csv: missing header");
    }
    std::vector<TrajectoryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::string cell;
        double values[6];
        for (double& v : values) {
            if (!std::getline(fields, cell, ',')) {
                throw std::runtime_error("read_trajectory_csv: short row");
            }
            v = std::stod(cell);
        }
        rows.push_back({values[0], VehicleState{values[1], values[2], values[3], values[4]}, values[5]});
    }
    return rows;
}

void export_records(const std::filesystem::path& dir, std::span<const EpisodeRecord> records) {
    if (records.empty()) {
        throw std::invalid_argument("export_records: no records");
    }
    namespace fs = std::filesystem;
    std::vector<std::string> latent_methods;
    for (const EpisodeRecord& r : records) {
        const fs::path episode_dir = dir / "episodes" / r.method;
        fs::create_directories(episode_dir);
        const fs::path traj = episode_dir / (std::to_string(r.index) + ".csv");
        std::ofstream out = open_for_write(traj);
        write_trajectory_csv(out, r);
        check_written(out, traj);
        const fs::path crowd = episode_dir / (std::to_string(r.index) + "_crowd.csv");
        std::ofstream crowd_out = open_for_write(crowd);
        write_crowd_csv(crowd_out, r);
        check_written(crowd_out, crowd);
        if (!r.latents.empty() && std::find(latent_methods.begin(), latent_methods.end(), r.method) == latent_methods.end()) {
            latent_methods.push_back(r.method);
        }
    }
    for (const std::string& method : latent_methods) {
        std::vector<EpisodeRecord> subset;
        for (const EpisodeRecord& r : records) {
            if (r.method == method) {
                subset.push_back(r);
            }
        }
        fs::create_directories(dir / "latents");
        const fs::path path = dir / "latents" / (method + ".csv");
        std::ofstream out = open_for_write(path);
        write_latents_csv(out, subset);
        check_written(out, path);
    }
}

void export_benchmark(const std::filesystem::path& dir, const BenchmarkResult& result, std::string_view config_hash) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path path = dir / "summary.csv";
    std::ofstream out = open_for_write(path);
    write_summary_csv(out, result.summaries, config_hash);
    check_written(out, path);
    for (const std::vector<EpisodeRecord>& records : result.records) {
        export_records(dir, records);
    }
}

}  // namespace raytold::bench
