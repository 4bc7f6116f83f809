#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raytold/environment.hpp"
#include "raytold/mppi.hpp"
#include "raytold/told.hpp"

namespace raytold::bench {

/// (master seed, scenario index) fixes the crowd, its waypoint redraws and all planner noise.
struct ScenarioSeed {
    std::uint64_t master = 0;
    int index = 0;

    std::uint64_t crowd_seed() const;
    std::uint64_t planner_seed() const;
};

struct MethodSpec {
    std::string name;
    double alpha = 0.0;
    bool terminal_value = false;
    bool policy_mixture = false;

    bool needs_model() const { return terminal_value || policy_mixture; }
};

/// mppi, raytold-a0, raytold-a10, raytold-a20.
const std::vector<MethodSpec>& method_registry();
std::optional<MethodSpec> find_method(std::string_view name);
mppi::PlannerConfig planner_config_for(const MethodSpec& method, const mppi::PlannerConfig& base);

struct EpisodeRecord {
    std::string method;
    int index = 0;
    EpisodeStatus status = EpisodeStatus::Running;
    int steps = 0;
    double dt = 0.1;
    std::uint64_t initial_crowd_hash = 0;
    std::vector<VehicleState> trajectory;   // steps + 1 states, t = 0 first
    std::vector<double> min_clearance;      // aligned with trajectory
    std::vector<std::pair<int, Crowd>> crowd_snapshots;
    std::vector<std::vector<double>> latents;  // aligned with trajectory when recorded
};

struct EpisodeOptions {
    int crowd_stride = 10;  // 0 disables crowd snapshots
    bool record_latents = false;
    std::ostream* diagnostics = nullptr;  // one JSON line per plan
};

/// Closed loop sense -> plan -> act -> crowd step until a terminal status. Throws ConfigError
/// before the episode starts when the method needs a model and none is supplied.
EpisodeRecord run_episode(const ScenarioSeed& scenario, const MethodSpec& method, const SimConfig& sim,
                          const mppi::PlannerConfig& base, const told::ToldModel* model,
                          const EpisodeOptions& options = {});

/// Mean over steps 1..steps of the per-step LiDAR clearance.
double episode_safety_margin(const EpisodeRecord& record);

struct MethodSummary {
    std::string method;
    int episodes = 0;
    int successes = 0;
    int collisions = 0;
    int timeouts = 0;
    double success_rate = 0.0;
    double collision_rate = 0.0;
    double timeout_rate = 0.0;
    double safety_margin = 0.0;  // mean over episodes of episode_safety_margin
    // Signed relative change against the first method, in percent.
    double success_improvement = 0.0;
    double collision_improvement = 0.0;
    double safety_improvement = 0.0;
};

MethodSummary summarize(std::string method, std::span<const EpisodeRecord> records);
/// Fills the improvement columns relative to summaries.front().
void fill_improvements(std::span<MethodSummary> summaries);

struct BenchmarkOptions {
    int workers = 1;
    EpisodeOptions episode;
};

struct BenchmarkResult {
    std::vector<MethodSummary> summaries;
    std::vector<std::vector<EpisodeRecord>> records;  // [method][scenario]
};

/// Runs the same n scenarios for every method (paired comparison).
BenchmarkResult run_benchmark(int n_scenarios, std::span<const MethodSpec> methods, std::uint64_t master_seed,
                              const SimConfig& sim, const mppi::PlannerConfig& base, const told::ToldModel* model,
                              const BenchmarkOptions& options = {});

inline constexpr const char* kSafetyMarginDefinition =
    "safety_margin = mean over episodes of (mean over steps of LiDAR min clearance to obstacles, m)";

// Table writers. Every table starts with a header row; values use 17 significant digits.
void write_summary_csv(std::ostream& out, std::span<const MethodSummary> summaries, std::string_view config_hash);
void write_trajectory_csv(std::ostream& out, const EpisodeRecord& record);
void write_crowd_csv(std::ostream& out, const EpisodeRecord& record);
/// 128 latent columns plus the clearance label, one row per recorded step across all records.
void write_latents_csv(std::ostream& out, std::span<const EpisodeRecord> records);

struct TrajectoryRow {
    double t = 0.0;
    VehicleState state;
    double min_clearance = 0.0;
};
std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in);

/// Writes episodes/<method>/<index>.csv, episodes/<method>/<index>_crowd.csv and, when latents
/// were recorded, latents/<method>.csv under `dir`. Throws std::runtime_error on I/O failure.
void export_records(const std::filesystem::path& dir, std::span<const EpisodeRecord> records);

/// Writes summary.csv plus export_records for every method.
void export_benchmark(const std::filesystem::path& dir, const BenchmarkResult& result, std::string_view config_hash);

}  // namespace raytold::bench
