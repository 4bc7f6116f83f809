#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "raytold/environment.hpp"
#include "raytold/mppi.hpp"
#include "raytold/told.hpp"
#include "raytold/training.hpp"

namespace raytold {

struct BenchConfig {
    int n = 100;
    std::uint64_t seed = 1;
    std::vector<std::string> methods{"mppi", "raytold-a0", "raytold-a10", "raytold-a20"};
    int workers = 1;
    int crowd_stride = 10;

    void validate() const;
};

/// Everything one run of the tools needs. YAML sections: world, sfm, lidar, planner, model,
/// train, bench. Absent keys keep their defaults; unknown keys are rejected.
struct AppConfig {
    SimConfig sim;
    mppi::PlannerConfig planner;
    told::ToldConfig model;
    training::TrainingConfig train;
    BenchConfig bench;

    /// Re-derives dependent fields (the model input width follows the LiDAR ray count) and
    /// validates every section. Throws ConfigError.
    void finalize();
};

/// Throws ConfigError on syntax errors, unknown keys or invalid values.
AppConfig parse_config(const std::string& yaml_text);
/// Throws ConfigError when the file cannot be read or parsed.
AppConfig load_config(const std::filesystem::path& path);

/// Canonical YAML of every effective value; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const AppConfig& config);
/// 16 hex digits of a 64-bit FNV-1a hash over dump_config.
std::string config_hash(const AppConfig& config);

}  // namespace raytold
