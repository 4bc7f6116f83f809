#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "raytold/bench.hpp"

namespace raytold::bench {
namespace {

namespace fs = std::filesystem;

mppi::PlannerConfig small_planner() {
    mppi::PlannerConfig p;
    p.horizon = 15;
    p.samples = 32;
    p.iterations = 1;
    return p;
}

told::ToldModel small_model() {
    told::ToldConfig c;
    c.encoder_hidden = {16};
    c.dynamics_hidden = {16};
    c.reward_hidden = {16};
    c.value_hidden = {16};
    c.policy_hidden = {16};
    return told::ToldModel::create(c, 2);
}

const MethodSpec& method(const char* name) {
    static std::vector<MethodSpec> cache;
    cache.push_back(*find_method(name));
    return cache.back();
}

std::size_t count_columns(const std::string& line) {
    return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("raytold_test_" + name);
    fs::remove_all(dir);
    return dir;
}

TEST(Registry, FourMethods) {
    ASSERT_EQ(method_registry().size(), 4u);
    EXPECT_FALSE(find_method("mppi")->needs_model());
    EXPECT_TRUE(find_method("raytold-a0")->terminal_value);
    EXPECT_FALSE(find_method("raytold-a0")->policy_mixture);
    EXPECT_EQ(find_method("raytold-a10")->alpha, 0.1);
    EXPECT_EQ(find_method("raytold-a20")->alpha, 0.2);
    EXPECT_FALSE(find_method("td-mpc"));
    const mppi::PlannerConfig cfg = planner_config_for(*find_method("raytold-a20"), mppi::PlannerConfig{});
    EXPECT_EQ(cfg.policy_seeded_count(), 51);
}

TEST(ScenarioSeed, StreamsDiffer) {
    const ScenarioSeed a{7, 0}, b{7, 1}, c{8, 0};
    EXPECT_NE(a.crowd_seed(), a.planner_seed());
    EXPECT_NE(a.crowd_seed(), b.crowd_seed());
    EXPECT_NE(a.crowd_seed(), c.crowd_seed());
    EXPECT_EQ(a.crowd_seed(), (ScenarioSeed{7, 0}.crowd_seed()));
}

TEST(RunEpisode, DeterministicAndWellFormed) {
    const SimConfig sim;
    const EpisodeRecord a = run_episode({3, 2}, method("mppi"), sim, small_planner(), nullptr);
    const EpisodeRecord b = run_episode({3, 2}, method("mppi"), sim, small_planner(), nullptr);
    EXPECT_NE(a.status, EpisodeStatus::Running);
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(a.steps, b.steps);
    ASSERT_EQ(a.trajectory.size(), static_cast<std::size_t>(a.steps) + 1);
    ASSERT_EQ(a.min_clearance.size(), a.trajectory.size());
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
        EXPECT_EQ(a.trajectory[i].x, b.trajectory[i].x);
        EXPECT_EQ(a.trajectory[i].theta, b.trajectory[i].theta);
        EXPECT_EQ(a.min_clearance[i], b.min_clearance[i]);
    }
    EXPECT_EQ(a.trajectory.front().x, 1.0);
    EXPECT_EQ(a.crowd_snapshots.front().first, 0);
    EXPECT_EQ(a.crowd_snapshots.size(), static_cast<std::size_t>(a.steps / 10 + 1));
    EXPECT_LE(a.steps, 300);
}

TEST(RunEpisode, StatusMatchesTheFinalState) {
    const SimConfig sim;
    for (int i = 0; i < 3; ++i) {
        const EpisodeRecord r = run_episode({11, i}, method("mppi"), sim, small_planner(), nullptr);
        EXPECT_EQ(r.status, episode_status(r.trajectory.back(), r.min_clearance.back(), r.steps, sim.world));
    }
}

TEST(RunEpisode, EmptyWorldBaselineReachesTheGoal) {
    SimConfig sim;
    sim.world.obstacle_count_range = {0, 0};
    for (int i = 0; i < 3; ++i) {
        const EpisodeRecord r = run_episode({5, i}, method("mppi"), sim, small_planner(), nullptr);
        EXPECT_EQ(r.status, EpisodeStatus::Success) << "scenario " << i;
        EXPECT_LT(r.steps, 300);
    }
}

TEST(RunEpisode, SealedStartNeverSucceeds) {
    // Without the spawn exclusion zone, a dense crowd sometimes lands a disc on the start pose.
    SimConfig sim;
    sim.sfm.start_clearance = 0.0;
    sim.world.obstacle_count_range = {60, 60};
    int sealed = 0;
    for (int i = 0; i < 200 && sealed < 3; ++i) {
        Environment env(sim);
        env.reset(ScenarioSeed{13, i}.crowd_seed());
        if (env.clearance() >= 0.1) {
            continue;
        }
        ++sealed;
        const EpisodeRecord r = run_episode({13, i}, method("mppi"), sim, small_planner(), nullptr);
        EXPECT_EQ(r.status, EpisodeStatus::Collision) << "scenario " << i;
        EXPECT_EQ(r.steps, 0);
        EXPECT_EQ(r.trajectory.size(), 1u);
    }
    EXPECT_EQ(sealed, 3);
}

TEST(RunEpisode, LearnedMethodsNeedAModel) {
    const SimConfig sim;
    EXPECT_THROW(run_episode({1, 0}, method("raytold-a10"), sim, small_planner(), nullptr), ConfigError);
    EpisodeOptions opts;
    opts.record_latents = true;
    EXPECT_THROW(run_episode({1, 0}, method("mppi"), sim, small_planner(), nullptr, opts), ConfigError);
    const std::vector<MethodSpec> methods{method("mppi"), method("raytold-a0")};
    EXPECT_THROW(run_benchmark(2, methods, 1, sim, small_planner(), nullptr), ConfigError);
}

TEST(SafetyMargin, MeanOverStepsAfterTheStart) {
    EpisodeRecord r;
    r.min_clearance = {9.0, 1.0, 2.0, 3.0};
    EXPECT_EQ(episode_safety_margin(r), 2.0);
    r.min_clearance = {0.05};
    EXPECT_EQ(episode_safety_margin(r), 0.05);
    r.min_clearance.clear();
    EXPECT_THROW(episode_safety_margin(r), std::invalid_argument);
}

TEST(Summaries, RatesAndImprovements) {
    std::vector<EpisodeRecord> recs(4);
    const EpisodeStatus st[] = {EpisodeStatus::Success, EpisodeStatus::Collision, EpisodeStatus::Success,
                                EpisodeStatus::Timeout};
    for (int i = 0; i < 4; ++i) {
        recs[static_cast<std::size_t>(i)].status = st[i];
        recs[static_cast<std::size_t>(i)].min_clearance = {5.0, 0.5 * (i + 1)};
    }
    std::vector<MethodSummary> s{summarize("base", recs), summarize("base", recs)};
    s[1].success_rate = 0.6;
    s[1].collision_rate = 0.0;
    fill_improvements(s);
    EXPECT_EQ(s[0].success_rate, 0.5);
    EXPECT_EQ(s[0].collision_rate, 0.25);
    EXPECT_EQ(s[0].timeout_rate, 0.25);
    EXPECT_EQ(s[0].safety_margin, 1.25);
    EXPECT_EQ(s[0].success_improvement, 0.0);
    EXPECT_NEAR(s[1].success_improvement, 20.0, 1e-12);
    EXPECT_NEAR(s[1].collision_improvement, -100.0, 1e-12);
    EXPECT_EQ(s[1].safety_improvement, 0.0);

    std::vector<MethodSummary> zero(2);
    zero[1].success_rate = 0.1;
    fill_improvements(zero);
    EXPECT_EQ(zero[0].success_improvement, 0.0);
    EXPECT_TRUE(std::isnan(zero[1].success_improvement));
}

class SmallBenchmark : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        model_ = new told::ToldModel(small_model());
        const std::vector<MethodSpec> methods{method("mppi"), method("mppi"), method("raytold-a10")};
        result_ = new BenchmarkResult(run_benchmark(4, methods, 7, SimConfig{}, small_planner(), model_));
    }
    static void TearDownTestSuite() {
        delete result_;
        delete model_;
    }
    static told::ToldModel* model_;
    static BenchmarkResult* result_;
};
told::ToldModel* SmallBenchmark::model_ = nullptr;
BenchmarkResult* SmallBenchmark::result_ = nullptr;

TEST_F(SmallBenchmark, RatesSumToOne) {
    for (const MethodSummary& s : result_->summaries) {
        EXPECT_EQ(s.episodes, 4);
        EXPECT_EQ(s.successes + s.collisions + s.timeouts, 4);
        EXPECT_NEAR(s.success_rate + s.collision_rate + s.timeout_rate, 1.0, 1e-12);
    }
}

TEST_F(SmallBenchmark, ScenariosArePairedAcrossMethods) {
    for (int i = 0; i < 4; ++i) {
        const std::uint64_t h = result_->records[0][static_cast<std::size_t>(i)].initial_crowd_hash;
        EXPECT_EQ(result_->records[1][static_cast<std::size_t>(i)].initial_crowd_hash, h);
        EXPECT_EQ(result_->records[2][static_cast<std::size_t>(i)].initial_crowd_hash, h);
        if (i > 0) {
            EXPECT_NE(result_->records[0][static_cast<std::size_t>(i - 1)].initial_crowd_hash, h);
        }
    }
}

TEST_F(SmallBenchmark, SelfComparisonIsZero) {
    const MethodSummary& s = result_->summaries[1];
    EXPECT_EQ(s.success_improvement, 0.0);
    EXPECT_EQ(s.collision_improvement, 0.0);
    EXPECT_EQ(s.safety_improvement, 0.0);
}

TEST_F(SmallBenchmark, ParallelWorkersGiveTheSameSummary) {
    const std::vector<MethodSpec> methods{method("mppi"), method("mppi"), method("raytold-a10")};
    BenchmarkOptions opts;
    opts.workers = 3;
    const BenchmarkResult again = run_benchmark(4, methods, 7, SimConfig{}, small_planner(), model_, opts);
    std::ostringstream a, b;
    write_summary_csv(a, result_->summaries, "0123456789abcdef");
    write_summary_csv(b, again.summaries, "0123456789abcdef");
    EXPECT_EQ(a.str(), b.str());
}

TEST_F(SmallBenchmark, SummaryTableLayout) {
    std::ostringstream out;
    write_summary_csv(out, result_->summaries, "0123456789abcdef");
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "# config_hash=0123456789abcdef");
    std::getline(in, line);
    EXPECT_EQ(line.rfind("# safety_margin", 0), 0u);
    std::getline(in, line);
    std::getline(in, line);
    EXPECT_EQ(line, "method,episodes,success_rate,success_improvement_pct,collision_rate,collision_improvement_pct,"
                    "safety_margin,safety_improvement_pct,timeout_rate");
    int rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(count_columns(line), 9u);
        ++rows;
    }
    EXPECT_EQ(rows, 3);
}

TEST_F(SmallBenchmark, TrajectoryCsvRoundTrips) {
    const EpisodeRecord& r = result_->records[0][1];
    std::stringstream buf;
    write_trajectory_csv(buf, r);
    const std::vector<TrajectoryRow> rows = read_trajectory_csv(buf);
    ASSERT_EQ(rows.size(), static_cast<std::size_t>(r.steps) + 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_NEAR(rows[i].t, 0.1 * static_cast<double>(i), 1e-9);
        EXPECT_NEAR(rows[i].state.x, r.trajectory[i].x, 1e-9);
        EXPECT_NEAR(rows[i].state.y, r.trajectory[i].y, 1e-9);
        EXPECT_NEAR(rows[i].state.theta, r.trajectory[i].theta, 1e-9);
        EXPECT_NEAR(rows[i].state.v, r.trajectory[i].v, 1e-9);
        EXPECT_NEAR(rows[i].min_clearance, r.min_clearance[i], 1e-9);
    }
    std::istringstream bad("x,y\n1,2\n");
    EXPECT_THROW(read_trajectory_csv(bad), std::runtime_error);
}

TEST_F(SmallBenchmark, ExportLayout) {
    const fs::path dir = scratch_dir("export");
    export_benchmark(dir, *result_, "0123456789abcdef");
    EXPECT_TRUE(fs::exists(dir / "summary.csv"));
    for (int i = 0; i < 4; ++i) {
        EXPECT_TRUE(fs::exists(dir / "episodes" / "mppi" / (std::to_string(i) + ".csv")));
        EXPECT_TRUE(fs::exists(dir / "episodes" / "raytold-a10" / (std::to_string(i) + "_crowd.csv")));
    }
    std::ifstream crowd(dir / "episodes" / "mppi" / "0_crowd.csv");
    std::string header;
    std::getline(crowd, header);
    EXPECT_EQ(header, "t,id,x,y,vx,vy,radius");
    EXPECT_FALSE(fs::exists(dir / "latents"));
    fs::remove_all(dir);
}

TEST(Export, LatentTableHas129Columns) {
    const told::ToldModel model = small_model();
    EpisodeOptions opts;
    opts.record_latents = true;
    const EpisodeRecord r = run_episode({4, 0}, method("raytold-a10"), SimConfig{}, small_planner(), &model, opts);
    ASSERT_EQ(r.latents.size(), r.trajectory.size());
    const fs::path dir = scratch_dir("latents");
    export_records(dir, std::vector<EpisodeRecord>{r});
    std::ifstream in(dir / "latents" / "raytold-a10.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(count_columns(line), 129u);
    EXPECT_EQ(line.rfind("z0,z1,", 0), 0u);
    EXPECT_NE(line.find(",z127,clearance"), std::string::npos);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(count_columns(line), 129u);
        ++rows;
    }
    EXPECT_EQ(rows, r.trajectory.size());
    fs::remove_all(dir);
}

TEST(Export, UnwritablePathThrows) {
    EpisodeRecord r;
    r.method = "mppi";
    r.trajectory = {VehicleState{}};
    r.min_clearance = {1.0};
    EXPECT_THROW(export_records("/proc/raytold_cannot_write_here", std::vector<EpisodeRecord>{r}), std::exception);
    EXPECT_THROW(export_records("/tmp", std::vector<EpisodeRecord>{}), std::invalid_argument);
}

}  // namespace
}  // namespace raytold::bench
