#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "raytold/env.hpp"

namespace raytold {
namespace {

TEST(ClipAction, ClampsEachField) {
    EXPECT_EQ(clip_action({5.0, 0.0}), (Action{3.0, 0.0}));
    EXPECT_EQ(clip_action({0.0, 0.0}), (Action{0.0, 0.0}));
    EXPECT_EQ(clip_action({-10.0, -2.0}), (Action{-3.0, -kPi / 4.0}));
}

TEST(ClipAction, Idempotent) {
    Rng rng(3);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int i = 0; i < 1000; ++i) {
        const Action once = clip_action({u(rng), u(rng)});
        EXPECT_EQ(clip_action(once), once);
    }
}

TEST(ClipAction, RejectsNonFinite) {
    EXPECT_THROW(clip_action({std::numeric_limits<double>::quiet_NaN(), 0.0}), std::invalid_argument);
    EXPECT_THROW(clip_action({0.0, std::numeric_limits<double>::infinity()}), std::invalid_argument);
}

TEST(NormalizedActions, MapToPhysicalBox) {
    EXPECT_EQ(to_physical({1.0, -1.0}), (Action{3.0, -kPi / 4.0}));
    EXPECT_EQ(to_physical({0.0, 0.0}), (Action{0.0, 0.0}));
    EXPECT_EQ(to_physical({4.0, -7.0}), (Action{3.0, -kPi / 4.0}));
    const NormAction back = to_normalized({1.5, kPi / 8.0});
    EXPECT_DOUBLE_EQ(back[0], 0.5);
    EXPECT_DOUBLE_EQ(back[1], 0.5);
}

TEST(StepVehicle, StraightLine) {
    const WorldConfig cfg;
    const VehicleState s = step_vehicle({0.0, 0.0, 0.0, 1.0}, {0.0, 0.0}, cfg);
    EXPECT_DOUBLE_EQ(s.x, 0.1);
    EXPECT_EQ(s.y, 0.0);
    EXPECT_EQ(s.theta, 0.0);
    EXPECT_EQ(s.v, 1.0);
}

TEST(StepVehicle, ZeroSpeedOnlyAccelerates) {
    const WorldConfig cfg;
    const VehicleState s = step_vehicle({0.0, 0.0, 0.0, 0.0}, {3.0, 0.3}, cfg);
    EXPECT_EQ(s.x, 0.0);
    EXPECT_EQ(s.y, 0.0);
    EXPECT_EQ(s.theta, 0.0);
    EXPECT_NEAR(s.v, 0.3, 1e-15);
}

TEST(StepVehicle, TurningHandCalculation) {
    const WorldConfig cfg;
    const VehicleState s = step_vehicle({1.0, 0.0, kPi / 2.0, 2.0}, {0.0, 0.2}, cfg);
    // (2 / 2.5) * tan(0.2) * 0.1 = 0.0162160...
    EXPECT_NEAR(s.theta - kPi / 2.0, 0.016216, 1e-6);
    EXPECT_NEAR(s.y, 0.2, 1e-15);
    EXPECT_NEAR(s.x, 1.0, 1e-15);
}

TEST(StepVehicle, HeadingStaysWrapped) {
    const WorldConfig cfg;
    Rng rng(11);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    std::uniform_real_distribution<double> speed(-10.0, 10.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
        VehicleState s{0.0, 0.0, angle(rng), speed(rng)};
        if (i % 7 == 0) {
            s.theta = kPi;
        }
        const VehicleState next = step_vehicle(s, to_physical({unit(rng), unit(rng)}), cfg);
        EXPECT_GT(next.theta, -kPi);
        EXPECT_LE(next.theta, kPi);
    }
}

TEST(StepVehicle, SpeedIsLinearInTime) {
    const WorldConfig cfg;
    Rng rng(5);
    std::uniform_real_distribution<double> a(-3.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const double accel = a(rng);
        const VehicleState s{0.0, 0.0, 0.3, 1.7};
        EXPECT_EQ(step_vehicle(s, {accel, 0.1}, cfg).v - 1.7, (1.7 + accel * 0.1) - 1.7);
    }
}

TEST(StepVehicle, ZeroActionFixedPoint) {
    const WorldConfig cfg;
    const VehicleState s{4.0, -2.0, 1.0, 0.0};
    EXPECT_EQ(step_vehicle(s, {0.0, 0.4}, cfg), s);
}

TEST(WrapAngle, HalfOpenInterval) {
    EXPECT_EQ(wrap_angle(kPi), kPi);
    EXPECT_EQ(wrap_angle(-kPi), kPi);
    EXPECT_NEAR(wrap_angle(3.0 * kPi / 2.0), -kPi / 2.0, 1e-15);
    EXPECT_NEAR(wrap_angle(-5.0 * kPi / 2.0), -kPi / 2.0, 1e-15);
}

TEST(EpisodeStatus, Rules) {
    const WorldConfig cfg;
    EXPECT_EQ(episode_status({5.0, 0.0, 0.0, 0.0}, 0.05, 10, cfg), EpisodeStatus::Collision);
    EXPECT_EQ(episode_status({18.5, 0.0, 0.0, 0.0}, 1.0, 10, cfg), EpisodeStatus::Success);
    EXPECT_EQ(episode_status({14.0, 0.0, 0.0, 0.0}, 1.0, 300, cfg), EpisodeStatus::Timeout);
    EXPECT_EQ(episode_status({14.0, 0.0, 0.0, 0.0}, 1.0, 299, cfg), EpisodeStatus::Running);
    // Collision wins over success.
    EXPECT_EQ(episode_status({19.0, 0.0, 0.0, 0.0}, 0.05, 10, cfg), EpisodeStatus::Collision);
    // Thresholds are strict.
    EXPECT_EQ(episode_status({5.0, 0.0, 0.0, 0.0}, 0.1, 10, cfg), EpisodeStatus::Running);
    EXPECT_EQ(episode_status({19.0, 0.7, 0.0, 0.0}, 1.0, 10, cfg), EpisodeStatus::Running);
}

TEST(WorldConfig, Validation) {
    WorldConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.goal = {25.0, 0.0};
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = WorldConfig{};
    cfg.collision_clearance = 0.8;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = WorldConfig{};
    cfg.wheelbase = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = WorldConfig{};
    EXPECT_TRUE(cfg.contains({0.0, -5.0}));
    EXPECT_FALSE(cfg.contains({20.1, 0.0}));
}

}  // namespace
}  // namespace raytold
