#include <cmath>

#include <gtest/gtest.h>

#include "cohlab/counting_stats.hpp"
#include "cohlab/trajectory_oracle.hpp"

using namespace cohlab;

TEST(JumpProcess, GeneratorConservesProbability) {
    EngineParams p;
    const auto proc = JumpProcess::from_params(p);
    const Eigen::Matrix4d q = proc.generator();
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(q.col(j).sum(), 0.0, 1e-15);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != j) {
                EXPECT_GE(q(i, j), 0.0);
            }
    EXPECT_EQ(proc.weight(kHotLevel, kColdLevel), 1);
    EXPECT_EQ(proc.weight(kColdLevel, kHotLevel), -1);
    EXPECT_EQ(proc.weight(kGround1, kHotLevel), 0);
}

TEST(JumpProcess, RejectsNegativeRates) {
    Eigen::Matrix4d r = Eigen::Matrix4d::Ones();
    r(1, 2) = -0.5;
    EXPECT_THROW(JumpProcess(r, {}), DomainError);
    EXPECT_THROW(JumpProcess(Eigen::Matrix4d::Ones(), {{0, 0, 1}}), DomainError);
}

TEST(Simulate, NothingCountedWithoutCavityCoupling) {
    EngineParams p;
    const auto gen = build_generator(p);
    Eigen::Matrix4d rates = gen.l0().topLeftCorner<4, 4>();
    rates(kHotLevel, kColdLevel) = rates(kColdLevel, kHotLevel) = 0.0;
    const JumpProcess proc(rates, {{kHotLevel, kColdLevel, 1}, {kColdLevel, kHotLevel, -1}});
    const auto st = simulate(proc, 2000.0, 10, 7);
    EXPECT_EQ(st.mean_rate, 0.0);
    EXPECT_EQ(st.var_rate, 0.0);
}

TEST(Simulate, AgreesWithAnalyticCumulants) {
    EngineParams p;
    const auto j = cumulants(build_generator(p));
    const auto st = simulate(JumpProcess::from_params(p), 2e4, 60, 11);
    EXPECT_LT(std::abs(st.mean_rate - j[0]), 3.0 * st.mean_rate_se);
    EXPECT_LT(std::abs(st.var_rate - j[1]), 3.0 * st.var_rate_se);
    EXPECT_GT(st.mean_rate_se, 0.0);
    EXPECT_GT(st.var_rate_se, 0.0);
}

TEST(Simulate, ZeroBiasMeanConsistentWithZero) {
    EngineParams p;
    p.t_c = p.t_h = p.t_l = 2.0;
    const auto st = simulate(JumpProcess::from_params(p), 1e4, 40, 5);
    EXPECT_LT(std::abs(st.mean_rate), 3.0 * st.mean_rate_se);
}

TEST(Simulate, SeedDeterminism) {
    const auto proc = JumpProcess::from_params(EngineParams{});
    const auto a = simulate(proc, 3000.0, 8, 123);
    const auto b = simulate(proc, 3000.0, 8, 123);
    const auto c = simulate(proc, 3000.0, 8, 124);
    EXPECT_EQ(a.mean_rate, b.mean_rate);
    EXPECT_EQ(a.var_rate, b.var_rate);
    EXPECT_EQ(a.var_rate_se, b.var_rate_se);
    EXPECT_NE(a.mean_rate, c.mean_rate);
}

TEST(Simulate, StandardErrorShrinksWithTrajectoryCount) {
    const auto proc = JumpProcess::from_params(EngineParams{});
    const auto a = simulate(proc, 2000.0, 50, 3);
    const auto b = simulate(proc, 2000.0, 200, 3);
    // Quadrupling n_traj should roughly halve the SE.
    EXPECT_NEAR(a.mean_rate_se / b.mean_rate_se, 2.0, 0.6);
}

TEST(Simulate, ValidatesArguments) {
    const auto proc = JumpProcess::from_params(EngineParams{});
    EXPECT_THROW(simulate(proc, 0.0, 10, 1), DomainError);
    EXPECT_THROW(simulate(proc, 10.0, 1, 1), DomainError);
    SimulationOptions o;
    o.start_state = 7;
    EXPECT_THROW(simulate(proc, 10.0, 5, 1, o), DomainError);
}

TEST(Simulate, DetectsAbsorbingState) {
    Eigen::Matrix4d r = Eigen::Matrix4d::Zero();
    r(1, 0) = 1.0; // 0 -> 1, then stuck
    EXPECT_THROW(simulate(JumpProcess(r, {}), 10.0, 5, 1), AbsorbingStateError);
}

TEST(Simulate, TwoTrajectoryVarianceError) {
    const auto st = simulate(JumpProcess::from_params(EngineParams{}), 500.0, 2, 9);
    EXPECT_GT(st.var_rate_se, 0.0);
}

TEST(DefaultTFinal, ScalesWithSlowestRate) {
    const auto proc = JumpProcess::from_params(EngineParams{});
    double mn = 1e300;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != j && proc.rates()(i, j) > 0) mn = std::min(mn, proc.rates()(i, j));
    EXPECT_DOUBLE_EQ(default_t_final(proc), 1e4 / mn);
}
