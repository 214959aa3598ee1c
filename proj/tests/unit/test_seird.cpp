#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ppl/seird.hpp"

using namespace ppl;

namespace {

SeirdParams table1(double n = 1000.0)
{
    return SeirdParams::from_times(2.64, 16.33, 5.27, 0.025, n);
}

} // namespace

TEST(SeirdStep, HandEvaluatedEulerStep)
{
    // Hand evaluation: infections = 2.64 * (1/16.33) * 990 * 10 / 1000 = 1.600490..., recoveries
    // gamma * 10 * 0.975, deaths gamma * 10 * 0.025.
    const SeirdState x{990, 0, 10, 0, 0};
    auto [next, flows] = step(x, table1(), 2.64, 0.025, 1.0);
    EXPECT_NEAR(next.s, 988.39951, 1e-4);
    EXPECT_NEAR(next.e, 1.60049, 1e-4);
    EXPECT_NEAR(next.i, 9.38763, 1e-4);
    EXPECT_NEAR(next.r, 0.59706, 1e-4);
    EXPECT_NEAR(next.d, 0.01531, 1e-4);
    EXPECT_NEAR(next.total(), 1000.0, 1e-9);
    EXPECT_NEAR(flows.new_exposed, 1.60049, 1e-4);
    EXPECT_NEAR(flows.new_deaths, 0.01531, 1e-4);
}

TEST(SeirdStep, DiseaseFreeStateIsAbsorbing)
{
    const SeirdState x{1000, 0, 0, 0, 0};
    auto [next, flows] = step(x, table1(), 2.64, 0.025, 1.0);
    EXPECT_EQ(next, x);
    EXPECT_EQ(flows.new_exposed, 0.0);
}

TEST(SeirdStep, ZeroReproductionNumberOnlyDrainsExposed)
{
    const SeirdState x{900, 50, 10, 40, 0};
    const auto p = table1();
    auto [next, flows] = step(x, p, 0.0, 0.025, 1.0);
    EXPECT_EQ(next.s, 900.0);
    EXPECT_NEAR(next.e, 50.0 - p.sigma * 50.0, 1e-12);
}

TEST(SeirdStep, RejectsBadArguments)
{
    const SeirdState x{990, 0, 10, 0, 0};
    EXPECT_THROW(step(x, table1(), -1.0, 0.025, 1.0), Error);
    EXPECT_THROW(step(x, table1(), 1.0, 0.025, 0.0), Error);
    try {
        step(SeirdState{NAN, 0, 10, 0, 0}, table1(), 1.0, 0.025, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteState);
    }
}

TEST(EffectiveMortality, IcuCapacityArithmetic)
{
    const IcuModel icu;
    auto p = table1(1e6);
    EXPECT_DOUBLE_EQ(effective_mortality(0.0, p, icu), 0.06 * 0.6);
    // demand 300 <= 600 beds
    EXPECT_NEAR(effective_mortality(5000.0, p, icu), 0.036, 1e-15);
    // demand 1200, half treated: 0.06 * (0.5 * 0.6 + 0.5 * 1.0)
    EXPECT_NEAR(effective_mortality(20000.0, p, icu), 0.048, 1e-15);
    // saturates at the untreated rate
    EXPECT_NEAR(effective_mortality(1e9, p, icu), 0.06, 1e-6);
}

TEST(Simulate, NoTransmissionDecaysGeometrically)
{
    const auto p = table1(1e6);
    auto traj = simulate_constant(SeirdState::seeded(1e6, 0, 100), p, 0.0, std::nullopt, 30, 1);
    for (int d = 0; d <= 30; ++d) EXPECT_NEAR(traj.states[d].i, 100.0 * std::pow(1 - p.gamma, d), 1e-9);
}

TEST(Simulate, SubcriticalEpidemicDiesOut)
{
    const auto p = table1(1e6);
    auto traj = simulate_constant(SeirdState::seeded(1e6, 0, 100), p, 0.8, std::nullopt, 720);
    EXPECT_LT(traj.states.back().i, 0.1);
    EXPECT_LT(traj.states.back().i, traj.states[360].i);
    // Final size with R_e < 1 stays bounded by seeds / (1 - R_e).
    EXPECT_LT(traj.cumulative_cases(), 100.0 / (1 - 0.8) + 1.0);
}

TEST(Simulate, LengthsAndConservation)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const double n = std::pow(10.0, 3 + 5 * u(rng));
        SeirdParams p = SeirdParams::from_times(6 * u(rng), 2 + 28 * u(rng), 1 + 13 * u(rng), u(rng), n);
        p.alpha = trial % 3 == 0 ? 0.01 * u(rng) : 0.0;
        const auto init = SeirdState::seeded(n, 0.01 * n * u(rng), 0.01 * n * u(rng));
        auto traj = simulate_constant(init, p, p.r0, trial % 2 ? std::optional<IcuModel>{IcuModel{}} : std::nullopt, 90);
        ASSERT_EQ(traj.states.size(), 91u);
        ASSERT_EQ(traj.flows.size(), 90u);
        double cumulative = 0;
        for (std::size_t d = 0; d < traj.states.size(); ++d) {
            EXPECT_LE(std::abs(traj.states[d].total() - n), 1e-9 * n);
            if (d > 0) {
                EXPECT_GE(traj.states[d].d, traj.states[d - 1].d);
                EXPECT_GE(traj.flows[d - 1].new_exposed, 0.0);
                cumulative += traj.flows[d - 1].new_exposed;
            }
        }
        EXPECT_GE(cumulative, 0.0);
    }
}

TEST(Simulate, GrowthIffReproductionAboveOne)
{
    const auto p = table1(1e6);
    for (double re : {0.5, 0.9, 1.1, 2.64}) {
        auto traj = simulate_constant(SeirdState::seeded(1e6, 0, 10), p, re, std::nullopt, 30);
        for (int d = 0; d < 30; ++d) {
            const double before = traj.states[d].e + traj.states[d].i;
            const double after = traj.states[d + 1].e + traj.states[d + 1].i;
            if (re > 1)
                EXPECT_GT(after, before) << "re=" << re << " day " << d;
            else
                EXPECT_LT(after, before) << "re=" << re << " day " << d;
        }
    }
}

TEST(Simulate, RefinementOfDefaultSubstepsIsBelowOnePercent)
{
    const auto p = SeirdParams::from_times(2.64, 16.33, 5.27, 0.025, 1e6);
    const auto init = SeirdState::seeded(1e6, 0, 8000);
    auto coarse = simulate_constant(init, p, 2.64, IcuModel{}, 90, kDefaultSubsteps);
    auto fine = simulate_constant(init, p, 2.64, IcuModel{}, 90, 2 * kDefaultSubsteps);
    const auto& a = coarse.states.back();
    const auto& b = fine.states.back();
    for (auto [x, y] : {std::pair{a.s, b.s}, {a.e, b.e}, {a.i, b.i}, {a.r, b.r}, {a.d, b.d}})
        EXPECT_LT(std::abs(x - y) / y, 0.01);
}

TEST(Simulate, TimeVaryingReproductionNumberIsRecorded)
{
    const auto p = table1(1e6);
    auto traj = simulate(SeirdState::seeded(1e6, 0, 100), p, [](int day) { return day < 5 ? 2.0 : 0.5; }, std::nullopt, 10);
    EXPECT_EQ(traj.re[4], 2.0);
    EXPECT_EQ(traj.re[5], 0.5);
    EXPECT_DOUBLE_EQ(traj.mu_eff[0], 0.025);
}
