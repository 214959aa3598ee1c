#include <cmath>
#include <random>

#include <boost/math/distributions/negative_binomial.hpp>
#include <gtest/gtest.h>

#include "ppl/seird_inference.hpp"

using namespace ppl;

namespace {

mcmc::Vector reference_theta()
{
    mcmc::Vector th(kSeirdDim);
    th << 2.64, 16.33, 5.27, 0.025, 20, 10;
    return th;
}

// NB draws around the deterministic flows.
SeirdObservations synthetic_observations(int days, std::uint64_t seed, int substeps = 2)
{
    const auto traj = seird_mean_trajectory(reference_theta(), 1e6, days, substeps);
    std::mt19937_64 rng(seed);
    auto draw = [&](double mean) {
        std::gamma_distribution<double> g(10.0, mean / 10.0);
        std::poisson_distribution<long> p(std::max(1e-12, g(rng)));
        return static_cast<double>(p(rng));
    };
    SeirdObservations obs;
    for (const auto& f : traj.flows) {
        obs.new_cases.push_back(draw(f.new_infectious));
        obs.new_deaths.push_back(draw(f.new_deaths));
    }
    return obs;
}

mcmc::McmcConfig fast_config()
{
    auto cfg = seird_config();
    cfg.num_warmup = 300;
    cfg.num_samples = 300;
    return cfg;
}

} // namespace

TEST(SeirdLikelihood, MatchesBoostNegativeBinomialAtTheMean)
{
    const auto th = reference_theta();
    const auto traj = seird_mean_trajectory(th, 1e6, 60, 2);
    SeirdObservations obs;
    double oracle = 0;
    const double phi = 10;
    for (const auto& f : traj.flows) {
        obs.new_cases.push_back(std::round(f.new_infectious));
        obs.new_deaths.push_back(std::round(f.new_deaths));
        for (double mean : {f.new_infectious, f.new_deaths}) {
            const boost::math::negative_binomial_distribution<> nb(phi, phi / (phi + mean));
            oracle += std::log(boost::math::pdf(nb, std::round(mean)));
        }
    }
    EXPECT_NEAR(seird_log_likelihood(traj, NbData(obs, phi)), oracle, 1e-8 * std::abs(oracle));
}

TEST(SeirdLikelihood, ZeroCountsStayFinite)
{
    SeirdObservations obs;
    obs.new_cases.assign(40, 0.0);
    obs.new_deaths.assign(40, 0.0);
    auto th = reference_theta();
    th[kE0] = 1e-6;
    th[kI0] = 1e-6;
    EXPECT_TRUE(std::isfinite(seird_log_posterior(th, obs, {}, 1e6, 10, 2)));
}

TEST(SeirdPosterior, OffSupportIsNegativeInfinity)
{
    const auto obs = synthetic_observations(30, 1);
    const SeirdPriors pr;
    for (auto [k, v] : {std::pair{kR0, -0.1}, {kRecovery, 1.5}, {kIncubation, 0.5}, {kMu, 1.0}, {kMu, 0.0},
                        {kE0, -1.0}, {kI0, 2e6}}) {
        auto th = reference_theta();
        th[k] = v;
        EXPECT_EQ(seird_log_posterior(th, obs, pr, 1e6, 10, 2), -INFINITY) << "index " << k;
    }
}

TEST(SeirdPosterior, CaseFatalityOnlyEntersThroughDeaths)
{
    auto obs = synthetic_observations(50, 2);
    obs.new_deaths.clear();
    const SeirdPriors pr;
    auto a = reference_theta();
    auto b = a;
    b[kMu] = 0.07;
    const auto mu = dist::beta_from_moments(pr.mu_mean, pr.mu_sd);
    const double prior_diff = dist::beta_lpdf(a[kMu], mu.a, mu.b) - dist::beta_lpdf(b[kMu], mu.a, mu.b);
    EXPECT_NEAR(seird_log_posterior(a, obs, pr, 1e6, 10, 2) - seird_log_posterior(b, obs, pr, 1e6, 10, 2),
                prior_diff, 1e-9);
}

TEST(FitSeird, WithoutDataReturnsThePrior)
{
    const SeirdPriors pr;
    const auto model = seird_model(SeirdObservations{}, pr, 1e6);
    auto cfg = seird_config();
    cfg.num_samples = 2000;
    const auto chains = mcmc::sample_hmc(model, cfg);
    const auto r0 = mcmc::summarize(mcmc::column(chains, kR0));
    const auto inc = mcmc::summarize(mcmc::column(chains, kIncubation));
    const auto mu = mcmc::summarize(mcmc::column(chains, kMu));
    EXPECT_NEAR(r0.mean / (2 * std::exp(0.125)), 1.0, 0.05);
    EXPECT_NEAR(inc.mean / 5.5, 1.0, 0.05);
    EXPECT_NEAR(mu.mean / 0.025, 1.0, 0.05);
}

TEST(FitSeird, SyntheticParametersInsideCredibleIntervals)
{
    // Recovery time is only weakly identified from 160 days and is pulled
    // toward its prior mean of 14, so coverage is checked instead of a band.
    SeirdFitOptions opt;
    opt.substeps = 2;
    opt.require_convergence = false;
    const auto post = fit_seird(synthetic_observations(160, 3), 1e6, fast_config(), opt);
    const auto th = reference_theta();
    for (auto k : {kR0, kRecovery, kIncubation, kMu}) {
        const auto& s = post.at(seird_param_names()[k]);
        EXPECT_LT(s.lower, th[k]) << seird_param_names()[k];
        EXPECT_GT(s.upper, th[k]) << seird_param_names()[k];
    }
    EXPECT_NEAR(post.at("case_fatality").mean / th[kMu], 1.0, 0.15);
    EXPECT_NEAR(post.at("r0").mean / th[kR0], 1.0, 0.15);
}

TEST(FitSeird, LongerSeriesContractsThePosterior)
{
    SeirdFitOptions opt;
    opt.substeps = 2;
    opt.require_convergence = false;
    const auto obs = synthetic_observations(120, 4);
    SeirdObservations half;
    half.new_cases.assign(obs.new_cases.begin(), obs.new_cases.begin() + 60);
    half.new_deaths.assign(obs.new_deaths.begin(), obs.new_deaths.begin() + 60);
    const auto shorter = fit_seird(half, 1e6, fast_config(), opt);
    const auto longer = fit_seird(obs, 1e6, fast_config(), opt);
    EXPECT_LT(longer.at("r0").sd, shorter.at("r0").sd);
    EXPECT_LT(longer.at("case_fatality").sd, shorter.at("case_fatality").sd);
}

TEST(FitSeird, TooFewDays)
{
    try {
        fit_seird(synthetic_observations(10, 5), 1e6);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewPoints);
    }
}

TEST(FitSeird, CumulativeSeriesMustShareDates)
{
    TimeSeries a, b;
    const Date d0{std::chrono::year{2020}, std::chrono::month{3}, std::chrono::day{1}};
    for (int k = 0; k < 30; ++k) {
        a.dates.push_back(add_days(d0, k));
        a.values.push_back(k * 10.0);
        b.dates.push_back(add_days(d0, k + 1));
        b.values.push_back(k);
    }
    try {
        observations_from_cumulative(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
}
