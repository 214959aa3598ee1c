#pragma once

// Virus-parameter inference: deterministic SEIRD trajectory with constant
// R_e = r0 and negative-binomial noise on daily new cases (E -> I flow) and
// daily new deaths (I -> D flow).

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ppl/data_io.hpp"
#include "ppl/distributions.hpp"
#include "ppl/error.hpp"
#include "ppl/mcmc.hpp"
#include "ppl/seird.hpp"

namespace ppl {

struct SeirdPriors {
    double r0_log_mean = std::log(2.0), r0_log_sd = 0.5;
    double recovery_mean = 14, recovery_sd = 3, recovery_min = 2;
    double incubation_mean = 5.5, incubation_sd = 1.5, incubation_min = 1;
    double mu_mean = 0.025, mu_sd = 0.01;
    double seed_log_mean = std::log(10.0), seed_log_sd = 1;
};

/// Daily counts aligned so that entry k is matched to the flows of model day k.
/// An empty deaths vector drops the deaths term.
struct SeirdObservations {
    std::vector<double> new_cases;
    std::vector<double> new_deaths;

    [[nodiscard]] int days() const { return static_cast<int>(std::max(new_cases.size(), new_deaths.size())); }
};

struct SeirdFitOptions {
    double phi = 10;                // NB dispersion
    int substeps = kDefaultSubsteps;
    double max_rhat = 1.05;
    bool require_convergence = true;
    std::size_t min_days = 21;
};

// Parameter order in the sampler.
enum SeirdIndex : std::size_t { kR0, kRecovery, kIncubation, kMu, kE0, kI0, kSeirdDim };

inline const std::vector<std::string>& seird_param_names()
{
    static const std::vector<std::string> names{"r0", "recovery_time", "incubation_time", "case_fatality", "e0", "i0"};
    return names;
}

inline double seird_log_prior(const mcmc::Vector& th, const SeirdPriors& pr)
{
    const auto mu = dist::beta_from_moments(pr.mu_mean, pr.mu_sd);
    return dist::lognormal_lpdf(th[kR0], pr.r0_log_mean, pr.r0_log_sd) +
           dist::truncated_normal_lpdf(th[kRecovery], pr.recovery_mean, pr.recovery_sd, pr.recovery_min) +
           dist::truncated_normal_lpdf(th[kIncubation], pr.incubation_mean, pr.incubation_sd, pr.incubation_min) +
           dist::beta_lpdf(th[kMu], mu.a, mu.b) + dist::lognormal_lpdf(th[kE0], pr.seed_log_mean, pr.seed_log_sd) +
           dist::lognormal_lpdf(th[kI0], pr.seed_log_mean, pr.seed_log_sd);
}

/// Mean daily flows of the deterministic model at constrained theta.
inline Trajectory seird_mean_trajectory(const mcmc::Vector& th, double n, int days, int substeps = kDefaultSubsteps)
{
    const auto p = SeirdParams::from_times(th[kR0], th[kRecovery], th[kIncubation], th[kMu], n);
    return simulate_constant(SeirdState::seeded(n, th[kE0], th[kI0]), p, th[kR0], std::nullopt, days, substeps);
}

/// Observations with the theta-independent part of each NB log-pmf,
/// lgamma(k + phi) - lgamma(k + 1) - lgamma(phi), computed once.
struct NbData {
    std::vector<double> cases, cases_const, deaths, deaths_const;
    double phi = 10;

    NbData(const SeirdObservations& obs, double phi_) : cases(obs.new_cases), deaths(obs.new_deaths), phi(phi_)
    {
        auto c = [&](double k) { return dist::lgamma(k + phi) - dist::lgamma(k + 1) - dist::lgamma(phi); };
        for (double k : cases) cases_const.push_back(c(k));
        for (double k : deaths) deaths_const.push_back(c(k));
    }
};

inline double seird_log_likelihood(const Trajectory& traj, const NbData& data)
{
    static constexpr double kMinMean = 1e-8; // keeps k > 0 finite when the model mean vanishes
    const double phi = data.phi;
    auto term = [phi](double k, double c, double mean) {
        mean = std::max(kMinMean, mean);
        const double log_total = std::log(mean + phi);
        return c + phi * (std::log(phi) - log_total) + (k > 0 ? k * (std::log(mean) - log_total) : 0.0);
    };
    double ll = 0;
    for (std::size_t k = 0; k < data.cases.size(); ++k)
        ll += term(data.cases[k], data.cases_const[k], traj.flows[k].new_infectious);
    for (std::size_t k = 0; k < data.deaths.size(); ++k)
        ll += term(data.deaths[k], data.deaths_const[k], traj.flows[k].new_deaths);
    return ll;
}

namespace detail {

inline bool seird_in_support(const mcmc::Vector& th, const SeirdPriors& pr, double n)
{
    return th[kR0] > 0 && th[kRecovery] > pr.recovery_min && th[kIncubation] > pr.incubation_min && th[kMu] > 0 &&
           th[kMu] < 1 && th[kE0] > 0 && th[kI0] > 0 && th[kE0] + th[kI0] < n;
}

inline double seird_log_posterior(const mcmc::Vector& th, const NbData& data, const SeirdPriors& priors, double n,
                                  int substeps)
{
    if (!seird_in_support(th, priors, n)) return dist::neg_inf;
    const double lp = seird_log_prior(th, priors);
    const int days = static_cast<int>(std::max(data.cases.size(), data.deaths.size()));
    if (days == 0) return lp;
    return lp + seird_log_likelihood(seird_mean_trajectory(th, n, days, substeps), data);
}

} // namespace detail

/// Log posterior at constrained theta; -inf off support or when seeds exceed n.
inline double seird_log_posterior(const mcmc::Vector& th, const SeirdObservations& obs, const SeirdPriors& priors,
                                  double n, double phi = 10, int substeps = kDefaultSubsteps)
{
    return detail::seird_log_posterior(th, NbData(obs, phi), priors, n, substeps);
}

/// Gradients come from central finite differences in unconstrained space.
inline mcmc::ProbModel seird_model(const SeirdObservations& obs, const SeirdPriors& priors, double n,
                                   const SeirdFitOptions& opt = {})
{
    mcmc::ProbModel m;
    m.dim = kSeirdDim;
    m.names = seird_param_names();
    m.transforms = {mcmc::Transform::positive(),
                    mcmc::Transform::lower_bound(priors.recovery_min),
                    mcmc::Transform::lower_bound(priors.incubation_min),
                    mcmc::Transform::interval(0, 1),
                    mcmc::Transform::positive(),
                    mcmc::Transform::positive()};
    m.log_density = [data = NbData(obs, opt.phi), priors, n, substeps = opt.substeps](const mcmc::Vector& th) {
        return detail::seird_log_posterior(th, data, priors, n, substeps);
    };
    // Prior means jittered by up to 10%.
    m.init = [priors](mcmc::Rng& rng) {
        std::uniform_real_distribution<double> u(0.9, 1.1);
        mcmc::Vector th(kSeirdDim);
        th[kR0] = std::exp(priors.r0_log_mean) * u(rng);
        th[kRecovery] = priors.recovery_mean * u(rng);
        th[kIncubation] = priors.incubation_mean * u(rng);
        th[kMu] = priors.mu_mean * u(rng);
        th[kE0] = std::exp(priors.seed_log_mean) * u(rng);
        th[kI0] = std::exp(priors.seed_log_mean) * u(rng);
        return th;
    };
    return m;
}

struct SeirdPosterior {
    mcmc::Chains chains;
    mcmc::Diagnostics diag;
    std::map<std::string, mcmc::Summary> summaries;
    bool converged = false;
    int runs = 1; // > 1 when summaries average several seeds

    [[nodiscard]] const mcmc::Summary& at(const std::string& name) const { return summaries.at(name); }
};

/// Observations from cumulative confirmed and death series on the same dates.
inline SeirdObservations observations_from_cumulative(const TimeSeries& confirmed, const TimeSeries& deaths)
{
    if (!deaths.dates.empty() && deaths.dates != confirmed.dates)
        throw Error(ErrorCode::InvalidArgument, "confirmed and death series must share dates");
    return {daily_increments(confirmed), daily_increments(deaths)};
}

inline mcmc::McmcConfig seird_config()
{
    mcmc::McmcConfig cfg;
    cfg.metric = mcmc::Metric::dense;
    cfg.leapfrog_steps = 16;
    return cfg;
}

inline SeirdPosterior fit_seird(const SeirdObservations& obs, double n, const mcmc::McmcConfig& cfg = seird_config(),
                                const SeirdFitOptions& opt = {}, const SeirdPriors& priors = {})
{
    if (static_cast<std::size_t>(obs.days()) < opt.min_days)
        throw Error(ErrorCode::TooFewPoints, "SEIRD fit needs at least " + std::to_string(opt.min_days) + " days");
    const auto model = seird_model(obs, priors, n, opt);
    SeirdPosterior post;
    post.chains = mcmc::sample_hmc(model, cfg);
    post.diag = mcmc::diagnostics(post.chains);
    for (std::size_t k = 0; k < kSeirdDim; ++k)
        post.summaries[seird_param_names()[k]] = mcmc::summarize(mcmc::column(post.chains, static_cast<Eigen::Index>(k)));
    post.converged = post.diag.max_rhat() < opt.max_rhat;
    if (!post.converged && opt.require_convergence)
        throw Error(ErrorCode::NotConverged, "max R-hat " + std::to_string(post.diag.max_rhat()));
    return post;
}

inline SeirdPosterior fit_seird(const TimeSeries& confirmed, const TimeSeries& deaths, double n,
                                const mcmc::McmcConfig& cfg = seird_config(), const SeirdFitOptions& opt = {})
{
    if (confirmed.size() < opt.min_days + 1)
        throw Error(ErrorCode::TooFewPoints, "SEIRD fit needs at least " + std::to_string(opt.min_days) + " days");
    return fit_seird(observations_from_cumulative(confirmed, deaths), n, cfg, opt);
}

/// Fits with `runs` consecutive seeds and averages the summaries; chains
/// of the last run are kept. Converged only if every run converged.
inline SeirdPosterior fit_seird_averaged(const SeirdObservations& obs, double n, int runs,
                                         mcmc::McmcConfig cfg = seird_config(), const SeirdFitOptions& opt = {})
{
    if (runs < 1) throw Error(ErrorCode::InvalidArgument, "runs must be >= 1");
    SeirdPosterior avg;
    avg.converged = true;
    avg.runs = runs;
    const auto seed = cfg.seed;
    for (int r = 0; r < runs; ++r) {
        cfg.seed = seed + static_cast<std::uint64_t>(r);
        auto post = fit_seird(obs, n, cfg, opt);
        avg.converged = avg.converged && post.converged;
        for (const auto& [name, s] : post.summaries) {
            auto& a = avg.summaries[name];
            a.mean += s.mean / runs;
            a.sd += s.sd / runs;
            a.lower += s.lower / runs;
            a.upper += s.upper / runs;
        }
        if (r + 1 == runs) {
            avg.chains = std::move(post.chains);
            avg.diag = post.diag;
        }
    }
    return avg;
}

} // namespace ppl
