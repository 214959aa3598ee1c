#pragma once

// Single change-point model for log cumulative case counts:
//   y = w t + b + eps,  (w, b) = (w1, b1) before tau, (w2, b2) after,
//   eps ~ StudentT(2, 0, noise_scale).
// t is normalized to [0, 1]; slopes are per day, so the regression mean at
// normalized time t is w * t * span_days + b.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "ppl/data_io.hpp"
#include "ppl/date.hpp"
#include "ppl/distributions.hpp"
#include "ppl/error.hpp"
#include "ppl/mcmc.hpp"

namespace ppl {

struct ChangePointParams {
    double w1 = 0; // per day
    double w2 = 0; // per day
    double b1 = 0;
    double b2 = 0;
    double tau = 0.5;
    double noise_scale = 0.1;
};

struct ChangePointPriors {
    double w1_mean = 0.5, w1_sd = 0.25;
    double w2_mean = 0.0, w2_sd = 0.25;
    double m1 = 0, s1 = 1;
    double m2 = 0, s2 = 0.1;
    double tau_a = 4, tau_b = 3;
    double noise_sd = 0.1;
    bool s2_floored = false; // |0.25 m2| fell below the floor
};

inline constexpr double kStudentDf = 2.0;
inline constexpr double kMinS2 = 0.1;

/// Intercept prior means from the first (t <= 0.25) and fourth (t >= 0.75)
/// quartiles of normalized time.
inline ChangePointPriors build_priors(const RegressionSeries& series)
{
    double sum1 = 0, sum4 = 0;
    int n1 = 0, n4 = 0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        if (series.t[k] <= 0.25) sum1 += series.y[k], ++n1;
        if (series.t[k] >= 0.75) sum4 += series.y[k], ++n4;
    }
    if (n1 == 0 || n4 == 0) throw Error(ErrorCode::DegenerateSeries, "first or fourth quartile of t is empty");
    ChangePointPriors p;
    p.m1 = sum1 / n1;
    p.m2 = sum4 / n4;
    p.s2 = std::abs(0.25 * p.m2);
    if (p.s2 < kMinS2) {
        p.s2 = kMinS2;
        p.s2_floored = true;
    }
    return p;
}

namespace detail {

inline double cp_loc(const ChangePointParams& p, double t, double span)
{
    return t < p.tau ? p.w1 * t * span + p.b1 : p.w2 * t * span + p.b2;
}

inline double cp_log_prior(const ChangePointParams& p, const ChangePointPriors& pr)
{
    return dist::normal_lpdf(p.w1, pr.w1_mean, pr.w1_sd) + dist::normal_lpdf(p.w2, pr.w2_mean, pr.w2_sd) +
           dist::normal_lpdf(p.b1, pr.m1, pr.s1) + dist::normal_lpdf(p.b2, pr.m2, pr.s2) +
           dist::beta_lpdf(p.tau, pr.tau_a, pr.tau_b) + dist::half_normal_lpdf(p.noise_scale, pr.noise_sd);
}

} // namespace detail

/// Log posterior density (up to a constant) in constrained space; -inf off support.
inline double log_posterior(const ChangePointParams& p, const RegressionSeries& series, const ChangePointPriors& priors)
{
    if (!(p.tau > 0 && p.tau < 1) || !(p.noise_scale > 0)) return dist::neg_inf;
    const double span = series.size() > 1 ? series.span_days() : 0.0;
    double lp = detail::cp_log_prior(p, priors);
    for (std::size_t k = 0; k < series.size(); ++k)
        lp += dist::student_t_lpdf(series.y[k], kStudentDf, detail::cp_loc(p, series.t[k], span), p.noise_scale);
    return lp;
}

/// Gradient of log_posterior. The tau component is the prior's only: the
/// likelihood is piecewise constant in tau.
inline ChangePointParams grad_log_posterior(const ChangePointParams& p, const RegressionSeries& series,
                                            const ChangePointPriors& pr)
{
    const double span = series.size() > 1 ? series.span_days() : 0.0;
    ChangePointParams g;
    g.w1 = dist::normal_dlpdf(p.w1, pr.w1_mean, pr.w1_sd);
    g.w2 = dist::normal_dlpdf(p.w2, pr.w2_mean, pr.w2_sd);
    g.b1 = dist::normal_dlpdf(p.b1, pr.m1, pr.s1);
    g.b2 = dist::normal_dlpdf(p.b2, pr.m2, pr.s2);
    g.tau = dist::beta_dlpdf(p.tau, pr.tau_a, pr.tau_b);
    g.noise_scale = dist::half_normal_dlpdf(p.noise_scale, pr.noise_sd);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double t = series.t[k];
        const double loc = detail::cp_loc(p, t, span);
        const double dloc = -dist::student_t_dlpdf_dx(series.y[k], kStudentDf, loc, p.noise_scale);
        if (t < p.tau) {
            g.w1 += dloc * t * span;
            g.b1 += dloc;
        } else {
            g.w2 += dloc * t * span;
            g.b2 += dloc;
        }
        g.noise_scale += dist::student_t_dlpdf_dscale(series.y[k], kStudentDf, loc, p.noise_scale);
    }
    return g;
}

/// Relative drop in growth slope.
inline double efficiency(double w1, double w2)
{
    if (w1 == 0) throw Error(ErrorCode::ZeroSlope, "efficiency undefined for w1 = 0");
    return 1.0 - w2 / w1;
}

/// Relative drop in reproduction number.
inline double efficiency_from_re(double re_after, double r0_baseline)
{
    if (!(r0_baseline > 0)) throw Error(ErrorCode::ZeroBaseline, "baseline reproduction number must be positive");
    return 1.0 - re_after / r0_baseline;
}

// Parameter order in the sampler.
enum CpIndex : std::size_t { kW1, kW2, kB1, kB2, kNoise, kTau, kCpDim };

inline ChangePointParams to_params(const mcmc::Vector& x)
{
    return {x[kW1], x[kW2], x[kB1], x[kB2], x[kTau], x[kNoise]};
}

inline mcmc::Vector to_vector(const ChangePointParams& p)
{
    mcmc::Vector x(kCpDim);
    x[kW1] = p.w1;
    x[kW2] = p.w2;
    x[kB1] = p.b1;
    x[kB2] = p.b2;
    x[kNoise] = p.noise_scale;
    x[kTau] = p.tau;
    return x;
}

/// Least-squares line y = w t span + b over the points with t in [lo, hi).
inline std::optional<std::pair<double, double>> segment_ols(const RegressionSeries& s, double lo, double hi)
{
    const double span = s.span_days();
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s.t[k] < lo || s.t[k] >= hi) continue;
        const double x = s.t[k] * span;
        n += 1, sx += x, sy += s.y[k], sxx += x * x, sxy += x * s.y[k];
    }
    const double det = n * sxx - sx * sx;
    if (n < 2 || !(det > 0)) return std::nullopt;
    const double w = (n * sxy - sx * sy) / det;
    return std::pair{w, (sy - w * sx) / n};
}

inline mcmc::ProbModel changepoint_model(const RegressionSeries& series, const ChangePointPriors& priors)
{
    mcmc::ProbModel m;
    m.dim = kCpDim;
    m.names = {"w1", "w2", "b1", "b2", "noise_scale", "tau"};
    m.transforms = {mcmc::Transform::identity(), mcmc::Transform::identity(), mcmc::Transform::identity(),
                    mcmc::Transform::identity(), mcmc::Transform::positive(),  mcmc::Transform::interval(0, 1)};
    m.log_density = [series, priors](const mcmc::Vector& x) { return log_posterior(to_params(x), series, priors); };
    m.grad_log_density = [series, priors](const mcmc::Vector& x) {
        return to_vector(grad_log_posterior(to_params(x), series, priors));
    };
    // Chains start from least-squares fits split at a random tau.
    m.init = [series, priors](mcmc::Rng& rng) {
        std::uniform_real_distribution<double> u(0.3, 0.8);
        ChangePointParams p;
        p.tau = u(rng);
        p.w1 = priors.w1_mean;
        p.w2 = priors.w2_mean;
        p.b1 = priors.m1;
        p.b2 = priors.m2;
        p.noise_scale = 0.05;
        if (series.size() > 1) {
            if (auto f = segment_ols(series, 0.0, p.tau)) std::tie(p.w1, p.b1) = *f;
            if (auto f = segment_ols(series, p.tau, 2.0)) std::tie(p.w2, p.b2) = *f;
        }
        return to_vector(p);
    };
    return m;
}

/// Defaults for change-point fits: the (slope, intercept) block is badly
/// scaled, so warmup also adapts a dense metric.
inline mcmc::McmcConfig changepoint_config()
{
    mcmc::McmcConfig cfg;
    cfg.metric = mcmc::Metric::dense;
    cfg.leapfrog_steps = 16;
    return cfg;
}

struct ChangePointPosterior {
    mcmc::Chains chains;
    mcmc::Diagnostics diag;
    std::map<std::string, mcmc::Summary> summaries; // w1, w2 per day; *_normalized per unit t
    std::vector<double> efficiency_draws;
    mcmc::Summary efficiency;
    Date start{};
    Date end{};
    double span_days = 0;
    Date change_date{};
    bool converged = false;
    bool s2_floored = false;

    [[nodiscard]] const mcmc::Summary& at(const std::string& name) const { return summaries.at(name); }
    [[nodiscard]] ChangePointParams mean_params() const
    {
        return {at("w1").mean, at("w2").mean, at("b1").mean, at("b2").mean, at("tau").mean, at("noise_scale").mean};
    }
};

struct ChangePointOptions {
    double max_rhat = 1.05;
    bool require_convergence = true;
    std::size_t min_points = 20;
};

/// Thrown by fit_changepoint when chains disagree; carries the posterior.
class NotConvergedError : public Error {
public:
    NotConvergedError(const std::string& what, ChangePointPosterior posterior)
        : Error(ErrorCode::NotConverged, what), posterior_(std::make_shared<ChangePointPosterior>(std::move(posterior)))
    {
    }
    [[nodiscard]] const ChangePointPosterior& posterior() const { return *posterior_; }

private:
    std::shared_ptr<ChangePointPosterior> posterior_;
};

inline ChangePointPosterior summarize_changepoint(mcmc::Chains chains, const RegressionSeries& series,
                                                  double max_rhat)
{
    ChangePointPosterior post;
    post.diag = mcmc::diagnostics(chains);
    post.start = series.start;
    post.end = series.end;
    post.span_days = series.span_days();
    const auto& names = chains.front().names;
    for (std::size_t k = 0; k < names.size(); ++k)
        post.summaries[names[k]] = mcmc::summarize(mcmc::column(chains, static_cast<Eigen::Index>(k)));
    for (const char* w : {"w1", "w2"}) {
        auto col = mcmc::column(chains, w[1] == '1' ? kW1 : kW2);
        for (double& v : col) v *= post.span_days;
        post.summaries[std::string(w) + "_normalized"] = mcmc::summarize(std::move(col));
    }
    const auto w1 = mcmc::column(chains, kW1);
    const auto w2 = mcmc::column(chains, kW2);
    for (std::size_t k = 0; k < w1.size(); ++k)
        if (w1[k] != 0) post.efficiency_draws.push_back(efficiency(w1[k], w2[k]));
    post.efficiency = mcmc::summarize(post.efficiency_draws);
    post.change_date = series.date_at(post.at("tau").mean);
    post.converged = post.diag.max_rhat() < max_rhat;
    post.chains = std::move(chains);
    return post;
}

inline ChangePointPosterior fit_changepoint(const RegressionSeries& series,
                                            const mcmc::McmcConfig& cfg = changepoint_config(),
                                            const ChangePointOptions& opt = {})
{
    if (series.size() < opt.min_points)
        throw Error(ErrorCode::DegenerateSeries, "change-point fit needs at least " + std::to_string(opt.min_points) +
                                                     " points, got " + std::to_string(series.size()));
    const auto priors = build_priors(series);
    const auto model = changepoint_model(series, priors);
    const std::vector<mcmc::Block> blocks{
        {{kW1, kW2, kB1, kB2, kNoise}, mcmc::KernelKind::hmc, {}, false},
        {{kTau}, mcmc::KernelKind::rwmh, {0.5}, true},
    };
    auto post = summarize_changepoint(mcmc::sample_gibbs_hybrid(model, cfg, blocks), series, opt.max_rhat);
    post.s2_floored = priors.s2_floored;
    if (!post.converged && opt.require_convergence) {
        const std::string msg = "max R-hat " + std::to_string(post.diag.max_rhat()) + " >= " + std::to_string(opt.max_rhat);
        throw NotConvergedError(msg, std::move(post));
    }
    return post;
}

struct TakeEffect {
    int days = 0;
    bool negative_lag = false; // change detected before the policy started
};

inline TakeEffect take_effect_days(const ChangePointPosterior& post, Date policy_start)
{
    const int d = days_between(policy_start, post.change_date);
    return {d, d < 0};
}

/// t, date, y and the posterior-mean fit line, for external charting.
inline void write_fit_csv(std::ostream& out, const RegressionSeries& series, const ChangePointPosterior& post)
{
    const auto p = post.mean_params();
    const double span = series.span_days();
    out << "t,date,y,fit\n";
    out.precision(10);
    for (std::size_t k = 0; k < series.size(); ++k)
        out << series.t[k] << ',' << format_date(series.date_at(series.t[k])) << ',' << series.y[k] << ','
            << detail::cp_loc(p, series.t[k], span) << '\n';
}

} // namespace ppl
