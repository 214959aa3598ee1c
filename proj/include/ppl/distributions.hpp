#pragma once

// Log-densities (and the derivatives the models need) for the priors and
// observation models. All return -infinity outside the support.

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

namespace ppl::dist {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline double lgamma(double x) { return boost::math::lgamma(x); }

inline double normal_lpdf(double x, double mean, double sd)
{
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// d/dx of normal_lpdf.
inline double normal_dlpdf(double x, double mean, double sd) { return -(x - mean) / (sd * sd); }

inline double half_normal_lpdf(double x, double sd)
{
    if (x < 0) return neg_inf;
    return std::log(2.0) + normal_lpdf(x, 0.0, sd);
}

inline double half_normal_dlpdf(double x, double sd) { return normal_dlpdf(x, 0.0, sd); }

/// Normal restricted to (lower, inf).
inline double truncated_normal_lpdf(double x, double mean, double sd, double lower)
{
    if (x <= lower) return neg_inf;
    const double tail = 0.5 * std::erfc((lower - mean) / (sd * std::numbers::sqrt2));
    return normal_lpdf(x, mean, sd) - std::log(tail);
}

inline double lognormal_lpdf(double x, double log_mean, double log_sd)
{
    if (x <= 0) return neg_inf;
    return normal_lpdf(std::log(x), log_mean, log_sd) - std::log(x);
}

inline double lognormal_dlpdf(double x, double log_mean, double log_sd)
{
    return (normal_dlpdf(std::log(x), log_mean, log_sd) - 1.0) / x;
}

inline double beta_lpdf(double x, double a, double b)
{
    if (x <= 0 || x >= 1) return neg_inf;
    return (a - 1) * std::log(x) + (b - 1) * std::log1p(-x) + lgamma(a + b) - lgamma(a) - lgamma(b);
}

inline double beta_dlpdf(double x, double a, double b) { return (a - 1) / x - (b - 1) / (1 - x); }

struct BetaShape {
    double a;
    double b;
};

/// Beta shape parameters with the given mean and standard deviation.
inline BetaShape beta_from_moments(double mean, double sd)
{
    const double common = mean * (1 - mean) / (sd * sd) - 1;
    return {mean * common, (1 - mean) * common};
}

/// Location-scale Student-t.
inline double student_t_lpdf(double x, double nu, double loc, double scale)
{
    if (!(scale > 0)) return neg_inf;
    const double z = (x - loc) / scale;
    return lgamma(0.5 * (nu + 1)) - lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) - std::log(scale) -
           0.5 * (nu + 1) * std::log1p(z * z / nu);
}

/// d/dx of student_t_lpdf (equals -d/dloc).
inline double student_t_dlpdf_dx(double x, double nu, double loc, double scale)
{
    const double r = x - loc;
    return -(nu + 1) * r / (nu * scale * scale + r * r);
}

/// d/dscale of student_t_lpdf.
inline double student_t_dlpdf_dscale(double x, double nu, double loc, double scale)
{
    const double r = x - loc;
    const double r2 = r * r;
    return -1.0 / scale + (nu + 1) * r2 / (scale * (nu * scale * scale + r2));
}

/// Negative binomial in mean / dispersion form: variance = mean + mean^2 / phi.
inline double neg_binomial_2_lpmf(double k, double mean, double phi)
{
    if (k < 0 || mean < 0) return neg_inf;
    if (mean == 0) return k == 0 ? 0.0 : neg_inf;
    return lgamma(k + phi) - lgamma(k + 1) - lgamma(phi) + phi * (std::log(phi) - std::log(mean + phi)) +
           k * (std::log(mean) - std::log(mean + phi));
}

} // namespace ppl::dist
