#pragma once

// Rank-normalized split-R-hat and bulk effective sample size
// (Vehtari, Gelman, Simpson, Carpenter, Burkner 2021).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "ppl/error.hpp"
#include "ppl/mcmc/sampler.hpp"

namespace ppl::mcmc {

struct Diagnostics {
    std::vector<double> rhat;
    std::vector<double> ess;

    [[nodiscard]] double max_rhat() const
    {
        return rhat.empty() ? 1.0 : *std::max_element(rhat.begin(), rhat.end());
    }
    [[nodiscard]] double min_ess() const { return ess.empty() ? 0.0 : *std::min_element(ess.begin(), ess.end()); }
};

namespace detail {

using Draws = std::vector<std::vector<double>>; // [chain][draw]

inline Draws split_chains(const Draws& chains)
{
    Draws out;
    for (const auto& c : chains) {
        const std::size_t half = c.size() / 2;
        out.emplace_back(c.begin(), c.begin() + static_cast<long>(half));
        out.emplace_back(c.end() - static_cast<long>(half), c.end());
    }
    return out;
}

inline Draws rank_normalize(const Draws& chains)
{
    std::vector<std::pair<double, std::size_t>> pooled;
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (std::size_t i = 0; i < chains[c].size(); ++i) pooled.emplace_back(chains[c][i], c * chains[c].size() + i);
    std::sort(pooled.begin(), pooled.end());
    const double s = static_cast<double>(pooled.size());
    std::vector<double> z(pooled.size());
    boost::math::normal_distribution<double> std_normal;
    for (std::size_t a = 0; a < pooled.size();) {
        std::size_t b = a;
        while (b + 1 < pooled.size() && pooled[b + 1].first == pooled[a].first) ++b;
        const double rank = 0.5 * static_cast<double>(a + b) + 1.0; // average rank, 1-based
        const double value = boost::math::quantile(std_normal, (rank - 0.375) / (s + 0.25));
        for (std::size_t k = a; k <= b; ++k) z[pooled[k].second] = value;
        a = b + 1;
    }
    Draws out = chains;
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (std::size_t i = 0; i < chains[c].size(); ++i) out[c][i] = z[c * chains[c].size() + i];
    return out;
}

inline double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

inline double sample_variance(const std::vector<double>& v)
{
    const double m = mean(v);
    double acc = 0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size() - 1);
}

inline double rhat_of(const Draws& chains)
{
    const double n = static_cast<double>(chains.front().size());
    std::vector<double> means;
    double w = 0;
    for (const auto& c : chains) {
        means.push_back(mean(c));
        w += sample_variance(c);
    }
    w /= static_cast<double>(chains.size());
    const double b_over_n = sample_variance(means);
    if (w <= 0) return b_over_n <= 0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (n - 1) / n * w + b_over_n;
    return std::sqrt(var_plus / w);
}

inline std::vector<double> autocovariance(const std::vector<double>& x)
{
    const std::size_t n = x.size();
    const double m = mean(x);
    std::vector<double> out(n, 0.0);
    for (std::size_t lag = 0; lag < n; ++lag) {
        double acc = 0;
        for (std::size_t i = 0; i + lag < n; ++i) acc += (x[i] - m) * (x[i + lag] - m);
        out[lag] = acc / static_cast<double>(n);
    }
    return out;
}

inline double ess_of(const Draws& chains)
{
    const std::size_t m = chains.size();
    const std::size_t n = chains.front().size();
    std::vector<std::vector<double>> acov;
    std::vector<double> means;
    for (const auto& c : chains) {
        acov.push_back(autocovariance(c));
        means.push_back(mean(c));
    }
    double w = 0;
    for (const auto& a : acov) w += a[0] * static_cast<double>(n) / static_cast<double>(n - 1);
    w /= static_cast<double>(m);
    const double b_over_n = m > 1 ? sample_variance(means) : 0.0;
    const double var_plus = w * static_cast<double>(n - 1) / static_cast<double>(n) + b_over_n;
    if (!(var_plus > 0)) return static_cast<double>(m * n);

    auto rho = [&](std::size_t t) {
        double acc = 0;
        for (const auto& a : acov) acc += a[t];
        acc /= static_cast<double>(m);
        return 1.0 - (w - acc) / var_plus;
    };

    // Geyer's initial positive sequence with monotone adjustment.
    std::vector<double> pairs;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t + 1 < n; t += 2) {
        double p = rho(t) + rho(t + 1);
        if (p < 0) break;
        p = std::min(p, prev);
        pairs.push_back(p);
        prev = p;
    }
    double tau = -1.0;
    for (double p : pairs) tau += 2.0 * p;
    const double total = static_cast<double>(m * n);
    tau = std::max(tau, 1.0 / std::log10(total));
    return total / tau;
}

} // namespace detail

/// Split-R-hat and bulk ESS per parameter, both on rank-normalized draws.
inline Diagnostics diagnostics(const Chains& chains)
{
    if (chains.size() < 2) throw Error(ErrorCode::TooFewDraws, "need at least 2 chains");
    const auto n = chains.front().num_draws();
    const auto dim = chains.front().dim();
    for (const auto& c : chains)
        if (c.num_draws() != n || c.dim() != dim) throw Error(ErrorCode::InvalidArgument, "chains differ in shape");
    if (n / 2 < 4) throw Error(ErrorCode::TooFewDraws, "fewer than 4 draws per split chain");

    Diagnostics out;
    for (Eigen::Index k = 0; k < dim; ++k) {
        detail::Draws raw;
        for (const auto& c : chains) {
            std::vector<double> col(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) col[i] = c.draws(i, k);
            raw.push_back(std::move(col));
        }
        const auto z = detail::rank_normalize(detail::split_chains(raw));
        out.rhat.push_back(detail::rhat_of(z));
        out.ess.push_back(detail::ess_of(z));
    }
    return out;
}

struct Summary {
    double mean = 0;
    double sd = 0;
    double lower = 0; // central interval bounds
    double upper = 0;
};

inline Summary summarize(std::vector<double> values, double interval = 0.94)
{
    Summary s;
    if (values.empty()) return s;
    s.mean = detail::mean(values);
    s.sd = values.size() > 1 ? std::sqrt(detail::sample_variance(values)) : 0.0;
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    s.lower = quantile(0.5 * (1 - interval));
    s.upper = quantile(1 - 0.5 * (1 - interval));
    return s;
}

inline std::vector<double> column(const Chains& chains, Eigen::Index k)
{
    std::vector<double> out;
    for (const auto& c : chains)
        for (Eigen::Index i = 0; i < c.num_draws(); ++i) out.push_back(c.draws(i, k));
    return out;
}

} // namespace ppl::mcmc
