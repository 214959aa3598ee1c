#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ppl/error.hpp"

namespace ppl::mcmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Bijection from the real line onto a parameter's support.
class Transform {
public:
    enum class Kind { identity, lower_bound, interval };

    static Transform identity() { return Transform{Kind::identity, 0, 0}; }
    static Transform positive() { return lower_bound(0.0); }
    static Transform lower_bound(double lo) { return Transform{Kind::lower_bound, lo, 0}; }
    static Transform interval(double lo, double hi) { return Transform{Kind::interval, lo, hi}; }

    [[nodiscard]] Kind kind() const { return kind_; }

    [[nodiscard]] double constrain(double u) const
    {
        switch (kind_) {
        case Kind::identity: return u;
        case Kind::lower_bound: return lo_ + std::exp(u);
        case Kind::interval: return lo_ + (hi_ - lo_) * inv_logit(u);
        }
        return u;
    }

    [[nodiscard]] double unconstrain(double x) const
    {
        switch (kind_) {
        case Kind::identity: return x;
        case Kind::lower_bound: return std::log(x - lo_);
        case Kind::interval: {
            const double p = (x - lo_) / (hi_ - lo_);
            return std::log(p) - std::log1p(-p);
        }
        }
        return x;
    }

    /// log |dx/du|
    [[nodiscard]] double log_jacobian(double u) const
    {
        switch (kind_) {
        case Kind::identity: return 0.0;
        case Kind::lower_bound: return u;
        case Kind::interval: return std::log(hi_ - lo_) - softplus(-u) - softplus(u);
        }
        return 0.0;
    }

    /// d/du log |dx/du|
    [[nodiscard]] double d_log_jacobian(double u) const
    {
        switch (kind_) {
        case Kind::identity: return 0.0;
        case Kind::lower_bound: return 1.0;
        case Kind::interval: return 1.0 - 2.0 * inv_logit(u);
        }
        return 0.0;
    }

    /// dx/du
    [[nodiscard]] double d_constrain(double u) const
    {
        switch (kind_) {
        case Kind::identity: return 1.0;
        case Kind::lower_bound: return std::exp(u);
        case Kind::interval: {
            const double s = inv_logit(u);
            return (hi_ - lo_) * s * (1 - s);
        }
        }
        return 1.0;
    }

private:
    Transform(Kind k, double lo, double hi) : kind_(k), lo_(lo), hi_(hi) {}

    static double inv_logit(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }
    static double softplus(double u) { return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

    Kind kind_;
    double lo_;
    double hi_;
};

/// Target density over constrained parameters. Samplers work in the
/// unconstrained space and add the log-Jacobian of the transforms.
struct ProbModel {
    std::size_t dim = 0;
    std::vector<std::string> names;
    std::function<double(const Vector&)> log_density;
    /// Gradient w.r.t. constrained parameters; empty means finite differences.
    std::function<Vector(const Vector&)> grad_log_density;
    /// One per parameter; empty means identity everywhere.
    std::vector<Transform> transforms;
    /// Optional initial point in constrained space.
    std::function<Vector(Rng&)> init;

    [[nodiscard]] const Transform& transform(std::size_t k) const
    {
        static const Transform id = Transform::identity();
        return transforms.empty() ? id : transforms[k];
    }

    [[nodiscard]] Vector constrain(const Vector& u) const
    {
        Vector x(u.size());
        for (Eigen::Index k = 0; k < u.size(); ++k) x[k] = transform(k).constrain(u[k]);
        return x;
    }

    [[nodiscard]] Vector unconstrain(const Vector& x) const
    {
        Vector u(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) u[k] = transform(k).unconstrain(x[k]);
        return u;
    }

    [[nodiscard]] double log_jacobian(const Vector& u) const
    {
        double total = 0.0;
        for (Eigen::Index k = 0; k < u.size(); ++k) total += transform(k).log_jacobian(u[k]);
        return total;
    }

    /// Log density in unconstrained space (target plus log-Jacobian).
    [[nodiscard]] double log_density_unconstrained(const Vector& u) const
    {
        const double lp = log_density(constrain(u));
        if (std::isnan(lp)) return -std::numeric_limits<double>::infinity();
        return lp + log_jacobian(u);
    }

    /// Gradient of log_density_unconstrained restricted to `indices`
    /// (all coordinates when empty).
    [[nodiscard]] Vector grad_unconstrained(const Vector& u, const std::vector<std::size_t>& indices = {}) const
    {
        const std::size_t m = indices.empty() ? static_cast<std::size_t>(u.size()) : indices.size();
        auto coord = [&](std::size_t j) { return indices.empty() ? j : indices[j]; };
        Vector g(m);
        if (grad_log_density) {
            const Vector x = constrain(u);
            const Vector gx = grad_log_density(x);
            for (std::size_t j = 0; j < m; ++j) {
                const auto k = coord(j);
                g[j] = gx[k] * transform(k).d_constrain(u[k]) + transform(k).d_log_jacobian(u[k]);
            }
            return g;
        }
        Vector probe = u;
        for (std::size_t j = 0; j < m; ++j) {
            const auto k = coord(j);
            const double h = 1e-5 * std::max(1.0, std::abs(u[k]));
            probe[k] = u[k] + h;
            const double up = log_density_unconstrained(probe);
            probe[k] = u[k] - h;
            const double down = log_density_unconstrained(probe);
            probe[k] = u[k];
            g[j] = (up - down) / (2 * h);
        }
        return g;
    }
};

/// Central finite-difference gradient of the constrained log density.
inline Vector finite_difference_gradient(const ProbModel& model, const Vector& x, double h = 1e-5)
{
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double step = h * std::max(1.0, std::abs(x[k]));
        probe[k] = x[k] + step;
        const double up = model.log_density(probe);
        probe[k] = x[k] - step;
        const double down = model.log_density(probe);
        probe[k] = x[k];
        g[k] = (up - down) / (2 * step);
    }
    return g;
}

} // namespace ppl::mcmc
