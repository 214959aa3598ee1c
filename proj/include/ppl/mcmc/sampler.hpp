#pragma once

// Random-walk Metropolis, Hamiltonian Monte Carlo with dual-averaging step
// size adaptation, and Metropolis-within-Gibbs composition of the two.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ppl/error.hpp"
#include "ppl/mcmc/model.hpp"

namespace ppl::mcmc {

enum class Metric { unit, diagonal, dense };

struct McmcConfig {
    int num_warmup = 1000;
    int num_samples = 1000;
    int num_chains = 4;
    std::uint64_t seed = 20200401;
    double target_accept = 0.8;
    int leapfrog_steps = 32;
    double init_step_size = 0.1;
    /// Uniform multiplicative jitter of the HMC step size, in [0, 1).
    double step_jitter = 0.1;
    Metric metric = Metric::unit;
    double max_energy_error = 1000.0;
    bool parallel = true;

    void validate() const
    {
        if (num_warmup < 0 || num_samples < 1 || num_chains < 1 || leapfrog_steps < 1)
            throw Error(ErrorCode::InvalidArgument, "MCMC counts must be positive");
        if (!(target_accept > 0 && target_accept < 1))
            throw Error(ErrorCode::InvalidArgument, "target_accept must lie in (0, 1)");
        if (!(init_step_size > 0)) throw Error(ErrorCode::InvalidArgument, "init_step_size must be positive");
        if (!(step_jitter >= 0 && step_jitter < 1)) throw Error(ErrorCode::InvalidArgument, "step_jitter must lie in [0, 1)");
    }
};

struct Chain {
    std::vector<std::string> names;
    Matrix draws; // num_samples x dim, constrained space
    double accept_rate = 0.0;
    std::vector<double> block_accept_rates;
    int divergences = 0;
    double step_size = 0.0; // final HMC step size of the first HMC block, 0 if none

    [[nodiscard]] Eigen::Index num_draws() const { return draws.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return draws.cols(); }
};

using Chains = std::vector<Chain>;

/// Derives an independent generator for chain `index` from one master seed.
inline Rng chain_rng(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x9e3779b9u};
    return Rng{seq};
}

// --- Hamiltonian dynamics --------------------------------------------------

struct PhasePoint {
    Vector q;
    Vector p;
};

/// Kick-drift-kick leapfrog. `inv_metric` is the inverse mass matrix
/// (identity when empty); `grad` is the gradient of the log density.
template <typename Grad>
PhasePoint leapfrog(Vector q, Vector p, double eps, int steps, Grad&& grad, const Matrix& inv_metric = Matrix{})
{
    if (!(eps > 0)) throw Error(ErrorCode::InvalidArgument, "leapfrog step size must be positive");
    if (steps < 1) throw Error(ErrorCode::InvalidArgument, "leapfrog needs at least one step");
    const bool unit = inv_metric.size() == 0;
    Vector g = grad(q);
    for (int s = 0; s < steps; ++s) {
        p += 0.5 * eps * g;
        if (unit)
            q += eps * p;
        else
            q += eps * (inv_metric * p);
        g = grad(q);
        p += 0.5 * eps * g;
    }
    return {std::move(q), std::move(p)};
}

inline double kinetic_energy(const Vector& p, const Matrix& inv_metric)
{
    return inv_metric.size() == 0 ? 0.5 * p.squaredNorm() : 0.5 * p.dot(inv_metric * p);
}

/// Leapfrog that measures the energy error and throws DivergentTrajectory
/// when it exceeds `max_energy_error` or the end point is not finite.
template <typename LogDensity, typename Grad>
PhasePoint checked_leapfrog(const Vector& q, const Vector& p, double eps, int steps, LogDensity&& log_density,
                            Grad&& grad, double max_energy_error = 1000.0, const Matrix& inv_metric = Matrix{},
                            double* energy_error = nullptr)
{
    const double h0 = -log_density(q) + kinetic_energy(p, inv_metric);
    auto end = leapfrog(q, p, eps, steps, grad, inv_metric);
    const double h1 = -log_density(end.q) + kinetic_energy(end.p, inv_metric);
    const double dh = h1 - h0;
    if (energy_error) *energy_error = dh;
    if (!std::isfinite(dh) || std::abs(dh) > max_energy_error)
        throw Error(ErrorCode::DivergentTrajectory, "energy error " + std::to_string(dh));
    return end;
}

// --- transition kernels ------------------------------------------------------

enum class KernelKind { hmc, rwmh };

/// One block of a Metropolis-within-Gibbs sweep.
struct Block {
    std::vector<std::size_t> indices;
    KernelKind kind = KernelKind::hmc;
    /// Per-index random-walk scale in unconstrained space (rwmh only; default 1).
    std::vector<double> proposal_scale;
    /// Adapt the random-walk scale during warmup (rwmh only).
    bool adapt_scale = false;
};

namespace detail {

struct DualAveraging {
    double mu = 0;
    double h_bar = 0;
    double log_eps_bar = 0;
    int iteration = 0;
    double target = 0.8;

    void restart(double eps)
    {
        mu = std::log(10.0 * eps);
        h_bar = 0;
        log_eps_bar = 0;
        iteration = 0;
    }

    // Hoffman & Gelman constants.
    double update(double accept_stat)
    {
        constexpr double gamma = 0.05;
        constexpr double t0 = 10.0;
        constexpr double kappa = 0.75;
        ++iteration;
        const double m = iteration;
        h_bar = (1 - 1 / (m + t0)) * h_bar + (target - accept_stat) / (m + t0);
        const double log_eps = mu - std::sqrt(m) / gamma * h_bar;
        const double eta = std::pow(m, -kappa);
        log_eps_bar = eta * log_eps + (1 - eta) * log_eps_bar;
        return std::exp(log_eps);
    }

    [[nodiscard]] double final_step() const { return std::exp(log_eps_bar); }
};

class Kernel {
public:
    virtual ~Kernel() = default;
    /// Advances `u` in place; returns the acceptance indicator.
    virtual bool transition(Vector& u, double& log_density, Rng& rng, int iteration, bool warmup) = 0;
    virtual void end_warmup() {}
    [[nodiscard]] virtual double step_size() const { return 0.0; }
    int divergences = 0;
};

class RwmhKernel final : public Kernel {
public:
    RwmhKernel(const ProbModel& model, std::vector<std::size_t> indices, std::vector<double> scale, bool adapt)
        : model_(model), indices_(std::move(indices)), scale_(std::move(scale)), adapt_(adapt)
    {
        if (scale_.empty()) scale_.assign(indices_.size(), 1.0);
        if (scale_.size() != indices_.size())
            throw Error(ErrorCode::InvalidArgument, "proposal_scale size does not match block size");
        for (double s : scale_)
            if (!(s > 0)) throw Error(ErrorCode::InvalidArgument, "proposal_scale must be positive");
        target_ = indices_.size() == 1 ? 0.44 : 0.234;
    }

    bool transition(Vector& u, double& log_density, Rng& rng, int iteration, bool warmup) override
    {
        std::normal_distribution<double> normal;
        Vector proposal = u;
        for (std::size_t j = 0; j < indices_.size(); ++j)
            proposal[indices_[j]] += std::exp(log_scale_) * scale_[j] * normal(rng);
        const double lp = model_.log_density_unconstrained(proposal);
        const double log_ratio = lp - log_density;
        const double accept_prob = std::isfinite(lp) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
        std::uniform_real_distribution<double> unif;
        const bool accepted = std::isfinite(lp) && std::log(unif(rng)) < log_ratio;
        if (accepted) {
            u = std::move(proposal);
            log_density = lp;
        }
        if (warmup && adapt_) log_scale_ += (accept_prob - target_) / std::pow(iteration + 1.0, 0.6);
        return accepted;
    }

private:
    const ProbModel& model_;
    std::vector<std::size_t> indices_;
    std::vector<double> scale_;
    bool adapt_;
    double log_scale_ = 0.0;
    double target_;
};

class HmcKernel final : public Kernel {
public:
    HmcKernel(const ProbModel& model, std::vector<std::size_t> indices, const McmcConfig& cfg)
        : model_(model), indices_(std::move(indices)), cfg_(cfg), eps_(cfg.init_step_size)
    {
        all_ = indices_.size() == model.dim;
        adapt_.target = cfg.target_accept;
        adapt_.restart(eps_);
        plan_windows();
    }

    bool transition(Vector& u, double& log_density, Rng& rng, int iteration, bool warmup) override
    {
        if (!initialized_) {
            find_reasonable_step(u, log_density, rng);
            initialized_ = true;
        }
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> unif;
        const auto m = static_cast<Eigen::Index>(indices_.size());

        Vector z(m);
        for (Eigen::Index j = 0; j < m; ++j) z[j] = normal(rng);
        const Vector p0 = momentum_from_normal(z);
        const double eps = eps_ * (1.0 + cfg_.step_jitter * (2.0 * unif(rng) - 1.0));

        double accept_stat = 0.0;
        bool accepted = false;
        try {
            Vector full = u;
            auto lp_block = [&](const Vector& q) {
                scatter(full, q);
                return model_.log_density_unconstrained(full);
            };
            auto grad_block = [&](const Vector& q) {
                scatter(full, q);
                Vector g = model_.grad_unconstrained(full, all_ ? std::vector<std::size_t>{} : indices_);
                if (!g.allFinite()) throw Error(ErrorCode::DivergentTrajectory, "non-finite gradient");
                return g;
            };
            double dh = 0;
            auto end = checked_leapfrog(gather(u), p0, eps, cfg_.leapfrog_steps, lp_block, grad_block,
                                        cfg_.max_energy_error, inv_metric_, &dh);
            accept_stat = std::min(1.0, std::exp(-dh));
            if (std::log(unif(rng)) < -dh) {
                scatter(u, end.q);
                log_density = model_.log_density_unconstrained(u);
                accepted = true;
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DivergentTrajectory) throw;
            if (!warmup) ++divergences;
            accept_stat = 0.0;
        }

        if (warmup) adapt(u, iteration, accept_stat);
        return accepted;
    }

    void end_warmup() override
    {
        if (adapted_any_) eps_ = adapt_.final_step();
    }

    [[nodiscard]] double step_size() const override { return eps_; }

private:
    void adapt(const Vector& u, int iteration, double accept_stat)
    {
        eps_ = adapt_.update(accept_stat);
        adapted_any_ = true;
        if (cfg_.metric == Metric::unit || windows_.empty()) return;

        for (const auto& [begin, end] : windows_) {
            if (iteration >= begin && iteration < end) window_draws_.push_back(gather(u));
            if (iteration == end - 1) {
                update_metric();
                window_draws_.clear();
                adapt_.restart(eps_);
            }
        }
    }

    void update_metric()
    {
        const auto n = static_cast<double>(window_draws_.size());
        const auto m = static_cast<Eigen::Index>(indices_.size());
        if (n < 3) return;
        Vector mean = Vector::Zero(m);
        for (const auto& d : window_draws_) mean += d;
        mean /= n;
        Matrix cov = Matrix::Zero(m, m);
        for (const auto& d : window_draws_) cov += (d - mean) * (d - mean).transpose();
        cov /= (n - 1);
        // Shrink toward a small multiple of the diagonal. A fixed identity
        // term swamps parameters whose posterior variance is below ~1e-5.
        const Vector diag = cov.diagonal().cwiseMax(1e-300);
        cov = (n / (n + 5.0)) * cov;
        cov.diagonal() += 1e-3 * (5.0 / (n + 5.0)) * diag;
        if (cfg_.metric == Metric::diagonal) cov = Matrix(cov.diagonal().asDiagonal());
        Eigen::LLT<Matrix> llt(cov);
        if (llt.info() != Eigen::Success) return;
        inv_metric_ = cov;
        inv_metric_chol_ = llt.matrixL();
    }

    // Windowed metric adaptation: a fast initial buffer, doubling slow windows,
    // and a terminal buffer during which only the step size moves.
    void plan_windows()
    {
        const int warmup = cfg_.num_warmup;
        if (cfg_.metric == Metric::unit || warmup < 150) return;
        const int init_buffer = 75;
        const int term_buffer = 50;
        int start = init_buffer;
        int size = 25;
        const int last = warmup - term_buffer;
        while (start < last) {
            int end = start + size;
            if (end + 2 * size > last) end = last;
            windows_.emplace_back(start, end);
            start = end;
            size *= 2;
        }
    }

    // p ~ N(0, M) with M the mass matrix, i.e. the inverse of inv_metric.
    Vector momentum_from_normal(const Vector& z) const
    {
        if (inv_metric_.size() == 0) return z;
        return inv_metric_chol_.transpose().triangularView<Eigen::Upper>().solve(z);
    }

    void find_reasonable_step(const Vector& u, double log_density, Rng& rng)
    {
        std::normal_distribution<double> normal;
        Vector full = u;
        auto grad_block = [&](const Vector& q) {
            scatter(full, q);
            return model_.grad_unconstrained(full, all_ ? std::vector<std::size_t>{} : indices_);
        };
        const auto m = static_cast<Eigen::Index>(indices_.size());
        Vector p(m);
        for (Eigen::Index j = 0; j < m; ++j) p[j] = normal(rng);
        auto log_accept = [&](double eps) {
            auto end = leapfrog(gather(u), p, eps, 1, grad_block);
            scatter(full, end.q);
            const double lp = model_.log_density_unconstrained(full);
            const double val = lp - 0.5 * end.p.squaredNorm() - (log_density - 0.5 * p.squaredNorm());
            return std::isfinite(val) ? val : -std::numeric_limits<double>::infinity();
        };
        double eps = eps_;
        double la = log_accept(eps);
        const double direction = la > std::log(0.5) ? 1.0 : -1.0;
        for (int k = 0; k < 50; ++k) {
            if (direction > 0 ? !(la > std::log(0.5)) : la > std::log(0.5)) break;
            eps *= direction > 0 ? 2.0 : 0.5;
            la = log_accept(eps);
        }
        eps_ = eps;
        adapt_.restart(eps_);
    }

    [[nodiscard]] Vector gather(const Vector& u) const
    {
        if (all_) return u;
        Vector q(static_cast<Eigen::Index>(indices_.size()));
        for (std::size_t j = 0; j < indices_.size(); ++j) q[j] = u[indices_[j]];
        return q;
    }

    void scatter(Vector& u, const Vector& q) const
    {
        if (all_) {
            u = q;
            return;
        }
        for (std::size_t j = 0; j < indices_.size(); ++j) u[indices_[j]] = q[j];
    }

    const ProbModel& model_;
    std::vector<std::size_t> indices_;
    McmcConfig cfg_;
    bool all_ = false;
    double eps_;
    DualAveraging adapt_;
    bool adapted_any_ = false;
    bool initialized_ = false;
    Matrix inv_metric_;
    Matrix inv_metric_chol_;
    std::vector<std::pair<int, int>> windows_;
    std::vector<Vector> window_draws_;
};

inline Vector initial_point(const ProbModel& model, Rng& rng)
{
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
        Vector u(static_cast<Eigen::Index>(model.dim));
        if (model.init) {
            u = model.unconstrain(model.init(rng));
        } else {
            for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = unif(rng);
        }
        if (std::isfinite(model.log_density_unconstrained(u))) return u;
    }
    throw Error(ErrorCode::NonFiniteDensity, "no finite-density initial point after 100 attempts");
}

inline void validate_partition(const ProbModel& model, const std::vector<Block>& blocks)
{
    std::vector<int> seen(model.dim, 0);
    for (const auto& b : blocks) {
        if (b.indices.empty()) throw Error(ErrorCode::InvalidArgument, "empty Gibbs block");
        for (auto k : b.indices) {
            if (k >= model.dim) throw Error(ErrorCode::InvalidArgument, "block index out of range");
            ++seen[k];
        }
    }
    for (std::size_t k = 0; k < model.dim; ++k)
        if (seen[k] != 1)
            throw Error(ErrorCode::InvalidArgument, "blocks must partition the parameters (index " + std::to_string(k) + ")");
}

inline Chain run_chain(const ProbModel& model, const McmcConfig& cfg, const std::vector<Block>& blocks,
                       std::uint64_t chain_index)
{
    Rng rng = chain_rng(cfg.seed, chain_index);
    Vector u = initial_point(model, rng);
    double lp = model.log_density_unconstrained(u);

    std::vector<std::unique_ptr<Kernel>> kernels;
    for (const auto& b : blocks) {
        if (b.kind == KernelKind::hmc)
            kernels.push_back(std::make_unique<HmcKernel>(model, b.indices, cfg));
        else
            kernels.push_back(std::make_unique<RwmhKernel>(model, b.indices, b.proposal_scale, b.adapt_scale));
    }

    Chain chain;
    chain.names = model.names;
    chain.draws.resize(cfg.num_samples, static_cast<Eigen::Index>(model.dim));
    std::vector<long> accepts(kernels.size(), 0);
    const int total = cfg.num_warmup + cfg.num_samples;
    for (int it = 0; it < total; ++it) {
        const bool warmup = it < cfg.num_warmup;
        if (it == cfg.num_warmup)
            for (auto& k : kernels) k->end_warmup();
        for (std::size_t b = 0; b < kernels.size(); ++b) {
            const bool acc = kernels[b]->transition(u, lp, rng, it, warmup);
            if (!warmup && acc) ++accepts[b];
        }
        if (!warmup) chain.draws.row(it - cfg.num_warmup) = model.constrain(u).transpose();
    }

    double sum = 0;
    for (std::size_t b = 0; b < kernels.size(); ++b) {
        const double rate = static_cast<double>(accepts[b]) / cfg.num_samples;
        chain.block_accept_rates.push_back(rate);
        sum += rate;
        chain.divergences += kernels[b]->divergences;
        if (chain.step_size == 0.0) chain.step_size = kernels[b]->step_size();
    }
    chain.accept_rate = sum / static_cast<double>(kernels.size());
    return chain;
}

} // namespace detail

/// Runs cfg.num_chains independent chains of the given block sweep. Chain k
/// draws from its own generator derived from (cfg.seed, k), so results do not
/// depend on whether chains run in parallel.
inline Chains sample_gibbs_hybrid(const ProbModel& model, const McmcConfig& cfg, const std::vector<Block>& blocks)
{
    cfg.validate();
    detail::validate_partition(model, blocks);
    Chains chains(static_cast<std::size_t>(cfg.num_chains));
    if (cfg.parallel && cfg.num_chains > 1) {
        std::vector<std::future<Chain>> futures;
        for (int c = 0; c < cfg.num_chains; ++c)
            futures.push_back(std::async(std::launch::async, [&, c] { return detail::run_chain(model, cfg, blocks, c); }));
        for (int c = 0; c < cfg.num_chains; ++c) chains[c] = futures[c].get();
    } else {
        for (int c = 0; c < cfg.num_chains; ++c) chains[c] = detail::run_chain(model, cfg, blocks, c);
    }
    return chains;
}

inline std::vector<std::size_t> all_indices(std::size_t dim)
{
    std::vector<std::size_t> idx(dim);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

/// Gaussian random-walk Metropolis with fixed per-coordinate scales.
inline Chains sample_rwmh(const ProbModel& model, const McmcConfig& cfg, std::vector<double> proposal_scale)
{
    return sample_gibbs_hybrid(model, cfg, {Block{all_indices(model.dim), KernelKind::rwmh, std::move(proposal_scale), false}});
}

/// Metropolis-corrected HMC over all parameters.
inline Chains sample_hmc(const ProbModel& model, const McmcConfig& cfg)
{
    return sample_gibbs_hybrid(model, cfg, {Block{all_indices(model.dim), KernelKind::hmc, {}, false}});
}

/// All chains stacked, one column per constrained parameter.
inline Matrix pooled_draws(const Chains& chains)
{
    Eigen::Index rows = 0;
    for (const auto& c : chains) rows += c.num_draws();
    Matrix out(rows, chains.empty() ? 0 : chains.front().dim());
    Eigen::Index r = 0;
    for (const auto& c : chains) {
        out.middleRows(r, c.num_draws()) = c.draws;
        r += c.num_draws();
    }
    return out;
}

inline void write_chains_csv(std::ostream& out, const Chains& chains)
{
    if (chains.empty()) return;
    out << "chain,draw";
    for (const auto& n : chains.front().names) out << ',' << n;
    out << '\n';
    out.precision(12);
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (Eigen::Index i = 0; i < chains[c].num_draws(); ++i) {
            out << c << ',' << i;
            for (Eigen::Index k = 0; k < chains[c].dim(); ++k) out << ',' << chains[c].draws(i, k);
            out << '\n';
        }
}

} // namespace ppl::mcmc
