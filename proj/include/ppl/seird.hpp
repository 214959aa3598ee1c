#pragma once

// Deterministic SEIRD compartmental dynamics with daily stepping.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <type_traits>
#include <optional>
#include <ostream>
#include <vector>

#include "ppl/error.hpp"

namespace ppl {

struct SeirdParams {
    double r0 = 2.64;
    double gamma = 1.0 / 16.33; // per day, 1 / recovery time
    double sigma = 1.0 / 5.27;  // per day, 1 / incubation time
    double mu = 0.025;          // case-fatality proportion
    double alpha = 0.0;         // immunity waning per day
    double n = 1e6;

    static SeirdParams from_times(double r0, double recovery_days, double incubation_days, double mu, double n)
    {
        return SeirdParams{r0, 1.0 / recovery_days, 1.0 / incubation_days, mu, 0.0, n};
    }

    [[nodiscard]] double recovery_days() const { return 1.0 / gamma; }
    [[nodiscard]] double incubation_days() const { return 1.0 / sigma; }

    void validate() const
    {
        if (!(r0 >= 0 && gamma >= 0 && sigma >= 0 && alpha >= 0))
            throw Error(ErrorCode::InvalidArgument, "SEIRD rates must be nonnegative");
        if (!(mu >= 0 && mu <= 1)) throw Error(ErrorCode::InvalidArgument, "mu must lie in [0, 1]");
        if (!(n > 0)) throw Error(ErrorCode::InvalidArgument, "population must be positive");
    }
};

struct SeirdState {
    double s = 0;
    double e = 0;
    double i = 0;
    double r = 0;
    double d = 0;

    [[nodiscard]] double total() const { return s + e + i + r + d; }
    [[nodiscard]] bool finite() const
    {
        return std::isfinite(s) && std::isfinite(e) && std::isfinite(i) && std::isfinite(r) && std::isfinite(d);
    }

    /// Everyone susceptible except `exposed` and `infectious` seeds.
    static SeirdState seeded(double n, double exposed, double infectious)
    {
        return SeirdState{n - exposed - infectious, exposed, infectious, 0.0, 0.0};
    }

    friend bool operator==(const SeirdState&, const SeirdState&) = default;
};

/// Transition quantities for one step (persons).
struct SeirdFlows {
    double new_exposed = 0;    // S -> E
    double new_infectious = 0; // E -> I
    double new_recovered = 0;  // I -> R
    double new_deaths = 0;     // I -> D
    double waned = 0;          // R -> S

    SeirdFlows& operator+=(const SeirdFlows& o)
    {
        new_exposed += o.new_exposed;
        new_infectious += o.new_infectious;
        new_recovered += o.new_recovered;
        new_deaths += o.new_deaths;
        waned += o.waned;
        return *this;
    }
};

struct IcuModel {
    double icu_fraction = 0.06;
    double icu_beds_per_capita = 0.0006;
    double fatality_treated = 0.6;
    double fatality_untreated = 1.0;

    void validate() const
    {
        for (double v : {icu_fraction, icu_beds_per_capita, fatality_treated, fatality_untreated})
            if (!(v >= 0 && v <= 1)) throw Error(ErrorCode::InvalidArgument, "ICU model fields must lie in [0, 1]");
    }
};

struct Trajectory {
    std::vector<SeirdState> states; // horizon + 1
    std::vector<SeirdFlows> flows;  // horizon
    std::vector<double> re;         // horizon
    std::vector<double> mu_eff;     // horizon

    [[nodiscard]] int horizon() const { return static_cast<int>(flows.size()); }

    /// Initial infected plus every S -> E transition so far.
    [[nodiscard]] double cumulative_cases() const
    {
        if (states.empty()) return 0.0;
        double total = states.front().e + states.front().i;
        for (const auto& f : flows) total += f.new_exposed;
        return total;
    }
};

struct StepResult {
    SeirdState state;
    SeirdFlows flows;
};

/// One forward-Euler step. Flows are limited by the occupancy of their source
/// compartment, so compartments stay nonnegative and the total is conserved.
inline StepResult step(const SeirdState& x, const SeirdParams& p, double re, double mu_eff, double dt)
{
    if (!(re >= 0)) throw Error(ErrorCode::InvalidArgument, "effective reproduction number must be >= 0");
    if (!(dt > 0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");

    SeirdFlows f;
    f.new_exposed = std::min(x.s, re * p.gamma * x.s * x.i / p.n * dt);
    f.new_infectious = std::min(x.e, p.sigma * x.e * dt);
    const double concluded = std::min(x.i, p.gamma * x.i * dt);
    f.new_deaths = mu_eff * concluded;
    f.new_recovered = concluded - f.new_deaths;
    f.waned = std::min(x.r, p.alpha * x.r * dt);

    SeirdState next{
        x.s - f.new_exposed + f.waned,
        x.e + f.new_exposed - f.new_infectious,
        x.i + f.new_infectious - concluded,
        x.r + f.new_recovered - f.waned,
        x.d + f.new_deaths,
    };
    if (!next.finite()) throw Error(ErrorCode::NonFiniteState, "compartment became NaN or infinite");
    next.s = std::max(0.0, next.s);
    next.e = std::max(0.0, next.e);
    next.i = std::max(0.0, next.i);
    next.r = std::max(0.0, next.r);
    return {next, f};
}

/// Case fatality when ICU demand may exceed capacity: the untreated share of
/// ICU-requiring cases dies at the untreated rate.
inline double effective_mortality(double infectious, const SeirdParams& p, const IcuModel& icu)
{
    const double demand = icu.icu_fraction * infectious;
    const double capacity = icu.icu_beds_per_capita * p.n;
    const double treated = demand > 0 ? std::min(1.0, capacity / demand) : 1.0;
    return icu.icu_fraction * (treated * icu.fatality_treated + (1.0 - treated) * icu.fatality_untreated);
}

/// Euler substeps per simulated day. With one step per day, halving the step
/// moves day-90 compartments of the reference scenario by more than 1%.
inline constexpr int kDefaultSubsteps = 8;

template <typename F>
concept DailyRate = std::invocable<F, int> && std::convertible_to<std::invoke_result_t<F, int>, double>;

/// Daily simulation; each day is integrated with `substeps` equal Euler
/// steps and reported as one aggregated set of flows.
template <DailyRate ReOfDay>
Trajectory simulate(const SeirdState& init, const SeirdParams& params, ReOfDay&& re_of_day,
                    const std::optional<IcuModel>& icu, int horizon, int substeps = kDefaultSubsteps)
{
    if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
    if (substeps < 1) throw Error(ErrorCode::InvalidArgument, "substeps must be >= 1");
    params.validate();

    Trajectory out;
    out.states.reserve(horizon + 1);
    out.flows.reserve(horizon);
    out.re.reserve(horizon);
    out.mu_eff.reserve(horizon);
    out.states.push_back(init);

    const double dt = 1.0 / substeps;
    SeirdState x = init;
    for (int day = 0; day < horizon; ++day) {
        const double re = static_cast<double>(re_of_day(day));
        SeirdFlows daily;
        double mu_day = 0.0;
        for (int k = 0; k < substeps; ++k) {
            const double mu = icu ? effective_mortality(x.i, params, *icu) : params.mu;
            mu_day += mu / substeps;
            auto [next, f] = step(x, params, re, mu, dt);
            x = next;
            daily += f;
        }
        out.states.push_back(x);
        out.flows.push_back(daily);
        out.re.push_back(re);
        out.mu_eff.push_back(mu_day);
    }
    return out;
}

/// Constant effective reproduction number.
inline Trajectory simulate_constant(const SeirdState& init, const SeirdParams& params, double re,
                                    const std::optional<IcuModel>& icu, int horizon, int substeps = kDefaultSubsteps)
{
    return simulate(init, params, [re](int) { return re; }, icu, horizon, substeps);
}

/// CSV with one row per day. Flow and Re columns describe the transitions
/// during that day; the final row carries the end state only.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj)
{
    out << "day,S,E,I,R,D,new_cases,new_deaths,Re\n";
    out.precision(10);
    for (std::size_t d = 0; d < traj.states.size(); ++d) {
        const auto& x = traj.states[d];
        out << d << ',' << x.s << ',' << x.e << ',' << x.i << ',' << x.r << ',' << x.d << ',';
        if (d < traj.flows.size())
            out << traj.flows[d].new_infectious << ',' << traj.flows[d].new_deaths << ',' << traj.re[d];
        else
            out << ",,";
        out << '\n';
    }
}

} // namespace ppl
