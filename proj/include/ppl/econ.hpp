#pragma once

// Dollar loss of a simulated epidemic: policy running costs, treatment of
// active infections, contact tracing per new case, and deaths.

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "ppl/error.hpp"
#include "ppl/policy.hpp"
#include "ppl/seird.hpp"

namespace ppl {

struct EconParams {
    double gdp_per_capita = 30'000;      // $/person/year
    double lockdown_gdp_frac = 0.10;     // per year
    double distancing_gdp_frac = 0.05;   // per year
    double tracing_gdp_frac = 0.05;      // per year, the distancing part of tracing_distancing
    double masks_cost = 2;               // $/person/day
    double infection_cost = 300;         // $/active infection/day
    double tracing_cost = 6'400;         // $/new case
    double death_cost = 7'000'000;       // $/death
    double days_per_year = 365;

    void validate() const
    {
        for (double v : {gdp_per_capita, lockdown_gdp_frac, distancing_gdp_frac, tracing_gdp_frac, masks_cost,
                         infection_cost, tracing_cost, death_cost})
            if (!(v >= 0)) throw Error(ErrorCode::InvalidArgument, "economic parameters must be nonnegative");
        if (!(days_per_year > 0)) throw Error(ErrorCode::InvalidArgument, "days_per_year must be positive");
    }
};

/// Running cost of one day of `active` policies, excluding tracing's per-case part.
inline double daily_policy_cost(const std::vector<Assignment>& active, const EconParams& econ, double n)
{
    const double gdp_day = econ.gdp_per_capita * n / econ.days_per_year;
    double total = 0;
    for (const auto& a : active) {
        switch (a.id) {
        case PolicyId::lockdown: total += a.intensity * econ.lockdown_gdp_frac * gdp_day; break;
        case PolicyId::distancing: total += a.intensity * econ.distancing_gdp_frac * gdp_day; break;
        case PolicyId::tracing_distancing: total += a.intensity * econ.tracing_gdp_frac * gdp_day; break;
        case PolicyId::masks_hygiene: total += a.intensity * econ.masks_cost * n; break;
        case PolicyId::vaccine: break;
        }
    }
    return total;
}

struct EpidemicCost {
    double infection = 0;
    double tracing = 0;
    double death = 0;
};

inline EpidemicCost daily_epidemic_cost(double infectious, double new_cases, double new_deaths,
                                        double tracing_intensity, const EconParams& econ)
{
    return {econ.infection_cost * infectious, econ.tracing_cost * new_cases * tracing_intensity,
            econ.death_cost * new_deaths};
}

struct DailyLoss {
    double policy = 0;
    double infection = 0;
    double tracing = 0;
    double death = 0;

    [[nodiscard]] double total() const { return policy + infection + tracing + death; }

    DailyLoss& operator+=(const DailyLoss& o)
    {
        policy += o.policy;
        infection += o.infection;
        tracing += o.tracing;
        death += o.death;
        return *this;
    }
};

struct LossBreakdown {
    std::vector<DailyLoss> daily;
    DailyLoss totals;
    double total_cases = 0;
    double total_deaths = 0;

    [[nodiscard]] double total() const { return totals.total(); }

    /// Sum over days [first, last).
    [[nodiscard]] DailyLoss range(std::size_t first, std::size_t last) const
    {
        DailyLoss out;
        for (std::size_t d = first; d < last && d < daily.size(); ++d) out += daily[d];
        return out;
    }

    [[nodiscard]] std::vector<double> cumulative() const
    {
        std::vector<double> out;
        double running = 0;
        for (const auto& d : daily) out.push_back(running += d.total());
        return out;
    }
};

/// Per-day loss along `traj`. Policy costs follow the schedule as written
/// (lags only delay the effect, not the bill). Infection cost is charged on
/// the day-start I occupancy, tracing on the day's E -> I flow.
inline LossBreakdown accumulate(const Trajectory& traj, const PolicySchedule& schedule, const EconParams& econ,
                                double n)
{
    econ.validate();
    const int horizon = traj.horizon();
    for (const auto& b : schedule.blocks)
        if (b.end > horizon)
            throw Error(ErrorCode::HorizonMismatch, "schedule block ends on day " + std::to_string(b.end) +
                                                        " beyond trajectory horizon " + std::to_string(horizon));
    LossBreakdown out;
    out.daily.reserve(static_cast<std::size_t>(horizon));
    for (int day = 0; day < horizon; ++day) {
        const auto active = schedule.active_on(day);
        double tracing = 0;
        for (const auto& a : active)
            if (a.id == PolicyId::tracing_distancing) tracing = std::max(tracing, a.intensity);
        const auto& flow = traj.flows[day];
        const auto epi = daily_epidemic_cost(traj.states[day].i, flow.new_infectious, flow.new_deaths, tracing, econ);
        DailyLoss d{daily_policy_cost(active, econ, n), epi.infection, epi.tracing, epi.death};
        out.daily.push_back(d);
        out.totals += d;
    }
    out.total_cases = traj.cumulative_cases();
    out.total_deaths = traj.states.back().d;
    return out;
}

inline void write_loss_csv(std::ostream& out, const LossBreakdown& loss)
{
    out << "day,policy,infection,tracing,death,total,cumulative\n";
    out.precision(12);
    double running = 0;
    for (std::size_t d = 0; d < loss.daily.size(); ++d) {
        const auto& x = loss.daily[d];
        running += x.total();
        out << d << ',' << x.policy << ',' << x.infection << ',' << x.tracing << ',' << x.death << ',' << x.total()
            << ',' << running << '\n';
    }
}

} // namespace ppl
