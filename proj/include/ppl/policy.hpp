#pragma once

// Intervention catalog, block schedules and their composition into a daily
// effective reproduction number.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ppl/error.hpp"

namespace ppl {

enum class PolicyId { lockdown, distancing, tracing_distancing, masks_hygiene, vaccine };

inline constexpr std::array kAllPolicies{PolicyId::lockdown, PolicyId::distancing, PolicyId::tracing_distancing,
                                         PolicyId::masks_hygiene, PolicyId::vaccine};

constexpr std::string_view to_string(PolicyId id) noexcept
{
    switch (id) {
    case PolicyId::lockdown: return "lockdown";
    case PolicyId::distancing: return "distancing";
    case PolicyId::tracing_distancing: return "tracing_distancing";
    case PolicyId::masks_hygiene: return "masks_hygiene";
    case PolicyId::vaccine: return "vaccine";
    }
    return "unknown";
}

inline std::optional<PolicyId> parse_policy_id(std::string_view s)
{
    for (auto id : kAllPolicies)
        if (to_string(id) == s) return id;
    if (s == "masks") return PolicyId::masks_hygiene;
    return std::nullopt;
}

enum class CostKind { gdp_fraction_per_year, per_capita_per_day, none };

constexpr std::string_view to_string(CostKind k) noexcept
{
    switch (k) {
    case CostKind::gdp_fraction_per_year: return "gdp_fraction_per_year";
    case CostKind::per_capita_per_day: return "per_capita_per_day";
    case CostKind::none: return "none";
    }
    return "unknown";
}

struct PolicyDef {
    PolicyId id = PolicyId::lockdown;
    double efficiency = 0;   // fractional reduction of R_e at full intensity
    CostKind cost_kind = CostKind::none;
    bool searchable = true;  // part of the default search space
    int lag_days = 0;        // delay between activation and effect on R_e
};

struct PolicyCatalog {
    std::vector<PolicyDef> policies;

    [[nodiscard]] const PolicyDef& at(PolicyId id) const
    {
        for (const auto& p : policies)
            if (p.id == id) return p;
        throw Error(ErrorCode::InvalidArgument, "policy not in catalog: " + std::string(to_string(id)));
    }
    PolicyDef& at(PolicyId id) { return const_cast<PolicyDef&>(std::as_const(*this).at(id)); }

    [[nodiscard]] std::vector<PolicyId> searchable() const
    {
        std::vector<PolicyId> out;
        for (const auto& p : policies)
            if (p.searchable) out.push_back(p.id);
        return out;
    }
};

/// Category averages of the per-country change-point efficiencies.
inline PolicyCatalog default_catalog()
{
    return PolicyCatalog{{
        {PolicyId::lockdown, 0.96, CostKind::gdp_fraction_per_year, true, 0},
        {PolicyId::distancing, 0.74, CostKind::gdp_fraction_per_year, true, 0},
        {PolicyId::tracing_distancing, 0.96, CostKind::gdp_fraction_per_year, true, 0},
        {PolicyId::masks_hygiene, 0.30, CostKind::per_capita_per_day, true, 0},
        {PolicyId::vaccine, 0.81, CostKind::none, false, 0},
    }};
}

inline constexpr std::array kIntensityLevels{0.0, 0.5, 1.0};

struct Assignment {
    PolicyId id = PolicyId::lockdown;
    double intensity = 1.0;

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Half-open day range [start, end).
struct PolicyBlock {
    int start = 0;
    int end = 0;
    std::vector<Assignment> policies;

    [[nodiscard]] double intensity(PolicyId id) const
    {
        double x = 0;
        for (const auto& a : policies)
            if (a.id == id) x = std::max(x, a.intensity);
        return x;
    }

    friend bool operator==(const PolicyBlock&, const PolicyBlock&) = default;
};

struct PolicySchedule {
    std::vector<PolicyBlock> blocks;

    /// Assignments in force on `day` (zero intensities dropped).
    [[nodiscard]] std::vector<Assignment> active_on(int day) const
    {
        std::vector<Assignment> out;
        for (const auto& b : blocks)
            if (day >= b.start && day < b.end)
                for (const auto& a : b.policies)
                    if (a.intensity > 0) out.push_back(a);
        return out;
    }

    /// Same blocks applied for the whole horizon split into equal parts.
    static PolicySchedule uniform(int horizon, int block_length, const std::vector<Assignment>& policies)
    {
        PolicySchedule s;
        for (int start = 0; start < horizon; start += block_length)
            s.blocks.push_back({start, std::min(horizon, start + block_length), policies});
        return s;
    }

    friend bool operator==(const PolicySchedule&, const PolicySchedule&) = default;
};

struct Violation {
    std::string rule;
    int block = -1; // index into schedule.blocks, -1 when not block-specific
    std::string message;
};

/// Every rule broken by `schedule`; empty means valid.
inline std::vector<Violation> validate_schedule(const PolicySchedule& schedule, int horizon)
{
    std::vector<Violation> out;
    const auto& blocks = schedule.blocks;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& b = blocks[k];
        const int idx = static_cast<int>(k);
        if (b.start < 0 || b.end > horizon || b.start >= b.end)
            out.push_back({"block_out_of_range", idx,
                           "block [" + std::to_string(b.start) + ", " + std::to_string(b.end) +
                               ") is empty or outside [0, " + std::to_string(horizon) + ")"});
        for (std::size_t j = 0; j < b.policies.size(); ++j) {
            const auto& a = b.policies[j];
            if (std::find(kIntensityLevels.begin(), kIntensityLevels.end(), a.intensity) == kIntensityLevels.end())
                out.push_back({"intensity_level", idx,
                               std::string(to_string(a.id)) + " intensity must be 0, 0.5 or 1"});
            for (std::size_t i = 0; i < j; ++i)
                if (b.policies[i].id == a.id)
                    out.push_back({"duplicate_policy", idx, std::string(to_string(a.id)) + " listed twice"});
        }
        if (b.intensity(PolicyId::lockdown) > 0 && b.intensity(PolicyId::distancing) > 0)
            out.push_back({"lockdown_with_distancing", idx, "lockdown already includes distancing"});
        if (b.intensity(PolicyId::tracing_distancing) > 0 && b.intensity(PolicyId::distancing) > 0)
            out.push_back({"tracing_with_distancing", idx, "tracing_distancing already includes distancing"});
        for (std::size_t j = 0; j < k; ++j)
            if (b.start < blocks[j].end && blocks[j].start < b.end)
                out.push_back({"overlapping_blocks", idx, "overlaps block " + std::to_string(j)});
    }
    return out;
}

inline void require_valid(const PolicySchedule& schedule, int horizon)
{
    const auto v = validate_schedule(schedule, horizon);
    if (v.empty()) return;
    std::string msg;
    for (const auto& x : v) msg += (msg.empty() ? "" : "; ") + x.rule + ": " + x.message;
    throw Error(ErrorCode::InvalidSchedule, msg);
}

/// r0 times the residual transmission of each active policy. Factors are
/// multiplied in a canonical order so permuting `active` is bit-exact.
inline double compose_re(double r0, const PolicyCatalog& catalog, std::vector<Assignment> active)
{
    std::sort(active.begin(), active.end(), [](const Assignment& a, const Assignment& b) {
        return a.id != b.id ? a.id < b.id : a.intensity < b.intensity;
    });
    double re = r0;
    for (const auto& a : active) re *= 1.0 - a.intensity * catalog.at(a.id).efficiency;
    return re;
}

/// Assignments acting on transmission on `day`. A policy with lag L
/// activated on [start, end) acts over [start + L, end + L).
inline std::vector<Assignment> effective_on(const PolicySchedule& schedule, int day, const PolicyCatalog& catalog)
{
    std::vector<Assignment> out;
    for (const auto& b : schedule.blocks)
        for (const auto& a : b.policies) {
            if (a.intensity <= 0) continue;
            const int lag = catalog.at(a.id).lag_days;
            if (day >= b.start + lag && day < b.end + lag) out.push_back(a);
        }
    return out;
}

/// Daily R_e for days 0..horizon-1; r0 where nothing is in force.
inline std::vector<double> re_schedule(double r0, const PolicySchedule& schedule, int horizon,
                                       const PolicyCatalog& catalog = default_catalog())
{
    require_valid(schedule, horizon);
    std::vector<double> re(static_cast<std::size_t>(horizon));
    for (int d = 0; d < horizon; ++d) re[d] = compose_re(r0, catalog, effective_on(schedule, d, catalog));
    return re;
}

} // namespace ppl
