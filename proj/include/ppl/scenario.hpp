#pragma once

// Scenario runner (SEIRD + schedule + loss) and exhaustive schedule search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ppl/econ.hpp"
#include "ppl/error.hpp"
#include "ppl/policy.hpp"
#include "ppl/seird.hpp"

namespace ppl {

struct Scenario {
    double n = 1e6;
    int horizon = 90;
    double seed_infected = 8'000; // placed in I on day 0
    double seed_exposed = 0;
    SeirdParams params = SeirdParams::from_times(2.64, 16.33, 5.27, 0.025, 1e6);
    std::optional<IcuModel> icu = IcuModel{};
    EconParams econ;
    PolicyCatalog catalog = default_catalog();
    PolicySchedule schedule;
    int substeps = kDefaultSubsteps;

    void validate() const
    {
        if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
        if (!(n > 0)) throw Error(ErrorCode::InvalidArgument, "population must be positive");
        if (!(seed_infected >= 0 && seed_exposed >= 0 && seed_infected + seed_exposed < n))
            throw Error(ErrorCode::InvalidArgument, "seeds must be nonnegative and below the population");
        params.validate();
        if (icu) icu->validate();
        econ.validate();
        require_valid(schedule, horizon);
    }
};

struct ScenarioResult {
    std::string label;
    Trajectory trajectory;
    LossBreakdown loss;
};

inline ScenarioResult run_scenario(const Scenario& s, std::string label = {})
{
    s.validate();
    SeirdParams p = s.params;
    p.n = s.n;
    const auto re = re_schedule(p.r0, s.schedule, s.horizon, s.catalog);
    const auto init = SeirdState::seeded(s.n, s.seed_exposed, s.seed_infected);
    ScenarioResult out;
    out.label = std::move(label);
    out.trajectory = simulate(init, p, [&re](int day) { return re[day]; }, s.icu, s.horizon, s.substeps);
    out.loss = accumulate(out.trajectory, s.schedule, s.econ, s.n);
    return out;
}

struct Preset {
    std::string key;
    std::string label;
    PolicySchedule schedule;
};

/// The six reference rows: no policy, single policies held for the whole
/// horizon, and tracing with distancing plus masks in the first block.
inline std::vector<Preset> presets(int horizon = 90, int blocks = 3)
{
    const int len = (horizon + blocks - 1) / blocks;
    using A = Assignment;
    auto opt = PolicySchedule::uniform(horizon, len, {A{PolicyId::tracing_distancing, 1.0}});
    opt.blocks.front().policies.push_back(A{PolicyId::masks_hygiene, 1.0});
    return {
        {"none", "No policy", PolicySchedule{}},
        {"masks", "Masks and hygiene", PolicySchedule::uniform(horizon, len, {A{PolicyId::masks_hygiene, 1.0}})},
        {"distancing", "Social distancing", PolicySchedule::uniform(horizon, len, {A{PolicyId::distancing, 1.0}})},
        {"lockdown", "Lockdown", PolicySchedule::uniform(horizon, len, {A{PolicyId::lockdown, 1.0}})},
        {"tracing_distancing", "Contact tracing and distancing",
         PolicySchedule::uniform(horizon, len, {A{PolicyId::tracing_distancing, 1.0}})},
        {"optimal", "Optimal policy", opt},
    };
}

struct SearchSpace {
    int block_length = 30;
    std::vector<PolicyId> policies{PolicyId::lockdown, PolicyId::distancing, PolicyId::tracing_distancing,
                                   PolicyId::masks_hygiene};
    std::vector<double> levels{kIntensityLevels.begin(), kIntensityLevels.end()};
    std::uint64_t cap = 2'000'000;
};

/// Valid assignments for one block, in lexicographic order of the level
/// indices (first policy most significant). Zero intensities are omitted.
inline std::vector<std::vector<Assignment>> feasible_block_assignments(const SearchSpace& space)
{
    std::vector<std::vector<Assignment>> out;
    const std::size_t k = space.policies.size();
    std::vector<std::size_t> idx(k, 0);
    while (true) {
        std::vector<Assignment> a;
        for (std::size_t j = 0; j < k; ++j)
            if (space.levels[idx[j]] > 0) a.push_back({space.policies[j], space.levels[idx[j]]});
        if (validate_schedule(PolicySchedule{{PolicyBlock{0, 1, a}}}, 1).empty()) out.push_back(std::move(a));
        std::size_t j = k;
        while (j > 0 && ++idx[j - 1] == space.levels.size()) idx[--j] = 0;
        if (j == 0) break;
    }
    return out;
}

inline int num_blocks(const SearchSpace& space, int horizon)
{
    if (space.block_length < 1 || horizon % space.block_length != 0)
        throw Error(ErrorCode::InvalidArgument, "block_length must divide the horizon");
    return horizon / space.block_length;
}

/// feasible^blocks, or nullopt when it does not fit in 64 bits.
inline std::optional<std::uint64_t> count_schedules(std::uint64_t feasible, int blocks)
{
    std::uint64_t total = 1;
    for (int b = 0; b < blocks; ++b) {
        if (feasible != 0 && total > UINT64_MAX / feasible) return std::nullopt;
        total *= feasible;
    }
    return total;
}

struct SearchEntry {
    std::vector<int> choice; // per-block index into the feasible assignments
    PolicySchedule schedule;
    double total_cases = 0;
    double total_deaths = 0;
    double total_loss = 0;
};

struct SearchResult {
    std::uint64_t evaluated = 0;
    std::uint64_t feasible_per_block = 0;
    std::vector<SearchEntry> ranked; // ascending loss
};

inline std::string encode_block(const std::vector<Assignment>& a)
{
    if (a.empty()) return "none";
    std::string s;
    for (const auto& x : a) {
        if (!s.empty()) s += '+';
        s += std::string(to_string(x.id)) + '@' + (x.intensity == 1.0 ? "1" : x.intensity == 0.5 ? "0.5" : std::to_string(x.intensity));
    }
    return s;
}

/// Blocks joined with '|', e.g. "tracing_distancing@1+masks_hygiene@1|tracing_distancing@1|none".
inline std::string encode_schedule(const PolicySchedule& s)
{
    std::string out;
    for (std::size_t k = 0; k < s.blocks.size(); ++k) out += (k ? "|" : "") + encode_block(s.blocks[k].policies);
    return out;
}

/// Runs every feasible schedule of `space` on top of `base` and ranks by
/// total loss, ties broken by the block choice vector. `threads` = 0 uses
/// the hardware concurrency; 1 runs sequentially. Each shard owns a
/// contiguous range of schedule indices and its own result vector.
inline SearchResult search_policies(const SearchSpace& space, const Scenario& base, unsigned threads = 0)
{
    const int blocks = num_blocks(space, base.horizon);
    const auto feasible = feasible_block_assignments(space);
    const auto count = count_schedules(feasible.size(), blocks);
    if (!count || *count > space.cap)
        throw Error(ErrorCode::SpaceTooLarge, "search space exceeds cap of " + std::to_string(space.cap));

    auto decode = [&](std::uint64_t index) {
        std::vector<int> choice(static_cast<std::size_t>(blocks));
        for (int b = blocks - 1; b >= 0; --b) {
            choice[b] = static_cast<int>(index % feasible.size());
            index /= feasible.size();
        }
        return choice;
    };
    auto evaluate = [&](std::uint64_t first, std::uint64_t last) {
        std::vector<SearchEntry> out;
        out.reserve(last - first);
        Scenario s = base;
        for (std::uint64_t i = first; i < last; ++i) {
            SearchEntry e;
            e.choice = decode(i);
            for (int b = 0; b < blocks; ++b)
                e.schedule.blocks.push_back(
                    {b * space.block_length, (b + 1) * space.block_length, feasible[e.choice[b]]});
            s.schedule = e.schedule;
            const auto r = run_scenario(s);
            e.total_cases = r.loss.total_cases;
            e.total_deaths = r.loss.total_deaths;
            e.total_loss = r.loss.total();
            out.push_back(std::move(e));
        }
        return out;
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    const std::uint64_t total = *count;
    const std::uint64_t shards = std::min<std::uint64_t>(threads, std::max<std::uint64_t>(total, 1));
    std::vector<std::future<std::vector<SearchEntry>>> jobs;
    for (std::uint64_t k = 0; k < shards; ++k) {
        const std::uint64_t first = total * k / shards, last = total * (k + 1) / shards;
        jobs.push_back(std::async(shards > 1 ? std::launch::async : std::launch::deferred, evaluate, first, last));
    }
    SearchResult result;
    result.feasible_per_block = feasible.size();
    for (auto& j : jobs) {
        auto part = j.get();
        std::move(part.begin(), part.end(), std::back_inserter(result.ranked));
    }
    result.evaluated = result.ranked.size();
    std::sort(result.ranked.begin(), result.ranked.end(), [](const SearchEntry& a, const SearchEntry& b) {
        return a.total_loss != b.total_loss ? a.total_loss < b.total_loss : a.choice < b.choice;
    });
    return result;
}

inline void write_search_csv(std::ostream& out, const SearchResult& r, std::size_t limit = SIZE_MAX)
{
    out << "rank,schedule,total_cases,total_deaths,total_loss\n";
    out.precision(12);
    for (std::size_t k = 0; k < r.ranked.size() && k < limit; ++k) {
        const auto& e = r.ranked[k];
        out << k + 1 << ',' << encode_schedule(e.schedule) << ',' << e.total_cases << ',' << e.total_deaths << ','
            << e.total_loss << '\n';
    }
}

} // namespace ppl
