#pragma once

// JSON shapes shared by the HTTP service and the command-line tool.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppl/changepoint.hpp"
#include "ppl/scenario.hpp"
#include "ppl/seird_inference.hpp"

namespace ppl {

using Json = nlohmann::json;

/// Request body that could not be turned into a valid input; carries every
/// problem found so clients can show them all at once.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> v)
        : Error(ErrorCode::InvalidArgument, join(v)), violations_(std::move(v))
    {
    }
    [[nodiscard]] const std::vector<Violation>& violations() const { return violations_; }

private:
    static std::string join(const std::vector<Violation>& v)
    {
        std::string msg;
        for (const auto& x : v) msg += (msg.empty() ? "" : "; ") + x.rule + ": " + x.message;
        return msg;
    }
    std::vector<Violation> violations_;
};

inline Json to_json(const Violation& v) { return {{"rule", v.rule}, {"block", v.block}, {"message", v.message}}; }

inline Json to_json(const std::vector<Violation>& v)
{
    Json out = Json::array();
    for (const auto& x : v) out.push_back(to_json(x));
    return out;
}

inline Json to_json(const mcmc::Summary& s)
{
    return {{"mean", s.mean}, {"sd", s.sd}, {"lower", s.lower}, {"upper", s.upper}};
}

// ---------------------------------------------------------------- schedules

inline Json to_json(const PolicySchedule& s)
{
    Json blocks = Json::array();
    for (const auto& b : s.blocks) {
        Json policies = Json::array();
        for (const auto& a : b.policies) policies.push_back({{"id", to_string(a.id)}, {"intensity", a.intensity}});
        blocks.push_back({{"start", b.start}, {"end", b.end}, {"policies", policies}});
    }
    return {{"blocks", blocks}};
}

namespace detail {

inline Violation bad_request(std::string message, int block = -1)
{
    return {"bad_request", block, std::move(message)};
}

template <typename T>
bool read_field(const Json& obj, const char* key, T& out, std::vector<Violation>& errors, int block = -1)
{
    if (!obj.contains(key)) return false;
    try {
        out = obj.at(key).get<T>();
        return true;
    } catch (const Json::exception&) {
        errors.push_back(bad_request(std::string("field '") + key + "' has the wrong type", block));
        return false;
    }
}

} // namespace detail

/// Structural problems go to `errors`; rule checks are left to validate_schedule.
inline PolicySchedule schedule_from_json(const Json& j, std::vector<Violation>& errors)
{
    PolicySchedule s;
    if (j.is_null()) return s;
    if (!j.is_object() || !j.contains("blocks") || !j.at("blocks").is_array()) {
        errors.push_back(detail::bad_request("schedule must be an object with a 'blocks' array"));
        return s;
    }
    int idx = 0;
    for (const auto& jb : j.at("blocks")) {
        PolicyBlock b;
        if (!jb.is_object()) {
            errors.push_back(detail::bad_request("block must be an object", idx));
        } else {
            if (!jb.contains("start") || !jb.contains("end"))
                errors.push_back(detail::bad_request("block needs integer 'start' and 'end'", idx));
            detail::read_field(jb, "start", b.start, errors, idx);
            detail::read_field(jb, "end", b.end, errors, idx);
            if (jb.contains("policies") && !jb.at("policies").is_array())
                errors.push_back(detail::bad_request("'policies' must be an array", idx));
            else if (jb.contains("policies"))
                for (const auto& ja : jb.at("policies")) {
                    std::string id;
                    Assignment a;
                    if (!ja.is_object() || !detail::read_field(ja, "id", id, errors, idx)) {
                        errors.push_back(detail::bad_request("policy entry needs a string 'id'", idx));
                        continue;
                    }
                    const auto pid = parse_policy_id(id);
                    if (!pid) {
                        errors.push_back({"unknown_policy", idx, "unknown policy id '" + id + "'"});
                        continue;
                    }
                    a.id = *pid;
                    detail::read_field(ja, "intensity", a.intensity, errors, idx);
                    b.policies.push_back(a);
                }
        }
        s.blocks.push_back(std::move(b));
        ++idx;
    }
    return s;
}

// ---------------------------------------------------------------- scenarios

/// Scenario from a request body. Omitted fields keep the library defaults.
/// Throws ValidationError listing every structural and schedule problem.
inline Scenario scenario_from_json(const Json& j, Scenario s = {})
{
    std::vector<Violation> errors;
    if (!j.is_object()) throw ValidationError({detail::bad_request("request body must be a JSON object")});
    using detail::read_field;
    read_field(j, "population", s.n, errors);
    read_field(j, "horizon", s.horizon, errors);
    read_field(j, "seed_infected", s.seed_infected, errors);
    read_field(j, "seed_exposed", s.seed_exposed, errors);
    read_field(j, "substeps", s.substeps, errors);
    read_field(j, "gdp_per_capita", s.econ.gdp_per_capita, errors);

    double r0 = s.params.r0, rec = s.params.recovery_days(), inc = s.params.incubation_days(), mu = s.params.mu,
           alpha = s.params.alpha;
    if (j.contains("params")) {
        const auto& p = j.at("params");
        read_field(p, "r0", r0, errors);
        read_field(p, "recovery_time", rec, errors);
        read_field(p, "incubation_time", inc, errors);
        read_field(p, "mu", mu, errors);
        read_field(p, "alpha", alpha, errors);
    }
    if (!(rec > 0 && inc > 0)) errors.push_back({"invalid_params", -1, "recovery_time and incubation_time must be > 0"});
    s.params = SeirdParams::from_times(r0, rec, inc, mu, s.n);
    s.params.alpha = alpha;

    if (j.contains("icu")) {
        const auto& p = j.at("icu");
        bool enabled = s.icu.has_value();
        read_field(p, "enabled", enabled, errors);
        IcuModel icu = s.icu.value_or(IcuModel{});
        read_field(p, "icu_fraction", icu.icu_fraction, errors);
        read_field(p, "icu_beds_per_capita", icu.icu_beds_per_capita, errors);
        read_field(p, "fatality_treated", icu.fatality_treated, errors);
        read_field(p, "fatality_untreated", icu.fatality_untreated, errors);
        s.icu = enabled ? std::optional<IcuModel>(icu) : std::nullopt;
    }
    if (j.contains("econ")) {
        const auto& p = j.at("econ");
        auto& e = s.econ;
        read_field(p, "gdp_per_capita", e.gdp_per_capita, errors);
        read_field(p, "lockdown_gdp_frac", e.lockdown_gdp_frac, errors);
        read_field(p, "distancing_gdp_frac", e.distancing_gdp_frac, errors);
        read_field(p, "tracing_gdp_frac", e.tracing_gdp_frac, errors);
        read_field(p, "masks_cost", e.masks_cost, errors);
        read_field(p, "infection_cost", e.infection_cost, errors);
        read_field(p, "tracing_cost", e.tracing_cost, errors);
        read_field(p, "death_cost", e.death_cost, errors);
    }
    if (j.contains("schedule")) s.schedule = schedule_from_json(j.at("schedule"), errors);

    if (errors.empty()) errors = validate_schedule(s.schedule, s.horizon);
    if (errors.empty()) {
        try {
            s.validate();
        } catch (const Error& e) {
            errors.push_back({"invalid_scenario", -1, e.what()});
        }
    }
    if (!errors.empty()) throw ValidationError(std::move(errors));
    return s;
}

inline Json scenario_to_json(const Scenario& s)
{
    Json j{{"population", s.n},
           {"horizon", s.horizon},
           {"seed_infected", s.seed_infected},
           {"seed_exposed", s.seed_exposed},
           {"substeps", s.substeps},
           {"params",
            {{"r0", s.params.r0},
             {"recovery_time", s.params.recovery_days()},
             {"incubation_time", s.params.incubation_days()},
             {"mu", s.params.mu},
             {"alpha", s.params.alpha}}},
           {"econ",
            {{"gdp_per_capita", s.econ.gdp_per_capita},
             {"lockdown_gdp_frac", s.econ.lockdown_gdp_frac},
             {"distancing_gdp_frac", s.econ.distancing_gdp_frac},
             {"tracing_gdp_frac", s.econ.tracing_gdp_frac},
             {"masks_cost", s.econ.masks_cost},
             {"infection_cost", s.econ.infection_cost},
             {"tracing_cost", s.econ.tracing_cost},
             {"death_cost", s.econ.death_cost}}},
           {"schedule", to_json(s.schedule)}};
    if (s.icu)
        j["icu"] = {{"enabled", true},
                    {"icu_fraction", s.icu->icu_fraction},
                    {"icu_beds_per_capita", s.icu->icu_beds_per_capita},
                    {"fatality_treated", s.icu->fatality_treated},
                    {"fatality_untreated", s.icu->fatality_untreated}};
    else
        j["icu"] = {{"enabled", false}};
    return j;
}

/// Column arrays; entry k of each flow array describes day k, state arrays
/// have one extra entry for the end of the horizon.
inline Json to_json(const Trajectory& t)
{
    Json j;
    std::vector<double> s, e, i, r, d, cases, deaths;
    for (const auto& x : t.states) {
        s.push_back(x.s);
        e.push_back(x.e);
        i.push_back(x.i);
        r.push_back(x.r);
        d.push_back(x.d);
    }
    for (const auto& f : t.flows) {
        cases.push_back(f.new_infectious);
        deaths.push_back(f.new_deaths);
    }
    j["S"] = s;
    j["E"] = e;
    j["I"] = i;
    j["R"] = r;
    j["D"] = d;
    j["new_cases"] = cases;
    j["new_deaths"] = deaths;
    j["re"] = t.re;
    j["mu_eff"] = t.mu_eff;
    return j;
}

inline Json to_json(const LossBreakdown& l)
{
    std::vector<double> policy, infection, tracing, death, total;
    for (const auto& d : l.daily) {
        policy.push_back(d.policy);
        infection.push_back(d.infection);
        tracing.push_back(d.tracing);
        death.push_back(d.death);
        total.push_back(d.total());
    }
    return {{"policy", policy},     {"infection", infection}, {"tracing", tracing},
            {"death", death},       {"total", total},         {"cumulative", l.cumulative()}};
}

/// Totals written by `pplctl simulate` and returned by POST /api/simulate.
inline Json totals_json(const ScenarioResult& r)
{
    const auto& t = r.loss.totals;
    return {{"total_cases", r.loss.total_cases}, {"total_deaths", r.loss.total_deaths},
            {"policy", t.policy},                {"infection", t.infection},
            {"tracing", t.tracing},              {"death", t.death},
            {"total_loss", r.loss.total()}};
}

inline Json to_json(const ScenarioResult& r)
{
    return {{"label", r.label}, {"trajectory", to_json(r.trajectory)}, {"loss", to_json(r.loss)}, {"totals", totals_json(r)}};
}

// ---------------------------------------------------------------- catalog and search

inline Json catalog_json(const PolicyCatalog& c, bool searchable_only = true)
{
    Json out = Json::array();
    for (const auto& p : c.policies) {
        if (searchable_only && !p.searchable) continue;
        out.push_back({{"id", to_string(p.id)},
                       {"efficiency", p.efficiency},
                       {"cost_kind", to_string(p.cost_kind)},
                       {"lag_days", p.lag_days}});
    }
    return {{"policies", out}, {"intensity_levels", kIntensityLevels}};
}

inline SearchSpace search_space_from_json(const Json& j, SearchSpace space = {})
{
    std::vector<Violation> errors;
    if (j.is_null()) return space;
    if (!j.is_object()) throw ValidationError({detail::bad_request("'space' must be an object")});
    detail::read_field(j, "block_length", space.block_length, errors);
    detail::read_field(j, "levels", space.levels, errors);
    std::vector<std::string> ids;
    if (detail::read_field(j, "policies", ids, errors)) {
        space.policies.clear();
        for (const auto& id : ids) {
            if (auto p = parse_policy_id(id))
                space.policies.push_back(*p);
            else
                errors.push_back({"unknown_policy", -1, "unknown policy id '" + id + "'"});
        }
    }
    for (double x : space.levels)
        if (std::find(kIntensityLevels.begin(), kIntensityLevels.end(), x) == kIntensityLevels.end())
            errors.push_back({"intensity_level", -1, "search levels must be drawn from 0, 0.5 and 1"});
    if (!(space.block_length >= 1)) errors.push_back({"block_length", -1, "block_length must be >= 1"});
    if (!errors.empty()) throw ValidationError(std::move(errors));
    return space;
}

inline Json to_json(const SearchResult& r, std::size_t top_k)
{
    Json ranked = Json::array();
    for (std::size_t k = 0; k < r.ranked.size() && k < top_k; ++k) {
        const auto& e = r.ranked[k];
        ranked.push_back({{"rank", k + 1},
                          {"schedule", encode_schedule(e.schedule)},
                          {"blocks", to_json(e.schedule)["blocks"]},
                          {"total_cases", e.total_cases},
                          {"total_deaths", e.total_deaths},
                          {"total_loss", e.total_loss}});
    }
    return {{"evaluated", r.evaluated}, {"feasible_per_block", r.feasible_per_block}, {"ranked", ranked}};
}

// ---------------------------------------------------------------- fit reports

inline Json changepoint_report(const ChangePointPosterior& p, const std::string& country, Date policy_start)
{
    const auto effect = take_effect_days(p, policy_start);
    Json rhat, ess;
    const auto& names = p.chains.empty() ? std::vector<std::string>{} : p.chains.front().names;
    for (std::size_t k = 0; k < names.size() && k < p.diag.rhat.size(); ++k) {
        rhat[names[k]] = p.diag.rhat[k];
        ess[names[k]] = p.diag.ess[k];
    }
    return {{"country", country},
            {"date_range", {{"start", format_date(p.start)}, {"end", format_date(p.end)}}},
            {"policy_start", format_date(policy_start)},
            {"w1", to_json(p.at("w1"))},
            {"w2", to_json(p.at("w2"))},
            {"w1_normalized", to_json(p.at("w1_normalized"))},
            {"w2_normalized", to_json(p.at("w2_normalized"))},
            {"b1", to_json(p.at("b1"))},
            {"b2", to_json(p.at("b2"))},
            {"noise_scale", to_json(p.at("noise_scale"))},
            {"tau", to_json(p.at("tau"))},
            {"change_date", format_date(p.change_date)},
            {"efficiency", to_json(p.efficiency)},
            {"take_effect_days", effect.days},
            {"negative_lag", effect.negative_lag},
            {"rhat", p.diag.max_rhat()},
            {"ess", p.diag.min_ess()},
            {"rhat_by_parameter", rhat},
            {"ess_by_parameter", ess},
            {"converged", p.converged},
            {"s2_floored", p.s2_floored}};
}

inline Json seird_report(const SeirdPosterior& p, const std::string& country = {})
{
    return {{"country", country},
            {"recovery_time_days", to_json(p.at("recovery_time"))},
            {"incubation_time_days", to_json(p.at("incubation_time"))},
            {"r0", to_json(p.at("r0"))},
            {"case_fatality", to_json(p.at("case_fatality"))},
            {"rhat", p.diag.max_rhat()},
            {"ess", p.diag.min_ess()},
            {"runs", p.runs},
            {"converged", p.converged}};
}

} // namespace ppl
