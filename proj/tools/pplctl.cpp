// pplctl: command-line front end for fits, scenarios, search and the service.
//
// Exit codes: 0 success, 1 input/validation/I-O error, 2 fit did not converge.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ppl/service.hpp"

namespace fs = std::filesystem;
using namespace ppl;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

Json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
    return Json::parse(in);
}

CaseTable read_table(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
    return parse_case_csv(in);
}

Date require_date(const std::string& s, const char* flag)
{
    auto d = parse_date(s);
    if (!d) throw Error(ErrorCode::InvalidArgument, std::string(flag) + " is not a YYYY-MM-DD date: " + s);
    return *d;
}

/// Writes `text` to `path`, or stdout for "-".
void emit(const std::string& path, const std::string& text)
{
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
    out << text;
}

void print_violations(const ValidationError& e)
{
    std::cerr << "invalid input:\n";
    for (const auto& v : e.violations())
        std::cerr << "  " << v.rule << (v.block >= 0 ? " (block " + std::to_string(v.block) + ")" : "") << ": "
                  << v.message << '\n';
}

struct McmcFlags {
    std::uint64_t seed = mcmc::McmcConfig{}.seed;
    int warmup = 1000;
    int samples = 1000;
    int chains = 4;

    void add(CLI::App* app)
    {
        app->add_option("--seed", seed, "Sampler seed")->capture_default_str();
        app->add_option("--warmup", warmup, "Warmup iterations per chain")->capture_default_str();
        app->add_option("--samples", samples, "Kept draws per chain")->capture_default_str();
        app->add_option("--chains", chains, "Number of chains")->capture_default_str();
    }
    void apply(mcmc::McmcConfig& cfg) const
    {
        cfg.seed = seed;
        cfg.num_warmup = warmup;
        cfg.num_samples = samples;
        cfg.num_chains = chains;
    }
};

struct FitChangepointCmd {
    std::string csv, country, from, to, policy_start, out = "-", fit_csv, draws_csv;
    McmcFlags mcmc;

    int run() const
    {
        const auto table = read_table(csv);
        const auto ts = select_series(table, country, require_date(from, "--from"), require_date(to, "--to"),
                                      CaseField::confirmed);
        const auto start = require_date(policy_start, "--policy-start");
        const auto series = to_log_cumulative(ts);
        auto cfg = changepoint_config();
        mcmc.apply(cfg);

        auto write = [&](const ChangePointPosterior& post) {
            emit(out, changepoint_report(post, country, start).dump(2) + "\n");
            if (!fit_csv.empty()) {
                std::ofstream f(fit_csv);
                write_fit_csv(f, series, post);
            }
            if (!draws_csv.empty()) {
                std::ofstream f(draws_csv);
                mcmc::write_chains_csv(f, post.chains);
            }
        };
        try {
            write(fit_changepoint(series, cfg));
            return 0;
        } catch (const NotConvergedError& e) {
            write(e.posterior());
            std::cerr << "not converged: R-hat " << e.posterior().diag.max_rhat() << '\n';
            return kExitNotConverged;
        }
    }
};

struct FitSeirdCmd {
    std::string csv, country, from, to, out = "-";
    double population = 0;
    int runs = 1;
    int substeps = kDefaultSubsteps;
    McmcFlags mcmc;

    int run() const
    {
        const auto table = read_table(csv);
        const Date lo = require_date(from, "--from"), hi = require_date(to, "--to");
        const auto confirmed = select_series(table, country, lo, hi, CaseField::confirmed);
        const auto deaths = select_series(table, country, lo, hi, CaseField::deaths);
        if (!(population > 0)) throw Error(ErrorCode::InvalidArgument, "--population must be positive");
        auto cfg = seird_config();
        mcmc.apply(cfg);
        SeirdFitOptions opt;
        opt.substeps = substeps;
        opt.require_convergence = false;
        const auto obs = observations_from_cumulative(confirmed, deaths);
        if (static_cast<std::size_t>(obs.days()) < opt.min_days)
            throw Error(ErrorCode::TooFewPoints, "SEIRD fit needs at least " + std::to_string(opt.min_days) + " days");
        const auto post = fit_seird_averaged(obs, population, runs, cfg, opt);
        emit(out, seird_report(post, country).dump(2) + "\n");
        if (!post.converged) {
            std::cerr << "not converged: R-hat " << post.diag.max_rhat() << '\n';
            return kExitNotConverged;
        }
        return 0;
    }
};

/// Scenario JSON assembled from an optional file, a preset and flag overrides,
/// then validated through the same parser the service uses.
struct ScenarioFlags {
    std::string file, preset;
    std::optional<double> seed_infected, population, gdp_per_capita;
    std::optional<int> horizon;

    void add(CLI::App* app)
    {
        app->add_option("--scenario", file, "Scenario JSON file (same shape as POST /api/simulate)");
        app->add_option("--preset", preset, "none, masks, distancing, lockdown, tracing_distancing or optimal");
        app->add_option("--seed-infected", seed_infected, "Infectious persons on day 0");
        app->add_option("--population", population, "Population size");
        app->add_option("--horizon", horizon, "Days to simulate");
        app->add_option("--gdp-per-capita", gdp_per_capita, "GDP per person per year");
    }

    [[nodiscard]] Json request() const
    {
        Json j = file.empty() ? Json::object() : read_json_file(file);
        if (seed_infected) j["seed_infected"] = *seed_infected;
        if (population) j["population"] = *population;
        if (horizon) j["horizon"] = *horizon;
        if (gdp_per_capita) j["gdp_per_capita"] = *gdp_per_capita;
        if (!preset.empty()) {
            const int h = j.value("horizon", Scenario{}.horizon);
            bool found = false;
            for (const auto& p : presets(h))
                if (p.key == preset) {
                    j["schedule"] = to_json(p.schedule);
                    j["label"] = p.label;
                    found = true;
                }
            if (!found) throw Error(ErrorCode::InvalidArgument, "unknown preset '" + preset + "'");
        }
        return j;
    }
};

struct SimulateCmd {
    ScenarioFlags scenario;
    std::string out_dir = ".";

    int run() const
    {
        const Json req = scenario.request();
        const auto s = scenario_from_json(req);
        const auto r = run_scenario(s, req.value("label", std::string{}));
        fs::create_directories(out_dir);
        {
            std::ofstream f(fs::path(out_dir) / "trajectory.csv");
            write_trajectory_csv(f, r.trajectory);
        }
        {
            std::ofstream f(fs::path(out_dir) / "loss.csv");
            write_loss_csv(f, r.loss);
        }
        const Json summary{{"label", r.label}, {"scenario", scenario_to_json(s)}, {"totals", totals_json(r)}};
        emit((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
        std::cout << totals_json(r).dump() << '\n';
        return 0;
    }
};

struct SearchCmd {
    ScenarioFlags scenario;
    int block_length = 30;
    std::vector<std::string> policies;
    std::size_t top_k = 20;
    unsigned threads = 0;
    std::uint64_t cap = SearchSpace{}.cap;
    std::string out = "-", json_out;

    int run() const
    {
        const auto base = scenario_from_json(scenario.request());
        Json space_json{{"block_length", block_length}};
        if (!policies.empty()) space_json["policies"] = policies;
        auto space = search_space_from_json(space_json);
        space.cap = cap;
        const auto r = search_policies(space, base, threads);
        std::ostringstream csv;
        write_search_csv(csv, r, top_k);
        emit(out, csv.str());
        if (!json_out.empty()) emit(json_out, to_json(r, top_k).dump(2) + "\n");
        std::cerr << "evaluated " << r.evaluated << " schedules (" << r.feasible_per_block
                  << " feasible assignments per block)\n";
        return 0;
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Epidemic intervention fits, scenarios and policy search"};
    app.require_subcommand(1);

    FitChangepointCmd cp;
    auto* cp_app = app.add_subcommand("fit-changepoint", "Fit the two-segment growth model to one country");
    cp_app->add_option("--csv", cp.csv, "Case CSV (Date, Country/Region, Confirmed, Deaths, Recovered)")->required();
    cp_app->add_option("--country", cp.country, "Country/Region value")->required();
    cp_app->add_option("--from", cp.from, "First date, YYYY-MM-DD")->required();
    cp_app->add_option("--to", cp.to, "Last date, YYYY-MM-DD")->required();
    cp_app->add_option("--policy-start", cp.policy_start, "Date the policy started")->required();
    cp_app->add_option("--out", cp.out, "Report JSON path, - for stdout")->capture_default_str();
    cp_app->add_option("--fit-csv", cp.fit_csv, "Write t,date,y,fit rows here");
    cp_app->add_option("--draws-csv", cp.draws_csv, "Write posterior draws here");
    cp.mcmc.add(cp_app);

    FitSeirdCmd sf;
    auto* sf_app = app.add_subcommand("fit-seird", "Fit SEIRD virus parameters to daily cases and deaths");
    sf_app->add_option("--csv", sf.csv, "Case CSV")->required();
    sf_app->add_option("--country", sf.country, "Country/Region value")->required();
    sf_app->add_option("--from", sf.from, "First date")->required();
    sf_app->add_option("--to", sf.to, "Last date")->required();
    sf_app->add_option("--population", sf.population, "Population of the country")->required();
    sf_app->add_option("--runs", sf.runs, "Seeds to average over")->capture_default_str();
    sf_app->add_option("--substeps", sf.substeps, "Euler substeps per day")->capture_default_str();
    sf_app->add_option("--out", sf.out, "Report JSON path, - for stdout")->capture_default_str();
    sf.mcmc.add(sf_app);

    SimulateCmd sim;
    auto* sim_app = app.add_subcommand("simulate", "Run one scenario; writes trajectory.csv, loss.csv, summary.json");
    sim.scenario.add(sim_app);
    sim_app->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();

    SearchCmd search;
    auto* search_app = app.add_subcommand("search", "Rank every feasible block schedule by total loss");
    search.scenario.add(search_app);
    search_app->add_option("--block-length", search.block_length, "Days per block")->capture_default_str();
    search_app->add_option("--policies", search.policies, "Policy ids to combine");
    search_app->add_option("--top-k", search.top_k, "Rows to write")->capture_default_str();
    search_app->add_option("--threads", search.threads, "Worker threads, 0 for all cores")->capture_default_str();
    search_app->add_option("--cap", search.cap, "Refuse spaces larger than this")->capture_default_str();
    search_app->add_option("--out", search.out, "Ranked CSV path, - for stdout")->capture_default_str();
    search_app->add_option("--json", search.json_out, "Also write the ranked list as JSON");

    ServiceConfig svc;
    std::optional<int> port;
    auto* serve_app = app.add_subcommand("serve", "Start the HTTP/JSON service (port from PPL_PORT, default 8080)");
    serve_app->add_option("--port", port, "Listen port, overrides PPL_PORT");
    serve_app->add_option("--host", svc.host, "Listen address")->capture_default_str();
    serve_app->add_option("--cors-origin", svc.cors_origin, "Access-Control-Allow-Origin value")->capture_default_str();
    serve_app->add_option("--search-cap", svc.search_cap, "Largest search space accepted")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cp_app) return cp.run();
        if (*sf_app) return sf.run();
        if (*sim_app) return sim.run();
        if (*search_app) return search.run();
        if (*serve_app) {
            auto cfg = ServiceConfig::from_env();
            cfg.host = svc.host;
            cfg.cors_origin = svc.cors_origin;
            cfg.search_cap = svc.search_cap;
            if (port) cfg.port = *port;
            cfg.validate();
            std::cerr << "listening on " << cfg.host << ':' << cfg.port << '\n';
            serve(cfg);
            return 0;
        }
    } catch (const ValidationError& e) {
        print_violations(e);
        return kExitError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::NotConverged ? kExitNotConverged : kExitError;
    } catch (const Json::exception& e) {
        std::cerr << "error: bad JSON: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
