#pragma once

// Stateless HTTP/JSON service. Handlers are plain functions from a request
// body to (status, JSON) so they can be exercised without a socket.

#include <cstdlib>
#include <optional>
#include <string>

// Eigen must be parsed before httplib: <resolv.h> defines a `_res` macro
// that collides with Eigen parameter names.
#include "ppl/serialize.hpp"

// httplib's default backlog of 5 drops connections under a burst of clients.
#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#endif
#include <httplib.h>

namespace ppl {

struct ServiceConfig {
    std::string host = "0.0.0.0";
    int port = 8080;
    std::string cors_origin = "*";
    std::uint64_t search_cap = 2'000'000;
    unsigned search_threads = 0; // 0: hardware concurrency
    std::size_t default_top_k = 20;

    void validate() const
    {
        if (port < 1 || port > 65535) throw Error(ErrorCode::InvalidArgument, "port must lie in [1, 65535]");
    }

    /// Defaults overridden by PPL_PORT when set.
    static ServiceConfig from_env()
    {
        ServiceConfig c;
        if (const char* p = std::getenv("PPL_PORT")) {
            const auto v = detail::parse_int(p);
            if (!v) throw Error(ErrorCode::InvalidArgument, std::string("PPL_PORT is not an integer: ") + p);
            c.port = *v;
        }
        c.validate();
        return c;
    }
};

struct ApiResponse {
    int status = 200;
    Json body;
};

inline ApiResponse error_response(int status, std::string_view code, const std::string& message, Json extra = {})
{
    Json body{{"error", code}, {"message", message}};
    if (extra.is_object())
        for (auto& [k, v] : extra.items()) body[k] = v;
    return {status, body};
}

namespace detail {

inline int status_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::SpaceTooLarge: return 413;
    case ErrorCode::NotConverged: return 422;
    default: return 400;
    }
}

/// Parses `body` and maps library errors to HTTP statuses.
template <typename F>
ApiResponse guarded(const std::string& body, F&& handler)
{
    try {
        const Json j = body.empty() ? Json::object() : Json::parse(body);
        return handler(j);
    } catch (const Json::parse_error& e) {
        return error_response(400, "bad_json", e.what(), {{"violations", to_json(std::vector<Violation>{
                                                                 {"bad_json", -1, e.what()}})}});
    } catch (const ValidationError& e) {
        return error_response(400, "validation", e.what(), {{"violations", to_json(e.violations())}});
    } catch (const Error& e) {
        Json extra;
        if (e.code() == ErrorCode::InvalidSchedule)
            extra["violations"] = to_json(std::vector<Violation>{{"invalid_schedule", -1, e.what()}});
        return error_response(status_for(e.code()), to_string(e.code()), e.what(), extra);
    } catch (const Json::exception& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

} // namespace detail

inline ApiResponse handle_policies() { return {200, catalog_json(default_catalog())}; }

inline ApiResponse handle_simulate(const std::string& body)
{
    return detail::guarded(body, [](const Json& j) {
        const auto s = scenario_from_json(j);
        return ApiResponse{200, to_json(run_scenario(s, j.value("label", std::string{})))};
    });
}

/// Body: {"base": scenario, "space": {...}, "top_k": 20, "cap": n, "threads": n}.
inline ApiResponse handle_search(const std::string& body, const ServiceConfig& cfg = {})
{
    return detail::guarded(body, [&cfg](const Json& j) {
        const auto base = scenario_from_json(j.value("base", Json::object()));
        auto space = search_space_from_json(j.value("space", Json()));
        space.cap = std::min<std::uint64_t>(j.value("cap", cfg.search_cap), cfg.search_cap);
        const auto top_k = j.value("top_k", cfg.default_top_k);
        const auto threads = j.value("threads", cfg.search_threads);
        const auto r = search_policies(space, base, threads);
        return ApiResponse{200, to_json(r, top_k)};
    });
}

/// Body: {"country", "dates": [...], "values": [cumulative counts],
/// "policy_start", optional "seed", "num_warmup", "num_samples"}.
inline ApiResponse handle_changepoint(const std::string& body)
{
    return detail::guarded(body, [](const Json& j) {
        std::vector<Violation> errors;
        TimeSeries ts;
        ts.country = j.value("country", std::string{});
        std::vector<std::string> dates;
        detail::read_field(j, "dates", dates, errors);
        detail::read_field(j, "values", ts.values, errors);
        for (const auto& d : dates) {
            if (auto x = parse_date(d))
                ts.dates.push_back(*x);
            else
                errors.push_back({"bad_date", -1, "unparseable date '" + d + "'"});
        }
        if (ts.dates.size() != ts.values.size())
            errors.push_back({"length_mismatch", -1, "'dates' and 'values' must have equal length"});
        for (std::size_t k = 1; k < ts.dates.size() && errors.empty(); ++k)
            if (days_between(ts.dates[k - 1], ts.dates[k]) != 1)
                errors.push_back({"date_grid", -1, "dates must be consecutive days"});
        std::optional<Date> start;
        if (auto s = j.value("policy_start", std::string{}); !s.empty()) start = parse_date(s);
        if (!start) errors.push_back({"policy_start", -1, "'policy_start' must be a YYYY-MM-DD date"});
        if (!errors.empty()) throw ValidationError(std::move(errors));

        auto cfg = changepoint_config();
        cfg.seed = j.value("seed", cfg.seed);
        cfg.num_warmup = j.value("num_warmup", cfg.num_warmup);
        cfg.num_samples = j.value("num_samples", cfg.num_samples);
        cfg.validate();
        const auto series = to_log_cumulative(ts);
        try {
            return ApiResponse{200, changepoint_report(fit_changepoint(series, cfg), ts.country, *start)};
        } catch (const NotConvergedError& e) {
            return error_response(422, "NotConverged", e.what(),
                                  {{"report", changepoint_report(e.posterior(), ts.country, *start)}});
        }
    });
}

/// Routes, CORS headers and JSON content type on `server`.
inline void install_routes(httplib::Server& server, const ServiceConfig& cfg)
{
    server.set_default_headers({{"Access-Control-Allow-Origin", cfg.cors_origin},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    auto send = [](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });
    server.Get("/api/policies", [send](const httplib::Request&, httplib::Response& res) { send(res, handle_policies()); });
    server.Post("/api/simulate",
                [send](const httplib::Request& req, httplib::Response& res) { send(res, handle_simulate(req.body)); });
    server.Post("/api/search", [send, cfg](const httplib::Request& req, httplib::Response& res) {
        send(res, handle_search(req.body, cfg));
    });
    server.Post("/api/changepoint",
                [send](const httplib::Request& req, httplib::Response& res) { send(res, handle_changepoint(req.body)); });
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

/// Blocks until the server stops. Throws if the port cannot be bound.
inline void serve(const ServiceConfig& cfg)
{
    cfg.validate();
    httplib::Server server;
    install_routes(server, cfg);
    // httplib's default adds SO_REUSEPORT, which lets a second server share
    // an occupied port instead of failing.
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    if (!server.bind_to_port(cfg.host, cfg.port))
        throw Error(ErrorCode::InvalidArgument, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
    server.listen_after_bind();
}

} // namespace ppl
