// SPDX-License-Identifier: Apache-2.0

#include "deadannot/http_service.hpp"

#include <httplib.h>

namespace deadannot {
namespace {

using nlohmann::json;

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ServiceError& e) {
  json body = {{"code", e.code()}, {"message", e.what()}};
  if (e.location()) {
    body["location"] = {{"line", e.location()->first}, {"column", e.location()->second}};
  }
  send(res, e.status(), body);
}

json body_of(const httplib::Request& req, bool allow_empty = true) {
  if (req.body.empty()) {
    if (allow_empty) return json::object();
    throw ServiceError(400, "bad_request", "missing JSON body");
  }
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw ServiceError(400, "bad_request", "body is not a JSON object");
  }
  return body;
}

std::string string_field(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw ServiceError(400, "bad_request", std::string("'") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::optional<std::uint64_t> expect_rev(const json& body) {
  auto it = body.find("expect_rev");
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned()) {
    throw ServiceError(400, "bad_request", "'expect_rev' must be a non-negative integer");
  }
  return it->get<std::uint64_t>();
}

// Runs `fn` and maps exceptions to error responses.
template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, ServiceError(400, "bad_request", e.what()));
    } catch (const std::exception& e) {
      send_error(res, ServiceError(500, "internal", e.what()));
    }
  };
}

}  // namespace

json to_json(const JobSnapshot& s) {
  json removable = json::array();
  for (const auto& r : s.removable) {
    removable.push_back({{"id", r.id},
                         {"kind", r.kind},
                         {"method", r.method},
                         {"span", {{"begin", r.span.begin}, {"end", r.span.end}}}});
  }
  return {{"id", s.id},
          {"mode", std::string(to_string(s.mode))},
          {"monotone", s.monotone},
          {"excluded", s.excluded},
          {"removable", removable},
          {"source", s.source},
          {"source_rev", s.source_rev},
          {"dirty", s.dirty},
          {"last_error", s.last_error},
          {"verifier_calls", s.verifier_calls}};
}

OracleSpec oracle_spec_from_json(const json& oracle) {
  if (!oracle.is_object() || oracle.size() != 1) {
    throw ServiceError(400, "bad_request", "'oracle' must have exactly one of 'deps' or 'external'");
  }
  OracleSpec spec;
  if (auto it = oracle.find("deps"); it != oracle.end()) {
    if (!it->is_string()) throw ServiceError(400, "bad_request", "'deps' must be sidecar text");
    spec.kind = OracleSpec::Kind::deps;
    spec.sidecar = it->get<std::string>();
    return spec;
  }
  if (auto it = oracle.find("external"); it != oracle.end()) {
    spec.kind = OracleSpec::Kind::external;
    try {
      spec.external = parse_external_config(it->dump());
    } catch (const ConfigError& e) {
      throw ServiceError(422, "oracle_error", e.what());
    }
    return spec;
  }
  throw ServiceError(400, "bad_request", "'oracle' must have exactly one of 'deps' or 'external'");
}

void install_routes(httplib::Server& server, JobService& service) {
  server.Post("/jobs", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const json body = body_of(req, false);
    const auto oracle = body.find("oracle");
    if (oracle == body.end()) throw ServiceError(400, "bad_request", "missing 'oracle'");
    const OracleSpec spec = oracle_spec_from_json(*oracle);
    std::string file_name = body.contains("file_name") ? string_field(body, "file_name") : "input.dfy";
    const std::string id = service.create_job(string_field(body, "source"), spec, file_name);
    send(res, 201, to_json(service.get(id)));
  }));

  server.Get("/jobs", guarded([&service](const httplib::Request&, httplib::Response& res) {
    send(res, 200, {{"jobs", service.job_ids()}});
  }));

  server.Get(R"(/jobs/([^/]+))",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send(res, 200, to_json(service.get(req.matches[1])));
             }));

  server.Delete(R"(/jobs/([^/]+))",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                  if (!service.remove_job(req.matches[1])) {
                    throw ServiceError(404, "not_found", "no job '" + std::string(req.matches[1]) + "'");
                  }
                  res.status = 204;
                }));

  server.Post(R"(/jobs/([^/]+)/analyze)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = body_of(req);
                std::optional<std::set<std::string>> methods;
                if (auto it = body.find("methods"); it != body.end() && !it->is_null()) {
                  methods = it->get<std::set<std::string>>();
                }
                const std::string id = req.matches[1];
                if (!service.start_analysis(id, methods)) {
                  throw ServiceError(409, "busy", "analysis is running");
                }
                send(res, 202, {{"mode", std::string(to_string(service.get(id).mode))}});
              }));

  server.Post(R"(/jobs/([^/]+)/cancel)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                send(res, 200, {{"mode", std::string(to_string(service.cancel(req.matches[1])))}});
              }));

  server.Post(R"(/jobs/([^/]+)/apply)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = body_of(req, false);
                Selection selection;
                if (body.contains("id")) {
                  selection = {Selection::Kind::id, string_field(body, "id")};
                } else if (body.contains("method")) {
                  selection = {Selection::Kind::method, string_field(body, "method")};
                } else if (body.value("all", false)) {
                  selection = {Selection::Kind::all, ""};
                } else {
                  throw ServiceError(400, "bad_request", "select with 'id', 'method' or 'all'");
                }
                const auto [source, rev] = service.apply(req.matches[1], selection, expect_rev(body));
                send(res, 200, {{"source", source}, {"source_rev", rev}});
              }));

  server.Patch(R"(/jobs/([^/]+)/source)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
                 const json body = body_of(req, false);
                 const auto [rev, dirty] = service.patch_source(
                     req.matches[1], string_field(body, "source"), expect_rev(body));
                 send(res, 200, {{"source_rev", rev}, {"dirty", dirty}});
               }));

  server.Post(R"(/jobs/([^/]+)/idle)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = body_of(req, false);
                const auto it = body.find("idle_ms");
                if (it == body.end() || !it->is_number_integer()) {
                  throw ServiceError(400, "bad_request", "'idle_ms' must be an integer");
                }
                const bool started = service.idle_trigger(req.matches[1], it->get<long long>());
                send(res, 200, {{"started", started}});
              }));
}

}  // namespace deadannot
