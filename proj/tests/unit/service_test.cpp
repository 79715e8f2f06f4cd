// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>
#include <httplib.h>

#include <thread>

#include "deadannot/http_service.hpp"
#include "deadannot/minimizer.hpp"
#include "instances.hpp"
#include "service_stress.hpp"

using namespace deadannot;
using testsupport::data_path;
using testsupport::read_file;

namespace {

OracleSpec deps(std::string sidecar) {
  OracleSpec spec;
  spec.sidecar = std::move(sidecar);
  return spec;
}

std::string golden(const std::string& name) { return read_file(data_path("golden/" + name)); }

std::string create_golden(JobService& service, const std::string& stem) {
  return service.create_job(golden(stem + ".dfy"), deps(golden(stem + ".deps")), stem + ".dfy");
}

void analyze(JobService& service, const std::string& id,
             std::optional<std::set<std::string>> methods = {}) {
  REQUIRE(service.start_analysis(id, std::move(methods)));
  REQUIRE(service.wait(id));
}

std::set<std::string> removable_ids(const JobSnapshot& s) {
  std::set<std::string> ids;
  for (const auto& r : s.removable) ids.insert(r.id);
  return ids;
}

int status_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

// Ten methods with eight independent asserts each; every assert is needed.
std::string wide_program() {
  std::string text;
  for (int m = 0; m < 10; ++m) {
    text += "method W" + std::to_string(m) + "(x: int)\n{\n";
    for (int a = 0; a < 8; ++a) text += "  assert x == x;\n";
    text += "}\n";
  }
  return text;
}

std::string wide_sidecar() {
  std::string text;
  for (int m = 0; m < 10; ++m) {
    const std::string name = "W" + std::to_string(m);
    text += "method " + name + " = " + name + ":assert:0";
    for (int a = 1; a < 8; ++a) text += " & " + name + ":assert:" + std::to_string(a);
    text += "\n";
  }
  return text;
}

}  // namespace

TEST_CASE("mode transitions") {
  CHECK(legal_transition(Mode::idle, Mode::running));
  CHECK(legal_transition(Mode::running, Mode::cancel));
  CHECK(legal_transition(Mode::cancel, Mode::failure));
  CHECK(legal_transition(Mode::success, Mode::idle));
  CHECK_FALSE(legal_transition(Mode::idle, Mode::success));
  CHECK_FALSE(legal_transition(Mode::cancel, Mode::idle));
  CHECK_FALSE(legal_transition(Mode::failure, Mode::running));
  CHECK_FALSE(legal_transition(Mode::success, Mode::running));
}

TEST_CASE("fib job lists three removable units and applies to the golden") {
  JobService service;
  const std::string id = create_golden(service, "fib_lemma");
  JobSnapshot s = service.get(id);
  CHECK(s.mode == Mode::idle);
  CHECK(s.source_rev == 1);
  CHECK(s.excluded.empty());
  CHECK(s.removable.empty());
  CHECK(s.dirty == std::vector<std::string>{"FibLemma"});

  analyze(service, id);
  s = service.get(id);
  CHECK(s.mode == Mode::success);
  CHECK(s.dirty.empty());
  CHECK(removable_ids(s) == std::set<std::string>{"FibLemma:decreases:0", "FibLemma:lemma_call:1",
                                                 "FibLemma:lemma_call:2"});
  for (const auto& r : s.removable) {
    CHECK(r.method == "FibLemma");
    CHECK(s.source.substr(r.span.begin, r.span.size()).find(r.kind == "decreases" ? "decreases"
                                                                                 : "FibLemma") == 0);
  }
  // Analysis alone never edits the source.
  CHECK(s.source == golden("fib_lemma.dfy"));

  const auto [source, rev] = service.apply(id, {Selection::Kind::all, ""});
  CHECK(source == golden("fib_lemma.min.dfy"));
  CHECK(rev == 2);
  s = service.get(id);
  CHECK(s.mode == Mode::idle);
  CHECK(s.source == source);
  CHECK(s.removable.empty());
}

TEST_CASE("apply one unit then re-analyze leaves the other two") {
  JobService service;
  const std::string id = create_golden(service, "fib_lemma");
  analyze(service, id);
  const auto [source, rev] = service.apply(id, {Selection::Kind::id, "FibLemma:lemma_call:1"}, 1);
  CHECK(rev == 2);
  CHECK(source.find("FibLemma(n - 2);") == std::string::npos);
  CHECK(source.find("FibLemma(n - 1);") != std::string::npos);
  CHECK(service.get(id).dirty == std::vector<std::string>{"FibLemma"});
  analyze(service, id);
  // The surviving call is renumbered.
  const JobSnapshot s = service.get(id);
  CHECK(removable_ids(s) == std::set<std::string>{"FibLemma:decreases:0", "FibLemma:lemma_call:1"});
  CHECK(service.apply(id, {Selection::Kind::all, ""}).first == golden("fib_lemma.min.dfy"));
}

TEST_CASE("empty or invalid selections leave the source alone") {
  JobService service;
  const std::string id = create_golden(service, "pqr");
  // Nothing analyzed yet.
  const auto [source, rev] = service.apply(id, {Selection::Kind::all, ""});
  CHECK(source == golden("pqr.dfy"));
  CHECK(rev == 1);
  CHECK(service.transitions(id).empty());
  CHECK(status_of([&] { service.apply(id, {Selection::Kind::id, "M:assert:0"}); }) == 422);
  CHECK(status_of([&] { service.apply(id, {Selection::Kind::method, "Nope"}); }) == 422);
  analyze(service, id);
  CHECK(service.get(id).removable.size() == 1);
  CHECK(status_of([&] { service.apply(id, {Selection::Kind::all, ""}, 7); }) == 409);
  CHECK(service.get(id).source == golden("pqr.dfy"));
  CHECK(service.get(id).mode == Mode::success);
}

TEST_CASE("re-analysis of unchanged methods issues no verifier calls") {
  JobService service;
  const std::string id = service.create_job(wide_program(), deps(wide_sidecar()), "wide.dfy");
  const std::size_t after_create = service.get(id).verifier_calls;
  CHECK(after_create == 1);
  analyze(service, id);
  const std::size_t after_first = service.get(id).verifier_calls;
  CHECK(after_first > after_create);
  analyze(service, id);
  CHECK(service.get(id).verifier_calls == after_first);
  analyze(service, id, std::set<std::string>{"W3", "W4"});
  CHECK(service.get(id).verifier_calls == after_first);
  CHECK(status_of([&] { service.start_analysis(id, std::set<std::string>{"Missing"}); }) == 422);
}

TEST_CASE("patch marks changed and new methods dirty") {
  JobService service;
  const std::string text = wide_program();
  const std::string id = service.create_job(text, deps(wide_sidecar()), "wide.dfy");
  analyze(service, id);
  const std::size_t before = service.get(id).verifier_calls;

  // A comment between declarations changes no method.
  auto [rev, dirty] = service.patch_source(id, "// header\n" + text, 1);
  CHECK(rev == 2);
  CHECK(dirty.empty());
  CHECK(service.get(id).mode == Mode::idle);

  std::string edited = "// header\n" + text;
  edited.insert(edited.find("method W5(x: int)\n{\n") + 19, "\n");
  edited += "method Added() { }\n";
  std::tie(rev, dirty) = service.patch_source(id, edited, 2);
  CHECK(rev == 3);
  CHECK(dirty == std::vector<std::string>{"W5", "Added"});
  CHECK(service.get(id).dirty == std::vector<std::string>{"Added", "W5"});

  analyze(service, id);
  const JobSnapshot s = service.get(id);
  CHECK(s.dirty.empty());
  CHECK(s.source == edited);
  // Preflight plus the eight single-assert checks of W5; Added has nothing.
  CHECK(s.verifier_calls - before == 1 + 8);

  CHECK(status_of([&] { service.patch_source(id, edited, 2); }) == 409);
}

TEST_CASE("malformed patch is rejected with a location") {
  JobService service;
  const std::string id = create_golden(service, "pqr");
  const std::string bad = "method M()\n{\n}\n\nmethod (\n";
  try {
    service.patch_source(id, bad);
    FAIL("expected a syntax error");
  } catch (const ServiceError& e) {
    CHECK(e.status() == 422);
    CHECK(e.code() == "syntax_error");
    REQUIRE(e.location());
    CHECK(*e.location() == std::make_pair<std::size_t, std::size_t>(5, 8));
  }
  CHECK(service.get(id).source == golden("pqr.dfy"));
  CHECK(service.get(id).source_rev == 1);
  // Ids the oracle refers to must survive.
  CHECK(status_of([&] { service.patch_source(id, "method M() { }\n"); }) == 422);
}

TEST_CASE("create rejects bad input") {
  JobService service;
  CHECK(status_of([&] { service.create_job("method (", deps("")); }) == 422);
  CHECK(status_of([&] { service.create_job("method M() { }\n", deps("method M = X:assert:0")); }) ==
        422);
  CHECK(status_of([&] { service.get("j99"); }) == 404);
}

TEST_CASE("methods that fail initially are excluded") {
  JobService service;
  const std::string id =
      service.create_job("method A() { assert true; }\nmethod B() { assert true; }\n",
                         deps("method A = false\nmethod B = true\n"), "ab.dfy");
  CHECK(service.get(id).excluded == std::vector<std::string>{"A"});
  analyze(service, id);
  const JobSnapshot s = service.get(id);
  CHECK(removable_ids(s) == std::set<std::string>{"B:assert:0"});
  CHECK(status_of([&] { service.apply(id, {Selection::Kind::id, "A:assert:0"}); }) == 422);
}

TEST_CASE("busy job rejects analysis, apply and patch") {
  ServiceOptions options;
  options.verify_delay = std::chrono::milliseconds(5);
  JobService service(options);
  const std::string id = service.create_job(wide_program(), deps(wide_sidecar()), "wide.dfy");
  REQUIRE(service.start_analysis(id));
  CHECK_FALSE(service.start_analysis(id));
  CHECK(status_of([&] { service.apply(id, {Selection::Kind::all, ""}); }) == 409);
  CHECK(status_of([&] { service.patch_source(id, wide_program()); }) == 409);
  CHECK_FALSE(service.idle_trigger(id, 1000000));
  CHECK(service.get(id).mode == Mode::running);
  CHECK(service.cancel(id) == Mode::idle);
}

TEST_CASE("cancel stops a run early and keeps the source") {
  ServiceOptions options;
  options.verify_delay = std::chrono::milliseconds(20);
  JobService service(options);
  const std::string full = service.create_job(wide_program(), deps(wide_sidecar()), "a.dfy");
  analyze(service, full);
  const std::size_t full_calls = service.get(full).verifier_calls;
  // Preflight, then one call per assert position across all ten methods.
  CHECK(full_calls == 1 + 8);

  const std::string id = service.create_job(wide_program(), deps(wide_sidecar()), "b.dfy");
  REQUIRE(service.start_analysis(id));
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  CHECK(service.cancel(id) == Mode::idle);
  const JobSnapshot s = service.get(id);
  CHECK(s.verifier_calls < full_calls);
  CHECK(s.mode == Mode::idle);
  CHECK(s.source == wide_program());
  CHECK(s.removable.empty());
  CHECK(s.dirty.size() == 10);
  const auto history = service.transitions(id);
  REQUIRE(history.size() == 4);
  CHECK(history[1] == std::make_pair(Mode::running, Mode::cancel));
  CHECK(history[2] == std::make_pair(Mode::cancel, Mode::failure));
  CHECK(history[3] == std::make_pair(Mode::failure, Mode::idle));
  // A cancel with nothing running changes nothing.
  CHECK(service.cancel(id) == Mode::idle);
  CHECK(service.transitions(id).size() == 4);
}

TEST_CASE("idle trigger analyzes dirty methods past the threshold") {
  ServiceOptions options;
  options.idle_threshold_ms = 500;
  JobService service(options);
  const std::string id = create_golden(service, "pqr");
  CHECK_FALSE(service.idle_trigger(id, 499));
  CHECK(service.transitions(id).empty());
  CHECK(service.idle_trigger(id, 500));
  REQUIRE(service.wait(id));
  CHECK(service.get(id).mode == Mode::success);
  CHECK(service.get(id).removable.size() == 1);
  // Nothing dirty: no new analysis.
  CHECK_FALSE(service.idle_trigger(id, 100000));
  CHECK(service.get(id).mode == Mode::success);
}

TEST_CASE("job removal") {
  ServiceOptions options;
  options.verify_delay = std::chrono::milliseconds(2);
  JobService service(options);
  const std::string id = service.create_job(wide_program(), deps(wide_sidecar()), "w.dfy");
  REQUIRE(service.start_analysis(id));
  CHECK(service.remove_job(id));
  CHECK_FALSE(service.remove_job(id));
  CHECK(service.job_ids().empty());
}

TEST_CASE("http round trip") {
  JobService service;
  httplib::Server server;
  install_routes(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  using nlohmann::json;
  const json create = {{"source", golden("fib_lemma.dfy")},
                       {"file_name", "fib.dfy"},
                       {"oracle", {{"deps", golden("fib_lemma.deps")}}}};
  auto res = client.Post("/jobs", create.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const std::string id = json::parse(res->body)["id"];
  CHECK(json::parse(res->body)["mode"] == "idle");

  res = client.Post("/jobs/" + id + "/analyze", "{}", "application/json");
  REQUIRE(res);
  CHECK(res->status == 202);
  REQUIRE(service.wait(id));
  res = client.Get("/jobs/" + id);
  REQUIRE(res);
  json job = json::parse(res->body);
  CHECK(job["mode"] == "success");
  CHECK(job["removable"].size() == 3);
  CHECK(job["removable"][0]["span"]["begin"].is_number());

  res = client.Post("/jobs/" + id + "/apply", json{{"all", true}, {"expect_rev", 2}}.dump(),
                    "application/json");
  REQUIRE(res);
  CHECK(res->status == 409);
  CHECK(json::parse(res->body)["code"] == "stale_revision");

  res = client.Post("/jobs/" + id + "/apply", json{{"all", true}, {"expect_rev", 1}}.dump(),
                    "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["source"] == golden("fib_lemma.min.dfy"));
  CHECK(json::parse(res->body)["source_rev"] == 2);

  res = client.Patch("/jobs/" + id + "/source", json{{"source", "lemma L( {"}}.dump(),
                     "application/json");
  REQUIRE(res);
  CHECK(res->status == 422);
  job = json::parse(res->body);
  CHECK(job["code"] == "syntax_error");
  CHECK(job["location"]["line"] == 1);

  res = client.Post("/jobs/" + id + "/idle", json{{"idle_ms", 5}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(json::parse(res->body)["started"] == false);

  res = client.Post("/jobs/" + id + "/cancel", "", "application/json");
  REQUIRE(res);
  CHECK(json::parse(res->body)["mode"] == "idle");

  res = client.Post("/jobs", "not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  res = client.Get("/jobs/nope");
  REQUIRE(res);
  CHECK(res->status == 404);
  res = client.Get("/jobs");
  REQUIRE(res);
  CHECK(json::parse(res->body)["jobs"].size() == 1);
  res = client.Delete("/jobs/" + id);
  REQUIRE(res);
  CHECK(res->status == 204);

  server.stop();
  thread.join();
}

TEST_CASE("randomized interleavings keep the invariants") {
  const auto report = testsupport::run_service_stress(11, 10000);
  for (const auto& v : report.violations) CAPTURE(v);
  CHECK(report.violations.empty());
  CHECK(report.steps == 10000);
  CHECK(report.max_in_flight <= 1);
  CHECK(report.analyses_started > 100);
  CHECK(report.applies > 100);
  CHECK(report.cancelled_runs > 0);
  CHECK(report.busy_rejections > 0);
  CHECK(report.elapsed < std::chrono::seconds(30));
  MESSAGE("stress: " << report.elapsed.count() << " ms, " << report.transitions
                     << " transitions, " << report.cancelled_runs << " cancelled runs, "
                     << report.busy_rejections << " busy rejections");
}
