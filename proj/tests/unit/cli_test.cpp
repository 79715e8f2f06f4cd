// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <random>
#include <sstream>

#include "deadannot/cli.hpp"
#include "instances.hpp"

using namespace deadannot;
using testsupport::data_path;
using testsupport::read_file;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(const CliInvocation& inv) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_command(inv, out, err);
  return {code, out.str(), err.str()};
}

CliInvocation make(Command command, std::vector<std::string> inputs, std::string oracle,
                   const std::filesystem::path& out_dir) {
  CliInvocation inv;
  inv.command = command;
  inv.inputs = std::move(inputs);
  inv.oracle = std::move(oracle);
  inv.out_dir = out_dir;
  return inv;
}

std::string golden(const std::string& name) { return data_path("golden/" + name).string(); }

const char* const kTwoMethods = R"(method A(x: int)
  requires x > 0
{
  assert x > 0;
  assert x > 1;
  assert x > 2;
}

method B(x: int)
  requires x > 0
{
  assert x > 0;
  assert x > 1;
  assert x > 2;
  assert x > 3;
  assert x > 4;
}
)";

}  // namespace

TEST_CASE("simplify: fib with a true oracle") {
  TempDir dir;
  write_file(dir / "true.deps", "");
  const auto r = invoke(make(Command::simplify, {golden("fib_lemma.dfy")},
                             "deps:" + (dir / "true.deps").string(), dir / "out"));
  CHECK(r.code == kExitOk);
  CHECK(read_file(dir / "out" / "fib_lemma.min.dfy") == read_file(golden("fib_lemma.min.dfy")));
  CHECK(r.out.find("removed 3 of 3 annotations") != std::string::npos);
}

TEST_CASE("simplify: zero-annotation file is unchanged") {
  TempDir dir;
  const std::string text = "// nothing to do\nmethod E(x: int) returns (y: int)\n  ensures y == x\n{\n  y := x;\n}\n";
  write_file(dir / "e.dfy", text);
  write_file(dir / "e.deps", "");
  const auto r = invoke(make(Command::simplify, {(dir / "e.dfy").string()},
                             "deps:" + (dir / "e.deps").string(), dir.path()));
  CHECK(r.code == kExitOk);
  CHECK(read_file(dir / "e.min.dfy") == text);
}

TEST_CASE("simplify: complete keeps only assert P") {
  TempDir dir;
  auto inv = make(Command::simplify, {golden("pqr.dfy")}, "deps:" + golden("pqr.deps"),
                  dir.path());
  inv.algorithm = Algorithm::complete;
  CHECK(invoke(inv).code == kExitOk);
  const std::string out = read_file(dir / "pqr.min.dfy");
  CHECK(out.find("assert P;") != std::string::npos);
  CHECK(out.find("assert Q;") == std::string::npos);
  CHECK(out.find("assert R;") == std::string::npos);
}

TEST_CASE("simplify: per-input sidecars from a directory") {
  TempDir dir;
  const auto r = invoke(make(Command::simplify, {data_path("golden").string()},
                             "deps:" + data_path("golden").string(), dir.path()));
  CHECK(r.code == kExitOk);
  for (const char* stem :
       {"fib_lemma", "binary_search", "max", "set_inter_calc", "prop_add_comm"}) {
    CAPTURE(stem);
    CHECK(read_file(dir / (std::string(stem) + ".min.dfy")) ==
          read_file(golden(std::string(stem) + ".min.dfy")));
  }
  // Directory inputs skip earlier outputs.
  CHECK_FALSE(std::filesystem::exists(dir / "fib_lemma.min.min.dfy"));
}

TEST_CASE("simplify: --jobs gives the same outputs") {
  TempDir one;
  TempDir many;
  auto inv = make(Command::simplify, {data_path("golden").string()},
                  "deps:" + data_path("golden").string(), one.path());
  const auto a = invoke(inv);
  inv.out_dir = many.path();
  inv.jobs = 4;
  const auto b = invoke(inv);
  CHECK(a.code == b.code);
  for (const auto& entry : std::filesystem::directory_iterator(one.path())) {
    CHECK(read_file(entry.path()) == read_file(many / entry.path().filename().string()));
  }
}

TEST_CASE("exit codes") {
  TempDir dir;
  write_file(dir / "bad.dfy", "method M( {\n");
  write_file(dir / "ok.dfy", "method M(x: int)\n{\n  assert x == x;\n}\n");
  write_file(dir / "ok.deps", "");

  SUBCASE("parse failure is 2 and other files still run") {
    const auto r = invoke(make(Command::simplify,
                               {(dir / "bad.dfy").string(), (dir / "ok.dfy").string()},
                               "deps:" + dir.path().string(), dir / "out"));
    CHECK(r.code == kExitParse);
    CHECK(r.err.find("bad.dfy:1:") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "out" / "ok.min.dfy"));
  }
  SUBCASE("unavailable external verifier is 3") {
    write_file(dir / "ext.json", R"({"command": ["/nonexistent/verifier", "{file}"]})");
    const auto r = invoke(make(Command::simplify, {(dir / "ok.dfy").string()},
                               "ext:" + (dir / "ext.json").string(), dir / "out"));
    CHECK(r.code == kExitOracle);
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "ok.min.dfy"));
  }
  SUBCASE("bad oracle spec is 3") {
    CHECK(invoke(make(Command::simplify, {(dir / "ok.dfy").string()}, "z3:/usr/bin/z3",
                      dir.path()))
              .code == kExitOracle);
    CHECK(invoke(make(Command::simplify, {(dir / "ok.dfy").string()},
                      "deps:" + (dir / "missing.deps").string(), dir.path()))
              .code == kExitOracle);
    write_file(dir / "wrong.deps", "method M = M:assert:7\n");
    CHECK(invoke(make(Command::simplify, {(dir / "ok.dfy").string()},
                      "deps:" + (dir / "wrong.deps").string(), dir.path()))
              .code == kExitOracle);
  }
  SUBCASE("missing input is a usage error") {
    CHECK(invoke(make(Command::simplify, {(dir / "nope.dfy").string()}, "deps:" + dir.path().string(),
                      dir.path()))
              .code == kExitUsage);
  }
  SUBCASE("completeness is informational") {
    const auto r = invoke(make(Command::completeness,
                               {(dir / "bad.dfy").string(), (dir / "ok.dfy").string()},
                               "deps:" + dir.path().string(), dir.path()));
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("failed: 1") != std::string::npos);
  }
}

TEST_CASE("inputs: globs and directories") {
  TempDir dir;
  write_file(dir / "a.dfy", "method A() {}\n");
  write_file(dir / "b.dfy", "method B() {}\n");
  write_file(dir / "b.min.dfy", "method B() {}\n");
  write_file(dir / "c.txt", "");
  CHECK(expand_inputs({(dir / "*.dfy").string()}).size() == 3);
  CHECK(expand_inputs({dir.path().string()}) ==
        std::vector<std::filesystem::path>{dir / "a.dfy", dir / "b.dfy"});
  CHECK(expand_inputs({(dir / "a.dfy").string(), (dir / "a.dfy").string()}).size() == 1);
  CHECK_THROWS(expand_inputs({(dir / "*.rs").string()}));
  CHECK(minimized_path("x/y/prog.dfy", "out") == std::filesystem::path("out/prog.min.dfy"));
}

TEST_CASE("kind lists") {
  CHECK(parse_kinds("assert,invariant") ==
        std::set<AnnotationKind>{AnnotationKind::assert_stmt, AnnotationKind::invariant});
  CHECK_THROWS_AS(parse_kinds("assert,bogus"), std::invalid_argument);
  CHECK_THROWS_AS(parse_kinds("calc_step"), std::invalid_argument);
  CHECK_THROWS_AS(parse_kinds(""), std::invalid_argument);
}

TEST_CASE("log writes both csv files") {
  TempDir dir;
  auto inv = make(Command::log, {golden("pqr.dfy")}, "deps:" + golden("pqr.deps"), dir.path());
  inv.algorithm = Algorithm::simple;
  const auto r = invoke(inv);
  CHECK(r.code == kExitOk);
  const auto detail = parse_detail_csv(read_file(dir / "detail.csv"));
  REQUIRE(detail.size() == 1);
  CHECK(detail[0].kind == "assert");
  CHECK(detail[0].total == 3);
  CHECK(detail[0].removed == 1);
  CHECK(detail[0].remaining == 2);
  const auto summary = parse_summary_csv(read_file(dir / "summary.csv"));
  REQUIRE(summary.size() == 1);
  CHECK_FALSE(summary[0].verify_before);

  inv.inputs = {data_path("golden").string()};
  inv.oracle = "deps:" + data_path("golden").string();
  inv.timing = true;
  CHECK(invoke(inv).code == kExitOk);
  const auto all = parse_summary_csv(read_file(dir / "summary.csv"));
  CHECK(all.size() == 6);
  for (const auto& row : all) {
    CHECK(row.verify_before);
    CHECK(row.verify_after);
  }
}

TEST_CASE("completeness verdicts") {
  TempDir dir;
  auto r = invoke(make(Command::completeness, {golden("pqr.dfy")}, "deps:" + golden("pqr.deps"),
                       dir.path()));
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("combined-larger(1)") != std::string::npos);

  write_file(dir / "one.dfy", "method One(x: int)\n{\n  assert x == x;\n}\n");
  write_file(dir / "one.deps", "method One = One:assert:0\n");
  r = invoke(make(Command::completeness, {(dir / "one.dfy").string()},
                  "deps:" + (dir / "one.deps").string(), dir.path()));
  CHECK(r.out.find("equal-size") != std::string::npos);
}

TEST_CASE("completeness tally matches brute force") {
  TempDir dir;
  std::mt19937 rng(17);
  std::vector<std::string> inputs;
  std::size_t expected_larger = 0;
  for (int i = 0; i < 20; ++i) {
    testsupport::GenOptions gen;
    gen.max_annotations = 8;
    gen.false_method = 0.0;
    const auto instance = testsupport::generate(rng, gen);
    const std::string stem = "r" + std::to_string(i);
    write_file(dir / (stem + ".dfy"), instance.render());
    write_file(dir / (stem + ".deps"), instance.sidecar());
    inputs.push_back((dir / (stem + ".dfy")).string());

    // Simple's forward pass, replayed on the generator's own model.
    bool larger = false;
    for (const auto& m : instance.methods) {
      std::set<std::string> removed;
      for (const auto& target : m.targets()) {
        std::set<std::string> trial = removed;
        trial.insert(target.begin(), target.end());
        if (testsupport::gen_verifies(m, trial)) removed = trial;
      }
      std::size_t left = 0;
      for (const auto& target : m.targets()) left += !removed.count(target.front());
      larger = larger || left > testsupport::brute_force_minimum(m);
    }
    expected_larger += larger;
  }
  const auto r = invoke(make(Command::completeness, inputs, "deps:" + dir.path().string(),
                             dir.path()));
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("equal-size: " + std::to_string(20 - expected_larger) +
                   ", combined-larger: " + std::to_string(expected_larger) + ", failed: 0") !=
        std::string::npos);
}

TEST_CASE("timing call counts") {
  TempDir dir;
  write_file(dir / "two.dfy", kTwoMethods);
  write_file(dir / "empty.dfy", "method E() { }\n");
  const auto r = invoke(make(Command::timing,
                             {(dir / "two.dfy").string(), (dir / "empty.dfy").string(),
                              golden("binary_search.dfy")},
                             "deps:" + dir.path().string(), dir / "out"));
  CHECK(r.code == kExitOk);
  const auto rows = parse_timing_csv(read_file(dir / "out" / "timing.csv"));
  REQUIRE(rows.size() == 3);
  std::map<std::string, TimingRow> by_name;
  for (const auto& row : rows) by_name[std::filesystem::path(row.file).filename().string()] = row;
  CHECK(by_name["two.dfy"].calls_simple == 8);
  CHECK(by_name["two.dfy"].calls_combined == 5);
  CHECK(by_name["two.dfy"].calls_complete <= 7 + 31);
  CHECK(by_name["empty.dfy"].calls_simple == 0);
  CHECK(by_name["empty.dfy"].calls_combined == 0);
  CHECK(by_name["empty.dfy"].calls_complete == 0);
  CHECK(by_name["binary_search.dfy"].calls_simple == 3);
}

#ifdef DEADANNOT_CLI_PATH
TEST_CASE("the executable matches the library") {
  TempDir dir;
  const std::string cmd = std::string("'") + DEADANNOT_CLI_PATH + "' simplify --oracle deps:'" +
                          data_path("golden").string() + "' --out '" + dir.path().string() +
                          "' '" + data_path("golden").string() + "' > /dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  for (const auto& entry : std::filesystem::directory_iterator(data_path("golden"))) {
    const auto& path = entry.path();
    if (path.extension() != ".dfy" || path.stem().extension() == ".min") continue;
    CAPTURE(path);
    AnnotatedProgram program = parse(read_file(path), path.string());
    SyntheticVerifier verifier(load_dependency_oracle(
        data_path("golden/" + path.stem().string() + ".deps"), program));
    preflight(program, verifier);
    MinimizationJob job(program, verifier);
    const auto result = minimize(job);
    CHECK(read_file(minimized_path(path, dir.path())) == print(program, result.edits));
  }

  const std::string usage = std::string("'") + DEADANNOT_CLI_PATH + "' simplify > /dev/null 2>&1";
  const int status = std::system(usage.c_str());
  CHECK(WEXITSTATUS(status) == kExitUsage);
}
#endif
