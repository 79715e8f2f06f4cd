// SPDX-License-Identifier: Apache-2.0
//
// dead-annot: batch removal of verification annotations that the verifier
// does not need.

#include <CLI11.hpp>

#include <iostream>

#include "deadannot/cli.hpp"

int main(int argc, char** argv) {
  using namespace deadannot;

  CLI::App app{"Remove verification annotations that are not needed for verification"};
  app.require_subcommand(1);

  CliInvocation inv;
  std::string algorithm = "combined";
  std::string kinds;
  bool whole_only = false;

  const std::vector<std::pair<Command, std::pair<const char*, const char*>>> commands = {
      {Command::simplify, {"simplify", "Write <name>.min.<ext> for every input"}},
      {Command::log, {"log", "Simplify and write summary.csv and detail.csv"}},
      {Command::completeness, {"completeness", "Compare combined against complete search"}},
      {Command::timing, {"timing", "Time the three algorithms and write timing.csv"}},
  };
  for (const auto& [command, names] : commands) {
    CLI::App* sub = app.add_subcommand(names.first, names.second);
    sub->add_option("--oracle", inv.oracle, "deps:<path> or ext:<config.json>")->required();
    sub->add_option("--out", inv.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--algorithm", algorithm, "simple, complete or combined")
        ->check(CLI::IsMember({"simple", "complete", "combined"}))
        ->capture_default_str();
    sub->add_option("--kinds", kinds, "Comma-separated annotation kinds to target");
    sub->add_option("--jobs", inv.jobs, "Files processed in parallel (dependency oracle only)")
        ->check(CLI::Range(1u, 256u));
    sub->add_flag("--whole-only", whole_only, "Skip the conjunct and calc-part pass");
    if (command == Command::log) {
      sub->add_flag("--timing", inv.timing, "Measure verification time before and after");
    }
    sub->add_option("files", inv.inputs, "Programs, directories or glob patterns")->required();
    sub->callback([&inv, command = command] { inv.command = command; });
  }

  try {
    app.parse(argc, argv);
    inv.algorithm = *algorithm_from_string(algorithm);
    if (!kinds.empty()) inv.kinds = parse_kinds(kinds);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  if (whole_only) inv.passes = Passes::whole_only;

  return run_command(inv, std::cout, std::cerr);
}
