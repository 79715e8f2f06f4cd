// SPDX-License-Identifier: Apache-2.0

#include "deadannot/cli.hpp"

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <thread>

namespace deadannot {
namespace {

namespace fs = std::filesystem;
using std::chrono::microseconds;

class DepsFactory : public OracleFactory {
 public:
  DepsFactory(fs::path path, bool shared_by_many) : path_(std::move(path)), many_(shared_by_many) {
    if (!fs::exists(path_)) throw ConfigError("oracle path '" + path_.string() + "' does not exist");
  }

  std::unique_ptr<Verifier> make(const AnnotatedProgram& program, const fs::path& input,
                                 bool) override {
    if (!fs::is_directory(path_)) {
      return std::make_unique<SyntheticVerifier>(load_dependency_oracle(path_, program, many_));
    }
    const fs::path sidecar = path_ / (input.stem().string() + ".deps");
    if (!fs::exists(sidecar)) return std::make_unique<SyntheticVerifier>(DependencyOracle{});
    return std::make_unique<SyntheticVerifier>(load_dependency_oracle(sidecar, program));
  }

  bool parallel() const override { return true; }

 private:
  fs::path path_;
  bool many_;
};

class ExternalFactory : public OracleFactory {
 public:
  explicit ExternalFactory(const fs::path& path) : config_(load_external_config(path)) {}

  std::unique_ptr<Verifier> make(const AnnotatedProgram&, const fs::path&, bool cached) override {
    if (!cached) return std::make_unique<ExternalVerifier>(config_);
    return std::make_unique<CachingVerifier>(std::make_shared<ExternalVerifier>(config_));
  }

  bool parallel() const override { return false; }

 private:
  ExternalVerifierConfig config_;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Result of processing one input; printed in input order.
struct FileOutcome {
  int code = kExitOk;
  std::ostringstream out;
  std::ostringstream err;
  std::optional<MinimizationReport> report;
  std::optional<TimingRow> timing;
  // completeness
  std::optional<long> delta;
};

struct Prepared {
  AnnotatedProgram program;
  std::unique_ptr<Verifier> verifier;
  std::size_t unverified = 0;
};

// Reads, parses and preflights one input. Records failures in `o`.
std::optional<Prepared> prepare(const fs::path& path, OracleFactory& factory, FileOutcome& o) {
  Prepared p;
  try {
    p.program = parse(read_text(path), path.string());
  } catch (const SyntaxError& e) {
    o.err << path.string() << ":" << e.line() << ":" << e.column() << ": syntax error: "
          << e.detail() << "\n";
    o.code = kExitParse;
    return std::nullopt;
  } catch (const std::runtime_error& e) {
    o.err << e.what() << "\n";
    o.code = kExitParse;
    return std::nullopt;
  }
  try {
    p.verifier = factory.make(p.program, path);
    preflight(p.program, *p.verifier);
  } catch (const ConfigError& e) {
    o.err << path.string() << ": oracle: " << e.what() << "\n";
    o.code = kExitOracle;
    return std::nullopt;
  } catch (const OracleUnavailable& e) {
    o.err << path.string() << ": oracle unavailable: " << e.what() << "\n";
    o.code = kExitOracle;
    return std::nullopt;
  }
  for (const auto& m : p.program.methods) p.unverified += !m.initially_verified;
  return p;
}

MinimizationOptions options_for(const CliInvocation& inv, Algorithm algorithm, Passes passes) {
  MinimizationOptions options;
  options.algorithm = algorithm;
  options.enabled_kinds = inv.kinds;
  options.passes = passes;
  return options;
}

// Whole-annotation targets left in verified methods.
std::size_t remaining_targets(const AnnotatedProgram& program, const MinimizationResult& r,
                              const std::set<AnnotationKind>* kinds) {
  std::size_t n = 0;
  for (const auto& m : program.methods) {
    if (!m.initially_verified) continue;
    for (const auto& t : removal_targets(m, kinds)) n += !r.removed.count(t.members.front());
  }
  return n;
}

template <typename Fn>
std::vector<std::unique_ptr<FileOutcome>> for_each_file(const CliInvocation& inv,
                                                        const std::vector<fs::path>& files,
                                                        OracleFactory& factory, Fn fn) {
  std::vector<std::unique_ptr<FileOutcome>> outcomes;
  for (std::size_t i = 0; i < files.size(); ++i) outcomes.push_back(std::make_unique<FileOutcome>());
  const unsigned workers =
      factory.parallel() ? std::max(1u, std::min<unsigned>(inv.jobs, files.size())) : 1u;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      FileOutcome& o = *outcomes[i];
      try {
        if (auto prepared = prepare(files[i], factory, o)) fn(files[i], *prepared, o);
      } catch (const OracleUnavailable& e) {
        o.err << files[i].string() << ": oracle unavailable: " << e.what() << "\n";
        o.code = std::max(o.code, kExitOracle);
      } catch (const ConfigError& e) {
        o.err << files[i].string() << ": oracle: " << e.what() << "\n";
        o.code = std::max(o.code, kExitOracle);
      } catch (const std::exception& e) {
        o.err << files[i].string() << ": " << e.what() << "\n";
        o.code = std::max(o.code, kExitUsage);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return outcomes;
}

int flush(const std::vector<std::unique_ptr<FileOutcome>>& outcomes, std::ostream& out,
          std::ostream& err) {
  int code = kExitOk;
  for (const auto& o : outcomes) {
    out << o->out.str();
    err << o->err.str();
    // Oracle failures outrank parse failures, which outrank I/O errors.
    code = std::max(code, o->code);
  }
  return code;
}

struct Setup {
  std::vector<fs::path> files;
  std::unique_ptr<OracleFactory> factory;
};

std::optional<Setup> setup(const CliInvocation& inv, std::ostream& err, int& code) {
  Setup s;
  try {
    s.files = expand_inputs(inv.inputs);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    code = kExitUsage;
    return std::nullopt;
  }
  if (s.files.empty()) {
    err << "no input files\n";
    code = kExitUsage;
    return std::nullopt;
  }
  try {
    s.factory = make_oracle_factory(inv.oracle, s.files.size());
  } catch (const ConfigError& e) {
    err << "oracle: " << e.what() << "\n";
    code = kExitOracle;
    return std::nullopt;
  }
  return s;
}

std::string ms(microseconds us) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f ms", static_cast<double>(us.count()) / 1000.0);
  return buf;
}

// Shared body of simplify and log.
int simplify_files(const CliInvocation& inv, std::ostream& out, std::ostream& err,
                   bool with_report) {
  int code = kExitOk;
  auto s = setup(inv, err, code);
  if (!s) return code;
  std::error_code ec;
  fs::create_directories(inv.out_dir, ec);
  if (ec) {
    err << "cannot create " << inv.out_dir.string() << ": " << ec.message() << "\n";
    return kExitUsage;
  }
  auto outcomes = for_each_file(
      inv, s->files, *s->factory, [&](const fs::path& path, Prepared& p, FileOutcome& o) {
        MinimizationJob job(p.program, *p.verifier,
                            options_for(inv, inv.algorithm, inv.passes));
        const MinimizationResult result = minimize(job);
        if (result.aborted) {
          o.err << path.string() << ": oracle unavailable: " << result.abort_reason << "\n";
          o.code = kExitOracle;
          return;
        }
        const fs::path target = minimized_path(path, inv.out_dir);
        std::ofstream file(target, std::ios::binary);
        file << print(p.program, result.edits);
        file.close();
        if (!file) throw std::runtime_error("cannot write " + target.string());

        MinimizationReport report = build_report(p.program, result);
        if (with_report && inv.timing) {
          auto timer = s->factory->make(p.program, path, false);
          report.summary.verify_before = mean_verify_time(p.program, *timer, EditSet{});
          report.summary.verify_after = mean_verify_time(p.program, *timer, result.edits);
        }
        std::size_t parts = 0;
        for (const auto& row : report.detail) parts += row.conjuncts_removed;
        o.out << path.string() << ": removed " << report.summary.annotations_removed << " of "
              << report.summary.annotations_total << " annotations";
        if (parts > 0) o.out << " and " << parts << " parts";
        o.out << ", " << result.calls.total << " verifier calls -> " << target.string();
        if (p.unverified > 0) o.out << " (" << p.unverified << " methods not verified, kept)";
        o.out << "\n";
        if (report.summary.verify_before) {
          o.out << "  verify " << ms(*report.summary.verify_before) << " -> "
                << ms(*report.summary.verify_after) << "\n";
        }
        o.report = std::move(report);
      });
  code = flush(outcomes, out, err);
  if (!with_report) return code;

  std::vector<MinimizationReport> reports;
  for (auto& o : outcomes) {
    if (o->report) reports.push_back(std::move(*o->report));
  }
  try {
    for (const auto& path : write_csv(reports, inv.out_dir)) out << "wrote " << path.string() << "\n";
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return std::max(code, kExitUsage);
  }
  std::size_t total = 0;
  std::size_t verified = 0;
  std::size_t removed = 0;
  for (const auto& r : reports) {
    total += r.summary.annotations_total;
    verified += r.verified_annotations_total;
    removed += r.summary.annotations_removed;
  }
  if (!reports.empty()) {
    const double n = static_cast<double>(reports.size());
    char line[256];
    std::snprintf(line, sizeof line,
                  "total: %zu files, %zu annotations, %zu removed (%.1f%%); per file %.2f "
                  "(%.2f in verified methods)\n",
                  reports.size(), total, removed,
                  total ? 100.0 * static_cast<double>(removed) / static_cast<double>(total) : 0.0,
                  static_cast<double>(total) / n, static_cast<double>(verified) / n);
    out << line;
  }
  return code;
}

}  // namespace

std::unique_ptr<OracleFactory> make_oracle_factory(const std::string& spec,
                                                   std::size_t input_count) {
  if (spec.rfind("deps:", 0) == 0) {
    return std::make_unique<DepsFactory>(spec.substr(5), input_count > 1);
  }
  if (spec.rfind("ext:", 0) == 0) return std::make_unique<ExternalFactory>(spec.substr(4));
  throw ConfigError("oracle must be deps:<path> or ext:<path>, got '" + spec + "'");
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::set<fs::path> files;
  for (const auto& input : inputs) {
    const fs::path path(input);
    if (fs::is_directory(path)) {
      for (const auto& entry : fs::directory_iterator(path)) {
        const fs::path& f = entry.path();
        if (!entry.is_regular_file() || f.extension() != ".dfy") continue;
        // Skip earlier outputs.
        if (f.stem().extension() == ".min") continue;
        files.insert(f);
      }
      continue;
    }
    if (fs::exists(path)) {
      files.insert(path);
      continue;
    }
    glob_t g{};
    const int rc = ::glob(input.c_str(), 0, nullptr, &g);
    if (rc != 0) {
      globfree(&g);
      throw std::runtime_error("no such file: " + input);
    }
    for (std::size_t i = 0; i < g.gl_pathc; ++i) files.insert(fs::path(g.gl_pathv[i]));
    globfree(&g);
  }
  return {files.begin(), files.end()};
}

fs::path minimized_path(const fs::path& input, const fs::path& out_dir) {
  return out_dir / (input.stem().string() + ".min" + input.extension().string());
}

std::set<AnnotationKind> parse_kinds(const std::string& list) {
  std::set<AnnotationKind> kinds;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string name = list.substr(start, comma - start);
    const auto kind = annotation_kind_from_string(name);
    const auto& whole = whole_annotation_kinds();
    if (!kind || std::find(whole.begin(), whole.end(), *kind) == whole.end()) {
      throw std::invalid_argument("unknown annotation kind '" + name + "'");
    }
    kinds.insert(*kind);
    start = comma + 1;
  }
  return kinds;
}

int run_simplify(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return simplify_files(inv, out, err, false);
}

int run_log(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return simplify_files(inv, out, err, true);
}

int run_completeness(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  int code = kExitOk;
  auto s = setup(inv, err, code);
  if (!s) return code;
  auto outcomes = for_each_file(
      inv, s->files, *s->factory, [&](const fs::path& path, Prepared& p, FileOutcome& o) {
        MinimizationJob combined(p.program, *p.verifier,
                                 options_for(inv, Algorithm::combined, Passes::whole_only));
        const MinimizationResult rc = minimize(combined);
        MinimizationJob complete(p.program, *p.verifier,
                                 options_for(inv, Algorithm::complete, Passes::whole_only));
        const MinimizationResult rk = minimize(complete);
        if (rc.aborted || rk.aborted) {
          o.err << path.string() << ": oracle unavailable: "
                << (rc.aborted ? rc.abort_reason : rk.abort_reason) << "\n";
          o.code = kExitOracle;
          return;
        }
        const auto* kinds = inv.kinds.empty() ? nullptr : &inv.kinds;
        const std::size_t left_combined = remaining_targets(p.program, rc, kinds);
        const std::size_t left_complete = remaining_targets(p.program, rk, kinds);
        const long delta = static_cast<long>(left_combined) - static_cast<long>(left_complete);
        o.delta = delta;
        o.out << path.string() << ": ";
        if (delta == 0) {
          o.out << "equal-size";
        } else if (delta > 0) {
          o.out << "combined-larger(" << delta << ")";
        } else {
          o.out << "complete-larger(" << -delta << ")";
        }
        o.out << " (combined keeps " << left_combined << ", complete keeps " << left_complete
              << ")";
        if (!rk.skipped.empty()) {
          o.out << " skipped:";
          for (const auto& m : rk.skipped) o.out << " " << m;
        }
        o.out << "\n";
      });
  flush(outcomes, out, err);
  std::size_t equal = 0;
  std::size_t larger = 0;
  std::size_t failed = 0;
  for (const auto& o : outcomes) {
    if (!o->delta) {
      ++failed;
    } else if (*o->delta == 0) {
      ++equal;
    } else {
      ++larger;
    }
  }
  out << "equal-size: " << equal << ", combined-larger: " << larger << ", failed: " << failed
      << "\n";
  return kExitOk;
}

int run_timing(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  int code = kExitOk;
  auto s = setup(inv, err, code);
  if (!s) return code;
  std::error_code ec;
  fs::create_directories(inv.out_dir, ec);
  if (ec) {
    err << "cannot create " << inv.out_dir.string() << ": " << ec.message() << "\n";
    return kExitUsage;
  }
  auto outcomes = for_each_file(
      inv, s->files, *s->factory, [&](const fs::path& path, Prepared& p, FileOutcome& o) {
        TimingRow row;
        row.file = path.string();
        for (Algorithm a : {Algorithm::simple, Algorithm::combined, Algorithm::complete}) {
          // Fresh verifier per algorithm so no run benefits from another's cache.
          auto verifier = s->factory->make(p.program, path);
          MinimizationJob job(p.program, *verifier, options_for(inv, a, Passes::whole_only));
          const MinimizationResult r = minimize(job);
          if (r.aborted) {
            o.err << path.string() << ": oracle unavailable: " << r.abort_reason << "\n";
            o.code = kExitOracle;
            return;
          }
          switch (a) {
            case Algorithm::simple:
              row.calls_simple = r.calls.total;
              row.simple = r.wall;
              break;
            case Algorithm::combined:
              row.calls_combined = r.calls.total;
              row.combined = r.wall;
              break;
            case Algorithm::complete:
              row.calls_complete = r.calls.total;
              row.complete = r.wall;
              row.complete_skipped = r.skipped.size();
              break;
          }
        }
        o.out << path.string() << ": calls simple " << row.calls_simple << ", combined "
              << row.calls_combined << ", complete " << row.calls_complete << "; time "
              << ms(row.simple) << " / " << ms(row.combined) << " / " << ms(row.complete)
              << "\n";
        o.timing = std::move(row);
      });
  code = flush(outcomes, out, err);
  std::vector<TimingRow> rows;
  for (auto& o : outcomes) {
    if (o->timing) rows.push_back(std::move(*o->timing));
  }
  const fs::path target = inv.out_dir / "timing.csv";
  std::ofstream file(target, std::ios::binary);
  file << timing_csv(rows);
  file.close();
  if (!file) {
    err << "cannot write " << target.string() << "\n";
    return std::max(code, kExitUsage);
  }
  out << "wrote " << target.string() << "\n";
  return code;
}

int run_command(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  switch (inv.command) {
    case Command::simplify:
      return run_simplify(inv, out, err);
    case Command::log:
      return run_log(inv, out, err);
    case Command::completeness:
      return run_completeness(inv, out, err);
    case Command::timing:
      return run_timing(inv, out, err);
  }
  return kExitUsage;
}

}  // namespace deadannot
