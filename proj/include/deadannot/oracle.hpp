// SPDX-License-Identifier: Apache-2.0
//
// Verification oracles: the verifier interface, the synthetic dependency
// oracle, the external-process adapter and a method-level cache.

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "deadannot/formula.hpp"
#include "deadannot/source_model.hpp"

namespace deadannot {

/// The oracle could not be run at all (spawn failure, missing binary).
class OracleUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid oracle configuration: bad sidecar, unknown ids, bad JSON.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a stop was requested before a verify call.
class Cancelled : public std::runtime_error {
 public:
  Cancelled() : std::runtime_error("cancelled") {}
};

enum class Verdict { pass, fail };

struct Diagnostic {
  std::string method;  // empty when unattributed
  std::string message;
  std::optional<std::size_t> line;
};

struct VerifierOutcome {
  std::map<std::string, Verdict> verdicts;
  std::vector<Diagnostic> diagnostics;
  std::chrono::microseconds elapsed{0};
  bool timed_out = false;
};

/// True iff `method` failed. Throws std::out_of_range for a method without
/// a verdict.
bool has_error(const VerifierOutcome& outcome, std::string_view method);

class Verifier {
 public:
  virtual ~Verifier() = default;

  /// Verifies `program` with `edits` applied. Throws Cancelled if `stop`
  /// was requested before the call, OracleUnavailable if the backend
  /// cannot run.
  VerifierOutcome verify(const AnnotatedProgram& program, const EditSet& edits,
                         std::stop_token stop = {});

  /// Number of verify() invocations that reached the backend.
  std::size_t calls() const { return calls_.load(); }

  /// True when adding annotations can never turn a pass into a fail.
  virtual bool monotone() const { return false; }

 protected:
  virtual VerifierOutcome run(const AnnotatedProgram& program, const EditSet& edits,
                              std::stop_token stop) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

/// Per-job verifier call accounting.
struct CallCounter {
  std::size_t total = 0;
  /// Calls whose submitted edits changed the given method.
  std::map<std::string, std::size_t> per_method_rounds;
};

// ---------------------------------------------------------------------------
// Dependency oracle

struct DependencyOracle {
  /// Method name -> formula. Methods without a directive verify always.
  std::map<std::string, Formula> formulas;
  bool monotone = true;
};

/// Parses sidecar text without checking ids against a program. Errors carry
/// `source_name:line:column`.
DependencyOracle parse_dependency_oracle(std::string_view text,
                                         std::string_view source_name = "<sidecar>");

/// Checks every variable against `program`: unknown ids, references across
/// methods, and (unless `ignore_unknown_methods`) directives for methods the
/// program lacks are ConfigErrors. Directives for absent methods are dropped
/// when ignored.
void bind_dependency_oracle(DependencyOracle& oracle, const AnnotatedProgram& program,
                            bool ignore_unknown_methods = false);

DependencyOracle load_dependency_oracle(const std::filesystem::path& path,
                                        const AnnotatedProgram& program,
                                        bool ignore_unknown_methods = false);

/// Rewrites formulas over the ids of `after`, the re-parsed result of
/// applying `edits` to `before`. Variables of removed units become false.
DependencyOracle rebase_dependency_oracle(const DependencyOracle& oracle,
                                          const AnnotatedProgram& before,
                                          const EditSet& edits,
                                          const AnnotatedProgram& after);

/// Sidecar text for `oracle`.
std::string to_sidecar(const DependencyOracle& oracle);

/// Evaluates every method's formula under the presence assignment implied
/// by the edits.
class SyntheticVerifier : public Verifier {
 public:
  explicit SyntheticVerifier(DependencyOracle oracle) : oracle_(std::move(oracle)) {}

  bool monotone() const override { return oracle_.monotone; }
  const DependencyOracle& oracle() const { return oracle_; }

 protected:
  VerifierOutcome run(const AnnotatedProgram& program, const EditSet& edits,
                      std::stop_token stop) override;

 private:
  DependencyOracle oracle_;
};

// ---------------------------------------------------------------------------
// External verifier

enum class FailureDetect { nonzero_exit, diagnostic_regex };
enum class MethodAttribution { by_line_span, by_name };

struct ExternalVerifierConfig {
  std::vector<std::string> command;
  long long timeout_ms = 10000;
  FailureDetect failure_detect = FailureDetect::nonzero_exit;
  std::string diagnostic_regex;
  MethodAttribution method_attribution = MethodAttribution::by_line_span;
};

/// Parses and validates a JSON config document. DEAD_ANNOT_TIMEOUT_MS, when
/// set, overrides timeout_ms.
ExternalVerifierConfig parse_external_config(std::string_view json_text);
ExternalVerifierConfig load_external_config(const std::filesystem::path& path);

/// Writes the rendered program to a temporary file and runs the configured
/// command on it.
class ExternalVerifier : public Verifier {
 public:
  explicit ExternalVerifier(ExternalVerifierConfig config);

  const ExternalVerifierConfig& config() const { return config_; }

 protected:
  VerifierOutcome run(const AnnotatedProgram& program, const EditSet& edits,
                      std::stop_token stop) override;

 private:
  ExternalVerifierConfig config_;
};

/// Turns one finished process run into verdicts. Diagnostic lines refer to
/// `rendering.text`, the file the command saw.
VerifierOutcome interpret_external_result(const ExternalVerifierConfig& config,
                                          const AnnotatedProgram& program,
                                          const Rendering& rendering, int exit_code,
                                          const std::string& output);

// ---------------------------------------------------------------------------
// Cache

/// Caches verdicts per method, keyed by the method's text and the presence
/// of its own annotations. A verify whose methods are all cached does not
/// reach the inner verifier.
class CachingVerifier : public Verifier {
 public:
  explicit CachingVerifier(std::shared_ptr<Verifier> inner) : inner_(std::move(inner)) {}

  bool monotone() const override { return inner_->monotone(); }
  std::size_t backend_calls() const { return inner_->calls(); }
  std::size_t hits() const;
  void clear();

 protected:
  VerifierOutcome run(const AnnotatedProgram& program, const EditSet& edits,
                      std::stop_token stop) override;

 private:
  std::shared_ptr<Verifier> inner_;
  mutable std::mutex mutex_;
  std::map<std::string, Verdict> cache_;
  std::size_t hits_ = 0;
};

// ---------------------------------------------------------------------------

struct PreflightResult {
  std::set<std::string> verified;
  VerifierOutcome outcome;
};

/// Verifies the unedited program once and marks `initially_verified`.
PreflightResult preflight(AnnotatedProgram& program, Verifier& verifier,
                          std::stop_token stop = {});

/// Methods of `program` whose text is touched by `edits`.
std::set<std::string> methods_touched(const AnnotatedProgram& program, const EditSet& edits);

}  // namespace deadannot
