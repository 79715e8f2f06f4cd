// SPDX-License-Identifier: Apache-2.0
//
// Dead-annotation removal: the simple, complete and combined whole-annotation
// passes and the conjunct/calc split pass.

#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stop_token>
#include <string>
#include <vector>

#include "deadannot/oracle.hpp"
#include "deadannot/source_model.hpp"

namespace deadannot {

enum class Algorithm { simple, complete, combined };
enum class Passes { whole_only, whole_then_split };

std::string_view to_string(Algorithm algorithm);
std::optional<Algorithm> algorithm_from_string(std::string_view name);

struct Attempt {
  enum class Action { removed, restored };
  std::string target;
  Action action = Action::removed;
  /// 0-based index of the verify call that decided the attempt.
  std::size_t verifier_call_index = 0;
  /// Elapsed time of that call.
  std::chrono::microseconds elapsed{0};
};

struct MinimizationOptions {
  Algorithm algorithm = Algorithm::combined;
  /// Whole-annotation kinds to target; empty means all.
  std::set<AnnotationKind> enabled_kinds;
  Passes passes = Passes::whole_then_split;
  /// Methods with more targets than this fall back to the simple strategy
  /// under Algorithm::complete.
  std::size_t branch_limit = 16;
};

struct MinimizationJob {
  MinimizationJob(const AnnotatedProgram& program, Verifier& verifier,
                  MinimizationOptions options = {})
      : program(&program), verifier(&verifier), options(std::move(options)) {}

  const AnnotatedProgram* program;
  Verifier* verifier;
  MinimizationOptions options;
  /// Restricts the job to these methods (still only initially verified ones).
  std::optional<std::set<std::string>> scope;
  std::stop_token stop;

  // Mutable state.
  std::set<std::string> removed;
  std::vector<Attempt> trace;
  CallCounter calls;
  /// Verify time of the calls each method took part in.
  std::map<std::string, std::chrono::microseconds> method_time;
  /// Methods where complete fell back to simple.
  std::set<std::string> skipped;

  /// Methods the job may touch, in document order.
  std::vector<const MethodRecord*> methods() const;
  const std::set<AnnotationKind>* kinds() const;
  EditSet edits() const { return edits_for(*program, removed); }
};

struct MinimizationResult {
  EditSet edits;
  std::set<std::string> removed;
  std::vector<Attempt> trace;
  CallCounter calls;
  std::size_t whole_calls = 0;
  std::size_t split_calls = 0;
  std::map<std::string, std::chrono::microseconds> method_time;
  std::set<std::string> skipped;
  bool aborted = false;
  std::string abort_reason;
  std::chrono::microseconds wall{0};
};

/// Number of whole-annotation targets of `method` (a wild-card group counts
/// once).
std::size_t count_annotations(const MethodRecord& method,
                              const std::set<AnnotationKind>* kinds = nullptr);

// Whole-annotation passes. Each extends `job.removed`.
void simple_dare(MinimizationJob& job);
void complete_dare(MinimizationJob& job);
void combined_dare(MinimizationJob& job);

/// Tries removing conjuncts of surviving asserts/invariants and interior
/// steps and hints of surviving calcs, one at a time. Returns the final
/// edits.
EditSet split_pass(MinimizationJob& job);

/// Runs the configured whole pass and (optionally) the split pass. The
/// program must have been preflighted. An unavailable oracle aborts with
/// empty edits; Cancelled propagates.
MinimizationResult minimize(MinimizationJob& job);

}  // namespace deadannot
