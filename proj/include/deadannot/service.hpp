// SPDX-License-Identifier: Apache-2.0
//
// Background analysis jobs for interactive use. Each job owns one source
// revision, runs at most one analysis at a time and moves through
//
//   idle -> running -> success -> idle
//                   -> failure -> idle
//                   -> cancel -> failure -> idle
//
// Analysis never touches the source; only apply() and patch_source() do.

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "deadannot/oracle.hpp"
#include "deadannot/source_model.hpp"

namespace deadannot {

enum class Mode { idle, running, success, failure, cancel };

std::string_view to_string(Mode mode);
bool legal_transition(Mode from, Mode to);

struct OracleSpec {
  enum class Kind { deps, external } kind = Kind::deps;
  /// Sidecar text for `deps`.
  std::string sidecar;
  ExternalVerifierConfig external;
};

struct ServiceOptions {
  /// Idle time after which dirty methods are re-analyzed.
  long long idle_threshold_ms = 10000;
  /// Added to every verify call; lets tests observe a running job.
  std::chrono::microseconds verify_delay{0};
};

/// Error carrying an HTTP-style status.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, std::string message,
               std::optional<std::pair<std::size_t, std::size_t>> location = std::nullopt)
      : std::runtime_error(std::move(message)),
        status_(status),
        code_(std::move(code)),
        location_(location) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }
  /// Line and column, for syntax errors.
  const std::optional<std::pair<std::size_t, std::size_t>>& location() const { return location_; }

 private:
  int status_;
  std::string code_;
  std::optional<std::pair<std::size_t, std::size_t>> location_;
};

struct RemovableEntry {
  std::string id;
  std::string kind;
  std::string method;
  Span span;
};

struct JobSnapshot {
  std::string id;
  Mode mode = Mode::idle;
  bool monotone = false;
  std::vector<std::string> excluded;
  std::vector<RemovableEntry> removable;
  std::string source;
  std::uint64_t source_rev = 0;
  std::vector<std::string> dirty;
  std::string last_error;
  /// Verify calls issued for this job so far, preflight included.
  std::size_t verifier_calls = 0;
  /// Largest number of verify calls observed in flight at once.
  std::size_t max_in_flight = 0;
};

struct Selection {
  enum class Kind { id, method, all } kind = Kind::all;
  std::string value;
};

class JobService {
 public:
  explicit JobService(ServiceOptions options = {});
  ~JobService();
  JobService(const JobService&) = delete;
  JobService& operator=(const JobService&) = delete;

  /// Parses and preflights `source`. Throws ServiceError 422 on syntax or
  /// oracle errors.
  std::string create_job(std::string source, const OracleSpec& oracle,
                         std::string file_name = "input.dfy");
  JobSnapshot get(const std::string& id) const;
  std::vector<std::string> job_ids() const;
  bool remove_job(const std::string& id);

  /// Starts analysis of `methods` (all when empty). Returns false when the
  /// job is busy. Methods whose last result is still valid are not
  /// re-verified.
  bool start_analysis(const std::string& id, std::optional<std::set<std::string>> methods = {});
  /// Stops a running analysis and returns once the job is idle again. A
  /// no-op otherwise. Returns the resulting mode.
  Mode cancel(const std::string& id);
  /// Deletes the selected removable units. Returns the new source and
  /// revision. Throws ServiceError 409 when busy or `expect_rev` is stale,
  /// 422 for selections that are not removable.
  std::pair<std::string, std::uint64_t> apply(const std::string& id, const Selection& selection,
                                              std::optional<std::uint64_t> expect_rev = {});
  /// Replaces the source; methods whose text changed become dirty.
  std::pair<std::uint64_t, std::vector<std::string>> patch_source(
      const std::string& id, std::string source, std::optional<std::uint64_t> expect_rev = {});
  /// Starts analysis of the dirty methods when the client has been idle
  /// long enough. Returns whether it started.
  bool idle_trigger(const std::string& id, long long idle_ms);

  /// Blocks until the job is not running (or the timeout expires).
  bool wait(const std::string& id,
            std::chrono::milliseconds timeout = std::chrono::milliseconds(60000)) const;
  /// Every mode change of the job, in order.
  std::vector<std::pair<Mode, Mode>> transitions(const std::string& id) const;

  const ServiceOptions& options() const { return options_; }

 private:
  struct Job;
  std::shared_ptr<Job> find(const std::string& id) const;

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::uint64_t next_id_ = 1;
};

}  // namespace deadannot
