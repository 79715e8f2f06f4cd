// SPDX-License-Identifier: Apache-2.0
//
// Per-run metrics and CSV logs.

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deadannot/minimizer.hpp"

namespace deadannot {

/// One (file, method, kind) row of detail.csv.
struct DetailRow {
  std::string file;
  std::string method;
  std::string kind;
  std::size_t total = 0;
  std::size_t removed = 0;
  std::size_t remaining = 0;
  /// Conjuncts of splittable asserts/invariants, or steps and hints of
  /// calcs. Removed counts only parts dropped from a surviving annotation.
  std::size_t conjuncts_total = 0;
  std::size_t conjuncts_removed = 0;
  /// Verify calls that decided an attempt on this method and kind.
  std::size_t verifier_calls = 0;
  std::chrono::microseconds wall{0};

  friend bool operator==(const DetailRow&, const DetailRow&) = default;
};

/// One row of summary.csv.
struct SummaryRow {
  std::string file;
  std::size_t methods = 0;
  std::size_t annotations_total = 0;
  std::size_t annotations_removed = 0;
  std::size_t verifier_calls = 0;
  std::optional<std::chrono::microseconds> verify_before;
  std::optional<std::chrono::microseconds> verify_after;

  double percent_removed() const;
  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct MinimizationReport {
  SummaryRow summary;
  std::vector<DetailRow> detail;
  /// Whole annotations of initially verified methods only.
  std::size_t verified_annotations_total = 0;
};

MinimizationReport build_report(const AnnotatedProgram& program,
                                const MinimizationResult& result);

/// Mean elapsed time of `runs` verify calls on `program` under `edits`.
std::chrono::microseconds mean_verify_time(const AnnotatedProgram& program,
                                           Verifier& verifier, const EditSet& edits,
                                           int runs = 3);

inline constexpr const char* kDetailHeader =
    "file,method,kind,total,removed,remaining,conjuncts_total,conjuncts_removed,"
    "verifier_calls,wall_ms";
inline constexpr const char* kSummaryHeader =
    "file,methods,annotations_total,annotations_removed,percent_removed,verifier_calls,"
    "verify_before_ms,verify_after_ms";
inline constexpr const char* kTimingHeader =
    "file,calls_simple,calls_combined,calls_complete,ms_simple,ms_combined,ms_complete,"
    "complete_skipped";

/// Writes summary.csv and detail.csv into `out_dir` and returns their paths.
/// Throws std::runtime_error naming the path on I/O failure.
std::vector<std::filesystem::path> write_csv(const std::vector<MinimizationReport>& reports,
                                             const std::filesystem::path& out_dir);

std::string detail_csv(const std::vector<MinimizationReport>& reports);
std::string summary_csv(const std::vector<MinimizationReport>& reports);

std::vector<DetailRow> parse_detail_csv(const std::string& text);
std::vector<SummaryRow> parse_summary_csv(const std::string& text);

struct TimingRow {
  std::string file;
  std::size_t calls_simple = 0;
  std::size_t calls_combined = 0;
  std::size_t calls_complete = 0;
  std::chrono::microseconds simple{0};
  std::chrono::microseconds combined{0};
  std::chrono::microseconds complete{0};
  /// Methods where complete fell back to simple.
  std::size_t complete_skipped = 0;

  friend bool operator==(const TimingRow&, const TimingRow&) = default;
};

std::string timing_csv(const std::vector<TimingRow>& rows);
std::vector<TimingRow> parse_timing_csv(const std::string& text);

/// RFC-4180 record splitting; exposed for tests.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::string csv_field(const std::string& value);

}  // namespace deadannot
