// SPDX-License-Identifier: Apache-2.0
//
// Randomized driver for JobService: interleaves analyses, cancels, applies,
// patches, idle triggers and reads, and checks the invariants that must
// hold no matter the interleaving.

#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace testsupport {

struct StressReport {
  std::size_t steps = 0;
  std::size_t analyses_started = 0;
  std::size_t applies = 0;
  std::size_t patches = 0;
  std::size_t cancels = 0;
  std::size_t transitions = 0;
  /// Runs stopped by a cancel.
  std::size_t cancelled_runs = 0;
  /// Operations refused with 409.
  std::size_t busy_rejections = 0;
  std::size_t max_in_flight = 0;
  std::chrono::milliseconds elapsed{0};
  /// One line per violated invariant; empty when all held.
  std::vector<std::string> violations;
};

StressReport run_service_stress(std::uint32_t seed, std::size_t steps);

}  // namespace testsupport
