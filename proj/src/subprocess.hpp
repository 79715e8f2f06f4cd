// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <stop_token>
#include <string>
#include <vector>

namespace deadannot::detail {

struct ProcessResult {
  /// Exit status, or 128 + signal number when killed by a signal.
  int exit_code = 0;
  /// Combined stdout and stderr.
  std::string output;
  bool timed_out = false;
  bool cancelled = false;
};

/// Runs `argv` (PATH lookup on argv[0]) and waits for it, killing the
/// process group on timeout or stop request. Throws OracleUnavailable when
/// the program cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv,
                          std::chrono::milliseconds timeout, std::stop_token stop);

}  // namespace deadannot::detail
