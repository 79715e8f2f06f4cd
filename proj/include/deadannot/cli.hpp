// SPDX-License-Identifier: Apache-2.0
//
// Batch driver behind the `dead-annot` command. The executable only parses
// arguments; everything else lives here so it can be tested in-process.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "deadannot/minimizer.hpp"
#include "deadannot/reporting.hpp"

namespace deadannot {

enum class Command { simplify, log, completeness, timing };

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitOracle = 3;

struct CliInvocation {
  Command command = Command::simplify;
  /// Files, directories (every *.dfy inside) or glob patterns.
  std::vector<std::string> inputs;
  /// `deps:<path>` or `ext:<path>`.
  std::string oracle;
  std::filesystem::path out_dir = ".";
  Algorithm algorithm = Algorithm::combined;
  std::set<AnnotationKind> kinds;
  Passes passes = Passes::whole_then_split;
  /// Parallel files; honoured for the dependency oracle only.
  unsigned jobs = 1;
  /// `log`: measure verification time before and after (3-run means).
  bool timing = false;
};

/// Source of per-file verifiers for an oracle spec.
class OracleFactory {
 public:
  virtual ~OracleFactory() = default;
  /// Verifier for `program`. Throws ConfigError when the oracle cannot be
  /// set up for it. `cached` wraps slow backends in a CachingVerifier.
  virtual std::unique_ptr<Verifier> make(const AnnotatedProgram& program,
                                         const std::filesystem::path& input,
                                         bool cached = true) = 0;
  /// Whether files may be processed concurrently.
  virtual bool parallel() const = 0;
};

/// Parses `deps:<path>` / `ext:<path>`. For `deps:` a directory means one
/// `<stem>.deps` per input (absent file: no directives); a file is shared
/// by all inputs. Throws ConfigError.
std::unique_ptr<OracleFactory> make_oracle_factory(const std::string& spec,
                                                   std::size_t input_count);

/// Expands inputs into a sorted, de-duplicated file list. Throws
/// std::runtime_error for an input matching nothing.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::string>& inputs);

/// `<stem>.min<ext>` inside `out_dir`.
std::filesystem::path minimized_path(const std::filesystem::path& input,
                                     const std::filesystem::path& out_dir);

/// Parses a comma-separated kind list. Throws std::invalid_argument.
std::set<AnnotationKind> parse_kinds(const std::string& list);

int run_simplify(const CliInvocation& inv, std::ostream& out, std::ostream& err);
int run_log(const CliInvocation& inv, std::ostream& out, std::ostream& err);
int run_completeness(const CliInvocation& inv, std::ostream& out, std::ostream& err);
int run_timing(const CliInvocation& inv, std::ostream& out, std::ostream& err);
int run_command(const CliInvocation& inv, std::ostream& out, std::ostream& err);

}  // namespace deadannot
