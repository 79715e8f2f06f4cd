// SPDX-License-Identifier: Apache-2.0

#include "deadannot/oracle.hpp"

#include <stdlib.h>
#include <unistd.h>

#include <algorithm>
#include <boost/regex.hpp>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "subprocess.hpp"

namespace deadannot {

bool has_error(const VerifierOutcome& outcome, std::string_view method) {
  auto it = outcome.verdicts.find(std::string(method));
  if (it == outcome.verdicts.end()) {
    throw std::out_of_range("no verdict for method '" + std::string(method) + "'");
  }
  return it->second == Verdict::fail;
}

VerifierOutcome Verifier::verify(const AnnotatedProgram& program, const EditSet& edits,
                                 std::stop_token stop) {
  if (stop.stop_requested()) throw Cancelled();
  ++calls_;
  const auto start = std::chrono::steady_clock::now();
  VerifierOutcome outcome = run(program, edits, stop);
  if (outcome.elapsed.count() == 0) {
    outcome.elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - start);
  }
  for (const auto& m : program.methods) outcome.verdicts.try_emplace(m.name, Verdict::fail);
  return outcome;
}

std::set<std::string> methods_touched(const AnnotatedProgram& program, const EditSet& edits) {
  std::set<std::string> out;
  for (const auto& m : program.methods) {
    if (edits.touches(m.decl_span)) out.insert(m.name);
  }
  return out;
}

PreflightResult preflight(AnnotatedProgram& program, Verifier& verifier, std::stop_token stop) {
  PreflightResult result;
  result.outcome = verifier.verify(program, EditSet{}, stop);
  for (auto& m : program.methods) {
    m.initially_verified = !has_error(result.outcome, m.name);
    if (m.initially_verified) result.verified.insert(m.name);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Dependency oracle

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// id -> owning method name, for every annotation and sub-part id.
std::map<std::string, std::string> id_owners(const AnnotatedProgram& program) {
  std::map<std::string, std::string> owners;
  for (const auto& m : program.methods) {
    for (const auto& a : m.annotations) {
      owners[a.id] = m.name;
      for (const auto& p : a.parts) owners[p.id] = m.name;
    }
  }
  return owners;
}

}  // namespace

DependencyOracle parse_dependency_oracle(std::string_view text, std::string_view source_name) {
  DependencyOracle oracle;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;

    auto fail = [&](const std::string& message, std::size_t offset) -> ConfigError {
      std::ostringstream os;
      os << source_name << ':' << line_no << ':' << (offset + 1) << ": " << message;
      return ConfigError(os.str());
    };

    const std::size_t lead = line.find_first_not_of(" \t\r");
    if (line.substr(lead, 6) != "method" || lead + 6 >= line.size() ||
        !std::isspace(static_cast<unsigned char>(line[lead + 6]))) {
      throw fail("expected 'method <Name> = <formula>'", lead);
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("missing '='", line.size());
    const std::string name(trim(line.substr(lead + 6, eq - lead - 6)));
    if (name.empty() || name.find_first_of(" \t") != std::string::npos) {
      throw fail("invalid method name", lead + 6);
    }
    if (oracle.formulas.count(name)) throw fail("duplicate directive for method '" + name + "'", lead);
    const std::string_view formula_text = line.substr(eq + 1);
    try {
      Formula f = parse_formula(formula_text);
      oracle.monotone = oracle.monotone && f.monotone();
      oracle.formulas.emplace(name, std::move(f));
    } catch (const FormulaError& e) {
      throw fail(e.what(), eq + 1 + e.position());
    }
  }
  return oracle;
}

void bind_dependency_oracle(DependencyOracle& oracle, const AnnotatedProgram& program,
                            bool ignore_unknown_methods) {
  const auto owners = id_owners(program);
  for (auto it = oracle.formulas.begin(); it != oracle.formulas.end();) {
    const std::string& method = it->first;
    if (!program.find_method(method)) {
      if (ignore_unknown_methods) {
        it = oracle.formulas.erase(it);
        continue;
      }
      throw ConfigError("oracle names unknown method '" + method + "'");
    }
    std::set<std::string> vars;
    it->second.collect_variables(vars);
    for (const auto& v : vars) {
      auto owner = owners.find(v);
      if (owner == owners.end()) {
        throw ConfigError("method '" + method + "': unknown annotation id '" + v + "'");
      }
      if (owner->second != method) {
        throw ConfigError("method '" + method + "': id '" + v + "' belongs to method '" +
                          owner->second + "'");
      }
    }
    ++it;
  }
  oracle.monotone = std::all_of(oracle.formulas.begin(), oracle.formulas.end(),
                                [](const auto& kv) { return kv.second.monotone(); });
}

DependencyOracle load_dependency_oracle(const std::filesystem::path& path,
                                        const AnnotatedProgram& program,
                                        bool ignore_unknown_methods) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read oracle file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  DependencyOracle oracle = parse_dependency_oracle(buf.str(), path.string());
  bind_dependency_oracle(oracle, program, ignore_unknown_methods);
  return oracle;
}

DependencyOracle rebase_dependency_oracle(const DependencyOracle& oracle,
                                          const AnnotatedProgram& before, const EditSet& edits,
                                          const AnnotatedProgram& after) {
  const auto mapping = remap_ids(before, edits, after);
  const auto present = presence(before, edits);
  DependencyOracle out;
  out.monotone = oracle.monotone;
  for (const auto& [method, formula] : oracle.formulas) {
    out.formulas.emplace(method, formula.substitute([&](const std::string& id) {
      auto p = present.find(id);
      auto m = mapping.find(id);
      if (p == present.end() || !p->second || m == mapping.end()) return Formula::constant(false);
      return Formula::variable(m->second);
    }));
  }
  return out;
}

std::string to_sidecar(const DependencyOracle& oracle) {
  std::string out;
  for (const auto& [method, formula] : oracle.formulas) {
    out += "method " + method + " = " + formula.to_string() + "\n";
  }
  return out;
}

VerifierOutcome SyntheticVerifier::run(const AnnotatedProgram& program, const EditSet& edits,
                                       std::stop_token) {
  const auto present = presence(program, edits);
  VerifierOutcome outcome;
  for (const auto& m : program.methods) {
    bool ok = true;
    if (auto it = oracle_.formulas.find(m.name); it != oracle_.formulas.end()) {
      ok = it->second.evaluate([&](const std::string& id) {
        auto p = present.find(id);
        return p != present.end() && p->second;
      });
    }
    outcome.verdicts[m.name] = ok ? Verdict::pass : Verdict::fail;
    if (!ok) outcome.diagnostics.push_back({m.name, "dependency formula not satisfied", {}});
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// External verifier

ExternalVerifierConfig parse_external_config(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("verifier config: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("verifier config: expected a JSON object");

  ExternalVerifierConfig config;
  for (const auto& [key, value] : doc.items()) {
    if (key == "command") {
      if (!value.is_array()) throw ConfigError("verifier config: command must be an array");
      for (const auto& arg : value) {
        if (!arg.is_string()) throw ConfigError("verifier config: command entries must be strings");
        config.command.push_back(arg.get<std::string>());
      }
    } else if (key == "timeout_ms") {
      if (!value.is_number_integer()) throw ConfigError("verifier config: timeout_ms must be an integer");
      config.timeout_ms = value.get<long long>();
    } else if (key == "failure_detect") {
      const auto s = value.is_string() ? value.get<std::string>() : std::string();
      if (s == "nonzero_exit") config.failure_detect = FailureDetect::nonzero_exit;
      else if (s == "diagnostic_regex") config.failure_detect = FailureDetect::diagnostic_regex;
      else throw ConfigError("verifier config: unknown failure_detect '" + s + "'");
    } else if (key == "diagnostic_regex") {
      if (!value.is_string()) throw ConfigError("verifier config: diagnostic_regex must be a string");
      config.diagnostic_regex = value.get<std::string>();
    } else if (key == "method_attribution") {
      const auto s = value.is_string() ? value.get<std::string>() : std::string();
      if (s == "by_line_span") config.method_attribution = MethodAttribution::by_line_span;
      else if (s == "by_name") config.method_attribution = MethodAttribution::by_name;
      else throw ConfigError("verifier config: unknown method_attribution '" + s + "'");
    } else {
      throw ConfigError("verifier config: unknown key '" + key + "'");
    }
  }

  if (const char* env = std::getenv("DEAD_ANNOT_TIMEOUT_MS"); env && *env) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (*end != '\0' || v <= 0) {
      throw ConfigError(std::string("DEAD_ANNOT_TIMEOUT_MS: not a positive integer: ") + env);
    }
    config.timeout_ms = v;
  }

  if (config.command.empty()) throw ConfigError("verifier config: command must be non-empty");
  if (config.timeout_ms <= 0) throw ConfigError("verifier config: timeout_ms must be positive");
  if (config.failure_detect == FailureDetect::diagnostic_regex && config.diagnostic_regex.empty()) {
    throw ConfigError("verifier config: diagnostic_regex required");
  }
  if (!config.diagnostic_regex.empty()) {
    try {
      boost::regex re(config.diagnostic_regex);
      if (re.mark_count() == 0) throw ConfigError("verifier config: diagnostic_regex has no groups");
    } catch (const boost::regex_error& e) {
      throw ConfigError(std::string("verifier config: bad diagnostic_regex: ") + e.what());
    }
  }
  return config;
}

ExternalVerifierConfig load_external_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read verifier config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_external_config(buf.str());
}

ExternalVerifier::ExternalVerifier(ExternalVerifierConfig config) : config_(std::move(config)) {
  if (config_.command.empty()) throw ConfigError("verifier config: command must be non-empty");
  if (config_.timeout_ms <= 0) throw ConfigError("verifier config: timeout_ms must be positive");
}

namespace {

std::vector<Diagnostic> scan_diagnostics(const ExternalVerifierConfig& config,
                                         const std::string& output) {
  std::vector<Diagnostic> out;
  if (config.diagnostic_regex.empty()) return out;
  const boost::regex re(config.diagnostic_regex);
  std::istringstream lines(output);
  std::string line;
  while (std::getline(lines, line)) {
    boost::smatch match;
    if (!boost::regex_search(line, match, re)) continue;
    Diagnostic d;
    d.message = line;
    // Missing named groups make the lookup throw or return unmatched.
    try {
      if (match["line"].matched) d.line = std::stoul(match["line"].str());
    } catch (const std::exception&) {
    }
    try {
      if (match["method"].matched) d.method = match["method"].str();
    } catch (const std::exception&) {
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

VerifierOutcome interpret_external_result(const ExternalVerifierConfig& config,
                                          const AnnotatedProgram& program,
                                          const Rendering& rendering, int exit_code,
                                          const std::string& output) {
  VerifierOutcome outcome;
  std::vector<Diagnostic> diagnostics = scan_diagnostics(config, output);

  // Line ranges of methods in the rendered text.
  std::vector<std::pair<std::size_t, std::size_t>> line_ranges;
  for (const auto& m : program.methods) {
    const std::size_t b = rendering.offset_map[m.decl_span.begin];
    std::size_t e = rendering.offset_map[m.decl_span.end];
    if (e == std::string::npos) e = b;
    line_ranges.emplace_back(line_of(rendering.text, b), line_of(rendering.text, e));
  }

  bool unattributed = false;
  for (auto& d : diagnostics) {
    std::string owner;
    if (config.method_attribution == MethodAttribution::by_name) {
      if (!d.method.empty() && program.find_method(d.method)) owner = d.method;
    } else if (d.line) {
      for (std::size_t i = 0; i < program.methods.size(); ++i) {
        if (line_ranges[i].first <= *d.line && *d.line <= line_ranges[i].second) {
          owner = program.methods[i].name;
          break;
        }
      }
    }
    d.method = owner;
    if (owner.empty()) unattributed = true;
  }

  const bool failed = config.failure_detect == FailureDetect::nonzero_exit
                          ? exit_code != 0
                          : (!diagnostics.empty() || exit_code != 0);
  const bool all_fail = failed && (diagnostics.empty() || unattributed);
  for (const auto& m : program.methods) outcome.verdicts[m.name] = Verdict::pass;
  if (failed) {
    for (const auto& m : program.methods) {
      const bool named = std::any_of(diagnostics.begin(), diagnostics.end(),
                                     [&](const Diagnostic& d) { return d.method == m.name; });
      if (all_fail || named) outcome.verdicts[m.name] = Verdict::fail;
    }
  }
  outcome.diagnostics = std::move(diagnostics);
  return outcome;
}

VerifierOutcome ExternalVerifier::run(const AnnotatedProgram& program, const EditSet& edits,
                                      std::stop_token stop) {
  const Rendering rendering = render(program, edits);

  std::string ext = std::filesystem::path(program.file_name).extension().string();
  if (ext.empty()) ext = ".dfy";
  std::string pattern =
      (std::filesystem::temp_directory_path() / ("dead-annot-XXXXXX" + ext)).string();
  const int fd = ::mkstemps(pattern.data(), static_cast<int>(ext.size()));
  if (fd < 0) throw OracleUnavailable("cannot create temporary file for verification");
  {
    std::size_t written = 0;
    while (written < rendering.text.size()) {
      const ssize_t n = ::write(fd, rendering.text.data() + written, rendering.text.size() - written);
      if (n <= 0) {
        ::close(fd);
        std::filesystem::remove(pattern);
        throw OracleUnavailable("cannot write temporary file '" + pattern + "'");
      }
      written += static_cast<std::size_t>(n);
    }
    ::close(fd);
  }

  std::vector<std::string> argv;
  for (std::string arg : config_.command) {
    for (std::size_t at = arg.find("{file}"); at != std::string::npos;
         at = arg.find("{file}", at + pattern.size())) {
      arg.replace(at, 6, pattern);
    }
    argv.push_back(std::move(arg));
  }

  detail::ProcessResult result;
  try {
    result = detail::run_process(argv, std::chrono::milliseconds(config_.timeout_ms), stop);
  } catch (...) {
    std::filesystem::remove(pattern);
    throw;
  }
  std::filesystem::remove(pattern);
  if (result.cancelled) throw Cancelled();

  if (result.timed_out) {
    VerifierOutcome outcome;
    outcome.timed_out = true;
    for (const auto& m : program.methods) outcome.verdicts[m.name] = Verdict::fail;
    outcome.diagnostics.push_back(
        {"", "timeout after " + std::to_string(config_.timeout_ms) + " ms", {}});
    return outcome;
  }
  return interpret_external_result(config_, program, rendering, result.exit_code, result.output);
}

// ---------------------------------------------------------------------------
// Cache

std::size_t CachingVerifier::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

void CachingVerifier::clear() {
  std::lock_guard lock(mutex_);
  cache_.clear();
}

VerifierOutcome CachingVerifier::run(const AnnotatedProgram& program, const EditSet& edits,
                                     std::stop_token stop) {
  const auto present = presence(program, edits);
  std::vector<std::string> keys;
  keys.reserve(program.methods.size());
  for (const auto& m : program.methods) {
    std::string key = m.name;
    key += '\0';
    key.append(program.original_text, m.decl_span.begin, m.decl_span.size());
    key += '\0';
    for (const auto& a : m.annotations) {
      key += present.at(a.id) ? '1' : '0';
      for (const auto& p : a.parts) key += present.at(p.id) ? '1' : '0';
    }
    keys.push_back(std::move(key));
  }

  {
    std::lock_guard lock(mutex_);
    VerifierOutcome cached;
    bool all = true;
    for (std::size_t i = 0; i < keys.size() && all; ++i) {
      auto it = cache_.find(keys[i]);
      if (it == cache_.end()) all = false;
      else cached.verdicts[program.methods[i].name] = it->second;
    }
    if (all) {
      ++hits_;
      return cached;
    }
  }

  VerifierOutcome outcome = inner_->verify(program, edits, stop);
  if (outcome.timed_out) return outcome;
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    cache_[keys[i]] = outcome.verdicts.at(program.methods[i].name);
  }
  return outcome;
}

}  // namespace deadannot
