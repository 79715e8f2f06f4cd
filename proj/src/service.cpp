// SPDX-License-Identifier: Apache-2.0

#include "deadannot/service.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <thread>

#include "deadannot/minimizer.hpp"

namespace deadannot {
namespace {

// Forwards to a replaceable backend, tracks calls in flight and optionally
// slows every call down.
class InstrumentedVerifier : public Verifier {
 public:
  InstrumentedVerifier(std::shared_ptr<Verifier> inner, std::chrono::microseconds delay)
      : inner_(std::move(inner)), delay_(delay) {}

  // Only called while no analysis runs.
  void set_inner(std::shared_ptr<Verifier> inner) { inner_ = std::move(inner); }
  bool monotone() const override { return inner_->monotone(); }
  std::size_t max_in_flight() const { return max_in_flight_.load(); }

 protected:
  VerifierOutcome run(const AnnotatedProgram& program, const EditSet& edits,
                      std::stop_token stop) override {
    const std::size_t now = ++in_flight_;
    std::size_t seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    struct Leave {
      std::atomic<std::size_t>& n;
      ~Leave() { --n; }
    } leave{in_flight_};
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    return inner_->verify(program, edits, stop);
  }

 private:
  std::shared_ptr<Verifier> inner_;
  std::chrono::microseconds delay_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
};

std::string method_of(std::string_view id) { return std::string(id.substr(0, id.find(':'))); }

std::string method_text(const AnnotatedProgram& p, const MethodRecord& m) {
  return p.original_text.substr(m.decl_span.begin, m.decl_span.size());
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::idle: return "idle";
    case Mode::running: return "running";
    case Mode::success: return "success";
    case Mode::failure: return "failure";
    case Mode::cancel: return "cancel";
  }
  return "idle";
}

bool legal_transition(Mode from, Mode to) {
  switch (from) {
    case Mode::idle: return to == Mode::running;
    case Mode::running: return to == Mode::success || to == Mode::failure || to == Mode::cancel;
    case Mode::cancel: return to == Mode::failure;
    case Mode::failure: return to == Mode::idle;
    case Mode::success: return to == Mode::idle;
  }
  return false;
}

struct JobService::Job {
  mutable std::mutex mu;
  mutable std::condition_variable cv;

  std::string id;
  Mode mode = Mode::idle;
  std::vector<std::pair<Mode, Mode>> history;

  std::shared_ptr<const AnnotatedProgram> program;
  std::uint64_t rev = 1;
  OracleSpec::Kind oracle_kind = OracleSpec::Kind::deps;
  DependencyOracle deps;
  std::shared_ptr<InstrumentedVerifier> verifier;

  /// Removed ids of the last successful analysis, per method. A method has
  /// an entry only while its result is valid.
  std::map<std::string, std::set<std::string>> results;
  std::set<std::string> dirty;
  bool needs_preflight = false;
  std::string last_error;

  std::stop_source stop;
  std::jthread worker;

  void move_to(Mode to) {
    if (!legal_transition(mode, to)) {
      throw std::logic_error("illegal mode transition " + std::string(to_string(mode)) + " -> " +
                             std::string(to_string(to)));
    }
    history.emplace_back(mode, to);
    mode = to;
    cv.notify_all();
  }

  // Client actions leave a finished analysis behind.
  void leave_success() {
    if (mode == Mode::success) move_to(Mode::idle);
  }

  bool busy() const { return mode == Mode::running || mode == Mode::cancel; }

  void install_deps_verifier() {
    verifier->set_inner(std::make_shared<SyntheticVerifier>(deps));
  }

  std::set<std::string> removable_ids() const {
    std::set<std::string> ids;
    for (const auto& [method, removed] : results) ids.insert(removed.begin(), removed.end());
    return ids;
  }

  void analyze(std::set<std::string> run_set, bool do_preflight);
};

void JobService::Job::analyze(std::set<std::string> run_set, bool do_preflight) {
  AnnotatedProgram program;
  {
    std::lock_guard lock(mu);
    program = *this->program;
  }
  const std::stop_token token = stop.get_token();
  std::optional<MinimizationResult> result;
  std::string error;
  try {
    if (do_preflight) preflight(program, *verifier, token);
    MinimizationJob job(program, *verifier);
    job.scope = run_set;
    job.stop = token;
    result = minimize(job);
    if (result->aborted) error = result->abort_reason;
  } catch (const Cancelled&) {
    error = "cancelled";
  } catch (const std::exception& e) {
    error = e.what();
  }

  std::lock_guard lock(mu);
  if (mode == Mode::cancel) {
    move_to(Mode::failure);
    move_to(Mode::idle);
    return;
  }
  if (!error.empty() || !result) {
    last_error = error;
    move_to(Mode::failure);
    move_to(Mode::idle);
    return;
  }
  for (const auto& name : run_set) results[name].clear();
  for (const auto& id : result->removed) results[method_of(id)].insert(id);
  for (const auto& name : run_set) dirty.erase(name);
  if (do_preflight) needs_preflight = false;
  this->program = std::make_shared<const AnnotatedProgram>(std::move(program));
  last_error.clear();
  move_to(Mode::success);
}

JobService::JobService(ServiceOptions options) : options_(options) {}

JobService::~JobService() {
  std::vector<std::shared_ptr<Job>> jobs;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, job] : jobs_) jobs.push_back(job);
  }
  for (auto& job : jobs) cancel(job->id);
  for (auto& job : jobs) {
    if (job->worker.joinable()) job->worker.join();
  }
}

std::shared_ptr<JobService::Job> JobService::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw ServiceError(404, "not_found", "no job '" + id + "'");
  return it->second;
}

std::string JobService::create_job(std::string source, const OracleSpec& oracle,
                                   std::string file_name) {
  auto job = std::make_shared<Job>();
  AnnotatedProgram program;
  try {
    program = parse(std::move(source), std::move(file_name));
  } catch (const SyntaxError& e) {
    throw ServiceError(422, "syntax_error", e.detail(), std::make_pair(e.line(), e.column()));
  }
  job->oracle_kind = oracle.kind;
  try {
    if (oracle.kind == OracleSpec::Kind::deps) {
      job->deps = parse_dependency_oracle(oracle.sidecar);
      bind_dependency_oracle(job->deps, program);
      job->verifier = std::make_shared<InstrumentedVerifier>(
          std::make_shared<SyntheticVerifier>(job->deps), options_.verify_delay);
    } else {
      job->verifier = std::make_shared<InstrumentedVerifier>(
          std::make_shared<CachingVerifier>(std::make_shared<ExternalVerifier>(oracle.external)),
          options_.verify_delay);
    }
    preflight(program, *job->verifier);
  } catch (const ConfigError& e) {
    throw ServiceError(422, "oracle_error", e.what());
  } catch (const OracleUnavailable& e) {
    throw ServiceError(422, "oracle_unavailable", e.what());
  }
  for (const auto& m : program.methods) job->dirty.insert(m.name);
  job->program = std::make_shared<const AnnotatedProgram>(std::move(program));

  std::lock_guard lock(mutex_);
  job->id = "j" + std::to_string(next_id_++);
  jobs_[job->id] = job;
  return job->id;
}

JobSnapshot JobService::get(const std::string& id) const {
  auto job = find(id);
  std::lock_guard lock(job->mu);
  JobSnapshot s;
  s.id = job->id;
  s.mode = job->mode;
  s.monotone = job->verifier->monotone();
  const AnnotatedProgram& p = *job->program;
  for (const auto& m : p.methods) {
    // Edited methods are re-checked before their next analysis.
    const bool unknown = job->needs_preflight && job->dirty.count(m.name);
    if (!m.initially_verified && !unknown) s.excluded.push_back(m.name);
  }
  for (const auto& [method, removed] : job->results) {
    for (const auto& rid : removed) {
      const Annotation* a = p.find_annotation(rid);
      if (!a) continue;
      RemovableEntry e;
      e.id = rid;
      e.method = method;
      if (a->id == rid) {
        e.kind = std::string(to_string(a->kind));
        e.span = a->span;
      } else {
        const SubPart* part = a->find_part(rid);
        e.kind = std::string(to_string(part->kind));
        e.span = part->core;
      }
      s.removable.push_back(std::move(e));
    }
  }
  std::sort(s.removable.begin(), s.removable.end(),
            [](const RemovableEntry& a, const RemovableEntry& b) { return a.span < b.span; });
  s.source = p.original_text;
  s.source_rev = job->rev;
  s.dirty.assign(job->dirty.begin(), job->dirty.end());
  s.last_error = job->last_error;
  s.verifier_calls = job->verifier->calls();
  s.max_in_flight = job->verifier->max_in_flight();
  return s;
}

std::vector<std::string> JobService::job_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, job] : jobs_) ids.push_back(id);
  return ids;
}

bool JobService::remove_job(const std::string& id) {
  std::shared_ptr<Job> job;
  try {
    job = find(id);
  } catch (const ServiceError&) {
    return false;
  }
  cancel(id);
  if (job->worker.joinable()) job->worker.join();
  std::lock_guard lock(mutex_);
  return jobs_.erase(id) > 0;
}

bool JobService::start_analysis(const std::string& id,
                                std::optional<std::set<std::string>> methods) {
  auto job = find(id);
  std::lock_guard lock(job->mu);
  if (job->busy()) return false;
  const AnnotatedProgram& p = *job->program;
  std::set<std::string> scope;
  if (methods && !methods->empty()) {
    for (const auto& name : *methods) {
      if (!p.find_method(name)) throw ServiceError(422, "unknown_method", "no method '" + name + "'");
    }
    scope = *methods;
  } else {
    for (const auto& m : p.methods) scope.insert(m.name);
  }
  std::set<std::string> run_set;
  for (const auto& name : scope) {
    if (job->dirty.count(name) || !job->results.count(name)) run_set.insert(name);
  }
  job->leave_success();
  job->move_to(Mode::running);
  job->stop = std::stop_source();
  // The previous worker has finished its last critical section; joining it
  // here is immediate.
  job->worker = std::jthread([raw = job.get(), run_set = std::move(run_set),
                              preflight_needed = job->needs_preflight]() mutable {
    raw->analyze(std::move(run_set), preflight_needed);
  });
  return true;
}

Mode JobService::cancel(const std::string& id) {
  auto job = find(id);
  std::unique_lock lock(job->mu);
  if (job->mode != Mode::running) return job->mode;
  job->move_to(Mode::cancel);
  job->stop.request_stop();
  job->cv.wait(lock, [&] { return job->mode == Mode::idle; });
  return job->mode;
}

std::pair<std::string, std::uint64_t> JobService::apply(const std::string& id,
                                                        const Selection& selection,
                                                        std::optional<std::uint64_t> expect_rev) {
  auto job = find(id);
  std::lock_guard lock(job->mu);
  if (job->busy()) throw ServiceError(409, "busy", "analysis is running");
  if (expect_rev && *expect_rev != job->rev) {
    throw ServiceError(409, "stale_revision",
                       "expected revision " + std::to_string(*expect_rev) + " but source is at " +
                           std::to_string(job->rev));
  }
  const std::shared_ptr<const AnnotatedProgram> before = job->program;
  const std::set<std::string> removable = job->removable_ids();
  std::set<std::string> chosen;
  switch (selection.kind) {
    case Selection::Kind::all:
      chosen = removable;
      break;
    case Selection::Kind::method: {
      if (!before->find_method(selection.value)) {
        throw ServiceError(422, "unknown_method", "no method '" + selection.value + "'");
      }
      if (auto it = job->results.find(selection.value); it != job->results.end()) {
        chosen = it->second;
      }
      break;
    }
    case Selection::Kind::id: {
      if (!removable.count(selection.value)) {
        throw ServiceError(422, "not_removable",
                           "'" + selection.value + "' is not a removable annotation");
      }
      chosen.insert(selection.value);
      // Wild-card variants go together.
      const Annotation* a = before->find_annotation(selection.value);
      if (a && a->id == selection.value && a->kind == AnnotationKind::decreases_wildcard) {
        for (const auto& other : before->find_method(method_of(a->id))->annotations) {
          if (other.kind == AnnotationKind::decreases_wildcard && removable.count(other.id)) {
            chosen.insert(other.id);
          }
        }
      }
      break;
    }
  }
  if (chosen.empty()) return {before->original_text, job->rev};

  const EditSet edits = edits_for(*before, chosen);
  AnnotatedProgram after = parse(print(*before, edits), before->file_name);
  for (auto& m : after.methods) {
    if (const MethodRecord* old = before->find_method(m.name)) {
      m.initially_verified = old->initially_verified;
    }
  }
  if (job->oracle_kind == OracleSpec::Kind::deps) {
    job->deps = rebase_dependency_oracle(job->deps, *before, edits, after);
    job->install_deps_verifier();
  }
  for (const auto& name : methods_touched(*before, edits)) {
    job->dirty.insert(name);
    job->results.erase(name);
  }
  job->program = std::make_shared<const AnnotatedProgram>(std::move(after));
  ++job->rev;
  job->needs_preflight = true;
  job->leave_success();
  return {job->program->original_text, job->rev};
}

std::pair<std::uint64_t, std::vector<std::string>> JobService::patch_source(
    const std::string& id, std::string source, std::optional<std::uint64_t> expect_rev) {
  auto job = find(id);
  std::lock_guard lock(job->mu);
  if (job->busy()) throw ServiceError(409, "busy", "analysis is running");
  if (expect_rev && *expect_rev != job->rev) {
    throw ServiceError(409, "stale_revision",
                       "expected revision " + std::to_string(*expect_rev) + " but source is at " +
                           std::to_string(job->rev));
  }
  const AnnotatedProgram& before = *job->program;
  AnnotatedProgram after;
  try {
    after = parse(std::move(source), before.file_name);
  } catch (const SyntaxError& e) {
    throw ServiceError(422, "syntax_error", e.detail(), std::make_pair(e.line(), e.column()));
  }
  DependencyOracle deps = job->deps;
  if (job->oracle_kind == OracleSpec::Kind::deps) {
    try {
      bind_dependency_oracle(deps, after, true);
    } catch (const ConfigError& e) {
      throw ServiceError(422, "oracle_error", e.what());
    }
  }
  std::vector<std::string> changed;
  for (auto& m : after.methods) {
    const MethodRecord* old = before.find_method(m.name);
    if (old && method_text(before, *old) == method_text(after, m)) {
      m.initially_verified = old->initially_verified;
      continue;
    }
    changed.push_back(m.name);
  }
  // Results of changed or deleted methods are void.
  for (auto it = job->results.begin(); it != job->results.end();) {
    const bool gone = !after.find_method(it->first) ||
                      std::find(changed.begin(), changed.end(), it->first) != changed.end();
    it = gone ? job->results.erase(it) : std::next(it);
  }
  for (auto it = job->dirty.begin(); it != job->dirty.end();) {
    it = after.find_method(*it) ? std::next(it) : job->dirty.erase(it);
  }
  job->dirty.insert(changed.begin(), changed.end());
  if (job->oracle_kind == OracleSpec::Kind::deps) {
    job->deps = std::move(deps);
    job->install_deps_verifier();
  }
  job->program = std::make_shared<const AnnotatedProgram>(std::move(after));
  ++job->rev;
  job->needs_preflight = true;
  job->leave_success();
  return {job->rev, changed};
}

bool JobService::idle_trigger(const std::string& id, long long idle_ms) {
  std::set<std::string> dirty;
  {
    auto job = find(id);
    std::lock_guard lock(job->mu);
    if (idle_ms < options_.idle_threshold_ms) return false;
    if (job->mode != Mode::idle && job->mode != Mode::success) return false;
    if (job->dirty.empty()) return false;
    dirty = job->dirty;
  }
  return start_analysis(id, dirty);
}

bool JobService::wait(const std::string& id, std::chrono::milliseconds timeout) const {
  auto job = find(id);
  std::unique_lock lock(job->mu);
  // A system_clock deadline maps to pthread_cond_timedwait, which thread
  // sanitizers understand; steady_clock waits confuse them on this libstdc++.
  const auto deadline = std::chrono::system_clock::now() + timeout;
  return job->cv.wait_until(lock, deadline, [&] { return !job->busy(); });
}

std::vector<std::pair<Mode, Mode>> JobService::transitions(const std::string& id) const {
  auto job = find(id);
  std::lock_guard lock(job->mu);
  return job->history;
}

}  // namespace deadannot
