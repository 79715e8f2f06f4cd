// SPDX-License-Identifier: Apache-2.0

#include "deadannot/minimizer.hpp"

#include <algorithm>

namespace deadannot {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::simple: return "simple";
    case Algorithm::complete: return "complete";
    case Algorithm::combined: return "combined";
  }
  return "";
}

std::optional<Algorithm> algorithm_from_string(std::string_view name) {
  if (name == "simple") return Algorithm::simple;
  if (name == "complete") return Algorithm::complete;
  if (name == "combined") return Algorithm::combined;
  return std::nullopt;
}

std::vector<const MethodRecord*> MinimizationJob::methods() const {
  std::vector<const MethodRecord*> out;
  for (const auto& m : program->methods) {
    if (!m.initially_verified) continue;
    if (scope && !scope->count(m.name)) continue;
    out.push_back(&m);
  }
  return out;
}

const std::set<AnnotationKind>* MinimizationJob::kinds() const {
  return options.enabled_kinds.empty() ? nullptr : &options.enabled_kinds;
}

std::size_t count_annotations(const MethodRecord& method, const std::set<AnnotationKind>* kinds) {
  return removal_targets(method, kinds).size();
}

namespace {

// One verify call on the job's current removal state.
VerifierOutcome check(MinimizationJob& job, const std::vector<const MethodRecord*>& participants) {
  VerifierOutcome outcome = job.verifier->verify(*job.program, job.edits(), job.stop);
  ++job.calls.total;
  for (const auto* m : participants) {
    ++job.calls.per_method_rounds[m->name];
    job.method_time[m->name] += outcome.elapsed;
  }
  return outcome;
}

void record(MinimizationJob& job, const VerifierOutcome& outcome, const std::string& target,
            bool kept_removal) {
  job.trace.push_back({target, kept_removal ? Attempt::Action::removed : Attempt::Action::restored,
                       job.calls.total - 1, outcome.elapsed});
}

bool target_removed(const MinimizationJob& job, const AnnotationTarget& t) {
  return job.removed.count(t.members.front()) > 0;
}

// Removes `ids` tentatively and keeps the removal iff `method` still
// verifies.
bool try_remove(MinimizationJob& job, const MethodRecord& method, const std::string& target,
                const std::vector<std::string>& ids) {
  for (const auto& id : ids) job.removed.insert(id);
  const VerifierOutcome outcome = check(job, {&method});
  const bool ok = !has_error(outcome, method.name);
  if (!ok) {
    for (const auto& id : ids) job.removed.erase(id);
  }
  record(job, outcome, target, ok);
  return ok;
}

void simple_method(MinimizationJob& job, const MethodRecord& method) {
  std::size_t cursor = 0;
  while (true) {
    const NextAnnotation next = next_annotation(method, cursor, job.kinds());
    if (!next.target) break;
    cursor = next.cursor;
    if (target_removed(job, *next.target)) continue;
    try_remove(job, method, next.target->id, next.target->members);
  }
}

struct CompleteSearch {
  MinimizationJob& job;
  const MethodRecord& method;
  std::vector<AnnotationTarget> targets;

  std::size_t size() const {
    return static_cast<std::size_t>(std::count_if(
        targets.begin(), targets.end(),
        [&](const AnnotationTarget& t) { return !target_removed(job, t); }));
  }

  void run(std::size_t pos) {
    if (pos >= targets.size()) return;
    const AnnotationTarget& target = targets[pos];
    if (target_removed(job, target)) {
      run(pos + 1);
      return;
    }
    const std::set<std::string> pre = job.removed;
    for (const auto& id : target.members) job.removed.insert(id);
    const VerifierOutcome outcome = check(job, {&method});
    if (has_error(outcome, method.name)) {
      job.removed = pre;
      record(job, outcome, target.id, false);
      run(pos + 1);
      return;
    }
    record(job, outcome, target.id, true);
    run(pos + 1);
    const std::size_t s1 = size();
    const std::set<std::string> m1 = job.removed;
    job.removed = pre;
    run(pos + 1);
    const std::size_t s2 = size();
    if (s1 < s2) job.removed = m1;
  }
};

}  // namespace

void simple_dare(MinimizationJob& job) {
  for (const auto* m : job.methods()) {
    job.calls.per_method_rounds.try_emplace(m->name, 0);
    simple_method(job, *m);
  }
}

void complete_dare(MinimizationJob& job) {
  for (const auto* m : job.methods()) {
    job.calls.per_method_rounds.try_emplace(m->name, 0);
    auto targets = removal_targets(*m, job.kinds());
    if (targets.size() > job.options.branch_limit) {
      job.skipped.insert(m->name);
      simple_method(job, *m);
      continue;
    }
    CompleteSearch search{job, *m, std::move(targets)};
    search.run(0);
  }
}

void combined_dare(MinimizationJob& job) {
  const auto methods = job.methods();
  std::vector<std::size_t> cursors(methods.size(), 0);
  for (const auto* m : methods) job.calls.per_method_rounds.try_emplace(m->name, 0);

  while (true) {
    std::vector<const MethodRecord*> participants;
    std::vector<AnnotationTarget> attempted;
    for (std::size_t i = 0; i < methods.size(); ++i) {
      const NextAnnotation next = next_annotation(*methods[i], cursors[i], job.kinds());
      if (!next.target) continue;
      cursors[i] = next.cursor;
      participants.push_back(methods[i]);
      attempted.push_back(*next.target);
    }
    if (participants.empty()) break;

    std::vector<bool> fresh(attempted.size());
    for (std::size_t i = 0; i < attempted.size(); ++i) {
      fresh[i] = !target_removed(job, attempted[i]);
      for (const auto& id : attempted[i].members) job.removed.insert(id);
    }
    const VerifierOutcome outcome = check(job, participants);
    for (std::size_t i = 0; i < participants.size(); ++i) {
      const bool ok = !has_error(outcome, participants[i]->name);
      if (!ok && fresh[i]) {
        for (const auto& id : attempted[i].members) job.removed.erase(id);
      }
      record(job, outcome, attempted[i].id, ok || !fresh[i]);
    }
  }
}

EditSet split_pass(MinimizationJob& job) {
  auto enabled = [&](AnnotationKind k) {
    return job.options.enabled_kinds.empty() || job.options.enabled_kinds.count(k) > 0;
  };
  auto is_removed = [&](const std::string& id) { return job.removed.count(id) > 0; };

  for (const auto* m : job.methods()) {
    job.calls.per_method_rounds.try_emplace(m->name, 0);
    for (const auto& a : m->annotations) {
      if (is_removed(a.id) || !enabled(a.kind)) continue;

      if (a.kind == AnnotationKind::assert_stmt || a.kind == AnnotationKind::invariant) {
        std::vector<const SubPart*> conjuncts;
        for (const auto& p : a.parts) {
          if (p.kind == PartKind::conjunct) conjuncts.push_back(&p);
        }
        if (conjuncts.size() < 2) continue;
        for (const SubPart* c : conjuncts) {
          if (is_removed(c->id)) continue;
          const auto kept = std::count_if(conjuncts.begin(), conjuncts.end(),
                                          [&](const SubPart* p) { return !is_removed(p->id); });
          if (kept <= 1) break;
          try_remove(job, *m, c->id, {c->id});
        }
      } else if (a.kind == AnnotationKind::calc) {
        const std::size_t lines = a.calc_lines.size();
        for (std::size_t i = 0; i < lines; ++i) {
          const CalcLine& line = a.calc_lines[i];
          if (i > 0 && i + 1 < lines && line.step_part) {
            const SubPart& step = a.parts[*line.step_part];
            if (!is_removed(step.id)) try_remove(job, *m, step.id, {step.id});
          }
          for (std::size_t h : line.hints) {
            const SubPart& hint = a.parts[h];
            if (is_removed(hint.id)) continue;
            if (hint.step >= 0 && is_removed(a.id + ".s" + std::to_string(hint.step))) continue;
            try_remove(job, *m, hint.id, {hint.id});
          }
        }
      }
    }
  }
  return job.edits();
}

MinimizationResult minimize(MinimizationJob& job) {
  MinimizationResult result;
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (job.options.algorithm) {
      case Algorithm::simple: simple_dare(job); break;
      case Algorithm::complete: complete_dare(job); break;
      case Algorithm::combined: combined_dare(job); break;
    }
    result.whole_calls = job.calls.total;
    if (job.options.passes == Passes::whole_then_split) split_pass(job);
    result.split_calls = job.calls.total - result.whole_calls;
    result.edits = job.edits();
    result.removed = job.removed;
  } catch (const OracleUnavailable& e) {
    result.aborted = true;
    result.abort_reason = e.what();
    result.edits = EditSet{};
    result.removed.clear();
  }
  result.trace = job.trace;
  result.calls = job.calls;
  result.method_time = job.method_time;
  result.skipped = job.skipped;
  result.wall = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - start);
  return result;
}

}  // namespace deadannot
