// SPDX-License-Identifier: Apache-2.0

#include "deadannot/source_model.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "lexer.hpp"

namespace deadannot {
namespace {

constexpr std::array<std::pair<AnnotationKind, std::string_view>, 8> kKindNames = {{
    {AnnotationKind::assert_stmt, "assert"},
    {AnnotationKind::invariant, "invariant"},
    {AnnotationKind::decreases, "decreases"},
    {AnnotationKind::decreases_wildcard, "decreases_wildcard"},
    {AnnotationKind::lemma_call, "lemma_call"},
    {AnnotationKind::calc, "calc"},
    {AnnotationKind::calc_step, "calc_step"},
    {AnnotationKind::calc_hint, "calc_hint"},
}};

// Id of the annotation owning a (possibly sub-part) id.
std::string_view annotation_id_of(std::string_view id) {
  const auto dot = id.rfind('.');
  if (dot == std::string_view::npos) return id;
  const auto colon = id.rfind(':');
  if (colon != std::string_view::npos && dot < colon) return id;
  return id.substr(0, dot);
}

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Applies `deletions` (absolute offsets, sorted) to text[base, base+len) and
// drops output lines that a deletion left blank. Fills `offset_map` (indexed
// relative to base) when non-null.
std::string excise(std::string_view text, std::size_t base, std::size_t len,
                   const std::vector<Span>& deletions,
                   std::vector<std::size_t>* offset_map) {
  struct OutLine {
    std::size_t start = 0;  // index into kept
    bool touched = false;
  };
  std::vector<char> kept;
  std::vector<std::size_t> origin;  // original relative offset for each kept byte
  std::vector<OutLine> lines{OutLine{}};
  kept.reserve(len);
  origin.reserve(len);

  std::size_t d = 0;
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t abs = base + i;
    while (d < deletions.size() && deletions[d].end <= abs) ++d;
    const bool deleted = d < deletions.size() && deletions[d].begin <= abs;
    if (deleted) {
      lines.back().touched = true;
      continue;
    }
    kept.push_back(text[abs]);
    origin.push_back(i);
    if (text[abs] == '\n') lines.push_back(OutLine{kept.size(), false});
  }

  std::string out;
  out.reserve(kept.size());
  if (offset_map) offset_map->assign(len + 1, std::string::npos);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t start = lines[li].start;
    const std::size_t stop = li + 1 < lines.size() ? lines[li + 1].start : kept.size();
    bool drop = false;
    if (lines[li].touched) {
      drop = true;
      for (std::size_t k = start; k < stop; ++k) {
        if (kept[k] != '\n' && !is_blank(kept[k])) {
          drop = false;
          break;
        }
      }
    }
    if (drop) continue;
    for (std::size_t k = start; k < stop; ++k) {
      if (offset_map) (*offset_map)[origin[k]] = out.size();
      out.push_back(kept[k]);
    }
  }
  if (offset_map) (*offset_map)[len] = out.size();
  return out;
}

const SubPart* find_step(const Annotation& a, int step) {
  for (const auto& p : a.parts) {
    if (p.kind == PartKind::calc_step && p.step == step) return &p;
  }
  return nullptr;
}

void add_annotation_edits(const Annotation& a, const std::set<std::string>& ids,
                          EditSet& edits) {
  if (ids.contains(a.id)) {
    edits.add(a.span);
    return;
  }
  std::vector<const SubPart*> conjuncts;
  std::set<int> removed_steps;
  for (const auto& p : a.parts) {
    if (p.kind == PartKind::conjunct) conjuncts.push_back(&p);
    if ((p.kind == PartKind::calc_step || p.kind == PartKind::calc_operator) &&
        ids.contains(p.id)) {
      removed_steps.insert(p.step);
    }
  }

  // Conjuncts: keep the original separator in front of each kept conjunct
  // except the first.
  std::vector<bool> kept;
  bool any_removed = false;
  for (const auto* p : conjuncts) {
    kept.push_back(!ids.contains(p->id));
    any_removed = any_removed || !kept.back();
  }
  if (any_removed) {
    if (std::none_of(kept.begin(), kept.end(), [](bool k) { return k; })) {
      throw InvalidEdit("cannot remove every conjunct of " + a.id +
                        "; remove the annotation instead");
    }
    const std::size_t n = conjuncts.size();
    std::size_t first_kept = 0;
    while (!kept[first_kept]) ++first_kept;
    if (first_kept > 0) {
      edits.add(Span{conjuncts[0]->core.begin, conjuncts[first_kept]->core.begin});
    }
    std::size_t prev = first_kept;
    for (std::size_t i = first_kept + 1; i < n; ++i) {
      if (!kept[i]) continue;
      if (i > prev + 1) {
        edits.add(Span{conjuncts[prev]->core.end, conjuncts[i - 1]->core.end});
      }
      prev = i;
    }
    if (prev + 1 < n) {
      edits.add(Span{conjuncts[prev]->core.end, conjuncts[n - 1]->core.end});
    }
  }

  for (int step : removed_steps) edits.add(find_step(a, step)->span);
  for (const auto& p : a.parts) {
    if (p.kind != PartKind::calc_hint || !ids.contains(p.id)) continue;
    if (p.step >= 0 && removed_steps.contains(p.step)) continue;
    edits.add(p.span);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(AnnotationKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<AnnotationKind> annotation_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(PartKind kind) {
  switch (kind) {
    case PartKind::conjunct: return "conjunct";
    case PartKind::calc_step: return "calc_step";
    case PartKind::calc_hint: return "calc_hint";
    case PartKind::calc_operator: return "calc_operator";
  }
  return "unknown";
}

const std::vector<AnnotationKind>& whole_annotation_kinds() {
  static const std::vector<AnnotationKind> kinds = {
      AnnotationKind::assert_stmt, AnnotationKind::invariant,
      AnnotationKind::decreases,   AnnotationKind::decreases_wildcard,
      AnnotationKind::lemma_call,  AnnotationKind::calc,
  };
  return kinds;
}

const SubPart* Annotation::find_part(std::string_view part_id) const {
  for (const auto& p : parts) {
    if (p.id == part_id) return &p;
  }
  return nullptr;
}

const Annotation* MethodRecord::find_annotation(std::string_view id) const {
  for (const auto& a : annotations) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

const MethodRecord* AnnotatedProgram::find_method(std::string_view name) const {
  for (const auto& m : methods) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

MethodRecord* AnnotatedProgram::find_method(std::string_view name) {
  for (auto& m : methods) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

const Annotation* AnnotatedProgram::find_annotation(std::string_view id) const {
  const std::string_view owner = annotation_id_of(id);
  const auto colon = owner.find(':');
  if (colon == std::string_view::npos) return nullptr;
  const MethodRecord* m = find_method(owner.substr(0, colon));
  if (!m) return nullptr;
  const Annotation* a = m->find_annotation(owner);
  if (!a) return nullptr;
  if (owner.size() != id.size() && !a->find_part(id)) return nullptr;
  return a;
}

std::vector<std::string> AnnotatedProgram::all_ids() const {
  std::vector<std::string> ids;
  for (const auto& m : methods) {
    for (const auto& a : m.annotations) {
      ids.push_back(a.id);
      for (const auto& p : a.parts) ids.push_back(p.id);
    }
  }
  return ids;
}

// ---------------------------------------------------------------------------

EditSet::EditSet(std::vector<Span> deletions) {
  for (Span s : deletions) add(s);
}

void EditSet::add(Span span) {
  if (span.empty()) return;
  auto it = std::lower_bound(deletions_.begin(), deletions_.end(), span);
  if (it != deletions_.end() && it->overlaps(span)) {
    throw InvalidEdit("overlapping deletions");
  }
  if (it != deletions_.begin() && std::prev(it)->overlaps(span)) {
    throw InvalidEdit("overlapping deletions");
  }
  deletions_.insert(it, span);
}

bool EditSet::covers(Span span) const {
  if (span.empty()) return false;
  std::size_t pos = span.begin;
  for (const Span& d : deletions_) {
    if (d.end <= pos) continue;
    if (d.begin > pos) return false;
    pos = d.end;
    if (pos >= span.end) return true;
  }
  return false;
}

bool EditSet::touches(Span span) const {
  return std::any_of(deletions_.begin(), deletions_.end(),
                     [&](const Span& d) { return d.overlaps(span); });
}

SyntaxError::SyntaxError(std::string message, std::size_t line, std::size_t column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      detail_(std::move(message)),
      line_(line),
      column_(column) {}

// ---------------------------------------------------------------------------

void validate_edits(const AnnotatedProgram& program, const EditSet& edits) {
  const std::string_view text = program.original_text;
  for (const Span& d : edits.deletions()) {
    if (d.end > text.size()) throw InvalidEdit("deletion past end of text");
    if (!detail::on_char_boundary(text, d.begin) || !detail::on_char_boundary(text, d.end)) {
      throw InvalidEdit("deletion splits a multi-byte character");
    }
    bool inside = false;
    for (const auto& m : program.methods) {
      if (!m.decl_span.overlaps(d)) continue;
      for (const auto& a : m.annotations) {
        if (a.editable.contains(d)) {
          inside = true;
          break;
        }
      }
      if (inside) break;
    }
    if (!inside) {
      throw InvalidEdit("deletion [" + std::to_string(d.begin) + ", " + std::to_string(d.end) +
                        ") is not inside an annotation");
    }
  }
}

Rendering render(const AnnotatedProgram& program, const EditSet& edits) {
  validate_edits(program, edits);
  Rendering r;
  r.text = excise(program.original_text, 0, program.original_text.size(), edits.deletions(),
                  &r.offset_map);
  return r;
}

std::string print(const AnnotatedProgram& program, const EditSet& edits) {
  validate_edits(program, edits);
  return excise(program.original_text, 0, program.original_text.size(), edits.deletions(),
                nullptr);
}

std::size_t line_of(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

// ---------------------------------------------------------------------------

std::vector<AnnotationTarget> removal_targets(const MethodRecord& method,
                                              const std::set<AnnotationKind>* kinds) {
  std::vector<AnnotationTarget> targets;
  std::optional<std::size_t> wildcard_group;
  for (const auto& a : method.annotations) {
    if (kinds && !kinds->contains(a.kind)) continue;
    if (a.kind == AnnotationKind::decreases_wildcard) {
      if (wildcard_group) {
        targets[*wildcard_group].members.push_back(a.id);
        continue;
      }
      wildcard_group = targets.size();
    }
    targets.push_back(AnnotationTarget{a.id, a.kind, {a.id}});
  }
  return targets;
}

NextAnnotation next_annotation(const MethodRecord& method, std::size_t cursor,
                               const std::set<AnnotationKind>* kinds) {
  const auto targets = removal_targets(method, kinds);
  if (cursor >= targets.size()) return NextAnnotation{std::nullopt, cursor};
  return NextAnnotation{targets[cursor], cursor + 1};
}

std::vector<SubPart> split_conjuncts(const Annotation& annotation) {
  std::vector<SubPart> parts;
  for (const auto& p : annotation.parts) {
    if (p.kind == PartKind::conjunct) parts.push_back(p);
  }
  return parts;
}

std::string recombine(const AnnotatedProgram& program, const Annotation& annotation,
                      const std::set<std::string>& kept_part_ids) {
  const std::string_view text = program.original_text;
  const auto conjuncts = split_conjuncts(annotation);
  if (!conjuncts.empty()) {
    std::vector<std::string_view> kept;
    for (const auto& c : conjuncts) {
      if (kept_part_ids.contains(c.id)) kept.push_back(text.substr(c.core.begin, c.core.size()));
    }
    if (kept.empty()) {
      throw InvalidEdit("recombine of " + annotation.id + " needs at least one conjunct");
    }
    std::string out(text.substr(annotation.span.begin,
                                conjuncts.front().core.begin - annotation.span.begin));
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (i > 0) out += " && ";
      out += kept[i];
    }
    out += text.substr(conjuncts.back().core.end,
                       annotation.span.end - conjuncts.back().core.end);
    return out;
  }

  std::set<std::string> removed;
  for (const auto& p : annotation.parts) {
    if (p.kind == PartKind::calc_operator) continue;
    if (!kept_part_ids.contains(p.id)) removed.insert(p.id);
  }
  EditSet edits;
  add_annotation_edits(annotation, removed, edits);
  return excise(text, annotation.span.begin, annotation.span.size(), edits.deletions(), nullptr);
}

EditSet edits_for(const AnnotatedProgram& program, const std::set<std::string>& removed) {
  std::map<const Annotation*, std::set<std::string>> by_annotation;
  for (const auto& id : removed) {
    const Annotation* a = program.find_annotation(id);
    if (!a) throw InvalidEdit("unknown annotation id '" + id + "'");
    by_annotation[a].insert(id);
  }
  EditSet edits;
  for (const auto& [a, ids] : by_annotation) add_annotation_edits(*a, ids, edits);
  return edits;
}

std::map<std::string, bool> presence(const AnnotatedProgram& program, const EditSet& edits) {
  std::map<std::string, bool> result;
  for (const auto& m : program.methods) {
    for (const auto& a : m.annotations) {
      const bool whole_deleted = edits.covers(a.span);
      bool all_parts = true;
      std::map<int, bool> step_present;
      for (const auto& p : a.parts) {
        if (p.kind == PartKind::calc_step) {
          step_present[p.step] = !whole_deleted && !edits.covers(p.core);
        }
      }
      for (const auto& p : a.parts) {
        bool present = !whole_deleted;
        switch (p.kind) {
          case PartKind::conjunct:
          case PartKind::calc_step:
            present = present && !edits.covers(p.core);
            break;
          case PartKind::calc_operator:
            present = present && step_present[p.step];
            break;
          case PartKind::calc_hint:
            present = present && !edits.covers(p.core) &&
                      (p.step < 0 || step_present[p.step]);
            break;
        }
        result[p.id] = present;
        all_parts = all_parts && present;
      }
      result[a.id] = !whole_deleted && all_parts;
    }
  }
  return result;
}

std::map<std::string, std::string> remap_ids(const AnnotatedProgram& before, const EditSet& edits,
                                             const AnnotatedProgram& after) {
  const Rendering r = render(before, edits);
  const auto present = presence(before, edits);

  // Units keyed by (start offset, tag).
  auto tag_of = [](const Annotation& a, const SubPart* p) {
    return p ? "p:" + std::string(to_string(p->kind)) : "a:" + std::string(to_string(a.kind));
  };
  auto start_of = [](const Annotation& a, const SubPart* p) {
    return p ? p->core.begin : a.span.begin;
  };
  std::map<std::pair<std::size_t, std::string>, std::string> after_units;
  for (const auto& m : after.methods) {
    for (const auto& a : m.annotations) {
      after_units[{start_of(a, nullptr), tag_of(a, nullptr)}] = a.id;
      for (const auto& p : a.parts) after_units[{start_of(a, &p), tag_of(a, &p)}] = p.id;
    }
  }

  std::map<std::string, std::string> mapping;
  auto map_unit = [&](const Annotation& a, const SubPart* p) {
    const std::size_t old_start = start_of(a, p);
    const std::size_t new_start = r.offset_map[old_start];
    if (new_start == std::string::npos) return;
    auto it = after_units.find({new_start, tag_of(a, p)});
    if (it != after_units.end()) mapping[p ? p->id : a.id] = it->second;
  };
  for (const auto& m : before.methods) {
    for (const auto& a : m.annotations) {
      if (edits.covers(a.span)) continue;
      map_unit(a, nullptr);
      for (const auto& p : a.parts) {
        if (present.at(p.id)) map_unit(a, &p);
      }
    }
  }
  return mapping;
}

}  // namespace deadannot
