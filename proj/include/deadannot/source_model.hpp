// SPDX-License-Identifier: Apache-2.0
//
// Annotated program model for MiniDfy sources: parsing, annotation
// enumeration, conjunct/calc splitting and span-based printing.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deadannot {

/// Half-open byte range [begin, end) over a source text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool contains(const Span& other) const {
    return begin <= other.begin && other.end <= end;
  }
  bool overlaps(const Span& other) const {
    return begin < other.end && other.begin < end;
  }
  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

enum class MethodKind { method, lemma };

enum class AnnotationKind {
  assert_stmt,
  invariant,
  decreases,
  decreases_wildcard,
  lemma_call,
  calc,
  calc_step,
  calc_hint,
};

enum class PartKind { conjunct, calc_step, calc_hint, calc_operator };

std::string_view to_string(AnnotationKind kind);
std::optional<AnnotationKind> annotation_kind_from_string(std::string_view name);
std::string_view to_string(PartKind kind);

/// Kinds that denote whole annotations (targets of the whole-removal pass).
const std::vector<AnnotationKind>& whole_annotation_kinds();

/// A removable piece of an annotation: a conjunct, a calc step, a calc hint,
/// or the explicit operator preceding a calc step.
struct SubPart {
  std::string id;
  PartKind kind = PartKind::conjunct;
  /// Bytes deleted when this part alone is removed.
  Span span;
  /// The part's own text; the part is absent iff these bytes are deleted.
  Span core;
  std::optional<Span> operator_span;
  /// Calc step index this part belongs to (operators, attached hints);
  /// -1 when unattached.
  int step = -1;
};

/// One line of a calc body: `op? hint* expr;`.
struct CalcLine {
  std::optional<Span> op;
  std::vector<std::size_t> hints;  // indexes into Annotation::parts
  Span expr;                       // includes the terminating ';'
  /// Index into Annotation::parts of the step part, for interior lines.
  std::optional<std::size_t> step_part;
};

struct Annotation {
  std::string id;
  AnnotationKind kind = AnnotationKind::assert_stmt;
  /// Whole statement or clause including its terminator.
  Span span;
  /// Expression of assert/invariant/decreases clauses.
  std::optional<Span> expr;
  std::vector<SubPart> parts;
  std::vector<CalcLine> calc_lines;
  /// Header operator of a calc (`calc ==> {`), if written.
  std::optional<std::string> calc_operator;
  /// True for a `decreases` clause in a method header.
  bool in_header = false;

  /// Region edits to this annotation may touch: `span` widened leftwards
  /// over blanks on its first line.
  Span editable;

  const SubPart* find_part(std::string_view part_id) const;
};

struct MethodRecord {
  std::string name;
  MethodKind kind = MethodKind::method;
  std::vector<Span> contract_spans;
  /// Braced body; empty span positioned at the declaration end when absent.
  Span body_span;
  /// Whole declaration, from the keyword through the body.
  Span decl_span;
  std::vector<Annotation> annotations;
  bool initially_verified = false;

  const Annotation* find_annotation(std::string_view id) const;
};

struct AnnotatedProgram {
  std::string original_text;
  std::vector<MethodRecord> methods;
  std::string file_name;

  const MethodRecord* find_method(std::string_view name) const;
  MethodRecord* find_method(std::string_view name);
  /// Annotation owning `id` (an annotation id or a sub-part id).
  const Annotation* find_annotation(std::string_view id) const;
  /// Every annotation and sub-part id of the program, in document order.
  std::vector<std::string> all_ids() const;
};

/// Set of byte ranges to delete from `original_text`. Ranges are kept
/// sorted; construction rejects overlaps.
class EditSet {
 public:
  EditSet() = default;
  explicit EditSet(std::vector<Span> deletions);

  const std::vector<Span>& deletions() const { return deletions_; }
  bool empty() const { return deletions_.empty(); }
  void add(Span span);
  /// True iff every byte of `span` is deleted.
  bool covers(Span span) const;
  /// True iff at least one byte of `span` is deleted.
  bool touches(Span span) const;

  friend bool operator==(const EditSet&, const EditSet&) = default;

 private:
  std::vector<Span> deletions_;
};

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(std::string message, std::size_t line, std::size_t column);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  std::size_t line_;
  std::size_t column_;
};

class InvalidEdit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

AnnotatedProgram parse(std::string text, std::string file_name);

/// Source text with `edits` excised. Lines left holding only blanks by a
/// deletion are dropped entirely.
std::string print(const AnnotatedProgram& program, const EditSet& edits);

/// Printed text plus, for every original byte offset, its offset in the
/// printed text (or npos when deleted). The vector has size text+1 so the
/// end offset maps as well.
struct Rendering {
  std::string text;
  std::vector<std::size_t> offset_map;
};
Rendering render(const AnnotatedProgram& program, const EditSet& edits);

/// A whole-annotation removal target. Wild-card variants of one method are
/// grouped into a single target.
struct AnnotationTarget {
  std::string id;
  AnnotationKind kind = AnnotationKind::assert_stmt;
  std::vector<std::string> members;
};

/// Deterministic per-method target list in document order, restricted to
/// `kinds` when given.
std::vector<AnnotationTarget> removal_targets(
    const MethodRecord& method,
    const std::set<AnnotationKind>* kinds = nullptr);

struct NextAnnotation {
  std::optional<AnnotationTarget> target;
  std::size_t cursor = 0;
};

/// Next target at or after `cursor`, and the cursor just past it. Identity
/// on the cursor once the end is reached.
NextAnnotation next_annotation(const MethodRecord& method, std::size_t cursor,
                               const std::set<AnnotationKind>* kinds = nullptr);

/// Conjunct parts of an assert or invariant (a single part when the
/// expression has no top-level `&&`).
std::vector<SubPart> split_conjuncts(const Annotation& annotation);

/// Text of `annotation` after keeping only `kept_part_ids`.
/// Conjuncts are joined with " && "; calc bodies keep their first and last
/// lines and drop a removed step together with its preceding operator.
std::string recombine(const AnnotatedProgram& program,
                      const Annotation& annotation,
                      const std::set<std::string>& kept_part_ids);

/// Deletions realizing the removal of `removed` ids (whole annotation ids,
/// sub-part ids, or wildcard group members).
EditSet edits_for(const AnnotatedProgram& program,
                  const std::set<std::string>& removed);

/// Presence of every annotation and sub-part id under `edits`.
std::map<std::string, bool> presence(const AnnotatedProgram& program,
                                     const EditSet& edits);

/// Maps ids that survive `edits` onto the ids of `after`, the re-parsed
/// printed text. Removed units are absent from the map.
std::map<std::string, std::string> remap_ids(const AnnotatedProgram& before,
                                             const EditSet& edits,
                                             const AnnotatedProgram& after);

/// Throws InvalidEdit unless every deletion lies inside one annotation's
/// editable region and on UTF-8 character boundaries.
void validate_edits(const AnnotatedProgram& program, const EditSet& edits);

/// 1-based line of a byte offset.
std::size_t line_of(std::string_view text, std::size_t offset);

}  // namespace deadannot
