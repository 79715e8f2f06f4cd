// SPDX-License-Identifier: Apache-2.0
//
// Recursive-descent parser for MiniDfy. Only statement structure and
// annotation boundaries are recovered; expressions are balanced token runs.

#include <algorithm>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>

#include "deadannot/source_model.hpp"
#include "lexer.hpp"

namespace deadannot {
namespace {

using detail::Token;
using detail::TokenKind;

const std::unordered_set<std::string_view> kClauseKeywords = {
    "requires", "ensures", "decreases", "modifies", "reads", "invariant",
};

const std::unordered_set<std::string_view> kDeclKeywords = {
    "method", "lemma",    "function", "predicate", "datatype", "codatatype",
    "type",   "newtype",  "const",    "include",   "import",   "ghost",
    "static", "twostate", "constructor", "class",  "trait",     "module",
    "iterator",
};

// Identifiers that cannot end an expression; a `{` following one of these
// opens a set/map display rather than a statement block.
const std::unordered_set<std::string_view> kOperatorWords = {
    "in",   "then",  "else",   "forall", "exists", "by",  "returns",
    "if",   "match", "case",   "var",    "new",    "calc", "assert",
    "while", "set",  "iset",   "map",    "imap",   "seq", "multiset",
};

const std::unordered_set<std::string_view> kCalcOperators = {
    "==", "==>", "<==>", "<==", "<=", "<", "!=", ">=", ">",
};

// Keywords after which no top-level `&&` belongs to the outer conjunction.
const std::unordered_set<std::string_view> kBinderWords = {
    "forall", "exists", "if", "match", "var", "assert", "calc",
    "set",    "iset",   "map", "imap",
};

const std::unordered_set<std::string_view> kLowPrecedenceOps = {
    "||", "==>", "<==", "<==>",
};

bool is_opener(const Token& t) {
  return t.kind == TokenKind::punct &&
         (t.text == "(" || t.text == "[" || t.text == "{");
}

bool is_closer(const Token& t) {
  return t.kind == TokenKind::punct &&
         (t.text == ")" || t.text == "]" || t.text == "}");
}

bool ends_expression(const Token& t) {
  switch (t.kind) {
    case TokenKind::identifier:
      return !kOperatorWords.contains(t.text) &&
             !kClauseKeywords.contains(t.text);
    case TokenKind::number:
    case TokenKind::string:
    case TokenKind::character:
      return true;
    case TokenKind::punct:
      return t.text == ")" || t.text == "]" || t.text == "}";
    case TokenKind::end:
      return false;
  }
  return false;
}

std::size_t extend_over_blanks(std::string_view text, std::size_t begin) {
  while (begin > 0 && (text[begin - 1] == ' ' || text[begin - 1] == '\t')) {
    --begin;
  }
  return begin;
}

struct MethodBuilder {
  MethodRecord record;
};

class Parser {
 public:
  Parser(std::string_view text, std::vector<Token> tokens)
      : text_(text), tokens_(std::move(tokens)) {
    collect_lemma_names();
  }

  std::vector<MethodRecord> parse_program() {
    std::vector<MethodRecord> methods;
    while (peek().kind != TokenKind::end) parse_declaration(methods);
    return methods;
  }

 private:
  // --- token helpers ------------------------------------------------------

  const Token& peek(std::size_t ahead = 0) const {
    const std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[i];
  }
  const Token& previous() const { return tokens_[pos_ - 1]; }
  const Token& consume() {
    const Token& t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
  }
  bool at(std::string_view s) const { return peek().is(s); }

  [[noreturn]] void fail(const Token& at_token, const std::string& message) const {
    throw SyntaxError(message, at_token.line, at_token.column);
  }

  std::string describe(const Token& t) const {
    if (t.kind == TokenKind::end) return "end of input";
    return "'" + std::string(t.text) + "'";
  }

  const Token& expect(std::string_view s) {
    if (!at(s)) fail(peek(), "expected '" + std::string(s) + "' but found " + describe(peek()));
    return consume();
  }

  const Token& expect_identifier(std::string_view what) {
    if (peek().kind != TokenKind::identifier) {
      fail(peek(), "expected " + std::string(what) + " but found " + describe(peek()));
    }
    return consume();
  }

  void collect_lemma_names() {
    for (std::size_t i = 0; i + 1 < tokens_.size(); ++i) {
      if (tokens_[i].is("lemma") && tokens_[i + 1].kind == TokenKind::identifier) {
        lemma_names_.insert(std::string(tokens_[i + 1].text));
      }
    }
  }

  // Skips a balanced group starting at the current opener token.
  void skip_balanced(std::string_view open, std::string_view close) {
    const Token& start = expect(open);
    int depth = 1;
    while (depth > 0) {
      const Token& t = peek();
      if (t.kind == TokenKind::end) fail(start, "unbalanced '" + std::string(open) + "'");
      if (t.is(open)) ++depth;
      if (t.is(close)) --depth;
      consume();
    }
  }

  // Skips a generic type argument list `<...>`.
  void skip_angles() {
    const Token& start = expect("<");
    int depth = 1;
    while (depth > 0) {
      const Token& t = peek();
      if (t.kind == TokenKind::end) fail(start, "unbalanced '<'");
      if (t.is("<")) ++depth;
      if (t.is(">")) --depth;
      consume();
    }
  }

  // --- expressions --------------------------------------------------------

  // Whether the token run [first, pos_) ends in a complete operand. A `|`
  // counts when it closes a cardinality, i.e. an even number of top-level
  // bars has been seen.
  bool ends_run(std::size_t first) const {
    const Token& last = previous();
    if (!last.is("|")) return ends_expression(last);
    int depth = 0;
    std::size_t bars = 0;
    for (std::size_t i = first; i < pos_; ++i) {
      const Token& t = tokens_[i];
      if (is_opener(t)) ++depth;
      if (is_closer(t)) --depth;
      if (depth == 0 && t.is("|")) ++bars;
    }
    return bars % 2 == 0;
  }

  // Consumes a balanced expression and returns its token index range.
  std::pair<std::size_t, std::size_t> scan_expression() {
    const std::size_t first = pos_;
    int depth = 0;
    while (true) {
      const Token& t = peek();
      if (t.kind == TokenKind::end) break;
      if (depth == 0) {
        if (t.is(";")) break;
        if (is_closer(t)) break;
        if (t.kind == TokenKind::identifier &&
            (kClauseKeywords.contains(t.text) || kDeclKeywords.contains(t.text))) {
          break;
        }
        if (t.is("by")) break;
        if (t.is("{") && pos_ > first && ends_run(first)) break;
      }
      if (is_opener(t)) ++depth;
      if (is_closer(t)) --depth;
      consume();
    }
    if (pos_ == first) fail(peek(), "expected expression but found " + describe(peek()));
    return {first, pos_};
  }

  Span token_span(std::size_t first, std::size_t last_exclusive) const {
    return Span{tokens_[first].begin, tokens_[last_exclusive - 1].end};
  }

  std::vector<Span> conjunct_spans(std::size_t first, std::size_t last) const {
    std::vector<Span> spans;
    std::size_t segment_start = first;
    int depth = 0;
    for (std::size_t i = first; i < last; ++i) {
      const Token& t = tokens_[i];
      if (is_opener(t)) ++depth;
      if (is_closer(t)) --depth;
      if (depth != 0) continue;
      if (t.kind == TokenKind::identifier && kBinderWords.contains(t.text)) break;
      if (t.kind == TokenKind::punct && kLowPrecedenceOps.contains(t.text)) {
        return {token_span(first, last)};
      }
      if (t.is("&&")) {
        if (i == segment_start) return {token_span(first, last)};
        spans.push_back(token_span(segment_start, i));
        segment_start = i + 1;
      }
    }
    if (segment_start >= last) return {token_span(first, last)};
    spans.push_back(token_span(segment_start, last));
    return spans;
  }

  // --- annotations --------------------------------------------------------

  Annotation& add_annotation(MethodBuilder& builder, AnnotationKind kind, Span span) {
    auto& list = builder.record.annotations;
    Annotation a;
    a.kind = kind;
    a.span = span;
    a.id = builder.record.name + ":" + std::string(to_string(kind)) + ":" +
           std::to_string(list.size());
    a.editable = Span{extend_over_blanks(text_, span.begin), span.end};
    list.push_back(std::move(a));
    return list.back();
  }

  void add_conjuncts(Annotation& a, std::size_t first, std::size_t last) {
    a.expr = token_span(first, last);
    std::size_t k = 0;
    for (Span s : conjunct_spans(first, last)) {
      SubPart part;
      part.id = a.id + ".c" + std::to_string(k++);
      part.kind = PartKind::conjunct;
      part.span = s;
      part.core = s;
      a.parts.push_back(std::move(part));
    }
  }

  // `decreases` keyword already consumed.
  void parse_decreases(MethodBuilder* builder, const Token& keyword, bool in_header) {
    if (at("*")) {
      const Token& star = consume();
      if (builder) {
        auto& a = add_annotation(*builder, AnnotationKind::decreases_wildcard,
                                 Span{keyword.begin, star.end});
        a.in_header = in_header;
      }
      return;
    }
    auto [first, last] = scan_expression();
    if (builder) {
      auto& a = add_annotation(*builder, AnnotationKind::decreases,
                               Span{keyword.begin, tokens_[last - 1].end});
      a.expr = token_span(first, last);
      a.in_header = in_header;
    }
  }

  // --- declarations -------------------------------------------------------

  void parse_declaration(std::vector<MethodRecord>& out) {
    const Token& start = peek();
    while (at("ghost") || at("static") || at("twostate")) consume();

    if (at("method") || at("lemma") || at("constructor")) {
      const bool is_lemma = at("lemma");
      const bool is_constructor = at("constructor");
      consume();
      MethodRecord method =
          parse_method(start, is_lemma ? MethodKind::lemma : MethodKind::method, is_constructor);
      if (!names_.insert(method.name).second) {
        fail(decl_name_token_, "duplicate declaration of '" + method.name + "'");
      }
      out.push_back(std::move(method));
      return;
    }
    if (at("function") || at("predicate")) {
      consume();
      if (at("method")) consume();
      skip_function();
      return;
    }
    if (at("class") || at("trait") || at("module")) {
      consume();
      // `module A.B` is named by its last component.
      std::string name(expect_identifier("declaration name").text);
      while (at(".")) {
        consume();
        name = std::string(expect_identifier("declaration name").text);
      }
      // Skip type parameters and `extends`/`refines` clauses.
      while (!at("{")) {
        if (peek().kind == TokenKind::end) fail(start, "expected '{' to open declaration body");
        if (at("<")) {
          skip_angles();
          continue;
        }
        consume();
      }
      const Token& open = consume();
      const std::string saved = prefix_;
      prefix_ += name + ".";
      while (!at("}")) {
        if (peek().kind == TokenKind::end) fail(open, "unterminated declaration body");
        parse_declaration(out);
      }
      consume();
      prefix_ = saved;
      return;
    }
    if (at("var")) {
      // Field: runs to `;` or the next member.
      consume();
      skip_to_next_declaration();
      if (at(";")) consume();
      return;
    }
    if (at("datatype") || at("codatatype") || at("type") || at("newtype") ||
        at("const") || at("include") || at("import") || at("iterator")) {
      consume();
      skip_to_next_declaration();
      if (at(";")) consume();
      return;
    }
    fail(peek(), "expected a declaration but found " + describe(peek()));
  }

  void skip_to_next_declaration() {
    int depth = 0;
    while (peek().kind != TokenKind::end) {
      const Token& t = peek();
      if (depth == 0 && t.kind == TokenKind::identifier && kDeclKeywords.contains(t.text)) {
        return;
      }
      if (depth == 0 && (t.is("}") || (t.is("var") && !prefix_.empty()))) return;
      if (depth == 0 && t.is(";") && !prefix_.empty()) return;
      if (is_opener(t)) ++depth;
      if (is_closer(t)) --depth;
      consume();
    }
  }

  void skip_signature_tail() {
    if (at("<")) skip_angles();
    skip_balanced("(", ")");
  }

  void skip_function() {
    expect_identifier("function name");
    skip_signature_tail();
    if (at(":")) {
      consume();
      // Return type runs up to the first clause keyword or the body.
      int angle = 0;
      while (peek().kind != TokenKind::end) {
        const Token& t = peek();
        if (angle == 0 && (t.is("{") || (t.kind == TokenKind::identifier &&
                                        (kClauseKeywords.contains(t.text) ||
                                         kDeclKeywords.contains(t.text))))) {
          break;
        }
        if (t.is("<")) ++angle;
        if (t.is(">")) --angle;
        if (t.is("(")) {
          skip_balanced("(", ")");
          continue;
        }
        consume();
      }
    }
    while (peek().kind == TokenKind::identifier && kClauseKeywords.contains(peek().text)) {
      const Token& keyword = consume();
      if (keyword.is("decreases")) {
        parse_decreases(nullptr, keyword, true);
      } else {
        scan_expression();
      }
    }
    if (at("{")) skip_balanced("{", "}");
  }

  MethodRecord parse_method(const Token& start, MethodKind kind, bool is_constructor) {
    decl_name_token_ = peek();
    MethodBuilder builder;
    if (is_constructor && !at("<") && !at("(")) {
      builder.record.name = prefix_ + std::string(expect_identifier("constructor name").text);
    } else if (is_constructor) {
      builder.record.name = prefix_ + "_ctor";
    } else {
      builder.record.name = prefix_ + std::string(expect_identifier("method name").text);
    }
    builder.record.kind = kind;
    skip_signature_tail();
    if (at("returns")) {
      consume();
      skip_balanced("(", ")");
    }
    while (peek().kind == TokenKind::identifier && kClauseKeywords.contains(peek().text) &&
           !at("invariant")) {
      const Token& keyword = consume();
      if (keyword.is("decreases")) {
        parse_decreases(&builder, keyword, true);
        continue;
      }
      auto [first, last] = scan_expression();
      builder.record.contract_spans.push_back(Span{keyword.begin, tokens_[last - 1].end});
    }
    if (at("{")) {
      builder.record.body_span = parse_block(&builder);
    } else {
      const std::size_t end = previous().end;
      builder.record.body_span = Span{end, end};
    }
    builder.record.decl_span = Span{start.begin, previous().end};
    return std::move(builder.record);
  }

  // --- statements ---------------------------------------------------------

  // Parses `{ stmt* }`. Annotations are registered with `builder` unless it
  // is null (calc hints).
  Span parse_block(MethodBuilder* builder) {
    const Token& open = expect("{");
    const std::size_t begin = open.begin;
    while (!at("}")) {
      if (peek().kind == TokenKind::end) fail(open, "unterminated block");
      parse_statement(builder);
    }
    const Token& close = consume();
    return Span{begin, close.end};
  }

  void parse_statement(MethodBuilder* builder) {
    const Token& t = peek();
    if (t.is("{")) {
      parse_block(builder);
    } else if (t.is("assert")) {
      parse_assert(builder);
    } else if (t.is("calc")) {
      parse_calc(builder);
    } else if (t.is("if")) {
      parse_if(builder);
    } else if (t.is("while")) {
      parse_while(builder);
    } else if (t.is("match")) {
      parse_match(builder);
    } else if (t.kind == TokenKind::identifier && peek(1).is("(") &&
               !kOperatorWords.contains(t.text) && try_parse_call(builder)) {
      // handled
    } else {
      parse_simple_statement(builder);
    }
  }

  void parse_assert(MethodBuilder* builder) {
    const Token& keyword = consume();
    auto [first, last] = scan_expression();
    std::size_t end = 0;
    if (at("by")) {
      consume();
      end = parse_block(nullptr).end;
    } else {
      end = expect(";").end;
    }
    if (builder) {
      auto& a = add_annotation(*builder, AnnotationKind::assert_stmt, Span{keyword.begin, end});
      add_conjuncts(a, first, last);
    }
  }

  bool try_parse_call(MethodBuilder* builder) {
    const std::size_t saved = pos_;
    const Token& callee = consume();
    skip_balanced("(", ")");
    if (!at(";")) {
      pos_ = saved;
      return false;
    }
    const Token& semi = consume();
    if (builder && lemma_names_.contains(std::string(callee.text))) {
      add_annotation(*builder, AnnotationKind::lemma_call, Span{callee.begin, semi.end});
    }
    return true;
  }

  void parse_if(MethodBuilder* builder) {
    consume();
    scan_expression();
    if (!at("{")) fail(peek(), "expected '{' after if condition but found " + describe(peek()));
    parse_block(builder);
    if (at("else")) {
      consume();
      if (at("if")) {
        parse_if(builder);
      } else {
        parse_block(builder);
      }
    }
  }

  void parse_while(MethodBuilder* builder) {
    consume();
    scan_expression();
    while (at("invariant") || at("decreases") || at("modifies")) {
      const Token& keyword = consume();
      if (keyword.is("decreases")) {
        parse_decreases(builder, keyword, false);
        continue;
      }
      auto [first, last] = scan_expression();
      if (keyword.is("invariant") && builder) {
        auto& a = add_annotation(*builder, AnnotationKind::invariant,
                                 Span{keyword.begin, tokens_[last - 1].end});
        add_conjuncts(a, first, last);
      }
    }
    if (!at("{")) fail(peek(), "expected loop body but found " + describe(peek()));
    parse_block(builder);
  }

  void parse_match(MethodBuilder* builder) {
    consume();
    scan_expression();
    const bool braced = at("{");
    if (braced) consume();
    while (at("case")) {
      consume();
      // Pattern runs up to the top-level `=>`.
      int depth = 0;
      while (!(depth == 0 && at("=>"))) {
        const Token& t = peek();
        if (t.kind == TokenKind::end) fail(t, "expected '=>' in case");
        if (is_opener(t)) ++depth;
        if (is_closer(t)) --depth;
        consume();
      }
      consume();
      while (!at("case") && !at("}")) {
        if (peek().kind == TokenKind::end) fail(peek(), "unterminated match");
        parse_statement(builder);
      }
    }
    if (braced) expect("}");
  }

  void parse_calc(MethodBuilder* builder) {
    const Token& keyword = consume();
    std::optional<std::string> header_op;
    if (peek().kind == TokenKind::punct && kCalcOperators.contains(peek().text)) {
      header_op = std::string(consume().text);
    }
    const Token& open = expect("{");
    (void)open;

    struct RawLine {
      std::optional<Span> op;
      std::vector<Span> hints;
      Span expr;
    };
    std::vector<RawLine> lines;
    while (!at("}")) {
      if (peek().kind == TokenKind::end) fail(keyword, "unterminated calc");
      RawLine line;
      if (peek().kind == TokenKind::punct && kCalcOperators.contains(peek().text)) {
        const Token& op = consume();
        line.op = Span{op.begin, op.end};
      }
      while (at("{")) line.hints.push_back(parse_block(nullptr));
      if (at("}")) fail(peek(), "calc step is missing its expression");
      auto [first, last] = scan_expression();
      const Token& semi = expect(";");
      line.expr = Span{tokens_[first].begin, semi.end};
      lines.push_back(std::move(line));
    }
    const Token& close = consume();
    if (!builder) return;

    auto& a = add_annotation(*builder, AnnotationKind::calc, Span{keyword.begin, close.end});
    a.calc_operator = header_op;
    std::size_t hint_index = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const RawLine& raw = lines[i];
      const bool interior = i > 0 && i + 1 < lines.size();
      const int step = interior ? static_cast<int>(i - 1) : -1;
      CalcLine line;
      line.op = raw.op;
      line.expr = raw.expr;
      if (interior && raw.op) {
        SubPart op_part;
        op_part.id = a.id + ".o" + std::to_string(step);
        op_part.kind = PartKind::calc_operator;
        op_part.core = *raw.op;
        op_part.span = Span{extend_over_blanks(text_, raw.op->begin), raw.expr.end};
        op_part.step = step;
        a.parts.push_back(std::move(op_part));
      }
      for (Span hint : raw.hints) {
        SubPart part;
        part.id = a.id + ".h" + std::to_string(hint_index++);
        part.kind = PartKind::calc_hint;
        part.core = hint;
        part.span = Span{extend_over_blanks(text_, hint.begin), hint.end};
        part.step = (interior && raw.op) ? step : -1;
        line.hints.push_back(a.parts.size());
        a.parts.push_back(std::move(part));
      }
      if (interior) {
        SubPart part;
        part.id = a.id + ".s" + std::to_string(step);
        part.kind = PartKind::calc_step;
        part.core = raw.expr;
        const std::size_t start = raw.op ? raw.op->begin : raw.expr.begin;
        part.span = Span{extend_over_blanks(text_, start), raw.expr.end};
        part.operator_span = raw.op;
        part.step = step;
        line.step_part = a.parts.size();
        a.parts.push_back(std::move(part));
      }
      a.calc_lines.push_back(std::move(line));
    }
  }

  // Assignments, declarations, returns and any other statement: a token run
  // up to the top-level `;`, or a trailing block (e.g. `forall ... { }`).
  void parse_simple_statement(MethodBuilder* builder) {
    const Token& start = peek();
    if (start.is("}") || start.kind == TokenKind::end) {
      fail(start, "expected statement but found " + describe(start));
    }
    int depth = 0;
    std::size_t count = 0;
    while (true) {
      const Token& t = peek();
      if (t.kind == TokenKind::end) fail(start, "expected ';' to end statement");
      if (depth == 0) {
        if (t.is(";")) {
          consume();
          return;
        }
        if (t.is("}")) fail(t, "expected ';' but found '}'");
        if (t.is("{") && count > 0 && ends_run(pos_ - count)) {
          parse_block(builder);
          return;
        }
      }
      if (is_opener(t)) ++depth;
      if (is_closer(t)) --depth;
      consume();
      ++count;
    }
  }

  std::string_view text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::set<std::string> lemma_names_;
  Token decl_name_token_;
  std::set<std::string> names_;
  std::string prefix_;
};

}  // namespace

AnnotatedProgram parse(std::string text, std::string file_name) {
  AnnotatedProgram program;
  program.original_text = std::move(text);
  program.file_name = std::move(file_name);
  Parser parser(program.original_text, detail::tokenize(program.original_text));
  program.methods = parser.parse_program();
  return program;
}

}  // namespace deadannot
