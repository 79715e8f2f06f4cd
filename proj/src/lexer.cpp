// SPDX-License-Identifier: Apache-2.0

#include "lexer.hpp"

#include <array>
#include <cctype>
#include <string>

#include "deadannot/source_model.hpp"

namespace deadannot::detail {
namespace {

constexpr std::array<std::string_view, 16> kMultiCharPuncts = {
    "<==>", "==>", "<==", "==", "!=", "<=", ">=", ":=",
    "::",   ":|",  "&&",  "||", "=>", "->", "..", "!!",
};

bool is_ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
         c >= 0x80;
}

bool is_ident_char(unsigned char c) {
  return is_ident_start(c) || (c >= '0' && c <= '9') || c == '\'' ||
         c == '?';
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Length of the UTF-8 sequence starting at `pos`, or 0 if malformed.
std::size_t utf8_sequence_length(std::string_view text, std::size_t pos) {
  const auto lead = static_cast<unsigned char>(text[pos]);
  std::size_t len = 0;
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) len = 2;
  else if ((lead & 0xF0) == 0xE0) len = 3;
  else if ((lead & 0xF8) == 0xF0) len = 4;
  else return 0;
  if (pos + len > text.size()) return 0;
  for (std::size_t i = 1; i < len; ++i) {
    if ((static_cast<unsigned char>(text[pos + i]) & 0xC0) != 0x80) return 0;
  }
  return len;
}

class Scanner {
 public:
  explicit Scanner(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    validate_utf8();
    std::vector<Token> tokens;
    while (true) {
      skip_trivia();
      if (pos_ >= text_.size()) break;
      tokens.push_back(next());
    }
    Token end;
    end.kind = TokenKind::end;
    end.begin = end.end = text_.size();
    end.line = line_;
    end.column = column_;
    tokens.push_back(end);
    return tokens;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw SyntaxError(message, line_, column_);
  }

  void validate_utf8() {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < text_.size();) {
      const std::size_t len = utf8_sequence_length(text_, i);
      if (len == 0) throw SyntaxError("invalid UTF-8 byte sequence", line, column);
      if (text_[i] == '\n') {
        ++line;
        column = 1;
      } else {
        column += len;
      }
      i += len;
    }
  }

  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
      if (text_[pos_] == '\n') {
        ++line_;
        column_ = 1;
      } else {
        ++column_;
      }
      ++pos_;
    }
  }

  void skip_trivia() {
    while (pos_ < text_.size()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (pos_ < text_.size() && peek() != '\n') advance();
      } else if (c == '/' && peek(1) == '*') {
        // Block comments nest.
        int depth = 0;
        do {
          if (pos_ >= text_.size()) fail("unterminated block comment");
          if (peek() == '/' && peek(1) == '*') {
            ++depth;
            advance(2);
          } else if (peek() == '*' && peek(1) == '/') {
            --depth;
            advance(2);
          } else {
            advance();
          }
        } while (depth > 0);
      } else {
        break;
      }
    }
  }

  Token make(TokenKind kind, std::size_t begin, std::size_t line,
             std::size_t column) const {
    Token t;
    t.kind = kind;
    t.begin = begin;
    t.end = pos_;
    t.text = text_.substr(begin, pos_ - begin);
    t.line = line;
    t.column = column;
    return t;
  }

  Token next() {
    const std::size_t begin = pos_;
    const std::size_t line = line_;
    const std::size_t column = column_;
    const auto c = static_cast<unsigned char>(peek());

    if (is_ident_start(c)) {
      while (pos_ < text_.size() &&
             is_ident_char(static_cast<unsigned char>(peek()))) {
        advance();
      }
      return make(TokenKind::identifier, begin, line, column);
    }
    if (is_digit(c)) {
      if (c == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
        advance(2);
        while (std::isxdigit(static_cast<unsigned char>(peek())) || peek() == '_') advance();
      } else {
        while (is_digit(static_cast<unsigned char>(peek())) || peek() == '_') advance();
        if (peek() == '.' && is_digit(static_cast<unsigned char>(peek(1)))) {
          advance();
          while (is_digit(static_cast<unsigned char>(peek()))) advance();
        }
      }
      return make(TokenKind::number, begin, line, column);
    }
    if (c == '"') {
      advance();
      while (true) {
        if (pos_ >= text_.size() || peek() == '\n') fail("unterminated string literal");
        if (peek() == '\\') {
          advance(2);
          continue;
        }
        if (peek() == '"') {
          advance();
          break;
        }
        advance();
      }
      return make(TokenKind::string, begin, line, column);
    }
    if (c == '\'') {
      advance();
      if (peek() == '\\') advance();
      if (pos_ >= text_.size()) fail("unterminated character literal");
      advance(utf8_sequence_length(text_, pos_));
      if (peek() != '\'') fail("unterminated character literal");
      advance();
      return make(TokenKind::character, begin, line, column);
    }
    for (std::string_view op : kMultiCharPuncts) {
      if (text_.substr(pos_, op.size()) == op) {
        advance(op.size());
        return make(TokenKind::punct, begin, line, column);
      }
    }
    advance();
    return make(TokenKind::punct, begin, line, column);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  return Scanner(text).run();
}

bool on_char_boundary(std::string_view text, std::size_t offset) {
  if (offset >= text.size()) return offset == text.size();
  return (static_cast<unsigned char>(text[offset]) & 0xC0) != 0x80;
}

}  // namespace deadannot::detail
