// SPDX-License-Identifier: Apache-2.0
//
// Token scanner for MiniDfy. Expressions are opaque to the rest of the
// pipeline, so tokens carry only enough structure to track nesting.

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace deadannot::detail {

enum class TokenKind { identifier, number, string, character, punct, end };

struct Token {
  TokenKind kind = TokenKind::end;
  std::string_view text;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t line = 1;
  std::size_t column = 1;

  bool is(std::string_view s) const {
    return (kind == TokenKind::punct || kind == TokenKind::identifier) &&
           text == s;
  }
};

/// Tokenizes `text`, skipping blanks and comments. The final token has kind
/// `end`. Throws SyntaxError on malformed input or invalid UTF-8.
std::vector<Token> tokenize(std::string_view text);

/// True when `offset` does not point into the middle of a UTF-8 sequence.
bool on_char_boundary(std::string_view text, std::size_t offset);

}  // namespace deadannot::detail
