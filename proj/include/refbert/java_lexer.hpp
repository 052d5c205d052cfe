#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace refbert::corpus {

enum class TokenKind { Identifier, Keyword, Number, String, Char, Comment, Punct };

struct Token {
  TokenKind kind;
  std::size_t begin;  // byte offsets into the source
  std::size_t end;

  std::string_view text(std::string_view source) const { return source.substr(begin, end - begin); }
};

/// Splits Java source into tokens, dropping whitespace. Comments, string,
/// char and text-block literals come back as single opaque tokens.
/// Throws Error(MalformedCode) on an unterminated comment or literal.
std::vector<Token> lex_java(std::string_view source);

bool is_java_keyword(std::string_view word) noexcept;
bool is_primitive_type(std::string_view word) noexcept;

/// Identifier characters as seen by both the lexer and the subword
/// pre-tokenizer: ASCII letters, digits, '_', '$', and any byte >= 0x80.
constexpr bool is_identifier_byte(unsigned char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '$' || c >= 0x80;
}

}  // namespace refbert::corpus
