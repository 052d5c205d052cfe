#include "refbert/java_lexer.hpp"

#include <algorithm>
#include <array>

#include "refbert/error.hpp"

namespace refbert::corpus {
namespace {

constexpr std::array<std::string_view, 51> kKeywords = {
    "abstract", "assert",     "boolean",  "break",      "byte",      "case",      "catch",
    "char",     "class",      "const",    "continue",   "default",   "do",        "double",
    "else",     "enum",       "extends",  "final",      "finally",   "float",     "for",
    "goto",     "if",         "implements", "import",   "instanceof", "int",      "interface",
    "long",     "native",     "new",      "package",    "private",   "protected", "public",
    "return",   "short",      "static",   "strictfp",   "super",     "switch",    "synchronized",
    "this",     "throw",      "throws",   "transient",  "try",       "void",      "volatile",
    "while",    "true"};

// Literal words that behave like keywords for extraction purposes.
constexpr std::array<std::string_view, 2> kLiterals = {"false", "null"};

constexpr std::array<std::string_view, 8> kPrimitives = {"boolean", "byte", "char", "short",
                                                         "int",     "long", "float", "double"};

// Longest first so that greedy matching picks e.g. ">>>=" before ">>".
// '>' is deliberately never combined: generic closers like ">>" must stay
// separate for the declaration heuristics.
constexpr std::array<std::string_view, 22> kOperators = {
    "<<=", "...", "->", "::", "==", "!=", "<=", "&&", "||", "++", "--",
    "+=",  "-=",  "*=", "/=", "%=", "&=", "|=", "^=", "<<", "@",  "?"};

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

bool is_java_keyword(std::string_view word) noexcept {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end() ||
         std::find(kLiterals.begin(), kLiterals.end(), word) != kLiterals.end();
}

bool is_primitive_type(std::string_view word) noexcept {
  return std::find(kPrimitives.begin(), kPrimitives.end(), word) != kPrimitives.end();
}

std::vector<Token> lex_java(std::string_view src) {
  std::vector<Token> out;
  const std::size_t n = src.size();
  std::size_t i = 0;
  while (i < n) {
    const char c = src[i];
    const auto uc = static_cast<unsigned char>(c);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (c == '/' && i + 1 < n && src[i + 1] == '/') {
      while (i < n && src[i] != '\n') ++i;
      out.push_back({TokenKind::Comment, start, i});
      continue;
    }
    if (c == '/' && i + 1 < n && src[i + 1] == '*') {
      const auto close = src.find("*/", i + 2);
      if (close == std::string_view::npos) throw Error(Errc::MalformedCode, "unterminated block comment");
      i = close + 2;
      out.push_back({TokenKind::Comment, start, i});
      continue;
    }
    if (src.substr(i, 3) == "\"\"\"") {
      const auto close = src.find("\"\"\"", i + 3);
      if (close == std::string_view::npos) throw Error(Errc::MalformedCode, "unterminated text block");
      i = close + 3;
      out.push_back({TokenKind::String, start, i});
      continue;
    }
    if (c == '"' || c == '\'') {
      ++i;
      while (i < n && src[i] != c) {
        if (src[i] == '\\') ++i;
        if (i < n && src[i] == '\n') break;
        ++i;
      }
      if (i >= n || src[i] != c) throw Error(Errc::MalformedCode, "unterminated literal");
      ++i;
      out.push_back({c == '"' ? TokenKind::String : TokenKind::Char, start, i});
      continue;
    }
    if (is_digit(c) || (c == '.' && i + 1 < n && is_digit(src[i + 1]))) {
      // Numbers swallow identifier bytes (hex digits, suffixes) and dots;
      // exponent signs are taken when they follow e/E/p/P.
      ++i;
      while (i < n) {
        const auto d = static_cast<unsigned char>(src[i]);
        if (is_identifier_byte(d) || d == '.') {
          ++i;
        } else if ((d == '+' || d == '-') &&
                   (src[i - 1] == 'e' || src[i - 1] == 'E' || src[i - 1] == 'p' || src[i - 1] == 'P') &&
                   !(src[start] == '0' && start + 1 < n && (src[start + 1] == 'x' || src[start + 1] == 'X') &&
                     (src[i - 1] == 'e' || src[i - 1] == 'E'))) {
          ++i;
        } else {
          break;
        }
      }
      out.push_back({TokenKind::Number, start, i});
      continue;
    }
    if (is_identifier_byte(uc)) {
      while (i < n && is_identifier_byte(static_cast<unsigned char>(src[i]))) ++i;
      const auto word = src.substr(start, i - start);
      out.push_back({is_java_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier, start, i});
      continue;
    }
    std::size_t len = 1;
    for (auto op : kOperators) {
      if (src.substr(i, op.size()) == op) {
        len = op.size();
        break;
      }
    }
    i += len;
    out.push_back({TokenKind::Punct, start, i});
  }
  return out;
}

}  // namespace refbert::corpus
