#include "refbert/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "refbert/error.hpp"
#include "refbert/java_lexer.hpp"
#include "refbert/rng.hpp"

namespace refbert::corpus {
namespace {

using json = nlohmann::json;

// Comment-free token stream plus the source it indexes into.
struct TokenStream {
  std::string_view src;
  std::vector<Token> toks;

  std::size_t size() const { return toks.size(); }
  std::string_view text(std::size_t i) const { return i < toks.size() ? toks[i].text(src) : std::string_view{}; }
  bool is(std::size_t i, std::string_view s) const { return i < toks.size() && text(i) == s; }
  bool ident(std::size_t i) const { return i < toks.size() && toks[i].kind == TokenKind::Identifier; }
  bool keyword(std::size_t i) const { return i < toks.size() && toks[i].kind == TokenKind::Keyword; }
};

TokenStream code_tokens(std::string_view src) {
  TokenStream ts{src, {}};
  for (const auto& t : lex_java(src)) {
    if (t.kind != TokenKind::Comment) ts.toks.push_back(t);
  }
  return ts;
}

bool is_modifier(std::string_view w) {
  static const std::set<std::string_view> mods = {"public",    "private",  "protected",    "static",
                                                  "final",     "abstract", "synchronized", "native",
                                                  "transient", "volatile", "strictfp"};
  return mods.contains(w);
}

// Contextual words that start statements rather than types.
bool is_statement_word(std::string_view w) { return w == "yield" || w == "record" || w == "sealed"; }

// Skips modifiers and annotations starting at i.
std::size_t skip_modifiers(const TokenStream& ts, std::size_t i) {
  for (;;) {
    if (ts.keyword(i) && is_modifier(ts.text(i))) {
      ++i;
    } else if (ts.is(i, "@") && ts.ident(i + 1) && ts.text(i + 1) != "interface") {
      i += 2;
      while (ts.is(i, ".") && ts.ident(i + 1)) i += 2;
      if (ts.is(i, "(")) {
        int depth = 0;
        for (; i < ts.size(); ++i) {
          if (ts.is(i, "(")) ++depth;
          if (ts.is(i, ")") && --depth == 0) break;
        }
        ++i;
      }
    } else {
      return i;
    }
  }
}

// Parses a (possibly qualified, generic, array, or union) type at i.
// Returns one past its last token.
std::optional<std::size_t> parse_type(const TokenStream& ts, std::size_t i) {
  auto single = [&](std::size_t j) -> std::optional<std::size_t> {
    if (ts.keyword(j) && is_primitive_type(ts.text(j))) {
      ++j;
    } else if (ts.ident(j) && !is_statement_word(ts.text(j))) {
      ++j;
      for (;;) {
        if (ts.is(j, "<")) {
          int depth = 0;
          for (; j < ts.size(); ++j) {
            const auto w = ts.text(j);
            if (w == "<") {
              ++depth;
            } else if (w == ">") {
              if (--depth == 0) break;
            } else if (!(ts.ident(j) || is_primitive_type(w) || w == "," || w == "." || w == "?" ||
                         w == "extends" || w == "super" || w == "[" || w == "]" || w == "&")) {
              return std::nullopt;
            }
          }
          if (j >= ts.size()) return std::nullopt;
          ++j;
        }
        if (ts.is(j, ".") && ts.ident(j + 1)) {
          j += 2;
          continue;
        }
        break;
      }
    } else {
      return std::nullopt;
    }
    while (ts.is(j, "[") && ts.is(j + 1, "]")) j += 2;
    if (ts.is(j, "...")) ++j;
    return j;
  };
  auto end = single(i);
  while (end && ts.is(*end, "|")) end = single(*end + 1);
  return end;
}

bool declaration_follow(const TokenStream& ts, std::size_t i) {
  const auto w = ts.text(i);
  return w == "=" || w == ";" || w == "," || w == ":" || w == ")" || w == "[";
}

bool declaration_context(const TokenStream& ts, std::size_t i) {
  if (i == 0) return true;
  const auto w = ts.text(i - 1);
  return w == "{" || w == "}" || w == ";" || w == "(" || w == "," || w == ":" || w == "->";
}

void check_braces(const TokenStream& ts) {
  long depth = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.is(i, "{")) ++depth;
    if (ts.is(i, "}") && --depth < 0) throw Error(Errc::MalformedCode, "unbalanced braces");
  }
  if (depth != 0) throw Error(Errc::MalformedCode, "unbalanced braces");
}

// Declarators after the first one: `int a = 1, b, c = f(x, y);`.
void collect_more_declarators(const TokenStream& ts, std::size_t i, std::vector<std::size_t>& out) {
  int depth = 0;
  for (; i < ts.size(); ++i) {
    const auto w = ts.text(i);
    if (w == "(" || w == "[" || w == "{") {
      ++depth;
    } else if (w == ")" || w == "]" || w == "}") {
      if (--depth < 0) return;
    } else if (depth == 0 && w == ";") {
      return;
    } else if (depth == 0 && w == "," && ts.ident(i + 1)) {
      const auto f = ts.text(i + 2);
      if (f == "=" || f == "," || f == ";" || f == "[") out.push_back(i + 1);
    }
  }
}

std::vector<std::size_t> declared_name_tokens(const TokenStream& ts) {
  std::vector<std::size_t> decls;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.is(i, "instanceof")) {
      if (auto end = parse_type(ts, skip_modifiers(ts, i + 1)); end && ts.ident(*end)) decls.push_back(*end);
      continue;
    }
    if (ts.is(i, "->")) {
      if (i > 0 && ts.ident(i - 1) && !(i > 1 && ts.is(i - 2, "."))) {
        decls.push_back(i - 1);
      } else if (i > 0 && ts.is(i - 1, ")")) {
        // Implicitly typed parameter list: ( a , b ) ->
        std::vector<std::size_t> names;
        std::size_t j = i - 1;
        bool ok = true;
        while (j > 0) {
          --j;
          if (ts.is(j, "(")) break;
          if (ts.ident(j)) {
            names.push_back(j);
          } else if (!ts.is(j, ",")) {
            ok = false;
            break;
          }
        }
        if (ok && ts.is(j, "(")) decls.insert(decls.end(), names.rbegin(), names.rend());
      }
      continue;
    }
    if (!declaration_context(ts, i)) continue;
    const std::size_t type_start = skip_modifiers(ts, i);
    const auto type_end = parse_type(ts, type_start);
    if (!type_end || !ts.ident(*type_end) || !declaration_follow(ts, *type_end + 1)) continue;
    decls.push_back(*type_end);
    collect_more_declarators(ts, *type_end + 1, decls);
  }
  return decls;
}

std::vector<Span> identifier_spans(const TokenStream& ts, std::string_view name) {
  std::vector<Span> spans;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!ts.ident(i) || ts.text(i) != name) continue;
    if (i > 0 && (ts.is(i - 1, ".") || ts.is(i - 1, "::") || ts.is(i - 1, "@"))) continue;
    if (ts.is(i + 1, "(")) continue;
    spans.emplace_back(ts.toks[i].begin, ts.toks[i].end);
  }
  return spans;
}

bool is_plain_identifier(std::string_view s) {
  if (s.empty() || (s[0] >= '0' && s[0] <= '9')) return false;
  for (unsigned char c : s) {
    if (!is_identifier_byte(c)) return false;
  }
  return !is_java_keyword(s);
}

std::string get_string_field(const json& obj, const char* key, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(Errc::SchemaViolation, "line " + std::to_string(line) + ": missing field '" + key + "'");
  }
  if (!it->is_string()) {
    throw Error(Errc::SchemaViolation, "line " + std::to_string(line) + ": field '" + key + "' must be a string");
  }
  return it->get<std::string>();
}

json parse_object_line(std::string_view line, std::size_t line_number, const std::set<std::string>& allowed) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(Errc::SchemaViolation, "line " + std::to_string(line_number) + ": " + e.what());
  }
  if (!obj.is_object()) {
    throw Error(Errc::SchemaViolation, "line " + std::to_string(line_number) + ": expected a JSON object");
  }
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) {
      throw Error(Errc::SchemaViolation, "line " + std::to_string(line_number) + ": unknown field '" + key + "'");
    }
  }
  return obj;
}

template <class Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(line, number);
  }
  if (in.bad()) throw Error(Errc::Io, "read failure on " + path.string());
}

}  // namespace

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Validation:
      return "validation";
    case Split::Test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "validation") return Split::Validation;
  if (text == "test") return Split::Test;
  throw Error(Errc::SchemaViolation, "unknown split '" + std::string(text) + "'");
}

std::vector<VariableOccurrence> extract_variables(std::string_view code) {
  if (code.find_first_not_of(" \t\r\n\f") == std::string_view::npos) {
    throw Error(Errc::MalformedCode, "empty input");
  }
  const auto ts = code_tokens(code);
  check_braces(ts);

  std::vector<VariableOccurrence> out;
  for (std::size_t tok : declared_name_tokens(ts)) {
    const auto name = ts.text(tok);
    const bool seen = std::any_of(out.begin(), out.end(), [&](const auto& v) { return v.name == name; });
    if (seen) continue;
    auto spans = identifier_spans(ts, name);
    if (spans.empty()) continue;
    out.push_back({std::string(name), std::move(spans)});
  }
  return out;
}

std::vector<Span> find_identifier_spans(std::string_view code, std::string_view name) {
  return identifier_spans(code_tokens(code), name);
}

std::string substitute(std::string_view code, const std::vector<Span>& spans, std::string_view replacement) {
  std::string out;
  out.reserve(code.size() + spans.size() * replacement.size());
  std::size_t pos = 0;
  for (const auto& [b, e] : spans) {
    out.append(code.substr(pos, b - pos));
    out.append(replacement);
    pos = e;
  }
  out.append(code.substr(pos));
  return out;
}

std::string pick_variable(std::string_view code, std::uint64_t seed) {
  const auto vars = extract_variables(code);
  if (vars.empty()) throw Error(Errc::NoVariables, "function declares no variables");
  SplitMix64 rng(seed);
  return vars[rng.below(vars.size())].name;
}

RefactoringRecord adapt_record(std::string_view code, std::uint64_t rng_seed,
                               const std::vector<std::string>& name_pool) {
  const auto vars = extract_variables(code);
  if (vars.empty()) throw Error(Errc::NoVariables, "function declares no variables");
  SplitMix64 rng(rng_seed);
  const auto& chosen = vars[rng.below(vars.size())];

  std::unordered_set<std::string_view> used;
  for (const auto& t : code_tokens(code).toks) {
    if (t.kind == TokenKind::Identifier) used.insert(t.text(code));
  }
  std::vector<std::string_view> candidates;
  std::unordered_set<std::string_view> seen;
  for (const auto& name : name_pool) {
    if (name == chosen.name || used.contains(name) || !is_plain_identifier(name)) continue;
    if (seen.insert(name).second) candidates.push_back(name);
  }
  if (candidates.empty()) {
    throw Error(Errc::PoolExhausted, "no pool name differs from '" + chosen.name + "'");
  }
  const auto before = candidates[rng.below(candidates.size())];

  RefactoringRecord rec;
  rec.code_after = std::string(code);
  rec.code_before = substitute(code, chosen.spans, before);
  rec.variable_after = chosen.name;
  rec.variable_before = std::string(before);
  return rec;
}

void validate_record(const RefactoringRecord& r) {
  auto fail = [&](const std::string& why) { throw Error(Errc::InvariantViolation, "record '" + r.id + "': " + why); };
  if (r.variable_before == r.variable_after) fail("variable_before equals variable_after");
  if (!is_plain_identifier(r.variable_before)) fail("variable_before is not an identifier");
  if (!is_plain_identifier(r.variable_after)) fail("variable_after is not an identifier");
  std::vector<Span> after_spans;
  std::vector<Span> before_spans;
  try {
    after_spans = find_identifier_spans(r.code_after, r.variable_after);
    before_spans = find_identifier_spans(r.code_before, r.variable_before);
  } catch (const Error& e) {
    fail(e.what());
  }
  if (after_spans.empty()) fail("variable_after does not occur in code_after");
  if (before_spans.size() != after_spans.size()) fail("variable_before occurrence count differs");
  if (substitute(r.code_after, after_spans, r.variable_before) != r.code_before) {
    fail("code_before is not code_after with the name substituted");
  }
}

std::string record_to_json_line(const RefactoringRecord& r) {
  json obj = {{"id", r.id},
              {"code_before", r.code_before},
              {"code_after", r.code_after},
              {"variable_before", r.variable_before},
              {"variable_after", r.variable_after},
              {"refactoring_type", r.refactoring_type},
              {"split", std::string(to_string(r.split))}};
  return obj.dump();
}

RefactoringRecord record_from_json_line(std::string_view line, std::size_t line_number) {
  static const std::set<std::string> kFields = {"id",       "code_before", "code_after",
                                                "variable_before", "variable_after", "refactoring_type",
                                                "split"};
  const auto obj = parse_object_line(line, line_number, kFields);
  RefactoringRecord r;
  r.id = get_string_field(obj, "id", line_number);
  r.code_before = get_string_field(obj, "code_before", line_number);
  r.code_after = get_string_field(obj, "code_after", line_number);
  r.variable_before = get_string_field(obj, "variable_before", line_number);
  r.variable_after = get_string_field(obj, "variable_after", line_number);
  r.refactoring_type = get_string_field(obj, "refactoring_type", line_number);
  try {
    r.split = parse_split(get_string_field(obj, "split", line_number));
  } catch (const Error& e) {
    throw Error(Errc::SchemaViolation, "line " + std::to_string(line_number) + ": " + e.what());
  }
  return r;
}

std::vector<RefactoringRecord> load_corpus(const std::filesystem::path& path) {
  std::vector<RefactoringRecord> out;
  for_each_line(path, [&](const std::string& line, std::size_t number) {
    auto rec = record_from_json_line(line, number);
    try {
      validate_record(rec);
    } catch (const Error& e) {
      throw Error(Errc::InvariantViolation, "line " + std::to_string(number) + ": " + e.what());
    }
    out.push_back(std::move(rec));
  });
  return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<RefactoringRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
  if (!out) throw Error(Errc::Io, "write failure on " + path.string());
}

std::vector<SourceFunction> load_functions(const std::filesystem::path& path) {
  static const std::set<std::string> kFields = {"id", "code", "split"};
  std::vector<SourceFunction> out;
  for_each_line(path, [&](const std::string& line, std::size_t number) {
    const auto obj = parse_object_line(line, number, kFields);
    SourceFunction f;
    f.id = get_string_field(obj, "id", number);
    f.code = get_string_field(obj, "code", number);
    if (obj.contains("split")) {
      try {
        f.split = parse_split(get_string_field(obj, "split", number));
      } catch (const Error& e) {
        throw Error(Errc::SchemaViolation, "line " + std::to_string(number) + ": " + e.what());
      }
    }
    out.push_back(std::move(f));
  });
  return out;
}

std::size_t count_nonblank_lines(std::string_view code) {
  std::size_t count = 0;
  std::istringstream in{std::string(code)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\f") != std::string::npos) ++count;
  }
  return count;
}

std::string normalize_whitespace(std::string_view code) {
  std::string out;
  bool pending_space = false;
  for (char c : code) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f') {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<RefactoringRecord> adapt_corpus(const std::vector<SourceFunction>& functions, std::uint64_t seed,
                                            AdaptStats* stats) {
  AdaptStats local;
  local.input = functions.size();
  struct Survivor {
    const SourceFunction* fn;
    std::uint64_t seed;
  };
  std::vector<Survivor> survivors;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < functions.size(); ++i) {
    const auto& f = functions[i];
    if (count_nonblank_lines(f.code) < 3) {
      ++local.too_short;
      continue;
    }
    if (!seen.insert(normalize_whitespace(f.code)).second) {
      ++local.duplicates;
      continue;
    }
    try {
      if (extract_variables(f.code).empty()) {
        ++local.no_variables;
        continue;
      }
    } catch (const Error&) {
      ++local.malformed;
      continue;
    }
    survivors.push_back({&f, derive_seed(seed, i)});
  }

  std::vector<std::string> pool;
  std::unordered_set<std::string> in_pool;
  for (const auto& s : survivors) {
    auto name = pick_variable(s.fn->code, s.seed);
    if (in_pool.insert(name).second) pool.push_back(std::move(name));
  }

  std::vector<RefactoringRecord> out;
  for (const auto& s : survivors) {
    try {
      auto rec = adapt_record(s.fn->code, s.seed, pool);
      rec.id = s.fn->id;
      rec.split = s.fn->split;
      out.push_back(std::move(rec));
    } catch (const Error& e) {
      if (e.code() != Errc::PoolExhausted) throw;
      ++local.pool_exhausted;
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace refbert::corpus
