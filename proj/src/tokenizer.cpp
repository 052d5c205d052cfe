#include "refbert/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "refbert/error.hpp"
#include "refbert/java_lexer.hpp"

namespace refbert::tok {
namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower_or_digit(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }

std::string escape_symbol(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (c <= 0x20 || c >= 0x7F || c == '\\' || c == '#') {
      out += "\\x";
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

std::string unescape_symbol(std::string_view s) {
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw Error(Errc::SchemaViolation, "bad escape in vocabulary file");
  };
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\') {
      if (i + 3 >= s.size()) throw Error(Errc::SchemaViolation, "truncated escape");
      if (s[i + 1] != 'x') throw Error(Errc::SchemaViolation, "bad escape in vocabulary file");
      out += static_cast<char>(hex(s[i + 2]) * 16 + hex(s[i + 3]));
      i += 3;
    } else {
      out += s[i];
    }
  }
  return out;
}

void merge_pair(std::vector<int>& symbols, int left, int right, int result) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < symbols.size(); ++r) {
    if (r + 1 < symbols.size() && symbols[r] == left && symbols[r + 1] == right) {
      symbols[w++] = result;
      ++r;
    } else {
      symbols[w++] = symbols[r];
    }
  }
  symbols.resize(w);
}

}  // namespace

std::vector<std::string_view> pre_tokenize(std::string_view text, bool camel_split) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const std::size_t start = i;
    const auto c = static_cast<unsigned char>(text[i]);
    if (corpus::is_identifier_byte(c)) {
      ++i;
      while (i < n && corpus::is_identifier_byte(static_cast<unsigned char>(text[i]))) {
        if (camel_split && is_upper(static_cast<unsigned char>(text[i])) &&
            is_lower_or_digit(static_cast<unsigned char>(text[i - 1]))) {
          break;
        }
        ++i;
      }
    } else if (is_space(c)) {
      while (i < n && is_space(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;
    }
    out.push_back(text.substr(start, i - start));
  }
  return out;
}

SubwordVocab::SubwordVocab() {
  for (auto name : kSpecialNames) id_to_token_.push_back("[" + std::string(name) + "]");
  for (int b = 0; b < 256; ++b) id_to_token_.emplace_back(1, static_cast<char>(b));
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) token_to_id_.emplace(id_to_token_[i], static_cast<int>(i));
}

const std::string& SubwordVocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw Error(Errc::UnknownTokenId, "token id " + std::to_string(id));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

int SubwordVocab::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? -1 : it->second;
}

void SubwordVocab::add_merge(const std::string& left, const std::string& right) {
  const int l = id(left);
  const int r = id(right);
  if (l < kFirstByteId || r < kFirstByteId) {
    throw Error(Errc::SchemaViolation, "merge of unknown symbols '" + left + "' '" + right + "'");
  }
  const std::string merged = left + right;
  int result = id(merged);
  if (result < 0) {
    result = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(merged);
    token_to_id_.emplace(merged, result);
  }
  rules_.emplace(std::pair{l, r}, MergeRule{static_cast<int>(merges_.size()), result});
  merges_.emplace_back(left, right);
}

void SubwordVocab::encode_piece(std::string_view piece, std::vector<int>& out) const {
  std::vector<int> symbols;
  symbols.reserve(piece.size());
  for (unsigned char c : piece) symbols.push_back(kFirstByteId + c);
  while (symbols.size() > 1) {
    int best_rank = std::numeric_limits<int>::max();
    const MergeRule* best = nullptr;
    std::pair<int, int> best_pair;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const auto it = rules_.find({symbols[i], symbols[i + 1]});
      if (it != rules_.end() && it->second.rank < best_rank) {
        best_rank = it->second.rank;
        best = &it->second;
        best_pair = it->first;
      }
    }
    if (!best) break;
    merge_pair(symbols, best_pair.first, best_pair.second, best->result);
  }
  out.insert(out.end(), symbols.begin(), symbols.end());
}

std::vector<int> SubwordVocab::encode(std::string_view text) const {
  std::vector<int> out;
  for (auto piece : pre_tokenize(text, camel_split_)) encode_piece(piece, out);
  return out;
}

EncodedText SubwordVocab::encode_with_spans(std::string_view text, const std::vector<corpus::Span>& spans) const {
  EncodedText enc;
  enc.span_tokens.assign(spans.size(), {0, 0});
  std::size_t offset = 0;
  std::size_t next_span = 0;
  bool inside = false;
  for (auto piece : pre_tokenize(text, camel_split_)) {
    if (next_span < spans.size() && !inside && offset == spans[next_span].first) {
      enc.span_tokens[next_span].first = enc.ids.size();
      inside = true;
    }
    if (next_span < spans.size() && !inside && offset > spans[next_span].first) {
      throw Error(Errc::InvariantViolation, "span does not start on a token boundary");
    }
    encode_piece(piece, enc.ids);
    offset += piece.size();
    if (inside && offset >= spans[next_span].second) {
      if (offset != spans[next_span].second) {
        throw Error(Errc::InvariantViolation, "span does not end on a token boundary");
      }
      enc.span_tokens[next_span].second = enc.ids.size();
      inside = false;
      ++next_span;
    }
  }
  if (next_span != spans.size()) throw Error(Errc::InvariantViolation, "span outside the text");
  return enc;
}

std::string SubwordVocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) out += token(id);
  return out;
}

std::vector<std::string> SubwordVocab::tokenize_variable(std::string_view name) const {
  if (name.empty()) throw Error(Errc::EmptyName, "variable name is empty");
  std::vector<std::string> out;
  for (int id : encode(name)) out.push_back(token(id));
  return out;
}

void SubwordVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << "BPE v1 " << size() << '\n';
  for (const auto& [l, r] : merges_) out << escape_symbol(l) << ' ' << escape_symbol(r) << '\n';
  if (camel_split_) out << "#OPTIONS camel_split=1\n";
  out << "#SPECIALS\n";
  for (int i = 0; i < kNumSpecials; ++i) out << kSpecialNames[static_cast<std::size_t>(i)] << ' ' << i << '\n';
  if (!out) throw Error(Errc::Io, "write failure on " + path.string());
}

SubwordVocab SubwordVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string line;
  std::size_t declared = 0;
  {
    std::getline(in, line);
    std::istringstream header(line);
    std::string magic, version;
    if (!(header >> magic >> version >> declared) || magic != "BPE" || version != "v1") {
      throw Error(Errc::SchemaViolation, path.string() + ": bad vocabulary header");
    }
  }
  SubwordVocab vocab;
  bool in_specials = false;
  int specials_seen = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "#SPECIALS") {
      in_specials = true;
      continue;
    }
    if (line.starts_with("#OPTIONS")) {
      vocab.camel_split_ = line.find("camel_split=1") != std::string::npos;
      continue;
    }
    std::istringstream fields(line);
    std::string a, b;
    if (!(fields >> a >> b)) throw Error(Errc::SchemaViolation, path.string() + ": bad line '" + line + "'");
    if (in_specials) {
      const int expected = specials_seen++;
      if (expected >= kNumSpecials || a != kSpecialNames[static_cast<std::size_t>(expected)] ||
          b != std::to_string(expected)) {
        throw Error(Errc::SchemaViolation, path.string() + ": unexpected special '" + line + "'");
      }
    } else {
      vocab.add_merge(unescape_symbol(a), unescape_symbol(b));
    }
  }
  if (specials_seen != kNumSpecials) throw Error(Errc::SchemaViolation, path.string() + ": missing specials");
  if (vocab.size() != declared) {
    throw Error(Errc::SchemaViolation, path.string() + ": declared size " + std::to_string(declared) +
                                           " but merges give " + std::to_string(vocab.size()));
  }
  return vocab;
}

SubwordVocab train_bpe(const std::vector<std::string>& texts, std::size_t vocab_size, const BpeOptions& options) {
  if (vocab_size < static_cast<std::size_t>(kBaseVocab)) {
    throw Error(Errc::VocabTooSmall, "vocab_size " + std::to_string(vocab_size) + " < " +
                                         std::to_string(kBaseVocab) + " (256 bytes + 6 specials)");
  }
  if (texts.empty()) throw Error(Errc::EmptyCorpus, "no texts to train on");

  std::map<std::string, long long> word_counts;
  for (const auto& t : texts) {
    for (auto piece : pre_tokenize(t, options.camel_split)) {
      if (piece.size() > 1) ++word_counts[std::string(piece)];
    }
  }
  std::vector<std::vector<int>> words;
  std::vector<long long> freq;
  for (const auto& [w, c] : word_counts) {
    std::vector<int> symbols;
    for (unsigned char ch : w) symbols.push_back(kFirstByteId + ch);
    words.push_back(std::move(symbols));
    freq.push_back(c);
  }

  SubwordVocab vocab;
  vocab.set_camel_split(options.camel_split);

  using Pair = std::pair<int, int>;
  std::map<Pair, long long> pair_counts;
  std::map<Pair, std::vector<std::size_t>> where;
  auto add_word = [&](std::size_t wi, long long sign) {
    const auto& s = words[wi];
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      auto& c = pair_counts[{s[i], s[i + 1]}];
      c += sign * freq[wi];
      if (sign > 0) where[{s[i], s[i + 1]}].push_back(wi);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) add_word(wi, +1);

  while (vocab.size() < vocab_size) {
    const Pair* best = nullptr;
    long long best_count = 0;
    std::string best_merged;
    for (const auto& [p, c] : pair_counts) {
      if (c <= 0 || c < static_cast<long long>(options.min_frequency)) continue;
      if (c < best_count) continue;
      std::string merged = vocab.token(p.first) + vocab.token(p.second);
      if (c > best_count || merged < best_merged ||
          (merged == best_merged && vocab.token(p.first) < vocab.token(best->first))) {
        best = &p;
        best_count = c;
        best_merged = std::move(merged);
      }
    }
    if (!best) break;
    const Pair chosen = *best;
    vocab.add_merge(vocab.token(chosen.first), vocab.token(chosen.second));
    const int result = vocab.id(best_merged);

    auto affected = where[chosen];
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
    for (std::size_t wi : affected) {
      add_word(wi, -1);
      merge_pair(words[wi], chosen.first, chosen.second, result);
      add_word(wi, +1);
    }
    pair_counts.erase(chosen);
    where.erase(chosen);
  }
  return vocab;
}

}  // namespace refbert::tok
