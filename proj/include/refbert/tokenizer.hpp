#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "refbert/corpus.hpp"

namespace refbert::tok {

// Fixed id layout: six specials, then the 256 byte symbols, then merges.
inline constexpr int kCls = 0;
inline constexpr int kSep = 1;
inline constexpr int kMask = 2;
inline constexpr int kNum = 3;
inline constexpr int kPad = 4;
inline constexpr int kUnk = 5;
inline constexpr int kNumSpecials = 6;
inline constexpr int kFirstByteId = kNumSpecials;
inline constexpr int kBaseVocab = kNumSpecials + 256;

struct SpecialIds {
  int cls = kCls;
  int sep = kSep;
  int mask = kMask;
  int num = kNum;
  int pad = kPad;
  int unk = kUnk;
};

inline constexpr std::array<std::string_view, kNumSpecials> kSpecialNames = {"CLS", "SEP", "MASK",
                                                                             "NUM", "PAD", "UNK"};

constexpr bool is_special(int id) noexcept { return id >= 0 && id < kNumSpecials; }

/// Splits text into the units BPE merges never cross: identifier runs,
/// whitespace runs, and single punctuation bytes. With camel_split, identifier
/// runs are further cut before an uppercase letter that follows a lowercase
/// letter or digit.
std::vector<std::string_view> pre_tokenize(std::string_view text, bool camel_split);

struct EncodedText {
  std::vector<int> ids;
  /// Token index range [first, last) covered by each requested span.
  std::vector<std::pair<std::size_t, std::size_t>> span_tokens;
};

/// Byte-level BPE vocabulary. Immutable once built.
class SubwordVocab {
 public:
  SubwordVocab();  // specials + bytes, no merges

  std::size_t size() const noexcept { return id_to_token_.size(); }
  const std::vector<std::pair<std::string, std::string>>& merges() const noexcept { return merges_; }
  const std::string& token(int id) const;
  /// -1 when the string is not a vocabulary entry.
  int id(std::string_view token) const;
  SpecialIds special_ids() const noexcept { return {}; }
  bool camel_split() const noexcept { return camel_split_; }

  std::vector<int> encode(std::string_view text) const;
  /// Encodes text and reports which tokens cover each span. Spans must be
  /// sorted, non-overlapping, and aligned to pre-token boundaries (whole
  /// identifiers always are).
  EncodedText encode_with_spans(std::string_view text, const std::vector<corpus::Span>& spans) const;
  std::string decode(std::span<const int> ids) const;
  std::vector<std::string> tokenize_variable(std::string_view name) const;

  void save(const std::filesystem::path& path) const;
  static SubwordVocab load(const std::filesystem::path& path);

  /// Appends a merge of two existing symbols; the result reuses an existing
  /// id when the merged string is already present.
  void add_merge(const std::string& left, const std::string& right);
  void set_camel_split(bool on) noexcept { camel_split_ = on; }

 private:
  void encode_piece(std::string_view piece, std::vector<int>& out) const;

  struct MergeRule {
    int rank;
    int result;
  };
  struct PairHash {
    std::size_t operator()(const std::pair<int, int>& p) const noexcept {
      return std::hash<long long>{}((static_cast<long long>(p.first) << 32) ^ static_cast<unsigned>(p.second));
    }
  };

  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::pair<int, int>, MergeRule, PairHash> rules_;
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  bool camel_split_ = false;
};

struct BpeOptions {
  std::size_t min_frequency = 2;
  bool camel_split = false;
};

/// Greedy BPE: repeatedly merges the most frequent adjacent pair (ties go to
/// the lexicographically smallest merged string) until the vocabulary has
/// vocab_size entries or no pair reaches min_frequency.
SubwordVocab train_bpe(const std::vector<std::string>& texts, std::size_t vocab_size, const BpeOptions& options = {});

}  // namespace refbert::tok
