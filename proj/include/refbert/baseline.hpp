#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refbert/corpus.hpp"
#include "refbert/nn.hpp"
#include "refbert/tokenizer.hpp"

namespace refbert::baseline {

/// Ranks lengths 1..N by the mean over slots of log(max non-special
/// probability); slot_probs[g-1] holds the g x |V| table for length g.
/// Ties go to the shorter length. Returns (length, score) pairs.
std::vector<std::pair<int, double>> rank_by_average_log_prob(std::span<const nn::Matrix> slot_probs);

/// Scores each g in 1..l_max with the model's own token distributions.
std::vector<std::pair<int, double>> heuristic_lp(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                                 std::string_view code, std::string_view variable);
std::vector<std::pair<int, double>> heuristic_lp(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                                 const corpus::RefactoringRecord& record);

struct NgramOptions {
  int n = 3;
  double k = 0.01;

  friend bool operator==(const NgramOptions&, const NgramOptions&) = default;
};

using Context = std::vector<int>;

/// Add-k smoothed n-gram model over sub-token ids plus a closed inventory of
/// variable names indexed by the n-1 tokens preceding each occurrence.
class NgramModel {
 public:
  NgramModel() = default;
  NgramModel(NgramOptions options, std::size_t vocab_size);

  int order() const noexcept { return options_.n; }
  double smoothing() const noexcept { return options_.k; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

  /// (c(ctx, t) + k) / (c(ctx) + k |V|); ctx has n-1 ids.
  double probability(std::span<const int> context, int token) const;
  /// c(ctx, t) / c(ctx), or 0 for an unseen context.
  double mle(std::span<const int> context, int token) const;
  /// Sum of log probabilities of every token after the padding.
  double log_prob(std::span<const int> stream) const;

  void add_sequence(std::span<const int> stream);
  void add_candidate(const Context& context, const std::string& name);

  const std::map<Context, std::map<int, std::size_t>>& counts() const noexcept { return counts_; }
  const std::map<Context, std::set<std::string>>& candidates() const noexcept { return candidates_; }
  std::set<std::string> all_names() const;
  bool empty() const noexcept { return counts_.empty(); }

  void save(const std::filesystem::path& path) const;
  static NgramModel load(const std::filesystem::path& path);

  friend bool operator==(const NgramModel&, const NgramModel&) = default;

 private:
  NgramOptions options_;
  std::size_t vocab_size_ = 0;
  std::map<Context, std::map<int, std::size_t>> counts_;
  std::map<Context, std::size_t> totals_;
  std::map<Context, std::set<std::string>> candidates_;
};

/// Sub-token ids of code without whitespace tokens, with n-1 leading CLS and
/// one trailing SEP. When `name` is given, the stream index of the first
/// token of each of its occurrences is appended to occurrence_starts.
std::vector<int> ngram_stream(const tok::SubwordVocab& vocab, std::string_view code, int n,
                              std::string_view name = {}, std::vector<std::size_t>* occurrence_starts = nullptr);

/// Counts code_after of every record and indexes variable_after by context.
/// Throws Error(EmptyCorpus).
NgramModel train_ngram(const std::vector<corpus::RefactoringRecord>& records, const tok::SubwordVocab& vocab,
                       const NgramOptions& options = {});

/// Candidates whose context matches an occurrence of variable_before (all
/// known names when none match), each scored by the log probability of the
/// code with it substituted. Best first.
/// Throws Error(NoCandidates) for an empty model, Error(VariableNotFound).
std::vector<std::pair<std::string, double>> ngram_suggest(const NgramModel& model, const tok::SubwordVocab& vocab,
                                                          std::string_view code, std::string_view variable_before,
                                                          std::size_t top_k = 5);

}  // namespace refbert::baseline
