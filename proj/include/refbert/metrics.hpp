#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refbert/corpus.hpp"
#include "refbert/tokenizer.hpp"

namespace refbert::metrics {

/// 1 iff truth is among the first k entries of ranked.
int hit_at_k(std::span<const int> ranked, int truth, int k);

/// Share of distinct truth tokens that appear among the predicted tokens.
/// Throws Error(EmptyTruth).
double accuracy(std::span<const std::string> pred_tokens, std::span<const std::string> truth_tokens);

/// 1 iff the names are byte-identical.
int exact_match(std::string_view pred_name, std::string_view truth_name);

/// Levenshtein distance over token sequences.
std::size_t token_edit_distance(std::span<const std::string> pred_tokens, std::span<const std::string> truth_tokens);
/// Levenshtein distance over bytes.
std::size_t char_edit_distance(std::string_view a, std::string_view b);

/// Character edit distance over the truth length, times 100.
/// Throws Error(EmptyTruth).
double cer(std::string_view pred_name, std::string_view truth_name);

/// What a predictor returns for one record. An empty ranking means the
/// predictor does not do length prediction; empty sub_tokens means the name
/// is re-tokenized with the shared vocabulary.
struct Prediction {
  std::vector<int> ranked_lengths;
  std::string name;
  std::vector<std::string> sub_tokens;
};

using Predictor = std::function<Prediction(const corpus::RefactoringRecord&)>;

struct ExampleRow {
  std::string id;
  std::string prediction;
  std::string truth;
  int predicted_length = 0;  // 0 without a length ranking
  int truth_length = 0;
  double hit_at_1 = 0.0;  // NaN without a length ranking
  double hit_at_3 = 0.0;
  double accuracy = 0.0;
  int exact_match = 0;
  std::size_t token_ed = 0;
  double cer = 0.0;
};

struct EvalReport {
  std::string dataset;
  std::size_t evaluated = 0;
  std::size_t excluded_too_long = 0;  // truth names longer than l_max
  std::size_t excluded_failed = 0;    // the predictor could not handle the record
  bool has_lengths = false;
  double hit_at_1 = 0.0;
  double hit_at_3 = 0.0;
  double accuracy = 0.0;
  double exact_match = 0.0;
  double mean_token_ed = 0.0;
  double mean_cer = 0.0;
  std::vector<ExampleRow> rows;

  std::string to_json() const;
  std::string rows_csv() const;
  /// Hit@1 Hit@3 | Accuracy EM CER ED, one line each for header and values.
  std::string summary_table() const;
};

/// Scores every record. Truth names longer than l_max sub-tokens are
/// excluded; so are records on which the predictor throws a masking error.
EvalReport evaluate_corpus(const Predictor& predictor, const std::vector<corpus::RefactoringRecord>& records,
                           const tok::SubwordVocab& vocab, int l_max, std::string dataset = "");

}  // namespace refbert::metrics
