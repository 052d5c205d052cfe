#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refbert/corpus.hpp"
#include "refbert/nn.hpp"
#include "refbert/tokenizer.hpp"

namespace refbert::infer {

/// Greedy: slots left to right, each takes its best token not yet used.
/// Global: the g tokens with the largest probability summed over slots,
/// placed in slot order by the greedy rule.
/// Optimal: the assignment of distinct tokens maximizing sum of log p.
enum class DecodeMode { Greedy, Global, Optimal };

/// Throws Error(InvalidConfig) for anything but greedy, global or optimal.
DecodeMode parse_decode_mode(std::string_view text);

struct RankedLength {
  int length = 0;
  double probability = 0.0;
};

struct SlotCandidate {
  std::string token;
  double probability = 0.0;
};

struct Suggestion {
  std::string id;
  std::string name;
  std::vector<std::string> sub_tokens;
  int length_used = 0;
  std::vector<std::vector<SlotCandidate>> per_slot;  // top candidates per slot
  std::vector<RankedLength> lengths;
};

/// Length distribution from the NUM-masked input, most probable first
/// (ties go to the shorter length).
std::vector<RankedLength> predict_length(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                         std::string_view code, std::string_view variable);
std::vector<RankedLength> predict_length(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                         const corpus::RefactoringRecord& record);

/// g x |V| token distributions for g MASK slots at every occurrence of
/// `variable`, slot i averaged over the occurrences.
nn::Matrix slot_distributions(const nn::ModelParams& model, const tok::SubwordVocab& vocab, std::string_view code,
                              std::string_view variable, int g);

/// Picks one distinct non-special token id per row.
/// Throws Error(VocabExhausted) when there are fewer such tokens than rows.
std::vector<int> decode_unique(const nn::Matrix& slot_probs, DecodeMode mode = DecodeMode::Greedy);

/// Throws Error(LengthOutOfRange) unless 1 <= g <= l_max.
std::vector<std::string> generate_tokens(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                         const corpus::RefactoringRecord& record, int g,
                                         DecodeMode mode = DecodeMode::Greedy);

/// Length prediction, then token generation at the top length.
/// Throws Error(VariableNotFound) when variable_before is not in the code.
Suggestion suggest(const nn::ModelParams& model, const tok::SubwordVocab& vocab, std::string_view code,
                   std::string_view variable_before, DecodeMode mode = DecodeMode::Greedy, int top_k = 5);

std::string to_json(const Suggestion& suggestion);

}  // namespace refbert::infer
