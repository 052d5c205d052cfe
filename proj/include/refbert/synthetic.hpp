#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refbert/corpus.hpp"
#include "refbert/train.hpp"

namespace refbert::synthetic {

struct FunctionOptions {
  int min_locals = 1;
  int max_locals = 3;
  double long_name_rate = 0.0;  // share of variables named with six words
};

/// Small Java methods with camelCase locals built from a fixed word list.
std::vector<corpus::SourceFunction> java_functions(std::size_t count, std::uint64_t seed,
                                                   const FunctionOptions& options = {});

/// Rename records whose after-name is a random ordering of one of a few
/// fixed capitalized word bags; the code around the name identifies the bag
/// but not the order.
std::vector<corpus::RefactoringRecord> bag_permutation_records(std::size_t count, std::uint64_t seed);

/// A training instance built directly from token ids in
/// [kNumSpecials, vocab_size), for gradient checks on tiny models.
train::TrainingInstance random_instance(std::uint64_t seed, int vocab_size, int context_tokens, int name_tokens,
                                        int occurrences);

/// Every tensor drawn at random (gains near one, weights and biases with the
/// given scale), so that no gradient is structurally tiny.
nn::ModelParams random_params(const nn::ModelConfig& config, std::uint64_t seed, double scale);

}  // namespace refbert::synthetic
