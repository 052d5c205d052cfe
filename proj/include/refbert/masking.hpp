#pragma once

#include <string_view>
#include <vector>

#include "refbert/corpus.hpp"
#include "refbert/tokenizer.hpp"

namespace refbert::train {

enum class MaskScheme { Cmlm, Num };

/// One masked input: CLS + code tokens (name occurrences masked) + SEP.
struct MaskedExample {
  std::vector<int> input_ids;
  /// Indices into input_ids, one group per surviving occurrence of the name.
  std::vector<std::vector<int>> mask_positions;
  /// Ground-truth sub-token ids of the name (g of them).
  std::vector<int> target_ids;
  int length_label = 0;
  MaskScheme scheme = MaskScheme::Cmlm;

  /// All mask positions, occurrence by occurrence.
  std::vector<int> flat_positions() const;
};

struct MaskOptions {
  int l_max = 5;
  int max_seq_len = 512;
};

/// Code tokens with the name occurrences located, truncated so CLS + tokens
/// + SEP fit max_seq_len. Occurrences cut by the truncation point are
/// dropped together with everything after them.
struct LocatedName {
  std::vector<int> ids;  // without CLS/SEP
  std::vector<std::pair<std::size_t, std::size_t>> occurrences;
};

/// Throws Error(VariableNotFound) when the name never occurs and
/// Error(NameTruncated) when every occurrence lies past the cut.
LocatedName locate_name(const tok::SubwordVocab& vocab, std::string_view code, std::string_view name,
                        int max_seq_len);

/// Replaces each occurrence of `name` in `code` with `slots` MASK ids (CMLM)
/// or a single NUM id. target_ids/length_label describe `name` itself and are
/// only meaningful when the caller knows it is the true name.
MaskedExample mask_name(const tok::SubwordVocab& vocab, std::string_view code, std::string_view name,
                        MaskScheme scheme, int slots, int max_seq_len);

/// Masks variable_after in code_after with g MASK ids per occurrence.
/// Throws Error(NameTooLong) when g > l_max.
MaskedExample apply_cmlm_mask(const tok::SubwordVocab& vocab, const corpus::RefactoringRecord& record,
                              const MaskOptions& options = {});
/// Masks each occurrence of variable_after with one NUM id.
MaskedExample apply_num_mask(const tok::SubwordVocab& vocab, const corpus::RefactoringRecord& record,
                             const MaskOptions& options = {});

/// The unmasked token stream (CLS/SEP included) the example was built from.
std::vector<int> restore_tokens(const MaskedExample& example);

/// A full, unmasked sequence and the token positions of one name in it.
struct NameSequence {
  std::vector<int> ids;
  std::vector<int> positions;
};

NameSequence name_sequence(const tok::SubwordVocab& vocab, std::string_view code, std::string_view name,
                           int max_seq_len);

}  // namespace refbert::train
