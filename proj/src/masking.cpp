#include "refbert/masking.hpp"

#include "refbert/error.hpp"

namespace refbert::train {

std::vector<int> MaskedExample::flat_positions() const {
  std::vector<int> out;
  for (const auto& group : mask_positions) out.insert(out.end(), group.begin(), group.end());
  return out;
}

LocatedName locate_name(const tok::SubwordVocab& vocab, std::string_view code, std::string_view name,
                        int max_seq_len) {
  const auto spans = corpus::find_identifier_spans(code, name);
  if (spans.empty()) throw Error(Errc::VariableNotFound, "'" + std::string(name) + "' does not occur in the code");
  auto enc = vocab.encode_with_spans(code, spans);
  const auto budget = static_cast<std::size_t>(max_seq_len - 2);
  LocatedName out;
  out.ids = std::move(enc.ids);
  for (const auto& occ : enc.span_tokens) {
    if (occ.second <= budget) out.occurrences.push_back(occ);
  }
  if (out.ids.size() > budget) {
    std::size_t cut = budget;
    // Do not leave a partial occurrence at the end.
    for (const auto& occ : enc.span_tokens) {
      if (occ.first < budget && occ.second > budget) cut = occ.first;
    }
    out.ids.resize(cut);
  }
  if (out.occurrences.empty()) {
    throw Error(Errc::NameTruncated, "every occurrence of '" + std::string(name) + "' is past the truncation point");
  }
  return out;
}

MaskedExample mask_name(const tok::SubwordVocab& vocab, std::string_view code, std::string_view name,
                        MaskScheme scheme, int slots, int max_seq_len) {
  const auto located = locate_name(vocab, code, name, max_seq_len);
  MaskedExample ex;
  ex.scheme = scheme;
  if (!located.occurrences.empty()) {
    const auto& first = located.occurrences.front();
    ex.target_ids.assign(located.ids.begin() + static_cast<std::ptrdiff_t>(first.first),
                         located.ids.begin() + static_cast<std::ptrdiff_t>(first.second));
  }
  ex.length_label = static_cast<int>(ex.target_ids.size());
  const int per_occurrence = scheme == MaskScheme::Num ? 1 : slots;
  const int filler = scheme == MaskScheme::Num ? tok::kNum : tok::kMask;

  ex.input_ids.reserve(located.ids.size() + 2);
  ex.input_ids.push_back(tok::kCls);
  std::size_t pos = 0;
  for (const auto& [b, e] : located.occurrences) {
    ex.input_ids.insert(ex.input_ids.end(), located.ids.begin() + static_cast<std::ptrdiff_t>(pos),
                        located.ids.begin() + static_cast<std::ptrdiff_t>(b));
    std::vector<int> group;
    for (int s = 0; s < per_occurrence; ++s) {
      group.push_back(static_cast<int>(ex.input_ids.size()));
      ex.input_ids.push_back(filler);
    }
    ex.mask_positions.push_back(std::move(group));
    pos = e;
  }
  ex.input_ids.insert(ex.input_ids.end(), located.ids.begin() + static_cast<std::ptrdiff_t>(pos), located.ids.end());
  ex.input_ids.push_back(tok::kSep);
  // Masking with more slots than the name has tokens can overflow the budget.
  if (ex.input_ids.size() > static_cast<std::size_t>(max_seq_len)) {
    const auto limit = static_cast<int>(max_seq_len) - 1;
    while (!ex.mask_positions.empty() && ex.mask_positions.back().back() >= limit) ex.mask_positions.pop_back();
    if (ex.mask_positions.empty()) {
      throw Error(Errc::NameTruncated, "masked sequence for '" + std::string(name) + "' exceeds max_seq_len");
    }
    ex.input_ids.resize(static_cast<std::size_t>(limit));
    ex.input_ids.push_back(tok::kSep);
  }
  return ex;
}

namespace {

MaskedExample mask_record(const tok::SubwordVocab& vocab, const corpus::RefactoringRecord& record,
                          MaskScheme scheme, const MaskOptions& options) {
  const auto g = static_cast<int>(vocab.encode(record.variable_after).size());
  if (g > options.l_max) {
    throw Error(Errc::NameTooLong, "'" + record.variable_after + "' has " + std::to_string(g) +
                                       " sub-tokens, l_max is " + std::to_string(options.l_max));
  }
  return mask_name(vocab, record.code_after, record.variable_after, scheme, g, options.max_seq_len);
}

}  // namespace

MaskedExample apply_cmlm_mask(const tok::SubwordVocab& vocab, const corpus::RefactoringRecord& record,
                              const MaskOptions& options) {
  return mask_record(vocab, record, MaskScheme::Cmlm, options);
}

MaskedExample apply_num_mask(const tok::SubwordVocab& vocab, const corpus::RefactoringRecord& record,
                             const MaskOptions& options) {
  return mask_record(vocab, record, MaskScheme::Num, options);
}

std::vector<int> restore_tokens(const MaskedExample& ex) {
  std::vector<int> out;
  std::size_t group = 0;
  for (std::size_t i = 0; i < ex.input_ids.size(); ++i) {
    if (group < ex.mask_positions.size() && static_cast<int>(i) == ex.mask_positions[group].front()) {
      out.insert(out.end(), ex.target_ids.begin(), ex.target_ids.end());
      i += ex.mask_positions[group].size() - 1;
      ++group;
    } else {
      out.push_back(ex.input_ids[i]);
    }
  }
  return out;
}

NameSequence name_sequence(const tok::SubwordVocab& vocab, std::string_view code, std::string_view name,
                           int max_seq_len) {
  const auto located = locate_name(vocab, code, name, max_seq_len);
  NameSequence seq;
  seq.ids.reserve(located.ids.size() + 2);
  seq.ids.push_back(tok::kCls);
  seq.ids.insert(seq.ids.end(), located.ids.begin(), located.ids.end());
  seq.ids.push_back(tok::kSep);
  for (const auto& [b, e] : located.occurrences) {
    for (std::size_t t = b; t < e; ++t) seq.positions.push_back(static_cast<int>(t + 1));
  }
  return seq;
}

}  // namespace refbert::train
