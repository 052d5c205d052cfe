#include "refbert/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "refbert/error.hpp"
#include "refbert/masking.hpp"

namespace refbert::infer {

using nn::Matrix;
using nn::Vector;

DecodeMode parse_decode_mode(std::string_view text) {
  if (text == "greedy") return DecodeMode::Greedy;
  if (text == "global") return DecodeMode::Global;
  if (text == "optimal") return DecodeMode::Optimal;
  throw Error(Errc::InvalidConfig, "unknown decode mode '" + std::string(text) + "'");
}

std::vector<RankedLength> predict_length(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                         std::string_view code, std::string_view variable) {
  const auto ex = train::mask_name(vocab, code, variable, train::MaskScheme::Num, 1, model.config.max_seq_len);
  const auto enc = nn::forward(model, ex.input_ids);
  const Vector q = nn::softmax(nn::length_logits(model, enc.cls_vector));
  std::vector<RankedLength> out;
  for (Eigen::Index i = 0; i < q.size(); ++i) out.push_back({static_cast<int>(i) + 1, q(i)});
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedLength& a, const RankedLength& b) { return a.probability > b.probability; });
  return out;
}

std::vector<RankedLength> predict_length(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                         const corpus::RefactoringRecord& record) {
  return predict_length(model, vocab, record.code_before, record.variable_before);
}

Matrix slot_distributions(const nn::ModelParams& model, const tok::SubwordVocab& vocab, std::string_view code,
                          std::string_view variable, int g) {
  if (g < 1 || g > model.config.l_max) {
    throw Error(Errc::LengthOutOfRange, "g = " + std::to_string(g) + " outside 1.." + std::to_string(model.config.l_max));
  }
  const auto ex = train::mask_name(vocab, code, variable, train::MaskScheme::Cmlm, g, model.config.max_seq_len);
  const auto enc = nn::forward(model, ex.input_ids);
  Matrix avg = Matrix::Zero(g, model.config.vocab_size);
  for (const auto& group : ex.mask_positions) {
    Matrix rows(g, enc.hidden_states.cols());
    for (int s = 0; s < g; ++s) rows.row(s) = enc.hidden_states.row(group[static_cast<std::size_t>(s)]);
    avg += nn::softmax_rows(nn::token_logits(model, rows));
  }
  avg /= static_cast<double>(ex.mask_positions.size());
  return avg;
}

namespace {

/// Best unused non-special column of `row`; ties go to the smaller id.
int best_unused(const Matrix& probs, Eigen::Index row, const std::vector<char>& used) {
  int best = -1;
  for (Eigen::Index j = tok::kNumSpecials; j < probs.cols(); ++j) {
    if (used[static_cast<std::size_t>(j)]) continue;
    if (best < 0 || probs(row, j) > probs(row, best)) best = static_cast<int>(j);
  }
  return best;
}

std::vector<int> decode_greedy(const Matrix& probs, std::vector<char> used) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const int t = best_unused(probs, i, used);
    used[static_cast<std::size_t>(t)] = 1;
    out.push_back(t);
  }
  return out;
}

std::vector<int> decode_global(const Matrix& probs) {
  const Vector total = probs.colwise().sum().transpose();
  std::vector<int> ids(static_cast<std::size_t>(probs.cols() - tok::kNumSpecials));
  std::iota(ids.begin(), ids.end(), tok::kNumSpecials);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return total(a) > total(b); });
  // Restrict the greedy pass to the chosen set by marking everything else used.
  std::vector<char> used(static_cast<std::size_t>(probs.cols()), 1);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) used[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])] = 0;
  return decode_greedy(probs, std::move(used));
}

std::vector<int> decode_optimal(const Matrix& probs) {
  const auto g = static_cast<std::size_t>(probs.rows());
  // Some optimal assignment uses only each slot's top-g tokens.
  std::vector<std::vector<int>> cand(g);
  for (std::size_t i = 0; i < g; ++i) {
    std::vector<char> used(static_cast<std::size_t>(probs.cols()), 0);
    for (std::size_t r = 0; r < g; ++r) {
      const int t = best_unused(probs, static_cast<Eigen::Index>(i), used);
      used[static_cast<std::size_t>(t)] = 1;
      cand[i].push_back(t);
    }
  }
  std::vector<int> current(g), best(g);
  double best_score = -std::numeric_limits<double>::infinity();
  auto score_of = [&](std::size_t i, int t) { return std::log(std::max(probs(static_cast<Eigen::Index>(i), t), 1e-300)); };
  auto search = [&](auto&& self, std::size_t i, double score) -> void {
    if (i == g) {
      if (score > best_score) {
        best_score = score;
        best = current;
      }
      return;
    }
    for (int t : cand[i]) {
      if (std::find(current.begin(), current.begin() + static_cast<std::ptrdiff_t>(i), t) !=
          current.begin() + static_cast<std::ptrdiff_t>(i)) {
        continue;
      }
      current[i] = t;
      self(self, i + 1, score + score_of(i, t));
    }
  };
  search(search, 0, 0.0);
  return best;
}

}  // namespace

std::vector<int> decode_unique(const Matrix& slot_probs, DecodeMode mode) {
  const auto available = slot_probs.cols() - tok::kNumSpecials;
  if (slot_probs.rows() > available) {
    throw Error(Errc::VocabExhausted, std::to_string(slot_probs.rows()) + " slots but only " +
                                          std::to_string(std::max<Eigen::Index>(available, 0)) + " non-special tokens");
  }
  switch (mode) {
    case DecodeMode::Greedy: return decode_greedy(slot_probs, std::vector<char>(static_cast<std::size_t>(slot_probs.cols()), 0));
    case DecodeMode::Global: return decode_global(slot_probs);
    case DecodeMode::Optimal: return decode_optimal(slot_probs);
  }
  return {};
}

std::vector<std::string> generate_tokens(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                         const corpus::RefactoringRecord& record, int g, DecodeMode mode) {
  const auto ids = decode_unique(slot_distributions(model, vocab, record.code_before, record.variable_before, g), mode);
  std::vector<std::string> out;
  for (int id : ids) out.push_back(vocab.token(id));
  return out;
}

Suggestion suggest(const nn::ModelParams& model, const tok::SubwordVocab& vocab, std::string_view code,
                   std::string_view variable_before, DecodeMode mode, int top_k) {
  Suggestion s;
  s.lengths = predict_length(model, vocab, code, variable_before);
  s.length_used = s.lengths.front().length;
  const Matrix probs = slot_distributions(model, vocab, code, variable_before, s.length_used);
  for (int id : decode_unique(probs, mode)) {
    s.sub_tokens.push_back(vocab.token(id));
    s.name += s.sub_tokens.back();
  }
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    std::vector<int> ids(static_cast<std::size_t>(probs.cols() - tok::kNumSpecials));
    std::iota(ids.begin(), ids.end(), tok::kNumSpecials);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(top_k, 0)), ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                      [&](int a, int b) { return probs(i, a) > probs(i, b) || (probs(i, a) == probs(i, b) && a < b); });
    std::vector<SlotCandidate> slot;
    for (std::size_t r = 0; r < k; ++r) slot.push_back({vocab.token(ids[r]), probs(i, ids[r])});
    s.per_slot.push_back(std::move(slot));
  }
  return s;
}

std::string to_json(const Suggestion& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["suggested_name"] = s.name;
  j["sub_tokens"] = s.sub_tokens;
  j["length_used"] = s.length_used;
  auto lengths = nlohmann::json::array();
  for (const auto& l : s.lengths) lengths.push_back({{"length", l.length}, {"probability", l.probability}});
  j["length_probabilities"] = lengths;
  auto slots = nlohmann::json::array();
  for (const auto& slot : s.per_slot) {
    auto arr = nlohmann::json::array();
    for (const auto& c : slot) arr.push_back({{"token", c.token}, {"probability", c.probability}});
    slots.push_back(arr);
  }
  j["per_slot_top"] = slots;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace refbert::infer
