#include "refbert/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "refbert/error.hpp"

namespace refbert::metrics {

int hit_at_k(std::span<const int> ranked, int truth, int k) {
  const auto n = std::min(ranked.size(), static_cast<std::size_t>(std::max(k, 0)));
  return std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), truth) !=
                 ranked.begin() + static_cast<std::ptrdiff_t>(n)
             ? 1
             : 0;
}

double accuracy(std::span<const std::string> pred_tokens, std::span<const std::string> truth_tokens) {
  if (truth_tokens.empty()) throw Error(Errc::EmptyTruth, "accuracy needs at least one truth token");
  const std::set<std::string> truth(truth_tokens.begin(), truth_tokens.end());
  const std::set<std::string> pred(pred_tokens.begin(), pred_tokens.end());
  std::size_t found = 0;
  for (const auto& t : truth) found += pred.count(t);
  return static_cast<double>(found) / static_cast<double>(truth.size());
}

int exact_match(std::string_view pred_name, std::string_view truth_name) { return pred_name == truth_name ? 1 : 0; }

namespace {

template <class Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream ss;
  ss << std::setprecision(10) << x;
  return ss.str();
}

nlohmann::json rate(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }

}  // namespace

std::size_t token_edit_distance(std::span<const std::string> pred_tokens, std::span<const std::string> truth_tokens) {
  return levenshtein(pred_tokens, truth_tokens);
}

std::size_t char_edit_distance(std::string_view a, std::string_view b) { return levenshtein(a, b); }

double cer(std::string_view pred_name, std::string_view truth_name) {
  if (truth_name.empty()) throw Error(Errc::EmptyTruth, "CER needs a non-empty truth name");
  return static_cast<double>(char_edit_distance(pred_name, truth_name)) / static_cast<double>(truth_name.size()) *
         100.0;
}

EvalReport evaluate_corpus(const Predictor& predictor, const std::vector<corpus::RefactoringRecord>& records,
                           const tok::SubwordVocab& vocab, int l_max, std::string dataset) {
  EvalReport report;
  report.dataset = std::move(dataset);
  for (const auto& record : records) {
    const auto truth_tokens = vocab.tokenize_variable(record.variable_after);
    if (static_cast<int>(truth_tokens.size()) > l_max) {
      ++report.excluded_too_long;
      continue;
    }
    Prediction pred;
    try {
      pred = predictor(record);
    } catch (const Error& e) {
      if (e.code() == Errc::VariableNotFound || e.code() == Errc::NameTruncated || e.code() == Errc::NameTooLong) {
        ++report.excluded_failed;
        continue;
      }
      throw;
    }
    if (pred.sub_tokens.empty() && !pred.name.empty()) pred.sub_tokens = vocab.tokenize_variable(pred.name);

    ExampleRow row;
    row.id = record.id;
    row.prediction = pred.name;
    row.truth = record.variable_after;
    row.truth_length = static_cast<int>(truth_tokens.size());
    if (pred.ranked_lengths.empty()) {
      row.hit_at_1 = row.hit_at_3 = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.predicted_length = pred.ranked_lengths.front();
      row.hit_at_1 = hit_at_k(pred.ranked_lengths, row.truth_length, 1);
      row.hit_at_3 = hit_at_k(pred.ranked_lengths, row.truth_length, 3);
    }
    row.accuracy = accuracy(pred.sub_tokens, truth_tokens);
    row.exact_match = exact_match(pred.name, record.variable_after);
    row.token_ed = token_edit_distance(pred.sub_tokens, truth_tokens);
    row.cer = cer(pred.name, record.variable_after);
    report.rows.push_back(std::move(row));
  }

  report.evaluated = report.rows.size();
  report.has_lengths = !report.rows.empty() && !std::isnan(report.rows.front().hit_at_1);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (report.rows.empty()) {
    report.hit_at_1 = report.hit_at_3 = report.accuracy = report.exact_match = nan;
    report.mean_token_ed = report.mean_cer = nan;
    return report;
  }
  double h1 = 0, h3 = 0, acc = 0, em = 0, ed = 0, c = 0;
  for (const auto& r : report.rows) {
    h1 += r.hit_at_1;
    h3 += r.hit_at_3;
    acc += r.accuracy;
    em += r.exact_match;
    ed += static_cast<double>(r.token_ed);
    c += r.cer;
  }
  const double n = static_cast<double>(report.rows.size());
  report.hit_at_1 = h1 / n;
  report.hit_at_3 = h3 / n;
  report.accuracy = acc / n;
  report.exact_match = em / n;
  report.mean_token_ed = ed / n;
  report.mean_cer = c / n;
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["dataset"] = dataset;
  j["evaluated"] = evaluated;
  j["excluded_too_long"] = excluded_too_long;
  j["excluded_failed"] = excluded_failed;
  j["hit_at_1"] = rate(hit_at_1);
  j["hit_at_3"] = rate(hit_at_3);
  j["accuracy"] = rate(accuracy);
  j["exact_match"] = rate(exact_match);
  j["mean_token_ed"] = rate(mean_token_ed);
  j["mean_cer"] = rate(mean_cer);
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string EvalReport::rows_csv() const {
  std::string out = "id,prediction,truth,predicted_length,truth_length,hit_at_1,hit_at_3,accuracy,exact_match,token_ed,cer\n";
  for (const auto& r : rows) {
    out += csv_field(r.id) + ',' + csv_field(r.prediction) + ',' + csv_field(r.truth) + ',' +
           std::to_string(r.predicted_length) + ',' + std::to_string(r.truth_length) + ',' + num(r.hit_at_1) + ',' +
           num(r.hit_at_3) + ',' + num(r.accuracy) + ',' + std::to_string(r.exact_match) + ',' +
           std::to_string(r.token_ed) + ',' + num(r.cer) + '\n';
  }
  return out;
}

std::string EvalReport::summary_table() const {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(3);
  ss << "dataset          n  Hit@1  Hit@3  Accuracy     EM      CER     ED\n";
  ss << std::left << std::setw(12) << (dataset.empty() ? "-" : dataset) << std::right << std::setw(6) << evaluated;
  auto cell = [&](double x, int w) {
    if (std::isnan(x)) ss << std::setw(w) << "-";
    else ss << std::setw(w) << x;
  };
  cell(hit_at_1, 7);
  cell(hit_at_3, 7);
  cell(accuracy, 10);
  cell(exact_match, 7);
  cell(mean_cer, 9);
  cell(mean_token_ed, 7);
  ss << "\n";
  return ss.str();
}

}  // namespace refbert::metrics
