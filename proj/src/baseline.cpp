#include "refbert/baseline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "refbert/error.hpp"
#include "refbert/infer.hpp"

namespace refbert::baseline {

std::vector<std::pair<int, double>> rank_by_average_log_prob(std::span<const nn::Matrix> slot_probs) {
  std::vector<std::pair<int, double>> out;
  for (std::size_t gi = 0; gi < slot_probs.size(); ++gi) {
    const auto& p = slot_probs[gi];
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const double best = p.row(i).tail(p.cols() - tok::kNumSpecials).maxCoeff();
      sum += std::log(std::max(best, 1e-300));
    }
    out.emplace_back(static_cast<int>(gi) + 1, sum / static_cast<double>(p.rows()));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::vector<std::pair<int, double>> heuristic_lp(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                                 std::string_view code, std::string_view variable) {
  std::vector<nn::Matrix> tables;
  for (int g = 1; g <= model.config.l_max; ++g) tables.push_back(infer::slot_distributions(model, vocab, code, variable, g));
  return rank_by_average_log_prob(tables);
}

std::vector<std::pair<int, double>> heuristic_lp(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                                 const corpus::RefactoringRecord& record) {
  return heuristic_lp(model, vocab, record.code_before, record.variable_before);
}

// ---------------------------------------------------------------- model

NgramModel::NgramModel(NgramOptions options, std::size_t vocab_size) : options_(options), vocab_size_(vocab_size) {
  if (options.n < 2) throw Error(Errc::InvalidConfig, "n-gram order must be at least 2");
  if (!(options.k > 0.0)) throw Error(Errc::InvalidConfig, "smoothing constant must be positive");
}

double NgramModel::probability(std::span<const int> context, int token) const {
  const Context ctx(context.begin(), context.end());
  std::size_t c = 0, total = 0;
  if (const auto it = counts_.find(ctx); it != counts_.end()) {
    total = totals_.at(ctx);
    if (const auto jt = it->second.find(token); jt != it->second.end()) c = jt->second;
  }
  return (static_cast<double>(c) + options_.k) /
         (static_cast<double>(total) + options_.k * static_cast<double>(vocab_size_));
}

double NgramModel::mle(std::span<const int> context, int token) const {
  const Context ctx(context.begin(), context.end());
  const auto it = counts_.find(ctx);
  if (it == counts_.end()) return 0.0;
  const auto jt = it->second.find(token);
  return jt == it->second.end() ? 0.0 : static_cast<double>(jt->second) / static_cast<double>(totals_.at(ctx));
}

double NgramModel::log_prob(std::span<const int> stream) const {
  const auto h = static_cast<std::size_t>(options_.n - 1);
  double sum = 0.0;
  for (std::size_t i = h; i < stream.size(); ++i) sum += std::log(probability(stream.subspan(i - h, h), stream[i]));
  return sum;
}

void NgramModel::add_sequence(std::span<const int> stream) {
  const auto h = static_cast<std::size_t>(options_.n - 1);
  for (std::size_t i = h; i < stream.size(); ++i) {
    Context ctx(stream.begin() + static_cast<std::ptrdiff_t>(i - h), stream.begin() + static_cast<std::ptrdiff_t>(i));
    ++counts_[ctx][stream[i]];
    ++totals_[ctx];
  }
}

void NgramModel::add_candidate(const Context& context, const std::string& name) { candidates_[context].insert(name); }

std::set<std::string> NgramModel::all_names() const {
  std::set<std::string> out;
  for (const auto& [ctx, names] : candidates_) out.insert(names.begin(), names.end());
  return out;
}

namespace {

std::string join_ids(const Context& ctx) {
  std::string out;
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ctx[i]);
  }
  return out;
}

Context split_ids(std::string_view text, std::size_t line_no) {
  Context out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto sp = text.find(' ', pos);
    if (sp == std::string_view::npos) sp = text.size();
    int v = 0;
    const auto res = std::from_chars(text.data() + pos, text.data() + sp, v);
    if (res.ec != std::errc{} || res.ptr != text.data() + sp) {
      throw Error(Errc::SchemaViolation, "n-gram file line " + std::to_string(line_no) + ": bad token id");
    }
    out.push_back(v);
    pos = sp + 1;
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

}  // namespace

void NgramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write n-gram model " + path.string());
  char kbuf[64];
  const auto kres = std::to_chars(kbuf, kbuf + sizeof kbuf, options_.k);
  out << "NGRAM v1 n=" << options_.n << " k=" << std::string(kbuf, kres.ptr) << " vocab=" << vocab_size_ << '\n';
  for (const auto& [ctx, row] : counts_) {
    for (const auto& [tok, count] : row) out << join_ids(ctx) << '\t' << tok << '\t' << count << '\n';
  }
  out << "#CANDIDATES\n";
  for (const auto& [ctx, names] : candidates_) {
    for (const auto& name : names) out << join_ids(ctx) << '\t' << name << '\n';
  }
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

NgramModel NgramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open n-gram model " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::SchemaViolation, "empty n-gram file");
  NgramOptions opts;
  std::size_t vocab = 0;
  {
    std::istringstream hs(line);
    std::string magic, version, n_kv, k_kv, v_kv;
    hs >> magic >> version >> n_kv >> k_kv >> v_kv;
    if (magic != "NGRAM" || version != "v1" || n_kv.rfind("n=", 0) != 0 || k_kv.rfind("k=", 0) != 0 ||
        v_kv.rfind("vocab=", 0) != 0) {
      throw Error(Errc::SchemaViolation, "bad n-gram header");
    }
    try {
      opts.n = std::stoi(n_kv.substr(2));
      opts.k = std::stod(k_kv.substr(2));
      vocab = std::stoul(v_kv.substr(6));
    } catch (const std::exception&) {
      throw Error(Errc::SchemaViolation, "bad n-gram header values");
    }
  }
  NgramModel model(opts, vocab);
  bool in_candidates = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line == "#CANDIDATES") {
      in_candidates = true;
      continue;
    }
    const auto fields = split_tabs(line);
    if (in_candidates) {
      if (fields.size() != 2) throw Error(Errc::SchemaViolation, "n-gram file line " + std::to_string(line_no));
      model.add_candidate(split_ids(fields[0], line_no), std::string(fields[1]));
    } else {
      if (fields.size() != 3) throw Error(Errc::SchemaViolation, "n-gram file line " + std::to_string(line_no));
      const auto ctx = split_ids(fields[0], line_no);
      const auto tokv = split_ids(fields[1], line_no);
      const auto cnt = split_ids(fields[2], line_no);
      if (tokv.size() != 1 || cnt.size() != 1 || cnt[0] <= 0 ||
          ctx.size() != static_cast<std::size_t>(opts.n - 1)) {
        throw Error(Errc::SchemaViolation, "n-gram file line " + std::to_string(line_no));
      }
      model.counts_[ctx][tokv[0]] += static_cast<std::size_t>(cnt[0]);
      model.totals_[ctx] += static_cast<std::size_t>(cnt[0]);
    }
  }
  return model;
}

// ---------------------------------------------------------------- training and suggestion

std::vector<int> ngram_stream(const tok::SubwordVocab& vocab, std::string_view code, int n, std::string_view name,
                              std::vector<std::size_t>* occurrence_starts) {
  std::vector<corpus::Span> spans;
  if (!name.empty()) spans = corpus::find_identifier_spans(code, name);
  const auto enc = vocab.encode_with_spans(code, spans);
  std::vector<int> out(static_cast<std::size_t>(n - 1), tok::kCls);
  std::vector<std::size_t> position(enc.ids.size() + 1);
  for (std::size_t i = 0; i < enc.ids.size(); ++i) {
    position[i] = out.size();
    const auto& text = vocab.token(enc.ids[i]);
    const bool blank = std::all_of(text.begin(), text.end(), [](char c) {
      return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    });
    if (!blank) out.push_back(enc.ids[i]);
  }
  out.push_back(tok::kSep);
  if (occurrence_starts != nullptr) {
    for (const auto& occ : enc.span_tokens) occurrence_starts->push_back(position[occ.first]);
  }
  return out;
}

NgramModel train_ngram(const std::vector<corpus::RefactoringRecord>& records, const tok::SubwordVocab& vocab,
                       const NgramOptions& options) {
  if (records.empty()) throw Error(Errc::EmptyCorpus, "n-gram training needs at least one record");
  NgramModel model(options, vocab.size());
  const auto h = static_cast<std::size_t>(options.n - 1);
  for (const auto& r : records) {
    std::vector<std::size_t> starts;
    const auto stream = ngram_stream(vocab, r.code_after, options.n, r.variable_after, &starts);
    model.add_sequence(stream);
    for (std::size_t s : starts) {
      model.add_candidate(Context(stream.begin() + static_cast<std::ptrdiff_t>(s - h),
                                  stream.begin() + static_cast<std::ptrdiff_t>(s)),
                          r.variable_after);
    }
  }
  return model;
}

std::vector<std::pair<std::string, double>> ngram_suggest(const NgramModel& model, const tok::SubwordVocab& vocab,
                                                          std::string_view code, std::string_view variable_before,
                                                          std::size_t top_k) {
  if (model.empty() || model.candidates().empty()) throw Error(Errc::NoCandidates, "the n-gram model is empty");
  const auto spans = corpus::find_identifier_spans(code, variable_before);
  if (spans.empty()) {
    throw Error(Errc::VariableNotFound, "'" + std::string(variable_before) + "' does not occur in the code");
  }
  const auto h = static_cast<std::size_t>(model.order() - 1);
  std::vector<std::size_t> starts;
  const auto stream = ngram_stream(vocab, code, model.order(), variable_before, &starts);

  std::set<std::string> pool;
  for (std::size_t s : starts) {
    const Context ctx(stream.begin() + static_cast<std::ptrdiff_t>(s - h), stream.begin() + static_cast<std::ptrdiff_t>(s));
    if (const auto it = model.candidates().find(ctx); it != model.candidates().end()) {
      pool.insert(it->second.begin(), it->second.end());
    }
  }
  if (pool.empty()) pool = model.all_names();

  std::vector<std::pair<std::string, double>> scored;
  for (const auto& name : pool) {
    const auto renamed = corpus::substitute(code, spans, name);
    scored.emplace_back(name, model.log_prob(ngram_stream(vocab, renamed, model.order())));
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (scored.size() > top_k) scored.resize(top_k);
  return scored;
}

}  // namespace refbert::baseline
