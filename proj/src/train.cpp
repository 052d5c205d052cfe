#include "refbert/train.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "refbert/error.hpp"
#include "refbert/rng.hpp"

namespace refbert::train {

using nn::Matrix;
using nn::ModelParams;
using nn::Vector;

// ---------------------------------------------------------------- config

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw Error(Errc::InvalidConfig, "bad value for " + key + ": '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error(Errc::InvalidConfig, "bad boolean for " + key + ": '" + value + "'");
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be positive");
  if (batch_size < 1) fail("batch_size must be positive");
  if (max_epochs < 1) fail("max_epochs must be positive");
  if (patience < 1) fail("patience must be positive");
  if (!(lambda_cmlm >= 0.0 && lambda_bot >= 0.0 && lambda_cl >= 0.0)) fail("lambdas must be non-negative");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (l_max < 1) fail("l_max must be positive");
  if (max_seq_len < 3) fail("max_seq_len must be at least 3");
  if (vocab_size < tok::kBaseVocab) fail("vocab_size must be at least " + std::to_string(tok::kBaseVocab));
  if (bpe_min_frequency < 1) fail("bpe_min_frequency must be positive");
  if (decode != "greedy" && decode != "global" && decode != "optimal") fail("decode must be greedy, global or optimal");
  if (ngram_order < 2) fail("ngram_order must be at least 2");
  if (!(ngram_k > 0.0)) fail("ngram_k must be positive");
  model_config(vocab_size).validate();
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"learning_rate", format_double(learning_rate)},
      {"adam_beta1", format_double(adam_beta1)},
      {"adam_beta2", format_double(adam_beta2)},
      {"adam_epsilon", format_double(adam_epsilon)},
      {"batch_size", std::to_string(batch_size)},
      {"max_epochs", std::to_string(max_epochs)},
      {"patience", std::to_string(patience)},
      {"seed", std::to_string(seed)},
      {"lambda_cmlm", format_double(lambda_cmlm)},
      {"lambda_bot", format_double(lambda_bot)},
      {"lambda_cl", format_double(lambda_cl)},
      {"tau", format_double(tau)},
      {"bot_dedupe", b(bot_dedupe)},
      {"freeze_token_head_lp", b(freeze_token_head_lp)},
      {"freeze_length_head_tg", b(freeze_length_head_tg)},
      {"l_max", std::to_string(l_max)},
      {"max_seq_len", std::to_string(max_seq_len)},
      {"dropout", format_double(dropout)},
      {"num_layers", std::to_string(num_layers)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"num_heads", std::to_string(num_heads)},
      {"ffn_dim", std::to_string(ffn_dim)},
      {"tie_embeddings", b(tie_embeddings)},
      {"vocab_size", std::to_string(vocab_size)},
      {"bpe_min_frequency", std::to_string(bpe_min_frequency)},
      {"camel_split", b(camel_split)},
      {"decode", decode},
      {"ngram_order", std::to_string(ngram_order)},
      {"ngram_k", format_double(ngram_k)},
  };
}

void TrainConfig::apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
    else if (key == "adam_beta1") adam_beta1 = parse_number<double>(key, value);
    else if (key == "adam_beta2") adam_beta2 = parse_number<double>(key, value);
    else if (key == "adam_epsilon") adam_epsilon = parse_number<double>(key, value);
    else if (key == "batch_size") batch_size = parse_number<int>(key, value);
    else if (key == "max_epochs") max_epochs = parse_number<int>(key, value);
    else if (key == "patience") patience = parse_number<int>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "lambda_cmlm") lambda_cmlm = parse_number<double>(key, value);
    else if (key == "lambda_bot") lambda_bot = parse_number<double>(key, value);
    else if (key == "lambda_cl") lambda_cl = parse_number<double>(key, value);
    else if (key == "tau") tau = parse_number<double>(key, value);
    else if (key == "bot_dedupe") bot_dedupe = parse_bool(key, value);
    else if (key == "freeze_token_head_lp") freeze_token_head_lp = parse_bool(key, value);
    else if (key == "freeze_length_head_tg") freeze_length_head_tg = parse_bool(key, value);
    else if (key == "l_max") l_max = parse_number<int>(key, value);
    else if (key == "max_seq_len") max_seq_len = parse_number<int>(key, value);
    else if (key == "dropout") dropout = parse_number<double>(key, value);
    else if (key == "num_layers") num_layers = parse_number<int>(key, value);
    else if (key == "hidden_dim") hidden_dim = parse_number<int>(key, value);
    else if (key == "num_heads") num_heads = parse_number<int>(key, value);
    else if (key == "ffn_dim") ffn_dim = parse_number<int>(key, value);
    else if (key == "tie_embeddings") tie_embeddings = parse_bool(key, value);
    else if (key == "vocab_size") vocab_size = parse_number<int>(key, value);
    else if (key == "bpe_min_frequency") bpe_min_frequency = parse_number<int>(key, value);
    else if (key == "camel_split") camel_split = parse_bool(key, value);
    else if (key == "decode") decode = value;
    else if (key == "ngram_order") ngram_order = parse_number<int>(key, value);
    else if (key == "ngram_k") ngram_k = parse_number<double>(key, value);
    else throw Error(Errc::InvalidConfig, "unknown config key '" + key + "'");
  }
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [key, value] : to_kv()) out += key + " = " + value + "\n";
  return out;
}

nn::ModelConfig TrainConfig::model_config(int actual_vocab_size) const {
  nn::ModelConfig mc;
  mc.num_layers = num_layers;
  mc.hidden_dim = hidden_dim;
  mc.num_heads = num_heads;
  mc.ffn_dim = ffn_dim;
  mc.max_seq_len = max_seq_len;
  mc.vocab_size = actual_vocab_size;
  mc.l_max = l_max;
  mc.dropout = dropout;
  mc.tie_embeddings = tie_embeddings;
  return mc;
}

std::map<std::string, std::string> parse_kv_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(std::string_view(stripped).substr(0, eq));
    auto value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) throw Error(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  TrainConfig config;
  config.apply(parse_kv_text(ss.str()));
  config.validate();
  return config;
}

// ---------------------------------------------------------------- Adam

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 long step, const AdamOptions& o) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "adam_update: parameter, gradient and moment sizes differ");
  }
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * grads[i];
    v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
  }
}

Adam::Adam(const ModelParams& params, const AdamOptions& options)
    : options_(options), m_(params.zeros_like()), v_(params.zeros_like()) {}

void Adam::step(ModelParams& params, const ModelParams& grads, const std::vector<bool>& trainable) {
  auto p = nn::tensors(params);
  auto g = nn::tensors(grads);
  auto m = nn::tensors(m_);
  auto v = nn::tensors(v_);
  if (g.size() != p.size() || m.size() != p.size() || trainable.size() != p.size()) {
    throw Error(Errc::ShapeMismatch, "Adam::step: tensor lists differ");
  }
  ++step_;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (!trainable[t]) continue;
    adam_update(p[t].data, g[t].data, m[t].data, v[t].data, step_, options_);
  }
}

// ---------------------------------------------------------------- instances

std::vector<TrainingInstance> build_instances(const tok::SubwordVocab& vocab,
                                              const std::vector<corpus::RefactoringRecord>& records,
                                              const MaskOptions& options, ExclusionStats* stats) {
  std::vector<TrainingInstance> out;
  out.reserve(records.size());
  ExclusionStats local;
  for (const auto& r : records) {
    try {
      TrainingInstance inst;
      inst.id = r.id;
      inst.cmlm = apply_cmlm_mask(vocab, r, options);
      inst.num = apply_num_mask(vocab, r, options);
      inst.after = name_sequence(vocab, r.code_after, r.variable_after, options.max_seq_len);
      inst.before = name_sequence(vocab, r.code_before, r.variable_before, options.max_seq_len);
      out.push_back(std::move(inst));
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::NameTooLong: ++local.name_too_long; break;
        case Errc::NameTruncated: ++local.truncated; break;
        case Errc::VariableNotFound: ++local.not_found; break;
        default: throw;
      }
    }
  }
  if (stats != nullptr) *stats = local;
  return out;
}

// ---------------------------------------------------------------- loss

namespace {

Matrix gather_rows(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

void require_finite(double value, std::string_view what, const std::string& id) {
  if (!std::isfinite(value)) {
    throw Error(Errc::NonFiniteLoss, std::string(what) + " is not finite for instance '" + id + "'");
  }
}

}  // namespace

LossBreakdown instance_loss(const ModelParams& params, const TrainingInstance& inst, const Objective& obj,
                            bool train_mode, std::uint64_t dropout_seed, ModelParams* grads) {
  LossBreakdown out;
  const bool need_tokens = obj.cmlm != 0.0 || obj.bot != 0.0 || obj.cl != 0.0;

  if (need_tokens) {
    const auto& ex = inst.cmlm;
    const auto tape = nn::forward_tape(params, ex.input_ids, train_mode, derive_seed(dropout_seed, 0));
    const Matrix& H = tape.output;
    const auto flat = ex.flat_positions();
    Matrix d_hidden;
    if (grads != nullptr) d_hidden = Matrix::Zero(H.rows(), H.cols());

    if (obj.cmlm != 0.0 || obj.bot != 0.0) {
      const Matrix rows = gather_rows(H, flat);
      const Matrix probs = nn::softmax_rows(nn::token_logits(params, rows));
      Matrix d_probs = Matrix::Zero(probs.rows(), probs.cols());
      const auto g = static_cast<Eigen::Index>(ex.target_ids.size());
      const loss::BotOptions bot_options{obj.bot_dedupe};
      for (std::size_t o = 0; o < ex.mask_positions.size(); ++o) {
        const auto first = static_cast<Eigen::Index>(o) * g;
        loss::MaskedPrediction pred{probs.middleRows(first, g), ex.target_ids};
        if (obj.cmlm != 0.0) {
          out.cmlm += loss::cmlm_loss(pred);
          if (grads != nullptr) d_probs.middleRows(first, g) += obj.cmlm * loss::cmlm_loss_grad(pred);
        }
        if (obj.bot != 0.0) {
          out.bot += loss::bot_loss(loss::bot_distribution(pred), pred.targets, bot_options);
          if (grads != nullptr) d_probs.middleRows(first, g) += obj.bot * loss::bot_loss_grad(pred, bot_options);
        }
      }
      if (grads != nullptr) {
        const Matrix d_logits = nn::softmax_rows_backward(probs, d_probs);
        const Matrix d_rows = nn::token_head_backward(params, rows, d_logits, *grads);
        for (std::size_t i = 0; i < flat.size(); ++i) d_hidden.row(flat[i]) += d_rows.row(static_cast<Eigen::Index>(i));
      }
    }

    if (obj.cl != 0.0) {
      const auto tape_after = nn::forward_tape(params, inst.after.ids, false, 0);
      const auto tape_before = nn::forward_tape(params, inst.before.ids, false, 0);
      const loss::NameTriple triple{
          nn::pool_name_representation(H, flat),
          nn::pool_name_representation(tape_after.output, inst.after.positions),
          nn::pool_name_representation(tape_before.output, inst.before.positions)};
      out.cl = loss::cl_loss(std::span(&triple, 1), obj.tau);
      if (grads != nullptr) {
        const auto d = loss::cl_loss_grad(std::span(&triple, 1), obj.tau).front();
        nn::pool_backward(H, flat, obj.cl * d.gen, d_hidden);
        Matrix d_after = Matrix::Zero(tape_after.output.rows(), tape_after.output.cols());
        nn::pool_backward(tape_after.output, inst.after.positions, obj.cl * d.after, d_after);
        nn::backward(params, tape_after, d_after, *grads);
        Matrix d_before = Matrix::Zero(tape_before.output.rows(), tape_before.output.cols());
        nn::pool_backward(tape_before.output, inst.before.positions, obj.cl * d.before, d_before);
        nn::backward(params, tape_before, d_before, *grads);
      }
    }

    if (grads != nullptr) nn::backward(params, tape, d_hidden, *grads);
  }

  if (obj.num != 0.0) {
    const auto& ex = inst.num;
    const auto tape = nn::forward_tape(params, ex.input_ids, train_mode, derive_seed(dropout_seed, 1));
    const Vector cls = tape.output.row(0).transpose();
    const Vector q = nn::softmax(nn::length_logits(params, cls));
    out.num = loss::lp_loss(q, ex.length_label);
    if (grads != nullptr) {
      const Vector d_logits = nn::softmax_backward(q, obj.num * loss::lp_loss_grad(q, ex.length_label));
      const Vector d_cls = nn::length_head_backward(params, cls, d_logits, *grads);
      Matrix d_hidden = Matrix::Zero(tape.output.rows(), tape.output.cols());
      d_hidden.row(0) = d_cls.transpose();
      nn::backward(params, tape, d_hidden, *grads);
    }
  }

  out.total = obj.cmlm * out.cmlm + obj.bot * out.bot + obj.cl * out.cl + obj.num * out.num;
  require_finite(out.total, "loss", inst.id);
  return out;
}

LossBreakdown mean_loss(const ModelParams& params, const std::vector<TrainingInstance>& instances,
                        const Objective& objective) {
  LossBreakdown sum;
  for (const auto& inst : instances) {
    const auto l = instance_loss(params, inst, objective, false, 0, nullptr);
    sum.total += l.total;
    sum.cmlm += l.cmlm;
    sum.bot += l.bot;
    sum.cl += l.cl;
    sum.num += l.num;
  }
  if (!instances.empty()) {
    const double n = static_cast<double>(instances.size());
    sum.total /= n;
    sum.cmlm /= n;
    sum.bot /= n;
    sum.cl /= n;
    sum.num /= n;
  }
  return sum;
}

// ---------------------------------------------------------------- stages

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::Pretrain: return "pretrain";
    case Stage::FinetuneLp: return "finetune_lp";
    case Stage::FinetuneTg: return "finetune_tg";
  }
  return "unknown";
}

Objective stage_objective(Stage stage, const TrainConfig& config) {
  Objective o;
  o.tau = config.tau;
  o.bot_dedupe = config.bot_dedupe;
  switch (stage) {
    case Stage::Pretrain: o.cmlm = 1.0; break;
    case Stage::FinetuneLp: o.num = 1.0; break;
    case Stage::FinetuneTg:
      o.cmlm = config.lambda_cmlm;
      o.bot = config.lambda_bot;
      o.cl = config.lambda_cl;
      break;
  }
  return o;
}

std::vector<bool> trainable_mask(Stage stage, const TrainConfig& config, const ModelParams& params) {
  const auto views = nn::tensors(params);
  std::vector<bool> mask(views.size(), true);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& name = views[i].name;
    const bool token_head = name == "token_head.w" || name == "token_head.b";
    const bool length_head = name == "length_head.w" || name == "length_head.b";
    if (stage == Stage::FinetuneLp && config.freeze_token_head_lp && token_head) mask[i] = false;
    if (stage == Stage::FinetuneTg && config.freeze_length_head_tg && length_head) mask[i] = false;
  }
  return mask;
}

namespace {

void add_into(ModelParams& acc, const ModelParams& g) {
  auto a = nn::tensors(acc);
  const auto b = nn::tensors(g);
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].data.size(); ++i) a[t].data[i] += b[t].data[i];
  }
}

void scale(ModelParams& p, double s) {
  for (auto& t : nn::tensors(p)) {
    for (double& x : t.data) x *= s;
  }
}

void set_zero(ModelParams& p) {
  for (auto& t : nn::tensors(p)) std::fill(t.data.begin(), t.data.end(), 0.0);
}

}  // namespace

TrainResult run_stage(Stage stage, const TrainConfig& config, ModelParams& model,
                      const std::vector<TrainingInstance>& train_set,
                      const std::vector<TrainingInstance>& validation_set, const std::filesystem::path& out_dir) {
  config.validate();
  if (train_set.empty()) throw Error(Errc::EmptyCorpus, std::string(to_string(stage)) + ": no training instances");
  const auto objective = stage_objective(stage, config);
  const auto trainable = trainable_mask(stage, config, model);
  Adam adam(model, {config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon});
  const std::uint64_t stage_seed = derive_seed(config.seed, 0x5747 + static_cast<std::uint64_t>(stage));

  std::ofstream log;
  const std::string prefix(to_string(stage));
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir / (prefix + ".log.csv"), std::ios::binary);
    if (!log) throw Error(Errc::Io, "cannot write training log in " + out_dir.string());
    log << "epoch,step,loss,cmlm,bot,cl,num,validation\n";
  }

  TrainResult result;
  result.best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  ModelParams grads = model.zeros_like();
  ModelParams instance_grads = model.zeros_like();
  std::vector<std::size_t> order(train_set.size());
  long step = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 shuffler(derive_seed(stage_seed, static_cast<std::uint64_t>(epoch)));
    shuffler.shuffle(order);

    LossBreakdown epoch_sum;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      ++step;
      set_zero(grads);
      for (std::size_t k = start; k < stop; ++k) {
        set_zero(instance_grads);
        const auto dropout_seed = derive_seed(stage_seed, (static_cast<std::uint64_t>(step) << 20) + k);
        const auto l = instance_loss(model, train_set[order[k]], objective, true, dropout_seed, &instance_grads);
        add_into(grads, instance_grads);
        epoch_sum.total += l.total;
        epoch_sum.cmlm += l.cmlm;
        epoch_sum.bot += l.bot;
        epoch_sum.cl += l.cl;
        epoch_sum.num += l.num;
      }
      scale(grads, 1.0 / static_cast<double>(stop - start));
      if (!grads.all_finite()) {
        throw Error(Errc::NonFiniteGradient,
                    prefix + ": non-finite gradient at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
      }
      adam.step(model, grads, trainable);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.step = step;
    const double n = static_cast<double>(train_set.size());
    entry.train = {epoch_sum.total / n, epoch_sum.cmlm / n, epoch_sum.bot / n, epoch_sum.cl / n, epoch_sum.num / n};
    entry.validation = std::numeric_limits<double>::quiet_NaN();
    if (!validation_set.empty()) entry.validation = mean_loss(model, validation_set, objective).total;
    result.history.push_back(entry);

    if (log.is_open()) {
      log << epoch << ',' << step << ',' << format_double(entry.train.total) << ',' << format_double(entry.train.cmlm)
          << ',' << format_double(entry.train.bot) << ',' << format_double(entry.train.cl) << ','
          << format_double(entry.train.num) << ',' << format_double(entry.validation) << '\n';
      log.flush();
      nn::save_checkpoint(out_dir / (prefix + ".last.rfbt"), model);
    }

    if (validation_set.empty()) {
      result.best = model;
      result.best_epoch = epoch;
      continue;
    }
    if (entry.validation < best_val) {
      best_val = entry.validation;
      result.best = model;
      result.best_epoch = epoch;
      since_best = 0;
      if (log.is_open()) nn::save_checkpoint(out_dir / (prefix + ".best.rfbt"), model);
    } else if (++since_best >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  if (log.is_open() && validation_set.empty()) nn::save_checkpoint(out_dir / (prefix + ".best.rfbt"), result.best);
  return result;
}

TrainResult pretrain(const TrainConfig& config, ModelParams& model, const std::vector<TrainingInstance>& train_set,
                     const std::vector<TrainingInstance>& validation_set, const std::filesystem::path& out_dir) {
  return run_stage(Stage::Pretrain, config, model, train_set, validation_set, out_dir);
}

TrainResult finetune_lp(const TrainConfig& config, ModelParams& model, const std::vector<TrainingInstance>& train_set,
                        const std::vector<TrainingInstance>& validation_set, const std::filesystem::path& out_dir) {
  return run_stage(Stage::FinetuneLp, config, model, train_set, validation_set, out_dir);
}

TrainResult finetune_tg(const TrainConfig& config, ModelParams& model, const std::vector<TrainingInstance>& train_set,
                        const std::vector<TrainingInstance>& validation_set, const std::filesystem::path& out_dir) {
  return run_stage(Stage::FinetuneTg, config, model, train_set, validation_set, out_dir);
}

}  // namespace refbert::train
