#include "refbert/nn.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "refbert/error.hpp"
#include "refbert/rng.hpp"
#include "refbert/tokenizer.hpp"

namespace refbert::nn {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

int parse_int(const std::map<std::string, std::string>& kv, const char* key, int fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::InvalidConfig, std::string(key) + " = '" + it->second + "' is not an integer");
  }
}

double parse_double(const std::map<std::string, std::string>& kv, const char* key, double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::InvalidConfig, std::string(key) + " = '" + it->second + "' is not a number");
  }
}

bool parse_bool(const std::map<std::string, std::string>& kv, const char* key, bool fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw Error(Errc::InvalidConfig, std::string(key) + " = '" + it->second + "' is not a boolean");
}

template <class Params, class View, class Span>
std::vector<View> collect(Params& p) {
  std::vector<View> out;
  auto mat = [&](std::string name, auto& m) {
    out.push_back(View{std::move(name), Span(m.data(), static_cast<std::size_t>(m.size())),
                       {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, false});
  };
  auto vec = [&](std::string name, auto& v) {
    out.push_back(View{std::move(name), Span(v.data(), static_cast<std::size_t>(v.size())),
                       {static_cast<std::uint32_t>(v.size())}, true});
  };
  mat("embeddings.token", p.token_embedding);
  mat("embeddings.position", p.position_embedding);
  vec("embeddings.ln.gain", p.emb_ln_gain);
  vec("embeddings.ln.bias", p.emb_ln_bias);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    mat(pre + "attn.query.w", L.w_query);
    vec(pre + "attn.query.b", L.b_query);
    mat(pre + "attn.key.w", L.w_key);
    mat(pre + "attn.value.w", L.w_value);
    vec(pre + "attn.value.b", L.b_value);
    mat(pre + "attn.out.w", L.w_out);
    vec(pre + "attn.out.b", L.b_out);
    vec(pre + "ln1.gain", L.ln1_gain);
    vec(pre + "ln1.bias", L.ln1_bias);
    mat(pre + "ffn.in.w", L.w_ffn_in);
    vec(pre + "ffn.in.b", L.b_ffn_in);
    mat(pre + "ffn.out.w", L.w_ffn_out);
    vec(pre + "ffn.out.b", L.b_ffn_out);
    vec(pre + "ln2.gain", L.ln2_gain);
    vec(pre + "ln2.bias", L.ln2_bias);
  }
  if (!p.config.tie_embeddings) mat("token_head.w", p.token_head_w);
  vec("token_head.b", p.token_head_b);
  mat("length_head.w", p.length_head_w);
  vec("length_head.b", p.length_head_b);
  // Layer-norm gains are vectors but start at one, not zero.
  for (auto& v : out) {
    if (v.name.ends_with(".gain")) v.is_bias = false;
  }
  return out;
}

struct LayerNormOut {
  Matrix y;
  Matrix hat;
  Vector inv_std;
};

LayerNormOut layer_norm(const Matrix& x, const Vector& gain, const Vector& bias) {
  LayerNormOut out;
  const auto n = x.rows();
  const auto d = x.cols();
  out.hat.resize(n, d);
  out.inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    out.inv_std(i) = inv;
    out.hat.row(i) = (x.row(i).array() - mean) * inv;
  }
  out.y = (out.hat.array().rowwise() * gain.transpose().array()).rowwise() + bias.transpose().array();
  return out;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& hat, const Vector& inv_std, const Vector& gain,
                           Vector& d_gain, Vector& d_bias) {
  d_gain += (dy.array() * hat.array()).colwise().sum().transpose().matrix();
  d_bias += dy.colwise().sum().transpose();
  const Matrix dhat = dy.array().rowwise() * gain.transpose().array();
  const auto d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_dhat = dhat.row(i).sum() / d;
    const double mean_dhat_hat = dhat.row(i).dot(hat.row(i)) / d;
    dx.row(i) = inv_std(i) * (dhat.row(i).array() - mean_dhat - hat.row(i).array() * mean_dhat_hat);
  }
  return dx;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, SplitMix64& rng) {
  Matrix m(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < p ? 0.0 : keep_scale;
  return m;
}

Matrix linear(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix y = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

Matrix linear_nobias(const Matrix& x, const Matrix& w) { return x * w.transpose(); }

}  // namespace

void ModelConfig::validate() const {
  auto bad = [](const std::string& why) { throw Error(Errc::InvalidConfig, why); };
  if (num_layers < 0) bad("num_layers must be >= 0");
  if (hidden_dim < 1) bad("hidden_dim must be >= 1");
  if (num_heads < 1 || hidden_dim % num_heads != 0) bad("hidden_dim must be divisible by num_heads");
  if (ffn_dim < 1) bad("ffn_dim must be >= 1");
  if (max_seq_len < 3) bad("max_seq_len must be >= 3");
  if (vocab_size <= tok::kNumSpecials) bad("vocab_size must exceed the special-token count");
  if (l_max < 1) bad("l_max must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must be in [0, 1)");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  return {{"num_layers", std::to_string(num_layers)},
          {"hidden_dim", std::to_string(hidden_dim)},
          {"num_heads", std::to_string(num_heads)},
          {"ffn_dim", std::to_string(ffn_dim)},
          {"max_seq_len", std::to_string(max_seq_len)},
          {"vocab_size", std::to_string(vocab_size)},
          {"l_max", std::to_string(l_max)},
          {"dropout", num(dropout)},
          {"tie_embeddings", tie_embeddings ? "true" : "false"}};
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  c.num_layers = parse_int(kv, "num_layers", c.num_layers);
  c.hidden_dim = parse_int(kv, "hidden_dim", c.hidden_dim);
  c.num_heads = parse_int(kv, "num_heads", c.num_heads);
  c.ffn_dim = parse_int(kv, "ffn_dim", c.ffn_dim);
  c.max_seq_len = parse_int(kv, "max_seq_len", c.max_seq_len);
  c.vocab_size = parse_int(kv, "vocab_size", c.vocab_size);
  c.l_max = parse_int(kv, "l_max", c.l_max);
  c.dropout = parse_double(kv, "dropout", c.dropout);
  c.tie_embeddings = parse_bool(kv, "tie_embeddings", c.tie_embeddings);
  return c;
}

std::vector<TensorView> tensors(ModelParams& params) {
  return collect<ModelParams, TensorView, std::span<double>>(params);
}

std::vector<ConstTensorView> tensors(const ModelParams& params) {
  return collect<const ModelParams, ConstTensorView, std::span<const double>>(params);
}

ModelParams allocate_params(const ModelConfig& c) {
  c.validate();
  const Eigen::Index d = c.hidden_dim;
  ModelParams p;
  p.config = c;
  p.token_embedding = Matrix::Zero(c.vocab_size, d);
  p.position_embedding = Matrix::Zero(c.max_seq_len, d);
  p.emb_ln_gain = Vector::Ones(d);
  p.emb_ln_bias = Vector::Zero(d);
  p.layers.resize(static_cast<std::size_t>(c.num_layers));
  for (auto& L : p.layers) {
    L.w_query = Matrix::Zero(d, d);
    L.w_key = Matrix::Zero(d, d);
    L.w_value = Matrix::Zero(d, d);
    L.w_out = Matrix::Zero(d, d);
    L.b_query = Vector::Zero(d);
    L.b_value = Vector::Zero(d);
    L.b_out = Vector::Zero(d);
    L.ln1_gain = Vector::Ones(d);
    L.ln1_bias = Vector::Zero(d);
    L.w_ffn_in = Matrix::Zero(c.ffn_dim, d);
    L.b_ffn_in = Vector::Zero(c.ffn_dim);
    L.w_ffn_out = Matrix::Zero(d, c.ffn_dim);
    L.b_ffn_out = Vector::Zero(d);
    L.ln2_gain = Vector::Ones(d);
    L.ln2_bias = Vector::Zero(d);
  }
  if (!c.tie_embeddings) p.token_head_w = Matrix::Zero(c.vocab_size, d);
  p.token_head_b = Vector::Zero(c.vocab_size);
  p.length_head_w = Matrix::Zero(c.l_max, d);
  p.length_head_b = Vector::Zero(c.l_max);
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = allocate_params(config);
  for (auto& t : tensors(z)) std::fill(t.data.begin(), t.data.end(), 0.0);
  return z;
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors(*this)) {
    for (double v : t.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = allocate_params(config);
  auto views = tensors(p);
  for (std::size_t i = 0; i < views.size(); ++i) {
    auto& t = views[i];
    if (t.is_bias || t.name.ends_with(".gain")) continue;
    SplitMix64 rng(derive_seed(seed, i));
    for (double& v : t.data) v = kInitStd * rng.normal();
  }
  return p;
}

double gelu(double x) noexcept {
  constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) noexcept {
  constexpr double k = 0.7978845608028654;
  const double inner = k * (x + 0.044715 * x * x * x);
  const double t = std::tanh(inner);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * 0.044715 * x * x);
}

ForwardTape forward_tape(const ModelParams& params, std::span<const int> ids, bool train_mode,
                         std::uint64_t dropout_seed) {
  const auto& c = params.config;
  if (ids.size() > static_cast<std::size_t>(c.max_seq_len)) {
    throw Error(Errc::SequenceTooLong,
                std::to_string(ids.size()) + " tokens exceed max_seq_len " + std::to_string(c.max_seq_len));
  }
  if (ids.size() < 2 || ids.front() != tok::kCls || ids.back() != tok::kSep) {
    throw Error(Errc::InvariantViolation, "input must be framed by CLS ... SEP");
  }
  for (int id : ids) {
    if (id < 0 || id >= c.vocab_size) throw Error(Errc::UnknownTokenId, "token id " + std::to_string(id));
  }
  const bool drop = train_mode && c.dropout > 0.0;
  SplitMix64 rng(dropout_seed);
  const auto n = static_cast<Eigen::Index>(ids.size());
  const Eigen::Index d = c.hidden_dim;
  const Eigen::Index heads = c.num_heads;
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardTape tape;
  tape.ids.assign(ids.begin(), ids.end());
  tape.train_mode = train_mode;

  Matrix x(n, d);
  for (Eigen::Index t = 0; t < n; ++t) {
    x.row(t) = params.token_embedding.row(ids[static_cast<std::size_t>(t)]) + params.position_embedding.row(t);
  }
  auto ln0 = layer_norm(x, params.emb_ln_gain, params.emb_ln_bias);
  tape.emb_hat = std::move(ln0.hat);
  tape.emb_inv_std = std::move(ln0.inv_std);
  x = std::move(ln0.y);
  if (drop) {
    tape.emb_drop = dropout_mask(n, d, c.dropout, rng);
    x.array() *= tape.emb_drop.array();
  }

  tape.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& L = params.layers[l];
    auto& T = tape.layers[l];
    T.input = x;
    T.query = linear(x, L.w_query, L.b_query);
    T.key = linear_nobias(x, L.w_key);
    T.value = linear(x, L.w_value, L.b_value);
    T.context.resize(n, d);
    T.attn.resize(static_cast<std::size_t>(heads));
    if (drop) T.attn_drop.resize(static_cast<std::size_t>(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto hs = static_cast<std::size_t>(h);
      Matrix scores = T.query.middleCols(h * dh, dh) * T.key.middleCols(h * dh, dh).transpose() * scale;
      T.attn[hs] = softmax_rows(scores);
      if (drop) {
        T.attn_drop[hs] = dropout_mask(n, n, c.dropout, rng);
        T.context.middleCols(h * dh, dh) =
            (T.attn[hs].array() * T.attn_drop[hs].array()).matrix() * T.value.middleCols(h * dh, dh);
      } else {
        T.context.middleCols(h * dh, dh) = T.attn[hs] * T.value.middleCols(h * dh, dh);
      }
    }
    Matrix attn_out = linear(T.context, L.w_out, L.b_out);
    if (drop) {
      T.attn_out_drop = dropout_mask(n, d, c.dropout, rng);
      attn_out.array() *= T.attn_out_drop.array();
    }
    auto ln1 = layer_norm(x + attn_out, L.ln1_gain, L.ln1_bias);
    T.ln1_hat = std::move(ln1.hat);
    T.ln1_inv_std = std::move(ln1.inv_std);
    T.x1 = std::move(ln1.y);

    T.ffn_pre = linear(T.x1, L.w_ffn_in, L.b_ffn_in);
    T.ffn_act = T.ffn_pre.unaryExpr([](double v) { return gelu(v); });
    Matrix ffn_out = linear(T.ffn_act, L.w_ffn_out, L.b_ffn_out);
    if (drop) {
      T.ffn_out_drop = dropout_mask(n, d, c.dropout, rng);
      ffn_out.array() *= T.ffn_out_drop.array();
    }
    auto ln2 = layer_norm(T.x1 + ffn_out, L.ln2_gain, L.ln2_bias);
    T.ln2_hat = std::move(ln2.hat);
    T.ln2_inv_std = std::move(ln2.inv_std);
    x = std::move(ln2.y);
  }
  tape.output = std::move(x);
  return tape;
}

EncodedSequence forward(const ModelParams& params, std::span<const int> ids, bool train_mode,
                        std::uint64_t dropout_seed) {
  auto tape = forward_tape(params, ids, train_mode, dropout_seed);
  EncodedSequence out;
  out.cls_vector = tape.output.row(0).transpose();
  out.hidden_states = std::move(tape.output);
  return out;
}

void backward(const ModelParams& params, const ForwardTape& tape, const Matrix& d_hidden, ModelParams& grads) {
  const auto& c = params.config;
  const Eigen::Index d = c.hidden_dim;
  const Eigen::Index heads = c.num_heads;
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dx = d_hidden;
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& L = params.layers[li];
    auto& G = grads.layers[li];
    const auto& T = tape.layers[li];

    // Feed-forward block.
    Matrix dr2 = layer_norm_backward(dx, T.ln2_hat, T.ln2_inv_std, L.ln2_gain, G.ln2_gain, G.ln2_bias);
    Matrix dx1 = dr2;
    Matrix dffn_out = T.ffn_out_drop.size() ? Matrix(dr2.array() * T.ffn_out_drop.array()) : dr2;
    G.w_ffn_out.noalias() += dffn_out.transpose() * T.ffn_act;
    G.b_ffn_out += dffn_out.colwise().sum().transpose();
    Matrix dpre = dffn_out * L.w_ffn_out;
    dpre.array() *= T.ffn_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    G.w_ffn_in.noalias() += dpre.transpose() * T.x1;
    G.b_ffn_in += dpre.colwise().sum().transpose();
    dx1.noalias() += dpre * L.w_ffn_in;

    // Attention block.
    Matrix dr1 = layer_norm_backward(dx1, T.ln1_hat, T.ln1_inv_std, L.ln1_gain, G.ln1_gain, G.ln1_bias);
    dx = dr1;
    Matrix dattn_out = T.attn_out_drop.size() ? Matrix(dr1.array() * T.attn_out_drop.array()) : dr1;
    G.w_out.noalias() += dattn_out.transpose() * T.context;
    G.b_out += dattn_out.colwise().sum().transpose();
    const Matrix dcontext = dattn_out * L.w_out;

    Matrix dq(T.query.rows(), d), dk(T.key.rows(), d), dv(T.value.rows(), d);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto hs = static_cast<std::size_t>(h);
      const auto dctx_h = dcontext.middleCols(h * dh, dh);
      const bool dropped = !T.attn_drop.empty();
      Matrix used_attn = dropped ? Matrix(T.attn[hs].array() * T.attn_drop[hs].array()) : T.attn[hs];
      Matrix dattn = dctx_h * T.value.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = used_attn.transpose() * dctx_h;
      if (dropped) dattn.array() *= T.attn_drop[hs].array();
      const Matrix dscores = softmax_rows_backward(T.attn[hs], dattn) * scale;
      dq.middleCols(h * dh, dh) = dscores * T.key.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = dscores.transpose() * T.query.middleCols(h * dh, dh);
    }
    G.w_query.noalias() += dq.transpose() * T.input;
    G.b_query += dq.colwise().sum().transpose();
    G.w_key.noalias() += dk.transpose() * T.input;
    G.w_value.noalias() += dv.transpose() * T.input;
    G.b_value += dv.colwise().sum().transpose();
    dx.noalias() += dq * L.w_query;
    dx.noalias() += dk * L.w_key;
    dx.noalias() += dv * L.w_value;
  }

  if (tape.emb_drop.size()) dx.array() *= tape.emb_drop.array();
  const Matrix dx0 =
      layer_norm_backward(dx, tape.emb_hat, tape.emb_inv_std, params.emb_ln_gain, grads.emb_ln_gain, grads.emb_ln_bias);
  for (Eigen::Index t = 0; t < dx0.rows(); ++t) {
    grads.token_embedding.row(tape.ids[static_cast<std::size_t>(t)]) += dx0.row(t);
    grads.position_embedding.row(t) += dx0.row(t);
  }
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Vector softmax_backward(const Vector& p, const Vector& dp) { return p.array() * (dp.array() - dp.dot(p)); }

Matrix softmax_rows_backward(const Matrix& p, const Matrix& dp) {
  Matrix out(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double inner = dp.row(i).dot(p.row(i));
    out.row(i) = p.row(i).array() * (dp.row(i).array() - inner);
  }
  return out;
}

Vector token_logits(const ModelParams& params, const Vector& hidden_state) {
  return params.token_head_weight() * hidden_state + params.token_head_b;
}

Matrix token_logits(const ModelParams& params, const Matrix& hidden_rows) {
  return linear(hidden_rows, params.token_head_weight(), params.token_head_b);
}

Vector token_probs(const ModelParams& params, const Vector& hidden_state) {
  return softmax(token_logits(params, hidden_state));
}

Matrix token_head_backward(const ModelParams& params, const Matrix& hidden_rows, const Matrix& d_logits,
                           ModelParams& grads) {
  Matrix& gw = params.config.tie_embeddings ? grads.token_embedding : grads.token_head_w;
  gw.noalias() += d_logits.transpose() * hidden_rows;
  grads.token_head_b += d_logits.colwise().sum().transpose();
  return d_logits * params.token_head_weight();
}

Vector length_logits(const ModelParams& params, const Vector& cls_vector) {
  return params.length_head_w * cls_vector + params.length_head_b;
}

Vector length_head_backward(const ModelParams& params, const Vector& cls_vector, const Vector& d_logits,
                            ModelParams& grads) {
  grads.length_head_w.noalias() += d_logits * cls_vector.transpose();
  grads.length_head_b += d_logits;
  return params.length_head_w.transpose() * d_logits;
}

Vector pool_name_representation(const Matrix& hidden_states, std::span<const int> positions) {
  if (positions.empty()) throw Error(Errc::EmptyPositions, "no positions to pool");
  Vector mean = Vector::Zero(hidden_states.cols());
  for (int p : positions) {
    if (p < 0 || p >= hidden_states.rows()) throw Error(Errc::EmptyPositions, "position out of range");
    mean += hidden_states.row(p).transpose();
  }
  mean /= static_cast<double>(positions.size());
  const double norm = mean.norm();
  if (norm == 0.0) throw Error(Errc::ZeroVector, "pooled representation is zero");
  return mean / norm;
}

void pool_backward(const Matrix& hidden_states, std::span<const int> positions, const Vector& d_pooled,
                   Matrix& d_hidden) {
  Vector mean = Vector::Zero(hidden_states.cols());
  for (int p : positions) mean += hidden_states.row(p).transpose();
  mean /= static_cast<double>(positions.size());
  const double norm = mean.norm();
  const Vector unit = mean / norm;
  const Vector d_mean = (d_pooled - unit * unit.dot(d_pooled)) / norm;
  const Vector d_row = d_mean / static_cast<double>(positions.size());
  for (int p : positions) d_hidden.row(p) += d_row.transpose();
}

}  // namespace refbert::nn
