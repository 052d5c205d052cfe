#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace refbert::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct ModelConfig {
  int num_layers = 2;
  int hidden_dim = 128;
  int num_heads = 4;
  int ffn_dim = 512;
  int max_seq_len = 512;
  int vocab_size = 4096;
  int l_max = 5;
  double dropout = 0.1;
  bool tie_embeddings = false;

  /// Throws Error(InvalidConfig).
  void validate() const;

  std::map<std::string, std::string> to_kv() const;
  /// Reads the keys it knows and ignores the rest.
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Linear maps follow the y = W x + b convention with W stored out x in;
// activations are row vectors, so a layer computes X * W^T + b.
struct LayerParams {
  Matrix w_query, w_key, w_value, w_out;  // d x d
  Vector b_query, b_value, b_out;         // the key bias is omitted: softmax is invariant to it
  Vector ln1_gain, ln1_bias;
  Matrix w_ffn_in;  // ffn x d
  Vector b_ffn_in;
  Matrix w_ffn_out;  // d x ffn
  Vector b_ffn_out;
  Vector ln2_gain, ln2_bias;
};

struct ModelParams {
  ModelConfig config;
  Matrix token_embedding;     // |V| x d
  Matrix position_embedding;  // max_seq_len x d
  Vector emb_ln_gain, emb_ln_bias;
  std::vector<LayerParams> layers;
  Matrix token_head_w;  // |V| x d; empty when embeddings are tied
  Vector token_head_b;  // |V|
  Matrix length_head_w;  // l_max x d
  Vector length_head_b;  // l_max

  /// Same shapes, all zeros.
  ModelParams zeros_like() const;
  bool all_finite() const;
  const Matrix& token_head_weight() const { return config.tie_embeddings ? token_embedding : token_head_w; }
};

/// A named, flat, mutable view of one parameter tensor.
struct TensorView {
  std::string name;
  std::span<double> data;
  std::vector<std::uint32_t> dims;
  bool is_bias;  // biases and layer-norm offsets; zero at init
};

struct ConstTensorView {
  std::string name;
  std::span<const double> data;
  std::vector<std::uint32_t> dims;
  bool is_bias;
};

/// Every tensor in a fixed order (the checkpoint order).
std::vector<TensorView> tensors(ModelParams& params);
std::vector<ConstTensorView> tensors(const ModelParams& params);

/// Allocates tensors for `config` (zeros; gains one).
ModelParams allocate_params(const ModelConfig& config);
/// Weights ~ N(0, 0.02) from a seeded generator, biases zero, gains one.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

struct EncodedSequence {
  Matrix hidden_states;  // seq_len x d
  Vector cls_vector;     // row 0
};

/// Intermediate values of one forward pass, kept for backward().
struct LayerTape {
  Matrix input;
  Matrix query, key, value;
  std::vector<Matrix> attn;       // per head, post-softmax
  std::vector<Matrix> attn_drop;  // per head dropout scale (empty in eval mode)
  Matrix context;
  Matrix attn_out_drop;
  Matrix ln1_hat;
  Vector ln1_inv_std;
  Matrix x1;
  Matrix ffn_pre;
  Matrix ffn_act;
  Matrix ffn_out_drop;
  Matrix ln2_hat;
  Vector ln2_inv_std;
};

struct ForwardTape {
  std::vector<int> ids;
  bool train_mode = false;
  Matrix emb_hat;
  Vector emb_inv_std;
  Matrix emb_drop;
  std::vector<LayerTape> layers;
  Matrix output;
};

/// Bidirectional encoder pass. ids must start with CLS and end with SEP.
/// Dropout is active only in train mode and is driven by dropout_seed.
/// Throws Error(SequenceTooLong | UnknownTokenId).
ForwardTape forward_tape(const ModelParams& params, std::span<const int> ids, bool train_mode,
                         std::uint64_t dropout_seed);
EncodedSequence forward(const ModelParams& params, std::span<const int> ids, bool train_mode = false,
                        std::uint64_t dropout_seed = 0);

/// Accumulates dLoss/dParams into grads given dLoss/dHidden (seq_len x d).
void backward(const ModelParams& params, const ForwardTape& tape, const Matrix& d_hidden, ModelParams& grads);

Vector softmax(const Vector& logits);
/// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);
/// Given probabilities p = softmax(z) and dL/dp, returns dL/dz.
Vector softmax_backward(const Vector& probs, const Vector& d_probs);
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& d_probs);

Vector token_logits(const ModelParams& params, const Vector& hidden_state);
/// One row of logits per row of hidden states.
Matrix token_logits(const ModelParams& params, const Matrix& hidden_rows);
Vector token_probs(const ModelParams& params, const Vector& hidden_state);
/// Accumulates head gradients; returns dL/dHidden rows.
Matrix token_head_backward(const ModelParams& params, const Matrix& hidden_rows, const Matrix& d_logits,
                           ModelParams& grads);

Vector length_logits(const ModelParams& params, const Vector& cls_vector);
Vector length_head_backward(const ModelParams& params, const Vector& cls_vector, const Vector& d_logits,
                            ModelParams& grads);

/// Mean of the selected rows scaled to unit L2 norm.
/// Throws Error(EmptyPositions | ZeroVector).
Vector pool_name_representation(const Matrix& hidden_states, std::span<const int> positions);
/// Adds dL/dHidden contributions of the pooled vector into d_hidden.
void pool_backward(const Matrix& hidden_states, std::span<const int> positions, const Vector& d_pooled,
                   Matrix& d_hidden);

double gelu(double x) noexcept;
double gelu_grad(double x) noexcept;

/// Checkpoint: "RFBT", version, config text, then float32 tensors.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace refbert::nn
