#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "refbert/corpus.hpp"
#include "refbert/losses.hpp"
#include "refbert/masking.hpp"
#include "refbert/nn.hpp"
#include "refbert/tokenizer.hpp"

namespace refbert::train {

/// Everything a run needs: optimizer, objective, model shape, and the few
/// tokenizer/inference/baseline knobs, read from one `key = value` file.
struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 8;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 42;

  double lambda_cmlm = 1.0;
  double lambda_bot = 0.1;
  double lambda_cl = 1.0;
  double tau = 0.05;
  bool bot_dedupe = false;
  bool freeze_token_head_lp = true;
  bool freeze_length_head_tg = true;

  int l_max = 5;
  int max_seq_len = 512;
  double dropout = 0.1;
  int num_layers = 2;
  int hidden_dim = 128;
  int num_heads = 4;
  int ffn_dim = 512;
  bool tie_embeddings = false;

  int vocab_size = 4096;
  int bpe_min_frequency = 2;
  bool camel_split = false;

  std::string decode = "greedy";  // greedy | global | optimal
  int ngram_order = 3;
  double ngram_k = 0.01;

  /// Throws Error(InvalidConfig).
  void validate() const;
  std::map<std::string, std::string> to_kv() const;
  /// Unknown keys and unparsable values throw Error(InvalidConfig).
  void apply(const std::map<std::string, std::string>& kv);
  std::string to_text() const;

  nn::ModelConfig model_config(int actual_vocab_size) const;
  MaskOptions mask_options() const { return {l_max, max_seq_len}; }
};

/// Parses `key = value` lines; `#` starts a comment.
std::map<std::string, std::string> parse_kv_text(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

// ---- optimizer ----

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam step on a flat tensor. `step` is 1-based.
/// Throws Error(ShapeMismatch) when the spans differ in size.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 long step, const AdamOptions& options);

/// Adam over a whole model. Tensors listed as frozen keep their values.
class Adam {
 public:
  Adam(const nn::ModelParams& params, const AdamOptions& options);
  void step(nn::ModelParams& params, const nn::ModelParams& grads, const std::vector<bool>& trainable);
  long steps() const noexcept { return step_; }

 private:
  AdamOptions options_;
  nn::ModelParams m_, v_;
  long step_ = 0;
};

// ---- objective ----

/// Everything one record contributes to any stage.
struct TrainingInstance {
  std::string id;
  MaskedExample cmlm;
  MaskedExample num;
  NameSequence after;
  NameSequence before;
};

struct ExclusionStats {
  std::size_t name_too_long = 0;
  std::size_t truncated = 0;
  std::size_t not_found = 0;
  std::size_t total() const noexcept { return name_too_long + truncated + not_found; }
};

/// Masks every record; records that cannot be masked are skipped and counted.
std::vector<TrainingInstance> build_instances(const tok::SubwordVocab& vocab,
                                              const std::vector<corpus::RefactoringRecord>& records,
                                              const MaskOptions& options, ExclusionStats* stats = nullptr);

/// Per-term weights; a zero weight skips the term (and its forward passes).
struct Objective {
  double cmlm = 0.0;
  double bot = 0.0;
  double cl = 0.0;
  double num = 0.0;
  double tau = 0.05;
  bool bot_dedupe = false;
};

struct LossBreakdown {
  double total = 0.0;
  double cmlm = 0.0;
  double bot = 0.0;
  double cl = 0.0;
  double num = 0.0;
};

/// Loss of one instance. cMLM and BoT sum over every masked occurrence; CL
/// compares the pooled mask states with the name states of code_after and
/// code_before. When grads is non-null, d(total)/dparams is added to it.
LossBreakdown instance_loss(const nn::ModelParams& params, const TrainingInstance& instance, const Objective& objective,
                            bool train_mode, std::uint64_t dropout_seed, nn::ModelParams* grads);

// ---- stages ----

enum class Stage { Pretrain, FinetuneLp, FinetuneTg };
std::string_view to_string(Stage stage) noexcept;

Objective stage_objective(Stage stage, const TrainConfig& config);
/// Which tensors (in nn::tensors order) a stage updates.
std::vector<bool> trainable_mask(Stage stage, const TrainConfig& config, const nn::ModelParams& params);

struct EpochLog {
  int epoch = 0;
  long step = 0;
  LossBreakdown train;  // mean over the epoch's instances, train mode
  double validation = 0.0;  // mean eval-mode total; NaN without a validation set
};

struct TrainResult {
  std::vector<EpochLog> history;
  nn::ModelParams best;  // lowest validation loss, or the final state without validation
  int best_epoch = 0;
  bool early_stopped = false;
};

/// Runs one stage in place on `model`. With a non-empty out_dir, writes
/// `<stage>.last.rfbt` every epoch, `<stage>.best.rfbt`, and `<stage>.log.csv`.
/// Throws Error(NonFiniteLoss | NonFiniteGradient) with the offending step.
TrainResult run_stage(Stage stage, const TrainConfig& config, nn::ModelParams& model,
                      const std::vector<TrainingInstance>& train_set, const std::vector<TrainingInstance>& validation_set,
                      const std::filesystem::path& out_dir = {});

TrainResult pretrain(const TrainConfig& config, nn::ModelParams& model, const std::vector<TrainingInstance>& train_set,
                     const std::vector<TrainingInstance>& validation_set = {},
                     const std::filesystem::path& out_dir = {});
TrainResult finetune_lp(const TrainConfig& config, nn::ModelParams& model,
                        const std::vector<TrainingInstance>& train_set,
                        const std::vector<TrainingInstance>& validation_set = {},
                        const std::filesystem::path& out_dir = {});
TrainResult finetune_tg(const TrainConfig& config, nn::ModelParams& model,
                        const std::vector<TrainingInstance>& train_set,
                        const std::vector<TrainingInstance>& validation_set = {},
                        const std::filesystem::path& out_dir = {});

/// Mean eval-mode loss of a set under an objective.
LossBreakdown mean_loss(const nn::ModelParams& params, const std::vector<TrainingInstance>& instances,
                        const Objective& objective);

}  // namespace refbert::train
