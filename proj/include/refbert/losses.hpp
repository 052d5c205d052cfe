#pragma once

#include <span>
#include <vector>

#include "refbert/nn.hpp"

namespace refbert::loss {

using nn::Matrix;
using nn::Vector;

/// Probabilities below this are clamped before taking logs.
inline constexpr double kProbFloor = 1e-12;

/// Per-slot token distributions for the masked positions of one example,
/// and the ground-truth token at each slot.
struct MaskedPrediction {
  Matrix probs;  // g x |V|, rows sum to one
  std::vector<int> targets;

  /// Throws Error(InvariantViolation) when rows are not distributions,
  /// targets fall outside the vocabulary, or the sizes disagree.
  void validate() const;
};

/// Unit-norm representations of the generated name and the names after and
/// before refactoring.
struct NameTriple {
  Vector gen;
  Vector after;
  Vector before;
};

/// Counts how often a probability had to be clamped.
struct LossDiagnostics {
  int clamped = 0;
};

struct BotOptions {
  bool dedupe_targets = false;  // count a repeated target token once
};

/// -sum_i log p[i, y_i]
double cmlm_loss(const MaskedPrediction& pred, LossDiagnostics* diag = nullptr);
/// dL/dprobs
Matrix cmlm_loss_grad(const MaskedPrediction& pred);

/// -log q[true_len - 1]; true_len is 1-based. Throws Error(LengthOutOfRange).
double lp_loss(const Vector& q, int true_len, LossDiagnostics* diag = nullptr);
Vector lp_loss_grad(const Vector& q, int true_len);

/// z = sum_i sigmoid(p_i), element-wise over the vocabulary.
Vector bot_distribution(const MaskedPrediction& pred);
/// -sum_i log z[y_i]. May be negative: entries of z exceed one once g >= 2.
double bot_loss(const Vector& z, std::span<const int> targets, const BotOptions& options = {},
                LossDiagnostics* diag = nullptr);
/// dL/dprobs of bot_loss(bot_distribution(pred), pred.targets).
Matrix bot_loss_grad(const MaskedPrediction& pred, const BotOptions& options = {});

double cosine(const Vector& a, const Vector& b);

/// Two-way instance discrimination: the generated name against the after
/// name (positive) and the before name (negative), summed over triples.
double cl_loss(std::span<const NameTriple> triples, double tau);
/// Gradient for each triple's three vectors.
std::vector<NameTriple> cl_loss_grad(std::span<const NameTriple> triples, double tau);

struct LossWeights {
  double cmlm = 1.0;
  double bot = 0.1;
  double cl = 1.0;
};

/// lambda_cMLM * L_cMLM + lambda_BoT * L_BoT + lambda_CL * L_CL
double fine_tune_loss(const MaskedPrediction& pred, std::span<const NameTriple> triples, const LossWeights& weights,
                      double tau, const BotOptions& bot = {});

}  // namespace refbert::loss
