#include "refbert/losses.hpp"

#include <cmath>
#include <map>

#include "refbert/error.hpp"

namespace refbert::loss {
namespace {

double clamped_log(double p, LossDiagnostics* diag) {
  if (!(p >= kProbFloor)) {
    if (diag) ++diag->clamped;
    return std::log(kProbFloor);
  }
  return std::log(p);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + e^x) without overflow or cancellation.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

std::map<int, double> target_weights(std::span<const int> targets, const BotOptions& options) {
  std::map<int, double> w;
  for (int t : targets) w[t] = options.dedupe_targets ? 1.0 : w[t] + 1.0;
  return w;
}

}  // namespace

void MaskedPrediction::validate() const {
  if (probs.rows() < 1) throw Error(Errc::InvariantViolation, "no masked positions");
  if (static_cast<std::size_t>(probs.rows()) != targets.size()) {
    throw Error(Errc::InvariantViolation, "row count differs from target count");
  }
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-6 || (probs.row(i).array() < 0.0).any()) {
      throw Error(Errc::InvariantViolation, "row " + std::to_string(i) + " is not a distribution");
    }
  }
  for (int t : targets) {
    if (t < 0 || t >= probs.cols()) throw Error(Errc::InvariantViolation, "target outside vocabulary");
  }
}

double cmlm_loss(const MaskedPrediction& pred, LossDiagnostics* diag) {
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.targets.size(); ++i) {
    loss -= clamped_log(pred.probs(static_cast<Eigen::Index>(i), pred.targets[i]), diag);
  }
  return loss;
}

Matrix cmlm_loss_grad(const MaskedPrediction& pred) {
  Matrix g = Matrix::Zero(pred.probs.rows(), pred.probs.cols());
  for (std::size_t i = 0; i < pred.targets.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double p = pred.probs(r, pred.targets[i]);
    if (p >= kProbFloor) g(r, pred.targets[i]) -= 1.0 / p;
  }
  return g;
}

double lp_loss(const Vector& q, int true_len, LossDiagnostics* diag) {
  if (true_len < 1 || true_len > q.size()) {
    throw Error(Errc::LengthOutOfRange, "length " + std::to_string(true_len) + " outside 1.." + std::to_string(q.size()));
  }
  return -clamped_log(q(true_len - 1), diag);
}

Vector lp_loss_grad(const Vector& q, int true_len) {
  if (true_len < 1 || true_len > q.size()) {
    throw Error(Errc::LengthOutOfRange, "length " + std::to_string(true_len) + " outside 1.." + std::to_string(q.size()));
  }
  Vector g = Vector::Zero(q.size());
  if (q(true_len - 1) >= kProbFloor) g(true_len - 1) = -1.0 / q(true_len - 1);
  return g;
}

Vector bot_distribution(const MaskedPrediction& pred) {
  Vector z = Vector::Zero(pred.probs.cols());
  for (Eigen::Index i = 0; i < pred.probs.rows(); ++i) {
    z += pred.probs.row(i).transpose().unaryExpr([](double p) { return sigmoid(p); });
  }
  return z;
}

double bot_loss(const Vector& z, std::span<const int> targets, const BotOptions& options, LossDiagnostics* diag) {
  double loss = 0.0;
  for (const auto& [t, w] : target_weights(targets, options)) {
    if (t < 0 || t >= z.size()) throw Error(Errc::InvariantViolation, "target outside vocabulary");
    loss -= w * clamped_log(z(t), diag);
  }
  return loss;
}

Matrix bot_loss_grad(const MaskedPrediction& pred, const BotOptions& options) {
  const Vector z = bot_distribution(pred);
  Vector dz = Vector::Zero(z.size());
  for (const auto& [t, w] : target_weights(pred.targets, options)) {
    if (z(t) >= kProbFloor) dz(t) = -w / z(t);
  }
  Matrix g(pred.probs.rows(), pred.probs.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const double s = sigmoid(pred.probs(i, j));
      g(i, j) = dz(j) * s * (1.0 - s);
    }
  }
  return g;
}

double cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

double cl_loss(std::span<const NameTriple> triples, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::InvalidConfig, "tau must be positive");
  double loss = 0.0;
  for (const auto& t : triples) {
    const double pos = cosine(t.gen, t.after) / tau;
    const double neg = cosine(t.gen, t.before) / tau;
    // -log(e^pos / (e^pos + e^neg)) = log(1 + e^(neg - pos))
    loss += softplus(neg - pos);
  }
  return loss;
}

std::vector<NameTriple> cl_loss_grad(std::span<const NameTriple> triples, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::InvalidConfig, "tau must be positive");
  // d cos(a, b) / da = b / (|a||b|) - cos(a, b) a / |a|^2
  auto dcos = [](const Vector& a, const Vector& b, double c) -> Vector {
    return b / (a.norm() * b.norm()) - c * a / a.squaredNorm();
  };
  std::vector<NameTriple> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    const double cp = cosine(t.gen, t.after);
    const double cn = cosine(t.gen, t.before);
    // dL/d(neg - pos) = sigmoid(neg - pos)
    const double s = sigmoid((cn - cp) / tau) / tau;
    NameTriple g;
    g.gen = s * (dcos(t.gen, t.before, cn) - dcos(t.gen, t.after, cp));
    g.after = -s * dcos(t.after, t.gen, cp);
    g.before = s * dcos(t.before, t.gen, cn);
    out.push_back(std::move(g));
  }
  return out;
}

double fine_tune_loss(const MaskedPrediction& pred, std::span<const NameTriple> triples, const LossWeights& weights,
                      double tau, const BotOptions& bot) {
  double total = 0.0;
  if (weights.cmlm != 0.0) total += weights.cmlm * cmlm_loss(pred);
  if (weights.bot != 0.0) total += weights.bot * bot_loss(bot_distribution(pred), pred.targets, bot);
  if (weights.cl != 0.0) total += weights.cl * cl_loss(triples, tau);
  return total;
}

}  // namespace refbert::loss
