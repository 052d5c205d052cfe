#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "refbert/gradcheck.hpp"
#include "refbert/nn.hpp"
#include "refbert/rng.hpp"
#include "refbert/synthetic.hpp"
#include "refbert/tokenizer.hpp"
#include "test_util.hpp"

using namespace refbert;
using nn::Matrix;
using nn::ModelConfig;
using nn::Vector;

namespace {

ModelConfig toy_config() {
  ModelConfig c;
  c.num_layers = 2;
  c.hidden_dim = 16;
  c.num_heads = 2;
  c.ffn_dim = 32;
  c.max_seq_len = 24;
  c.vocab_size = 40;
  c.dropout = 0.1;
  return c;
}

std::vector<int> random_ids(SplitMix64& rng, int len, int vocab) {
  std::vector<int> ids(len);
  ids.front() = tok::kCls;
  ids.back() = tok::kSep;
  for (int i = 1; i + 1 < len; ++i) ids[i] = tok::kNumSpecials + static_cast<int>(rng.below(vocab - tok::kNumSpecials));
  return ids;
}

}  // namespace

TEST(InitParams, SameSeedIsBitIdentical) {
  const auto a = nn::init_params(toy_config(), 5);
  const auto b = nn::init_params(toy_config(), 5);
  const auto ta = nn::tensors(a);
  const auto tb = nn::tensors(b);
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    ASSERT_EQ(ta[i].data.size(), tb[i].data.size());
    EXPECT_TRUE(std::equal(ta[i].data.begin(), ta[i].data.end(), tb[i].data.begin())) << ta[i].name;
  }
}

TEST(InitParams, WeightStatistics) {
  ModelConfig c;
  c.vocab_size = 1000;
  c.num_layers = 1;
  const auto p = nn::init_params(c, 17);
  const auto& w = p.token_embedding;
  ASSERT_GE(w.size(), 100000);
  double sum = 0, sq = 0;
  for (Eigen::Index i = 0; i < 100000; ++i) sum += w.data()[i];
  const double mean = sum / 1e5;
  for (Eigen::Index i = 0; i < 100000; ++i) sq += (w.data()[i] - mean) * (w.data()[i] - mean);
  const double sd = std::sqrt(sq / (1e5 - 1));
  EXPECT_GT(mean, -0.002);
  EXPECT_LT(mean, 0.002);
  EXPECT_GT(sd, 0.018);
  EXPECT_LT(sd, 0.022);
}

TEST(InitParams, BiasesZeroGainsOne) {
  const auto p = nn::init_params(toy_config(), 3);
  for (const auto& t : nn::tensors(p)) {
    if (t.is_bias) {
      for (double v : t.data) EXPECT_EQ(v, 0.0) << t.name;
    }
  }
  EXPECT_TRUE((p.emb_ln_gain.array() == 1.0).all());
  EXPECT_TRUE((p.layers[0].ln1_gain.array() == 1.0).all());
}

TEST(InitParams, RejectsInvalidConfig) {
  auto c = toy_config();
  c.num_heads = 3;
  EXPECT_THROW_CODE(nn::init_params(c, 1), Errc::InvalidConfig);
  c = toy_config();
  c.max_seq_len = 2;
  EXPECT_THROW_CODE(nn::init_params(c, 1), Errc::InvalidConfig);
  c = toy_config();
  c.l_max = 0;
  EXPECT_THROW_CODE(nn::init_params(c, 1), Errc::InvalidConfig);
}

TEST(Forward, EvalModeIsDeterministic) {
  const auto p = synthetic::random_params(toy_config(), 2, 0.2);
  SplitMix64 rng(1);
  const auto ids = random_ids(rng, 10, 40);
  const auto a = nn::forward(p, ids, false, 1);
  const auto b = nn::forward(p, ids, false, 99);
  EXPECT_EQ(a.hidden_states, b.hidden_states);
  EXPECT_EQ(a.hidden_states.rows(), 10);
  EXPECT_EQ(a.cls_vector, Vector(a.hidden_states.row(0).transpose()));
}

TEST(Forward, DropoutOnlyInTrainMode) {
  const auto p = synthetic::random_params(toy_config(), 2, 0.2);
  SplitMix64 rng(1);
  const auto ids = random_ids(rng, 10, 40);
  const auto eval = nn::forward(p, ids, false, 1);
  const auto t1 = nn::forward(p, ids, true, 1);
  const auto t1b = nn::forward(p, ids, true, 1);
  const auto t2 = nn::forward(p, ids, true, 2);
  EXPECT_EQ(t1.hidden_states, t1b.hidden_states);
  EXPECT_NE(t1.hidden_states, t2.hidden_states);
  EXPECT_NE(t1.hidden_states, eval.hidden_states);
}

TEST(Forward, SwappedTokensSwapOutputsWithoutPositions) {
  auto p = synthetic::random_params(toy_config(), 4, 0.2);
  p.position_embedding.setZero();
  std::vector<int> ids = {tok::kCls, 10, 11, 12, 13, tok::kSep};
  auto swapped = ids;
  std::swap(swapped[1], swapped[3]);
  const auto a = nn::forward(p, ids).hidden_states;
  const auto b = nn::forward(p, swapped).hidden_states;
  EXPECT_LT((a.row(1) - b.row(3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.row(3) - b.row(1)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.row(2) - b.row(2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, FiniteAtMaxLength) {
  const auto c = toy_config();
  const auto p = synthetic::random_params(c, 6, 0.5);
  SplitMix64 rng(3);
  const auto out = nn::forward(p, random_ids(rng, c.max_seq_len, c.vocab_size), true, 4);
  EXPECT_TRUE(out.hidden_states.allFinite());
}

TEST(Forward, Errors) {
  const auto c = toy_config();
  const auto p = nn::init_params(c, 1);
  SplitMix64 rng(3);
  EXPECT_THROW_CODE(nn::forward(p, random_ids(rng, c.max_seq_len + 1, c.vocab_size)), Errc::SequenceTooLong);
  const std::vector<int> bad = {tok::kCls, c.vocab_size, tok::kSep};
  EXPECT_THROW_CODE(nn::forward(p, bad), Errc::UnknownTokenId);
}

TEST(Heads, TokenProbsAreDistributions) {
  const auto p = synthetic::random_params(toy_config(), 8, 0.5);
  SplitMix64 rng(9);
  for (int t = 0; t < 20; ++t) {
    Vector h(16);
    for (auto& v : h) v = rng.normal() * 3;
    const Vector probs = nn::token_probs(p, h);
    EXPECT_NEAR(probs.sum(), 1.0, 1e-6);
    EXPECT_GT(probs.minCoeff(), 0.0);
    EXPECT_LT(probs.maxCoeff(), 1.0);
  }
}

TEST(Heads, SoftmaxShiftInvariance) {
  Vector z(5);
  z << 0.3, -1.2, 2.0, 0.0, 0.7;
  const Vector a = nn::softmax(z);
  const Vector b = nn::softmax((z.array() + 123.0).matrix());
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
  Eigen::Index ia, ib;
  a.maxCoeff(&ia);
  b.maxCoeff(&ib);
  EXPECT_EQ(ia, ib);
}

TEST(Heads, ZeroWeightsGiveUniform) {
  auto p = nn::init_params(toy_config(), 1);
  p.token_head_w.setZero();
  p.length_head_w.setZero();
  const Vector h = Vector::Zero(16);
  const Vector probs = nn::token_probs(p, h);
  for (double v : probs) EXPECT_NEAR(v, 1.0 / 40, 1e-15);
  const Vector q = nn::softmax(nn::length_logits(p, Vector::Random(16)));
  ASSERT_EQ(q.size(), 5);
  for (double v : q) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(Pool, SinglePositionIsNormalizedRow) {
  Matrix h(3, 2);
  h << 1, 1, 3, 4, 0, 2;
  const Vector v = nn::pool_name_representation(h, std::vector<int>{1});
  EXPECT_NEAR(v(0), 0.6, 1e-15);
  EXPECT_NEAR(v(1), 0.8, 1e-15);
}

TEST(Pool, DuplicateRowsMatchSingle) {
  Matrix h(3, 3);
  h << 1, 2, 3, 1, 2, 3, -1, 0, 5;
  const Vector a = nn::pool_name_representation(h, std::vector<int>{0});
  const Vector b = nn::pool_name_representation(h, std::vector<int>{0, 1});
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Pool, UnitNormAndErrors) {
  SplitMix64 rng(2);
  Matrix h(6, 8);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
  EXPECT_NEAR(nn::pool_name_representation(h, std::vector<int>{0, 2, 5}).norm(), 1.0, 1e-6);
  EXPECT_THROW_CODE(nn::pool_name_representation(h, std::vector<int>{}), Errc::EmptyPositions);
  Matrix z(2, 2);
  z << 1, -2, -1, 2;
  EXPECT_THROW_CODE(nn::pool_name_representation(z, std::vector<int>{0, 1}), Errc::ZeroVector);
}

TEST(Pool, BackwardMatchesFiniteDifferences) {
  SplitMix64 rng(5);
  std::vector<double> x(4 * 3);
  for (auto& v : x) v = rng.normal();
  Vector w(3);
  w << 0.4, -1.1, 0.7;
  const std::vector<int> pos = {1, 3};
  const nn::VectorLoss f = [&](std::span<const double> xs, std::span<double> g) {
    Matrix h = Eigen::Map<const Matrix>(xs.data(), 4, 3);
    const Vector v = nn::pool_name_representation(h, pos);
    if (!g.empty()) {
      Matrix dh = Matrix::Zero(4, 3);
      nn::pool_backward(h, pos, w, dh);
      std::copy(dh.data(), dh.data() + dh.size(), g.begin());
    }
    return w.dot(v);
  };
  EXPECT_LT(nn::gradient_check(f, x).max_rel_error, 1e-7);
}

TEST(GradientCheck, QuadraticProbe) {
  SplitMix64 rng(11);
  // Coordinates away from zero keep the relative error meaningful.
  std::vector<double> x(300);
  for (auto& v : x) v = (rng.uniform() < 0.5 ? -1 : 1) * (0.5 + rng.uniform());
  const nn::VectorLoss f = [](std::span<const double> xs, std::span<double> g) {
    double s = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      s += 0.5 * xs[i] * xs[i];
      if (!g.empty()) g[i] = xs[i];
    }
    return s;
  };
  const auto r = nn::gradient_check(f, x);
  EXPECT_LT(r.max_rel_error, 1e-7);
  EXPECT_EQ(r.coordinates_checked, 200u);
}

TEST(GradientCheck, DetectsWrongGradient) {
  const nn::VectorLoss f = [](std::span<const double> xs, std::span<double> g) {
    if (!g.empty()) g[0] = 3 * xs[0];
    return xs[0] * xs[0];
  };
  EXPECT_GT(nn::gradient_check(f, std::vector<double>{1.5}).max_rel_error, 0.3);
}

TEST(GradientCheck, RejectsBadEpsilonAndNonFinite) {
  const nn::VectorLoss f = [](std::span<const double> xs, std::span<double> g) {
    if (!g.empty()) g[0] = std::nan("");
    return xs[0];
  };
  nn::GradCheckOptions opts;
  EXPECT_THROW_CODE(nn::gradient_check(f, std::vector<double>{1.0}, opts), Errc::NonFiniteGradient);
  opts.epsilon = 1e-2;
  EXPECT_THROW_CODE(nn::gradient_check(f, std::vector<double>{1.0}, opts), Errc::InvalidConfig);
}

TEST(Gelu, TanhApproximation) {
  EXPECT_EQ(nn::gelu(0.0), 0.0);
  // Exact GELU(1) = 0.8413447...; the tanh form differs by < 1e-3.
  EXPECT_NEAR(nn::gelu(1.0), 0.8413447460685429, 1e-3);
  const double h = 1e-6;
  for (double x : {-2.0, -0.3, 0.5, 1.7}) {
    EXPECT_NEAR(nn::gelu_grad(x), (nn::gelu(x + h) - nn::gelu(x - h)) / (2 * h), 1e-8);
  }
}

TEST(Checkpoint, RoundTripAtFloatPrecision) {
  TempDir dir;
  const auto p = synthetic::random_params(toy_config(), 12, 0.3);
  nn::save_checkpoint(dir.path() / "m.rfbt", p);
  const auto q = nn::load_checkpoint(dir.path() / "m.rfbt");
  EXPECT_EQ(q.config, p.config);
  const auto tp = nn::tensors(p);
  const auto tq = nn::tensors(q);
  ASSERT_EQ(tp.size(), tq.size());
  for (std::size_t i = 0; i < tp.size(); ++i) {
    EXPECT_EQ(tp[i].name, tq[i].name);
    EXPECT_EQ(tp[i].dims, tq[i].dims);
    for (std::size_t j = 0; j < tp[i].data.size(); ++j) {
      EXPECT_EQ(tq[i].data[j], static_cast<double>(static_cast<float>(tp[i].data[j])));
    }
  }
}

TEST(Checkpoint, HeaderLayout) {
  TempDir dir;
  nn::save_checkpoint(dir.path() / "m.rfbt", nn::init_params(toy_config(), 1));
  std::ifstream in(dir.path() / "m.rfbt", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "RFBT");
}

TEST(Checkpoint, RejectsCorruptFiles) {
  TempDir dir;
  const auto path = dir.path() / "m.rfbt";
  nn::save_checkpoint(path, nn::init_params(toy_config(), 1));
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  EXPECT_THROW_CODE(nn::load_checkpoint(path), Errc::BadCheckpoint);
  nn::save_checkpoint(path, nn::init_params(toy_config(), 1));
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 10);
  EXPECT_THROW_CODE(nn::load_checkpoint(path), Errc::BadCheckpoint);
  EXPECT_THROW_CODE(nn::load_checkpoint(dir.path() / "missing.rfbt"), Errc::Io);
}
