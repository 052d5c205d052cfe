#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "refbert/baseline.hpp"
#include "refbert/corpus.hpp"
#include "refbert/rng.hpp"
#include "refbert/train.hpp"
#include "test_util.hpp"

using namespace refbert;
using baseline::NgramModel;
using baseline::NgramOptions;
using corpus::RefactoringRecord;

namespace {

RefactoringRecord rename(const std::string& id, const std::string& tmpl, const std::string& after,
                         const std::string& before) {
  auto fill = [&](const std::string& name) {
    std::string out = tmpl;
    for (std::size_t p; (p = out.find('$')) != std::string::npos;) out.replace(p, 1, name);
    return out;
  };
  RefactoringRecord r;
  r.id = id;
  r.code_after = fill(after);
  r.code_before = fill(before);
  r.variable_after = after;
  r.variable_before = before;
  return r;
}

tok::SubwordVocab spelled(std::initializer_list<std::string> words) {
  tok::SubwordVocab v;
  for (const auto& w : words) {
    std::string acc(1, w[0]);
    for (std::size_t i = 1; i < w.size(); ++i) {
      v.add_merge(acc, std::string(1, w[i]));
      acc += w[i];
    }
  }
  return v;
}

}  // namespace

TEST(RankByAverageLogProb, HandComputedTables) {
  const int v = tok::kNumSpecials + 3;
  nn::Matrix one = nn::Matrix::Zero(1, v);
  one.row(0).tail(3) << 0.5, 0.3, 0.2;
  nn::Matrix two = nn::Matrix::Zero(2, v);
  two.row(0).tail(3) << 0.9, 0.05, 0.05;
  two.row(1).tail(3) << 0.4, 0.35, 0.25;
  two(1, tok::kMask) = 0.0;
  const std::vector<nn::Matrix> tables = {one, two};
  const auto ranked = baseline::rank_by_average_log_prob(tables);
  ASSERT_EQ(ranked.size(), 2u);
  // mean log max: g=1 -> ln 0.5; g=2 -> (ln 0.9 + ln 0.4) / 2
  EXPECT_EQ(ranked[0].first, 2);
  EXPECT_NEAR(ranked[0].second, (std::log(0.9) + std::log(0.4)) / 2, 1e-12);
  EXPECT_NEAR(ranked[1].second, std::log(0.5), 1e-12);
}

TEST(RankByAverageLogProb, SpecialsIgnored) {
  nn::Matrix p = nn::Matrix::Zero(1, tok::kNumSpecials + 2);
  p(0, tok::kMask) = 0.9;
  p(0, tok::kNumSpecials) = 0.1;
  const std::vector<nn::Matrix> tables = {p};
  EXPECT_NEAR(baseline::rank_by_average_log_prob(tables)[0].second, std::log(0.1), 1e-12);
}

TEST(HeuristicLp, UniformHeadTiesToShorterLengths) {
  const auto c = toy_corpus(6, 2, 320);
  train::TrainConfig cfg;
  cfg.num_layers = 1;
  cfg.hidden_dim = 8;
  cfg.num_heads = 2;
  cfg.ffn_dim = 8;
  cfg.max_seq_len = 256;
  auto model = nn::init_params(cfg.model_config(static_cast<int>(c.vocab.size())), 1);
  model.token_head_w.setZero();
  const auto ranked = baseline::heuristic_lp(model, c.vocab, c.records[0]);
  ASSERT_EQ(ranked.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(ranked[i].first, i + 1);
}

TEST(Ngram, SmoothedConditionalsSumToOne) {
  const auto c = toy_corpus(20, 3, 450);
  const auto model = baseline::train_ngram(c.records, c.vocab);
  int checked = 0;
  for (const auto& [ctx, row] : model.counts()) {
    double s = 0;
    for (std::size_t t = 0; t < c.vocab.size(); ++t) s += model.probability(ctx, static_cast<int>(t));
    EXPECT_NEAR(s, 1.0, 1e-9);
    if (++checked == 50) break;
  }
  const baseline::Context unseen = {tok::kPad, tok::kPad};
  double s = 0;
  for (std::size_t t = 0; t < c.vocab.size(); ++t) s += model.probability(unseen, static_cast<int>(t));
  EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(Ngram, BigramHandCounts) {
  tok::SubwordVocab v;
  NgramModel m({2, 0.01}, v.size());
  const auto stream = baseline::ngram_stream(v, "a b a b", 2);
  // CLS a b a b SEP
  ASSERT_EQ(stream.size(), 6u);
  m.add_sequence(stream);
  const int a = v.id("a"), b = v.id("b");
  EXPECT_EQ(m.mle(std::vector<int>{a}, b), 1.0);
  EXPECT_EQ(m.mle(std::vector<int>{b}, a), 0.5);
  const double denom = 2 + 0.01 * static_cast<double>(v.size());
  EXPECT_NEAR(m.probability(std::vector<int>{a}, a), 0.01 / denom, 1e-15);
  EXPECT_NEAR(m.probability(std::vector<int>{a}, b), 2.01 / denom, 1e-15);
}

TEST(Ngram, DeterministicAndPersistent) {
  const auto c = toy_corpus(15, 4, 450);
  const auto a = baseline::train_ngram(c.records, c.vocab);
  const auto b = baseline::train_ngram(c.records, c.vocab);
  EXPECT_TRUE(a == b);
  TempDir dir;
  a.save(dir.path() / "ngram.txt");
  const auto loaded = NgramModel::load(dir.path() / "ngram.txt");
  EXPECT_TRUE(loaded == a);
  EXPECT_EQ(loaded.order(), 3);
  EXPECT_EQ(loaded.smoothing(), 0.01);
}

TEST(Ngram, MemorizedFunctionRanksTruthFirst) {
  // Each name is one token so that length does not decide the ranking.
  const auto v = spelled({"sum", "text", "ok"});
  const std::vector<RefactoringRecord> train = {
      rename("a", "int $ = 0; for (int i = 0; i < n; i++) $ += i; return $;", "sum", "s"),
      rename("b", "String $ = name.trim(); return $.length();", "text", "t"),
      rename("c", "boolean $ = false; if (x > 0) $ = true; return $;", "ok", "b"),
  };
  const auto model = baseline::train_ngram(train, v, {2, 0.01});
  EXPECT_EQ(model.all_names(), (std::set<std::string>{"sum", "text", "ok"}));
  for (const auto& r : train) {
    const auto ranked = baseline::ngram_suggest(model, v, r.code_before, r.variable_before, 3);
    ASSERT_FALSE(ranked.empty());
    EXPECT_EQ(ranked[0].first, r.variable_after) << r.id;
  }
}

TEST(Ngram, ScoresAreSubstitutedLogProbabilities) {
  tok::SubwordVocab v;
  const std::vector<RefactoringRecord> train = {
      rename("a", "int $ = 1; return $;", "one", "x"),
      rename("b", "int $ = 2; return $ + $;", "two", "y"),
  };
  const auto model = baseline::train_ngram(train, v, {2, 0.5});
  const std::string code = "int q = 1; return q;";
  const auto ranked = baseline::ngram_suggest(model, v, code, "q", 5);
  ASSERT_EQ(ranked.size(), 2u);
  for (const auto& [name, score] : ranked) {
    std::string sub = code;
    for (std::size_t p; (p = sub.find(" q")) != std::string::npos;) sub.replace(p + 1, 1, name);
    const auto stream = baseline::ngram_stream(v, sub, 2);
    double expected = 0;
    for (std::size_t i = 1; i < stream.size(); ++i) expected += std::log(model.probability(std::vector<int>{stream[i - 1]}, stream[i]));
    EXPECT_NEAR(score, expected, 1e-9) << name;
  }
  EXPECT_GE(ranked[0].second, ranked[1].second);
}

TEST(Ngram, SuggestionsComeFromTraining) {
  const auto c = toy_corpus(40, 5, 450);
  const std::vector<RefactoringRecord> train(c.records.begin(), c.records.begin() + 30);
  const auto model = baseline::train_ngram(train, c.vocab);
  const auto known = model.all_names();
  for (std::size_t i = 30; i < c.records.size(); ++i) {
    const auto& r = c.records[i];
    const auto ranked = baseline::ngram_suggest(model, c.vocab, r.code_before, r.variable_before, 5);
    ASSERT_FALSE(ranked.empty());
    for (std::size_t k = 0; k < ranked.size(); ++k) {
      EXPECT_TRUE(known.count(ranked[k].first)) << ranked[k].first;
      EXPECT_TRUE(std::isfinite(ranked[k].second));
      if (k) EXPECT_GE(ranked[k - 1].second, ranked[k].second);
    }
    if (!known.count(r.variable_after)) EXPECT_NE(ranked[0].first, r.variable_after);
  }
}

TEST(Ngram, Errors) {
  tok::SubwordVocab v;
  EXPECT_THROW_CODE(baseline::train_ngram({}, v), Errc::EmptyCorpus);
  EXPECT_THROW_CODE(baseline::ngram_suggest(NgramModel({3, 0.01}, v.size()), v, "int a = 1;", "a"), Errc::NoCandidates);
  const auto model = baseline::train_ngram({rename("a", "int $ = 1; return $;", "one", "x")}, v);
  EXPECT_THROW_CODE(baseline::ngram_suggest(model, v, "int a = 1;", "zz"), Errc::VariableNotFound);
  EXPECT_THROW_CODE(NgramModel({1, 0.01}, 10), Errc::InvalidConfig);
  TempDir dir;
  EXPECT_THROW_CODE(NgramModel::load(dir.path() / "none.txt"), Errc::Io);
}
