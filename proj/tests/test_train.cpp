#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "refbert/corpus.hpp"
#include "refbert/masking.hpp"
#include "refbert/nn.hpp"
#include "refbert/train.hpp"
#include "test_util.hpp"

using namespace refbert;
using corpus::RefactoringRecord;
using train::MaskScheme;

namespace {

/// Adds the merges that spell `word` left to right.
void spell(tok::SubwordVocab& v, const std::string& word) {
  std::string acc(1, word[0]);
  for (std::size_t i = 1; i < word.size(); ++i) {
    v.add_merge(acc, std::string(1, word[i]));
    acc += word[i];
  }
}

tok::SubwordVocab camel_vocab() {
  tok::SubwordVocab v;
  v.set_camel_split(true);
  for (const char* w : {"user", "Count", "total", "int", "return"}) spell(v, w);
  return v;
}

RefactoringRecord make_record(const std::string& code_template, const std::string& after, const std::string& before) {
  auto fill = [&](const std::string& name) {
    std::string out = code_template;
    for (std::size_t p; (p = out.find('$')) != std::string::npos;) out.replace(p, 1, name);
    return out;
  };
  RefactoringRecord r;
  r.id = "r";
  r.code_after = fill(after);
  r.code_before = fill(before);
  r.variable_after = after;
  r.variable_before = before;
  return r;
}

const std::string kSnippet = "int $ = 0; $ += total; return $;";

long count_id(const std::vector<int>& ids, int id) { return std::count(ids.begin(), ids.end(), id); }

std::vector<int> encoded_with_specials(const tok::SubwordVocab& v, const std::string& code) {
  std::vector<int> ids = {tok::kCls};
  const auto body = v.encode(code);
  ids.insert(ids.end(), body.begin(), body.end());
  ids.push_back(tok::kSep);
  return ids;
}

train::TrainConfig tiny_config() {
  train::TrainConfig c;
  c.num_layers = 1;
  c.hidden_dim = 16;
  c.num_heads = 2;
  c.ffn_dim = 32;
  c.max_seq_len = 256;
  c.batch_size = 4;
  c.learning_rate = 3e-3;
  return c;
}

}  // namespace

TEST(CmlmMask, TwoSubTokensThreeOccurrences) {
  const auto v = camel_vocab();
  const auto r = make_record(kSnippet, "userCount", "x");
  const auto ex = train::apply_cmlm_mask(v, r);
  EXPECT_EQ(ex.scheme, MaskScheme::Cmlm);
  EXPECT_EQ(ex.length_label, 2);
  EXPECT_EQ(count_id(ex.input_ids, tok::kMask), 6);
  EXPECT_EQ(count_id(ex.input_ids, tok::kNum), 0);
  ASSERT_EQ(ex.mask_positions.size(), 3u);
  for (const auto& group : ex.mask_positions) {
    ASSERT_EQ(group.size(), 2u);
    EXPECT_EQ(group[1], group[0] + 1);
    for (int p : group) EXPECT_EQ(ex.input_ids[p], tok::kMask);
  }
  EXPECT_EQ(ex.target_ids, (std::vector<int>{v.id("user"), v.id("Count")}));
  EXPECT_EQ(train::restore_tokens(ex), encoded_with_specials(v, r.code_after));
}

TEST(CmlmMask, SingleTokenSingleOccurrence) {
  const auto v = camel_vocab();
  const auto r = make_record("return $;", "total", "t");
  const auto ex = train::apply_cmlm_mask(v, r);
  EXPECT_EQ(count_id(ex.input_ids, tok::kMask), 1);
  EXPECT_EQ(ex.length_label, 1);
}

TEST(NumMask, OneNumPerOccurrence) {
  const auto v = camel_vocab();
  const auto r = make_record(kSnippet, "userCount", "x");
  const auto num = train::apply_num_mask(v, r);
  const auto cm = train::apply_cmlm_mask(v, r);
  EXPECT_EQ(num.scheme, MaskScheme::Num);
  EXPECT_EQ(count_id(num.input_ids, tok::kNum), 3);
  EXPECT_EQ(count_id(num.input_ids, tok::kMask), 0);
  EXPECT_EQ(num.length_label, 2);
  EXPECT_EQ(cm.input_ids.size() - num.input_ids.size(), (2u - 1u) * 3u);
  EXPECT_EQ(train::restore_tokens(num), encoded_with_specials(v, r.code_after));
}

TEST(NumMask, InputDoesNotRevealLength) {
  const auto v = camel_vocab();
  const auto two = train::apply_num_mask(v, make_record(kSnippet, "userCount", "x"));
  const auto one = train::apply_num_mask(v, make_record(kSnippet, "user", "x"));
  EXPECT_EQ(two.input_ids, one.input_ids);
  EXPECT_NE(two.length_label, one.length_label);
}

TEST(Masking, Errors) {
  auto v = camel_vocab();
  auto r = make_record(kSnippet, "userCount", "x");
  train::MaskOptions opts;
  opts.l_max = 1;
  EXPECT_THROW_CODE(train::apply_cmlm_mask(v, r, opts), Errc::NameTooLong);
  EXPECT_THROW_CODE(train::apply_num_mask(v, r, opts), Errc::NameTooLong);

  // The name only occurs after the cut.
  const auto late = make_record("int a = 0; int b = 1; int c = 2; return $;", "total", "t");
  opts = {};
  opts.max_seq_len = 8;
  EXPECT_THROW_CODE(train::apply_cmlm_mask(v, late, opts), Errc::NameTruncated);

  EXPECT_THROW_CODE(train::mask_name(v, "int a;", "missing", MaskScheme::Cmlm, 1, 512), Errc::VariableNotFound);
}

TEST(Masking, TruncationDropsLaterOccurrences) {
  const auto v = camel_vocab();
  const auto r = make_record("int $ = 0; int a = 1; int b = 2; int c = 3; return $;", "total", "t");
  train::MaskOptions opts;
  opts.max_seq_len = 12;
  const auto ex = train::apply_cmlm_mask(v, r, opts);
  EXPECT_LE(ex.input_ids.size(), 12u);
  EXPECT_EQ(ex.mask_positions.size(), 1u);
  EXPECT_EQ(ex.input_ids.back(), tok::kSep);
}

TEST(Masking, NameSequencePositions) {
  const auto v = camel_vocab();
  const auto seq = train::name_sequence(v, "int userCount = 1; return userCount;", "userCount", 512);
  ASSERT_EQ(seq.positions.size(), 4u);
  EXPECT_EQ(v.token(seq.ids[seq.positions[0]]), "user");
  EXPECT_EQ(v.token(seq.ids[seq.positions[1]]), "Count");
  EXPECT_EQ(v.token(seq.ids[seq.positions[3]]), "Count");
}

TEST(Masking, ToyCorpusRoundTrip) {
  const auto c = toy_corpus(60, 3);
  train::ExclusionStats stats;
  const auto inst = train::build_instances(c.vocab, c.records, {}, &stats);
  EXPECT_EQ(inst.size() + stats.total(), c.records.size());
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto& ex = inst[i].cmlm;
    const auto& r = *std::find_if(c.records.begin(), c.records.end(), [&](const auto& x) { return x.id == inst[i].id; });
    EXPECT_EQ(train::restore_tokens(ex), encoded_with_specials(c.vocab, r.code_after)) << r.id;
    EXPECT_EQ(count_id(inst[i].num.input_ids, tok::kNum), static_cast<long>(ex.mask_positions.size()));
  }
}

TEST(Adam, HandComputedTwoSteps) {
  train::AdamOptions o;
  o.learning_rate = 0.1;
  std::vector<double> theta = {1.0}, m = {0.0}, v = {0.0};
  train::adam_update(theta, std::vector<double>{0.5}, m, v, 1, o);
  // m1 = 0.05, v1 = 0.00025, m_hat = 0.5, v_hat = 0.25
  const double t1 = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(theta[0], t1, 1e-12);
  train::adam_update(theta, std::vector<double>{-0.2}, m, v, 2, o);
  // m2 = 0.025, v2 = 0.00028975, corrections 0.19 and 0.001999
  const double t2 = t1 - 0.1 * (0.025 / 0.19) / (std::sqrt(0.00028975 / 0.001999) + 1e-8);
  EXPECT_NEAR(theta[0], t2, 1e-12);
  EXPECT_NEAR(m[0], 0.025, 1e-15);
  EXPECT_NEAR(v[0], 0.00028975, 1e-15);
}

TEST(Adam, ZeroGradientAndFirstStep) {
  train::AdamOptions o;
  std::vector<double> theta = {0.7}, m = {0.0}, v = {0.0};
  train::adam_update(theta, std::vector<double>{0.0}, m, v, 1, o);
  EXPECT_EQ(theta[0], 0.7);
  train::adam_update(theta, std::vector<double>{3.0}, m, v, 1, o);
  EXPECT_NEAR(theta[0], 0.7 - 1e-3, 1e-10);
  std::vector<double> g2(2);
  EXPECT_THROW_CODE(train::adam_update(theta, g2, m, v, 2, o), Errc::ShapeMismatch);
}

TEST(Adam, FrozenTensorsKeepValues) {
  nn::ModelConfig mc;
  mc.num_layers = 1;
  mc.hidden_dim = 8;
  mc.num_heads = 2;
  mc.ffn_dim = 8;
  mc.max_seq_len = 8;
  mc.vocab_size = 10;
  auto p = nn::init_params(mc, 1);
  const auto before = p;
  auto g = p.zeros_like();
  for (auto& t : nn::tensors(g))
    for (auto& x : t.data) x = 1.0;
  train::Adam adam(p, {});
  std::vector<bool> trainable(nn::tensors(p).size(), true);
  trainable[0] = false;
  adam.step(p, g, trainable);
  EXPECT_EQ(adam.steps(), 1);
  const auto tb = nn::tensors(before);
  const auto ta = nn::tensors(std::as_const(p));
  EXPECT_TRUE(std::equal(ta[0].data.begin(), ta[0].data.end(), tb[0].data.begin()));
  EXPECT_NE(ta[1].data[0], tb[1].data[0]);
}

TEST(TrainConfig, ParsesKeyValueText) {
  const auto kv = train::parse_kv_text("# comment\nlearning_rate = 0.01\n\n tau=0.25  # trailing\ncamel_split = true\n");
  train::TrainConfig c;
  c.apply(kv);
  EXPECT_EQ(c.learning_rate, 0.01);
  EXPECT_EQ(c.tau, 0.25);
  EXPECT_TRUE(c.camel_split);
  train::TrainConfig d;
  d.apply(train::parse_kv_text(c.to_text()));
  EXPECT_EQ(d.to_kv(), c.to_kv());
}

TEST(TrainConfig, RejectsBadValues) {
  train::TrainConfig c;
  EXPECT_THROW_CODE(c.apply({{"no_such_key", "1"}}), Errc::InvalidConfig);
  EXPECT_THROW_CODE(c.apply({{"tau", "abc"}}), Errc::InvalidConfig);
  c = {};
  c.tau = 0;
  EXPECT_THROW_CODE(c.validate(), Errc::InvalidConfig);
  c = {};
  c.lambda_bot = -1;
  EXPECT_THROW_CODE(c.validate(), Errc::InvalidConfig);
  c = {};
  c.learning_rate = 0;
  EXPECT_THROW_CODE(c.validate(), Errc::InvalidConfig);
  EXPECT_THROW_CODE(train::load_config("/nonexistent/config.txt"), Errc::Io);
}

TEST(Stages, ObjectivesAndFreezes) {
  train::TrainConfig c;
  c.lambda_bot = 5;
  c.lambda_cl = 7;
  const auto pre = train::stage_objective(train::Stage::Pretrain, c);
  EXPECT_EQ(pre.cmlm, 1.0);
  EXPECT_EQ(pre.bot, 0.0);
  EXPECT_EQ(pre.cl, 0.0);
  EXPECT_EQ(pre.num, 0.0);
  const auto lp = train::stage_objective(train::Stage::FinetuneLp, c);
  EXPECT_EQ(lp.num, 1.0);
  EXPECT_EQ(lp.cmlm, 0.0);
  const auto tg = train::stage_objective(train::Stage::FinetuneTg, c);
  EXPECT_EQ(tg.cmlm, c.lambda_cmlm);
  EXPECT_EQ(tg.bot, 5.0);
  EXPECT_EQ(tg.cl, 7.0);

  const auto p = nn::init_params(c.model_config(300), 1);
  const auto names = nn::tensors(p);
  const auto lp_mask = train::trainable_mask(train::Stage::FinetuneLp, c, p);
  const auto tg_mask = train::trainable_mask(train::Stage::FinetuneTg, c, p);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const bool token_head = names[i].name.starts_with("token_head.");
    const bool length_head = names[i].name.starts_with("length_head.");
    EXPECT_EQ(lp_mask[i], !token_head) << names[i].name;
    EXPECT_EQ(tg_mask[i], !length_head) << names[i].name;
  }
}

TEST(RunStage, DeterministicWithLogsAndCheckpoints) {
  const auto c = toy_corpus(12, 5, 400);
  const auto inst = train::build_instances(c.vocab, c.records, {});
  ASSERT_GE(inst.size(), 8u);
  auto cfg = tiny_config();
  cfg.max_epochs = 2;
  TempDir dir;
  auto a = nn::init_params(cfg.model_config(static_cast<int>(c.vocab.size())), cfg.seed);
  auto b = a;
  const auto ra = train::pretrain(cfg, a, inst, {}, dir.path());
  const auto rb = train::pretrain(cfg, b, inst);
  ASSERT_EQ(ra.history.size(), 2u);
  for (std::size_t e = 0; e < 2; ++e) EXPECT_EQ(ra.history[e].train.total, rb.history[e].train.total);
  const auto ta = nn::tensors(std::as_const(a));
  const auto tb = nn::tensors(std::as_const(b));
  for (std::size_t i = 0; i < ta.size(); ++i)
    EXPECT_TRUE(std::equal(ta[i].data.begin(), ta[i].data.end(), tb[i].data.begin())) << ta[i].name;

  EXPECT_TRUE(std::filesystem::exists(dir.path() / "pretrain.last.rfbt"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "pretrain.best.rfbt"));
  std::ifstream log(dir.path() / "pretrain.log.csv");
  std::string header;
  std::getline(log, header);
  EXPECT_EQ(header, "epoch,step,loss,cmlm,bot,cl,num,validation");
  int lines = 0;
  for (std::string l; std::getline(log, l);) ++lines;
  EXPECT_EQ(lines, 2);
}

TEST(RunStage, NoOutputDirWritesNothing) {
  const auto c = toy_corpus(6, 5, 350);
  const auto inst = train::build_instances(c.vocab, c.records, {});
  auto cfg = tiny_config();
  cfg.max_epochs = 1;
  TempDir dir;
  const auto cwd = std::filesystem::current_path();
  std::filesystem::current_path(dir.path());
  auto p = nn::init_params(cfg.model_config(static_cast<int>(c.vocab.size())), 1);
  train::pretrain(cfg, p, inst);
  std::filesystem::current_path(cwd);
  EXPECT_TRUE(std::filesystem::is_empty(dir.path()));
}

TEST(RunStage, FrozenHeadsStayFixed) {
  const auto c = toy_corpus(8, 6, 350);
  const auto inst = train::build_instances(c.vocab, c.records, {});
  auto cfg = tiny_config();
  cfg.max_epochs = 1;
  auto p = nn::init_params(cfg.model_config(static_cast<int>(c.vocab.size())), 2);
  const auto start = p;
  train::finetune_lp(cfg, p, inst);
  EXPECT_EQ(p.token_head_w, start.token_head_w);
  EXPECT_NE(p.length_head_w, start.length_head_w);
  const auto mid = p;
  train::finetune_tg(cfg, p, inst);
  EXPECT_EQ(p.length_head_w, mid.length_head_w);
  EXPECT_NE(p.token_head_w, mid.token_head_w);
}

TEST(RunStage, TgLossDecreasesOverFirstEpochs) {
  const auto c = toy_corpus(16, 8, 400);
  const auto inst = train::build_instances(c.vocab, c.records, {});
  auto cfg = tiny_config();
  cfg.max_epochs = 10;
  auto p = nn::init_params(cfg.model_config(static_cast<int>(c.vocab.size())), cfg.seed);
  const auto r = train::finetune_tg(cfg, p, inst);
  ASSERT_EQ(r.history.size(), 10u);
  for (std::size_t e = 1; e < r.history.size(); ++e) {
    EXPECT_LT(r.history[e].train.total, r.history[e - 1].train.total) << "epoch " << e + 1;
  }
}

TEST(RunStage, EarlyStoppingOnValidation) {
  const auto c = toy_corpus(10, 9, 350);
  const auto inst = train::build_instances(c.vocab, c.records, {});
  auto cfg = tiny_config();
  cfg.max_epochs = 50;
  cfg.patience = 1;
  cfg.learning_rate = 0.5;  // large steps make validation loss rise quickly
  auto p = nn::init_params(cfg.model_config(static_cast<int>(c.vocab.size())), 3);
  const std::vector<train::TrainingInstance> train_set(inst.begin(), inst.begin() + 5);
  const std::vector<train::TrainingInstance> val_set(inst.begin() + 5, inst.end());
  const auto r = train::pretrain(cfg, p, train_set, val_set);
  EXPECT_TRUE(r.early_stopped);
  EXPECT_LT(r.history.size(), 50u);
  double best = INFINITY;
  for (const auto& e : r.history) best = std::min(best, e.validation);
  EXPECT_EQ(r.history[r.best_epoch - 1].validation, best);
}

TEST(InstanceLoss, AblationWeightsDropTerms) {
  const auto c = toy_corpus(6, 10, 350);
  const auto inst = train::build_instances(c.vocab, c.records, {});
  auto cfg = tiny_config();
  const auto p = nn::init_params(cfg.model_config(static_cast<int>(c.vocab.size())), 4);
  const auto full = train::instance_loss(p, inst[0], {1, 0.1, 1, 0, 0.05, false}, false, 0, nullptr);
  const auto cm_only = train::instance_loss(p, inst[0], {1, 0, 0, 0, 0.05, false}, false, 0, nullptr);
  EXPECT_NEAR(full.total, full.cmlm + 0.1 * full.bot + full.cl, 1e-12);
  EXPECT_EQ(cm_only.total, full.cmlm);
  const auto none = train::instance_loss(p, inst[0], {0, 0, 0, 0, 0.05, false}, false, 0, nullptr);
  EXPECT_EQ(none.total, 0.0);
}
