#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "refbert/cli.hpp"
#include "refbert/synthetic.hpp"
#include "test_util.hpp"

using namespace refbert;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// One pipeline run shared by the tests: corpus, tokenizer and all three
// training stages on a tiny model.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    const auto& d = dir_->path();
    std::string lines;
    const auto fns = synthetic::java_functions(30, 3);
    for (std::size_t i = 0; i < fns.size(); ++i) {
      const char* split = i < 20 ? "train" : i < 25 ? "validation" : "test";
      lines += json{{"id", fns[i].id}, {"code", fns[i].code}, {"split", split}}.dump() + "\n";
    }
    write(d / "functions.jsonl", lines);
    write(d / "tiny.cfg",
          "num_layers = 1\nhidden_dim = 16\nnum_heads = 2\nffn_dim = 32\nmax_seq_len = 256\n"
          "max_epochs = 1\nvocab_size = 400\n");
    const std::string cfg = (d / "tiny.cfg").string();
    steps_.push_back(run({"build-corpus", "--data", (d / "functions.jsonl").string(), "--out", (d / "corpus").string()}));
    const std::string data = (d / "corpus" / "corpus.jsonl").string();
    steps_.push_back(run({"train-tokenizer", "--data", data, "--out", (d / "tok").string(), "--config", cfg}));
    steps_.push_back(run({"pretrain", "--data", data, "--vocab", (d / "tok" / "vocab.txt").string(), "--out",
                          (d / "pre").string(), "--config", cfg}));
    steps_.push_back(run({"finetune-lp", "--data", data, "--model", (d / "pre" / "model.rfbt").string(), "--out",
                          (d / "lp").string(), "--config", cfg}));
    steps_.push_back(run({"finetune-tg", "--data", data, "--model", (d / "lp" / "model.rfbt").string(), "--out",
                          (d / "tg").string(), "--config", cfg}));
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
    steps_.clear();
  }

  static fs::path path(const std::string& rel) { return dir_->path() / rel; }
  static std::string str(const std::string& rel) { return path(rel).string(); }

  static TempDir* dir_;
  static std::vector<Result> steps_;
};

TempDir* Pipeline::dir_ = nullptr;
std::vector<Result> Pipeline::steps_;

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  const auto unknown = run({"frobnicate"});
  EXPECT_EQ(unknown.code, cli::kExitUsage);
  EXPECT_NE(unknown.err.find("evaluate"), std::string::npos);
  EXPECT_EQ(run({"gradcheck", "--no-such-flag"}).code, cli::kExitUsage);
  const auto missing = run({"evaluate"});
  EXPECT_EQ(missing.code, cli::kExitUsage);
  EXPECT_NE(missing.err.find("--model"), std::string::npos);
  EXPECT_EQ(run({"evaluate", "--model", "/nonexistent.rfbt", "--data", "/nonexistent.jsonl"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST(Cli, PrintConfigReflectsFlags) {
  const auto r = run({"finetune-tg", "--print-config", "--tau", "0.25", "--lambda-bot", "0", "--seed", "9"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("tau = 0.25"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("lambda_bot = 0"), std::string::npos);
  EXPECT_NE(r.out.find("seed = 9"), std::string::npos);
}

TEST(Cli, InvalidConfigValues) {
  TempDir d;
  write(d.path() / "bad.cfg", "tau = -1\n");
  EXPECT_EQ(run({"gradcheck", "--config", (d.path() / "bad.cfg").string()}).code, cli::kExitData);
  write(d.path() / "unknown.cfg", "warp_factor = 9\n");
  EXPECT_EQ(run({"gradcheck", "--config", (d.path() / "unknown.cfg").string()}).code, cli::kExitData);
}

TEST(Cli, FileDigestIsStable) {
  TempDir d;
  write(d.path() / "a.txt", "hello");
  EXPECT_EQ(cli::file_digest((d.path() / "a.txt").string()), "a430d84680aabd0b");
}

TEST_F(Pipeline, StagesSucceedAndWriteManifests) {
  for (const auto& s : steps_) ASSERT_EQ(s.code, cli::kExitOk) << s.err;
  for (const char* sub : {"corpus", "tok", "pre", "lp", "tg"}) {
    const auto m = json::parse(read(path(sub) / "manifest.json"));
    EXPECT_EQ(m["code_version"], "refbert 0.1.0");
    EXPECT_TRUE(m.contains("seed"));
    EXPECT_TRUE(m.contains("config"));
    EXPECT_TRUE(m.contains("inputs"));
  }
  EXPECT_TRUE(fs::exists(path("tg/model.rfbt")));
  EXPECT_TRUE(fs::exists(path("tg/vocab.txt")));
  EXPECT_TRUE(fs::exists(path("tg/finetune_tg.log.csv")));
  const auto j = json::parse(steps_[4].out);
  EXPECT_EQ(j["stage"], "finetune_tg");
}

TEST_F(Pipeline, EvaluatePrintsReport) {
  const auto r = run({"evaluate", "--model", str("tg/model.rfbt"), "--data", str("corpus/corpus.jsonl"), "--split",
                      "test", "--out", str("eval")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_GT(j["evaluated"].get<int>(), 0);
  EXPECT_NE(r.err.find("Hit@1"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("eval/report.json")));
  EXPECT_TRUE(fs::exists(path("eval/examples.csv")));
  EXPECT_TRUE(fs::exists(path("eval/manifest.json")));
}

TEST_F(Pipeline, SuggestAndMissingVariable) {
  const auto fns = synthetic::java_functions(1, 99);
  write(path("f.java"), fns[0].code);
  const auto vars = corpus::extract_variables(fns[0].code);
  ASSERT_FALSE(vars.empty());
  const auto ok = run({"suggest", "--model", str("tg/model.rfbt"), "--code", str("f.java"), "--var", vars[0].name});
  ASSERT_EQ(ok.code, cli::kExitOk) << ok.err;
  const auto j = json::parse(ok.out);
  EXPECT_EQ(j["sub_tokens"].size(), j["length_used"].get<std::size_t>());

  const auto missing = run({"suggest", "--model", str("tg/model.rfbt"), "--code", str("f.java"), "--var", "zzzMissing"});
  EXPECT_EQ(missing.code, cli::kExitData);
  EXPECT_NE(missing.err.find("VariableNotFound"), std::string::npos);
}

TEST_F(Pipeline, BaselineEval) {
  const auto r = run({"baseline-eval", "--data", str("corpus/corpus.jsonl"), "--vocab", str("tok/vocab.txt"), "--model",
                      str("tg/model.rfbt"), "--out", str("base")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_GT(j["evaluated"].get<int>(), 0);
  EXPECT_TRUE(fs::exists(path("base/ngram.txt")));
}

TEST_F(Pipeline, SweepCsvShapes) {
  const auto tau = run({"sweep", "--param", "tau", "--values", "0.02,0.05", "--data", str("corpus/corpus.jsonl"), "--model",
                        str("lp/model.rfbt"), "--out", str("sweep_tau"), "--config", str("tiny.cfg")});
  ASSERT_EQ(tau.code, cli::kExitOk) << tau.err;
  const auto csv = read(path("sweep_tau/sweep_tau.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "tau,accuracy");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

  const auto lam = run({"sweep", "--param", "lambda_cl", "--values", "0,1", "--data", str("corpus/corpus.jsonl"),
                        "--model", str("lp/model.rfbt"), "--out", str("sweep_cl"), "--config", str("tiny.cfg")});
  ASSERT_EQ(lam.code, cli::kExitOk) << lam.err;
  const auto lcsv = read(path("sweep_cl/sweep_lambda_cl.csv"));
  EXPECT_EQ(lcsv.substr(0, lcsv.find('\n')), "lambda_cl,lambda_cmlm,lambda_bot,accuracy");

  const auto lmax = run({"sweep", "--param", "l_max", "--values", "3", "--data", str("corpus/corpus.jsonl"), "--model",
                         str("lp/model.rfbt"), "--out", str("sweep_lmax"), "--config", str("tiny.cfg")});
  ASSERT_EQ(lmax.code, cli::kExitOk) << lmax.err;
  EXPECT_EQ(read(path("sweep_lmax/sweep_l_max.csv")).rfind("l_max,accuracy\n3,", 0), 0u);

  EXPECT_EQ(run({"sweep", "--param", "dropout", "--values", "0.1", "--data", str("corpus/corpus.jsonl"), "--model",
                 str("lp/model.rfbt"), "--out", str("sweep_bad")})
                .code,
            cli::kExitData);
}

TEST_F(Pipeline, LmaxMismatchIsRejected) {
  const auto r = run({"evaluate", "--model", str("tg/model.rfbt"), "--data", str("corpus/corpus.jsonl"), "--lmax", "3"});
  EXPECT_EQ(r.code, cli::kExitData);
}
