#include "refbert/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "refbert/baseline.hpp"
#include "refbert/corpus.hpp"
#include "refbert/error.hpp"
#include "refbert/gradcheck.hpp"
#include "refbert/infer.hpp"
#include "refbert/metrics.hpp"
#include "refbert/nn.hpp"
#include "refbert/rng.hpp"
#include "refbert/synthetic.hpp"
#include "refbert/tokenizer.hpp"
#include "refbert/train.hpp"

namespace refbert::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCodeVersion = "refbert 0.1.0";
constexpr double kGradTolerance = 1e-4;

struct Flags {
  std::string config, data, model, out, vocab, code, var, param, values, split;
  std::uint64_t seed = 0;
  int lmax = 0, k = 5, vocab_size = 0;
  double lambda_cmlm = 0, lambda_bot = 0, lambda_cl = 0, tau = 0;
  bool print_config = false;
};

std::string dump(const json& j, int indent = -1) {
  return j.dump(indent, ' ', false, json::error_handler_t::replace);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(Errc::Io, "cannot write " + path.string());
}

/// Inputs recorded in the manifest, path -> digest.
class Context {
 public:
  Context(const Flags& flags, std::string command, std::vector<std::string> args, train::TrainConfig config)
      : flags(flags), command(std::move(command)), args(std::move(args)), config(std::move(config)) {}

  void note_input(const std::string& path) {
    if (!path.empty()) inputs[path] = file_digest(path);
  }

  void write_manifest(const fs::path& dir, const json& outputs) const {
    json j;
    j["command"] = command;
    j["args"] = args;
    j["code_version"] = kCodeVersion;
    j["seed"] = config.seed;
    j["config"] = config.to_kv();
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    write_file(dir / "manifest.json", dump(j, 2) + "\n");
  }

  const Flags& flags;
  std::string command;
  std::vector<std::string> args;
  train::TrainConfig config;
  std::map<std::string, std::string> inputs;
};

std::vector<corpus::RefactoringRecord> select_split(const std::vector<corpus::RefactoringRecord>& records,
                                                    const std::string& split) {
  if (split.empty() || split == "all") return records;
  const auto want = corpus::parse_split(split);
  std::vector<corpus::RefactoringRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out), [&](const auto& r) { return r.split == want; });
  return out;
}

fs::path vocab_path(const Flags& f) {
  if (!f.vocab.empty()) return f.vocab;
  if (f.model.empty()) throw Error(Errc::Io, "--vocab is required without --model");
  return fs::path(f.model).parent_path() / "vocab.txt";
}

/// Loads a checkpoint and reconciles the run config with its architecture.
nn::ModelParams load_model(Context& ctx) {
  ctx.note_input(ctx.flags.model);
  auto model = nn::load_checkpoint(ctx.flags.model);
  if (ctx.flags.lmax != 0 && ctx.flags.lmax != model.config.l_max && ctx.command != "sweep") {
    throw Error(Errc::InvalidConfig, "--lmax " + std::to_string(ctx.flags.lmax) + " disagrees with the checkpoint (l_max " +
                                         std::to_string(model.config.l_max) + ")");
  }
  auto& c = ctx.config;
  c.l_max = model.config.l_max;
  c.max_seq_len = model.config.max_seq_len;
  c.num_layers = model.config.num_layers;
  c.hidden_dim = model.config.hidden_dim;
  c.num_heads = model.config.num_heads;
  c.ffn_dim = model.config.ffn_dim;
  c.tie_embeddings = model.config.tie_embeddings;
  model.config.dropout = c.dropout;
  return model;
}

tok::SubwordVocab load_vocab(Context& ctx) {
  const auto path = vocab_path(ctx.flags);
  ctx.note_input(path.string());
  return tok::SubwordVocab::load(path);
}

std::vector<corpus::RefactoringRecord> load_records(Context& ctx) {
  ctx.note_input(ctx.flags.data);
  return corpus::load_corpus(ctx.flags.data);
}

json exclusions_json(const train::ExclusionStats& s) {
  return {{"name_too_long", s.name_too_long}, {"truncated", s.truncated}, {"not_found", s.not_found}};
}

json history_json(const train::TrainResult& r) {
  const auto& last = r.history.back();
  json j;
  j["epochs"] = r.history.size();
  j["best_epoch"] = r.best_epoch;
  j["early_stopped"] = r.early_stopped;
  j["final_train_loss"] = last.train.total;
  j["final_validation_loss"] = std::isnan(last.validation) ? json(nullptr) : json(last.validation);
  return j;
}

// ---------------------------------------------------------------- subcommands

int cmd_build_corpus(Context& ctx, std::ostream& out, std::ostream& err) {
  ctx.note_input(ctx.flags.data);
  const auto functions = corpus::load_functions(ctx.flags.data);
  corpus::AdaptStats stats;
  auto records = corpus::adapt_corpus(functions, ctx.config.seed, &stats);
  const fs::path dir = ctx.flags.out;
  fs::create_directories(dir);
  corpus::save_corpus(dir / "corpus.jsonl", records);
  json j = {{"input", stats.input},
            {"records", records.size()},
            {"too_short", stats.too_short},
            {"duplicates", stats.duplicates},
            {"malformed", stats.malformed},
            {"no_variables", stats.no_variables},
            {"pool_exhausted", stats.pool_exhausted}};
  ctx.write_manifest(dir, {{"corpus", (dir / "corpus.jsonl").string()}, {"stats", j}});
  err << "adapted " << records.size() << " of " << stats.input << " functions\n";
  out << dump(j) << "\n";
  return kExitOk;
}

int cmd_train_tokenizer(Context& ctx, std::ostream& out, std::ostream&) {
  const auto records = select_split(load_records(ctx), "train");
  if (records.empty()) throw Error(Errc::EmptyCorpus, "no training-split records to train the tokenizer on");
  std::vector<std::string> texts;
  for (const auto& r : records) {
    texts.push_back(r.code_after);
    texts.push_back(r.code_before);
  }
  tok::BpeOptions opts;
  opts.min_frequency = static_cast<std::size_t>(ctx.config.bpe_min_frequency);
  opts.camel_split = ctx.config.camel_split;
  const auto vocab = tok::train_bpe(texts, static_cast<std::size_t>(ctx.config.vocab_size), opts);
  const fs::path dir = ctx.flags.out;
  fs::create_directories(dir);
  vocab.save(dir / "vocab.txt");
  json j = {{"vocab", (dir / "vocab.txt").string()}, {"size", vocab.size()}, {"merges", vocab.merges().size()}};
  ctx.write_manifest(dir, j);
  out << dump(j) << "\n";
  return kExitOk;
}

int cmd_train(Context& ctx, train::Stage stage, std::ostream& out, std::ostream& err) {
  const auto vocab = load_vocab(ctx);
  nn::ModelParams model = ctx.flags.model.empty()
                              ? nn::init_params(ctx.config.model_config(static_cast<int>(vocab.size())), ctx.config.seed)
                              : load_model(ctx);
  if (model.config.vocab_size != static_cast<int>(vocab.size())) {
    throw Error(Errc::InvalidConfig, "checkpoint vocabulary size " + std::to_string(model.config.vocab_size) +
                                         " does not match the tokenizer (" + std::to_string(vocab.size()) + ")");
  }
  ctx.config.validate();
  const auto records = load_records(ctx);
  train::ExclusionStats train_excl, val_excl;
  const auto train_set = train::build_instances(vocab, select_split(records, "train"), ctx.config.mask_options(), &train_excl);
  const auto val_set =
      train::build_instances(vocab, select_split(records, "validation"), ctx.config.mask_options(), &val_excl);
  err << to_string(stage) << ": " << train_set.size() << " training and " << val_set.size()
      << " validation instances (" << train_excl.total() + val_excl.total() << " excluded)\n";

  const fs::path dir = ctx.flags.out;
  const auto result = train::run_stage(stage, ctx.config, model, train_set, val_set, dir);
  nn::save_checkpoint(dir / "model.rfbt", result.best);
  vocab.save(dir / "vocab.txt");

  json j = history_json(result);
  j["stage"] = to_string(stage);
  j["model"] = (dir / "model.rfbt").string();
  j["train_instances"] = train_set.size();
  j["validation_instances"] = val_set.size();
  j["excluded_train"] = exclusions_json(train_excl);
  j["excluded_validation"] = exclusions_json(val_excl);
  ctx.write_manifest(dir, j);
  out << dump(j) << "\n";
  return kExitOk;
}

metrics::Predictor model_predictor(const nn::ModelParams& model, const tok::SubwordVocab& vocab,
                                   infer::DecodeMode mode) {
  return [&model, &vocab, mode](const corpus::RefactoringRecord& r) {
    const auto s = infer::suggest(model, vocab, r.code_before, r.variable_before, mode, 0);
    metrics::Prediction p;
    for (const auto& l : s.lengths) p.ranked_lengths.push_back(l.length);
    p.name = s.name;
    p.sub_tokens = s.sub_tokens;
    return p;
  };
}

void emit_report(Context& ctx, const metrics::EvalReport& report, std::ostream& out, std::ostream& err,
                 json outputs = json::object()) {
  err << report.summary_table();
  if (report.excluded_too_long + report.excluded_failed > 0) {
    err << "excluded: " << report.excluded_too_long << " names longer than l_max, " << report.excluded_failed
        << " unmaskable records\n";
  }
  if (!ctx.flags.out.empty()) {
    const fs::path dir = ctx.flags.out;
    write_file(dir / "report.json", report.to_json() + "\n");
    write_file(dir / "examples.csv", report.rows_csv());
    outputs["report"] = (dir / "report.json").string();
    outputs["examples"] = (dir / "examples.csv").string();
    ctx.write_manifest(dir, outputs);
  }
  out << report.to_json() << "\n";
}

int cmd_evaluate(Context& ctx, std::ostream& out, std::ostream& err) {
  const auto model = load_model(ctx);
  const auto vocab = load_vocab(ctx);
  const auto records = select_split(load_records(ctx), ctx.flags.split);
  const auto report = metrics::evaluate_corpus(model_predictor(model, vocab, infer::parse_decode_mode(ctx.config.decode)),
                                               records, vocab, model.config.l_max,
                                               fs::path(ctx.flags.data).filename().string());
  emit_report(ctx, report, out, err);
  return kExitOk;
}

int cmd_suggest(Context& ctx, std::ostream& out, std::ostream&) {
  const auto model = load_model(ctx);
  const auto vocab = load_vocab(ctx);
  ctx.note_input(ctx.flags.code);
  const auto code = read_file(ctx.flags.code);
  auto s = infer::suggest(model, vocab, code, ctx.flags.var, infer::parse_decode_mode(ctx.config.decode), ctx.flags.k);
  s.id = ctx.flags.var;
  if (!ctx.flags.out.empty()) {
    write_file(fs::path(ctx.flags.out) / "suggestion.json", infer::to_json(s) + "\n");
    ctx.write_manifest(ctx.flags.out, {{"suggestion", (fs::path(ctx.flags.out) / "suggestion.json").string()}});
  }
  out << infer::to_json(s) << "\n";
  return kExitOk;
}

int cmd_baseline_eval(Context& ctx, std::ostream& out, std::ostream& err) {
  const auto vocab = load_vocab(ctx);
  const auto records = load_records(ctx);
  std::optional<nn::ModelParams> lp_model;
  if (!ctx.flags.model.empty()) lp_model = load_model(ctx);
  const auto ngram = baseline::train_ngram(select_split(records, "train"), vocab,
                                           {ctx.config.ngram_order, ctx.config.ngram_k});
  const auto eval_split = ctx.flags.split.empty() ? std::string("test") : ctx.flags.split;
  const auto eval_records = select_split(records, eval_split);
  const metrics::Predictor predictor = [&](const corpus::RefactoringRecord& r) {
    metrics::Prediction p;
    const auto ranked = baseline::ngram_suggest(ngram, vocab, r.code_before, r.variable_before, 1);
    p.name = ranked.front().first;
    if (lp_model) {
      for (const auto& [g, score] : baseline::heuristic_lp(*lp_model, vocab, r)) p.ranked_lengths.push_back(g);
    }
    return p;
  };
  const auto report = metrics::evaluate_corpus(predictor, eval_records, vocab, ctx.config.l_max, eval_split);
  json outputs = json::object();
  if (!ctx.flags.out.empty()) {
    fs::create_directories(ctx.flags.out);
    ngram.save(fs::path(ctx.flags.out) / "ngram.txt");
    outputs["ngram"] = (fs::path(ctx.flags.out) / "ngram.txt").string();
  }
  emit_report(ctx, report, out, err, outputs);
  return kExitOk;
}

int cmd_gradcheck(Context& ctx, std::ostream& out, std::ostream& err) {
  nn::ModelConfig mc;
  mc.num_layers = 2;
  mc.hidden_dim = 32;
  mc.num_heads = 4;
  mc.ffn_dim = 64;
  mc.max_seq_len = 64;
  mc.vocab_size = 64;
  mc.l_max = 5;
  mc.dropout = 0.0;
  const auto params = synthetic::random_params(mc, ctx.config.seed, 0.2);
  const auto inst = synthetic::random_instance(derive_seed(ctx.config.seed, 1), mc.vocab_size, 12, 2, 2);

  struct Case {
    const char* name;
    train::Objective objective;
  };
  const double tau = ctx.config.tau;
  const std::vector<Case> cases = {
      {"cmlm", {1, 0, 0, 0, tau, false}},
      {"num", {0, 0, 0, 1, tau, false}},
      {"bot", {0, 1, 0, 0, tau, false}},
      {"cl", {0, 0, 1, 0, tau, false}},
      {"combined", {ctx.config.lambda_cmlm, ctx.config.lambda_bot, ctx.config.lambda_cl, 0, tau, false}},
  };
  json results = json::object();
  bool ok = true;
  for (const auto& c : cases) {
    const nn::ParamLoss fn = [&](const nn::ModelParams& p, nn::ModelParams* g) {
      return train::instance_loss(p, inst, c.objective, false, 0, g).total;
    };
    nn::GradCheckOptions opts;
    opts.epsilon = 1e-4;
    opts.seed = ctx.config.seed;
    const auto r = nn::gradient_check(fn, params, opts);
    ok = ok && r.max_rel_error < kGradTolerance;
    results[c.name] = {{"max_rel_error", r.max_rel_error},
                       {"coordinates", r.coordinates_checked},
                       {"worst_tensor", r.worst_tensor},
                       {"worst_index", r.worst_index}};
    err << c.name << ": max relative error " << r.max_rel_error << " over " << r.coordinates_checked
        << " coordinates\n";
  }
  json j = {{"tolerance", kGradTolerance}, {"passed", ok}, {"losses", results}};
  if (!ctx.flags.out.empty()) {
    write_file(fs::path(ctx.flags.out) / "gradcheck.json", dump(j, 2) + "\n");
    ctx.write_manifest(ctx.flags.out, {{"gradcheck", (fs::path(ctx.flags.out) / "gradcheck.json").string()}});
  }
  out << dump(j) << "\n";
  return ok ? kExitOk : kExitNumeric;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(Errc::InvalidConfig, "bad sweep value '" + item + "'");
    }
  }
  if (out.empty()) throw Error(Errc::InvalidConfig, "--values is empty");
  return out;
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss << std::setprecision(6) << x;
  return ss.str();
}

int cmd_sweep(Context& ctx, std::ostream& out, std::ostream& err) {
  const auto& param = ctx.flags.param;
  static const std::vector<std::string> kParams = {"lambda_cmlm", "lambda_bot", "lambda_cl", "tau", "l_max"};
  if (std::find(kParams.begin(), kParams.end(), param) == kParams.end()) {
    throw Error(Errc::InvalidConfig, "--param must be one of lambda_cmlm, lambda_bot, lambda_cl, tau, l_max");
  }
  const auto values = parse_values(ctx.flags.values);
  const auto base_model = load_model(ctx);
  const auto vocab = load_vocab(ctx);
  const auto records = load_records(ctx);
  auto eval_records = select_split(records, "validation");
  if (eval_records.empty()) eval_records = select_split(records, "train");

  std::string csv;
  if (param == "tau") csv = "tau,accuracy\n";
  else if (param == "l_max") csv = "l_max,accuracy\n";
  else csv = "lambda_cl,lambda_cmlm,lambda_bot,accuracy\n";

  const fs::path dir = ctx.flags.out;
  json runs = json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto config = ctx.config;
    auto model = base_model;
    const double v = values[i];
    if (param == "tau") config.tau = v;
    else if (param == "lambda_cmlm") config.lambda_cmlm = v;
    else if (param == "lambda_bot") config.lambda_bot = v;
    else if (param == "lambda_cl") config.lambda_cl = v;
    const fs::path run_dir = dir / ("run" + std::to_string(i));
    if (param == "l_max") {
      if (v < 1 || v != std::floor(v)) throw Error(Errc::InvalidConfig, "l_max values must be positive integers");
      // A new length head of the requested size, then both fine-tuning stages.
      config.l_max = static_cast<int>(v);
      const auto fresh = nn::init_params(config.model_config(model.config.vocab_size), derive_seed(config.seed, i));
      model.config.l_max = config.l_max;
      model.length_head_w = fresh.length_head_w;
      model.length_head_b = fresh.length_head_b;
    }
    config.validate();
    const auto train_set = train::build_instances(vocab, select_split(records, "train"), config.mask_options());
    const auto val_set = train::build_instances(vocab, select_split(records, "validation"), config.mask_options());
    if (param == "l_max") train::finetune_lp(config, model, train_set, val_set, run_dir);
    const auto result = train::finetune_tg(config, model, train_set, val_set, run_dir);
    const auto report = metrics::evaluate_corpus(
        model_predictor(result.best, vocab, infer::parse_decode_mode(config.decode)), eval_records, vocab,
        config.l_max, "validation");
    write_file(run_dir / "report.json", report.to_json() + "\n");
    const std::string acc = std::isnan(report.accuracy) ? "" : fmt(report.accuracy);
    if (param == "tau") csv += fmt(config.tau) + "," + acc + "\n";
    else if (param == "l_max") csv += std::to_string(config.l_max) + "," + acc + "\n";
    else csv += fmt(config.lambda_cl) + "," + fmt(config.lambda_cmlm) + "," + fmt(config.lambda_bot) + "," + acc + "\n";
    err << param << " = " << fmt(v) << ": accuracy " << acc << "\n";
    runs.push_back({{"value", v}, {"dir", run_dir.string()}, {"accuracy", report.accuracy}});
  }
  write_file(dir / ("sweep_" + param + ".csv"), csv);
  ctx.write_manifest(dir, {{"csv", (dir / ("sweep_" + param + ".csv")).string()}, {"runs", runs}});
  out << csv;
  return kExitOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::NonFiniteGradient:
    case Errc::NonFiniteLoss: return kExitNumeric;
    default: return kExitData;
  }
}

}  // namespace

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Flags f;
  CLI::App app{"Rename-refactoring suggestions with a small masked-language-model encoder", "refbert"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    std::string name;
  };
  std::vector<Sub> subs;
  auto add = [&](const std::string& name, const std::string& help) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", f.config, "key = value config file")->check(CLI::ExistingFile);
    s->add_option("--seed", f.seed, "random seed");
    s->add_flag("--print-config", f.print_config, "print the effective config and exit");
    subs.push_back({s, name});
    return s;
  };
  auto objective_flags = [&](CLI::App* s) {
    s->add_option("--lmax", f.lmax, "maximum sub-tokens per name");
    s->add_option("--lambda-cmlm", f.lambda_cmlm, "weight of the cMLM loss");
    s->add_option("--lambda-bot", f.lambda_bot, "weight of the bag-of-tokens loss");
    s->add_option("--lambda-cl", f.lambda_cl, "weight of the contrastive loss");
    s->add_option("--tau", f.tau, "contrastive temperature");
  };

  auto* build = add("build-corpus", "adapt plain functions into rename records");
  build->add_option("--data", f.data, "functions JSONL")->check(CLI::ExistingFile);
  build->add_option("--out", f.out, "output directory");

  auto* tokr = add("train-tokenizer", "learn the BPE vocabulary from the training split");
  tokr->add_option("--data", f.data, "corpus JSONL")->check(CLI::ExistingFile);
  tokr->add_option("--out", f.out, "output directory");
  tokr->add_option("--vocab-size", f.vocab_size, "target vocabulary size");

  std::vector<std::pair<CLI::App*, train::Stage>> stages;
  for (const auto& [name, stage] : {std::pair{"pretrain", train::Stage::Pretrain},
                                    std::pair{"finetune-lp", train::Stage::FinetuneLp},
                                    std::pair{"finetune-tg", train::Stage::FinetuneTg}}) {
    auto* s = add(name, std::string("run the ") + name + " stage");
    s->add_option("--data", f.data, "corpus JSONL")->check(CLI::ExistingFile);
    s->add_option("--model", f.model, "starting checkpoint")->check(CLI::ExistingFile);
    s->add_option("--vocab", f.vocab, "vocabulary file")->check(CLI::ExistingFile);
    s->add_option("--out", f.out, "output directory");
    objective_flags(s);
    stages.emplace_back(s, stage);
  }

  auto* eval = add("evaluate", "score a checkpoint on a corpus");
  eval->add_option("--model", f.model, "checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--data", f.data, "corpus JSONL")->check(CLI::ExistingFile);
  eval->add_option("--vocab", f.vocab, "vocabulary file (default: vocab.txt next to the model)");
  eval->add_option("--split", f.split, "train, validation, test or all")->default_val("all");
  eval->add_option("--out", f.out, "write report.json, examples.csv and a manifest here");
  eval->add_option("--lmax", f.lmax, "must match the checkpoint");

  auto* sug = add("suggest", "suggest a new name for one variable");
  sug->add_option("--model", f.model, "checkpoint")->check(CLI::ExistingFile);
  sug->add_option("--code", f.code, "source file")->check(CLI::ExistingFile);
  sug->add_option("--var", f.var, "variable to rename");
  sug->add_option("--vocab", f.vocab, "vocabulary file (default: vocab.txt next to the model)");
  sug->add_option("--k", f.k, "candidates listed per slot")->default_val(5);
  sug->add_option("--out", f.out, "also write suggestion.json and a manifest here");

  auto* base = add("baseline-eval", "n-gram rename baseline, plus heuristic length ranking with --model");
  base->add_option("--data", f.data, "corpus JSONL")->check(CLI::ExistingFile);
  base->add_option("--vocab", f.vocab, "vocabulary file");
  base->add_option("--model", f.model, "checkpoint for the heuristic length baseline")->check(CLI::ExistingFile);
  base->add_option("--split", f.split, "split to evaluate (default test)");
  base->add_option("--out", f.out, "write the n-gram model, report and manifest here");
  base->add_option("--lmax", f.lmax, "maximum sub-tokens per name");

  auto* grad = add("gradcheck", "finite-difference check of every loss on a toy model");
  grad->add_option("--out", f.out, "also write gradcheck.json and a manifest here");
  objective_flags(grad);

  auto* sweep = add("sweep", "fine-tune and evaluate once per parameter value");
  sweep->add_option("--param", f.param, "lambda_cmlm, lambda_bot, lambda_cl, tau or l_max");
  sweep->add_option("--values", f.values, "comma-separated values");
  sweep->add_option("--data", f.data, "corpus JSONL")->check(CLI::ExistingFile);
  sweep->add_option("--model", f.model, "checkpoint after length prediction fine-tuning")->check(CLI::ExistingFile);
  sweep->add_option("--vocab", f.vocab, "vocabulary file");
  sweep->add_option("--out", f.out, "output directory");
  objective_flags(sweep);

  // Required flags per subcommand, checked after parsing so that
  // --print-config works alone.
  const std::map<std::string, std::vector<std::string>> required = {
      {"build-corpus", {"--data", "--out"}},
      {"train-tokenizer", {"--data", "--out"}},
      {"pretrain", {"--data", "--vocab", "--out"}},
      {"finetune-lp", {"--data", "--model", "--out"}},
      {"finetune-tg", {"--data", "--model", "--out"}},
      {"evaluate", {"--model", "--data"}},
      {"suggest", {"--model", "--code", "--var"}},
      {"baseline-eval", {"--data"}},
      {"gradcheck", {}},
      {"sweep", {"--param", "--values", "--data", "--model", "--out"}},
  };

  std::vector<std::string> argv_store{"refbert"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  const Sub* chosen = nullptr;
  for (const auto& s : subs) {
    if (s.app->parsed()) chosen = &s;
  }
  CLI::App* sub = chosen->app;
  const auto given = [&](const std::string& flag) {
    const auto* opt = sub->get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };

  try {
    train::TrainConfig config;
    if (!f.config.empty()) config = train::load_config(f.config);
    if (given("--seed")) config.seed = f.seed;
    if (given("--lmax")) config.l_max = f.lmax;
    if (given("--lambda-cmlm")) config.lambda_cmlm = f.lambda_cmlm;
    if (given("--lambda-bot")) config.lambda_bot = f.lambda_bot;
    if (given("--lambda-cl")) config.lambda_cl = f.lambda_cl;
    if (given("--tau")) config.tau = f.tau;
    if (given("--vocab-size")) config.vocab_size = f.vocab_size;
    if (!given("--lmax")) f.lmax = 0;
    config.validate();

    if (f.print_config) {
      out << config.to_text();
      return kExitOk;
    }
    for (const auto& flag : required.at(chosen->name)) {
      if (!given(flag)) {
        err << "error: " << chosen->name << " requires " << flag << "\n\n" << sub->help();
        return kExitUsage;
      }
    }

    Context ctx(f, chosen->name, args, config);
    if (chosen->name == "build-corpus") return cmd_build_corpus(ctx, out, err);
    if (chosen->name == "train-tokenizer") return cmd_train_tokenizer(ctx, out, err);
    for (const auto& [s, stage] : stages) {
      if (s == sub) return cmd_train(ctx, stage, out, err);
    }
    if (chosen->name == "evaluate") return cmd_evaluate(ctx, out, err);
    if (chosen->name == "suggest") return cmd_suggest(ctx, out, err);
    if (chosen->name == "baseline-eval") return cmd_baseline_eval(ctx, out, err);
    if (chosen->name == "gradcheck") return cmd_gradcheck(ctx, out, err);
    if (chosen->name == "sweep") return cmd_sweep(ctx, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: Io: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace refbert::cli
