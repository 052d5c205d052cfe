#include "refbert/synthetic.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <string_view>

#include "refbert/rng.hpp"
#include "refbert/tokenizer.hpp"

namespace refbert::synthetic {

namespace {

constexpr std::array<std::string_view, 32> kWords = {
    "user",  "file",   "count",  "total",  "index", "name",   "buffer", "item",   "value", "result", "size",
    "path",  "line",   "entry",  "node",   "key",   "data",   "token",  "offset", "limit", "score",  "price",
    "order", "event",  "message", "config", "source", "target", "batch", "cache", "row",   "column"};

constexpr std::array<std::string_view, 10> kVerbs = {"compute", "load",  "find",   "update", "build",
                                                     "parse",   "merge", "select", "render", "check"};

std::string capitalize(std::string_view w) {
  std::string out(w);
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

std::string camel(const std::vector<std::string_view>& words) {
  std::string out(words.front());
  for (std::size_t i = 1; i < words.size(); ++i) out += capitalize(words[i]);
  return out;
}

struct Local {
  std::string type;
  std::string name;
};

const std::array<std::string, 6> kTypes = {"int", "String", "long", "double", "boolean", "StringBuilder"};

std::string initializer(const std::string& type, SplitMix64& rng) {
  if (type == "int" || type == "long") return std::to_string(rng.below(100));
  if (type == "double") return std::to_string(rng.below(10)) + ".5";
  if (type == "boolean") return rng.below(2) ? "true" : "false";
  if (type == "String") return "\"" + std::string(kWords[rng.below(kWords.size())]) + "\"";
  return "new StringBuilder()";
}

std::string statement(const Local& v, const std::vector<Local>& all, SplitMix64& rng) {
  const std::string& n = v.name;
  const auto pick = rng.below(3);
  if (v.type == "int" || v.type == "long" || v.type == "double") {
    const Local& other = all[rng.below(all.size())];
    if (pick == 0) return n + " = " + n + " + " + std::to_string(rng.below(9) + 1) + ";";
    if (pick == 1 && other.type == v.type && other.name != n) return n + " += " + other.name + ";";
    return "if (" + n + " > " + std::to_string(rng.below(50)) + ") {\n        " + n + " = 0;\n    }";
  }
  if (v.type == "String") {
    if (pick == 0) return n + " = " + n + ".trim();";
    if (pick == 1) return "System.out.println(" + n + ");";
    return n + " = " + n + " + \"" + std::string(kWords[rng.below(kWords.size())]) + "\";";
  }
  if (v.type == "boolean") {
    if (pick == 0) return n + " = !" + n + ";";
    return "if (" + n + ") {\n        System.out.println(\"" + std::string(kWords[rng.below(kWords.size())]) +
           "\");\n    }";
  }
  if (pick == 0) return n + ".append(\"" + std::string(kWords[rng.below(kWords.size())]) + "\");";
  return n + ".setLength(0);";
}

std::string value_of(const Local& v) {
  if (v.type == "StringBuilder") return v.name + ".toString()";
  return "String.valueOf(" + v.name + ")";
}

}  // namespace

std::vector<corpus::SourceFunction> java_functions(std::size_t count, std::uint64_t seed,
                                                   const FunctionOptions& options) {
  std::vector<corpus::SourceFunction> out;
  for (std::size_t f = 0; f < count; ++f) {
    SplitMix64 rng(derive_seed(seed, f));
    std::set<std::string> used;
    std::vector<Local> locals;
    const auto n_locals = options.min_locals +
                          static_cast<int>(rng.below(static_cast<std::uint64_t>(options.max_locals - options.min_locals + 1)));
    // Parameters first, then locals; all names distinct.
    const int n_vars = n_locals + 1;
    while (static_cast<int>(locals.size()) < n_vars) {
      std::vector<std::string_view> words;
      const bool long_name = rng.uniform() < options.long_name_rate;
      const auto n_words = long_name ? 6u : 1u + static_cast<unsigned>(rng.below(3));
      for (unsigned w = 0; w < n_words; ++w) words.push_back(kWords[rng.below(kWords.size())]);
      auto name = camel(words);
      if (!used.insert(name).second) continue;
      locals.push_back({kTypes[rng.below(kTypes.size())], name});
    }
    const Local param = locals.front();
    const std::string method = std::string(kVerbs[rng.below(kVerbs.size())]) +
                               capitalize(kWords[rng.below(kWords.size())]) + std::to_string(f);
    std::string code = "public String " + method + "(" + param.type + " " + param.name + ") {\n";
    for (std::size_t i = 1; i < locals.size(); ++i) {
      code += "    " + locals[i].type + " " + locals[i].name + " = " + initializer(locals[i].type, rng) + ";\n";
    }
    const auto n_statements = 2 + rng.below(4);
    for (std::uint64_t s = 0; s < n_statements; ++s) {
      const Local& v = locals[rng.below(locals.size())];
      code += "    " + statement(v, locals, rng) + "\n";
    }
    code += "    return " + value_of(locals.back()) + ";\n}\n";
    out.push_back({"fn" + std::to_string(f), code, corpus::Split::Train});
  }
  return out;
}

std::vector<corpus::RefactoringRecord> bag_permutation_records(std::size_t count, std::uint64_t seed) {
  static const std::vector<std::vector<std::string>> kBags = {
      {"Commit", "Log", "Lower", "Bound"}, {"Default", "Version"}, {"Image", "Folder", "Path"},
      {"Max", "Retry", "Count"},           {"User", "Session"},    {"Buffer", "Size", "Limit"}};
  static const std::vector<std::string> kCalls = {"readCommits", "pickVersion", "scanImages",
                                                  "retryPolicy", "openSession", "allocate"};
  static const std::vector<std::string> kBefore = {"tmp", "val", "obj", "x", "v", "res", "a", "b"};
  std::vector<corpus::RefactoringRecord> out;
  for (std::size_t r = 0; r < count; ++r) {
    SplitMix64 rng(derive_seed(seed, r));
    const auto b = rng.below(kBags.size());
    auto words = kBags[b];
    rng.shuffle(words);
    std::string after;
    for (const auto& w : words) after += w;
    const std::string before = kBefore[rng.below(kBefore.size())] + std::to_string(rng.below(10));
    const std::string arg = std::to_string(rng.below(100));
    const std::string method = "task" + std::to_string(r);
    auto body = [&](const std::string& name) {
      return "public void " + method + "() {\n    Object " + name + " = " + kCalls[b] + "(" + arg +
             ");\n    consume(" + name + ");\n    System.out.println(" + name + ");\n}\n";
    };
    corpus::RefactoringRecord rec;
    rec.id = "bag" + std::to_string(r);
    rec.code_before = body(before);
    rec.code_after = body(after);
    rec.variable_before = before;
    rec.variable_after = after;
    out.push_back(std::move(rec));
  }
  return out;
}

train::TrainingInstance random_instance(std::uint64_t seed, int vocab_size, int context_tokens, int name_tokens,
                                        int occurrences) {
  SplitMix64 rng(seed);
  auto token = [&] { return tok::kNumSpecials + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size - tok::kNumSpecials))); };
  std::vector<int> after_name, before_name;
  for (int i = 0; i < name_tokens; ++i) after_name.push_back(token());
  before_name.push_back(token());
  std::vector<int> context;
  for (int i = 0; i < context_tokens; ++i) context.push_back(token());

  // Occurrences are spread evenly through the context.
  const int gap = std::max(1, context_tokens / (occurrences + 1));
  auto assemble = [&](const std::vector<int>& fill, std::vector<std::vector<int>>* groups, bool single) {
    std::vector<int> ids{tok::kCls};
    int c = 0;
    for (int o = 0; o < occurrences; ++o) {
      for (int k = 0; k < gap && c < context_tokens; ++k) ids.push_back(context[static_cast<std::size_t>(c++)]);
      std::vector<int> group;
      const auto n = single ? std::size_t{1} : fill.size();
      for (std::size_t k = 0; k < n; ++k) {
        group.push_back(static_cast<int>(ids.size()));
        ids.push_back(fill[k]);
      }
      if (groups) groups->push_back(std::move(group));
    }
    while (c < context_tokens) ids.push_back(context[static_cast<std::size_t>(c++)]);
    ids.push_back(tok::kSep);
    return ids;
  };

  train::TrainingInstance inst;
  inst.id = "random" + std::to_string(seed);
  std::vector<int> masks(static_cast<std::size_t>(name_tokens), tok::kMask);
  inst.cmlm.scheme = train::MaskScheme::Cmlm;
  inst.cmlm.input_ids = assemble(masks, &inst.cmlm.mask_positions, false);
  inst.cmlm.target_ids = after_name;
  inst.cmlm.length_label = name_tokens;
  inst.num.scheme = train::MaskScheme::Num;
  inst.num.input_ids = assemble({tok::kNum}, &inst.num.mask_positions, true);
  inst.num.target_ids = after_name;
  inst.num.length_label = name_tokens;
  std::vector<std::vector<int>> groups;
  inst.after.ids = assemble(after_name, &groups, false);
  for (const auto& g : groups) inst.after.positions.insert(inst.after.positions.end(), g.begin(), g.end());
  groups.clear();
  inst.before.ids = assemble(before_name, &groups, false);
  for (const auto& g : groups) inst.before.positions.insert(inst.before.positions.end(), g.begin(), g.end());
  return inst;
}

nn::ModelParams random_params(const nn::ModelConfig& config, std::uint64_t seed, double scale) {
  auto params = nn::allocate_params(config);
  SplitMix64 rng(seed);
  for (auto& t : nn::tensors(params)) {
    const bool gain = t.name.find("gain") != std::string::npos;
    for (double& x : t.data) x = (gain ? 1.0 : 0.0) + scale * rng.normal();
  }
  return params;
}

}  // namespace refbert::synthetic
