#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "refbert/error.hpp"
#include "refbert/nn.hpp"

namespace refbert::nn {
namespace {

constexpr char kMagic[4] = {'R', 'F', 'B', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

std::uint32_t need_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!get_u32(in, v)) throw Error(Errc::BadCheckpoint, std::string("truncated while reading ") + what);
  return v;
}

std::string config_text(const ModelConfig& c) {
  std::string out;
  for (const auto& [k, v] : c.to_kv()) out += k + " = " + v + "\n";
  return out;
}

ModelConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return ModelConfig::from_kv(kv);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kFormatVersion);
  const auto cfg = config_text(params.config);
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  for (const auto& t : tensors(params)) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto dim : t.dims) put_u32(out, dim);
    for (double v : t.data) put_f32(out, static_cast<float>(v));
  }
  if (!out) throw Error(Errc::Io, "write failure on " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(Errc::BadCheckpoint, path.string() + " is not a checkpoint");
  }
  const auto version = need_u32(in, "version");
  if (version != kFormatVersion) {
    throw Error(Errc::BadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto cfg_len = need_u32(in, "config length");
  std::string cfg(cfg_len, '\0');
  if (!in.read(cfg.data(), cfg_len)) throw Error(Errc::BadCheckpoint, "truncated config");

  ModelConfig config;
  try {
    config = parse_config_text(cfg);
    config.validate();
  } catch (const Error& e) {
    throw Error(Errc::BadCheckpoint, std::string("invalid config: ") + e.what());
  }
  ModelParams params = allocate_params(config);
  auto views = tensors(params);
  std::map<std::string, TensorView*> by_name;
  for (auto& v : views) by_name[v.name] = &v;

  std::uint32_t name_len = 0;
  while (get_u32(in, name_len)) {
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw Error(Errc::BadCheckpoint, "truncated tensor name");
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(Errc::BadCheckpoint, "unexpected tensor '" + name + "'");
    auto& view = *it->second;
    const auto rank = need_u32(in, "rank");
    std::vector<std::uint32_t> dims(rank);
    for (auto& dim : dims) dim = need_u32(in, "dims");
    if (dims != view.dims) throw Error(Errc::BadCheckpoint, "shape mismatch for '" + name + "'");
    for (double& v : view.data) v = std::bit_cast<float>(need_u32(in, "tensor data"));
    by_name.erase(it);
  }
  if (!by_name.empty()) throw Error(Errc::BadCheckpoint, "missing tensor '" + by_name.begin()->first + "'");
  return params;
}

}  // namespace refbert::nn
