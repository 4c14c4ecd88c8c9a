#include "mulsim/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace mulsim::perceiver {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'M', 'L', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  void need(std::size_t n) {
    if (pos_ + n > buf_.size())
      throw Error("checkpoint " + path_ + ": truncated (need " + std::to_string(n) + " bytes at " +
                  std::to_string(pos_) + ")");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint8_t>(buf_[pos_]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_ + 1])) << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const Model& m, const std::string& path) {
  json manifest;
  manifest["fourier_bands"] = m.registry.fourier_bands;
  for (const auto& mod : m.registry.modalities)
    manifest["modalities"].push_back({{"rows", mod.rows}, {"cols", mod.cols}});
  for (const auto& task : m.registry.tasks)
    manifest["tasks"].push_back({{"modalities", task.modalities}, {"n_classes", task.n_classes}});
  const PerceiverConfig& c = m.config;
  manifest["config"] = {{"latent_rows", c.latent_rows}, {"latent_dim", c.latent_dim},
                        {"cross_heads", c.cross_heads}, {"self_heads", c.self_heads},
                        {"head_dim", c.head_dim},       {"ffn_hidden", c.ffn_hidden},
                        {"depth", c.depth},             {"ln_eps", c.ln_eps}};
  manifest["init_seed"] = m.init_seed;
  const std::string mjson = manifest.dump();

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, mjson.size());
  out += mjson;
  put_u32(out, static_cast<std::uint32_t>(m.params.size()));
  for (const auto& [name, mat] : m.params) {
    if (name.size() > 0xffff) throw Error("checkpoint: parameter name too long");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(mat.rows()));
    put_u32(out, static_cast<std::uint32_t>(mat.cols()));
    for (std::size_t i = 0; i < mat.size(); ++i) put_f64(out, mat.data()[i]);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("checkpoint: cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("checkpoint: short write to " + path);
}

Model load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(buf, path);

  if (r.bytes(4) != std::string(kMagic, 4))
    throw Error("checkpoint " + path + ": bad magic, not a model file");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw Error("checkpoint " + path + ": unsupported version " + std::to_string(version));
  const std::uint64_t mlen = r.u64();
  json manifest;
  try {
    manifest = json::parse(r.bytes(mlen));
  } catch (const json::exception& e) {
    throw Error("checkpoint " + path + ": bad manifest: " + e.what());
  }

  Model m;
  try {
    m.registry.fourier_bands = manifest.at("fourier_bands").get<int>();
    for (const auto& mod : manifest.at("modalities"))
      m.registry.modalities.push_back({mod.at("rows").get<int>(), mod.at("cols").get<int>()});
    for (const auto& task : manifest.at("tasks"))
      m.registry.tasks.push_back(
          {task.at("modalities").get<std::vector<int>>(), task.at("n_classes").get<int>()});
    const json& c = manifest.at("config");
    m.config.latent_rows = c.at("latent_rows").get<int>();
    m.config.latent_dim = c.at("latent_dim").get<int>();
    m.config.cross_heads = c.at("cross_heads").get<int>();
    m.config.self_heads = c.at("self_heads").get<int>();
    m.config.head_dim = c.at("head_dim").get<int>();
    m.config.ffn_hidden = c.at("ffn_hidden").get<int>();
    m.config.depth = c.at("depth").get<int>();
    m.config.ln_eps = c.at("ln_eps").get<double>();
    m.init_seed = manifest.at("init_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error("checkpoint " + path + ": incomplete manifest: " + e.what());
  }
  m.registry.validate();
  m.config.validate();

  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::uint16_t nlen = r.u16();
    const std::string name = r.bytes(nlen);
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows > 1u << 20 || cols > 1u << 20)
      throw Error("checkpoint " + path + ": implausible tensor shape for " + name);
    tensor::Matrix mat(static_cast<int>(rows), static_cast<int>(cols));
    for (std::size_t k = 0; k < mat.size(); ++k) mat.data()[k] = r.f64();
    if (!m.params.emplace(name, std::move(mat)).second)
      throw Error("checkpoint " + path + ": duplicate tensor " + name);
  }
  if (!r.done()) throw Error("checkpoint " + path + ": trailing bytes");

  // Shape cross-check against a freshly initialized skeleton.
  Model ref = Model::init(m.registry, m.config, m.init_seed);
  if (ref.params.size() != m.params.size())
    throw Error("checkpoint " + path + ": tensor set does not match manifest config");
  for (const auto& [name, mat] : ref.params) {
    auto it = m.params.find(name);
    if (it == m.params.end()) throw Error("checkpoint " + path + ": missing tensor " + name);
    if (!it->second.same_shape(mat))
      throw Error("checkpoint " + path + ": tensor " + name + " has unexpected shape");
  }
  return m;
}

}  // namespace mulsim::perceiver
