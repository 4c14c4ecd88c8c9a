#include "mulsim/perceiver.hpp"

#include <algorithm>
#include <cmath>

namespace mulsim::perceiver {

namespace {
constexpr double kPi = 3.14159265358979323846;

std::string h(const std::string& base, int k) { return base + ".h" + std::to_string(k); }
std::string d(const std::string& base, int di) { return base + ".d" + std::to_string(di); }
}  // namespace

void Registry::validate() const {
  if (modalities.empty()) throw ConfigError("registry: no modalities");
  if (tasks.empty()) throw ConfigError("registry: no tasks");
  if (fourier_bands < 1) throw ConfigError("registry: fourier_bands must be >= 1");
  for (std::size_t i = 0; i < modalities.size(); ++i)
    if (modalities[i].rows < 1 || modalities[i].cols < 1)
      throw ConfigError("registry: modality " + std::to_string(i) + " has non-positive dims");
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const TaskInfo& task = tasks[t];
    if (task.n_classes < 2)
      throw ConfigError("registry: task " + std::to_string(t) + " needs >= 2 classes");
    if (task.modalities.empty())
      throw ConfigError("registry: task " + std::to_string(t) + " has no modalities");
    for (int m : task.modalities)
      if (m < 0 || m >= n_modalities())
        throw ConfigError("registry: task " + std::to_string(t) + " references unknown modality " +
                          std::to_string(m));
    if (!std::is_sorted(task.modalities.begin(), task.modalities.end()))
      throw ConfigError("registry: task " + std::to_string(t) + " modalities must be ascending");
  }
}

int Registry::max_rows() const {
  int r = 0;
  for (const auto& m : modalities) r = std::max(r, m.rows);
  return r;
}

int Registry::max_raw_cols() const {
  int c = 0;
  for (const auto& m : modalities) c = std::max(c, m.cols);
  return c;
}

int Registry::padded_cols() const { return max_raw_cols() + n_modalities() + 2 * fourier_bands; }

Matrix Registry::pad_and_embed(const Matrix& raw, int modality_id) const {
  if (modality_id < 0 || modality_id >= n_modalities())
    throw ConfigError("pad_and_embed: unknown modality " + std::to_string(modality_id));
  const ModalityInfo& info = modalities[modality_id];
  if (raw.rows() != info.rows || raw.cols() != info.cols)
    throw_shape("pad_and_embed", raw.rows(), raw.cols(), info.rows, info.cols);

  Matrix out(max_rows(), padded_cols());
  const int nb = fourier_bands;
  const double fmax = std::max(2.0, info.rows / 2.0);
  for (int i = 0; i < info.rows; ++i) {
    double* row = out.row(i);
    for (int j = 0; j < info.cols; ++j) row[j] = raw.at(i, j);
    row[info.cols + modality_id] = 1.0;
    const double t = info.rows == 1 ? 0.0 : static_cast<double>(i) / (info.rows - 1);
    const int base = info.cols + n_modalities();
    for (int b = 0; b < nb; ++b) {
      const double f = nb == 1 ? 1.0 : std::exp(b * std::log(fmax) / (nb - 1));
      row[base + 2 * b] = std::sin(kPi * f * t);
      row[base + 2 * b + 1] = std::cos(kPi * f * t);
    }
  }
  return out;
}

PerceiverConfig PerceiverConfig::desk() { return PerceiverConfig{}; }

PerceiverConfig PerceiverConfig::paper_scale() {
  PerceiverConfig c;
  c.latent_rows = 20;
  c.latent_dim = 64;
  c.cross_heads = 1;
  c.self_heads = 6;
  c.head_dim = 64;
  c.ffn_hidden = 64;
  c.depth = 1;
  return c;
}

void PerceiverConfig::validate() const {
  if (latent_rows < 1 || latent_dim < 1 || cross_heads < 1 || self_heads < 1 || head_dim < 1 ||
      ffn_hidden < 1 || depth < 1 || ln_eps <= 0.0)
    throw ConfigError("perceiver config: all sizes must be positive");
}

namespace {

struct Init {
  std::map<std::string, Matrix>& params;
  Rng& rng;

  void weight(const std::string& name, int in, int out) {
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    params.emplace(name, Matrix::uniform(rng, in, out, -s, s));
  }
  void gain(const std::string& name, int n) { params.emplace(name, Matrix::full(1, n, 1.0)); }
  void bias(const std::string& name, int n) { params.emplace(name, Matrix(1, n)); }

  void ffn(const std::string& prefix, int width, int hidden) {
    gain(prefix + ".ln.gain", width);
    bias(prefix + ".ln.bias", width);
    weight(prefix + ".w1", width, hidden);
    bias(prefix + ".b1", hidden);
    weight(prefix + ".w2", hidden, width);
    bias(prefix + ".b2", width);
  }

  void unit(const std::string& prefix, int kv_cols, const PerceiverConfig& cfg) {
    gain(prefix + ".cross.ln_q.gain", cfg.latent_dim);
    bias(prefix + ".cross.ln_q.bias", cfg.latent_dim);
    gain(prefix + ".cross.ln_kv.gain", kv_cols);
    bias(prefix + ".cross.ln_kv.bias", kv_cols);
    for (int k = 0; k < cfg.cross_heads; ++k) {
      weight(h(prefix + ".cross.q", k), cfg.latent_dim, cfg.head_dim);
      weight(h(prefix + ".cross.k", k), kv_cols, cfg.head_dim);
      weight(h(prefix + ".cross.v", k), kv_cols, cfg.head_dim);
    }
    weight(prefix + ".cross.out", cfg.cross_heads * cfg.head_dim, cfg.latent_dim);
    ffn(prefix + ".cross.ffn", cfg.latent_dim, cfg.ffn_hidden);
    for (int di = 0; di < cfg.depth; ++di) {
      const std::string sp = d(prefix + ".self", di);
      gain(sp + ".ln.gain", cfg.latent_dim);
      bias(sp + ".ln.bias", cfg.latent_dim);
      for (int k = 0; k < cfg.self_heads; ++k) {
        weight(h(sp + ".q", k), cfg.latent_dim, cfg.head_dim);
        weight(h(sp + ".k", k), cfg.latent_dim, cfg.head_dim);
        weight(h(sp + ".v", k), cfg.latent_dim, cfg.head_dim);
      }
      weight(sp + ".out", cfg.self_heads * cfg.head_dim, cfg.latent_dim);
      ffn(sp + ".ffn", cfg.latent_dim, cfg.ffn_hidden);
    }
  }

  void two_layer_head(const std::string& prefix, int in, int hidden, int out) {
    weight(prefix + ".w1", in, hidden);
    bias(prefix + ".b1", hidden);
    weight(prefix + ".w2", hidden, out);
    bias(prefix + ".b2", out);
  }
};

}  // namespace

Model Model::init(Registry reg, PerceiverConfig cfg, std::uint64_t seed) {
  reg.validate();
  cfg.validate();
  Model m;
  m.registry = std::move(reg);
  m.config = cfg;
  m.init_seed = seed;
  Rng rng(seed);
  Init init{m.params, rng};

  init.unit("enc1", m.registry.padded_cols(), cfg);
  init.unit("enc2", m.registry.padded_cols(), cfg);
  init.unit("pair", cfg.latent_dim, cfg);
  m.params.emplace("latent0", Matrix::gaussian(rng, cfg.latent_rows, cfg.latent_dim, 0.02));
  for (std::size_t t = 0; t < m.registry.tasks.size(); ++t) {
    const TaskInfo& task = m.registry.tasks[t];
    const int n_pairs =
        static_cast<int>(task.modalities.size()) * (static_cast<int>(task.modalities.size()) - 1);
    init.two_layer_head("head.t" + std::to_string(t), cfg.latent_dim, cfg.latent_dim,
                        task.n_classes);
    init.two_layer_head("pairhead.t" + std::to_string(t), n_pairs * cfg.latent_dim,
                        cfg.latent_dim, task.n_classes);
  }
  return m;
}

const Matrix& Model::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw ConfigError("model: unknown parameter " + name);
  return it->second;
}

std::set<std::string> Model::stage1_params() const {
  std::set<std::string> out;
  for (const auto& [name, _] : params)
    if (name.rfind("enc1.", 0) == 0 || name.rfind("pair.", 0) == 0 ||
        name.rfind("pairhead.", 0) == 0 || name == "latent0")
      out.insert(name);
  return out;
}

std::set<std::string> Model::stage2_params() const {
  std::set<std::string> out;
  for (const auto& [name, _] : params)
    if (name.rfind("enc2.", 0) == 0 || name.rfind("head.", 0) == 0) out.insert(name);
  return out;
}

NodeId ParamBinder::operator()(const std::string& name) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  const bool rg = trainable_ != nullptr && trainable_->count(name) > 0;
  NodeId id = tape_.input(model_.param(name), rg);
  ids_.emplace(name, id);
  return id;
}

namespace {

NodeId attention(Tape& t, ParamBinder& bind, const std::string& prefix, int heads, int head_dim,
                 NodeId q_src, NodeId kv_src, NodeId residual, ForwardProbe* probe) {
  std::vector<NodeId> head_outs;
  head_outs.reserve(heads);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (int k = 0; k < heads; ++k) {
    NodeId q = t.matmul(q_src, bind(h(prefix + ".q", k)));
    NodeId key = t.matmul(kv_src, bind(h(prefix + ".k", k)));
    NodeId v = t.matmul(kv_src, bind(h(prefix + ".v", k)));
    NodeId scores = t.scale(t.matmul_nt(q, key), inv_sqrt_d);
    NodeId probs = t.softmax_rows(scores);
    if (probe) probe->attention_probs.push_back(t.value(probs));
    head_outs.push_back(t.matmul(probs, v));
  }
  NodeId cat = heads == 1 ? head_outs[0] : t.concat_cols(head_outs);
  NodeId proj = t.matmul(cat, bind(prefix + ".out"));
  return t.add(residual, proj);
}

NodeId ffn_block(Tape& t, ParamBinder& bind, const std::string& prefix, double eps, NodeId x) {
  NodeId ln = t.layer_norm_rows(x, bind(prefix + ".ln.gain"), bind(prefix + ".ln.bias"), eps);
  NodeId h1 = t.gelu(t.add_row_broadcast(t.matmul(ln, bind(prefix + ".w1")), bind(prefix + ".b1")));
  NodeId h2 = t.add_row_broadcast(t.matmul(h1, bind(prefix + ".w2")), bind(prefix + ".b2"));
  return t.add(x, h2);
}

}  // namespace

NodeId unit_forward(Tape& t, ParamBinder& bind, const std::string& prefix,
                    const PerceiverConfig& cfg, NodeId input, NodeId latent, ForwardProbe* probe) {
  if (probe) ++probe->unit_invocations;
  NodeId q_ln = t.layer_norm_rows(latent, bind(prefix + ".cross.ln_q.gain"),
                                  bind(prefix + ".cross.ln_q.bias"), cfg.ln_eps);
  NodeId kv_ln = t.layer_norm_rows(input, bind(prefix + ".cross.ln_kv.gain"),
                                   bind(prefix + ".cross.ln_kv.bias"), cfg.ln_eps);
  NodeId x = attention(t, bind, prefix + ".cross", cfg.cross_heads, cfg.head_dim, q_ln, kv_ln,
                       latent, probe);
  x = ffn_block(t, bind, prefix + ".cross.ffn", cfg.ln_eps, x);
  for (int di = 0; di < cfg.depth; ++di) {
    const std::string sp = d(prefix + ".self", di);
    NodeId ln = t.layer_norm_rows(x, bind(sp + ".ln.gain"), bind(sp + ".ln.bias"), cfg.ln_eps);
    x = attention(t, bind, sp, cfg.self_heads, cfg.head_dim, ln, ln, x, probe);
    x = ffn_block(t, bind, sp + ".ffn", cfg.ln_eps, x);
  }
  return x;
}

NodeId encode_first(Tape& t, ParamBinder& bind, const Model& m, const Matrix& raw, int modality,
                    ForwardProbe* probe) {
  NodeId x = t.input(m.registry.pad_and_embed(raw, modality));
  return unit_forward(t, bind, "enc1", m.config, x, bind("latent0"), probe);
}

NodeId encode_second(Tape& t, ParamBinder& bind, const Model& m, const Matrix& raw, int modality,
                     NodeId latent_in, ForwardProbe* probe) {
  NodeId x = t.input(m.registry.pad_and_embed(raw, modality));
  NodeId out = unit_forward(t, bind, "enc2", m.config, x, latent_in, probe);
  return t.take_last_row(out);
}

NodeId task_head_logits(Tape& t, ParamBinder& bind, const Model& m, int task, NodeId pooled) {
  const std::string p = "head.t" + std::to_string(task);
  NodeId h1 = t.gelu(t.add_row_broadcast(t.matmul(pooled, bind(p + ".w1")), bind(p + ".b1")));
  return t.add_row_broadcast(t.matmul(h1, bind(p + ".w2")), bind(p + ".b2"));
}

NodeId pairwise_logits(Tape& t, ParamBinder& bind, const Model& m, int task,
                       const std::vector<std::pair<int, NodeId>>& latents, ForwardProbe* probe) {
  if (latents.size() < 2) throw ConfigError("pairwise_logits: need at least two latents");
  std::vector<std::pair<int, NodeId>> sorted = latents;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<NodeId> pooled;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      if (i == j) continue;
      NodeId out = unit_forward(t, bind, "pair", m.config, sorted[i].second, sorted[j].second,
                                probe);
      pooled.push_back(t.take_last_row(out));
    }
  NodeId cat = pooled.size() == 1 ? pooled[0] : t.concat_cols(pooled);
  const std::string p = "pairhead.t" + std::to_string(task);
  NodeId h1 = t.gelu(t.add_row_broadcast(t.matmul(cat, bind(p + ".w1")), bind(p + ".b1")));
  return t.add_row_broadcast(t.matmul(h1, bind(p + ".w2")), bind(p + ".b2"));
}

Matrix infer_latent(const Model& m, const Matrix& raw, int modality) {
  Tape t(false);
  ParamBinder bind(t, m);
  return t.value(encode_first(t, bind, m, raw, modality));
}

Matrix infer_unimodal_scores(const Model& m, int task, const Matrix& raw, int modality,
                             const Matrix& latent_in) {
  Tape t(false);
  ParamBinder bind(t, m);
  NodeId latent = t.input(latent_in);
  NodeId pooled = encode_second(t, bind, m, raw, modality, latent);
  NodeId logits = task_head_logits(t, bind, m, task, pooled);
  return t.value(t.softmax_rows(logits));
}

Matrix infer_pairwise_scores(const Model& m, int task,
                             const std::vector<std::pair<int, Matrix>>& latents,
                             ForwardProbe* probe) {
  Tape t(false);
  ParamBinder bind(t, m);
  std::vector<std::pair<int, NodeId>> nodes;
  nodes.reserve(latents.size());
  for (const auto& [mod, latent] : latents) nodes.emplace_back(mod, t.input(latent));
  NodeId logits = pairwise_logits(t, bind, m, task, nodes, probe);
  return t.value(t.softmax_rows(logits));
}

}  // namespace mulsim::perceiver
