#include "mulsim/metrics.hpp"

#include <cmath>

#include "mulsim/error.hpp"

namespace mulsim {

const char* approach_name(Approach a) {
  switch (a) {
    case Approach::kA1: return "A1";
    case Approach::kA2: return "A2";
    case Approach::kA3: return "A3";
    case Approach::kA4: return "A4";
    case Approach::kA5: return "A5";
  }
  return "?";
}

Approach parse_approach(const std::string& text) {
  if (text.size() == 2 && (text[0] == 'A' || text[0] == 'a') && text[1] >= '1' &&
      text[1] <= '5')
    return static_cast<Approach>(text[1] - '1');
  throw ConfigError("unknown approach '" + text + "' (expected A1..A5)");
}

namespace metrics {

void CostModel::validate() const {
  if (!(device.c_iot > 0) || !(device.gamma_iot > 0) || !(device.p_t > 0) ||
      !(server.c_s > 0) || !(server.gamma_s > 0) || !(t_b > 0) || !(rate_bps > 0))
    throw ConfigError("cost model: all profile constants must be positive");
}

double pipeline_flops(const CostModel& cm, int n_modalities) {
  const double n = n_modalities;
  return cm.t_b * n + cm.t_b * (n - 1.0) * n;
}

namespace {

void require_ph(Approach a, double p_h) {
  if (std::isnan(p_h)) throw ConfigError("p_h is required for A5");
  if (p_h < 0.0 || p_h > 1.0) throw ConfigError("p_h must lie in [0, 1]");
  (void)a;
}

}  // namespace

double latency_s(Approach a, int n_modalities, double raw_bits_total,
                 double latent_bits_total, const CostModel& cm, double p_h) {
  cm.validate();
  if (n_modalities <= 0) throw ConfigError("latency: n_modalities must be positive");
  const double n = n_modalities;
  const double r = cm.rate_bps;
  switch (a) {
    case Approach::kA1:
      return raw_bits_total / r + pipeline_flops(cm, n_modalities) / cm.server.c_s;
    case Approach::kA2:
    case Approach::kA4:
      return 2.0 * cm.t_b / cm.device.c_iot;
    case Approach::kA3:
      return cm.t_b / cm.device.c_iot + latent_bits_total / r +
             (n - 1.0) * n * cm.t_b / cm.server.c_s;
    case Approach::kA5: {
      require_ph(a, p_h);
      const double simple = 2.0 * cm.t_b / cm.device.c_iot;
      const double complex_path = 2.0 * cm.t_b / cm.device.c_iot +
                                  latent_bits_total / r +
                                  (n - 1.0) * n * cm.t_b / cm.server.c_s;
      return p_h * simple + (1.0 - p_h) * complex_path;
    }
  }
  throw ConfigError("latency: unknown approach");
}

double energy_j(Approach a, int n_modalities, double raw_bits_total,
                double latent_bits_total, const CostModel& cm, double p_h) {
  cm.validate();
  if (n_modalities <= 0) throw ConfigError("energy: n_modalities must be positive");
  const double n = n_modalities;
  const double r = cm.rate_bps;
  switch (a) {
    case Approach::kA1:
      return cm.device.p_t * (raw_bits_total / r) +
             pipeline_flops(cm, n_modalities) / cm.server.gamma_s;
    case Approach::kA2:
    case Approach::kA4:
      return 2.0 * cm.t_b * n / cm.device.gamma_iot;
    case Approach::kA3:
      return cm.t_b * n / cm.device.gamma_iot +
             latent_bits_total * cm.device.p_t / r +
             n * (n - 1.0) * cm.t_b / cm.server.gamma_s;
    case Approach::kA5: {
      require_ph(a, p_h);
      const double simple = 2.0 * cm.t_b * n / cm.device.gamma_iot;
      const double complex_path = 2.0 * cm.t_b * n / cm.device.gamma_iot +
                                  latent_bits_total * cm.device.p_t / r +
                                  (n - 1.0) * n * cm.t_b / cm.server.gamma_s;
      return p_h * simple + (1.0 - p_h) * complex_path;
    }
  }
  throw ConfigError("energy: unknown approach");
}

std::int64_t unit_multiply_count(const perceiver::PerceiverConfig& cfg,
                                 int input_rows, int input_cols) {
  cfg.validate();
  if (input_rows <= 0 || input_cols <= 0)
    throw ConfigError("unit_multiply_count: input shape must be positive");
  const std::int64_t lp = cfg.latent_rows, la = cfg.latent_dim, hd = cfg.head_dim;
  const std::int64_t hidden = cfg.ffn_hidden;
  const std::int64_t rows = input_rows, cols = input_cols;

  // ffn on an lp x la activation: pre-norm + two matmuls + gelu
  const std::int64_t ffn = 3 * lp * la          // layer norm
                           + lp * la * hidden   // w1
                           + 3 * lp * hidden    // gelu
                           + lp * hidden * la;  // w2

  // attention with queries lp x qdim, keys/values kvr x kvd
  const auto attn = [&](std::int64_t heads, std::int64_t qdim, std::int64_t kvr,
                        std::int64_t kvd) {
    const std::int64_t per_head = lp * qdim * hd     // q projection
                                  + 2 * kvr * kvd * hd  // k and v projections
                                  + lp * hd * kvr    // scores
                                  + 2 * lp * kvr     // scale + softmax
                                  + lp * kvr * hd;   // probs * v
    return heads * per_head + lp * (heads * hd) * la;  // heads + out projection
  };

  std::int64_t total = 3 * lp * la + 3 * rows * cols;  // the two cross pre-norms
  total += attn(cfg.cross_heads, la, rows, cols) + ffn;
  for (int di = 0; di < cfg.depth; ++di) {
    total += 3 * lp * la;  // shared self-attention pre-norm
    total += attn(cfg.self_heads, la, lp, la) + ffn;
  }
  return total;
}

}  // namespace metrics
}  // namespace mulsim
