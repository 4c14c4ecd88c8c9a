#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mulsim/metrics.hpp"
#include "mulsim/perceiver.hpp"
#include "mulsim/tape.hpp"

using namespace mulsim;
using namespace mulsim::tensor;
using namespace mulsim::metrics;

namespace {

// Reference two-modality task payloads: 240 kbits of raw samples across the
// task, 23 kbits of latent per modality, at the default cost constants.
constexpr double kRawBits = 240e3;
constexpr double kLatentBits = 2 * 23e3;
constexpr int kModalities = 2;

Approach argmin_latency(double rate_bps) {
  CostModel cm;
  cm.rate_bps = rate_bps;
  const Approach all[] = {Approach::kA1, Approach::kA2, Approach::kA3,
                          Approach::kA4};
  Approach best = all[0];
  double best_t = latency_s(all[0], kModalities, kRawBits, kLatentBits, cm);
  for (Approach a : all) {
    double t = latency_s(a, kModalities, kRawBits, kLatentBits, cm);
    if (t < best_t) {
      best_t = t;
      best = a;
    }
  }
  return best;
}

perceiver::Registry two_modality_registry() {
  perceiver::Registry reg;
  reg.modalities = {{3, 7}, {5, 4}};
  reg.tasks = {{{0, 1}, 4}};
  reg.fourier_bands = 2;
  return reg;
}

}  // namespace

TEST_CASE("on-device latency and energy match the worked two-modality numbers") {
  CostModel cm;  // defaults: t_b = 5e8, c_iot = 3.62e9, gamma_iot = 0.813e9
  const double tau2 = latency_s(Approach::kA2, kModalities, kRawBits, kLatentBits, cm);
  const double e2 = energy_j(Approach::kA2, kModalities, kRawBits, kLatentBits, cm);

  CHECK(tau2 == 2.0 * 5e8 / 3.62e9);
  CHECK(e2 == 2.0 * 5e8 * 2.0 / 0.813e9);
  // Headline figures quoted to five digits.
  CHECK(tau2 == doctest::Approx(0.27624).epsilon(1e-4));
  CHECK(e2 == doctest::Approx(2.4600).epsilon(1e-4));

  // Independent of rate and payload size: nothing leaves the device.
  CostModel slow = cm;
  slow.rate_bps = 1e3;
  CHECK(latency_s(Approach::kA2, kModalities, 1.0, 1.0, slow) == tau2);
  CHECK(energy_j(Approach::kA2, kModalities, 7e9, 7e9, slow) == e2);
}

TEST_CASE("offload-everything latency splits into airtime plus server compute") {
  CostModel cm;  // rate 1 Mbps
  const double tau1 = latency_s(Approach::kA1, kModalities, kRawBits, kLatentBits, cm);
  const double server = pipeline_flops(cm, kModalities) / cm.server.c_s;

  CHECK(tau1 == kRawBits / 1e6 + server);
  CHECK(tau1 == doctest::Approx(0.2447).epsilon(1e-3));
  // 240 ms of airtime dominates; server compute is ~4.7 ms.
  CHECK(server == doctest::Approx(2e9 / 428e9));

  const double e1 = energy_j(Approach::kA1, kModalities, kRawBits, kLatentBits, cm);
  const double radio = e1 - pipeline_flops(cm, kModalities) / cm.server.gamma_s;
  // 0.1 W for 0.24 s of transmission = 24 mJ.
  CHECK(radio == doctest::Approx(0.024).epsilon(1e-12));
}

TEST_CASE("split-computing path charges one device stage, link time, and pair work") {
  CostModel cm;
  const double tau3 = latency_s(Approach::kA3, kModalities, kRawBits, kLatentBits, cm);
  const double e3 = energy_j(Approach::kA3, kModalities, kRawBits, kLatentBits, cm);

  CHECK(tau3 == 5e8 / 3.62e9 + kLatentBits / 1e6 + 1.0 * 2.0 * 5e8 / 428e9);
  CHECK(e3 == 5e8 * 2.0 / 0.813e9 + kLatentBits * 0.1 / 1e6 + 2.0 * 1.0 * 5e8 / 2.13e9);
  // Raw payload size is irrelevant to the split path.
  CHECK(latency_s(Approach::kA3, kModalities, 1e9, kLatentBits, cm) == tau3);
}

TEST_CASE("fully-simple adaptive routing collapses to the on-device cost") {
  CostModel cm;
  const double tau2 = latency_s(Approach::kA2, kModalities, kRawBits, kLatentBits, cm);
  const double e4 = energy_j(Approach::kA4, kModalities, kRawBits, kLatentBits, cm);

  CHECK(latency_s(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, 1.0) == tau2);
  CHECK(energy_j(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, 1.0) == e4);

  // All-complex pays the on-device pass plus the full escalation.
  const double tau5_0 = latency_s(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, 0.0);
  CHECK(tau5_0 == doctest::Approx(tau2 + kLatentBits / 1e6 + 2.0 * 5e8 / 428e9));
  const double e5_0 = energy_j(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, 0.0);
  CHECK(e5_0 == doctest::Approx(e4 + kLatentBits * 0.1 / 1e6 + 2.0 * 5e8 / 2.13e9));
}

TEST_CASE("adaptive cost is linear and non-increasing in the simple fraction") {
  CostModel cm;
  double prev_t = std::numeric_limits<double>::infinity();
  double prev_e = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 10; ++i) {
    const double p_h = i / 10.0;
    const double t = latency_s(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, p_h);
    const double e = energy_j(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, p_h);
    CHECK(t <= prev_t);
    CHECK(e <= prev_e);
    prev_t = t;
    prev_e = e;
  }
  // Midpoint sits exactly between the endpoints.
  const double t0 = latency_s(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, 0.0);
  const double t1 = latency_s(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, 1.0);
  const double th = latency_s(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, 0.5);
  CHECK(th == doctest::Approx(0.5 * (t0 + t1)).epsilon(1e-14));
}

TEST_CASE("adaptive routing requires a valid simple fraction") {
  CostModel cm;
  CHECK_THROWS_AS(latency_s(Approach::kA5, kModalities, kRawBits, kLatentBits, cm),
                  ConfigError);
  CHECK_THROWS_AS(energy_j(Approach::kA5, kModalities, kRawBits, kLatentBits, cm),
                  ConfigError);
  CHECK_THROWS_AS(latency_s(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, -0.1),
                  ConfigError);
  CHECK_THROWS_AS(energy_j(Approach::kA5, kModalities, kRawBits, kLatentBits, cm, 1.5),
                  ConfigError);
  // Other approaches never look at it.
  CHECK_NOTHROW(latency_s(Approach::kA1, kModalities, kRawBits, kLatentBits, cm, 42.0));
}

TEST_CASE("latency-optimal approach crosses over with link rate") {
  // Slow link: stay on device. Mid: ship latents. Fast: ship raw samples.
  Approach slow = argmin_latency(0.2e6);
  CHECK((slow == Approach::kA2 || slow == Approach::kA4));
  CHECK(argmin_latency(1e6) == Approach::kA3);
  CHECK(argmin_latency(3e6) == Approach::kA1);
}

TEST_CASE("pipeline work counts per-modality encodes plus all ordered pairs") {
  CostModel cm;
  CHECK(pipeline_flops(cm, 1) == cm.t_b);
  CHECK(pipeline_flops(cm, 2) == 4.0 * cm.t_b);
  CHECK(pipeline_flops(cm, 2) == 2e9);
  CHECK(pipeline_flops(cm, 3) == 9.0 * cm.t_b);
}

TEST_CASE("cost model rejects non-positive constants and modality counts") {
  CostModel cm;
  CHECK_NOTHROW(cm.validate());

  CostModel bad = cm;
  bad.rate_bps = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cm;
  bad.t_b = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cm;
  bad.device.c_iot = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cm;
  bad.server.gamma_s = -3.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  CHECK_THROWS_AS(latency_s(Approach::kA2, 0, kRawBits, kLatentBits, cm), ConfigError);
  CHECK_THROWS_AS(energy_j(Approach::kA2, -1, kRawBits, kLatentBits, cm), ConfigError);
}

TEST_CASE("approach names round-trip and bad labels are rejected") {
  for (Approach a : {Approach::kA1, Approach::kA2, Approach::kA3, Approach::kA4,
                     Approach::kA5})
    CHECK(parse_approach(approach_name(a)) == a);
  CHECK(parse_approach("a3") == Approach::kA3);
  CHECK_THROWS_AS(parse_approach("A6"), ConfigError);
  CHECK_THROWS_AS(parse_approach(""), ConfigError);
  CHECK_THROWS_AS(parse_approach("A5 "), ConfigError);
}

TEST_CASE("analytic multiply count equals the instrumented forward pass") {
  perceiver::Registry reg = two_modality_registry();
  reg.validate();

  perceiver::PerceiverConfig cfg = perceiver::PerceiverConfig::desk();
  perceiver::Model model = perceiver::Model::init(reg, cfg, 77);

  const int rows = reg.max_rows();
  const int cols = reg.padded_cols();
  Rng rng(5);
  Matrix raw = Matrix::uniform(rng, 3, 7, -1.0, 1.0);
  Matrix padded = reg.pad_and_embed(raw, 0);
  REQUIRE(padded.rows() == rows);
  REQUIRE(padded.cols() == cols);

  Tape t(false);
  perceiver::ParamBinder bind(t, model);
  NodeId x = t.input(padded);
  perceiver::unit_forward(t, bind, "enc1", cfg, x, bind("latent0"));
  CHECK(t.multiply_count() == unit_multiply_count(cfg, rows, cols));

  // Deeper stacks keep matching (self-attention blocks repeat).
  perceiver::PerceiverConfig deep = cfg;
  deep.depth = 3;
  perceiver::Model model3 = perceiver::Model::init(reg, deep, 78);
  Tape t3(false);
  perceiver::ParamBinder bind3(t3, model3);
  NodeId x3 = t3.input(padded);
  perceiver::unit_forward(t3, bind3, "enc1", deep, x3, bind3("latent0"));
  CHECK(t3.multiply_count() == unit_multiply_count(deep, rows, cols));
}

TEST_CASE("multiply count is convex in latent rows, linear in input rows") {
  perceiver::PerceiverConfig cfg = perceiver::PerceiverConfig::desk();
  const int cols = 13;

  // Doubling the latent width (head and FFN widths track it) more than
  // doubles the work: projections are quadratic in that width.
  perceiver::PerceiverConfig wide = cfg;
  wide.latent_dim = 2 * cfg.latent_dim;
  wide.head_dim = 2 * cfg.head_dim;
  wide.ffn_hidden = 2 * cfg.ffn_hidden;
  CHECK(unit_multiply_count(wide, 5, cols) > 2 * unit_multiply_count(cfg, 5, cols));

  // Self-attention scores are latents x latents, so work grows quadratically
  // in the latent row count: increments themselves increase.
  perceiver::PerceiverConfig l4 = cfg, l8 = cfg, l12 = cfg;
  l4.latent_rows = 4;
  l8.latent_rows = 8;
  l12.latent_rows = 12;
  const std::int64_t g1 = unit_multiply_count(l8, 5, cols) - unit_multiply_count(l4, 5, cols);
  const std::int64_t g2 = unit_multiply_count(l12, 5, cols) - unit_multiply_count(l8, 5, cols);
  CHECK(g2 > g1);

  // Only the cross-attention key/value side sees the input rows, so the
  // count is affine in them: equal row increments give equal work increments.
  const std::int64_t c4 = unit_multiply_count(cfg, 4, cols);
  const std::int64_t c8 = unit_multiply_count(cfg, 8, cols);
  const std::int64_t c12 = unit_multiply_count(cfg, 12, cols);
  CHECK(c12 - c8 == c8 - c4);
  CHECK(c8 > c4);

  CHECK_THROWS_AS(unit_multiply_count(cfg, 0, cols), ConfigError);
  CHECK_THROWS_AS(unit_multiply_count(cfg, 5, -1), ConfigError);
}
