#pragma once

#include <cstdint>
#include <limits>

#include "mulsim/approach.hpp"
#include "mulsim/perceiver.hpp"

namespace mulsim::metrics {

// FLOP-work is measured in FLOPs, rates in FLOPs/s, efficiency in FLOPs/J.
struct DeviceProfile {
  double c_iot = 3.62e9;       // compute speed
  double gamma_iot = 0.813e9;  // energy efficiency
  double p_t = 0.1;            // transmit power, W
};

struct ServerProfile {
  double c_s = 428e9;
  double gamma_s = 2.13e9;
};

struct CostModel {
  DeviceProfile device;
  ServerProfile server;
  double t_b = 5e8;  // FLOPs for one encoder/cross-attention unit (all equal)
  double rate_bps = 1e6;

  void validate() const;
};

// Full multimodal pipeline work: |T| first-stage encodes plus |T|(|T|-1)
// pairwise cross-attention units.
double pipeline_flops(const CostModel& cm, int n_modalities);

inline constexpr double kNoPh = std::numeric_limits<double>::quiet_NaN();

// Closed-form end-to-end latency / energy per task sample. Bit totals are
// summed over the task's modalities. p_h (fraction routed simple) is
// required for A5 only.
double latency_s(Approach a, int n_modalities, double raw_bits_total,
                 double latent_bits_total, const CostModel& cm, double p_h = kNoPh);
double energy_j(Approach a, int n_modalities, double raw_bits_total,
                double latent_bits_total, const CostModel& cm, double p_h = kNoPh);

// Analytic scalar-multiply count for one Perceiver unit forward pass on an
// input of shape input_rows x input_cols. Matches the instrumented tape
// tally exactly: matmuls count m*k*n, scale/softmax r*c, layer norm and
// GELU 3*r*c each.
std::int64_t unit_multiply_count(const perceiver::PerceiverConfig& cfg,
                                 int input_rows, int input_cols);

}  // namespace mulsim::metrics
