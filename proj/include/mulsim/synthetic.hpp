#pragma once

#include <cstdint>
#include <vector>

#include "mulsim/data.hpp"
#include "mulsim/perceiver.hpp"

namespace mulsim::bench {

struct ModalitySpec {
  int rows = 4;
  int cols = 4;
  double informativeness = 0.8;  // in [0,1]: 0 = pure noise, 1 = full prototype
  double noise_sigma = 0.3;
};

struct SyntheticTaskSpec {
  int n_classes = 4;
  std::vector<ModalitySpec> modalities;
  int n_train = 192;
  int n_cal = 96;
  int n_test = 96;
  std::uint64_t seed = 7;

  void validate() const;
};

struct GeneratedTask {
  perceiver::Registry registry;  // single task 0 over modalities 0..k-1
  Dataset data;                  // train ++ cal ++ test, labels round-robin
  Split split;
};

// Class prototypes are Gaussian matrices drawn from spec.seed; each sample is
// prototype * informativeness + N(0, noise_sigma). Sample noise comes from
// data_seed so one task can be re-sampled without moving the prototypes.
GeneratedTask generate_task(const SyntheticTaskSpec& spec, std::uint64_t data_seed);

inline GeneratedTask generate_task(const SyntheticTaskSpec& spec) {
  return generate_task(spec, spec.seed);
}

// The shapes used throughout the tests: a weak and a strong modality.
SyntheticTaskSpec two_modality_spec(double info_weak = 0.3, double info_strong = 0.9);

std::vector<Sample> gather(const Dataset& d, const std::vector<int>& idx);

}  // namespace mulsim::bench
