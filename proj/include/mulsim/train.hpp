#pragma once

#include "mulsim/data.hpp"
#include "mulsim/perceiver.hpp"

namespace mulsim::perceiver {

struct Schedule {
  int epochs = 150;
  int batch = 16;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::uint64_t seed = 1;
};

struct StageResult {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

// Stage one: trains the first encoder, the shared initial latent, the pair
// unit, and the per-task pair classifiers on fused predictions.
StageResult train_stage_one(Model& m, const Dataset& data, const std::vector<int>& indices,
                            const Schedule& s);

// Stage two: freezes everything from stage one and trains the second encoder
// plus the per-task heads on per-modality predictions. First-encoder latents
// are precomputed once since they cannot change.
StageResult train_stage_two(Model& m, const Dataset& data, const std::vector<int>& indices,
                            const Schedule& s);

}  // namespace mulsim::perceiver
