#pragma once

#include <string>
#include <vector>

#include "mulsim/rng.hpp"

namespace mulsim::fusion {

enum class Combiner { kEqualWeight, kSetSize };

std::string combiner_name(Combiner c);        // "ewc" / "sssc"
Combiner combiner_from_name(const std::string& name);

// Elementwise sum of per-modality softmax vectors (unnormalized).
std::vector<double> fuse_equal_weight(const std::vector<std::vector<double>>& scores);

// Convex combination with weights proportional to 1/|set|^beta: small
// prediction sets (confident modalities) dominate.
std::vector<double> fuse_set_size(const std::vector<std::vector<double>>& scores,
                                  const std::vector<int>& set_sizes, double beta);

std::vector<double> fuse(Combiner c, const std::vector<std::vector<double>>& scores,
                         const std::vector<int>& set_sizes, double beta);

// Lowest index wins ties.
int argmax_class(const std::vector<double>& scores);

// Modal label; ties are broken uniformly at random with the provided RNG.
int majority_vote(const std::vector<int>& votes, int n_classes, Rng& rng);

// Statistic compared against the routing threshold: max of the fused vector,
// divided by the modality count for the unnormalized equal-weight combiner.
double routing_statistic(const std::vector<double>& fused, Combiner c, int n_modalities);

// A sample stays on the lightweight path when its statistic reaches q_e.
bool route_simple(double statistic, double q_e);

}  // namespace mulsim::fusion
