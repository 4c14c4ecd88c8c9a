#pragma once

#include <vector>

#include "mulsim/matrix.hpp"

namespace mulsim {

struct Sample {
  int task = 0;
  std::vector<tensor::Matrix> inputs;  // indexed by position in the task's modality list
  int label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
};

// Index-based split; ranges must be pairwise disjoint.
struct Split {
  std::vector<int> train, cal, test;
  void validate(std::size_t n) const;
  static Split contiguous(int n_train, int n_cal, int n_test);
};

}  // namespace mulsim
