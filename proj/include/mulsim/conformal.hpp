#pragma once

#include <string>
#include <vector>

#include "mulsim/matrix.hpp"

namespace mulsim::conformal {

// Nonconformity score of a labeled sample: one minus the softmax mass the
// model puts on the true class.
double nonconformity(const std::vector<double>& softmax, int label);

// Finite-sample quantile of calibration scores: the ceil((n+1)(1-alpha))-th
// smallest value, clamped to the largest score when the rank exceeds n.
double calibrate_quantile(const std::vector<double>& scores, double alpha);

// Classes whose softmax score exceeds 1 - q_hat; falls back to the argmax
// singleton instead of returning an empty set.
std::vector<int> prediction_set(const std::vector<double>& softmax, double q_hat);

// Fraction of labels contained in their prediction set.
double coverage(const std::vector<std::vector<int>>& sets, const std::vector<int>& labels);

// Nearest-rank alpha2-percentile of the combined-score maxima of correctly
// classified calibration samples. Used as the routing threshold.
double adaptive_threshold(const std::vector<double>& correct_max_scores, double alpha2);

struct QuantileRecord {
  int task = 0;
  int modality = 0;
  double alpha = 0.1;
  double q_hat = 0.0;
  int n_cal = 0;
};

struct ThresholdRecord {
  int task = 0;
  std::string combiner;  // "ewc" or "sssc"
  double alpha2 = 0.3;
  double q_e = 0.0;
};

struct CalibrationArtifact {
  std::vector<QuantileRecord> quantiles;
  std::vector<ThresholdRecord> thresholds;

  double quantile_for(int task, int modality) const;
  double threshold_for(int task, const std::string& combiner) const;

  void save(const std::string& path) const;
  static CalibrationArtifact load(const std::string& path);
};

}  // namespace mulsim::conformal
