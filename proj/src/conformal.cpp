#include "mulsim/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mulsim/error.hpp"

namespace mulsim::conformal {

double nonconformity(const std::vector<double>& softmax, int label) {
  if (label < 0 || label >= static_cast<int>(softmax.size()))
    throw ConfigError("nonconformity: label out of range");
  return 1.0 - softmax[label];
}

double calibrate_quantile(const std::vector<double>& scores, double alpha) {
  if (scores.empty()) throw ConfigError("calibrate_quantile: empty calibration set");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("calibrate_quantile: alpha not in (0,1)");
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double raw_rank = std::ceil((static_cast<double>(n) + 1.0) * (1.0 - alpha));
  std::size_t rank = static_cast<std::size_t>(raw_rank);
  if (rank > n) rank = n;
  if (rank < 1) rank = 1;
  return sorted[rank - 1];
}

std::vector<int> prediction_set(const std::vector<double>& softmax, double q_hat) {
  if (softmax.empty()) throw ConfigError("prediction_set: empty score vector");
  std::vector<int> set;
  const double threshold = 1.0 - q_hat;
  for (std::size_t k = 0; k < softmax.size(); ++k)
    if (softmax[k] > threshold) set.push_back(static_cast<int>(k));
  if (set.empty()) {
    int best = 0;
    for (std::size_t k = 1; k < softmax.size(); ++k)
      if (softmax[k] > softmax[best]) best = static_cast<int>(k);
    set.push_back(best);
  }
  return set;
}

double coverage(const std::vector<std::vector<int>>& sets, const std::vector<int>& labels) {
  if (sets.size() != labels.size() || sets.empty())
    throw ConfigError("coverage: sets and labels must align and be non-empty");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    if (std::find(sets[i].begin(), sets[i].end(), labels[i]) != sets[i].end()) ++hit;
  return static_cast<double>(hit) / static_cast<double>(sets.size());
}

double adaptive_threshold(const std::vector<double>& correct_max_scores, double alpha2) {
  if (correct_max_scores.empty())
    throw ConfigError("adaptive_threshold: no correctly classified calibration samples");
  if (!(alpha2 >= 0.0 && alpha2 <= 1.0))
    throw ConfigError("adaptive_threshold: alpha2 not in [0,1]");
  std::vector<double> sorted = correct_max_scores;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(alpha2 * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

double CalibrationArtifact::quantile_for(int task, int modality) const {
  for (const auto& q : quantiles)
    if (q.task == task && q.modality == modality) return q.q_hat;
  throw ConfigError("calibration artifact: no quantile for task " + std::to_string(task) +
                    " modality " + std::to_string(modality));
}

double CalibrationArtifact::threshold_for(int task, const std::string& combiner) const {
  for (const auto& t : thresholds)
    if (t.task == task && t.combiner == combiner) return t.q_e;
  throw ConfigError("calibration artifact: no threshold for task " + std::to_string(task) +
                    " combiner " + combiner);
}

void CalibrationArtifact::save(const std::string& path) const {
  nlohmann::json j;
  j["quantiles"] = nlohmann::json::array();
  for (const auto& q : quantiles)
    j["quantiles"].push_back({{"task", q.task},
                              {"modality", q.modality},
                              {"alpha", q.alpha},
                              {"q_hat", q.q_hat},
                              {"n_cal", q.n_cal}});
  j["thresholds"] = nlohmann::json::array();
  for (const auto& t : thresholds)
    j["thresholds"].push_back(
        {{"task", t.task}, {"combiner", t.combiner}, {"alpha2", t.alpha2}, {"q_e", t.q_e}});
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("calibration artifact: cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
}

CalibrationArtifact CalibrationArtifact::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("calibration artifact: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("calibration artifact " + path + ": parse failure: " + e.what());
  }
  CalibrationArtifact art;
  try {
    for (const auto& q : j.at("quantiles"))
      art.quantiles.push_back({q.at("task").get<int>(), q.at("modality").get<int>(),
                               q.at("alpha").get<double>(), q.at("q_hat").get<double>(),
                               q.at("n_cal").get<int>()});
    for (const auto& t : j.at("thresholds"))
      art.thresholds.push_back({t.at("task").get<int>(), t.at("combiner").get<std::string>(),
                                t.at("alpha2").get<double>(), t.at("q_e").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error("calibration artifact " + path + ": missing field: " + e.what());
  }
  return art;
}

}  // namespace mulsim::conformal
