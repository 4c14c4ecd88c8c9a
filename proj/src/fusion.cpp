#include "mulsim/fusion.hpp"

#include <cmath>

#include "mulsim/error.hpp"

namespace mulsim::fusion {

std::string combiner_name(Combiner c) { return c == Combiner::kEqualWeight ? "ewc" : "sssc"; }

Combiner combiner_from_name(const std::string& name) {
  if (name == "ewc") return Combiner::kEqualWeight;
  if (name == "sssc") return Combiner::kSetSize;
  throw ConfigError("unknown combiner: " + name);
}

namespace {
void check_scores(const std::vector<std::vector<double>>& scores) {
  if (scores.empty()) throw ConfigError("fuse: no modality scores");
  for (const auto& s : scores)
    if (s.size() != scores[0].size() || s.empty())
      throw ConfigError("fuse: score vectors must share one non-empty length");
}
}  // namespace

std::vector<double> fuse_equal_weight(const std::vector<std::vector<double>>& scores) {
  check_scores(scores);
  std::vector<double> out(scores[0].size(), 0.0);
  for (const auto& s : scores)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += s[k];
  return out;
}

std::vector<double> fuse_set_size(const std::vector<std::vector<double>>& scores,
                                  const std::vector<int>& set_sizes, double beta) {
  check_scores(scores);
  if (set_sizes.size() != scores.size())
    throw ConfigError("fuse_set_size: one set size per modality required");
  if (beta < 1.0) throw ConfigError("fuse_set_size: beta must be >= 1");
  double denom = 0.0;
  std::vector<double> out(scores[0].size(), 0.0);
  for (std::size_t m = 0; m < scores.size(); ++m) {
    if (set_sizes[m] < 1) throw ConfigError("fuse_set_size: set sizes must be >= 1");
    const double w = 1.0 / std::pow(static_cast<double>(set_sizes[m]), beta);
    denom += w;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * scores[m][k];
  }
  for (double& v : out) v /= denom;
  return out;
}

std::vector<double> fuse(Combiner c, const std::vector<std::vector<double>>& scores,
                         const std::vector<int>& set_sizes, double beta) {
  return c == Combiner::kEqualWeight ? fuse_equal_weight(scores)
                                     : fuse_set_size(scores, set_sizes, beta);
}

int argmax_class(const std::vector<double>& scores) {
  if (scores.empty()) throw ConfigError("argmax_class: empty scores");
  int best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = static_cast<int>(k);
  return best;
}

int majority_vote(const std::vector<int>& votes, int n_classes, Rng& rng) {
  if (votes.empty()) throw ConfigError("majority_vote: no votes");
  std::vector<int> counts(n_classes, 0);
  for (int v : votes) {
    if (v < 0 || v >= n_classes) throw ConfigError("majority_vote: vote out of range");
    ++counts[v];
  }
  int best = 0;
  for (int k = 1; k < n_classes; ++k)
    if (counts[k] > counts[best]) best = k;
  std::vector<int> tied;
  for (int k = 0; k < n_classes; ++k)
    if (counts[k] == counts[best]) tied.push_back(k);
  if (tied.size() == 1) return tied[0];
  return tied[rng.uniform_int(static_cast<int>(tied.size()))];
}

double routing_statistic(const std::vector<double>& fused, Combiner c, int n_modalities) {
  if (n_modalities < 1) throw ConfigError("routing_statistic: need at least one modality");
  if (fused.empty()) throw ConfigError("routing_statistic: empty fused vector");
  double mx = fused[0];
  for (double v : fused) mx = std::max(mx, v);
  return c == Combiner::kEqualWeight ? mx / static_cast<double>(n_modalities) : mx;
}

bool route_simple(double statistic, double q_e) { return statistic >= q_e; }

}  // namespace mulsim::fusion
