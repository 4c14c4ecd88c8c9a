#include "mulsim/synthetic.hpp"

#include <algorithm>

#include "mulsim/error.hpp"
#include "mulsim/rng.hpp"

namespace mulsim {

void Split::validate(std::size_t n) const {
  std::vector<char> seen(n, 0);
  const auto check = [&](const std::vector<int>& idx) {
    for (int i : idx) {
      if (i < 0 || static_cast<std::size_t>(i) >= n)
        throw ConfigError("split index out of range");
      if (seen[static_cast<std::size_t>(i)]++)
        throw ConfigError("split ranges overlap");
    }
  };
  check(train);
  check(cal);
  check(test);
}

Split Split::contiguous(int n_train, int n_cal, int n_test) {
  if (n_train < 0 || n_cal < 0 || n_test < 0)
    throw ConfigError("split sizes must be non-negative");
  Split s;
  int k = 0;
  for (int i = 0; i < n_train; ++i) s.train.push_back(k++);
  for (int i = 0; i < n_cal; ++i) s.cal.push_back(k++);
  for (int i = 0; i < n_test; ++i) s.test.push_back(k++);
  return s;
}

namespace bench {

void SyntheticTaskSpec::validate() const {
  if (n_classes < 2) throw ConfigError("synthetic task: need at least 2 classes");
  if (modalities.empty()) throw ConfigError("synthetic task: need at least one modality");
  for (const auto& m : modalities) {
    if (m.rows <= 0 || m.cols <= 0)
      throw ConfigError("synthetic task: modality shape must be positive");
    if (m.informativeness < 0.0 || m.informativeness > 1.0)
      throw ConfigError("synthetic task: informativeness must lie in [0,1]");
    if (m.noise_sigma < 0.0) throw ConfigError("synthetic task: noise_sigma must be >= 0");
  }
  if (n_train <= 0 || n_cal <= 0 || n_test <= 0)
    throw ConfigError("synthetic task: split sizes must be positive");
}

GeneratedTask generate_task(const SyntheticTaskSpec& spec, std::uint64_t data_seed) {
  spec.validate();
  GeneratedTask out;
  perceiver::TaskInfo task;
  task.n_classes = spec.n_classes;
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    out.registry.modalities.push_back({spec.modalities[m].rows, spec.modalities[m].cols});
    task.modalities.push_back(static_cast<int>(m));
  }
  out.registry.tasks.push_back(task);
  out.registry.validate();

  Rng proto_rng(Rng::mix(spec.seed, 0x70726f74));  // prototype stream
  std::vector<std::vector<tensor::Matrix>> protos(static_cast<std::size_t>(spec.n_classes));
  for (auto& per_class : protos)
    for (const auto& m : spec.modalities)
      per_class.push_back(tensor::Matrix::gaussian(proto_rng, m.rows, m.cols, 1.0));

  Rng noise_rng(Rng::mix(data_seed, 0x6e6f6973));  // sample noise stream
  const int n = spec.n_train + spec.n_cal + spec.n_test;
  out.data.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.task = 0;
    s.label = i % spec.n_classes;
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
      const auto& ms = spec.modalities[m];
      tensor::Matrix x(ms.rows, ms.cols);
      const tensor::Matrix& p = protos[static_cast<std::size_t>(s.label)][m];
      for (int j = 0; j < ms.rows * ms.cols; ++j)
        x.data()[j] = p.data()[j] * ms.informativeness + ms.noise_sigma * noise_rng.normal();
      s.inputs.push_back(std::move(x));
    }
    out.data.samples.push_back(std::move(s));
  }
  out.split = Split::contiguous(spec.n_train, spec.n_cal, spec.n_test);
  out.split.validate(out.data.samples.size());
  return out;
}

SyntheticTaskSpec two_modality_spec(double info_weak, double info_strong) {
  SyntheticTaskSpec spec;
  spec.modalities = {{4, 4, info_weak, 0.3}, {4, 4, info_strong, 0.3}};
  return spec;
}

std::vector<Sample> gather(const Dataset& d, const std::vector<int>& idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(d.samples[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace bench
}  // namespace mulsim
