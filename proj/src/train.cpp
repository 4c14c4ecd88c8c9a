#include "mulsim/train.hpp"

#include <algorithm>

#include "mulsim/adamw.hpp"
#include "mulsim/kernels.hpp"

namespace mulsim::perceiver {

namespace {

void accumulate_grads(const Tape& t, const ParamBinder& bind, const std::set<std::string>& names,
                      std::map<std::string, tensor::Matrix>& acc) {
  for (const auto& [name, id] : bind.bound()) {
    if (!names.count(name)) continue;
    const tensor::Matrix& g = t.grad(id);
    auto it = acc.try_emplace(name, g.rows(), g.cols()).first;
    kernels::active().add(g.size(), it->second.data(), g.data(), it->second.data());
  }
}

void shuffle(std::vector<int>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
    std::swap(v[i], v[rng.uniform_int(i + 1)]);
}

template <typename LossFn>
StageResult run_epochs(Model& m, const std::vector<int>& indices, const Schedule& s,
                       const std::set<std::string>& trainable, LossFn&& sample_loss) {
  if (indices.empty()) throw ConfigError("train: empty index set");
  tensor::AdamW opt(s.lr, s.weight_decay);
  StageResult result;
  std::vector<int> order = indices;
  for (int epoch = 0; epoch < s.epochs; ++epoch) {
    Rng rng(Rng::mix(s.seed, static_cast<std::uint64_t>(epoch)));
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += s.batch) {
      const std::size_t stop = std::min(order.size(), start + s.batch);
      std::map<std::string, tensor::Matrix> grads;
      for (std::size_t i = start; i < stop; ++i)
        epoch_loss += sample_loss(order[i], trainable, grads);
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& [_, g] : grads) kernels::active().scale(g.size(), inv, g.data(), g.data());
      opt.step(m.params, grads);
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

}  // namespace

StageResult train_stage_one(Model& m, const Dataset& data, const std::vector<int>& indices,
                            const Schedule& s) {
  const std::set<std::string> trainable = m.stage1_params();
  auto sample_loss = [&](int idx, const std::set<std::string>& names,
                         std::map<std::string, tensor::Matrix>& grads) {
    const Sample& sample = data.samples[idx];
    const TaskInfo& task = m.registry.tasks[sample.task];
    Tape t;
    ParamBinder bind(t, m, &trainable);
    std::vector<std::pair<int, NodeId>> latents;
    for (std::size_t k = 0; k < task.modalities.size(); ++k)
      latents.emplace_back(task.modalities[k],
                           encode_first(t, bind, m, sample.inputs[k], task.modalities[k]));
    NodeId logits = pairwise_logits(t, bind, m, sample.task, latents);
    NodeId loss = t.softmax_cross_entropy(logits, sample.label);
    t.backward(loss);
    accumulate_grads(t, bind, names, grads);
    return t.value(loss).at(0, 0);
  };
  return run_epochs(m, indices, s, trainable, sample_loss);
}

StageResult train_stage_two(Model& m, const Dataset& data, const std::vector<int>& indices,
                            const Schedule& s) {
  const std::set<std::string> trainable = m.stage2_params();
  // Latents from the frozen first encoder, one per (sample, modality slot).
  std::map<int, std::vector<tensor::Matrix>> latents;
  for (int idx : indices) {
    const Sample& sample = data.samples[idx];
    const TaskInfo& task = m.registry.tasks[sample.task];
    std::vector<tensor::Matrix> ls;
    for (std::size_t k = 0; k < task.modalities.size(); ++k)
      ls.push_back(infer_latent(m, sample.inputs[k], task.modalities[k]));
    latents.emplace(idx, std::move(ls));
  }
  auto sample_loss = [&](int idx, const std::set<std::string>& names,
                         std::map<std::string, tensor::Matrix>& grads) {
    const Sample& sample = data.samples[idx];
    const TaskInfo& task = m.registry.tasks[sample.task];
    const auto& ls = latents.at(idx);
    Tape t;
    ParamBinder bind(t, m, &trainable);
    NodeId total = -1;
    for (std::size_t k = 0; k < task.modalities.size(); ++k) {
      NodeId latent = t.input(ls[k]);
      NodeId pooled = encode_second(t, bind, m, sample.inputs[k], task.modalities[k], latent);
      NodeId loss = t.softmax_cross_entropy(task_head_logits(t, bind, m, sample.task, pooled),
                                            sample.label);
      total = total < 0 ? loss : t.add(total, loss);
    }
    NodeId mean = t.scale(total, 1.0 / static_cast<double>(task.modalities.size()));
    t.backward(mean);
    accumulate_grads(t, bind, names, grads);
    return t.value(mean).at(0, 0);
  };
  return run_epochs(m, indices, s, trainable, sample_loss);
}

}  // namespace mulsim::perceiver
