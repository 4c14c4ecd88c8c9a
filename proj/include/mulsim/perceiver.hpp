#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mulsim/tape.hpp"

namespace mulsim::perceiver {

using tensor::Matrix;
using tensor::NodeId;
using tensor::Tape;

struct ModalityInfo {
  int rows = 0;
  int cols = 0;
};

struct TaskInfo {
  std::vector<int> modalities;  // ascending modality ids
  int n_classes = 0;
};

// Shared description of every modality and task the deployment can see. All
// encoders consume inputs padded to one global shape derived from it.
struct Registry {
  std::vector<ModalityInfo> modalities;  // id = index
  std::vector<TaskInfo> tasks;           // id = index
  int fourier_bands = 2;

  void validate() const;
  int n_modalities() const { return static_cast<int>(modalities.size()); }
  int max_rows() const;
  int max_raw_cols() const;
  int padded_cols() const;  // max_raw_cols + n_modalities + 2 * fourier_bands

  // [raw | one-hot modality | sin/cos position features | zero padding],
  // rows zero-padded to max_rows.
  Matrix pad_and_embed(const Matrix& raw, int modality_id) const;
};

struct PerceiverConfig {
  int latent_rows = 4;
  int latent_dim = 8;
  int cross_heads = 1;
  int self_heads = 2;
  int head_dim = 8;
  int ffn_hidden = 16;
  int depth = 1;
  double ln_eps = 1e-5;

  static PerceiverConfig desk();
  static PerceiverConfig paper_scale();
  void validate() const;
};

// Captures attention rows and invocation counts during a forward pass; used
// by tests and by cost accounting.
struct ForwardProbe {
  std::vector<Matrix> attention_probs;
  int unit_invocations = 0;
};

struct Model {
  Registry registry;
  PerceiverConfig config;
  std::map<std::string, Matrix> params;
  std::uint64_t init_seed = 0;

  static Model init(Registry reg, PerceiverConfig cfg, std::uint64_t seed);

  const Matrix& param(const std::string& name) const;
  std::set<std::string> stage1_params() const;  // first encoder, shared latent, pair unit, pair heads
  std::set<std::string> stage2_params() const;  // second encoder, per-task heads
};

// Lazily registers model parameters as tape inputs. Parameters named in the
// trainable set get gradients; everything else enters frozen.
class ParamBinder {
 public:
  ParamBinder(Tape& tape, const Model& model, const std::set<std::string>* trainable = nullptr)
      : tape_(tape), model_(model), trainable_(trainable) {}

  NodeId operator()(const std::string& name);
  const std::map<std::string, NodeId>& bound() const { return ids_; }

 private:
  Tape& tape_;
  const Model& model_;
  const std::set<std::string>* trainable_;
  std::map<std::string, NodeId> ids_;
};

// One asymmetric attention unit: cross attention (queries from the latent,
// keys/values from the input) plus a latent self-attention stack, each with
// pre-norm residual feed-forward blocks. Output shape is always
// (latent_rows x latent_dim) regardless of the input row count.
NodeId unit_forward(Tape& t, ParamBinder& bind, const std::string& prefix,
                    const PerceiverConfig& cfg, NodeId input, NodeId latent,
                    ForwardProbe* probe = nullptr);

NodeId encode_first(Tape& t, ParamBinder& bind, const Model& m, const Matrix& raw, int modality,
                    ForwardProbe* probe = nullptr);
// Continues from a latent produced by the first encoder; returns the pooled
// row of length latent_dim.
NodeId encode_second(Tape& t, ParamBinder& bind, const Model& m, const Matrix& raw, int modality,
                     NodeId latent_in, ForwardProbe* probe = nullptr);
NodeId task_head_logits(Tape& t, ParamBinder& bind, const Model& m, int task, NodeId pooled);
// Runs the pair unit over every ordered pair of latents (lexicographic by
// modality id), pools each result, and classifies the concatenation.
NodeId pairwise_logits(Tape& t, ParamBinder& bind, const Model& m, int task,
                       const std::vector<std::pair<int, NodeId>>& latents,
                       ForwardProbe* probe = nullptr);

// Inference wrappers (no gradient recording).
Matrix infer_latent(const Model& m, const Matrix& raw, int modality);
Matrix infer_unimodal_scores(const Model& m, int task, const Matrix& raw, int modality,
                             const Matrix& latent_in);
Matrix infer_pairwise_scores(const Model& m, int task,
                             const std::vector<std::pair<int, Matrix>>& latents,
                             ForwardProbe* probe = nullptr);

}  // namespace mulsim::perceiver
