#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "mulsim/checkpoint.hpp"
#include "mulsim/perceiver.hpp"
#include "mulsim/synthetic.hpp"
#include "mulsim/train.hpp"

using namespace mulsim;
using namespace mulsim::perceiver;

namespace {

Registry two_modality_registry() {
  Registry reg;
  reg.modalities = {{3, 7}, {5, 4}};
  reg.tasks = {{{0, 1}, 4}};
  reg.fourier_bands = 2;
  return reg;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_CASE("pad_and_embed layout: raw block, one-hot, position features, padding") {
  Registry reg = two_modality_registry();
  reg.validate();
  // max raw cols 7, two modalities, two bands -> 7 + 2 + 4 = 13 columns.
  CHECK(reg.padded_cols() == 13);
  CHECK(reg.max_rows() == 5);

  Rng rng(42);
  Matrix raw = Matrix::uniform(rng, 5, 4, -1.0, 1.0);
  Matrix out = reg.pad_and_embed(raw, 1);
  CHECK(out.rows() == 5);
  CHECK(out.cols() == 13);

  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(out.at(i, j) == raw.at(i, j));
    // One-hot sits right after this modality's raw columns.
    CHECK(out.at(i, 4 + 0) == 0.0);
    CHECK(out.at(i, 4 + 1) == 1.0);
    // Two Fourier bands: frequency 1 then fmax, each sin/cos of pi*f*t.
    const double t = i / 4.0;
    const double fmax = std::max(2.0, 5 / 2.0);
    const int base = 4 + 2;
    CHECK(out.at(i, base + 0) == doctest::Approx(std::sin(M_PI * t)).epsilon(1e-12));
    CHECK(out.at(i, base + 1) == doctest::Approx(std::cos(M_PI * t)).epsilon(1e-12));
    CHECK(out.at(i, base + 2) == doctest::Approx(std::sin(M_PI * fmax * t)).epsilon(1e-12));
    CHECK(out.at(i, base + 3) == doctest::Approx(std::cos(M_PI * fmax * t)).epsilon(1e-12));
    // Everything past the feature block is zero padding.
    for (int j = base + 4; j < 13; ++j) CHECK(out.at(i, j) == 0.0);
  }

  // The narrower modality pads out to the same shape, with zero-filled rows.
  Matrix raw0 = Matrix::uniform(rng, 3, 7, -1.0, 1.0);
  Matrix out0 = reg.pad_and_embed(raw0, 0);
  CHECK(out0.rows() == 5);
  CHECK(out0.cols() == 13);
  CHECK(out0.at(0, 7 + 0) == 1.0);
  CHECK(out0.at(0, 7 + 1) == 0.0);
  for (int j = 0; j < 13; ++j) {
    CHECK(out0.at(3, j) == 0.0);
    CHECK(out0.at(4, j) == 0.0);
  }

  CHECK_THROWS_AS(reg.pad_and_embed(raw, 0), ShapeError);       // wrong dims for modality 0
  CHECK_THROWS_AS(reg.pad_and_embed(raw, 7), ConfigError);      // unknown modality
}

TEST_CASE("registry validation rejects malformed task lists") {
  Registry reg = two_modality_registry();
  reg.tasks[0].modalities = {1, 0};  // must be ascending
  CHECK_THROWS_AS(reg.validate(), ConfigError);
  reg.tasks[0].modalities = {0, 5};  // unknown modality
  CHECK_THROWS_AS(reg.validate(), ConfigError);
  reg.tasks[0].modalities = {0, 1};
  reg.tasks[0].n_classes = 1;
  CHECK_THROWS_AS(reg.validate(), ConfigError);
}

TEST_CASE("encoder output shape is independent of the input modality") {
  Registry reg = two_modality_registry();
  Model m = Model::init(reg, PerceiverConfig::desk(), 5);
  Rng rng(1);
  Matrix l0 = infer_latent(m, Matrix::uniform(rng, 3, 7, -1.0, 1.0), 0);
  Matrix l1 = infer_latent(m, Matrix::uniform(rng, 5, 4, -1.0, 1.0), 1);
  CHECK(l0.rows() == m.config.latent_rows);
  CHECK(l0.cols() == m.config.latent_dim);
  CHECK(l1.rows() == m.config.latent_rows);
  CHECK(l1.cols() == m.config.latent_dim);
  CHECK_FALSE(bit_equal(l0, l1));
}

TEST_CASE("attention rows are probability distributions") {
  Registry reg = two_modality_registry();
  Model m = Model::init(reg, PerceiverConfig::desk(), 9);
  Rng rng(2);
  Matrix raw = Matrix::uniform(rng, 3, 7, -1.0, 1.0);

  Tape t(false);
  ParamBinder bind(t, m);
  ForwardProbe probe;
  encode_first(t, bind, m, raw, 0, &probe);
  CHECK(probe.attention_probs.size() > 0);
  for (const Matrix& p : probe.attention_probs) {
    for (int i = 0; i < p.rows(); ++i) {
      double sum = 0.0;
      for (int j = 0; j < p.cols(); ++j) {
        CHECK(p.at(i, j) >= 0.0);
        sum += p.at(i, j);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("pairwise fusion visits every ordered pair once") {
  Registry reg;
  reg.modalities = {{3, 7}, {5, 4}, {2, 2}};
  reg.tasks = {{{0, 1, 2}, 4}};
  Model m = Model::init(reg, PerceiverConfig::desk(), 13);
  Rng rng(3);
  std::vector<std::pair<int, Matrix>> latents;
  for (int mod = 0; mod < 3; ++mod) {
    Matrix raw = Matrix::uniform(rng, reg.modalities[mod].rows, reg.modalities[mod].cols, -1, 1);
    latents.emplace_back(mod, infer_latent(m, raw, mod));
  }

  ForwardProbe probe;
  Matrix scores = infer_pairwise_scores(m, 0, latents, &probe);
  CHECK(probe.unit_invocations == 3 * 2);  // ordered pairs of three latents
  CHECK(scores.rows() == 1);
  CHECK(scores.cols() == 4);
  double sum = 0.0;
  for (int j = 0; j < 4; ++j) {
    CHECK(scores.at(0, j) >= 0.0);
    sum += scores.at(0, j);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  // Input order must not matter: pairs are walked by modality id, not by the
  // caller's ordering.
  std::vector<std::pair<int, Matrix>> shuffled = {latents[2], latents[0], latents[1]};
  Matrix scores2 = infer_pairwise_scores(m, 0, shuffled);
  CHECK(max_abs_diff(scores, scores2) == 0.0);

  // The pair classifier consumes the concatenation of every pooled pair, so
  // feeding a subset of the task's modalities is a shape contract violation.
  std::vector<std::pair<int, Matrix>> two = {latents[0], latents[2]};
  CHECK_THROWS_AS(infer_pairwise_scores(m, 0, two), ShapeError);

  Registry reg2 = two_modality_registry();
  Model m2 = Model::init(reg2, PerceiverConfig::desk(), 14);
  std::vector<std::pair<int, Matrix>> pair = {
      {0, infer_latent(m2, Matrix::uniform(rng, 3, 7, -1, 1), 0)},
      {1, infer_latent(m2, Matrix::uniform(rng, 5, 4, -1, 1), 1)}};
  ForwardProbe probe2;
  infer_pairwise_scores(m2, 0, pair, &probe2);
  CHECK(probe2.unit_invocations == 2);
}

TEST_CASE("unimodal scores are a probability row and depend on the latent") {
  Registry reg = two_modality_registry();
  Model m = Model::init(reg, PerceiverConfig::desk(), 17);
  Rng rng(4);
  Matrix raw = Matrix::uniform(rng, 5, 4, -1.0, 1.0);
  Matrix latent = infer_latent(m, raw, 1);
  Matrix s = infer_unimodal_scores(m, 0, raw, 1, latent);
  CHECK(s.rows() == 1);
  CHECK(s.cols() == 4);
  double sum = 0.0;
  for (int j = 0; j < 4; ++j) sum += s.at(0, j);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  Matrix other = infer_unimodal_scores(m, 0, raw, 1, Matrix::full(4, 8, 0.1));
  CHECK(max_abs_diff(s, other) > 0.0);
}

TEST_CASE("model init is seed-deterministic and inference is bit-stable") {
  Registry reg = two_modality_registry();
  Model a = Model::init(reg, PerceiverConfig::desk(), 21);
  Model b = Model::init(reg, PerceiverConfig::desk(), 21);
  Model c = Model::init(reg, PerceiverConfig::desk(), 22);
  REQUIRE(a.params.size() == b.params.size());
  bool any_diff_c = false;
  for (const auto& [name, value] : a.params) {
    CHECK(bit_equal(value, b.params.at(name)));
    if (!bit_equal(value, c.params.at(name))) any_diff_c = true;
  }
  CHECK(any_diff_c);

  Rng rng(5);
  Matrix raw = Matrix::uniform(rng, 3, 7, -1.0, 1.0);
  CHECK(bit_equal(infer_latent(a, raw, 0), infer_latent(a, raw, 0)));
}

TEST_CASE("stage parameter sets partition the model") {
  Registry reg = two_modality_registry();
  Model m = Model::init(reg, PerceiverConfig::desk(), 29);
  auto s1 = m.stage1_params();
  auto s2 = m.stage2_params();
  CHECK(!s1.empty());
  CHECK(!s2.empty());
  CHECK(s1.size() + s2.size() == m.params.size());
  for (const auto& name : s1) {
    CHECK(m.params.count(name) == 1);
    CHECK(s2.count(name) == 0);
  }
  for (const auto& name : s2) CHECK(m.params.count(name) == 1);
}

TEST_CASE("training stage two leaves stage-one parameters bit-identical") {
  bench::SyntheticTaskSpec spec = bench::two_modality_spec();
  spec.n_train = 24;
  spec.n_cal = 4;
  spec.n_test = 4;
  bench::GeneratedTask task = bench::generate_task(spec);

  Model m = Model::init(task.registry, PerceiverConfig::desk(), 33);
  Schedule s;
  s.epochs = 2;
  s.batch = 8;
  train_stage_one(m, task.data, task.split.train, s);

  std::map<std::string, Matrix> frozen;
  for (const auto& name : m.stage1_params()) frozen[name] = m.params.at(name);
  StageResult r2 = train_stage_two(m, task.data, task.split.train, s);
  CHECK(r2.epoch_loss.size() == 2);
  for (const auto& [name, value] : frozen) CHECK(bit_equal(value, m.params.at(name)));
}

TEST_CASE("training reduces the loss on an easy task") {
  bench::SyntheticTaskSpec spec = bench::two_modality_spec(0.9, 0.9);
  spec.n_classes = 2;
  spec.n_train = 32;
  spec.n_cal = 4;
  spec.n_test = 4;
  for (auto& mod : spec.modalities) mod.noise_sigma = 0.05;
  bench::GeneratedTask task = bench::generate_task(spec);

  Model m = Model::init(task.registry, PerceiverConfig::desk(), 37);
  Schedule s;
  s.epochs = 10;
  s.batch = 8;
  s.lr = 3e-3;
  StageResult r = train_stage_one(m, task.data, task.split.train, s);
  REQUIRE(r.epoch_loss.size() == 10);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
}

TEST_CASE("checkpoint roundtrip preserves every tensor bit-for-bit") {
  Registry reg = two_modality_registry();
  Model m = Model::init(reg, PerceiverConfig::desk(), 41);
  const std::string path = "test_perceiver_ckpt.bin";
  save_model(m, path);
  Model back = load_model(path);

  CHECK(back.params.size() == m.params.size());
  for (const auto& [name, value] : m.params) CHECK(bit_equal(value, back.params.at(name)));
  CHECK(back.registry.n_modalities() == 2);
  CHECK(back.registry.tasks.size() == 1);
  CHECK(back.registry.tasks[0].n_classes == 4);
  CHECK(back.config.latent_rows == m.config.latent_rows);
  CHECK(back.config.latent_dim == m.config.latent_dim);
  CHECK(back.init_seed == m.init_seed);

  Rng rng(6);
  Matrix raw = Matrix::uniform(rng, 3, 7, -1.0, 1.0);
  CHECK(bit_equal(infer_latent(m, raw, 0), infer_latent(back, raw, 0)));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loading fails loudly on corruption") {
  Registry reg = two_modality_registry();
  Model m = Model::init(reg, PerceiverConfig::desk(), 43);
  const std::string path = "test_perceiver_corrupt.bin";
  save_model(m, path);

  // Truncate to half length.
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_model(path), Error);

  // Wrong magic.
  save_model(m, path);
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_model(path), Error);

  CHECK_THROWS_AS(load_model("no_such_checkpoint.bin"), Error);
  std::remove(path.c_str());
}
