#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mulsim/experiment.hpp"

using namespace mulsim;
using namespace mulsim::tensor;
using namespace mulsim::bench;

namespace {

std::string tmp_path(const char* stem) {
  return std::string("/tmp/mulsim_bench_") + stem;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool datasets_equal(const GeneratedTask& a, const GeneratedTask& b) {
  if (a.data.samples.size() != b.data.samples.size()) return false;
  for (std::size_t i = 0; i < a.data.samples.size(); ++i) {
    const Sample& x = a.data.samples[i];
    const Sample& y = b.data.samples[i];
    if (x.label != y.label || x.inputs.size() != y.inputs.size()) return false;
    for (std::size_t m = 0; m < x.inputs.size(); ++m)
      if (!bit_equal(x.inputs[m], y.inputs[m])) return false;
  }
  return true;
}

SyntheticTaskSpec small_spec() {
  SyntheticTaskSpec spec = two_modality_spec();
  spec.n_train = 8;
  spec.n_cal = 8;
  spec.n_test = 8;
  return spec;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> f;
  std::string tok;
  std::stringstream ss(line);
  while (std::getline(ss, tok, ',')) f.push_back(tok);
  if (!line.empty() && line.back() == ',') f.push_back("");
  return f;
}

}  // namespace

TEST_CASE("task spec validation rejects degenerate settings") {
  SyntheticTaskSpec spec = small_spec();
  CHECK_NOTHROW(spec.validate());

  SyntheticTaskSpec bad = spec;
  bad.n_classes = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.modalities.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.modalities[0].rows = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.modalities[0].informativeness = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.modalities[1].noise_sigma = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.n_test = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("generated task has round-robin labels and a contiguous disjoint split") {
  SyntheticTaskSpec spec = small_spec();
  GeneratedTask task = generate_task(spec);

  CHECK(task.registry.tasks.size() == 1);
  CHECK(task.registry.n_modalities() == 2);
  CHECK(task.data.samples.size() == 24);
  for (std::size_t i = 0; i < task.data.samples.size(); ++i) {
    CHECK(task.data.samples[i].label == static_cast<int>(i) % spec.n_classes);
    CHECK(task.data.samples[i].inputs.size() == 2);
    CHECK(task.data.samples[i].inputs[0].rows() == 4);
  }
  CHECK(task.split.train.size() == 8);
  CHECK(task.split.cal.front() == 8);
  CHECK(task.split.test.back() == 23);
  CHECK_NOTHROW(task.split.validate(task.data.samples.size()));

  Split overlap = task.split;
  overlap.cal.push_back(overlap.train.front());
  CHECK_THROWS_AS(overlap.validate(task.data.samples.size()), ConfigError);
  Split oob = task.split;
  oob.test.push_back(99);
  CHECK_THROWS_AS(oob.validate(task.data.samples.size()), ConfigError);

  std::vector<Sample> cal = gather(task.data, task.split.cal);
  CHECK(cal.size() == 8);
  CHECK(bit_equal(cal[0].inputs[0], task.data.samples[8].inputs[0]));
}

TEST_CASE("generation is deterministic; prototypes and noise use separate streams") {
  SyntheticTaskSpec spec = small_spec();

  CHECK(datasets_equal(generate_task(spec, 5), generate_task(spec, 5)));
  CHECK(!datasets_equal(generate_task(spec, 5), generate_task(spec, 6)));

  // Noise-free, fully informative samples are the class prototypes, so the
  // data seed stops mattering entirely.
  SyntheticTaskSpec pure = spec;
  for (auto& m : pure.modalities) {
    m.informativeness = 1.0;
    m.noise_sigma = 0.0;
  }
  CHECK(datasets_equal(generate_task(pure, 5), generate_task(pure, 6)));

  // Zero informativeness erases the prototypes: moving the prototype seed
  // changes nothing, while at nonzero informativeness it changes the data.
  SyntheticTaskSpec blank = spec;
  for (auto& m : blank.modalities) m.informativeness = 0.0;
  SyntheticTaskSpec blank2 = blank;
  blank2.seed = blank.seed + 17;
  CHECK(datasets_equal(generate_task(blank, 5), generate_task(blank2, 5)));

  SyntheticTaskSpec moved = spec;
  moved.seed = spec.seed + 17;
  CHECK(!datasets_equal(generate_task(spec, 5), generate_task(moved, 5)));
}

TEST_CASE("default two-modality task pairs a weak sensor with a strong one") {
  SyntheticTaskSpec spec = two_modality_spec();
  REQUIRE(spec.modalities.size() == 2);
  CHECK(spec.modalities[0].informativeness == 0.3);
  CHECK(spec.modalities[1].informativeness == 0.9);
  CHECK(spec.n_classes == 4);
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("SNR text accepts per-modality maps, bare numbers, and inf") {
  protocol::ChannelModel ch;
  apply_snr_text(ch, "0:10;1:30");
  CHECK(ch.snr_for(0) == 10.0);
  CHECK(ch.snr_for(1) == 30.0);
  CHECK(std::isinf(ch.snr_for(2)));  // untouched default

  protocol::ChannelModel comma;
  apply_snr_text(comma, "0:inf,1:25");
  CHECK(std::isinf(comma.snr_for(0)));
  CHECK(comma.snr_for(1) == 25.0);

  protocol::ChannelModel bare;
  apply_snr_text(bare, "12.5");
  CHECK(bare.snr_for(0) == 12.5);
  CHECK(bare.snr_for(7) == 12.5);

  protocol::ChannelModel keep;
  apply_snr_text(keep, "");
  CHECK(std::isinf(keep.snr_for(0)));

  protocol::ChannelModel bad;
  CHECK_THROWS_AS(apply_snr_text(bad, "abc"), ConfigError);
  CHECK_THROWS_AS(apply_snr_text(bad, "0:10;20"), ConfigError);
  CHECK_THROWS_AS(apply_snr_text(bad, "x:10"), ConfigError);

  perceiver::Registry reg;
  reg.modalities = {{4, 4}, {4, 4}};
  reg.tasks = {{{0, 1}, 4}};
  protocol::ChannelModel mapped;
  apply_snr_text(mapped, "0:10;1:30");
  CHECK(snr_map_text(mapped, reg, 0) == "0:10;1:30");
  protocol::ChannelModel open;
  CHECK(snr_map_text(open, reg, 0) == "0:inf;1:inf");
}

TEST_CASE("config files override defaults and malformed input is rejected") {
  const std::string path = tmp_path("cfg.json");
  write_text(path, R"({
    "task": {"n_classes": 3, "n_train": 12, "n_cal": 6, "n_test": 6,
             "modalities": [{"rows": 2, "cols": 3, "informativeness": 0.5}]},
    "train": {"epochs_stage1": 7, "lr": 0.01},
    "scenario": {"approach": "A5", "snr": 5, "beta": 2.0},
    "sweep": {"approaches": ["A2", "A3"], "seeds": [4, 5, 6]}
  })");
  ExperimentConfig cfg = ExperimentConfig::from_file(path);
  CHECK(cfg.task.n_classes == 3);
  CHECK(cfg.task.modalities.size() == 1);
  CHECK(cfg.task.modalities[0].cols == 3);
  CHECK(cfg.train.epochs_stage1 == 7);
  CHECK(cfg.train.lr == 0.01);
  CHECK(cfg.train.batch == 16);  // untouched default
  CHECK(cfg.scenario.approach == "A5");
  CHECK(cfg.scenario.snr == "5");
  CHECK(cfg.scenario.beta == 2.0);
  CHECK(cfg.sweep.approaches == std::vector<std::string>{"A2", "A3"});
  CHECK(cfg.sweep.seeds.size() == 3);
  std::remove(path.c_str());

  const std::string broken = tmp_path("broken.json");
  write_text(broken, "{ not json");
  try {
    ExperimentConfig::from_file(broken);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("malformed config") != std::string::npos);
  }
  std::remove(broken.c_str());

  const std::string badtype = tmp_path("badtype.json");
  write_text(badtype, R"({"train": {"epochs_stage1": "many"}})");
  CHECK_THROWS_AS(ExperimentConfig::from_file(badtype), ConfigError);
  std::remove(badtype.c_str());

  const std::string invalid = tmp_path("invalid.json");
  write_text(invalid, R"({"task": {"n_classes": 1}})");
  CHECK_THROWS_AS(ExperimentConfig::from_file(invalid), ConfigError);
  std::remove(invalid.c_str());

  CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/nope.json"), ConfigError);
}

TEST_CASE("csv lines round-trip rows and leave p_h blank when absent") {
  CHECK(csv_header() ==
        "task,approach,combiner,beta,alpha,alpha2,rate_bps,snr_map,accuracy,"
        "latency_s,energy_j,p_h,seed");

  ReportRow r;
  r.task = 0;
  r.approach = "A2";
  r.combiner = "sssc";
  r.beta = 1.5;
  r.alpha = 0.1;
  r.alpha2 = 0.3;
  r.rate_bps = 1e6;
  r.snr_map = "0:inf;1:inf";
  r.accuracy = 1.0 / 3.0;
  r.latency_s = 0.27624309392265195;
  r.energy_j = 2.4600246002460024;
  r.seed = 42;

  const std::string line = csv_line(r);
  auto f = split_fields(line);
  REQUIRE(f.size() == 13);
  CHECK(f[1] == "A2");
  CHECK(f[11] == "");  // NaN p_h prints as an empty field
  CHECK(f[12] == "42");

  ReportRow r5 = r;
  r5.approach = "A5";
  r5.p_h = 0.625;
  auto f5 = split_fields(csv_line(r5));
  CHECK(f5[11] == "0.625");

  const std::string path = tmp_path("roundtrip.csv");
  write_csv(path, {r, r5});
  auto rows = read_csv(path);
  std::remove(path.c_str());
  REQUIRE(rows.size() == 2);
  // Canonical order sorts A2 before A5.
  CHECK(rows[0].approach == "A2");
  CHECK(std::isnan(rows[0].p_h));
  CHECK(rows[1].p_h == 0.625);
  CHECK(rows[0].accuracy == doctest::Approx(r.accuracy).epsilon(1e-9));
  CHECK(rows[0].latency_s == doctest::Approx(r.latency_s).epsilon(1e-9));
  CHECK(rows[0].snr_map == r.snr_map);
  CHECK(rows[0].seed == 42);
}

TEST_CASE("csv writing is canonical: input order never changes the bytes") {
  std::vector<ReportRow> rows;
  for (int seed = 3; seed >= 1; --seed)
    for (const char* ap : {"A3", "A1", "A2"}) {
      ReportRow r;
      r.approach = ap;
      r.combiner = "ewc";
      r.snr_map = "0:inf";
      r.accuracy = seed * 0.1;
      r.seed = static_cast<std::uint64_t>(seed);
      rows.push_back(r);
    }

  const std::string p1 = tmp_path("order1.csv");
  const std::string p2 = tmp_path("order2.csv");
  write_csv(p1, rows);
  std::reverse(rows.begin(), rows.end());
  write_csv(p2, rows);
  const std::string b1 = slurp(p1);
  const std::string b2 = slurp(p2);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
  CHECK(b1 == b2);
  CHECK(b1.find(csv_header() + "\n") == 0);

  // Reader rejects foreign headers and short rows.
  const std::string bad = tmp_path("bad.csv");
  write_text(bad, "who,what\n1,2\n");
  CHECK_THROWS_AS(read_csv(bad), ConfigError);
  write_text(bad, csv_header() + "\n1,A2,ewc\n");
  CHECK_THROWS_AS(read_csv(bad), ConfigError);
  std::remove(bad.c_str());
  CHECK_THROWS_AS(read_csv("/nonexistent/rows.csv"), ConfigError);
}

TEST_CASE("sweep points are reproducible end to end") {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  cfg.task = small_spec();
  cfg.sweep.approaches = {"A1", "A2", "A3"};
  cfg.sweep.rates_bps = {1e6, 2e6};
  cfg.sweep.seeds = {1, 2};

  GeneratedTask task = build_task(cfg);
  perceiver::Model model =
      perceiver::Model::init(task.registry, perceiver::PerceiverConfig::desk(), 3);

  std::vector<ReportRow> rows = run_sweep(model, nullptr, task, cfg);
  CHECK(rows.size() == 3 * 2 * 2);
  for (const auto& r : rows) {
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
    CHECK(r.latency_s > 0.0);
    CHECK(r.energy_j > 0.0);
    CHECK(std::isnan(r.p_h));  // no adaptive rows in this sweep
    CHECK(r.snr_map == "0:inf;1:inf");
  }
  // Faster link, same approach/seed: offloading gets cheaper.
  double t_a1_fast = -1.0, t_a1_slow = -1.0;
  for (const auto& r : rows)
    if (r.approach == "A1" && r.seed == 1)
      (r.rate_bps == 1e6 ? t_a1_slow : t_a1_fast) = r.latency_s;
  CHECK(t_a1_fast < t_a1_slow);

  std::vector<ReportRow> again = run_sweep(model, nullptr, task, cfg);
  const std::string p1 = tmp_path("sweep1.csv");
  const std::string p2 = tmp_path("sweep2.csv");
  write_csv(p1, rows);
  write_csv(p2, again);
  const std::string b1 = slurp(p1);
  const std::string b2 = slurp(p2);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
  CHECK(b1 == b2);
}

TEST_CASE("report groups rows over seeds and prints mean and sample sd") {
  std::vector<ReportRow> rows;
  for (int seed = 1; seed <= 2; ++seed) {
    ReportRow r;
    r.approach = "A2";
    r.combiner = "ewc";
    r.snr_map = "0:inf";
    r.accuracy = seed == 1 ? 0.5 : 0.7;
    r.latency_s = 0.25;
    r.energy_j = 2.0;
    r.seed = static_cast<std::uint64_t>(seed);
    rows.push_back(r);
  }
  ReportRow a5;
  a5.approach = "A5";
  a5.combiner = "ewc";
  a5.snr_map = "0:inf";
  a5.accuracy = 0.9;
  a5.latency_s = 0.1;
  a5.energy_j = 1.0;
  a5.p_h = 0.75;
  a5.seed = 1;
  rows.push_back(a5);

  const std::string path = tmp_path("report.csv");
  write_report(path, rows);
  std::ifstream in(path);
  std::string header, line_a2, line_a5;
  std::getline(in, header);
  std::getline(in, line_a2);
  std::getline(in, line_a5);
  in.close();
  std::remove(path.c_str());

  CHECK(header == report_header());
  auto f2 = split_fields(line_a2);
  REQUIRE(f2.size() == 17);
  CHECK(f2[1] == "A2");
  CHECK(f2[8] == "2");  // n_seeds
  CHECK(std::stod(f2[9]) == doctest::Approx(0.6));
  CHECK(std::stod(f2[10]) == doctest::Approx(std::sqrt(0.02)));  // sample sd
  CHECK(std::stod(f2[11]) == doctest::Approx(0.25));
  CHECK(std::stod(f2[12]) == doctest::Approx(0.0));
  CHECK(f2[15] == "");  // no p_h for the on-device group
  CHECK(f2[16] == "");

  auto f5 = split_fields(line_a5);
  REQUIRE(f5.size() == 17);
  CHECK(f5[1] == "A5");
  CHECK(f5[8] == "1");
  CHECK(std::stod(f5[15]) == doctest::Approx(0.75));
  CHECK(std::stod(f5[16]) == doctest::Approx(0.0));  // single seed
}
