#include <cstdio>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "mulsim/error.hpp"
#include "mulsim/experiment.hpp"

namespace {

using namespace mulsim;

struct Flags {
  std::string config, model, calib, out, trace;
  std::string approach, combiner, snr;
  double beta = 0, alpha = 0, alpha2 = 0, rate = 0;
  std::uint64_t seed = 0;
  bool from_scratch = false;

  CLI::Option *o_approach = nullptr, *o_combiner = nullptr, *o_beta = nullptr,
              *o_alpha = nullptr, *o_alpha2 = nullptr, *o_rate = nullptr,
              *o_snr = nullptr, *o_seed = nullptr;
};

bench::ExperimentConfig load_config(const Flags& f) {
  return f.config.empty() ? bench::ExperimentConfig::defaults()
                          : bench::ExperimentConfig::from_file(f.config);
}

void apply_scenario_flags(bench::ExperimentConfig& cfg, const Flags& f) {
  if (f.o_approach->count()) cfg.scenario.approach = f.approach;
  if (f.o_combiner->count()) cfg.scenario.combiner = f.combiner;
  if (f.o_beta->count()) cfg.scenario.beta = f.beta;
  if (f.o_alpha->count()) cfg.scenario.alpha = f.alpha;
  if (f.o_alpha2->count()) cfg.scenario.alpha2 = f.alpha2;
  if (f.o_rate->count()) cfg.scenario.rate_bps = f.rate;
  if (f.o_snr->count()) cfg.scenario.snr = f.snr;
  if (f.o_seed->count()) cfg.scenario.seed = f.seed;
}

perceiver::Model obtain_model(const bench::ExperimentConfig& cfg, const Flags& f,
                              const bench::GeneratedTask& task) {
  const std::string path = !f.model.empty() ? f.model : cfg.model_path;
  if (!path.empty()) return perceiver::load_model(path);
  if (!f.from_scratch)
    throw ConfigError(
        "no model checkpoint configured; pass --model, set model_path in the "
        "config, or use --from-scratch");
  std::fprintf(stderr, "training model from scratch (%d + %d epochs)...\n",
               cfg.train.epochs_stage1, cfg.train.epochs_stage2);
  return bench::train_model(task, cfg.train);
}

conformal::CalibrationArtifact obtain_calib(const bench::ExperimentConfig& cfg,
                                            const Flags& f,
                                            const perceiver::Model& model,
                                            const bench::GeneratedTask& task) {
  const std::string path = !f.calib.empty() ? f.calib : cfg.calib_path;
  if (!path.empty()) return conformal::CalibrationArtifact::load(path);
  return bench::calibrate_model(model, task, cfg.scenario.alpha, cfg.scenario.alpha2,
                                cfg.scenario.beta);
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "experiment config file (JSON)");
  f.o_seed = cmd->add_option("--seed", f.seed, "seed override");
}

void add_scenario(CLI::App* cmd, Flags& f) {
  f.o_approach = cmd->add_option("--approach", f.approach, "A1..A5");
  f.o_combiner = cmd->add_option("--combiner", f.combiner, "ewc or sssc");
  f.o_beta = cmd->add_option("--beta", f.beta, "set-size discount exponent (>= 1)");
  f.o_alpha = cmd->add_option("--alpha", f.alpha, "conformal miscoverage level");
  f.o_alpha2 = cmd->add_option("--alpha2", f.alpha2, "routing threshold percentile");
  f.o_rate = cmd->add_option("--rate", f.rate, "channel rate in bits/s");
  f.o_snr = cmd->add_option("--snr", f.snr,
                            "per-modality Es/N0 in dB: '0:10;1:30', or one value for all");
  cmd->add_option("--model", f.model, "model checkpoint path");
  cmd->add_option("--calib", f.calib, "calibration artifact path");
  cmd->add_flag("--from-scratch", f.from_scratch, "train in-process if no checkpoint");
}

int cmd_train(const Flags& f) {
  bench::ExperimentConfig cfg = load_config(f);
  if (f.o_seed->count()) cfg.train.seed = f.seed;
  const bench::GeneratedTask task = bench::build_task(cfg);
  std::fprintf(stderr, "training (%d + %d epochs, %zu train samples)...\n",
               cfg.train.epochs_stage1, cfg.train.epochs_stage2, task.split.train.size());
  const perceiver::Model model = bench::train_model(task, cfg.train);
  perceiver::save_model(model, f.out);
  std::printf("wrote %s\n", f.out.c_str());
  return 0;
}

int cmd_calibrate(const Flags& f) {
  bench::ExperimentConfig cfg = load_config(f);
  apply_scenario_flags(cfg, f);
  const bench::GeneratedTask task = bench::build_task(cfg);
  const perceiver::Model model = obtain_model(cfg, f, task);
  const auto art = bench::calibrate_model(model, task, cfg.scenario.alpha,
                                          cfg.scenario.alpha2, cfg.scenario.beta);
  art.save(f.out);
  std::printf("wrote %s (%zu quantiles, %zu thresholds)\n", f.out.c_str(),
              art.quantiles.size(), art.thresholds.size());
  return 0;
}

int cmd_simulate(const Flags& f) {
  bench::ExperimentConfig cfg = load_config(f);
  apply_scenario_flags(cfg, f);
  const bench::GeneratedTask task = bench::build_task(cfg);
  const perceiver::Model model = obtain_model(cfg, f, task);
  const auto art = obtain_calib(cfg, f, model, task);
  const protocol::Scenario sc = bench::make_scenario(cfg, model.registry);
  const bench::ReportRow row = bench::run_point(model, &art, task, sc);
  bench::write_csv(f.out, {row});
  if (!f.trace.empty()) {
    const auto test = bench::gather(task.data, task.split.test);
    const auto res = protocol::run_sample(model, &art, sc, test.at(0), 0);
    std::ofstream ts(f.trace, std::ios::binary);
    if (!ts) throw ConfigError("cannot open '" + f.trace + "' for writing");
    res.trace.export_lines(ts);
  }
  std::printf("wrote %s (accuracy %.4f, latency %.6g s, energy %.6g J)\n", f.out.c_str(),
              row.accuracy, row.latency_s, row.energy_j);
  return 0;
}

int cmd_sweep(const Flags& f) {
  bench::ExperimentConfig cfg = load_config(f);
  apply_scenario_flags(cfg, f);
  if (f.o_approach->count()) cfg.sweep.approaches = {f.approach};
  if (f.o_rate->count()) cfg.sweep.rates_bps = {f.rate};
  if (f.o_seed->count()) cfg.sweep.seeds = {f.seed};
  const bench::GeneratedTask task = bench::build_task(cfg);
  const perceiver::Model model = obtain_model(cfg, f, task);
  const auto art = obtain_calib(cfg, f, model, task);
  const auto rows = bench::run_sweep(model, &art, task, cfg);
  bench::write_csv(f.out, rows);
  std::printf("wrote %s (%zu rows)\n", f.out.c_str(), rows.size());
  return 0;
}

int cmd_report(const std::string& input, const Flags& f) {
  const auto rows = bench::read_csv(input);
  bench::write_report(f.out, rows);
  std::printf("wrote %s (%zu input rows)\n", f.out.c_str(), rows.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-oriented multimodal edge communication simulator"};
  app.require_subcommand(1);

  Flags ft, fc, fs, fw, fr;
  std::string report_input;

  CLI::App* train = app.add_subcommand("train", "train a model on the synthetic task");
  add_common(train, ft);
  train->add_option("--out", ft.out, "checkpoint output path")->required();

  CLI::App* calib = app.add_subcommand("calibrate", "compute conformal calibration");
  add_common(calib, fc);
  add_scenario(calib, fc);
  calib->add_option("--out", fc.out, "artifact output path")->required();

  CLI::App* sim = app.add_subcommand("simulate", "run one scenario over the test split");
  add_common(sim, fs);
  add_scenario(sim, fs);
  sim->add_option("--out", fs.out, "CSV output path")->required();
  sim->add_option("--trace", fs.trace, "write the first sample's message trace here");

  CLI::App* sweep = app.add_subcommand("sweep", "run the configured sweep grid");
  add_common(sweep, fw);
  add_scenario(sweep, fw);
  sweep->add_option("--out", fw.out, "CSV output path")->required();

  CLI::App* report = app.add_subcommand("report", "aggregate sweep CSV over seeds");
  report->add_option("input", report_input, "sweep CSV to aggregate")->required();
  report->add_option("--out", fr.out, "report output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(ft);
    if (calib->parsed()) return cmd_calibrate(fc);
    if (sim->parsed()) return cmd_simulate(fs);
    if (sweep->parsed()) return cmd_sweep(fw);
    if (report->parsed()) return cmd_report(report_input, fr);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
