#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mulsim/checkpoint.hpp"
#include "mulsim/protocol.hpp"
#include "mulsim/synthetic.hpp"
#include "mulsim/train.hpp"

namespace mulsim::bench {

struct TrainPlan {
  std::string config_name = "desk";  // "desk" or "paper"
  int epochs_stage1 = 150;
  int epochs_stage2 = 150;
  int batch = 16;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::uint64_t seed = 1;
};

// Scenario knobs as they appear in the config file; CLI flags override them.
struct ScenarioDefaults {
  std::string approach = "A4";
  std::string combiner = "sssc";
  double beta = 1.0;
  double alpha = 0.1;
  double alpha2 = 0.3;
  double rate_bps = 1e6;
  std::string snr = "";  // "0:10;1:30", or a single number for all modalities
  bool reliable_control = true;
  std::uint64_t seed = 1;
};

struct SweepPlan {
  std::vector<std::string> approaches = {"A1", "A2", "A3", "A4", "A5"};
  std::vector<double> rates_bps = {1e6};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct ExperimentConfig {
  SyntheticTaskSpec task;
  TrainPlan train;
  ScenarioDefaults scenario;
  SweepPlan sweep;
  std::string model_path;  // optional: checkpoint to reuse
  std::string calib_path;  // optional: calibration artifact to reuse

  static ExperimentConfig defaults();
  static ExperimentConfig from_file(const std::string& path);
};

GeneratedTask build_task(const ExperimentConfig& cfg);
perceiver::Model train_model(const GeneratedTask& task, const TrainPlan& plan);

// Per-(task, modality) conformal quantiles at alpha, plus per-(task,
// combiner) routing thresholds at alpha2 from clean calibration-split
// statistics of correctly fused samples.
conformal::CalibrationArtifact calibrate_model(const perceiver::Model& model,
                                               const GeneratedTask& task, double alpha,
                                               double alpha2, double beta);

// "0:10;1:30" or "0:inf,1:25" or a bare number applied to every modality.
void apply_snr_text(protocol::ChannelModel& ch, const std::string& text);
std::string snr_map_text(const protocol::ChannelModel& ch, const perceiver::Registry& reg,
                         int task);

protocol::Scenario make_scenario(const ExperimentConfig& cfg,
                                 const perceiver::Registry& reg);

struct ReportRow {
  int task = 0;
  std::string approach;
  std::string combiner;
  double beta = 1.0;
  double alpha = 0.1;
  double alpha2 = 0.3;
  double rate_bps = 1e6;
  std::string snr_map;
  double accuracy = 0.0;
  double latency_s = 0.0;
  double energy_j = 0.0;
  double p_h = std::numeric_limits<double>::quiet_NaN();  // blank unless A5
  std::uint64_t seed = 0;
};

// Runs the test split through the simulator and fills one row.
ReportRow run_point(const perceiver::Model& model,
                    const conformal::CalibrationArtifact* calib,
                    const GeneratedTask& task, const protocol::Scenario& sc);

std::vector<ReportRow> run_sweep(const perceiver::Model& model,
                                 const conformal::CalibrationArtifact* calib,
                                 const GeneratedTask& task, const ExperimentConfig& cfg);

std::string csv_header();
std::string csv_line(const ReportRow& r);
// Sorts rows into a canonical order and writes header + rows; byte
// deterministic for identical inputs.
void write_csv(const std::string& path, std::vector<ReportRow> rows);
std::vector<ReportRow> read_csv(const std::string& path);

// Mean and sample standard deviation over seeds, grouped by every other key.
std::string report_header();
void write_report(const std::string& path, const std::vector<ReportRow>& rows);

}  // namespace mulsim::bench
