#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mulsim/approach.hpp"
#include "mulsim/conformal.hpp"
#include "mulsim/data.hpp"
#include "mulsim/fusion.hpp"
#include "mulsim/metrics.hpp"
#include "mulsim/modulation.hpp"
#include "mulsim/perceiver.hpp"

namespace mulsim::protocol {

enum class MsgKind {
  kTaskRequest,
  kSensorRequest,
  kSoftmaxAndSet,
  kLatentRequest,
  kLatentData,
  kRawData,
  kUnimodalResult,
  kTaskResult,
};

const char* msg_kind_name(MsgKind k);
phy::Modulation modulation_for_kind(MsgKind k);  // bulk data on QAM64, rest QPSK

// Sensor devices, one edge server, user devices. Every modality lives on
// exactly one device; a device may host several.
struct Topology {
  int n_devices = 0;
  int n_users = 1;
  std::vector<int> device_of_modality;  // modality id -> device id, -1 = unhosted

  static Topology one_device_per_modality(const perceiver::Registry& reg);
  void validate(const perceiver::Registry& reg) const;
  int device_for(int modality) const;
};

// Uplink channel: shared TDMA medium at rate_bps; per-modality Es/N0 with an
// error-free default. QPSK control/result/score traffic is error-free while
// reliable_control is set; bulk payloads always pass through the channel.
struct ChannelModel {
  double rate_bps = 1e6;
  std::map<int, double> snr_db_by_modality;
  double default_snr_db = std::numeric_limits<double>::infinity();
  bool reliable_control = true;

  double snr_for(int modality) const;
};

struct Scenario {
  Approach approach = Approach::kA4;
  int task = 0;
  fusion::Combiner combiner = fusion::Combiner::kSetSize;
  double beta = 1.0;
  double alpha = 0.1;
  double alpha2 = 0.3;
  Topology topology;
  ChannelModel channel;
  metrics::CostModel cost;
  std::uint64_t seed = 1;

  void validate(const perceiver::Registry& reg) const;
};

struct TraceEvent {
  double start_s = 0.0;
  double time_s = 0.0;  // transmission end; equals start_s for zero-time control
  std::string node;     // sender
  MsgKind kind = MsgKind::kTaskRequest;
  std::size_t bits = 0;
  phy::Modulation modulation = phy::Modulation::kQpsk;
};

struct EventTrace {
  std::vector<TraceEvent> events;

  int count(MsgKind k) const;
  std::size_t bits_of(MsgKind k) const;
  void export_lines(std::ostream& out) const;  // time_s node msg_kind bits modulation
};

struct RunLedger {
  double latency_s = 0.0;
  double energy_j = 0.0;
  double uplink_bits = 0.0;     // device->server payload bits, before symbol padding
  int first_encoder_runs = 0;   // compute-once accounting
  bool routed_simple = false;   // A5 only
  int prediction = -1;
};

struct SampleResult {
  int prediction = -1;
  EventTrace trace;
  RunLedger ledger;
};

// One full request/response exchange for one sample. `calib` is required for
// A4/A5 and ignored elsewhere. Missing modalities (empty input or no hosting
// device) abort A1/A3 and are skipped by A2/A4/A5.
SampleResult run_sample(const perceiver::Model& model,
                        const conformal::CalibrationArtifact* calib,
                        const Scenario& sc, const Sample& sample,
                        std::uint64_t nonce);

struct DatasetLedger {
  int n = 0;
  double accuracy = 0.0;
  double mean_latency_s = 0.0;
  double mean_energy_j = 0.0;
  double p_h = std::numeric_limits<double>::quiet_NaN();  // A5: fraction routed simple
};

DatasetLedger run_dataset(const perceiver::Model& model,
                          const conformal::CalibrationArtifact* calib,
                          const Scenario& sc, const std::vector<Sample>& samples,
                          std::uint64_t base_nonce = 0);

// Pushes one modality's raw input through the Q9.9 + QAM64 channel at the
// given SNR and returns the perturbed sample. Infinite SNR returns the
// sample unchanged.
Sample degrade_modality(const perceiver::Registry& reg, const Sample& s,
                        int modality_id, double snr_db, std::uint64_t seed);

}  // namespace mulsim::protocol
