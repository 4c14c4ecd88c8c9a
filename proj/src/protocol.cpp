#include "mulsim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mulsim/error.hpp"
#include "mulsim/ops.hpp"
#include "mulsim/rng.hpp"

namespace mulsim::protocol {

const char* msg_kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::kTaskRequest: return "task_request";
    case MsgKind::kSensorRequest: return "sensor_request";
    case MsgKind::kSoftmaxAndSet: return "softmax_and_set";
    case MsgKind::kLatentRequest: return "latent_request";
    case MsgKind::kLatentData: return "latent_data";
    case MsgKind::kRawData: return "raw_data";
    case MsgKind::kUnimodalResult: return "unimodal_result";
    case MsgKind::kTaskResult: return "task_result";
  }
  return "?";
}

phy::Modulation modulation_for_kind(MsgKind k) {
  return (k == MsgKind::kLatentData || k == MsgKind::kRawData)
             ? phy::Modulation::kQam64
             : phy::Modulation::kQpsk;
}

Topology Topology::one_device_per_modality(const perceiver::Registry& reg) {
  Topology t;
  t.n_devices = reg.n_modalities();
  t.device_of_modality.resize(static_cast<std::size_t>(t.n_devices));
  for (int i = 0; i < t.n_devices; ++i) t.device_of_modality[static_cast<std::size_t>(i)] = i;
  return t;
}

void Topology::validate(const perceiver::Registry& reg) const {
  if (n_devices <= 0 || n_users <= 0)
    throw ConfigError("topology: need at least one device and one user");
  for (const auto& task : reg.tasks)
    for (int m : task.modalities) {
      const int dev = device_for(m);
      if (dev < 0 || dev >= n_devices)
        throw ConfigError("topology: task modality " + std::to_string(m) +
                          " is not hosted by any device");
    }
}

int Topology::device_for(int modality) const {
  if (modality < 0 || modality >= static_cast<int>(device_of_modality.size())) return -1;
  return device_of_modality[static_cast<std::size_t>(modality)];
}

double ChannelModel::snr_for(int modality) const {
  auto it = snr_db_by_modality.find(modality);
  return it == snr_db_by_modality.end() ? default_snr_db : it->second;
}

void Scenario::validate(const perceiver::Registry& reg) const {
  if (task < 0 || task >= static_cast<int>(reg.tasks.size()))
    throw ConfigError("scenario: task id out of range");
  if (beta < 1.0) throw ConfigError("scenario: beta must be >= 1");
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw ConfigError("scenario: alpha must lie in (0,1)");
  if (alpha2 < 0.0 || alpha2 > 1.0) throw ConfigError("scenario: alpha2 must lie in [0,1]");
  if (!(channel.rate_bps > 0.0)) throw ConfigError("scenario: rate must be positive");
  cost.validate();
  topology.validate(reg);
}

int EventTrace::count(MsgKind k) const {
  int n = 0;
  for (const auto& e : events) n += (e.kind == k);
  return n;
}

std::size_t EventTrace::bits_of(MsgKind k) const {
  std::size_t n = 0;
  for (const auto& e : events)
    if (e.kind == k) n += e.bits;
  return n;
}

void EventTrace::export_lines(std::ostream& out) const {
  char line[160];
  for (const auto& e : events) {
    std::snprintf(line, sizeof(line), "%.9f\t%s\t%s\t%zu\t%s\n", e.time_s, e.node.c_str(),
                  msg_kind_name(e.kind), e.bits, phy::modulation_name(e.modulation));
    out << line;
  }
}

namespace {

std::string device_name(int dev) { return "dev" + std::to_string(dev); }

std::vector<double> sanitize_scores(std::vector<double> v) {
  for (double& x : v) x = std::min(1.0, std::max(0.0, x));
  return v;
}

int sanitize_label(double v, int n_classes) {
  const auto k = static_cast<int>(std::llround(v));
  return std::min(n_classes - 1, std::max(0, k));
}

std::vector<double> row_to_vector(const tensor::Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.cols());
}

// Timeline bookkeeping: parallel per-device compute, one shared TDMA uplink.
struct Sim {
  const Scenario& sc;
  std::uint64_t nonce;
  EventTrace trace;
  RunLedger ledger;
  double channel_free_at = 0.0;

  Sim(const Scenario& s, std::uint64_t n) : sc(s), nonce(n) {}

  std::uint64_t message_seed(int device, MsgKind kind) const {
    const std::uint64_t a = Rng::mix(sc.seed, nonce);
    const std::uint64_t b = Rng::mix(a, static_cast<std::uint64_t>(device) + 0x9e01);
    return Rng::mix(b, static_cast<std::uint64_t>(kind) + 1);
  }

  void control(const std::string& node, MsgKind kind, double at) {
    trace.events.push_back({at, at, node, kind, 0, phy::Modulation::kQpsk});
  }

  // Serialized uplink transmission of one message; returns the payloads as
  // seen by the receiver.
  std::vector<phy::BitPayload> send_data(int device, MsgKind kind,
                                         const std::vector<phy::BitPayload>& payloads,
                                         double ready_s, double snr_db) {
    const phy::Modulation mod = modulation_for_kind(kind);
    std::size_t bits = 0;
    double air = 0.0;
    for (const auto& p : payloads) {
      bits += p.size_bits();
      air += phy::airtime_s(p.size_bits(), mod, sc.channel.rate_bps);
    }
    const double start = std::max(channel_free_at, ready_s);
    const double end = start + air;
    channel_free_at = end;
    trace.events.push_back({start, end, device_name(device), kind, bits, mod});
    ledger.uplink_bits += static_cast<double>(bits);
    ledger.energy_j += sc.cost.device.p_t * air;

    const bool through_channel =
        mod == phy::Modulation::kQam64 || !sc.channel.reliable_control;
    std::vector<phy::BitPayload> received;
    received.reserve(payloads.size());
    const std::uint64_t base = message_seed(device, kind);
    for (std::size_t i = 0; i < payloads.size(); ++i)
      received.push_back(through_channel
                             ? phy::transmit(payloads[i], mod, snr_db,
                                             Rng::mix(base, i + 1))
                             : payloads[i]);
    return received;
  }

  void device_compute(double flops) { ledger.energy_j += flops / sc.cost.device.gamma_iot; }
  void server_compute(double flops) { ledger.energy_j += flops / sc.cost.server.gamma_s; }

  void finish(int prediction, double at) {
    // Result delivery to the user is a zero-time control-sized downlink.
    trace.events.push_back({at, at, "server", MsgKind::kTaskResult,
                            static_cast<std::size_t>(phy::kWordBits),
                            phy::Modulation::kQpsk});
    ledger.prediction = prediction;
    ledger.latency_s = at;
  }
};

tensor::Matrix matrix_from_reals(const std::vector<double>& v, int rows, int cols) {
  if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) != v.size())
    throw CodecError("received payload does not match the expected shape");
  tensor::Matrix m(rows, cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

}  // namespace

SampleResult run_sample(const perceiver::Model& model,
                        const conformal::CalibrationArtifact* calib,
                        const Scenario& sc, const Sample& sample,
                        std::uint64_t nonce) {
  const perceiver::Registry& reg = model.registry;
  sc.validate(reg);
  const auto& mods = reg.tasks[static_cast<std::size_t>(sc.task)].modalities;
  const int n_classes = reg.tasks[static_cast<std::size_t>(sc.task)].n_classes;
  if (sample.inputs.size() != mods.size())
    throw ConfigError("sample carries " + std::to_string(sample.inputs.size()) +
                      " inputs for a task with " + std::to_string(mods.size()) +
                      " modalities");
  if ((sc.approach == Approach::kA4 || sc.approach == Approach::kA5) && calib == nullptr)
    throw ConfigError("A4/A5 require a calibration artifact");

  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < mods.size(); ++i)
    if (!sample.inputs[i].empty() && sc.topology.device_for(mods[i]) >= 0)
      present.push_back(i);
  if (present.size() != mods.size() &&
      (sc.approach == Approach::kA1 || sc.approach == Approach::kA3))
    throw Error(std::string(approach_name(sc.approach)) +
                " requires every task modality to be present");
  if (present.empty()) throw Error("no task modality is present");

  Sim sim(sc, nonce);
  sim.control("user0", MsgKind::kTaskRequest, 0.0);
  const MsgKind request_kind =
      sc.approach == Approach::kA3 ? MsgKind::kLatentRequest : MsgKind::kSensorRequest;
  for (std::size_t i = 0; i < present.size(); ++i)
    sim.control("server", request_kind, 0.0);

  const double t_unit_dev = sc.cost.t_b / sc.cost.device.c_iot;
  const int units_on_device = sc.approach == Approach::kA1   ? 0
                              : sc.approach == Approach::kA3 ? 1
                                                             : 2;

  // Per-device compute finish times; devices hosting several modalities run
  // their encoders back to back.
  std::vector<double> dev_ready(static_cast<std::size_t>(sc.topology.n_devices), 0.0);
  for (std::size_t slot : present) {
    const auto dev = static_cast<std::size_t>(sc.topology.device_for(mods[slot]));
    dev_ready[dev] += units_on_device * t_unit_dev;
    sim.device_compute(units_on_device * sc.cost.t_b);
  }

  // On-device inference, once per present modality.
  std::vector<tensor::Matrix> latents(mods.size());
  std::vector<std::vector<double>> dev_scores(mods.size());
  if (units_on_device > 0) {
    for (std::size_t slot : present) {
      latents[slot] = perceiver::infer_latent(model, sample.inputs[slot], mods[slot]);
      ++sim.ledger.first_encoder_runs;
      if (units_on_device == 2)
        dev_scores[slot] = row_to_vector(perceiver::infer_unimodal_scores(
            model, sc.task, sample.inputs[slot], mods[slot], latents[slot]));
    }
  }

  const auto latent_payload = [&](std::size_t slot) {
    const tensor::Matrix& l = latents[slot];
    return phy::pack_reals(phy::PayloadKind::kLatentData, l.data(),
                           static_cast<std::size_t>(l.rows()) * l.cols());
  };
  const auto receive_latent = [&](const phy::BitPayload& p) {
    return matrix_from_reals(phy::unpack_reals(p), model.config.latent_rows,
                             model.config.latent_dim);
  };
  const auto server_pairwise = [&](const std::vector<std::pair<int, tensor::Matrix>>& lat,
                                   double ready) {
    const auto n = static_cast<double>(lat.size());
    const double flops = sc.cost.t_b * (n - 1.0) * n;
    sim.server_compute(flops);
    const tensor::Matrix scores = perceiver::infer_pairwise_scores(model, sc.task, lat);
    const double done = ready + flops / sc.cost.server.c_s;
    return std::make_pair(tensor::argmax_row(scores, 0), done);
  };

  int prediction = -1;
  double done_at = 0.0;

  switch (sc.approach) {
    case Approach::kA1: {
      std::vector<std::pair<int, tensor::Matrix>> received;
      for (std::size_t slot : present) {
        const tensor::Matrix& raw = sample.inputs[slot];
        const auto p = phy::pack_reals(phy::PayloadKind::kRawData, raw.data(),
                                       static_cast<std::size_t>(raw.rows()) * raw.cols());
        const int dev = sc.topology.device_for(mods[slot]);
        auto rx = sim.send_data(dev, MsgKind::kRawData, {p}, 0.0,
                                sc.channel.snr_for(mods[slot]));
        received.emplace_back(
            mods[slot], matrix_from_reals(phy::unpack_reals(rx[0]), raw.rows(), raw.cols()));
      }
      // Full pipeline on the server: one first-stage encode per modality,
      // then all ordered pairs.
      const auto n = static_cast<double>(present.size());
      const double enc_flops = sc.cost.t_b * n;
      sim.server_compute(enc_flops);
      std::vector<std::pair<int, tensor::Matrix>> lat;
      for (auto& [mod_id, raw] : received)
        lat.emplace_back(mod_id, perceiver::infer_latent(model, raw, mod_id));
      const double pair_ready = sim.channel_free_at + enc_flops / sc.cost.server.c_s;
      std::tie(prediction, done_at) = server_pairwise(lat, pair_ready);
      break;
    }

    case Approach::kA2: {
      std::vector<int> votes;
      for (std::size_t slot : present) {
        const double label = fusion::argmax_class(dev_scores[slot]);
        const auto p = phy::pack_reals(phy::PayloadKind::kResult, &label, 1);
        const int dev = sc.topology.device_for(mods[slot]);
        auto rx = sim.send_data(dev, MsgKind::kUnimodalResult, {p},
                                dev_ready[static_cast<std::size_t>(dev)],
                                sc.channel.snr_for(mods[slot]));
        votes.push_back(sanitize_label(phy::unpack_reals(rx[0]).at(0), n_classes));
      }
      Rng tie_rng(Rng::mix(Rng::mix(sc.seed, nonce), 0x7a51));
      prediction = fusion::majority_vote(votes, n_classes, tie_rng);
      done_at = sim.channel_free_at;
      break;
    }

    case Approach::kA3: {
      std::vector<std::pair<int, tensor::Matrix>> lat;
      for (std::size_t slot : present) {
        const int dev = sc.topology.device_for(mods[slot]);
        auto rx = sim.send_data(dev, MsgKind::kLatentData, {latent_payload(slot)},
                                dev_ready[static_cast<std::size_t>(dev)],
                                sc.channel.snr_for(mods[slot]));
        lat.emplace_back(mods[slot], receive_latent(rx[0]));
      }
      std::tie(prediction, done_at) = server_pairwise(lat, sim.channel_free_at);
      break;
    }

    case Approach::kA4:
    case Approach::kA5: {
      // Devices upload softmax scores plus conformal sets; the server fuses.
      std::vector<std::vector<double>> scores;
      std::vector<int> set_sizes;
      std::vector<std::pair<std::size_t, phy::BitPayload>> cached;  // slot -> latent payload
      for (std::size_t slot : present) {
        const double q_hat = calib->quantile_for(sc.task, mods[slot]);
        const auto set = conformal::prediction_set(dev_scores[slot], q_hat);
        const int dev = sc.topology.device_for(mods[slot]);
        auto rx = sim.send_data(
            dev, MsgKind::kSoftmaxAndSet,
            {phy::pack_reals(phy::PayloadKind::kSoftmax, dev_scores[slot].data(),
                             dev_scores[slot].size()),
             phy::pack_class_mask(set, n_classes)},
            dev_ready[static_cast<std::size_t>(dev)], sc.channel.snr_for(mods[slot]));
        auto got = sanitize_scores(phy::unpack_reals(rx[0]));
        auto got_set = phy::unpack_class_mask(rx[1]);
        if (got_set.empty()) got_set = {fusion::argmax_class(got)};
        scores.push_back(std::move(got));
        set_sizes.push_back(static_cast<int>(got_set.size()));
        if (sc.approach == Approach::kA5) cached.emplace_back(slot, latent_payload(slot));
      }
      const auto fused = fusion::fuse(sc.combiner, scores, set_sizes, sc.beta);
      prediction = fusion::argmax_class(fused);
      done_at = sim.channel_free_at;
      if (sc.approach == Approach::kA4) break;

      const double stat = fusion::routing_statistic(fused, sc.combiner,
                                                    static_cast<int>(present.size()));
      const double q_e = calib->threshold_for(sc.task, fusion::combiner_name(sc.combiner));
      const bool all_present = present.size() == mods.size();
      sim.ledger.routed_simple = fusion::route_simple(stat, q_e) || !all_present;
      if (!sim.ledger.routed_simple) {
        // Complex: pull the cached first-stage latents and fuse on the server.
        std::vector<std::pair<int, tensor::Matrix>> lat;
        for (auto& [slot, payload] : cached) {
          const int dev = sc.topology.device_for(mods[slot]);
          sim.control("server", MsgKind::kLatentRequest, sim.channel_free_at);
          auto rx = sim.send_data(dev, MsgKind::kLatentData, {payload},
                                  sim.channel_free_at, sc.channel.snr_for(mods[slot]));
          lat.emplace_back(mods[slot], receive_latent(rx[0]));
        }
        std::tie(prediction, done_at) = server_pairwise(lat, sim.channel_free_at);
      }
      break;
    }
  }

  sim.finish(prediction, done_at);
  SampleResult out;
  out.prediction = prediction;
  out.trace = std::move(sim.trace);
  out.ledger = sim.ledger;
  return out;
}

DatasetLedger run_dataset(const perceiver::Model& model,
                          const conformal::CalibrationArtifact* calib,
                          const Scenario& sc, const std::vector<Sample>& samples,
                          std::uint64_t base_nonce) {
  if (samples.empty()) throw ConfigError("run_dataset: empty sample list");
  DatasetLedger agg;
  int correct = 0, simple = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SampleResult r =
        run_sample(model, calib, sc, samples[i], base_nonce + i);
    correct += (r.prediction == samples[i].label);
    simple += r.ledger.routed_simple;
    agg.mean_latency_s += r.ledger.latency_s;
    agg.mean_energy_j += r.ledger.energy_j;
  }
  agg.n = static_cast<int>(samples.size());
  agg.accuracy = static_cast<double>(correct) / agg.n;
  agg.mean_latency_s /= agg.n;
  agg.mean_energy_j /= agg.n;
  if (sc.approach == Approach::kA5)
    agg.p_h = static_cast<double>(simple) / agg.n;
  return agg;
}

Sample degrade_modality(const perceiver::Registry& reg, const Sample& s,
                        int modality_id, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0.0) return s;
  const auto& mods = reg.tasks[static_cast<std::size_t>(s.task)].modalities;
  Sample out = s;
  for (std::size_t i = 0; i < mods.size(); ++i) {
    if (mods[i] != modality_id) continue;
    const tensor::Matrix& raw = s.inputs[i];
    if (raw.empty()) throw ConfigError("degrade_modality: modality input is missing");
    const auto p = phy::pack_reals(phy::PayloadKind::kRawData, raw.data(),
                                   static_cast<std::size_t>(raw.rows()) * raw.cols());
    const auto rx = phy::transmit(p, phy::Modulation::kQam64, snr_db, seed);
    out.inputs[i] = matrix_from_reals(phy::unpack_reals(rx), raw.rows(), raw.cols());
    return out;
  }
  throw ConfigError("degrade_modality: modality not part of the sample's task");
}

}  // namespace mulsim::protocol
