#include "mulsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "mulsim/error.hpp"
#include "mulsim/fusion.hpp"

namespace mulsim::bench {

using nlohmann::json;

namespace {

double snr_from_json(const json& v) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    return std::stod(s);
  }
  return v.get<double>();
}

void parse_task(const json& j, SyntheticTaskSpec& t) {
  t.n_classes = j.value("n_classes", t.n_classes);
  t.n_train = j.value("n_train", t.n_train);
  t.n_cal = j.value("n_cal", t.n_cal);
  t.n_test = j.value("n_test", t.n_test);
  t.seed = j.value("seed", t.seed);
  if (j.contains("modalities")) {
    t.modalities.clear();
    for (const auto& m : j.at("modalities")) {
      ModalitySpec ms;
      ms.rows = m.value("rows", ms.rows);
      ms.cols = m.value("cols", ms.cols);
      ms.informativeness = m.value("informativeness", ms.informativeness);
      ms.noise_sigma = m.value("noise_sigma", ms.noise_sigma);
      t.modalities.push_back(ms);
    }
  }
}

void parse_train(const json& j, TrainPlan& p) {
  p.config_name = j.value("config", p.config_name);
  p.epochs_stage1 = j.value("epochs_stage1", p.epochs_stage1);
  p.epochs_stage2 = j.value("epochs_stage2", p.epochs_stage2);
  p.batch = j.value("batch", p.batch);
  p.lr = j.value("lr", p.lr);
  p.weight_decay = j.value("weight_decay", p.weight_decay);
  p.seed = j.value("seed", p.seed);
}

void parse_scenario(const json& j, ScenarioDefaults& s) {
  s.approach = j.value("approach", s.approach);
  s.combiner = j.value("combiner", s.combiner);
  s.beta = j.value("beta", s.beta);
  s.alpha = j.value("alpha", s.alpha);
  s.alpha2 = j.value("alpha2", s.alpha2);
  s.rate_bps = j.value("rate_bps", s.rate_bps);
  s.reliable_control = j.value("reliable_control", s.reliable_control);
  s.seed = j.value("seed", s.seed);
  if (j.contains("snr")) {
    const auto& v = j.at("snr");
    if (v.is_string()) {
      s.snr = v.get<std::string>();
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.10g", v.get<double>());
      s.snr = buf;
    }
  }
}

void parse_sweep(const json& j, SweepPlan& s) {
  if (j.contains("approaches"))
    s.approaches = j.at("approaches").get<std::vector<std::string>>();
  if (j.contains("rates_bps")) s.rates_bps = j.at("rates_bps").get<std::vector<double>>();
  if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig cfg;
  cfg.task = two_modality_spec();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config '" + path + "': " + e.what());
  }
  ExperimentConfig cfg = defaults();
  try {
    if (j.contains("task")) parse_task(j.at("task"), cfg.task);
    if (j.contains("train")) parse_train(j.at("train"), cfg.train);
    if (j.contains("scenario")) parse_scenario(j.at("scenario"), cfg.scenario);
    if (j.contains("sweep")) parse_sweep(j.at("sweep"), cfg.sweep);
    cfg.model_path = j.value("model_path", cfg.model_path);
    cfg.calib_path = j.value("calib_path", cfg.calib_path);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config '" + path + "': " + e.what());
  }
  cfg.task.validate();
  return cfg;
}

GeneratedTask build_task(const ExperimentConfig& cfg) { return generate_task(cfg.task); }

perceiver::Model train_model(const GeneratedTask& task, const TrainPlan& plan) {
  perceiver::PerceiverConfig pc = plan.config_name == "paper"
                                      ? perceiver::PerceiverConfig::paper_scale()
                                      : perceiver::PerceiverConfig::desk();
  if (plan.config_name != "paper" && plan.config_name != "desk")
    throw ConfigError("train: config must be 'desk' or 'paper'");
  perceiver::Model model = perceiver::Model::init(task.registry, pc, plan.seed);
  perceiver::Schedule s1{plan.epochs_stage1, plan.batch, plan.lr, plan.weight_decay,
                         Rng::mix(plan.seed, 1)};
  perceiver::train_stage_one(model, task.data, task.split.train, s1);
  perceiver::Schedule s2{plan.epochs_stage2, plan.batch, plan.lr, plan.weight_decay,
                         Rng::mix(plan.seed, 2)};
  perceiver::train_stage_two(model, task.data, task.split.train, s2);
  return model;
}

conformal::CalibrationArtifact calibrate_model(const perceiver::Model& model,
                                               const GeneratedTask& task, double alpha,
                                               double alpha2, double beta) {
  conformal::CalibrationArtifact art;
  const auto& reg = model.registry;
  for (std::size_t t = 0; t < reg.tasks.size(); ++t) {
    const auto& mods = reg.tasks[t].modalities;
    const int task_id = static_cast<int>(t);

    // Clean per-modality softmax rows over the calibration split.
    std::vector<std::vector<std::vector<double>>> cal_scores;  // sample x slot
    std::vector<int> cal_labels;
    for (int idx : task.split.cal) {
      const Sample& s = task.data.samples[static_cast<std::size_t>(idx)];
      if (s.task != task_id) continue;
      std::vector<std::vector<double>> per_slot;
      for (std::size_t m = 0; m < mods.size(); ++m) {
        const tensor::Matrix latent = perceiver::infer_latent(model, s.inputs[m], mods[m]);
        const tensor::Matrix row =
            perceiver::infer_unimodal_scores(model, task_id, s.inputs[m], mods[m], latent);
        per_slot.emplace_back(row.data(), row.data() + row.cols());
      }
      cal_scores.push_back(std::move(per_slot));
      cal_labels.push_back(s.label);
    }
    if (cal_scores.empty())
      throw ConfigError("calibrate: no calibration samples for task " +
                        std::to_string(task_id));

    for (std::size_t m = 0; m < mods.size(); ++m) {
      std::vector<double> scores;
      scores.reserve(cal_scores.size());
      for (std::size_t i = 0; i < cal_scores.size(); ++i)
        scores.push_back(conformal::nonconformity(cal_scores[i][m], cal_labels[i]));
      conformal::QuantileRecord q;
      q.task = task_id;
      q.modality = mods[m];
      q.alpha = alpha;
      q.q_hat = conformal::calibrate_quantile(scores, alpha);
      q.n_cal = static_cast<int>(scores.size());
      art.quantiles.push_back(q);
    }

    for (fusion::Combiner c : {fusion::Combiner::kEqualWeight, fusion::Combiner::kSetSize}) {
      std::vector<double> correct_stats;
      for (std::size_t i = 0; i < cal_scores.size(); ++i) {
        std::vector<int> set_sizes;
        for (std::size_t m = 0; m < mods.size(); ++m) {
          const double q_hat = art.quantile_for(task_id, mods[m]);
          set_sizes.push_back(
              static_cast<int>(conformal::prediction_set(cal_scores[i][m], q_hat).size()));
        }
        const auto fused = fusion::fuse(c, cal_scores[i], set_sizes, beta);
        if (fusion::argmax_class(fused) != cal_labels[i]) continue;
        correct_stats.push_back(
            fusion::routing_statistic(fused, c, static_cast<int>(mods.size())));
      }
      conformal::ThresholdRecord th;
      th.task = task_id;
      th.combiner = fusion::combiner_name(c);
      th.alpha2 = alpha2;
      th.q_e = conformal::adaptive_threshold(correct_stats, alpha2);
      art.thresholds.push_back(th);
    }
  }
  return art;
}

void apply_snr_text(protocol::ChannelModel& ch, const std::string& text) {
  if (text.empty()) return;
  const auto parse_value = [](const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad SNR value '" + s + "'");
    }
  };
  std::string normalized = text;
  std::replace(normalized.begin(), normalized.end(), ',', ';');
  std::string token;
  std::stringstream ss(normalized);
  bool any_pair = false;
  while (std::getline(ss, token, ';')) {
    if (token.empty()) continue;
    const auto colon = token.find(':');
    if (colon == std::string::npos) {
      if (any_pair) throw ConfigError("mixed SNR forms in '" + text + "'");
      ch.default_snr_db = parse_value(token);
      return;
    }
    any_pair = true;
    int mod = -1;
    try {
      mod = std::stoi(token.substr(0, colon));
    } catch (const std::exception&) {
      throw ConfigError("bad SNR entry '" + token + "'");
    }
    ch.snr_db_by_modality[mod] = parse_value(token.substr(colon + 1));
  }
}

std::string snr_map_text(const protocol::ChannelModel& ch, const perceiver::Registry& reg,
                         int task) {
  std::string out;
  for (int m : reg.tasks[static_cast<std::size_t>(task)].modalities) {
    if (!out.empty()) out += ';';
    const double v = ch.snr_for(m);
    out += std::to_string(m) + ':' + (std::isinf(v) ? "inf" : fmt(v));
  }
  return out;
}

protocol::Scenario make_scenario(const ExperimentConfig& cfg,
                                 const perceiver::Registry& reg) {
  protocol::Scenario sc;
  sc.approach = parse_approach(cfg.scenario.approach);
  sc.task = 0;
  sc.combiner = fusion::combiner_from_name(cfg.scenario.combiner);
  sc.beta = cfg.scenario.beta;
  sc.alpha = cfg.scenario.alpha;
  sc.alpha2 = cfg.scenario.alpha2;
  sc.topology = protocol::Topology::one_device_per_modality(reg);
  sc.channel.rate_bps = cfg.scenario.rate_bps;
  sc.channel.reliable_control = cfg.scenario.reliable_control;
  apply_snr_text(sc.channel, cfg.scenario.snr);
  sc.cost.rate_bps = cfg.scenario.rate_bps;
  sc.seed = cfg.scenario.seed;
  sc.validate(reg);
  return sc;
}

ReportRow run_point(const perceiver::Model& model,
                    const conformal::CalibrationArtifact* calib,
                    const GeneratedTask& task, const protocol::Scenario& sc) {
  const std::vector<Sample> test = gather(task.data, task.split.test);
  const protocol::DatasetLedger led = protocol::run_dataset(model, calib, sc, test);
  ReportRow r;
  r.task = sc.task;
  r.approach = approach_name(sc.approach);
  r.combiner = fusion::combiner_name(sc.combiner);
  r.beta = sc.beta;
  r.alpha = sc.alpha;
  r.alpha2 = sc.alpha2;
  r.rate_bps = sc.channel.rate_bps;
  r.snr_map = snr_map_text(sc.channel, model.registry, sc.task);
  r.accuracy = led.accuracy;
  r.latency_s = led.mean_latency_s;
  r.energy_j = led.mean_energy_j;
  r.p_h = led.p_h;
  r.seed = sc.seed;
  return r;
}

std::vector<ReportRow> run_sweep(const perceiver::Model& model,
                                 const conformal::CalibrationArtifact* calib,
                                 const GeneratedTask& task, const ExperimentConfig& cfg) {
  std::vector<ReportRow> rows;
  for (const std::string& ap : cfg.sweep.approaches)
    for (double rate : cfg.sweep.rates_bps)
      for (std::uint64_t seed : cfg.sweep.seeds) {
        protocol::Scenario sc = make_scenario(cfg, model.registry);
        sc.approach = parse_approach(ap);
        sc.channel.rate_bps = rate;
        sc.cost.rate_bps = rate;
        sc.seed = seed;
        rows.push_back(run_point(model, calib, task, sc));
      }
  return rows;
}

std::string csv_header() {
  return "task,approach,combiner,beta,alpha,alpha2,rate_bps,snr_map,accuracy,"
         "latency_s,energy_j,p_h,seed";
}

std::string csv_line(const ReportRow& r) {
  std::string out = std::to_string(r.task) + ',' + r.approach + ',' + r.combiner + ',' +
                    fmt(r.beta) + ',' + fmt(r.alpha) + ',' + fmt(r.alpha2) + ',' +
                    fmt(r.rate_bps) + ',' + r.snr_map + ',' + fmt(r.accuracy) + ',' +
                    fmt(r.latency_s) + ',' + fmt(r.energy_j) + ',';
  if (!std::isnan(r.p_h)) out += fmt(r.p_h);
  out += ',' + std::to_string(r.seed);
  return out;
}

namespace {

auto row_key(const ReportRow& r) {
  return std::make_tuple(r.task, r.approach, r.combiner, r.beta, r.alpha, r.alpha2,
                         r.rate_bps, r.snr_map, r.seed);
}

}  // namespace

void write_csv(const std::string& path, std::vector<ReportRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ReportRow& a, const ReportRow& b) { return row_key(a) < row_key(b); });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_line(r) << '\n';
  if (!out) throw ConfigError("writing '" + path + "' failed");
}

std::vector<ReportRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV '" + path + "'");
  if (line != csv_header())
    throw ConfigError("unexpected CSV header in '" + path + "'");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string tok;
    std::stringstream ss(line);
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 13) throw ConfigError("bad CSV row: " + line);
    ReportRow r;
    r.task = std::stoi(f[0]);
    r.approach = f[1];
    r.combiner = f[2];
    r.beta = std::stod(f[3]);
    r.alpha = std::stod(f[4]);
    r.alpha2 = std::stod(f[5]);
    r.rate_bps = std::stod(f[6]);
    r.snr_map = f[7];
    r.accuracy = std::stod(f[8]);
    r.latency_s = std::stod(f[9]);
    r.energy_j = std::stod(f[10]);
    r.p_h = f[11].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[11]);
    r.seed = std::stoull(f[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string report_header() {
  return "task,approach,combiner,beta,alpha,alpha2,rate_bps,snr_map,n_seeds,"
         "accuracy_mean,accuracy_sd,latency_s_mean,latency_s_sd,energy_j_mean,"
         "energy_j_sd,p_h_mean,p_h_sd";
}

void write_report(const std::string& path, const std::vector<ReportRow>& rows) {
  using Key = std::tuple<int, std::string, std::string, double, double, double, double,
                         std::string>;
  std::map<Key, std::vector<const ReportRow*>> groups;
  for (const auto& r : rows)
    groups[std::make_tuple(r.task, r.approach, r.combiner, r.beta, r.alpha, r.alpha2,
                           r.rate_bps, r.snr_map)]
        .push_back(&r);

  const auto mean_sd = [](const std::vector<double>& v) {
    double mean = 0.0;
    int n = 0;
    for (double x : v)
      if (!std::isnan(x)) mean += x, ++n;
    if (n == 0) return std::make_pair(std::numeric_limits<double>::quiet_NaN(), 0.0);
    mean /= n;
    double ss = 0.0;
    for (double x : v)
      if (!std::isnan(x)) ss += (x - mean) * (x - mean);
    return std::make_pair(mean, n > 1 ? std::sqrt(ss / (n - 1)) : 0.0);
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << report_header() << '\n';
  for (const auto& [key, members] : groups) {
    std::vector<double> acc, lat, en, ph;
    for (const ReportRow* r : members) {
      acc.push_back(r->accuracy);
      lat.push_back(r->latency_s);
      en.push_back(r->energy_j);
      ph.push_back(r->p_h);
    }
    const auto [am, as] = mean_sd(acc);
    const auto [lm, ls] = mean_sd(lat);
    const auto [em, es] = mean_sd(en);
    const auto [pm, ps] = mean_sd(ph);
    out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
        << fmt(std::get<3>(key)) << ',' << fmt(std::get<4>(key)) << ','
        << fmt(std::get<5>(key)) << ',' << fmt(std::get<6>(key)) << ','
        << std::get<7>(key) << ',' << members.size() << ',' << fmt(am) << ',' << fmt(as)
        << ',' << fmt(lm) << ',' << fmt(ls) << ',' << fmt(em) << ',' << fmt(es) << ',';
    if (!std::isnan(pm)) out << fmt(pm) << ',' << fmt(ps);
    else out << ',';
    out << '\n';
  }
  if (!out) throw ConfigError("writing '" + path + "' failed");
}

}  // namespace mulsim::bench
