// SPDX-License-Identifier: Apache-2.0
//
// wbhb - wideband mm-Wave hybrid beamforming toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "wbhb/experiments.hpp"

#include "wbhb/channel.hpp"
#include "wbhb/chest.hpp"
#include "wbhb/errors.hpp"
#include "wbhb/hybrid.hpp"
#include "wbhb/pilot.hpp"
#include "wbhb/random.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace wbhb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <typename T>
void read(const json& j, const char* key, T& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
  }
}

// Nested objects patch the current (preset) values instead of the type
// defaults, so a partial "pilot" block keeps the preset's other fields.
template <typename T>
void overlay(const json& j, const char* key, T& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_object()) throw ConfigError(std::string("config key \"") + key + "\" must be an object");
  json merged = field;
  merged.merge_patch(*it);
  read(json{{key, merged}}, key, field);
}

std::vector<double> read_grid(const json& j, const char* key, std::vector<double> fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_array()) throw ConfigError(std::string("config key \"") + key + "\" must be an array");
  std::vector<double> out;
  for (const auto& v : *it) out.push_back(snr_from_json(v));
  return out;
}

json grid_json(const std::vector<double>& g) {
  json a = json::array();
  for (double v : g) a.push_back(snr_to_json(v));
  return a;
}

bool is_learned(const std::string& m) { return m == "F1" || m == "F2" || m == "F3"; }

Framework framework_of(const std::string& m) {
  if (m == "F1") return Framework::f1;
  if (m == "F2") return Framework::f2;
  return Framework::f3;
}

std::vector<std::string> metrics_of(const std::string& m) {
  if (m == "F2" || m == "F3") return {"rate", "nmse"};
  if (m == "LS" || m == "LMMSE" || m == "ADCE") return {"nmse"};
  return {"rate"};
}

std::string model_file(NetKind kind, int subcarrier) {
  std::string s = net_kind_name(kind);
  if (kind == NetKind::sc_cenet) s += "_" + std::to_string(subcarrier);
  return s + ".wbnn";
}

}  // namespace

// ---- configuration ----------------------------------------------------------------

ExperimentConfig ExperimentConfig::paper() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.preset = "desk";
  c.sys.n_tx = 16;
  c.sys.n_rx = 4;
  c.sys.n_rf = 2;
  c.sys.n_streams = 2;
  c.sys.n_subcarriers = 4;
  c.sys.unit_gain = true;
  c.pilot.m_tx = 8;
  c.pilot.m_rx = 4;
  c.n_scenarios = 20;
  c.g_per_scenario = 20;
  c.nets.conv_filters = 16;
  c.nets.dense1 = 128;
  c.nets.dense2 = 64;
  c.nets.dropout = 0.0;
  // Small batches at a low rate keep the ReLU layers alive on 1200 records.
  c.train.lr = 2e-4;
  c.train.batch_size = 16;
  c.train.max_epochs = 100;
  c.train.early_stop_patience_epochs = 20;
  // Online refreshes keep the offline rate; batch 8 gives 20 steps per epoch
  // on the 160 training samples of an online set.
  c.online.train.lr = c.train.lr;
  c.online.train.batch_size = 8;
  c.trials = 50;
  return c;
}

ExperimentConfig ExperimentConfig::named(const std::string& preset) {
  if (preset == "paper") return paper();
  if (preset == "desk") return desk();
  throw ConfigError("unknown preset \"" + preset + "\" (expected desk or paper)");
}

GenerationConfig ExperimentConfig::generation() const {
  GenerationConfig g;
  g.sys = sys;
  g.pilot = pilot;
  g.clusters = clusters;
  g.rays_per_cluster = rays_per_cluster;
  g.scenario = scenario;
  g.n_scenarios = n_scenarios;
  g.g_per_scenario = g_per_scenario;
  g.grid = zip_grids(snr_grid, snr_h_grid, snr_pilot_grid);
  g.seed = seed;
  g.noise_var = noise_var;
  g.clean_channel_labels = clean_channel_labels;
  g.hybrid = hybrid;
  g.threads = threads;
  return g;
}

void ExperimentConfig::validate() const {
  try {
    generation().validate();
    train.validate();
    online.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (nets.conv_filters < 1 || nets.dense1 < 1 || nets.dense2 < 1 || nets.dropout < 0.0 ||
      nets.dropout >= 1.0)
    throw ConfigError("nets: sizes must be positive and dropout in [0, 1)");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (!(noise_var > 0.0)) throw ConfigError("noise_var must be positive");
  if (online.steps < 1 || online.g_online < 2 || !(online.zeta > 0.0))
    throw ConfigError("online: steps >= 1, g_online >= 2 and zeta > 0 required");
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"preset", c.preset},
           {"system", c.sys},
           {"pilot", c.pilot},
           {"clusters", c.clusters},
           {"rays_per_cluster", c.rays_per_cluster},
           {"scenario", c.scenario},
           {"n_scenarios", c.n_scenarios},
           {"g_per_scenario", c.g_per_scenario},
           {"snr_grid", grid_json(c.snr_grid)},
           {"snr_h_grid", grid_json(c.snr_h_grid)},
           {"snr_pilot_grid", grid_json(c.snr_pilot_grid)},
           {"clean_channel_labels", c.clean_channel_labels},
           {"hybrid", c.hybrid},
           {"nets",
            {{"conv_filters", c.nets.conv_filters},
             {"dense1", c.nets.dense1},
             {"dense2", c.nets.dense2},
             {"dropout", c.nets.dropout}}},
           {"train", c.train},
           {"snr_db", c.snr_db},
           {"noise_var", c.noise_var},
           {"trials", c.trials},
           {"online",
            {{"zeta", snr_to_json(c.online.zeta)},
             {"g_online", c.online.g_online},
             {"steps", c.online.steps},
             {"drift_max_deg", c.online.drift_max_deg},
             {"pilot_snr_db", c.online.pilot_snr_db},
             {"train", c.online.train}}},
           {"seed", c.seed},
           {"threads", c.threads}};
}

void from_json(const json& j, ExperimentConfig& c) {
  check_keys(j,
             {"preset", "system", "pilot", "clusters", "rays_per_cluster", "scenario", "n_scenarios",
              "g_per_scenario", "snr_grid", "snr_h_grid", "snr_pilot_grid", "clean_channel_labels",
              "hybrid", "nets", "train", "snr_db", "noise_var", "trials", "online", "seed", "threads"},
             "config");
  std::string preset = j.contains("preset") ? std::string() : c.preset;
  read(j, "preset", preset);
  c = ExperimentConfig::named(preset);
  overlay(j, "system", c.sys);
  overlay(j, "pilot", c.pilot);
  read(j, "clusters", c.clusters);
  read(j, "rays_per_cluster", c.rays_per_cluster);
  overlay(j, "scenario", c.scenario);
  read(j, "n_scenarios", c.n_scenarios);
  read(j, "g_per_scenario", c.g_per_scenario);
  c.snr_grid = read_grid(j, "snr_grid", c.snr_grid);
  c.snr_h_grid = read_grid(j, "snr_h_grid", c.snr_h_grid);
  c.snr_pilot_grid = read_grid(j, "snr_pilot_grid", c.snr_pilot_grid);
  read(j, "clean_channel_labels", c.clean_channel_labels);
  overlay(j, "hybrid", c.hybrid);
  if (j.contains("nets")) {
    const json& n = j["nets"];
    check_keys(n, {"conv_filters", "dense1", "dense2", "dropout"}, "nets");
    read(n, "conv_filters", c.nets.conv_filters);
    read(n, "dense1", c.nets.dense1);
    read(n, "dense2", c.nets.dense2);
    read(n, "dropout", c.nets.dropout);
  }
  overlay(j, "train", c.train);
  read(j, "snr_db", c.snr_db);
  read(j, "noise_var", c.noise_var);
  read(j, "trials", c.trials);
  if (j.contains("online")) {
    const json& o = j["online"];
    check_keys(o, {"zeta", "g_online", "steps", "drift_max_deg", "pilot_snr_db", "train"}, "online");
    if (o.contains("zeta")) c.online.zeta = snr_from_json(o["zeta"]);
    read(o, "g_online", c.online.g_online);
    read(o, "steps", c.online.steps);
    read(o, "drift_max_deg", c.online.drift_max_deg);
    read(o, "pilot_snr_db", c.online.pilot_snr_db);
    overlay(o, "train", c.online.train);
  }
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, const std::string& preset) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  if (!j.contains("preset")) j["preset"] = preset;
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

// ---- models -----------------------------------------------------------------------

NetSpec net_spec_for(NetKind kind, Shape3 input, int output_dim, const NetSizes& s) {
  // Beamformer networks pool after each convolution; channel networks keep
  // the full resolution.
  const bool pooled = kind == NetKind::mc_hbnet || kind == NetKind::hbnet;
  return NetSpec::standard(input, output_dim, pooled, s.conv_filters, s.dense1, s.dense2, s.dropout);
}

FrameworkNets Models::predictors() const {
  FrameworkNets f;
  if (mc_hbnet) f.mc_hbnet = predictor_of(*mc_hbnet);
  if (mc_cenet) f.mc_cenet = predictor_of(*mc_cenet);
  if (hbnet) f.hbnet = predictor_of(*hbnet);
  for (const auto& n : sc_cenet) f.sc_cenet.push_back(predictor_of(n));
  return f;
}

bool Models::supports(Framework f) const {
  switch (f) {
    case Framework::f1: return mc_hbnet.has_value();
    case Framework::f2: return mc_cenet.has_value() && hbnet.has_value();
    case Framework::f3: return hbnet.has_value() && !sc_cenet.empty();
  }
  return false;
}

NeuralNet train_network(const Dataset& d, const ExperimentConfig& cfg, std::optional<NeuralNet> resume,
                        const TrainLog& log) {
  if (d.size() < 2) throw ConfigError(std::string(net_kind_name(d.kind)) + ": too few records to train");
  const std::uint64_t tag = static_cast<std::uint64_t>(d.kind) * 1000 + static_cast<std::uint64_t>(d.subcarrier + 1);
  NeuralNet net;
  if (resume) {
    if (resume->spec().input != d.feature_shape || resume->spec().output_dim() != d.label_length)
      throw ConfigError("resumed network does not match the dataset shapes");
    net = std::move(*resume);
  } else {
    net = NeuralNet(net_spec_for(d.kind, d.feature_shape, d.label_length, cfg.nets),
                    derive_seed(cfg.train.rng_seed, {0x1417, tag}));
  }
  net.normalization = d.normalization();
  TrainConfig tc = cfg.train;
  tc.rng_seed = derive_seed(cfg.train.rng_seed, {tag, net.epochs_trained});
  std::string name = net_kind_name(d.kind);
  if (d.subcarrier >= 0) name += "_" + std::to_string(d.subcarrier);
  const std::uint64_t first = net.epochs_trained;
  EpochCallback cb;
  if (log)
    cb = [&](int epoch, double tl, double vl) { log(name, static_cast<int>(first) + epoch, tl, vl); };
  train(net, d.normalized_features(), d.normalized_labels(), tc, cb);
  return net;
}

Models train_models(const GeneratedData& data, const ExperimentConfig& cfg,
                    const std::vector<Framework>& frameworks, const TrainLog& log) {
  bool f1 = false, f2 = false, f3 = false;
  for (auto f : frameworks) {
    f1 = f1 || f == Framework::f1;
    f2 = f2 || f == Framework::f2;
    f3 = f3 || f == Framework::f3;
  }
  Models m;
  if (f1) m.mc_hbnet = train_network(data.mc_hbnet, cfg, std::nullopt, log);
  if (f2) m.mc_cenet = train_network(data.mc_cenet, cfg, std::nullopt, log);
  if (f2 || f3) m.hbnet = train_network(data.hbnet, cfg, std::nullopt, log);
  if (f3)
    for (const auto& d : data.sc_cenet) m.sc_cenet.push_back(train_network(d, cfg, std::nullopt, log));
  return m;
}

void save_models(const Models& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  if (m.mc_hbnet) save_checkpoint(*m.mc_hbnet, dir / model_file(NetKind::mc_hbnet, -1));
  if (m.mc_cenet) save_checkpoint(*m.mc_cenet, dir / model_file(NetKind::mc_cenet, -1));
  if (m.hbnet) save_checkpoint(*m.hbnet, dir / model_file(NetKind::hbnet, -1));
  for (std::size_t k = 0; k < m.sc_cenet.size(); ++k)
    save_checkpoint(m.sc_cenet[k], dir / model_file(NetKind::sc_cenet, static_cast<int>(k)));
}

Models load_models(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("model directory " + dir.string() + " does not exist");
  Models m;
  auto load = [&](NetKind kind, int sc) -> std::optional<NeuralNet> {
    const auto p = dir / model_file(kind, sc);
    if (!std::filesystem::exists(p)) return std::nullopt;
    return load_checkpoint(p);
  };
  m.mc_hbnet = load(NetKind::mc_hbnet, -1);
  m.mc_cenet = load(NetKind::mc_cenet, -1);
  m.hbnet = load(NetKind::hbnet, -1);
  for (int k = 0;; ++k) {
    auto n = load(NetKind::sc_cenet, k);
    if (!n) break;
    m.sc_cenet.push_back(std::move(*n));
  }
  return m;
}

// ---- evaluation -------------------------------------------------------------------

Sweep parse_sweep(const std::string& name) {
  for (Sweep s : {Sweep::snr, Sweep::snr_pilot_test, Sweep::snr_pilot_symbol, Sweep::pilots_mt,
                  Sweep::angle_mismatch, Sweep::cluster_mismatch})
    if (name == sweep_name(s)) return s;
  throw ConfigError("unknown sweep \"" + name +
                    "\" (expected snr, snr_pilot_test, snr_pilot_symbol, pilots_mt, angle_mismatch "
                    "or cluster_mismatch)");
}

const char* sweep_name(Sweep s) {
  switch (s) {
    case Sweep::snr: return "snr";
    case Sweep::snr_pilot_test: return "snr_pilot_test";
    case Sweep::snr_pilot_symbol: return "snr_pilot_symbol";
    case Sweep::pilots_mt: return "pilots_mt";
    case Sweep::angle_mismatch: return "angle_mismatch";
    case Sweep::cluster_mismatch: return "cluster_mismatch";
  }
  return "?";
}

const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> m{"F1", "F2", "F3", "LS", "LMMSE", "ADCE", "PE", "MO", "FD"};
  return m;
}

Evaluation evaluate(const Models& models, const ExperimentConfig& cfg, Sweep sweep,
                    const std::vector<double>& grid, int trials, const std::vector<std::string>& methods,
                    std::uint64_t seed) {
  cfg.validate();
  if (grid.empty()) throw ConfigError("evaluate: empty sweep grid");
  if (trials < 1) throw ConfigError("evaluate: trials must be at least 1");
  for (const auto& m : methods) {
    bool known = false;
    for (const auto& k : all_methods()) known = known || k == m;
    if (!known) throw ConfigError("unknown method \"" + m + "\"");
    if (is_learned(m) && !models.supports(framework_of(m)))
      throw ConfigError("no trained model for " + m);
  }
  if (sweep == Sweep::cluster_mismatch)
    for (double v : grid)
      if (v < 1 || v != std::floor(v)) throw ConfigError("cluster_mismatch values must be positive integers");
  if (sweep == Sweep::pilots_mt)
    for (double v : grid)
      if (v < 1 || v != std::floor(v)) throw ConfigError("pilots_mt values must be positive integers");

  const GenerationConfig gen = cfg.generation();
  const FrameworkNets nets = models.predictors();
  const std::size_t n_methods = methods.size();

  Evaluation ev;
  for (const auto& m : methods)
    for (const auto& metric : metrics_of(m))
      ev.samples[{m, metric}].assign(grid.size(), std::vector<double>(trials, kNaN));

  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const double v = grid[gi];
    PilotConfig pc = cfg.pilot;
    double snr_db = cfg.snr_db;
    switch (sweep) {
      case Sweep::snr: snr_db = v; break;
      case Sweep::snr_pilot_test: pc.pilot_snr_test_db = v; break;
      case Sweep::snr_pilot_symbol: pc.pilot_symbol_snr_db = v; break;
      case Sweep::pilots_mt: pc.m_tx = static_cast<int>(v); break;
      default: break;
    }
    try {
      pc.validate(cfg.sys);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const Shape3 pilot_shape{cfg.sys.n_subcarriers * pc.m_rx, pc.m_tx, 3};
    for (const auto& m : methods) {
      if (m == "F1" && models.mc_hbnet->spec().input != pilot_shape)
        throw ConfigError("F1 network was trained for a different pilot shape");
      if (m == "F2" && models.mc_cenet->spec().input != pilot_shape)
        throw ConfigError("F2 network was trained for a different pilot shape");
      if (m == "F3" && models.sc_cenet.front().spec().input != Shape3{pc.m_rx, pc.m_tx, 3})
        throw ConfigError("F3 networks were trained for a different pilot shape");
    }
    const TrainingBeams beams = training_beamformers(cfg.sys, pc);
    const double rho = std::pow(10.0, snr_db / 10.0);
    const AngleGrid agrid = AngleGrid::defaults(cfg.sys, cfg.clusters, cfg.rays_per_cluster);
    const bool full_pilots = pc.m_tx >= cfg.sys.n_tx && pc.m_rx >= cfg.sys.n_rx;

    parallel_for(static_cast<std::size_t>(trials), cfg.threads, [&](std::size_t j) {
      const std::uint64_t rs = derive_seed(seed, {0xe7a1, j});
      ChannelScenario scen = dataset_scenario(gen, static_cast<int>(j % gen.n_scenarios));
      if (sweep == Sweep::angle_mismatch) scen = perturb_angles(scen, v, derive_seed(rs, {3}));
      if (sweep == Sweep::cluster_mismatch) {
        const int l = static_cast<int>(v);
        if (l > static_cast<int>(scen.cluster_count()))
          scen = extend_clusters(scen, cfg.sys, l - static_cast<int>(scen.cluster_count()),
                                 derive_seed(rs, {4}), cfg.scenario);
        else
          scen.clusters.resize(l);
      }
      const ChannelTensor h = frequency_channel(cfg.sys, scen);
      const ReceivedPilot y = receive_pilots(h, beams, pc, derive_seed(rs, {1}), PilotStage::test);
      auto put = [&](const std::string& m, const char* metric, double value) {
        ev.samples.at({m, metric})[gi][j] = value;
      };
      for (std::size_t k = 0; k < n_methods; ++k) {
        const std::string& m = methods[k];
        try {
          if (is_learned(m)) {
            const FrameworkOutput o = run_framework(framework_of(m), nets, y, cfg.sys);
            if (o.channel) put(m, "nmse", nmse(h, *o.channel));
            put(m, "rate", spectral_efficiency(h, o.beams, rho, cfg.noise_var));
          } else if (m == "LS") {
            put(m, "nmse", nmse(h, full_pilots ? ls_estimate(y, beams, pc.tx_power)
                                               : pinv_ls_estimate(y, beams, pc.tx_power)));
          } else if (m == "LMMSE") {
            // Genie prior power; noise variance as set by the preamble SNR.
            double sig = 0.0;
            for (std::size_t s = 0; s < h.size(); ++s) sig += (h[s] * beams.f_bar).squaredNorm();
            sig *= pc.tx_power / (static_cast<double>(h.size()) * h.rows() * beams.f_bar.cols());
            const double nv = pc.noise_var ? *pc.noise_var : noise_variance_for_snr(sig, pc.pilot_snr_test_db);
            put(m, "nmse", nmse(h, lmmse_estimate(y, beams, pc.tx_power, h.mean_entry_power(), nv)));
          } else if (m == "ADCE") {
            put(m, "nmse", nmse(h, adce_estimate(y, beams, agrid, pc.tx_power, cfg.sys.spacing_wavelengths)));
          } else if (m == "FD") {
            put(m, "rate", spectral_efficiency(h, unconstrained_beamformers(h, cfg.sys.n_streams, rho, cfg.noise_var),
                                               rho, cfg.noise_var));
          } else {
            HybridOptions ho = cfg.hybrid;
            ho.method = m == "MO" ? HybridMethod::manifold : HybridMethod::phase_extraction;
            ho.altmin.seed = derive_seed(rs, {5});
            const HybridDesign d = design_hybrid(h, cfg.sys, rho, cfg.noise_var, ho);
            put(m, "rate", spectral_efficiency(h, d.beams, rho, cfg.noise_var));
          }
        } catch (const DegenerateError&) {
        } catch (const NumericalError&) {
        } catch (const IllPosedError&) {
        }
      }
    });
  }

  for (std::size_t gi = 0; gi < grid.size(); ++gi)
    for (const auto& m : methods)
      for (const auto& metric : metrics_of(m)) {
        const auto& xs = ev.samples.at({m, metric})[gi];
        double s = 0.0;
        int n = 0;
        for (double x : xs)
          if (std::isfinite(x)) {
            s += x;
            ++n;
          }
        ResultRow r{grid[gi], m, metric, n ? s / n : kNaN, 0.0, n};
        if (n > 1) {
          double q = 0.0;
          for (double x : xs)
            if (std::isfinite(x)) q += (x - r.mean) * (x - r.mean);
          r.std = std::sqrt(q / (n - 1));
        }
        ev.rows.push_back(r);
      }
  return ev;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, const std::string& config_hash) {
  os << "# config_hash " << config_hash << '\n';
  os << "sweep_value,method,metric,mean,std,trials\n";
  os << std::setprecision(10);
  for (const auto& r : rows)
    os << r.sweep_value << ',' << r.method << ',' << r.metric << ',' << r.mean << ',' << r.std << ','
       << r.trials << '\n';
}

// ---- online -----------------------------------------------------------------------

DriftRun run_drift(const NeuralNet& mc_cenet, const NeuralNet& hbnet, const ExperimentConfig& cfg,
                   double zeta, std::uint64_t seed) {
  const GenerationConfig gen = cfg.generation();
  OnlineConfig oc;
  oc.sys = cfg.sys;
  oc.pilot = cfg.pilot;
  oc.pilot.snr_pilot_db = cfg.online.pilot_snr_db;
  oc.adce_grid = AngleGrid::defaults(cfg.sys, cfg.clusters, cfg.rays_per_cluster);
  oc.zeta = zeta;
  oc.g_online = cfg.online.g_online;
  oc.grid = gen.grid;
  oc.train = cfg.online.train;
  oc.snr_db = cfg.snr_db;
  oc.noise_var = cfg.noise_var;
  oc.seed = derive_seed(seed, {0x0e});
  OnlineState st(mc_cenet, hbnet, oc);

  const ChannelScenario base = dataset_scenario(gen, 0);
  const std::uint64_t drift_seed = derive_seed(seed, {0xd21f});
  const TrainingBeams beams = training_beamformers(cfg.sys, oc.pilot);
  const int steps = cfg.online.steps;
  auto channel_at = [&](int t) {
    const double sigma = steps > 1 ? cfg.online.drift_max_deg * t / (steps - 1) : 0.0;
    return frequency_channel(cfg.sys, perturb_angles(base, sigma, drift_seed));
  };
  st.initialize(receive_pilots(channel_at(0), beams, oc.pilot, derive_seed(seed, {0x1a})));
  for (int t = 0; t < steps; ++t) {
    const ChannelTensor h = channel_at(t);
    st.step(receive_pilots(h, beams, oc.pilot, derive_seed(seed, {0x0b, static_cast<std::uint64_t>(t)})), &h);
  }
  return {st.history(), st.updates(), st.adce_calls(), st.mc_cenet(), st.hbnet()};
}

}  // namespace wbhb
