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

#ifndef WBHB_EXPERIMENTS_HPP
#define WBHB_EXPERIMENTS_HPP

#include "wbhb/config.hpp"
#include "wbhb/dataset.hpp"
#include "wbhb/frameworks.hpp"
#include "wbhb/neural.hpp"
#include "wbhb/online.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace wbhb {

struct NetSizes {
  int conv_filters = 32;
  int dense1 = 512;
  int dense2 = 256;
  double dropout = 0.5;
};

struct OnlineSettings {
  double zeta = 0.007;
  int g_online = 200;
  int steps = 100;
  double drift_max_deg = 20.0;  // sigma ramps linearly from 0 to this over the run
  double pilot_snr_db = 20.0;   // preamble SNR of the deployment observations
  TrainConfig train = OnlineConfig::online_train_defaults();
};

/// Everything a command needs, as one JSON document.
struct ExperimentConfig {
  std::string preset = "paper";
  SystemConfig sys;
  PilotConfig pilot;
  int clusters = 10;
  int rays_per_cluster = 5;
  ScenarioOptions scenario;
  int n_scenarios = 100;
  int g_per_scenario = 100;
  std::vector<double> snr_grid{-10.0, 0.0, 10.0};
  std::vector<double> snr_h_grid{15.0, 20.0, 25.0};
  std::vector<double> snr_pilot_grid{20.0, 30.0, 40.0};
  bool clean_channel_labels = false;
  HybridOptions hybrid;
  NetSizes nets;
  TrainConfig train;
  double snr_db = 0.0;  // rate SNR of evaluations
  double noise_var = 1.0;
  int trials = 100;
  OnlineSettings online;
  std::uint64_t seed = 0;
  int threads = 0;

  static ExperimentConfig paper();
  /// Small arrays and networks for minute-scale runs.
  static ExperimentConfig desk();
  /// Throws ConfigError for unknown names.
  static ExperimentConfig named(const std::string& preset);

  GenerationConfig generation() const;
  void validate() const;
};

void to_json(json& j, const ExperimentConfig& c);
/// Overlays `j` on the preset named by its "preset" key (paper if absent).
void from_json(const json& j, ExperimentConfig& c);
/// Reads a config file; `preset` selects the base when the file has none.
ExperimentConfig load_experiment_config(const std::filesystem::path& path, const std::string& preset);

// ---- models ---------------------------------------------------------------------

NetSpec net_spec_for(NetKind kind, Shape3 input, int output_dim, const NetSizes& sizes);

struct Models {
  std::optional<NeuralNet> mc_hbnet;
  std::optional<NeuralNet> mc_cenet;
  std::optional<NeuralNet> hbnet;
  std::vector<NeuralNet> sc_cenet;

  /// Predictors referencing these networks; `*this` must outlive them.
  FrameworkNets predictors() const;
  bool supports(Framework f) const;
};

using TrainLog = std::function<void(const std::string& net, int epoch, double train_loss, double val_loss)>;

/// Builds (or continues) one network on a dataset with the dataset's
/// normalization. The init seed derives from the training seed and the kind.
NeuralNet train_network(const Dataset& d, const ExperimentConfig& cfg,
                        std::optional<NeuralNet> resume = std::nullopt, const TrainLog& log = {});

/// Trains the networks needed by `frameworks`.
Models train_models(const GeneratedData& data, const ExperimentConfig& cfg,
                    const std::vector<Framework>& frameworks, const TrainLog& log = {});

/// <kind>.wbnn files (sc_cenet_<m>.wbnn per subcarrier).
void save_models(const Models& m, const std::filesystem::path& dir);
/// Loads whichever checkpoints exist in `dir`.
Models load_models(const std::filesystem::path& dir);

// ---- evaluation -----------------------------------------------------------------

enum class Sweep { snr, snr_pilot_test, snr_pilot_symbol, pilots_mt, angle_mismatch, cluster_mismatch };

Sweep parse_sweep(const std::string& name);
const char* sweep_name(Sweep s);

/// Known methods: F1 F2 F3 (learned), LS LMMSE ADCE (estimators), PE MO FD
/// (beamformers from the true channel).
const std::vector<std::string>& all_methods();

struct ResultRow {
  double sweep_value = 0.0;
  std::string method;
  std::string metric;  // "rate" (bits/s/Hz) or "nmse"
  double mean = 0.0;
  double std = 0.0;
  int trials = 0;  // successful trials
};

struct Evaluation {
  std::vector<ResultRow> rows;
  // (method, metric) -> per grid point -> per trial value, NaN where the trial failed.
  std::map<std::pair<std::string, std::string>, std::vector<std::vector<double>>> samples;
};

/// Trial j draws scenario j-th from the training pool of `cfg` (same
/// geometry as generation), applies the sweep perturbation, receives test
/// pilots with fresh noise and runs every requested method. Trials share
/// their seeds across grid points.
Evaluation evaluate(const Models& models, const ExperimentConfig& cfg, Sweep sweep,
                    const std::vector<double>& grid, int trials, const std::vector<std::string>& methods,
                    std::uint64_t seed);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, const std::string& config_hash);

// ---- online ---------------------------------------------------------------------

struct DriftRun {
  std::vector<OnlineStepLog> log;
  int updates = 0;
  int adce_calls = 0;
  NeuralNet mc_cenet;  // networks at the end of the run
  NeuralNet hbnet;
};

/// Deploys F2's networks on scenario 0 of the training pool while its angles
/// drift from 0 to drift_max_deg over `steps` observations.
DriftRun run_drift(const NeuralNet& mc_cenet, const NeuralNet& hbnet, const ExperimentConfig& cfg,
                   double zeta, std::uint64_t seed);

}  // namespace wbhb

#endif  // WBHB_EXPERIMENTS_HPP
