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

#ifndef WBHB_DATASET_HPP
#define WBHB_DATASET_HPP

#include "wbhb/channel.hpp"
#include "wbhb/frameworks.hpp"
#include "wbhb/hybrid.hpp"
#include "wbhb/neural.hpp"
#include "wbhb/pilot.hpp"
#include "wbhb/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace wbhb {

enum class NetKind : std::uint32_t { mc_hbnet = 1, mc_cenet = 2, hbnet = 3, sc_cenet = 4 };

const char* net_kind_name(NetKind kind);

/// Training records of one network. Records are columns stored as float.
struct Dataset {
  NetKind kind = NetKind::mc_hbnet;
  int subcarrier = -1;  // SC-CENet only
  SystemConfig cfg;
  Shape3 feature_shape{0, 0, 3};
  int label_length = 0;
  Eigen::MatrixXf features;  // feature_shape.size() x T
  Eigen::MatrixXf labels;    // label_length x T
  // Per-channel feature and per-component label standardization.
  Eigen::VectorXf feature_mean;
  Eigen::VectorXf feature_std;
  Eigen::VectorXf label_mean;
  Eigen::VectorXf label_std;

  std::size_t size() const { return static_cast<std::size_t>(features.cols()); }
  /// Recomputes the statistics from the records; zero spreads become one.
  void fit_statistics();
  Normalization normalization() const;
  /// Normalized records in double precision, ready for `train`.
  RMatrix normalized_features() const;
  RMatrix normalized_labels() const;
};

/// Bitwise comparison of every header field and record.
bool identical(const Dataset& a, const Dataset& b);

/// Binary layout, little-endian: "WBDS", u32 version, u32 kind, u32 subcarrier
/// (0xffffffff when unused), system snapshot (u32 n_tx n_rx n_rf n_streams
/// n_subcarriers cp_len unit_gain, f64 carrier_hz bandwidth_hz
/// spacing_wavelengths symbol_period_s), u64 T, u32 h w c, u32 label length,
/// f32 feature mean[c] std[c], f32 label mean[L] std[L], then T records of
/// f32 features followed by f32 label.
void write_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

struct GridPoint {
  double snr_db = 0.0;        // rate SNR used for the beamformer labels
  double snr_h_db = 20.0;     // channel corruption
  double snr_pilot_db = 20.0; // preamble noise
};

/// Pairs the grids entry by entry; a single-entry grid is broadcast.
std::vector<GridPoint> zip_grids(const std::vector<double>& snr, const std::vector<double>& snr_h,
                                 const std::vector<double>& snr_pilot);

/// SNR {-10, 0, 10}, SNR_H {15, 20, 25}, SNR_N {20, 30, 40} dB.
std::vector<GridPoint> default_grid();

struct GenerationConfig {
  SystemConfig sys;
  PilotConfig pilot;
  int clusters = 10;
  int rays_per_cluster = 5;
  ScenarioOptions scenario;
  int n_scenarios = 100;
  int g_per_scenario = 100;
  std::vector<GridPoint> grid = default_grid();
  std::uint64_t seed = 0;
  double noise_var = 1.0;              // sigma_n^2 of the rate SNR
  bool clean_channel_labels = false;   // channel labels from H^(n) instead of the corrupted copy
  HybridOptions hybrid;                // altmin.seed is replaced per scenario
  int threads = 0;                     // 0: hardware concurrency

  void validate() const;
  std::size_t record_count() const {
    return static_cast<std::size_t>(n_scenarios) * g_per_scenario * grid.size();
  }
};

/// Geometry of scenario n; fixed by the master seed.
ChannelScenario dataset_scenario(const GenerationConfig& g, int n);

struct SkippedRecord {
  int scenario = 0;
  int realization = 0;
  int grid_index = 0;
  std::string reason;
};

struct GeneratedData {
  Dataset mc_hbnet;
  Dataset mc_cenet;
  Dataset hbnet;
  std::vector<Dataset> sc_cenet;  // one per subcarrier
  std::vector<SkippedRecord> skipped;
};

/// One record per (scenario n, realization g, grid point), in that order:
/// corrupt H^(n) at SNR_H, synthesize pilots from the corrupted channel at
/// SNR_N, design the hybrid beamformer on the corrupted channel at SNR, and
/// emit the four kinds of records. Realizations whose solver fails are
/// skipped and listed. `log` receives one line per skipped record.
GeneratedData generate_datasets(const GenerationConfig& g,
                                const std::function<void(const std::string&)>& log = {});

/// Writes mc_hbnet.wbds, mc_cenet.wbds, hbnet.wbds and sc_cenet_<m>.wbds, a
/// JSON sidecar next to each file and manifest.json.
void write_generated(const GeneratedData& data, const GenerationConfig& g,
                     const std::filesystem::path& dir);
/// Reads every file listed by manifest.json.
GeneratedData read_generated(const std::filesystem::path& dir);

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// rethrown from the lowest failing index.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace wbhb

#endif  // WBHB_DATASET_HPP
