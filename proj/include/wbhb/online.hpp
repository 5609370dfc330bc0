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

#ifndef WBHB_ONLINE_HPP
#define WBHB_ONLINE_HPP

#include "wbhb/chest.hpp"
#include "wbhb/dataset.hpp"
#include "wbhb/hybrid.hpp"
#include "wbhb/neural.hpp"
#include "wbhb/pilot.hpp"
#include "wbhb/types.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

namespace wbhb {

/// (1/(M N_R N_T)) sum_m ||H_dl[m] - H_temp[m]||_F.
double eta_metric(const ChannelTensor& h_dl, const ChannelTensor& h_temp);

struct OnlineConfig {
  SystemConfig sys;
  PilotConfig pilot;
  AngleGrid adce_grid;
  double zeta = 0.007;
  int g_online = 200;
  // Augmentation SNRs, cycled over the G online samples.
  std::vector<GridPoint> grid = default_grid();
  // Optimizer settings; max_epochs caps the refresh and early stopping is off.
  TrainConfig train = online_train_defaults();
  double snr_db = 0.0;  // rate SNR of the logged spectral efficiency
  double noise_var = 1.0;
  std::uint64_t seed = 0;

  static TrainConfig online_train_defaults();
  void validate() const;
};

struct OnlineStepLog {
  int step = 0;
  double eta = 0.0;  // triggering value: DL estimate before any update vs the stored estimate
  double eta_refreshed = std::numeric_limits<double>::quiet_NaN();  // DL before the update vs refreshed store
  double eta_after = std::numeric_limits<double>::quiet_NaN();  // refreshed DL vs refreshed store
  bool updated = false;
  double nmse = std::numeric_limits<double>::quiet_NaN();  // against the true channel, if given
  double rate = std::numeric_limits<double>::quiet_NaN();
};

struct OnlineStepResult {
  ChannelTensor h_dl;
  HybridBeamformer beams;
  OnlineStepLog log;
};

/// Threshold-triggered refresh of an MC-CENet/HBNet pair. The stored ADCE
/// estimate is only replaced on updates; steps run strictly in sequence.
class OnlineState {
 public:
  OnlineState(NeuralNet mc_cenet, NeuralNet hbnet, OnlineConfig cfg);

  /// Runs ADCE on the first observation and stores it.
  void initialize(const ReceivedPilot& y0);
  /// One deployment step. `truth` only feeds the NMSE and rate columns.
  OnlineStepResult step(const ReceivedPilot& y, const ChannelTensor* truth = nullptr);

  const NeuralNet& mc_cenet() const { return mc_cenet_; }
  const NeuralNet& hbnet() const { return hbnet_; }
  const ChannelTensor& h_temp() const { return h_temp_; }
  const OnlineConfig& config() const { return cfg_; }
  const std::vector<OnlineStepLog>& history() const { return history_; }
  int adce_calls() const { return adce_calls_; }
  int updates() const { return updates_; }
  bool initialized() const { return !h_temp_.empty(); }

 private:
  void check_pilot(const ReceivedPilot& y) const;
  ChannelTensor predict_channel(const ReceivedPilot& y) const;
  HybridBeamformer predict_beams(const ChannelTensor& h) const;
  ChannelTensor run_adce(const ReceivedPilot& y);
  void refresh(const ReceivedPilot& y, const ChannelTensor& h_ad, int t);

  NeuralNet mc_cenet_;
  NeuralNet hbnet_;
  OnlineConfig cfg_;
  TrainingBeams beams_;
  ChannelTensor h_temp_;
  std::vector<OnlineStepLog> history_;
  int adce_calls_ = 0;
  int updates_ = 0;
};

/// Columns step,eta,zeta,updated,eta_refreshed,eta_after,nmse,rate after a "# config_hash"
/// comment line.
void write_online_csv(std::ostream& os, const std::vector<OnlineStepLog>& log, double zeta,
                      const std::string& config_hash);

}  // namespace wbhb

#endif  // WBHB_ONLINE_HPP
