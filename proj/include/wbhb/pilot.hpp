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

#ifndef WBHB_PILOT_HPP
#define WBHB_PILOT_HPP

#include "wbhb/types.hpp"

#include <cstdint>
#include <optional>

namespace wbhb {

struct PilotConfig {
  int m_tx = 64;
  int m_rx = 16;
  double tx_power = 1.0;
  double snr_pilot_db = 20.0;       // training-stage SNR of the preamble
  double pilot_snr_test_db = 20.0;  // prediction-stage SNR of the preamble
  double pilot_symbol_snr_db = kNoNoise;  // corruption of S_bar itself (test stage only)
  // Absolute sigma_N^2; overrides the SNR-derived variance when set.
  std::optional<double> noise_var;

  void validate(const SystemConfig& cfg) const;
};

enum class PilotStage { training, test };

/// DFT training beams: F_bar = first M_T columns of the N_T-point DFT matrix,
/// W_bar = first M_R columns of the N_R-point DFT matrix.
struct TrainingBeams {
  CMatrix f_bar;  // N_T x M_T
  CMatrix w_bar;  // N_R x M_R
};

/// First `cols` columns of the n-point DFT matrix, entries exp(-j 2 pi i k / n).
CMatrix dft_columns(int n, int cols);

TrainingBeams training_beamformers(const SystemConfig& cfg, const PilotConfig& pcfg);

/// Number of channel uses needed to apply M_R combiners with N_RF chains.
int pilot_channel_uses(const SystemConfig& cfg, const PilotConfig& pcfg);

/// Y[m] = W_bar^H H[m] F_bar S_bar + W_bar^H N_bar[m] with S_bar = sqrt(P_T) I.
/// The stage picks the preamble SNR; the test stage also applies pilot-symbol
/// corruption when pilot_symbol_snr_db is finite.
ReceivedPilot receive_pilots(const ChannelTensor& h, const SystemConfig& cfg,
                             const PilotConfig& pcfg, std::uint64_t seed,
                             PilotStage stage = PilotStage::training);

/// Same as receive_pilots with explicit beams (avoids rebuilding the DFT blocks).
ReceivedPilot receive_pilots(const ChannelTensor& h, const TrainingBeams& beams,
                             const PilotConfig& pcfg, std::uint64_t seed,
                             PilotStage stage = PilotStage::training);

/// Adds fresh combined noise W_bar^H N_bar with sigma^2 set from `snr_db`
/// relative to the mean entry power of `y` divided by ||w_v||^2.
ReceivedPilot add_pilot_noise(const ReceivedPilot& y, const TrainingBeams& beams, double snr_db,
                              std::uint64_t seed);

}  // namespace wbhb

#endif  // WBHB_PILOT_HPP
