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

#include "wbhb/pilot.hpp"

#include "wbhb/random.hpp"

#include <stdexcept>
#include <string>

namespace wbhb {

void PilotConfig::validate(const SystemConfig& cfg) const {
  if (m_tx < 1 || m_tx > cfg.n_tx)
    throw std::invalid_argument("PilotConfig: m_tx must be in [1, " + std::to_string(cfg.n_tx) + "]");
  if (m_rx < 1 || m_rx > cfg.n_rx)
    throw std::invalid_argument("PilotConfig: m_rx must be in [1, " + std::to_string(cfg.n_rx) + "]");
  if (!(tx_power > 0.0)) throw std::invalid_argument("PilotConfig: tx_power must be positive");
  if (noise_var && !(*noise_var >= 0.0))
    throw std::invalid_argument("PilotConfig: noise_var must be >= 0");
}

CMatrix dft_columns(int n, int cols) {
  if (n < 1 || cols < 1 || cols > n) throw std::invalid_argument("dft_columns: need 1 <= cols <= n");
  CMatrix f(n, cols);
  for (int k = 0; k < cols; ++k)
    for (int i = 0; i < n; ++i) {
      const auto ik = (static_cast<long long>(i) * k) % n;
      f(i, k) = std::polar(1.0, -2.0 * kPi * static_cast<double>(ik) / n);
    }
  return f;
}

TrainingBeams training_beamformers(const SystemConfig& cfg, const PilotConfig& pcfg) {
  pcfg.validate(cfg);
  return {dft_columns(cfg.n_tx, pcfg.m_tx), dft_columns(cfg.n_rx, pcfg.m_rx)};
}

int pilot_channel_uses(const SystemConfig& cfg, const PilotConfig& pcfg) {
  return (pcfg.m_rx + cfg.n_rf - 1) / cfg.n_rf;
}

ReceivedPilot receive_pilots(const ChannelTensor& h, const SystemConfig& cfg,
                             const PilotConfig& pcfg, std::uint64_t seed, PilotStage stage) {
  pcfg.validate(cfg);
  if (h.rows() != cfg.n_rx || h.cols() != cfg.n_tx)
    throw std::invalid_argument("receive_pilots: channel is not N_R x N_T");
  return receive_pilots(h, training_beamformers(cfg, pcfg), pcfg, seed, stage);
}

ReceivedPilot receive_pilots(const ChannelTensor& h, const TrainingBeams& beams,
                             const PilotConfig& pcfg, std::uint64_t seed, PilotStage stage) {
  const auto n_rx = beams.w_bar.rows();
  const auto n_tx = beams.f_bar.rows();
  const auto m_tx = beams.f_bar.cols();
  if (h.empty() || h.rows() != n_rx || h.cols() != n_tx)
    throw std::invalid_argument("receive_pilots: channel does not match the training beams");

  Rng rng(seed);
  CMatrix s_bar = std::sqrt(pcfg.tx_power) * CMatrix::Identity(m_tx, m_tx);
  if (stage == PilotStage::test) {
    const double s_var = noise_variance_for_snr(pcfg.tx_power, pcfg.pilot_symbol_snr_db);
    if (s_var > 0.0) s_bar += complex_normal_matrix(rng, m_tx, m_tx, s_var);
  }

  // Noiseless transmit-side signal H F_bar S_bar, needed both for Y and for
  // the SNR reference power.
  std::vector<CMatrix> hfs(h.size());
  double power = 0.0;
  double count = 0.0;
  for (std::size_t m = 0; m < h.size(); ++m) {
    hfs[m] = h[m] * beams.f_bar * s_bar;
    power += hfs[m].squaredNorm();
    count += static_cast<double>(hfs[m].size());
  }
  power /= count;

  const double snr_db = stage == PilotStage::training ? pcfg.snr_pilot_db : pcfg.pilot_snr_test_db;
  const double var = pcfg.noise_var ? *pcfg.noise_var : noise_variance_for_snr(power, snr_db);

  ReceivedPilot y;
  y.subcarriers.resize(h.size());
  for (std::size_t m = 0; m < h.size(); ++m) {
    CMatrix rx = hfs[m];
    if (var > 0.0) rx += complex_normal_matrix(rng, n_rx, m_tx, var);
    y[m] = beams.w_bar.adjoint() * rx;
  }
  return y;
}

ReceivedPilot add_pilot_noise(const ReceivedPilot& y, const TrainingBeams& beams, double snr_db,
                              std::uint64_t seed) {
  double power = 0.0;
  double count = 0.0;
  for (const auto& m : y.subcarriers) {
    power += m.squaredNorm();
    count += static_cast<double>(m.size());
  }
  // Combining with W_bar scales per-antenna power by ||w_v||^2 = N_R.
  const double n_rx = static_cast<double>(beams.w_bar.rows());
  const double var = noise_variance_for_snr(power / count / n_rx, snr_db);
  ReceivedPilot out = y;
  if (var == 0.0) return out;
  Rng rng(seed);
  for (auto& m : out.subcarriers)
    m += beams.w_bar.adjoint() * complex_normal_matrix(rng, beams.w_bar.rows(), m.cols(), var);
  return out;
}

}  // namespace wbhb
