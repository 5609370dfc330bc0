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

#ifndef WBHB_CHANNEL_HPP
#define WBHB_CHANNEL_HPP

#include "wbhb/types.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace wbhb {

struct Ray {
  double delay_offset_s = 0.0;  // tau_r
  double aoa_shift_rad = 0.0;   // subtracted from the cluster AOA
  double aod_shift_rad = 0.0;   // subtracted from the cluster AOD
  cplx gain{1.0, 0.0};
};

struct Cluster {
  double delay_s = 0.0;
  double aoa_rad = 0.0;
  double aod_rad = 0.0;
  std::vector<Ray> rays;
};

/// One propagation realization: L clusters of N_sc rays each.
struct ChannelScenario {
  std::vector<Cluster> clusters;

  std::size_t cluster_count() const { return clusters.size(); }
  std::size_t rays_per_cluster() const {
    return clusters.empty() ? 0 : clusters.front().rays.size();
  }
};

/// Distributions used when drawing random scenarios.
struct ScenarioOptions {
  double ray_angle_spread_deg = 2.0;  // std of per-ray AOA/AOD shifts
  double ray_delay_max_symbols = 1.0;  // tau_r ~ U[0, this * T_s]
};

/// ULA response exp(j 2 pi spacing k sin(angle)), k = 0..n-1.
template <typename Scalar = double>
ComplexVectorT<Scalar> steering_vector(int n, Scalar angle_rad, Scalar spacing_wavelengths) {
  if (n <= 0) throw std::invalid_argument("steering_vector: antenna count must be >= 1");
  ComplexVectorT<Scalar> a(n);
  const Scalar phase_step = Scalar(2) * std::numbers::pi_v<Scalar> * spacing_wavelengths *
                            std::sin(angle_rad);
  for (int k = 0; k < n; ++k) a(k) = std::polar(Scalar(1), phase_step * Scalar(k));
  return a;
}

/// Normalized sinc pulse p(t) = sinc(t / T_s).
double pulse_shape(double t_s, double symbol_period_s);

/// Delay-domain tap H_bar[d] (N_R x N_T).
CMatrix delay_tap_channel(const SystemConfig& cfg, const ChannelScenario& scen, int d);

/// All D taps H_bar[0..D-1].
std::vector<CMatrix> delay_taps(const SystemConfig& cfg, const ChannelScenario& scen);

/// M-point DFT of the taps: H[m] = sum_d H_bar[d] exp(-j 2 pi m d / M).
ChannelTensor frequency_channel(const SystemConfig& cfg, const ChannelScenario& scen);

/// Same transform applied to precomputed taps.
ChannelTensor taps_to_subcarriers(const std::vector<CMatrix>& taps, int n_subcarriers);

ChannelScenario random_scenario(const SystemConfig& cfg, int clusters, int rays_per_cluster,
                                std::uint64_t seed, const ScenarioOptions& opts = {});

/// Adds i.i.d. CN(0, sigma_H^2) per entry with sigma_H^2 set from the tensor's
/// mean entry power and `snr_h_db`. kNoNoise returns the input unchanged.
ChannelTensor corrupt_channel(const ChannelTensor& h, double snr_h_db, std::uint64_t seed);

/// Redraws each cluster AOA/AOD from N(original, sigma^2). Ray shifts are kept.
/// The same seed gives the same standardized draws, so a fixed seed with a
/// growing sigma traces a smooth drift.
ChannelScenario perturb_angles(const ChannelScenario& scen, double sigma_deg, std::uint64_t seed);

/// Appends `extra` uniformly drawn clusters shaped like the existing ones.
ChannelScenario extend_clusters(const ChannelScenario& scen, const SystemConfig& cfg, int extra,
                                std::uint64_t seed, const ScenarioOptions& opts = {});

}  // namespace wbhb

#endif  // WBHB_CHANNEL_HPP
