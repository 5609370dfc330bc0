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

#include "wbhb/channel.hpp"

#include "wbhb/random.hpp"

#include <algorithm>
#include <string>

namespace wbhb {

double pulse_shape(double t_s, double symbol_period_s) {
  const double x = t_s / symbol_period_s;
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

namespace {

void check_scenario(const ChannelScenario& scen) {
  if (scen.clusters.empty()) throw std::invalid_argument("ChannelScenario: no clusters");
  const auto n_sc = scen.clusters.front().rays.size();
  if (n_sc == 0) throw std::invalid_argument("ChannelScenario: cluster without rays");
  for (const auto& c : scen.clusters)
    if (c.rays.size() != n_sc)
      throw std::invalid_argument("ChannelScenario: clusters must have equal ray counts");
}

double gain_scale(const SystemConfig& cfg, const ChannelScenario& scen) {
  const double l = static_cast<double>(scen.cluster_count());
  const double n_sc = static_cast<double>(scen.rays_per_cluster());
  double s = std::sqrt(static_cast<double>(cfg.n_tx) * cfg.n_rx / (n_sc * l));
  if (cfg.unit_gain) s /= std::sqrt(static_cast<double>(cfg.n_tx) * cfg.n_rx);
  return s;
}

// Pulse weights p(d T_s - tau_l - tau_r) for every ray, row d.
struct RayTable {
  std::vector<CVector> a_rx;
  std::vector<CVector> a_tx;
  std::vector<cplx> gain;
  std::vector<double> delay;
};

RayTable tabulate_rays(const SystemConfig& cfg, const ChannelScenario& scen) {
  RayTable t;
  for (const auto& c : scen.clusters) {
    for (const auto& r : c.rays) {
      t.a_rx.push_back(steering_vector<double>(cfg.n_rx, c.aoa_rad - r.aoa_shift_rad,
                                               cfg.spacing_wavelengths));
      t.a_tx.push_back(steering_vector<double>(cfg.n_tx, c.aod_rad - r.aod_shift_rad,
                                               cfg.spacing_wavelengths));
      t.gain.push_back(r.gain);
      t.delay.push_back(c.delay_s + r.delay_offset_s);
    }
  }
  return t;
}

CMatrix tap_from_table(const SystemConfig& cfg, const RayTable& t, double scale, int d) {
  // Stack weighted steering vectors so the tap is one GEMM: A_R diag(w) A_T^H.
  const auto k = static_cast<Eigen::Index>(t.gain.size());
  CMatrix ar(cfg.n_rx, k);
  CMatrix at(cfg.n_tx, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double p = pulse_shape(d * cfg.symbol_period_s - t.delay[i], cfg.symbol_period_s);
    ar.col(i) = (scale * p) * t.gain[i] * t.a_rx[i];
    at.col(i) = t.a_tx[i];
  }
  return ar * at.adjoint();
}

}  // namespace

CMatrix delay_tap_channel(const SystemConfig& cfg, const ChannelScenario& scen, int d) {
  cfg.validate();
  check_scenario(scen);
  if (d < 0 || d >= cfg.cp_len)
    throw std::invalid_argument("delay_tap_channel: tap index " + std::to_string(d) +
                                " outside [0, " + std::to_string(cfg.cp_len) + ")");
  return tap_from_table(cfg, tabulate_rays(cfg, scen), gain_scale(cfg, scen), d);
}

std::vector<CMatrix> delay_taps(const SystemConfig& cfg, const ChannelScenario& scen) {
  cfg.validate();
  check_scenario(scen);
  const RayTable t = tabulate_rays(cfg, scen);
  const double s = gain_scale(cfg, scen);
  std::vector<CMatrix> taps;
  taps.reserve(cfg.cp_len);
  for (int d = 0; d < cfg.cp_len; ++d) taps.push_back(tap_from_table(cfg, t, s, d));
  return taps;
}

ChannelTensor taps_to_subcarriers(const std::vector<CMatrix>& taps, int n_subcarriers) {
  if (taps.empty()) throw std::invalid_argument("taps_to_subcarriers: no taps");
  ChannelTensor h(static_cast<std::size_t>(n_subcarriers), taps.front().rows(),
                  taps.front().cols());
  for (int m = 0; m < n_subcarriers; ++m) {
    for (std::size_t d = 0; d < taps.size(); ++d) {
      // Reduce m*d modulo M before forming the angle to keep the phase exact.
      const auto md = (static_cast<long long>(m) * static_cast<long long>(d)) % n_subcarriers;
      const double angle = -2.0 * kPi * static_cast<double>(md) / n_subcarriers;
      h[m] += std::polar(1.0, angle) * taps[d];
    }
  }
  return h;
}

ChannelTensor frequency_channel(const SystemConfig& cfg, const ChannelScenario& scen) {
  return taps_to_subcarriers(delay_taps(cfg, scen), cfg.n_subcarriers);
}

namespace {

Cluster draw_cluster(const SystemConfig& cfg, int rays, Rng& rng, const ScenarioOptions& opts) {
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> spread(0.0, deg_to_rad(opts.ray_angle_spread_deg));

  const double max_total = (cfg.cp_len - 1) * cfg.symbol_period_s;
  const double ray_max = std::min(opts.ray_delay_max_symbols * cfg.symbol_period_s, max_total);

  Cluster c;
  c.aoa_rad = angle(rng);
  c.aod_rad = angle(rng);
  c.delay_s = (max_total - ray_max) * unit(rng);
  c.rays.resize(static_cast<std::size_t>(rays));
  for (auto& r : c.rays) {
    r.delay_offset_s = ray_max * unit(rng);
    r.aoa_shift_rad = spread(rng);
    r.aod_shift_rad = spread(rng);
    r.gain = complex_normal(rng, 1.0);
  }
  return c;
}

}  // namespace

ChannelScenario random_scenario(const SystemConfig& cfg, int clusters, int rays_per_cluster,
                                std::uint64_t seed, const ScenarioOptions& opts) {
  cfg.validate();
  if (clusters < 1 || rays_per_cluster < 1)
    throw std::invalid_argument("random_scenario: cluster and ray counts must be >= 1");
  Rng rng(seed);
  ChannelScenario s;
  s.clusters.reserve(static_cast<std::size_t>(clusters));
  for (int l = 0; l < clusters; ++l) s.clusters.push_back(draw_cluster(cfg, rays_per_cluster, rng, opts));
  return s;
}

ChannelTensor corrupt_channel(const ChannelTensor& h, double snr_h_db, std::uint64_t seed) {
  if (std::isnan(snr_h_db)) throw std::invalid_argument("corrupt_channel: SNR is NaN");
  const double var = noise_variance_for_snr(h.mean_entry_power(), snr_h_db);
  if (var == 0.0) return h;
  Rng rng(seed);
  ChannelTensor out = h;
  for (auto& m : out.subcarriers) m += complex_normal_matrix(rng, m.rows(), m.cols(), var);
  return out;
}

ChannelScenario perturb_angles(const ChannelScenario& scen, double sigma_deg, std::uint64_t seed) {
  if (!(sigma_deg >= 0.0)) throw std::invalid_argument("perturb_angles: sigma must be >= 0");
  ChannelScenario out = scen;
  if (sigma_deg == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const double sigma = deg_to_rad(sigma_deg);
  for (auto& c : out.clusters) {
    c.aoa_rad += sigma * z(rng);
    c.aod_rad += sigma * z(rng);
  }
  return out;
}

ChannelScenario extend_clusters(const ChannelScenario& scen, const SystemConfig& cfg, int extra,
                                std::uint64_t seed, const ScenarioOptions& opts) {
  if (extra < 0) throw std::invalid_argument("extend_clusters: extra must be >= 0");
  ChannelScenario out = scen;
  if (extra == 0) return out;
  const int rays = scen.clusters.empty() ? 1 : static_cast<int>(scen.rays_per_cluster());
  Rng rng(seed);
  for (int i = 0; i < extra; ++i) out.clusters.push_back(draw_cluster(cfg, rays, rng, opts));
  return out;
}

}  // namespace wbhb
