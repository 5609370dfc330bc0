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

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "wbhb/channel.hpp"
#include "wbhb/chest.hpp"
#include "wbhb/errors.hpp"
#include "wbhb/pilot.hpp"
#include "wbhb/random.hpp"

#include <algorithm>
#include <set>

using namespace wbhb;

namespace {

SystemConfig small_cfg(int n_tx = 8, int n_rx = 4, int m = 4) {
  SystemConfig cfg;
  cfg.n_tx = n_tx;
  cfg.n_rx = n_rx;
  cfg.n_rf = 2;
  cfg.n_streams = 2;
  cfg.n_subcarriers = m;
  cfg.cp_len = 3;
  return cfg;
}

PilotConfig pilots(int m_tx, int m_rx, double snr_db = kNoNoise) {
  PilotConfig p;
  p.m_tx = m_tx;
  p.m_rx = m_rx;
  p.snr_pilot_db = snr_db;
  p.pilot_snr_test_db = snr_db;
  return p;
}

double rel_err(const ChannelTensor& a, const ChannelTensor& b) { return std::sqrt((a - b).energy() / b.energy()); }

// H[m] = sum_i g_i a_R(theta_i) a_T(phi_i)^H with angles taken from the grid.
ChannelTensor on_grid_channel(const SystemConfig& cfg, const AngleGrid& grid,
                              const std::vector<std::pair<int, int>>& atoms, std::uint64_t seed) {
  Rng rng(seed);
  ChannelTensor h(cfg.n_subcarriers, cfg.n_rx, cfg.n_tx);
  for (auto [r, t] : atoms) {
    const CVector ar = steering_vector(cfg.n_rx, grid_angle(r, grid.grid_rx), 0.5);
    const CVector at = steering_vector(cfg.n_tx, grid_angle(t, grid.grid_tx), 0.5);
    for (int m = 0; m < cfg.n_subcarriers; ++m) h[m] += complex_normal(rng) * ar * at.adjoint();
  }
  return h;
}

// Straight-line two-sided LS: (W W^H)^{-1} W Y F^H (F F^H)^{-1} / sqrt(P).
CMatrix oracle_ls(const CMatrix& y, const TrainingBeams& b, double power) {
  using namespace oracle;
  const CMatrix wwh = matmul(b.w_bar, adjoint(b.w_bar));
  const CMatrix ffh = matmul(b.f_bar, adjoint(b.f_bar));
  const CMatrix left = matmul(inverse(wwh), b.w_bar);
  const CMatrix right = matmul(adjoint(b.f_bar), inverse(ffh));
  return matmul(matmul(left, y), right) / std::sqrt(power);
}

}  // namespace

TEST_CASE("LS recovers the channel exactly without noise", "[chest]") {
  const SystemConfig cfg = small_cfg();
  for (int t = 0; t < 5; ++t) {
    const ChannelTensor h = frequency_channel(cfg, random_scenario(cfg, 2, 3, 10 + t));
    PilotConfig p = pilots(8, 4);
    p.tx_power = 2.5;
    const TrainingBeams b = training_beamformers(cfg, p);
    const ChannelTensor est = ls_estimate(receive_pilots(h, b, p, 1), b, p.tx_power);
    CHECK(rel_err(est, h) <= 1e-9);
  }
}

TEST_CASE("LS with too few pilots is ill posed", "[chest]") {
  const SystemConfig cfg = small_cfg();
  const ChannelTensor h = frequency_channel(cfg, random_scenario(cfg, 2, 3, 1));
  for (auto [mt, mr] : {std::pair{4, 4}, std::pair{8, 2}}) {
    const PilotConfig p = pilots(mt, mr);
    const TrainingBeams b = training_beamformers(cfg, p);
    CHECK_THROWS_AS(ls_estimate(receive_pilots(h, b, p, 1), b, 1.0), IllPosedError);
  }
}

TEST_CASE("LS matches a straight-line implementation under noise", "[chest]") {
  const SystemConfig cfg = small_cfg();
  const PilotConfig p = pilots(8, 4, 10.0);
  const TrainingBeams b = training_beamformers(cfg, p);
  double nm_lib = 0.0;
  double nm_ref = 0.0;
  for (int t = 0; t < 20; ++t) {
    const ChannelTensor h = frequency_channel(cfg, random_scenario(cfg, 2, 3, 100 + t));
    const ReceivedPilot y = receive_pilots(h, b, p, 200 + t);
    const ChannelTensor est = ls_estimate(y, b, 1.0);
    ChannelTensor ref(cfg.n_subcarriers, cfg.n_rx, cfg.n_tx);
    for (std::size_t m = 0; m < y.size(); ++m) {
      ref[m] = oracle_ls(y[m], b, 1.0);
      CHECK((est[m] - ref[m]).norm() <= 1e-9 * ref[m].norm());
    }
    nm_lib += nmse(h, est);
    nm_ref += nmse(h, ref);
  }
  CHECK(nm_lib == Catch::Approx(nm_ref).epsilon(1e-9));
  CHECK(nm_lib / 20 > 0.0);
}

TEST_CASE("pseudo-inverse LS", "[chest]") {
  const SystemConfig cfg = small_cfg();
  const ChannelTensor h = frequency_channel(cfg, random_scenario(cfg, 2, 3, 5));

  SECTION("equals LS when well posed") {
    const PilotConfig p = pilots(8, 4, 15.0);
    const TrainingBeams b = training_beamformers(cfg, p);
    const ReceivedPilot y = receive_pilots(h, b, p, 3);
    CHECK(rel_err(pinv_ls_estimate(y, b, 1.0), ls_estimate(y, b, 1.0)) <= 1e-10);
  }
  SECTION("reproduces the sounded subspace with fewer pilots") {
    const PilotConfig p = pilots(4, 2);
    const TrainingBeams b = training_beamformers(cfg, p);
    const ReceivedPilot y = receive_pilots(h, b, p, 3);
    const ChannelTensor est = pinv_ls_estimate(y, b, 1.0);
    for (std::size_t m = 0; m < h.size(); ++m) {
      const CMatrix a = b.w_bar.adjoint() * est[m] * b.f_bar;
      CHECK((a - y[m]).norm() <= 1e-10 * y[m].norm());
    }
  }
}

TEST_CASE("LMMSE limits and dominance", "[chest]") {
  const SystemConfig cfg = small_cfg();
  const PilotConfig p0 = pilots(8, 4, 0.0);
  const TrainingBeams b = training_beamformers(cfg, p0);
  const ChannelTensor h = frequency_channel(cfg, random_scenario(cfg, 2, 3, 5));
  const ReceivedPilot y = receive_pilots(h, b, p0, 9);

  CHECK(rel_err(lmmse_estimate(y, b, 1.0, 1.0, 0.0), ls_estimate(y, b, 1.0)) <= 1e-10);
  CHECK(lmmse_estimate(y, b, 1.0, 1.0, kNoNoise).energy() == 0.0);
  CHECK_THROWS_AS(lmmse_estimate(y, b, 1.0, 1.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(lmmse_estimate(y, b, 1.0, 0.0, 1.0), std::invalid_argument);

  // Known noise variance and channel power at 0 dB pilot SNR.
  SystemConfig ucfg = cfg;
  ucfg.unit_gain = true;
  double nm_ls = 0.0;
  double nm_lmmse = 0.0;
  for (int t = 0; t < 100; ++t) {
    const ChannelTensor ht = frequency_channel(ucfg, random_scenario(ucfg, 2, 3, 300 + t));
    PilotConfig p = p0;
    const double sigma2 = 1.0;  // unit prior, P_T = 1
    p.noise_var = sigma2;
    const ReceivedPilot yt = receive_pilots(ht, b, p, 400 + t);
    nm_ls += nmse(ht, ls_estimate(yt, b, 1.0));
    nm_lmmse += nmse(ht, lmmse_estimate(yt, b, 1.0, 1.0, sigma2));
  }
  CHECK(nm_lmmse <= nm_ls);
}

TEST_CASE("ADCE recovers a single on-grid path", "[chest]") {
  const SystemConfig cfg = small_cfg(16, 4, 2);
  AngleGrid grid{32, 8, 1};
  const ChannelTensor h = on_grid_channel(cfg, grid, {{3, 21}}, 7);
  const PilotConfig p = pilots(8, 4);
  const TrainingBeams b = training_beamformers(cfg, p);
  const ChannelTensor est = adce_estimate(receive_pilots(h, b, p, 1), b, grid);
  CHECK(rel_err(est, h) <= 1e-8);

  grid.sparsity = 0;
  CHECK(adce_estimate(receive_pilots(h, b, p, 1), b, grid).energy() == 0.0);
}

TEST_CASE("ADCE argument validation", "[chest]") {
  const SystemConfig cfg = small_cfg(16, 4, 2);
  const PilotConfig p = pilots(8, 4);
  const TrainingBeams b = training_beamformers(cfg, p);
  const ChannelTensor h = on_grid_channel(cfg, AngleGrid{32, 8, 1}, {{1, 1}}, 7);
  const ReceivedPilot y = receive_pilots(h, b, p, 1);
  CHECK_THROWS_AS(adce_estimate(y, b, AngleGrid{0, 8, 1}), std::invalid_argument);
  CHECK_THROWS_AS(adce_estimate(y, b, AngleGrid{32, 8, -1}), std::invalid_argument);
  CHECK_THROWS_AS(adce_estimate(y, b, AngleGrid{32, 8, 33}), std::invalid_argument);
}

TEST_CASE("ADCE recovers three on-grid paths", "[chest]") {
  const SystemConfig cfg = small_cfg(16, 4, 3);
  const AngleGrid grid{32, 8, 3};
  const PilotConfig p = pilots(16, 4);
  const TrainingBeams b = training_beamformers(cfg, p);
  const ChannelTensor h = on_grid_channel(cfg, grid, {{1, 4}, {5, 13}, {6, 27}}, 11);
  const ChannelTensor est = adce_estimate(receive_pilots(h, b, p, 1), b, grid);
  CHECK(nmse(h, est) <= 1e-6);
}

TEST_CASE("OMP support matches exhaustive search on a small grid", "[chest][oracle]") {
  const SystemConfig cfg = small_cfg(4, 4, 1);
  const AngleGrid grid{8, 8, 3};
  const PilotConfig p = pilots(4, 4);
  const TrainingBeams b = training_beamformers(cfg, p);
  const CMatrix a_r = steering_dictionary(4, 8, 0.5);
  const CMatrix a_t = steering_dictionary(4, 8, 0.5);
  const CMatrix b_r = b.w_bar.adjoint() * a_r;
  const CMatrix b_t = b.f_bar.transpose() * a_t.conjugate();

  const std::vector<std::pair<int, int>> truth{{0, 2}, {3, 7}, {6, 5}};
  const ChannelTensor h = on_grid_channel(cfg, grid, truth, 21);
  const CMatrix y = receive_pilots(h, b, p, 1)[0];

  // Column (r, t) of the full sensing matrix is vec(b_r[:, r] b_t[:, t]^T).
  const int atoms = 64;
  CMatrix phi(16, atoms);
  for (int r = 0; r < 8; ++r)
    for (int t = 0; t < 8; ++t) {
      const CMatrix outer = b_r.col(r) * b_t.col(t).transpose();
      phi.col(r * 8 + t) = Eigen::Map<const CVector>(outer.data(), 16);
    }
  const CVector yv = Eigen::Map<const CVector>(y.data(), 16);

  std::set<int> best;
  int zero_residual_sets = 0;
  double best_res = 1e300;
  for (int i = 0; i < atoms; ++i)
    for (int j = i + 1; j < atoms; ++j)
      for (int k = j + 1; k < atoms; ++k) {
        CMatrix sub(16, 3);
        sub << phi.col(i), phi.col(j), phi.col(k);
        const CVector c = sub.colPivHouseholderQr().solve(yv);
        const double res = (yv - sub * c).norm();
        if (res < 1e-9 * yv.norm()) ++zero_residual_sets;
        if (res < best_res) {
          best_res = res;
          best = {i, j, k};
        }
      }
  REQUIRE(zero_residual_sets == 1);

  const OmpResult omp = omp_kron(y, b_r, b_t, 3);
  std::set<int> found;
  for (std::size_t i = 0; i < omp.rx_atoms.size(); ++i)
    found.insert(static_cast<int>(omp.rx_atoms[i] * 8 + omp.tx_atoms[i]));
  CHECK(found == best);
  std::set<int> expected;
  for (auto [r, t] : truth) expected.insert(r * 8 + t);
  CHECK(found == expected);
}

TEST_CASE("OMP residual is orthogonal to the selected atoms", "[chest][property]") {
  const SystemConfig cfg = small_cfg(16, 4, 1);
  const PilotConfig p = pilots(8, 4, 5.0);
  const TrainingBeams b = training_beamformers(cfg, p);
  const CMatrix b_r = b.w_bar.adjoint() * steering_dictionary(4, 8, 0.5);
  const CMatrix b_t = b.f_bar.transpose() * steering_dictionary(16, 32, 0.5).conjugate();
  for (int t = 0; t < 20; ++t) {
    const ChannelTensor h = frequency_channel(cfg, random_scenario(cfg, 3, 2, 50 + t));
    const CMatrix y = receive_pilots(h, b, p, 60 + t)[0];
    const OmpResult omp = omp_kron(y, b_r, b_t, 4);
    for (std::size_t i = 0; i < omp.rx_atoms.size(); ++i) {
      const cplx inner = (b_r.col(omp.rx_atoms[i]).adjoint() * omp.residual * b_t.col(omp.tx_atoms[i]).conjugate())(0, 0);
      CHECK(std::abs(inner) <= 1e-8 * y.norm() * b_r.colwise().norm().maxCoeff() * b_t.colwise().norm().maxCoeff());
    }
  }
}

TEST_CASE("grid angles are uniform in sine", "[chest]") {
  CHECK(std::sin(grid_angle(0, 8)) == Catch::Approx(-1.0));
  CHECK(std::sin(grid_angle(4, 8)) == Catch::Approx(0.0).margin(1e-15));
  CHECK(std::sin(grid_angle(6, 8)) == Catch::Approx(0.5));
  const AngleGrid d = AngleGrid::defaults(SystemConfig{}, 10, 5);
  CHECK(d.grid_tx == 256);
  CHECK(d.grid_rx == 32);
  CHECK(d.sparsity == 20);
  CHECK(AngleGrid::defaults(SystemConfig{}, 3, 1).sparsity == 3);
}

TEST_CASE("NMSE definition", "[chest]") {
  const SystemConfig cfg = small_cfg();
  const ChannelTensor h = frequency_channel(cfg, random_scenario(cfg, 2, 3, 5));
  CHECK(nmse(h, h) == 0.0);
  CHECK(nmse(h, 2.0 * h) == Catch::Approx(1.0));

  const ChannelTensor e = frequency_channel(cfg, random_scenario(cfg, 2, 3, 6));
  double ref = 0.0;
  for (std::size_t m = 0; m < h.size(); ++m) ref += (h[m] - e[m]).norm() / h[m].norm();
  CHECK(nmse(h, e) == Catch::Approx(ref / h.size()).epsilon(1e-12));

  const std::vector<ChannelTensor> both{e, h};
  CHECK(nmse(h, both) == Catch::Approx(ref / h.size() / 2).epsilon(1e-12));

  ChannelTensor z = h;
  z[1].setZero();
  CHECK_THROWS_AS(nmse(z, h), DegenerateError);
}

TEST_CASE("NMSE is invariant to a common unitary rotation", "[chest][property]") {
  const SystemConfig cfg = small_cfg();
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const ChannelTensor h = frequency_channel(cfg, random_scenario(cfg, 2, 3, 500 + t));
    const ChannelTensor e = frequency_channel(cfg, random_scenario(cfg, 2, 3, 600 + t));
    const CMatrix u = complex_normal_matrix(rng, 4, 4).householderQr().householderQ();
    ChannelTensor hu = h;
    ChannelTensor eu = e;
    for (std::size_t m = 0; m < h.size(); ++m) {
      hu[m] = u * h[m];
      eu[m] = u * e[m];
    }
    CHECK(nmse(hu, eu) == Catch::Approx(nmse(h, e)).epsilon(1e-12));
  }
}

TEST_CASE("ADCE with partial pilots stays bounded", "[chest][property]") {
  SystemConfig cfg = small_cfg(16, 4, 4);
  cfg.unit_gain = true;
  const PilotConfig pc = pilots(8, 4, 30.0);
  const TrainingBeams b = training_beamformers(cfg, pc);
  const AngleGrid grid = AngleGrid::defaults(cfg, 3, 2);
  const CMatrix b_rx = b.w_bar.adjoint() * steering_dictionary(4, grid.grid_rx, 0.5);
  const CMatrix b_tx = b.f_bar.transpose() * steering_dictionary(16, grid.grid_tx, 0.5).conjugate();
  const double floor = grid.min_atom_gain * b_rx.colwise().norm().maxCoeff() * b_tx.colwise().norm().maxCoeff();
  for (int t = 0; t < 30; ++t) {
    const ChannelTensor h = frequency_channel(cfg, random_scenario(cfg, 3, 2, 700 + t));
    const ReceivedPilot y = receive_pilots(h, cfg, pc, 800 + t);
    const ChannelTensor e = adce_estimate(y, b, grid);
    CHECK(e.energy() <= 2.0 * h.energy());
    for (std::size_t m = 0; m < y.size(); ++m) {
      const OmpResult r = omp_kron(y[m], b_rx, b_tx, grid.sparsity, grid.min_atom_gain);
      for (std::size_t k = 0; k < r.rx_atoms.size(); ++k)
        CHECK(b_rx.col(r.rx_atoms[k]).norm() * b_tx.col(r.tx_atoms[k]).norm() >= floor);
    }
  }
}
