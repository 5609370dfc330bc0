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

#include "wbhb/chest.hpp"

#include "wbhb/channel.hpp"

#include "wbhb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace wbhb {

namespace {

void check_pilot_dims(const ReceivedPilot& y, const TrainingBeams& beams) {
  if (y.size() == 0) throw std::invalid_argument("channel estimate: no subcarriers");
  for (const auto& m : y.subcarriers)
    if (m.rows() != beams.w_bar.cols() || m.cols() != beams.f_bar.cols())
      throw std::invalid_argument("channel estimate: Y[m] is not M_R x M_T");
}

void require_full_rank(const CMatrix& gram, const char* side, Eigen::Index pilots,
                       Eigen::Index antennas) {
  if (pilots < antennas)
    throw IllPosedError(std::string("least squares: ") + side + " pilot count " +
                        std::to_string(pilots) + " is below the antenna count " +
                        std::to_string(antennas));
  Eigen::FullPivLU<CMatrix> lu(gram);
  if (lu.rank() < gram.rows())
    throw IllPosedError(std::string("least squares: ") + side + " Gram matrix is rank " +
                        std::to_string(lu.rank()) + " of " + std::to_string(gram.rows()));
}

// (G_w + lambda I)^{-1} W Y F^H (G_f + lambda I)^{-1} / sqrt(P_T), per subcarrier.
ChannelTensor two_sided_solve(const ReceivedPilot& y, const TrainingBeams& beams, double tx_power,
                              double lambda) {
  const auto n_rx = beams.w_bar.rows();
  const auto n_tx = beams.f_bar.rows();
  CMatrix gw = beams.w_bar * beams.w_bar.adjoint();
  CMatrix gf = beams.f_bar * beams.f_bar.adjoint();
  gw.diagonal().array() += lambda;
  gf.diagonal().array() += lambda;
  if (lambda == 0.0) {
    require_full_rank(gw, "receive", beams.w_bar.cols(), n_rx);
    require_full_rank(gf, "transmit", beams.f_bar.cols(), n_tx);
  }
  const Eigen::PartialPivLU<CMatrix> lw(gw);
  const Eigen::PartialPivLU<CMatrix> lf(gf);
  const double inv_amp = 1.0 / std::sqrt(tx_power);
  ChannelTensor h(y.size(), n_rx, n_tx);
  for (std::size_t m = 0; m < y.size(); ++m) {
    const CMatrix left = lw.solve(beams.w_bar * y[m] * beams.f_bar.adjoint());
    // X G^{-1} = (G^{-1} X^H)^H for Hermitian G.
    h[m] = inv_amp * lf.solve(left.adjoint()).adjoint();
  }
  return h;
}

}  // namespace

ChannelTensor ls_estimate(const ReceivedPilot& y, const TrainingBeams& beams, double tx_power) {
  check_pilot_dims(y, beams);
  if (!(tx_power > 0.0)) throw std::invalid_argument("ls_estimate: tx_power must be positive");
  return two_sided_solve(y, beams, tx_power, 0.0);
}

ChannelTensor pinv_ls_estimate(const ReceivedPilot& y, const TrainingBeams& beams,
                               double tx_power) {
  check_pilot_dims(y, beams);
  if (!(tx_power > 0.0)) throw std::invalid_argument("pinv_ls_estimate: tx_power must be positive");
  const CMatrix wh = beams.w_bar.adjoint();
  const CMatrix left = Eigen::CompleteOrthogonalDecomposition<CMatrix>(wh).pseudoInverse();
  const CMatrix right = Eigen::CompleteOrthogonalDecomposition<CMatrix>(beams.f_bar).pseudoInverse();
  const double inv_amp = 1.0 / std::sqrt(tx_power);
  ChannelTensor h(y.size(), beams.w_bar.rows(), beams.f_bar.rows());
  for (std::size_t m = 0; m < y.size(); ++m) h[m] = inv_amp * left * y[m] * right;
  return h;
}

ChannelTensor lmmse_estimate(const ReceivedPilot& y, const TrainingBeams& beams, double tx_power,
                             double channel_prior_power, double noise_var) {
  check_pilot_dims(y, beams);
  if (!(noise_var >= 0.0)) throw std::invalid_argument("lmmse_estimate: noise_var must be >= 0");
  if (!(channel_prior_power > 0.0))
    throw std::invalid_argument("lmmse_estimate: channel_prior_power must be positive");
  if (!(tx_power > 0.0)) throw std::invalid_argument("lmmse_estimate: tx_power must be positive");
  if (std::isinf(noise_var)) return ChannelTensor(y.size(), beams.w_bar.rows(), beams.f_bar.rows());
  return two_sided_solve(y, beams, tx_power, noise_var / channel_prior_power);
}

AngleGrid AngleGrid::defaults(const SystemConfig& cfg, int clusters, int rays_per_cluster) {
  AngleGrid g;
  g.grid_tx = 2 * cfg.n_tx;
  g.grid_rx = 2 * cfg.n_rx;
  g.sparsity = std::max(1, std::min(clusters * rays_per_cluster, 2 * clusters));
  return g;
}

double grid_angle(int k, int g) {
  return std::asin(-1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(g));
}

CMatrix steering_dictionary(int n_antennas, int g, double spacing_wavelengths) {
  CMatrix a(n_antennas, g);
  for (int k = 0; k < g; ++k)
    a.col(k) = steering_vector<double>(n_antennas, grid_angle(k, g), spacing_wavelengths);
  return a;
}

OmpResult omp_kron(const CMatrix& y, const CMatrix& b_rx, const CMatrix& b_tx, int sparsity,
                   double min_atom_gain) {
  if (b_rx.rows() != y.rows() || b_tx.rows() != y.cols())
    throw std::invalid_argument("omp_kron: dictionary rows do not match Y");
  const auto g_rx = b_rx.cols();
  const auto g_tx = b_tx.cols();
  const auto n_meas = y.size();

  OmpResult out;
  out.residual = y;
  if (sparsity <= 0) {
    out.coefficients.resize(0);
    return out;
  }

  const RVector rx_norm = b_rx.colwise().norm().transpose();
  const RVector tx_norm = b_tx.colwise().norm().transpose();
  const CMatrix b_tx_conj = b_tx.conjugate();
  const double floor = min_atom_gain * rx_norm.maxCoeff() * tx_norm.maxCoeff();
  const double stop = 1e-13 * std::max(y.norm(), std::numeric_limits<double>::min());

  CMatrix support(n_meas, 0);
  Eigen::Map<const CVector> y_vec(y.data(), n_meas);
  std::vector<bool> used(static_cast<std::size_t>(g_rx * g_tx), false);

  for (int k = 0; k < sparsity; ++k) {
    if (out.residual.norm() <= stop) break;
    const CMatrix corr = b_rx.adjoint() * out.residual * b_tx_conj;
    double best = -1.0;
    Eigen::Index bi = -1;
    Eigen::Index bj = -1;
    for (Eigen::Index j = 0; j < g_tx; ++j)
      for (Eigen::Index i = 0; i < g_rx; ++i) {
        const double nrm = rx_norm(i) * tx_norm(j);
        if (nrm <= 0.0 || nrm < floor || used[static_cast<std::size_t>(j * g_rx + i)]) continue;
        const double score = std::abs(corr(i, j)) / nrm;
        if (score > best) {
          best = score;
          bi = i;
          bj = j;
        }
      }
    if (bi < 0) break;
    used[static_cast<std::size_t>(bj * g_rx + bi)] = true;
    out.rx_atoms.push_back(bi);
    out.tx_atoms.push_back(bj);

    const CMatrix atom = b_rx.col(bi) * b_tx.col(bj).transpose();
    support.conservativeResize(Eigen::NoChange, support.cols() + 1);
    support.col(support.cols() - 1) = Eigen::Map<const CVector>(atom.data(), n_meas);

    out.coefficients = support.colPivHouseholderQr().solve(y_vec);
    const CVector r = y_vec - support * out.coefficients;
    out.residual = Eigen::Map<const CMatrix>(r.data(), y.rows(), y.cols());
  }
  return out;
}

ChannelTensor adce_estimate(const ReceivedPilot& y, const TrainingBeams& beams,
                            const AngleGrid& grid, double tx_power, double spacing_wavelengths) {
  check_pilot_dims(y, beams);
  if (grid.grid_tx < 1 || grid.grid_rx < 1)
    throw std::invalid_argument("adce_estimate: empty angle grid");
  if (grid.sparsity < 0) throw std::invalid_argument("adce_estimate: sparsity must be >= 0");
  const auto m_rx = beams.w_bar.cols();
  const auto m_tx = beams.f_bar.cols();
  const long long cap = std::min<long long>(static_cast<long long>(m_tx) * m_rx,
                                            static_cast<long long>(grid.grid_tx) * grid.grid_rx);
  if (grid.sparsity > cap)
    throw std::invalid_argument("adce_estimate: sparsity " + std::to_string(grid.sparsity) +
                                " exceeds min(M_T M_R, G_T G_R) = " + std::to_string(cap));

  const auto n_rx = static_cast<int>(beams.w_bar.rows());
  const auto n_tx = static_cast<int>(beams.f_bar.rows());
  ChannelTensor h(y.size(), n_rx, n_tx);
  if (grid.sparsity == 0) return h;

  const CMatrix a_rx = steering_dictionary(n_rx, grid.grid_rx, spacing_wavelengths);
  const CMatrix a_tx = steering_dictionary(n_tx, grid.grid_tx, spacing_wavelengths);
  const CMatrix b_rx = beams.w_bar.adjoint() * a_rx;
  const CMatrix b_tx = beams.f_bar.transpose() * a_tx.conjugate();
  const double inv_amp = 1.0 / std::sqrt(tx_power);

  for (std::size_t m = 0; m < y.size(); ++m) {
    const OmpResult r = omp_kron(y[m], b_rx, b_tx, grid.sparsity, grid.min_atom_gain);
    for (std::size_t k = 0; k < r.rx_atoms.size(); ++k)
      h[m].noalias() += (inv_amp * r.coefficients(static_cast<Eigen::Index>(k))) *
                        a_rx.col(r.rx_atoms[k]) * a_tx.col(r.tx_atoms[k]).adjoint();
  }
  return h;
}

double nmse(const ChannelTensor& h_true, std::span<const ChannelTensor> h_est) {
  if (h_est.empty()) throw std::invalid_argument("nmse: no estimates");
  if (h_true.empty()) throw std::invalid_argument("nmse: empty channel");
  std::vector<double> ref(h_true.size());
  for (std::size_t m = 0; m < h_true.size(); ++m) {
    ref[m] = h_true[m].norm();
    if (ref[m] == 0.0)
      throw DegenerateError("nmse: ||H[" + std::to_string(m) + "]||_F is zero");
  }
  double total = 0.0;
  for (const auto& est : h_est) {
    if (est.size() != h_true.size() || est.rows() != h_true.rows() || est.cols() != h_true.cols())
      throw std::invalid_argument("nmse: estimate dimensions do not match");
    for (std::size_t m = 0; m < h_true.size(); ++m) total += (h_true[m] - est[m]).norm() / ref[m];
  }
  return total / static_cast<double>(h_true.size() * h_est.size());
}

double nmse(const ChannelTensor& h_true, const ChannelTensor& h_est) {
  return nmse(h_true, std::span<const ChannelTensor>(&h_est, 1));
}

}  // namespace wbhb
