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

#ifndef WBHB_CHEST_HPP
#define WBHB_CHEST_HPP

#include "wbhb/pilot.hpp"
#include "wbhb/types.hpp"

#include <span>
#include <vector>

namespace wbhb {

/// Classical channel estimators operating on received pilots.

/// Two-sided least squares
///   H_hat[m] = (W W^H)^{-1} W Y[m] F^H (F F^H)^{-1} / sqrt(P_T).
/// Requires M_T >= N_T and M_R >= N_R; throws IllPosedError otherwise.
ChannelTensor ls_estimate(const ReceivedPilot& y, const TrainingBeams& beams, double tx_power);

/// Minimum-norm least squares via pseudo-inverses; defined for any pilot count.
/// Coincides with ls_estimate whenever the latter is well posed.
ChannelTensor pinv_ls_estimate(const ReceivedPilot& y, const TrainingBeams& beams, double tx_power);

/// Tikhonov-regularized two-sided LS with lambda = noise_var / prior_power
/// added to both Gram matrices.
ChannelTensor lmmse_estimate(const ReceivedPilot& y, const TrainingBeams& beams, double tx_power,
                             double channel_prior_power, double noise_var);

/// On-grid dictionary for the angle-domain estimator. Grid points are uniform
/// in sin(angle) over [-1, 1).
struct AngleGrid {
  int grid_tx = 0;
  int grid_rx = 0;
  int sparsity = 1;
  // Atoms whose sensed norm ||B_R(:,i)|| ||B_T(:,j)|| is below this fraction of
  // the largest are never selected. Weakly probed directions otherwise win on
  // noise and receive unbounded gains.
  double min_atom_gain = 0.1;

  /// G_T = 2 N_T, G_R = 2 N_R, K = min(L N_sc, 2 L).
  static AngleGrid defaults(const SystemConfig& cfg, int clusters, int rays_per_cluster);
};

/// Grid angle (radians) for index k of a g-point grid.
double grid_angle(int k, int g);

/// Steering dictionary [a(angle_0) ... a(angle_{g-1})].
CMatrix steering_dictionary(int n_antennas, int g, double spacing_wavelengths);

/// Output of Kronecker-structured OMP on one subcarrier.
struct OmpResult {
  std::vector<Eigen::Index> rx_atoms;  // selected grid indices, selection order
  std::vector<Eigen::Index> tx_atoms;
  CVector coefficients;                // least-squares gains on the support
  CMatrix residual;                    // Y - reconstruction, M_R x M_T
};

/// Greedy recovery of Y ~ B_R G B_T^T with K-sparse G, where B_R = W^H A_R and
/// B_T = F^T conj(A_T). Atoms are correlated through the matrix form, so the
/// full (M_R M_T) x (G_R G_T) sensing matrix is never formed.
OmpResult omp_kron(const CMatrix& y, const CMatrix& b_rx, const CMatrix& b_tx, int sparsity,
                   double min_atom_gain = 0.0);

/// Angle-domain (OMP) channel estimate, independently per subcarrier.
ChannelTensor adce_estimate(const ReceivedPilot& y, const TrainingBeams& beams,
                            const AngleGrid& grid, double tx_power = 1.0,
                            double spacing_wavelengths = 0.5);

/// Ratio-of-norms NMSE, (1/(M J)) sum_m sum_i ||H[m] - H_i[m]||_F / ||H[m]||_F.
double nmse(const ChannelTensor& h_true, std::span<const ChannelTensor> h_est);
double nmse(const ChannelTensor& h_true, const ChannelTensor& h_est);

}  // namespace wbhb

#endif  // WBHB_CHEST_HPP
