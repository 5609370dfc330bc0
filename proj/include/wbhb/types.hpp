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

#ifndef WBHB_TYPES_HPP
#define WBHB_TYPES_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

namespace wbhb {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

template <typename Scalar>
using ComplexVectorT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using ComplexMatrixT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Sentinel for "no noise" SNR arguments.
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Array/OFDM dimensions shared by every module.
struct SystemConfig {
  int n_tx = 128;
  int n_rx = 16;
  int n_rf = 4;
  int n_streams = 4;
  int n_subcarriers = 16;
  double carrier_hz = 60e9;
  double bandwidth_hz = 2e9;
  double spacing_wavelengths = 0.5;
  int cp_len = 4;
  double symbol_period_s = 1.0 / 2e9;
  // Scales every synthesized channel by 1/sqrt(N_T N_R), giving unit mean
  // entry power (the 1/sqrt(N) steering normalization).
  bool unit_gain = false;

  double wavelength_m() const { return kSpeedOfLight / carrier_hz; }

  /// Throws std::invalid_argument on any broken dimension invariant.
  void validate() const;
};

/// Per-subcarrier stack of N_R x N_T channel matrices H[m], m = 0..M-1.
struct ChannelTensor {
  std::vector<CMatrix> subcarriers;

  ChannelTensor() = default;
  explicit ChannelTensor(std::vector<CMatrix> h) : subcarriers(std::move(h)) {}
  ChannelTensor(std::size_t m, Eigen::Index rows, Eigen::Index cols)
      : subcarriers(m, CMatrix::Zero(rows, cols)) {}

  std::size_t size() const { return subcarriers.size(); }
  bool empty() const { return subcarriers.empty(); }
  Eigen::Index rows() const { return empty() ? 0 : subcarriers.front().rows(); }
  Eigen::Index cols() const { return empty() ? 0 : subcarriers.front().cols(); }
  CMatrix& operator[](std::size_t m) { return subcarriers[m]; }
  const CMatrix& operator[](std::size_t m) const { return subcarriers[m]; }

  /// Mean of |H[m]_{ij}|^2 over the whole tensor.
  double mean_entry_power() const;
  /// Sum over m of ||H[m]||_F^2.
  double energy() const;
  bool all_finite() const;
};

/// Received pilot stack Y[m] (M_R x M_T per subcarrier).
struct ReceivedPilot {
  std::vector<CMatrix> subcarriers;

  std::size_t size() const { return subcarriers.size(); }
  CMatrix& operator[](std::size_t m) { return subcarriers[m]; }
  const CMatrix& operator[](std::size_t m) const { return subcarriers[m]; }
};

ChannelTensor operator*(double s, const ChannelTensor& h);
ChannelTensor operator+(const ChannelTensor& a, const ChannelTensor& b);
ChannelTensor operator-(const ChannelTensor& a, const ChannelTensor& b);

}  // namespace wbhb

#endif  // WBHB_TYPES_HPP
