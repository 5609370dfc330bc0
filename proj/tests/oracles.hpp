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

// Straight-line reference computations used only by tests. Each one evaluates
// a defining formula with scalar loops and shares no code path with src/.

#ifndef WBHB_TESTS_ORACLES_HPP
#define WBHB_TESTS_ORACLES_HPP

#include "wbhb/channel.hpp"
#include "wbhb/neural.hpp"

#include <complex>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

cplx steering_entry(int k, double angle, double spacing);

/// Delay tap by the explicit double sum over clusters and rays, entry by entry.
wbhb::CMatrix delay_tap(const wbhb::SystemConfig& cfg, const wbhb::ChannelScenario& scen, int d);

/// H[m] evaluated as the double sum over taps and rays for one subcarrier.
wbhb::CMatrix subcarrier(const wbhb::SystemConfig& cfg, const wbhb::ChannelScenario& scen, int m);

/// Naive complex matrix product.
wbhb::CMatrix matmul(const wbhb::CMatrix& a, const wbhb::CMatrix& b);
wbhb::CMatrix adjoint(const wbhb::CMatrix& a);

/// Determinant of a small complex matrix by Gaussian elimination with pivoting.
cplx det(wbhb::CMatrix a);

/// Inverse by Gauss-Jordan elimination.
wbhb::CMatrix inverse(wbhb::CMatrix a);

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.
std::vector<double> hermitian_eigenvalues(wbhb::CMatrix a);

/// Eval-mode forward pass of one sample with nested loops over the documented
/// parameter layout: conv weights W(f, k) at f + F k with
/// k = c_in + C_in (dq + k_w dr), dense weights W(u, i) at u + U i, biases last.
std::vector<double> net_forward(const wbhb::NetSpec& spec, const std::vector<double>& params,
                                const std::vector<double>& x);

}  // namespace oracle

#endif
