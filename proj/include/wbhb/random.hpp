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

#ifndef WBHB_RANDOM_HPP
#define WBHB_RANDOM_HPP

#include "wbhb/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace wbhb {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Order-sensitive seed derivation: derive_seed(master, {n, g}) gives each
/// worker its own stream independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = mix64(master);
  for (auto k : keys) s = mix64(s ^ mix64(k + 0x632be59bd9b4e019ULL));
  return s;
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline cplx complex_normal(Rng& rng, double variance = 1.0) {
  std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

inline CMatrix complex_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                     double variance = 1.0) {
  CMatrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = complex_normal(rng, variance);
  return out;
}

/// Linear noise variance for a signal of mean power `signal_power` at `snr_db`
/// (10 log10 power ratio). Returns 0 for the +inf sentinel.
inline double noise_variance_for_snr(double signal_power, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return signal_power * std::pow(10.0, -snr_db / 10.0);
}

}  // namespace wbhb

#endif  // WBHB_RANDOM_HPP
