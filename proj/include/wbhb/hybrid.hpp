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

#ifndef WBHB_HYBRID_HPP
#define WBHB_HYBRID_HPP

#include "wbhb/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace wbhb {

/// Analog stage shared across subcarriers, baseband stage per subcarrier.
struct HybridBeamformer {
  CMatrix f_rf;                // N_T x N_RF, unit modulus
  std::vector<CMatrix> f_bb;   // M x (N_RF x N_S)
  CMatrix w_rf;                // N_R x N_RF, unit modulus
  std::vector<CMatrix> w_bb;   // M x (N_RF x N_S)

  CMatrix precoder(std::size_t m) const { return f_rf * f_bb[m]; }
  CMatrix combiner(std::size_t m) const { return w_rf * w_bb[m]; }
  std::size_t size() const { return f_bb.size(); }
};

struct UnconstrainedBeamformers {
  std::vector<CMatrix> f_opt;      // M x (N_T x N_S), orthonormal columns
  std::vector<CMatrix> w_mmse;     // M x (N_R x N_S)
  std::vector<RVector> singulars;  // all singular values of H[m], descending

  std::size_t size() const { return f_opt.size(); }
};

/// Top-N_S right singular vectors of every H[m]. Each column is rotated so
/// its largest-magnitude entry is real and positive. Throws DegenerateError when some
/// H[m] has rank below N_S.
UnconstrainedBeamformers svd_precoders(const ChannelTensor& h, int n_streams);

/// W_MMSE[m]^H = (1/rho) (F^H H^H H F + (N_S sigma^2 / rho) I)^{-1} F^H H^H.
std::vector<CMatrix> mmse_combiners(const ChannelTensor& h, std::span<const CMatrix> precoders,
                                    double rho, double noise_var);

/// svd_precoders followed by mmse_combiners on F_opt.
UnconstrainedBeamformers unconstrained_beamformers(const ChannelTensor& h, int n_streams,
                                                   double rho, double noise_var);

// ---- matrix factorization T[m] ~ A B[m], A unit modulus ---------------------

/// Objective sum_m tr((T - A B)^H Lambda (T - A B)); empty weights mean Lambda = I.
double factorization_objective(std::span<const CMatrix> target, const CMatrix& analog,
                               std::span<const CMatrix> baseband,
                               std::span<const CMatrix> weights = {});

/// Euclidean gradient -2 sum_m Lambda (T - A B) B^H, for <G, D> = Re tr(G^H D).
CMatrix factorization_gradient(std::span<const CMatrix> target, const CMatrix& analog,
                               std::span<const CMatrix> baseband,
                               std::span<const CMatrix> weights = {});

/// B[m] = (A^H Lambda A)^{-1} A^H Lambda T[m].
std::vector<CMatrix> least_squares_baseband(std::span<const CMatrix> target, const CMatrix& analog,
                                            std::span<const CMatrix> weights = {});

struct AltMinOptions {
  int outer_iters = 50;
  int inner_iters = 40;
  double tol = 1e-6;
  std::uint64_t seed = 0;             // random initial phases
  bool reduced = true;                // eliminate the baseband inside the analog step
  int restarts = 1;                   // independent random starts; the lowest residual wins
  std::optional<CMatrix> initial;     // overrides the random start
};

struct AltMinResult {
  CMatrix analog;
  std::vector<CMatrix> baseband;
  std::vector<double> trace;  // residual after the first baseband step, then per outer iteration
  double residual = 0.0;      // sqrt of the final objective
  int iterations = 0;
};

/// Alternating minimization: least-squares baseband step, then Riemannian
/// conjugate gradient over the analog stage. No power normalization.
AltMinResult mo_altmin(std::span<const CMatrix> target, int n_rf, const AltMinOptions& opts = {},
                       std::span<const CMatrix> weights = {});

/// Phase extraction: A = exp(j angle(U_1)) from the top-N_RF left singular
/// vectors of [T[0] ... T[M-1]], B by least squares.
AltMinResult phase_extraction(std::span<const CMatrix> target, int n_rf,
                              std::span<const CMatrix> weights = {});

/// Scales the baseband so that sum_m ||A B[m]||_F^2 = M N_S.
void normalize_power(const CMatrix& analog, std::vector<CMatrix>& baseband);

/// Lambda_y[m] = rho H F F^H H^H + sigma^2 I for the given precoders.
std::vector<CMatrix> received_covariance(const ChannelTensor& h, std::span<const CMatrix> precoders,
                                         double rho, double noise_var);

enum class HybridMethod { manifold, phase_extraction };

struct HybridOptions {
  HybridMethod method = HybridMethod::manifold;
  AltMinOptions altmin;
  bool weighted_combiner = true;  // Lambda_y weighting of the combiner factorization
};

struct HybridDesign {
  HybridBeamformer beams;
  UnconstrainedBeamformers reference;
  AltMinResult precoder_fit;
  AltMinResult combiner_fit;
};

/// Full design from a channel: F_opt and W_MMSE, then both factorizations.
HybridDesign design_hybrid(const ChannelTensor& h, const SystemConfig& cfg, double rho,
                           double noise_var, const HybridOptions& opts = {});

// ---- rate ---------------------------------------------------------------------

/// (1/M) sum_m log2 |I + (rho/N_S) Lambda_n^{-1} W^H H F F^H H^H W| with
/// Lambda_n = sigma^2 W^H W. Throws DegenerateError when Lambda_n is singular.
double spectral_efficiency(const ChannelTensor& h, std::span<const CMatrix> precoders,
                           std::span<const CMatrix> combiners, double rho, double noise_var);
double spectral_efficiency(const ChannelTensor& h, const HybridBeamformer& b, double rho,
                           double noise_var);
double spectral_efficiency(const ChannelTensor& h, const UnconstrainedBeamformers& b, double rho,
                           double noise_var);

/// Rotates every analog column so its first entry is 1 and compensates the
/// matching baseband rows; F_RF F_BB[m] and W_RF W_BB[m] are unchanged.
void align_analog_phases(HybridBeamformer& b);

/// Per-subcarrier precoders/combiners of a hybrid beamformer.
std::vector<CMatrix> precoders_of(const HybridBeamformer& b);
std::vector<CMatrix> combiners_of(const HybridBeamformer& b);

}  // namespace wbhb

#endif  // WBHB_HYBRID_HPP
