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

#include "wbhb/hybrid.hpp"

#include "wbhb/errors.hpp"
#include "wbhb/manifold.hpp"
#include "wbhb/random.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wbhb {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr int kMaxBacktracks = 30;

void check_target(std::span<const CMatrix> target, std::span<const CMatrix> weights,
                  const char* who) {
  if (target.empty()) throw std::invalid_argument(std::string(who) + ": empty target");
  for (const auto& t : target)
    if (t.rows() != target[0].rows() || t.cols() != target[0].cols())
      throw std::invalid_argument(std::string(who) + ": target blocks differ in shape");
  if (!weights.empty()) {
    if (weights.size() != target.size())
      throw std::invalid_argument(std::string(who) + ": one weight per target block required");
    for (const auto& w : weights)
      if (w.rows() != target[0].rows() || w.cols() != target[0].rows())
        throw std::invalid_argument(std::string(who) + ": weight must be square in the target rows");
  }
}

double target_energy(std::span<const CMatrix> target) {
  double e = 0.0;
  for (const auto& t : target) e += t.squaredNorm();
  return e;
}

// sum_m ||Lambda^{1/2} D B[m]||^2: the curvature of the objective along D.
double curvature(const CMatrix& d, std::span<const CMatrix> baseband,
                 std::span<const CMatrix> weights) {
  double c = 0.0;
  for (std::size_t m = 0; m < baseband.size(); ++m) {
    const CMatrix db = d * baseband[m];
    c += weights.empty() ? db.squaredNorm() : (db.adjoint() * weights[m] * db).trace().real();
  }
  return c;
}

// Riemannian CG on the analog stage. With `reduced` set the baseband is
// re-solved at every trial point, so the CG runs on min_B f(A, B); by the
// envelope theorem its gradient is the partial gradient at the optimal B.
void analog_cg(std::span<const CMatrix> target, CMatrix& a, std::vector<CMatrix>& b,
               std::span<const CMatrix> weights, int inner_iters, bool reduced) {
  double f = factorization_objective(target, a, b, weights);
  CMatrix g = manifold::project_tangent(a, factorization_gradient(target, a, b, weights));
  CMatrix eta = -g;
  for (int k = 0; k < inner_iters; ++k) {
    const double gg = manifold::inner(g, g);
    if (gg <= 1e-30 * std::max(1.0, f)) break;
    double slope = manifold::inner(g, eta);
    if (slope >= 0.0) {
      eta = -g;
      slope = -gg;
    }
    // Exact minimizer of the quadratic model before retraction.
    const double c2 = curvature(eta, b, weights);
    double t = c2 > 0.0 ? -slope / (2.0 * c2) : 1.0;

    bool accepted = false;
    CMatrix a_new;
    std::vector<CMatrix> b_new;
    double f_new = f;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      a_new = manifold::retract(a + t * eta);
      b_new = reduced ? least_squares_baseband(target, a_new, weights) : b;
      f_new = factorization_objective(target, a_new, b_new, weights);
      if (f_new <= f + kArmijo * t * slope) {
        accepted = true;
        break;
      }
      t *= kShrink;
    }
    if (!accepted) break;

    const CMatrix g_new =
        manifold::project_tangent(a_new, factorization_gradient(target, a_new, b_new, weights));
    const CMatrix g_old = manifold::project_tangent(a_new, g);
    const double beta = std::max(0.0, manifold::inner(g_new, g_new - g_old) / gg);
    eta = -g_new + beta * manifold::project_tangent(a_new, eta);
    a = std::move(a_new);
    b = std::move(b_new);
    g = g_new;
    f = f_new;
  }
}

}  // namespace

UnconstrainedBeamformers svd_precoders(const ChannelTensor& h, int n_streams) {
  if (h.empty()) throw std::invalid_argument("svd_precoders: empty channel");
  if (n_streams < 1 || n_streams > std::min(h.rows(), h.cols()))
    throw std::invalid_argument("svd_precoders: n_streams must be in [1, min(N_R, N_T)]");
  UnconstrainedBeamformers out;
  out.f_opt.reserve(h.size());
  out.singulars.reserve(h.size());
  for (std::size_t m = 0; m < h.size(); ++m) {
    const Eigen::JacobiSVD<CMatrix> svd(h[m], Eigen::ComputeThinV);
    const RVector& s = svd.singularValues();
    if (!(s(0) > 0.0) || s(n_streams - 1) <= 1e-12 * s(0))
      throw DegenerateError("svd_precoders: H[" + std::to_string(m) + "] has rank below N_S = " +
                            std::to_string(n_streams));
    CMatrix f = svd.matrixV().leftCols(n_streams);
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
      Eigen::Index k = 0;
      f.col(j).cwiseAbs().maxCoeff(&k);
      f.col(j) *= std::conj(f(k, j)) / std::abs(f(k, j));
    }
    out.f_opt.push_back(std::move(f));
    out.singulars.push_back(s);
  }
  return out;
}

std::vector<CMatrix> mmse_combiners(const ChannelTensor& h, std::span<const CMatrix> precoders,
                                    double rho, double noise_var) {
  if (!(rho > 0.0)) throw std::invalid_argument("mmse_combiners: rho must be positive");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("mmse_combiners: noise_var must be >= 0");
  if (precoders.size() != h.size())
    throw std::invalid_argument("mmse_combiners: one precoder per subcarrier required");
  std::vector<CMatrix> w(h.size());
  for (std::size_t m = 0; m < h.size(); ++m) {
    const CMatrix hf = h[m] * precoders[m];
    const auto ns = precoders[m].cols();
    if (std::isinf(noise_var)) {
      w[m] = CMatrix::Zero(hf.rows(), ns);
      continue;
    }
    CMatrix inner = hf.adjoint() * hf;
    inner.diagonal().array() += static_cast<double>(ns) * noise_var / rho;
    const Eigen::FullPivLU<CMatrix> lu(inner);
    if (!lu.isInvertible())
      throw DegenerateError("mmse_combiners: singular inner matrix at subcarrier " +
                            std::to_string(m));
    // W = (1/rho) H F inner^{-1}, using inner = inner^H.
    w[m] = (lu.solve(hf.adjoint()) / rho).adjoint();
  }
  return w;
}

UnconstrainedBeamformers unconstrained_beamformers(const ChannelTensor& h, int n_streams,
                                                   double rho, double noise_var) {
  UnconstrainedBeamformers u = svd_precoders(h, n_streams);
  u.w_mmse = mmse_combiners(h, u.f_opt, rho, noise_var);
  return u;
}

double factorization_objective(std::span<const CMatrix> target, const CMatrix& analog,
                               std::span<const CMatrix> baseband,
                               std::span<const CMatrix> weights) {
  double f = 0.0;
  for (std::size_t m = 0; m < target.size(); ++m) {
    const CMatrix r = target[m] - analog * baseband[m];
    f += weights.empty() ? r.squaredNorm() : (r.adjoint() * weights[m] * r).trace().real();
  }
  return f;
}

CMatrix factorization_gradient(std::span<const CMatrix> target, const CMatrix& analog,
                               std::span<const CMatrix> baseband,
                               std::span<const CMatrix> weights) {
  CMatrix g = CMatrix::Zero(analog.rows(), analog.cols());
  for (std::size_t m = 0; m < target.size(); ++m) {
    const CMatrix r = target[m] - analog * baseband[m];
    if (weights.empty())
      g.noalias() -= 2.0 * r * baseband[m].adjoint();
    else
      g.noalias() -= 2.0 * weights[m] * r * baseband[m].adjoint();
  }
  return g;
}

std::vector<CMatrix> least_squares_baseband(std::span<const CMatrix> target, const CMatrix& analog,
                                            std::span<const CMatrix> weights) {
  std::vector<CMatrix> b(target.size());
  if (weights.empty()) {
    const Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(analog);
    for (std::size_t m = 0; m < target.size(); ++m) b[m] = cod.solve(target[m]);
    return b;
  }
  for (std::size_t m = 0; m < target.size(); ++m) {
    const CMatrix wa = weights[m] * analog;
    const Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(analog.adjoint() * wa);
    b[m] = cod.solve(wa.adjoint() * target[m]);
  }
  return b;
}

AltMinResult mo_altmin(std::span<const CMatrix> target, int n_rf, const AltMinOptions& opts,
                       std::span<const CMatrix> weights) {
  if (opts.restarts < 1) throw std::invalid_argument("mo_altmin: restarts must be >= 1");
  if (opts.restarts > 1 && !opts.initial) {
    AltMinOptions one = opts;
    one.restarts = 1;
    AltMinResult best;
    for (int r = 0; r < opts.restarts; ++r) {
      one.seed = r == 0 ? opts.seed : derive_seed(opts.seed, {0x5eed, static_cast<std::uint64_t>(r)});
      AltMinResult cur = mo_altmin(target, n_rf, one, weights);
      if (r == 0 || cur.residual < best.residual) best = std::move(cur);
    }
    return best;
  }
  check_target(target, weights, "mo_altmin");
  const auto n = target[0].rows();
  if (n_rf < 1 || n_rf > n) throw std::invalid_argument("mo_altmin: n_rf must be in [1, rows]");
  if (opts.outer_iters < 1 || opts.inner_iters < 1)
    throw std::invalid_argument("mo_altmin: iteration limits must be >= 1");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("mo_altmin: tol must be positive");

  AltMinResult res;
  if (opts.initial) {
    if (opts.initial->rows() != n || opts.initial->cols() != n_rf)
      throw std::invalid_argument("mo_altmin: initial analog stage has the wrong shape");
    res.analog = manifold::retract(*opts.initial);
  } else {
    Rng rng(opts.seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    res.analog.resize(n, n_rf);
    for (Eigen::Index j = 0; j < n_rf; ++j)
      for (Eigen::Index i = 0; i < n; ++i) res.analog(i, j) = std::polar(1.0, phase(rng));
  }

  const double floor = 1e-28 * std::max(target_energy(target), 1e-300);
  res.baseband = least_squares_baseband(target, res.analog, weights);
  double f = factorization_objective(target, res.analog, res.baseband, weights);
  if (!std::isfinite(f)) throw NumericalError("mo_altmin: non-finite residual", 0);
  res.trace.push_back(std::sqrt(f));

  for (int it = 1; it <= opts.outer_iters && f > floor; ++it) {
    analog_cg(target, res.analog, res.baseband, weights, opts.inner_iters, opts.reduced);
    res.baseband = least_squares_baseband(target, res.analog, weights);
    const double f_new = factorization_objective(target, res.analog, res.baseband, weights);
    if (!std::isfinite(f_new)) throw NumericalError("mo_altmin: non-finite residual", it);
    const double r_old = std::sqrt(f);
    const double r_new = std::sqrt(f_new);
    res.trace.push_back(r_new);
    res.iterations = it;
    f = f_new;
    if (r_old - r_new < opts.tol * r_old) break;
  }
  res.residual = std::sqrt(f);
  return res;
}

AltMinResult phase_extraction(std::span<const CMatrix> target, int n_rf,
                              std::span<const CMatrix> weights) {
  check_target(target, weights, "phase_extraction");
  const auto n = target[0].rows();
  const auto k = target[0].cols();
  if (n_rf < 1 || n_rf > n) throw std::invalid_argument("phase_extraction: n_rf must be in [1, rows]");
  CMatrix stacked(n, k * static_cast<Eigen::Index>(target.size()));
  for (std::size_t m = 0; m < target.size(); ++m) stacked.middleCols(m * k, k) = target[m];
  const Eigen::JacobiSVD<CMatrix> svd(stacked, Eigen::ComputeFullU);

  AltMinResult res;
  res.analog = manifold::phase_of(svd.matrixU().leftCols(n_rf));
  res.baseband = least_squares_baseband(target, res.analog, weights);
  res.residual = std::sqrt(factorization_objective(target, res.analog, res.baseband, weights));
  res.trace.push_back(res.residual);
  return res;
}

void normalize_power(const CMatrix& analog, std::vector<CMatrix>& baseband) {
  double total = 0.0;
  for (const auto& b : baseband) total += (analog * b).squaredNorm();
  if (!(total > 0.0) || baseband.empty()) return;
  const double target = static_cast<double>(baseband.size()) * static_cast<double>(baseband[0].cols());
  const double s = std::sqrt(target / total);
  for (auto& b : baseband) b *= s;
}

std::vector<CMatrix> received_covariance(const ChannelTensor& h, std::span<const CMatrix> precoders,
                                         double rho, double noise_var) {
  std::vector<CMatrix> out(h.size());
  for (std::size_t m = 0; m < h.size(); ++m) {
    const CMatrix hf = h[m] * precoders[m];
    out[m] = rho * hf * hf.adjoint();
    out[m].diagonal().array() += noise_var;
  }
  return out;
}

void align_analog_phases(HybridBeamformer& b) {
  auto align = [](CMatrix& rf, std::vector<CMatrix>& bb) {
    for (Eigen::Index j = 0; j < rf.cols(); ++j) {
      const cplx u = rf(0, j) / std::abs(rf(0, j));
      rf.col(j) *= std::conj(u);
      for (auto& m : bb) m.row(j) *= u;
    }
  };
  align(b.f_rf, b.f_bb);
  align(b.w_rf, b.w_bb);
}

std::vector<CMatrix> precoders_of(const HybridBeamformer& b) {
  std::vector<CMatrix> f(b.size());
  for (std::size_t m = 0; m < b.size(); ++m) f[m] = b.precoder(m);
  return f;
}

std::vector<CMatrix> combiners_of(const HybridBeamformer& b) {
  std::vector<CMatrix> w(b.size());
  for (std::size_t m = 0; m < b.size(); ++m) w[m] = b.combiner(m);
  return w;
}

HybridDesign design_hybrid(const ChannelTensor& h, const SystemConfig& cfg, double rho,
                           double noise_var, const HybridOptions& opts) {
  cfg.validate();
  if (h.rows() != cfg.n_rx || h.cols() != cfg.n_tx || static_cast<int>(h.size()) != cfg.n_subcarriers)
    throw std::invalid_argument("design_hybrid: channel does not match the system config");

  HybridDesign d;
  d.reference = unconstrained_beamformers(h, cfg.n_streams, rho, noise_var);
  const bool mo = opts.method == HybridMethod::manifold;

  d.precoder_fit = mo ? mo_altmin(d.reference.f_opt, cfg.n_rf, opts.altmin)
                      : phase_extraction(d.reference.f_opt, cfg.n_rf);
  d.beams.f_rf = d.precoder_fit.analog;
  d.beams.f_bb = d.precoder_fit.baseband;
  normalize_power(d.beams.f_rf, d.beams.f_bb);

  std::vector<CMatrix> weights;
  if (opts.weighted_combiner)
    weights = received_covariance(h, precoders_of(d.beams), rho, noise_var);

  AltMinOptions copts = opts.altmin;
  copts.initial.reset();
  copts.seed = derive_seed(opts.altmin.seed, {1});
  d.combiner_fit = mo ? mo_altmin(d.reference.w_mmse, cfg.n_rf, copts, weights)
                      : phase_extraction(d.reference.w_mmse, cfg.n_rf, weights);
  d.beams.w_rf = d.combiner_fit.analog;
  d.beams.w_bb = d.combiner_fit.baseband;
  return d;
}

double spectral_efficiency(const ChannelTensor& h, std::span<const CMatrix> precoders,
                           std::span<const CMatrix> combiners, double rho, double noise_var) {
  if (!(noise_var > 0.0)) throw std::invalid_argument("spectral_efficiency: noise_var must be positive");
  if (!(rho >= 0.0)) throw std::invalid_argument("spectral_efficiency: rho must be >= 0");
  if (h.empty() || precoders.size() != h.size() || combiners.size() != h.size())
    throw std::invalid_argument("spectral_efficiency: one precoder and combiner per subcarrier");
  double total = 0.0;
  for (std::size_t m = 0; m < h.size(); ++m) {
    const CMatrix& f = precoders[m];
    const CMatrix& w = combiners[m];
    if (f.rows() != h.cols() || w.rows() != h.rows())
      throw std::invalid_argument("spectral_efficiency: beamformer shapes do not match H");
    const double ns = static_cast<double>(f.cols());
    const CMatrix noise = noise_var * (w.adjoint() * w);
    const Eigen::LLT<CMatrix> chol(noise);
    if (chol.info() != Eigen::Success || chol.rcond() < 1e-14)
      throw DegenerateError("spectral_efficiency: singular combiner noise covariance at subcarrier " +
                            std::to_string(m));
    const CMatrix x = chol.matrixL().solve(w.adjoint() * h[m] * f);
    CMatrix s = (rho / ns) * x * x.adjoint();
    s.diagonal().array() += 1.0;
    const Eigen::LLT<CMatrix> sl(s);
    total += 2.0 * sl.matrixLLT().diagonal().real().array().log().sum() / std::log(2.0);
  }
  return total / static_cast<double>(h.size());
}

double spectral_efficiency(const ChannelTensor& h, const HybridBeamformer& b, double rho,
                           double noise_var) {
  return spectral_efficiency(h, precoders_of(b), combiners_of(b), rho, noise_var);
}

double spectral_efficiency(const ChannelTensor& h, const UnconstrainedBeamformers& b, double rho,
                           double noise_var) {
  return spectral_efficiency(h, b.f_opt, b.w_mmse, rho, noise_var);
}

}  // namespace wbhb
