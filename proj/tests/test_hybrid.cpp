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
#include "wbhb/errors.hpp"
#include "wbhb/hybrid.hpp"
#include "wbhb/manifold.hpp"
#include "wbhb/pilot.hpp"
#include "wbhb/random.hpp"

#include <algorithm>
#include <cmath>

using namespace wbhb;

namespace {

SystemConfig desk() {
  SystemConfig cfg;
  cfg.n_tx = 16;
  cfg.n_rx = 4;
  cfg.n_rf = 2;
  cfg.n_streams = 2;
  cfg.n_subcarriers = 4;
  cfg.unit_gain = true;
  return cfg;
}

ChannelTensor desk_channel(const SystemConfig& cfg, std::uint64_t seed) {
  return frequency_channel(cfg, random_scenario(cfg, 10, 5, seed));
}

// Column-wise equality up to one unit-modulus scalar per column.
bool equal_up_to_column_phase(const CMatrix& a, const CMatrix& b, double tol) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const cplx ip = b.col(j).dot(a.col(j));
    if (std::abs(ip) < 1e-300) return false;
    if ((a.col(j) - (ip / std::abs(ip)) * b.col(j)).norm() > tol * std::max(1.0, a.col(j).norm())) return false;
  }
  return true;
}

// log2 det(I + (rho/N_S) Lambda_n^{-1} K K^H) via elimination-based det/inverse.
double oracle_rate(const CMatrix& h, const CMatrix& f, const CMatrix& w, double rho, double nv) {
  using namespace oracle;
  const CMatrix k = matmul(matmul(adjoint(w), h), f);
  const CMatrix ln = nv * matmul(adjoint(w), w);
  CMatrix s = (rho / static_cast<double>(f.cols())) * matmul(inverse(ln), matmul(k, adjoint(k)));
  s += CMatrix::Identity(s.rows(), s.cols());
  return std::log2(std::abs(det(s)));
}

}  // namespace

TEST_CASE("SVD precoders", "[hybrid]") {
  SECTION("identity channel") {
    const ChannelTensor h(std::vector<CMatrix>{CMatrix::Identity(4, 4)});
    const UnconstrainedBeamformers u = svd_precoders(h, 2);
    const CMatrix e = CMatrix::Identity(4, 4).leftCols(2);
    CHECK(((u.f_opt[0].adjoint() * e).cwiseAbs() - RMatrix::Identity(2, 2)).norm() < 1e-12);
  }
  SECTION("rank-one channel matches the transmit steering direction") {
    const CVector ar = steering_vector(4, 0.3, 0.5);
    const CVector at = steering_vector(16, -0.7, 0.5);
    const ChannelTensor h(std::vector<CMatrix>{ar * at.adjoint()});
    const UnconstrainedBeamformers u = svd_precoders(h, 1);
    CHECK(std::abs(at.dot(u.f_opt[0].col(0))) / at.norm() >= 1.0 - 1e-9);
    CHECK_THROWS_AS(svd_precoders(h, 2), DegenerateError);
  }
  SECTION("captured energy matches an eigenvalue oracle") {
    const SystemConfig cfg = desk();
    for (int t = 0; t < 10; ++t) {
      const ChannelTensor h = desk_channel(cfg, 10 + t);
      const UnconstrainedBeamformers u = svd_precoders(h, 2);
      for (std::size_t m = 0; m < h.size(); ++m) {
        std::vector<double> ev = oracle::hermitian_eigenvalues(oracle::matmul(oracle::adjoint(h[m]), h[m]));
        std::sort(ev.rbegin(), ev.rend());
        const double top = ev[0] + ev[1];
        CHECK(std::abs((h[m] * u.f_opt[m]).squaredNorm() - top) <= 1e-9 * top);
        CHECK((u.f_opt[m].adjoint() * u.f_opt[m] - CMatrix::Identity(2, 2)).norm() <= 1e-9);
        for (Eigen::Index j = 0; j < 2; ++j) {
          Eigen::Index k = 0;
          u.f_opt[m].col(j).cwiseAbs().maxCoeff(&k);
          CHECK(std::abs(u.f_opt[m](k, j).imag()) <= 1e-12);
          CHECK(u.f_opt[m](k, j).real() > 0.0);
        }
        CHECK(u.singulars[m](0) >= u.singulars[m](1));
      }
    }
  }
}

TEST_CASE("MMSE combiners", "[hybrid]") {
  SECTION("scalar case") {
    const ChannelTensor h(std::vector<CMatrix>{CMatrix::Identity(4, 4)});
    const std::vector<CMatrix> f{CMatrix::Identity(4, 4).leftCols(2)};
    const double s2 = 0.3;
    const std::vector<CMatrix> w = mmse_combiners(h, f, 1.0, s2);
    const CMatrix expect = CMatrix::Identity(4, 4).leftCols(2) / (1.0 + 2.0 * s2);
    CHECK((w[0] - expect).norm() < 1e-14);
  }
  SECTION("infinite noise gives zero") {
    const SystemConfig cfg = desk();
    const ChannelTensor h = desk_channel(cfg, 1);
    const UnconstrainedBeamformers u = svd_precoders(h, 2);
    for (const auto& w : mmse_combiners(h, u.f_opt, 1.0, kNoNoise)) CHECK(w.norm() == 0.0);
    CHECK(mmse_combiners(h, u.f_opt, 1.0, 1e12)[0].norm() < 1e-9);
    CHECK_THROWS_AS(mmse_combiners(h, u.f_opt, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(mmse_combiners(h, u.f_opt, 1.0, -1.0), std::invalid_argument);
  }
  SECTION("matches the covariance definition") {
    // y = sqrt(rho) H F s + n, E{ss^H} = I / N_S, E{nn^H} = sigma^2 I.
    const SystemConfig cfg = desk();
    for (double rho : {1.0, 4.0}) {
      const ChannelTensor h = desk_channel(cfg, 2);
      const UnconstrainedBeamformers u = svd_precoders(h, 2);
      const double s2 = 0.7;
      const std::vector<CMatrix> w = mmse_combiners(h, u.f_opt, rho, s2);
      for (std::size_t m = 0; m < h.size(); ++m) {
        using namespace oracle;
        const CMatrix hf = matmul(h[m], u.f_opt[m]);
        const CMatrix c_sy = (std::sqrt(rho) / 2.0) * adjoint(hf);
        CMatrix c_yy = (rho / 2.0) * matmul(hf, adjoint(hf));
        c_yy += s2 * CMatrix::Identity(4, 4);
        const CMatrix w_ref = adjoint(matmul(c_sy, inverse(c_yy)));
        CHECK((w[m] - w_ref / std::sqrt(rho)).norm() <= 1e-8 * w_ref.norm());
      }
    }
  }
}

TEST_CASE("factorization objective gradient", "[hybrid][oracle]") {
  const SystemConfig cfg = desk();
  const ChannelTensor h = desk_channel(cfg, 3);
  const UnconstrainedBeamformers u = unconstrained_beamformers(h, 2, 1.0, 1.0);
  const std::vector<CMatrix> lam = received_covariance(h, u.f_opt, 1.0, 1.0);
  Rng rng(9);
  for (int p = 0; p < 10; ++p) {
    const bool weighted = p % 2 == 1;
    const std::vector<CMatrix>& target = weighted ? u.w_mmse : u.f_opt;
    const std::span<const CMatrix> w = weighted ? std::span<const CMatrix>(lam) : std::span<const CMatrix>();
    const auto n = target[0].rows();
    const CMatrix x = manifold::retract(complex_normal_matrix(rng, n, 2));
    std::vector<CMatrix> b;
    for (std::size_t m = 0; m < target.size(); ++m) b.push_back(complex_normal_matrix(rng, 2, 2));
    const CMatrix rgrad = manifold::project_tangent(x, factorization_gradient(target, x, b, w));
    for (int d = 0; d < 5; ++d) {
      CMatrix xi = manifold::project_tangent(x, complex_normal_matrix(rng, n, 2));
      xi /= xi.norm();
      const double eps = 1e-5;
      const double fp = factorization_objective(target, manifold::retract(CMatrix(x + eps * xi)), b, w);
      const double fm = factorization_objective(target, manifold::retract(CMatrix(x - eps * xi)), b, w);
      const double fd = (fp - fm) / (2.0 * eps);
      const double an = manifold::inner(rgrad, xi);
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(std::abs(an), rgrad.norm()));
    }
  }
}

TEST_CASE("tangent projection and retraction", "[hybrid][property]") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const CMatrix x = manifold::retract(complex_normal_matrix(rng, 6, 3));
    CHECK(manifold::modulus_error(x) < 1e-15);
    const CMatrix g = complex_normal_matrix(rng, 6, 3);
    const CMatrix p = manifold::project_tangent(x, g);
    // Tangent vectors satisfy Re{xi o conj(x)} = 0, and projection is idempotent.
    CHECK((p.array() * x.array().conjugate()).real().abs().maxCoeff() < 1e-14);
    CHECK((manifold::project_tangent(x, p) - p).norm() < 1e-14);
  }
}

TEST_CASE("MO-AltMin exact factorizations", "[hybrid]") {
  SECTION("N_RF = N_T from a DFT start") {
    const SystemConfig cfg = desk();
    const UnconstrainedBeamformers u = svd_precoders(desk_channel(cfg, 5), 2);
    AltMinOptions o;
    o.initial = dft_columns(16, 16);
    const AltMinResult r = mo_altmin(u.f_opt, 16, o);
    CHECK(r.trace.front() <= 1e-8);
    CHECK(r.residual <= 1e-8);
  }
  SECTION("combiner with N_RF = N_R, weighted and unweighted") {
    const SystemConfig cfg = desk();
    const ChannelTensor h = desk_channel(cfg, 6);
    const UnconstrainedBeamformers u = unconstrained_beamformers(h, 2, 1.0, 1.0);
    AltMinOptions o;
    o.initial = dft_columns(4, 4);
    CHECK(mo_altmin(u.w_mmse, 4, o).residual <= 1e-8);
    const auto lam = received_covariance(h, u.f_opt, 1.0, 1.0);
    CHECK(mo_altmin(u.w_mmse, 4, o, lam).residual <= 1e-8);
  }
  SECTION("rank-one target recovers the steering phases") {
    const CVector at = steering_vector(16, 0.4, 0.5);
    const std::vector<CMatrix> target{at / 4.0};
    AltMinOptions o;
    o.seed = 12;
    const AltMinResult r = mo_altmin(target, 1, o);
    CHECK(r.residual <= 1e-6);
    CHECK(equal_up_to_column_phase(r.analog, at, 1e-5));
    const AltMinResult pe = phase_extraction(target, 1);
    CHECK(equal_up_to_column_phase(pe.analog, r.analog, 1e-5));
    CHECK(pe.residual <= 1e-12);
  }
}

TEST_CASE("identity weighting reduces to plain least squares", "[hybrid]") {
  const SystemConfig cfg = desk();
  const UnconstrainedBeamformers u = unconstrained_beamformers(desk_channel(cfg, 7), 2, 1.0, 1.0);
  const std::vector<CMatrix> eye(u.size(), CMatrix::Identity(4, 4));
  Rng rng(1);
  const CMatrix a = manifold::retract(complex_normal_matrix(rng, 4, 2));
  const auto b1 = least_squares_baseband(u.w_mmse, a);
  const auto b2 = least_squares_baseband(u.w_mmse, a, eye);
  for (std::size_t m = 0; m < b1.size(); ++m) CHECK((b1[m] - b2[m]).norm() <= 1e-10 * b1[m].norm());
  AltMinOptions o;
  o.seed = 3;
  CHECK(mo_altmin(u.w_mmse, 2, o).residual == Catch::Approx(mo_altmin(u.w_mmse, 2, o, eye).residual).epsilon(1e-8));
}

TEST_CASE("MO-AltMin traces are nonincreasing and beat phase extraction", "[hybrid][property]") {
  const SystemConfig cfg = desk();
  for (int t = 0; t < 20; ++t) {
    const ChannelTensor h = desk_channel(cfg, 100 + t);
    HybridOptions opts;
    opts.altmin.seed = derive_seed(100 + t, {7});
    const HybridDesign d = design_hybrid(h, cfg, 1.0, 1.0, opts);
    for (const AltMinResult* r : {&d.precoder_fit, &d.combiner_fit}) {
      REQUIRE(r->trace.size() >= 2);
      for (std::size_t i = 1; i < r->trace.size(); ++i)
        CHECK(r->trace[i] <= r->trace[i - 1] + 1e-12 * r->trace.front());
    }
    const AltMinResult pe = phase_extraction(d.reference.f_opt, cfg.n_rf);
    CHECK(d.precoder_fit.residual <= pe.residual);
    CHECK(pe.residual >= 0.0);
  }
}

TEST_CASE("MO-AltMin rejects bad input", "[hybrid]") {
  const std::vector<CMatrix> target{CMatrix::Ones(4, 2)};
  AltMinOptions o;
  CHECK_THROWS_AS(mo_altmin(target, 0, o), std::invalid_argument);
  CHECK_THROWS_AS(mo_altmin(target, 5, o), std::invalid_argument);
  o.tol = 0.0;
  CHECK_THROWS_AS(mo_altmin(target, 2, o), std::invalid_argument);
  std::vector<CMatrix> bad{CMatrix::Ones(4, 2)};
  bad[0](1, 1) = cplx(std::nan(""), 0.0);
  CHECK_THROWS_AS(mo_altmin(bad, 2), NumericalError);
}

TEST_CASE("hybrid designs satisfy the hardware constraints", "[hybrid][property]") {
  const SystemConfig cfg = desk();
  for (HybridMethod method : {HybridMethod::manifold, HybridMethod::phase_extraction}) {
    for (int t = 0; t < 10; ++t) {
      HybridOptions opts;
      opts.method = method;
      opts.altmin.seed = t;
      const HybridDesign d = design_hybrid(desk_channel(cfg, 200 + t), cfg, 1.0, 1.0, opts);
      CHECK(manifold::modulus_error(d.beams.f_rf) <= 1e-9);
      CHECK(manifold::modulus_error(d.beams.w_rf) <= 1e-9);
      double p = 0.0;
      for (std::size_t m = 0; m < d.beams.size(); ++m) p += d.beams.precoder(m).squaredNorm();
      CHECK(p == Catch::Approx(4.0 * 2.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("analog phase alignment keeps the products", "[hybrid]") {
  const SystemConfig cfg = desk();
  const ChannelTensor h = desk_channel(cfg, 9);
  const HybridDesign d = design_hybrid(h, cfg, 1.0, 1.0);
  HybridBeamformer b = d.beams;
  align_analog_phases(b);
  for (Eigen::Index j = 0; j < 2; ++j) {
    CHECK(std::abs(b.f_rf(0, j) - 1.0) < 1e-15);
    CHECK(std::abs(b.w_rf(0, j) - 1.0) < 1e-15);
  }
  CHECK(manifold::modulus_error(b.f_rf) <= 1e-12);
  for (std::size_t m = 0; m < b.size(); ++m) {
    CHECK((b.precoder(m) - d.beams.precoder(m)).norm() <= 1e-12);
    CHECK((b.combiner(m) - d.beams.combiner(m)).norm() <= 1e-12 * d.beams.combiner(m).norm());
  }
}

TEST_CASE("spectral efficiency closed forms", "[hybrid]") {
  SECTION("zero channel") {
    const ChannelTensor h(2, 4, 8);
    const std::vector<CMatrix> f(2, CMatrix::Identity(8, 2));
    const std::vector<CMatrix> w(2, CMatrix::Identity(4, 2));
    CHECK(spectral_efficiency(h, f, w, 1.0, 1.0) == 0.0);
  }
  SECTION("diagonal channel") {
    const RVector s = (RVector(3) << 3.0, 1.5, 0.4).finished();
    CMatrix hm = CMatrix::Zero(3, 5);
    for (int i = 0; i < 3; ++i) hm(i, i) = s(i);
    const ChannelTensor h(std::vector<CMatrix>{hm, hm});
    const std::vector<CMatrix> f(2, CMatrix::Identity(5, 3));
    const std::vector<CMatrix> w(2, CMatrix::Identity(3, 3));
    const double rho = 2.0;
    const double nv = 0.5;
    double ref = 0.0;
    for (int i = 0; i < 3; ++i) ref += std::log2(1.0 + rho * s(i) * s(i) / (3.0 * nv));
    CHECK(std::abs(spectral_efficiency(h, f, w, rho, nv) - ref) <= 1e-10);
  }
  SECTION("random instance against a determinant oracle") {
    const SystemConfig cfg = desk();
    const ChannelTensor h = desk_channel(cfg, 8);
    const HybridDesign d = design_hybrid(h, cfg, 3.0, 1.0);
    double ref = 0.0;
    for (std::size_t m = 0; m < h.size(); ++m)
      ref += oracle_rate(h[m], d.beams.precoder(m), d.beams.combiner(m), 3.0, 1.0);
    CHECK(spectral_efficiency(h, d.beams, 3.0, 1.0) == Catch::Approx(ref / 4.0).epsilon(1e-10));
  }
  SECTION("degenerate inputs") {
    const ChannelTensor h(std::vector<CMatrix>{CMatrix::Identity(4, 4)});
    const std::vector<CMatrix> f{CMatrix::Identity(4, 2)};
    const std::vector<CMatrix> w0{CMatrix::Zero(4, 2)};
    CHECK_THROWS_AS(spectral_efficiency(h, f, w0, 1.0, 1.0), DegenerateError);
    CHECK_THROWS_AS(spectral_efficiency(h, f, f, 1.0, 0.0), std::invalid_argument);
  }
}

TEST_CASE("spectral efficiency invariances and dominance", "[hybrid][property]") {
  const SystemConfig cfg = desk();
  Rng rng(17);
  for (int t = 0; t < 100; ++t) {
    const ChannelTensor h = desk_channel(cfg, 300 + t);
    HybridOptions opts;
    opts.altmin.seed = t;
    const HybridDesign d = design_hybrid(h, cfg, 1.0, 1.0, opts);
    const double fd = spectral_efficiency(h, d.reference, 1.0, 1.0);
    const double hy = spectral_efficiency(h, d.beams, 1.0, 1.0);
    CHECK(hy <= fd + 1e-9);

    if (t < 10) {
      HybridBeamformer rotated = d.beams;
      for (auto& b : rotated.f_bb) b = b * CMatrix(complex_normal_matrix(rng, 2, 2).householderQr().householderQ());
      CHECK(spectral_efficiency(h, rotated, 1.0, 1.0) == Catch::Approx(hy).epsilon(1e-9));
    }
  }
}

TEST_CASE("fully connected hybrid equals fully digital", "[hybrid]") {
  SystemConfig cfg = desk();
  cfg.n_tx = 4;
  cfg.n_rx = 4;
  cfg.n_rf = 4;
  for (int t = 0; t < 5; ++t) {
    const ChannelTensor h = desk_channel(cfg, 400 + t);
    HybridOptions opts;
    opts.altmin.seed = t;
    const HybridDesign d = design_hybrid(h, cfg, 1.0, 1.0, opts);
    CHECK(std::abs(spectral_efficiency(h, d.beams, 1.0, 1.0) - spectral_efficiency(h, d.reference, 1.0, 1.0)) <= 1e-6);
  }
}
