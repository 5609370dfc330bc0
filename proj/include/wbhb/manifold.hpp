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

#ifndef WBHB_MANIFOLD_HPP
#define WBHB_MANIFOLD_HPP

#include <Eigen/Core>

#include <cmath>
#include <complex>

namespace wbhb::manifold {

// Product of complex circles {X : |X_ij| = 1}, embedded in C^{n x k} with the
// real inner product <A, B> = Re tr(A^H B).

template <typename DerivedA, typename DerivedB>
typename DerivedA::RealScalar inner(const Eigen::MatrixBase<DerivedA>& a,
                                    const Eigen::MatrixBase<DerivedB>& b) {
  return (a.conjugate().cwiseProduct(b)).sum().real();
}

/// Tangent projection g - Re{g o conj(x)} o x.
template <typename DerivedX, typename DerivedG>
typename DerivedX::PlainObject project_tangent(const Eigen::MatrixBase<DerivedX>& x,
                                               const Eigen::MatrixBase<DerivedG>& g) {
  using Plain = typename DerivedX::PlainObject;
  Plain out = g;
  out.array() -= (g.array() * x.array().conjugate()).real().template cast<typename Plain::Scalar>() * x.array();
  return out;
}

/// Entry-wise x / |x|; zero entries map to 1.
template <typename Derived>
typename Derived::PlainObject retract(const Eigen::MatrixBase<Derived>& x) {
  using Plain = typename Derived::PlainObject;
  using Scalar = typename Plain::Scalar;
  Plain out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto r = std::abs(x(i, j));
      out(i, j) = r > 0 ? Scalar(x(i, j) / r) : Scalar(1);
    }
  return out;
}

/// Entry-wise exp(j angle(x)).
template <typename Derived>
typename Derived::PlainObject phase_of(const Eigen::MatrixBase<Derived>& x) {
  return retract(x);
}

/// Largest deviation of |x_ij| from one.
template <typename Derived>
typename Derived::RealScalar modulus_error(const Eigen::MatrixBase<Derived>& x) {
  if (x.size() == 0) return 0;
  return (x.array().abs() - typename Derived::RealScalar(1)).abs().maxCoeff();
}

}  // namespace wbhb::manifold

#endif  // WBHB_MANIFOLD_HPP
