// Copyright (c) 2026 The pkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <limits>

#include "pkit/core.hpp"

namespace pkit {

template <class T>
struct SymmetricEigen {
  VectorX<T> values;
  MatrixX<T> vectors;  // columns are eigenvectors
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Only the upper
/// triangle is read. Throws if the off-diagonal mass has not vanished after
/// max_sweeps sweeps.
template <class Derived>
SymmetricEigen<typename Derived::Scalar> jacobi_eigen(const Eigen::MatrixBase<Derived>& input,
                                                      int max_sweeps = 100) {
  using T = typename Derived::Scalar;
  const Eigen::Index n = input.rows();
  if (input.cols() != n) throw Error("jacobi_eigen: matrix is not square");

  MatrixX<T> a = input.template selfadjointView<Eigen::Upper>();
  MatrixX<T> v = MatrixX<T>::Identity(n, n);
  SymmetricEigen<T> out;

  const T scale = a.cwiseAbs().maxCoeff();
  const T tol = std::numeric_limits<T>::epsilon() * std::numeric_limits<T>::epsilon() *
                (scale > T(0) ? scale * scale : T(1));
  for (int sweep = 0;; ++sweep) {
    T off = T(0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off <= tol) {
      out.sweeps = sweep;
      break;
    }
    if (sweep >= max_sweeps) throw Error("jacobi_eigen: no convergence after " + std::to_string(max_sweeps) + " sweeps");

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const T apq = a(p, q);
        if (apq == T(0)) continue;
        const T theta = (a(q, q) - a(p, p)) / (T(2) * apq);
        const T t = (theta >= T(0) ? T(1) : T(-1)) / (std::abs(theta) + std::sqrt(theta * theta + T(1)));
        const T c = T(1) / std::sqrt(t * t + T(1));
        const T s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const T akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const T apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = T(0);
        for (Eigen::Index k = 0; k < n; ++k) {
          const T vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  out.values = a.diagonal();
  out.vectors = std::move(v);
  return out;
}

/// Principal square root of a symmetric PSD matrix; negative eigenvalues
/// (numerical noise) are clipped to zero.
template <class Derived>
MatrixX<typename Derived::Scalar> sqrtm_psd(const Eigen::MatrixBase<Derived>& m, int max_sweeps = 100) {
  using T = typename Derived::Scalar;
  auto eig = jacobi_eigen(m, max_sweeps);
  VectorX<T> roots = eig.values.unaryExpr([](T x) { return x > T(0) ? std::sqrt(x) : T(0); });
  MatrixX<T> out = eig.vectors * roots.asDiagonal() * eig.vectors.transpose();
  return (out + out.transpose()) / T(2);
}

}  // namespace pkit
