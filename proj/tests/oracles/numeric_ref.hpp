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

// Test-only numerical oracles: O(n^2) DFT and a Denman-Beavers matrix
// square root. Neither shares code with the library.

#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace pkit::oracle {

inline std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
  const size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    long double re = 0, im = 0;
    for (size_t t = 0; t < n; ++t) {
      // Reduce the phase index exactly before converting to an angle.
      const long double angle = -2.0L * 3.14159265358979323846264338327950288L *
                                static_cast<long double>((k * t) % n) / static_cast<long double>(n);
      re += x[t] * std::cos(angle);
      im += x[t] * std::sin(angle);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

// Denman-Beavers iteration: Y -> (Y + Z^-1)/2, Z -> (Z + Y^-1)/2 with
// Y0 = A, Z0 = I converges to (sqrt(A), sqrt(A)^-1) for SPD A.
inline Eigen::MatrixXd denman_beavers_sqrt(const Eigen::MatrixXd& a, int max_iter = 200) {
  Eigen::MatrixXd y = a;
  Eigen::MatrixXd z = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (int i = 0; i < max_iter; ++i) {
    Eigen::MatrixXd y_next = 0.5 * (y + z.inverse());
    Eigen::MatrixXd z_next = 0.5 * (z + y.inverse());
    const double change = (y_next - y).norm();
    y = y_next;
    z = z_next;
    if (change <= 1e-15 * y.norm()) break;
  }
  return y;
}

inline double frechet_reference(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a,
                                const Eigen::VectorXd& mu_b, const Eigen::MatrixXd& cov_b) {
  const Eigen::MatrixXd root_a = denman_beavers_sqrt(cov_a);
  const Eigen::MatrixXd cross = denman_beavers_sqrt(root_a * cov_b * root_a);
  return (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
}

}  // namespace pkit::oracle
