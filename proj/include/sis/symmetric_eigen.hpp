// Copyright (c) 2026 The sis Authors. All rights reserved.
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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sis/tensor.hpp"

namespace sis {

struct EigenDecomposition {
  std::vector<double> values;  // ascending
  Matrix vectors;  // column j pairs with values[j]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps every (p, q) pair in row order, annihilating a_pq with a plane
/// rotation, until the off-diagonal mass is negligible relative to the
/// matrix norm. Eigenpairs are returned in ascending order (stable on
/// ties) with each eigenvector's largest-magnitude entry made positive.
inline EigenDecomposition jacobi_eigen(const Matrix& m, std::size_t max_sweeps = 100) {
  const std::size_t n = m.rows();
  if (m.cols() != n) throw ArgumentError("jacobi_eigen: matrix must be square");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-12) throw ArgumentError("jacobi_eigen: matrix is not symmetric");
    }
  }

  Matrix a = m;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) a(j, i) = a(i, j) = 0.5 * (m(i, j) + m(j, i));
  }
  Matrix v = Matrix::identity(n);

  double norm = 0.0;
  for (double x : a.data()) norm += x * x;
  const double tol = 1e-30 * std::max(norm, 1e-300);

  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off <= tol) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        // Skip rotations that cannot change the diagonal in floating point.
        if (std::abs(apq) < 1e-300 ||
            (std::abs(app) + 1e3 * std::abs(apq) == std::abs(app) &&
             std::abs(aqq) + 1e3 * std::abs(apq) == std::abs(aqq) && sweep > 3)) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
          a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  EigenDecomposition out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.values[j] = a(src, src);
    std::size_t argmax = 0;
    for (std::size_t r = 0; r < n; ++r) {
      if (std::abs(v(r, src)) > std::abs(v(argmax, src))) argmax = r;
    }
    const double sign = v(argmax, src) < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, j) = sign * v(r, src);
  }
  return out;
}

}  // namespace sis
