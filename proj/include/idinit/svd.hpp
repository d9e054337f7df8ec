#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "idinit/matrix.hpp"

namespace idinit {

// Singular values by one-sided Jacobi: cyclic sweeps of plane rotations
// orthogonalize the columns; a pair is rotated while its normalized
// off-diagonal Gram entry exceeds 1e-12. Adequate up to a few thousand
// rows/columns.
inline std::vector<double> singular_values(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return {};

  // Work on rows of W = B^T where B has rows >= cols, so each column of B is
  // a contiguous row of W.
  Matrix w = a.rows() >= a.cols() ? transpose(a) : a;
  const std::size_t n = w.rows();   // columns being orthogonalized
  const std::size_t m = w.cols();

  constexpr double kTol = 1e-12;
  constexpr int kMaxSweeps = 60;

  std::vector<double> sq_norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* wi = w.row(i);
    for (std::size_t t = 0; t < m; ++t) s += wi[t] * wi[t];
    sq_norms[i] = s;
  }

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* wp = w.row(p);
        double* wq = w.row(q);
        const double alpha = sq_norms[p];
        const double beta = sq_norms[q];
        if (alpha == 0.0 || beta == 0.0) continue;
        double gamma = 0.0;
        for (std::size_t t = 0; t < m; ++t) gamma += wp[t] * wq[t];
        if (std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < m; ++k) {
          const double vp = wp[k];
          const double vq = wq[k];
          wp[k] = c * vp - s * vq;
          wq[k] = s * vp + c * vq;
        }
        sq_norms[p] = 0.0;
        sq_norms[q] = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          sq_norms[p] += wp[k] * wp[k];
          sq_norms[q] += wq[k] * wq[k];
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sv(n);
  for (std::size_t i = 0; i < n; ++i) sv[i] = std::sqrt(sq_norms[i]);
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

// Number of singular values above rel_tol * sigma_max.
inline std::size_t numerical_rank(const Matrix& a, double rel_tol = 1e-8) {
  if (rel_tol <= 0.0) throw ShapeError("numerical_rank: rel_tol must be > 0");
  const std::vector<double> sv = singular_values(a);
  if (sv.empty()) return 0;
  const double cut = rel_tol * sv.front();
  std::size_t r = 0;
  while (r < sv.size() && sv[r] > cut) ++r;
  return r;
}

// Mean squared singular value; equals ||a||_F^2 / min(rows, cols).
inline double mean_sq_singular_value(const Matrix& a) {
  const std::vector<double> sv = singular_values(a);
  if (sv.empty()) return 0.0;
  double s = 0.0;
  for (double v : sv) s += v * v;
  return s / static_cast<double>(sv.size());
}

}  // namespace idinit
