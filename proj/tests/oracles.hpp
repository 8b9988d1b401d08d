#pragma once

// Brute-force reference computations used only by the tests. Nothing here
// shares code with the library routines it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "qplab/model.hpp"

namespace oracle {

using Dense = std::vector<std::vector<long double>>;

inline Dense tridiagonal(const std::vector<double>& diag) {
  const std::size_t n = diag.size();
  Dense a(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) {
    a[i][i] = diag[i];
    if (i + 1 < n) a[i][i + 1] = a[i + 1][i] = 1.0L;
  }
  return a;
}

/// Determinant by Gaussian elimination with partial pivoting (long double).
inline long double determinant(Dense a) {
  const std::size_t n = a.size();
  long double det = 1.0L;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
    if (a[p][c] == 0.0L) return 0.0L;
    if (p != c) {
      std::swap(a[p], a[c]);
      det = -det;
    }
    det *= a[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const long double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return det;
}

/// Determinant of `a` with row i and column j removed.
inline long double minor(const Dense& a, std::size_t i, std::size_t j) {
  Dense m;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (r == i) continue;
    std::vector<long double> row;
    for (std::size_t c = 0; c < a.size(); ++c)
      if (c != j) row.push_back(a[r][c]);
    m.push_back(std::move(row));
  }
  return m.empty() ? 1.0L : determinant(m);
}

/// Gauss-Jordan inverse with partial pivoting (long double).
inline Dense inverse(Dense a) {
  const std::size_t n = a.size();
  Dense inv(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0L;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
    std::swap(a[p], a[c]);
    std::swap(inv[p], inv[c]);
    const long double d = a[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      a[c][k] /= d;
      inv[c][k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const long double f = a[r][c];
      if (f == 0.0L) continue;
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] -= f * a[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(Dense a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    long double off = 0.0L;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-40L) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0L) continue;
        const long double theta = (a[q][q] - a[p][p]) / (2.0L * a[p][q]);
        const long double t = (theta >= 0 ? 1.0L : -1.0L) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0L));
        const long double c = 1.0L / std::sqrt(t * t + 1.0L), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const long double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const long double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev;
  for (std::size_t i = 0; i < n; ++i) ev.push_back(static_cast<double>(a[i][i]));
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Spectral radius of a real 2x2 matrix by repeated squaring of a normalized
/// power iteration.
inline double power_iteration_log_radius(std::array<double, 4> m, int iterations = 4000) {
  long double x = 1.0L, y = 0.3L, log_growth = 0.0L;
  for (int i = 0; i < iterations; ++i) {
    const long double nx = m[0] * x + m[1] * y, ny = m[2] * x + m[3] * y;
    const long double norm = std::sqrt(nx * nx + ny * ny);
    if (i >= iterations / 2) log_growth += std::log(norm);
    x = nx / norm;
    y = ny / norm;
  }
  return static_cast<double>(log_growth / (iterations - iterations / 2));
}

/// log of the largest singular value of S(values[n-1]) ... S(values[0]),
/// multiplied out in long double without rescaling (small n only).
inline double log_norm_direct(const std::vector<double>& values, double E) {
  long double a = 1, b = 0, c = 0, d = 1;
  for (double x : values) {
    const long double t = x - E;
    const long double na = t * a + c, nb = t * b + d;
    c = -a;
    d = -b;
    a = na;
    b = nb;
  }
  // Largest eigenvalue of M^T M.
  const long double p = a * a + c * c, q = a * b + c * d, r = b * b + d * d;
  const long double top = 0.5L * (p + r) + std::sqrt(0.25L * (p - r) * (p - r) + q * q);
  return static_cast<double>(0.5L * std::log(top));
}

/// Random real trigonometric polynomial of degree <= max_degree on T^1.
inline qplab::TrigPotential random_potential(std::mt19937_64& rng, int max_degree = 3, double scale = 3.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> deg(1, max_degree);
  const int d = deg(rng);
  std::vector<qplab::TrigPotential::Term> terms;
  terms.push_back({{0, 0}, scale * u(rng)});
  for (int k = 1; k <= d; ++k) {
    const std::complex<double> c(scale * u(rng) / 2.0, scale * u(rng) / 2.0);
    terms.push_back({{k, 0}, c});
    terms.push_back({{-k, 0}, std::conj(c)});
  }
  return qplab::TrigPotential(1, terms, 1.0, 1.0);
}

}  // namespace oracle
