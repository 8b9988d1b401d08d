#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "qplab/log_scalar.hpp"
#include "qplab/model.hpp"
#include "qplab/scaled_matrix.hpp"

namespace qplab {

/// Closed integer interval [first, last].
struct Interval {
  long long first = 1;
  long long last = 1;

  long long size() const { return last - first + 1; }
  bool contains(long long k) const { return first <= k && k <= last; }
  bool contains(const Interval& o) const { return first <= o.first && o.last <= last; }
  Interval shifted(long long m) const { return {first + m, last + m}; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// One-step transfer matrix [[v - E, 1], [-1, 0]].
inline Matrix2<double> step_matrix(double v_val, double E) { return {v_val - E, 1.0, -1.0, 0.0}; }

template <typename T>
struct CocycleResult {
  double log_norm = 0.0;  ///< log of the spectral norm of M_n
  ScaledMatrix2<T> direction;
  long long steps = 0;
};

/// Values v(theta + j omega) for j = first, ..., first + count - 1.
inline std::vector<double> orbit_values(const TrigPotential& v, const Frequency& omega,
                                        const Phase& theta, long long first, long long count) {
  std::vector<double> out(static_cast<std::size_t>(std::max<long long>(count, 0)));
  for (long long i = 0; i < count; ++i) out[i] = v(omega.shift(theta, first + i));
  return out;
}

/// Product S(values[n-1]) ... S(values[0]), renormalized every step.
inline CocycleResult<double> cocycle_from_values(std::span<const double> values, double E) {
  CocycleResult<double> r;
  for (double value : values) r.direction.left_multiply(step_matrix(value, E));
  r.steps = static_cast<long long>(values.size());
  r.log_norm = r.direction.log_norm();
  return r;
}

/// M_n(omega, theta, E) = S(theta + n omega) ... S(theta + omega).
inline CocycleResult<double> cocycle(const Frequency& omega, const Phase& theta, double E, long long n,
                                     const TrigPotential& v) {
  if (n < 1) throw std::invalid_argument("cocycle: n must be >= 1");
  CocycleResult<double> r;
  for (long long j = 1; j <= n; ++j) r.direction.left_multiply(step_matrix(v(omega.shift(theta, j)), E));
  r.steps = n;
  r.log_norm = r.direction.log_norm();
  return r;
}

/// n^-1 log ||M_n(omega, theta, E)||.
inline double normalized_log_norm(const Frequency& omega, const Phase& theta, double E, long long n,
                                  const TrigPotential& v) {
  return cocycle(omega, theta, E, n, v).log_norm / static_cast<double>(n);
}

/// The cocycle on the complexified line theta = z + j omega, |Im z| < strip/10.
inline CocycleResult<std::complex<double>> cocycle_complex(const Frequency& omega, const ComplexPhase& z,
                                                           double E, long long n, const TrigPotential& v) {
  if (n < 1) throw std::invalid_argument("cocycle_complex: n must be >= 1");
  (void)eval_potential_complex(v, z);  // strip check
  CocycleResult<std::complex<double>> r;
  for (long long j = 1; j <= n; ++j) {
    ComplexPhase zj = z;
    for (int i = 0; i < omega.dim(); ++i)
      zj[i] = std::complex<double>(wrap(z[i].real() + wrap(double(j) * omega[i])), z[i].imag());
    const std::complex<double> a = v.extend(zj) - E;
    r.direction.left_multiply({a, 1.0, -1.0, 0.0});
  }
  r.steps = n;
  r.log_norm = r.direction.log_norm();
  return r;
}

/// det(A_m - E) for m = n, n-1, n-2 on a box (d_0 = 1, d_-1 = 0 seed).
struct DetTriple {
  LogScalar d_n;
  LogScalar d_n1;
  LogScalar d_n2;
};

/// All leading principal minors det(T_m) for m = 0..n of the tridiagonal
/// matrix with diagonal `diag` and unit off-diagonals. The pair
/// (d_m, d_{m-1}) is rescaled jointly by powers of two, preserving its ratio.
inline std::vector<LogScalar> determinant_sequence(std::span<const double> diag) {
  std::vector<LogScalar> out;
  out.reserve(diag.size() + 1);
  out.push_back(LogScalar::one());
  double cur = 1.0, prev = 0.0, log_scale = 0.0;
  const double ln2 = std::log(2.0);
  for (double a : diag) {
    const double next = a * cur - prev;
    prev = cur;
    cur = next;
    const double m = std::max(std::fabs(cur), std::fabs(prev));
    if (m != 0.0 && std::isfinite(m)) {
      int e = 0;
      std::frexp(m, &e);
      cur = std::ldexp(cur, 1 - e);
      prev = std::ldexp(prev, 1 - e);
      log_scale += (e - 1) * ln2;
    }
    out.push_back(LogScalar::from_double(cur) * LogScalar::from_log(1, log_scale));
  }
  return out;
}

/// Signed-log determinants of A_Lambda - E and its two leading truncations,
/// with A_Lambda the diagonal v(theta + j omega), j in Lambda.
inline DetTriple det_recurrence(const Interval& box, const Frequency& omega, const Phase& theta, double E,
                                const TrigPotential& v) {
  if (box.size() < 1) throw std::invalid_argument("det_recurrence: empty interval");
  std::vector<double> diag = orbit_values(v, omega, theta, box.first, box.size());
  for (double& a : diag) a -= E;
  const auto seq = determinant_sequence(diag);
  const std::size_t n = diag.size();
  return {seq[n], seq[n - 1], n >= 2 ? seq[n - 2] : LogScalar()};
}

/// Compares the four entries of M_n with the determinants they equal:
/// [[det A_n(theta), det A_{n-1}(theta+omega)], [-det A_{n-1}(theta), -det A_{n-2}(theta+omega)]].
/// Returns the largest relative discrepancy.
inline double verify_det_identity(long long n, const Frequency& omega, const Phase& theta, double E,
                                  const TrigPotential& v) {
  if (n < 3) throw std::invalid_argument("verify_det_identity: n must be >= 3");
  const auto m = cocycle(omega, theta, E, n, v).direction;
  const DetTriple left = det_recurrence({1, n}, omega, theta, E, v);
  const DetTriple shifted = det_recurrence({2, n}, omega, theta, E, v);
  const LogScalar expected[4] = {left.d_n, shifted.d_n, -left.d_n1, -shifted.d_n1};
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) worst = std::max(worst, relative_difference(m.entry(i), expected[i]));
  return worst;
}

/// log(1 + ||v||_strip + |E|): the per-step growth constant bounding log ||S||
/// and log ||S^-1||.
inline double log_growth_bound(const TrigPotential& v, double E) {
  return std::log(1.0 + strip_norm(v).bound + std::fabs(E));
}

struct GrowthEnvelope {
  std::vector<double> log_norms;  ///< log ||M_k(theta)|| for k = 1..n
  double constant = 0.0;          ///< C in |phi(theta + r omega) - phi(theta)| <= C |r| / n
  double max_excess = 0.0;        ///< max_r (|difference| - C |r| / n); <= 0 when the bound holds
  bool holds = true;
};

/// Tracks log ||M_k|| along the orbit and checks the shift bound
/// |n^-1 log||M_n(theta + r omega)|| - n^-1 log||M_n(theta)||| <= C |r| / n,
/// C = 2 log(1 + ||v|| + |E|), for every r in [r_lo, r_hi].
inline GrowthEnvelope growth_envelope(long long n, const Frequency& omega, const Phase& theta, double E,
                                      const TrigPotential& v, long long r_lo, long long r_hi) {
  if (n < 1) throw std::invalid_argument("growth_envelope: n must be >= 1");
  GrowthEnvelope g;
  ScaledMatrix2<double> m;
  for (long long j = 1; j <= n; ++j) {
    m.left_multiply(step_matrix(v(omega.shift(theta, j)), E));
    g.log_norms.push_back(m.log_norm());
  }
  g.constant = 2.0 * log_growth_bound(v, E);
  const double base = g.log_norms.back() / double(n);
  g.max_excess = -std::numeric_limits<double>::infinity();
  for (long long r = r_lo; r <= r_hi; ++r) {
    const double shifted = normalized_log_norm(omega, omega.shift(theta, r), E, n, v);
    const double excess = std::fabs(shifted - base) - g.constant * std::fabs(double(r)) / double(n);
    g.max_excess = std::max(g.max_excess, excess);
  }
  g.holds = g.max_excess <= 1e-12;
  return g;
}

}  // namespace qplab
