#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qplab/errors.hpp"
#include "qplab/greens.hpp"
#include "qplab/lyapunov.hpp"
#include "qplab/numerics.hpp"

namespace qplab {

/// Eigenpair of A_Lambda. The vector is kept twice: as plain numbers and as
/// (sign, log|xi_k|), which stays accurate far into the exponential tails.
struct EigenPair {
  double energy = 0.0;
  Interval box;
  std::vector<double> vector;
  std::vector<double> log_abs;
  std::vector<int> signs;

  long long size() const { return box.size(); }
  /// Site of the largest |xi_k|.
  long long center() const {
    return box.first + (std::max_element(log_abs.begin(), log_abs.end()) - log_abs.begin());
  }
  LogScalar entry(long long site) const {
    const auto i = static_cast<std::size_t>(site - box.first);
    return LogScalar::from_log(signs[i], log_abs[i]);
  }
};

namespace detail {

/// Number of eigenvalues of the tridiagonal matrix below x.
inline long long sturm_count(const std::vector<double>& a, double x) {
  long long count = 0;
  double p = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    p = (a[i] - x) - (i ? 1.0 / p : 0.0);
    if (p == 0.0) p = -std::numeric_limits<double>::epsilon() * (std::fabs(a[i]) + std::fabs(x) + 2.0);
    count += p < 0.0;
  }
  return count;
}

/// k-th smallest eigenvalue (0-based) by bisection inside [lo, hi].
inline double bisect_eigenvalue(const std::vector<double>& a, long long k, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(a, mid) > k)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

/// Forward and backward pivots of A - E and the twist values
/// gamma_k = p_k + q_k - (a_k - E) = 1 / G(k, k).
struct Twist {
  std::vector<double> p, q, gamma;
};

inline Twist twist_pivots(const std::vector<double>& diag, double E) {
  const std::size_t n = diag.size();
  Twist t;
  t.p.resize(n);
  t.q.resize(n);
  t.gamma.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = diag[i] - E;
    t.p[i] = guard_pivot(a - (i ? 1.0 / t.p[i - 1] : 0.0), a);
  }
  for (std::size_t i = n; i-- > 0;) {
    const double a = diag[i] - E;
    t.q[i] = guard_pivot(a - (i + 1 < n ? 1.0 / t.q[i + 1] : 0.0), a);
  }
  for (std::size_t k = 0; k < n; ++k) t.gamma[k] = std::fabs(t.p[k] + t.q[k] - (diag[k] - E));
  return t;
}

/// Normalized solution of (A - E) x = gamma_c e_c, built outward from the
/// twist site c in log form.
inline EigenPair twisted_vector(const Interval& box, const Twist& t, double E, std::size_t c) {
  const std::size_t n = t.p.size();
  EigenPair e;
  e.energy = E;
  e.box = box;
  e.log_abs.assign(n, 0.0);
  e.signs.assign(n, 1);
  for (std::size_t k = c; k-- > 0;) {
    e.log_abs[k] = e.log_abs[k + 1] - std::log(std::fabs(t.p[k]));
    e.signs[k] = -e.signs[k + 1] * (t.p[k] < 0 ? -1 : 1);
  }
  for (std::size_t k = c + 1; k < n; ++k) {
    e.log_abs[k] = e.log_abs[k - 1] - std::log(std::fabs(t.q[k]));
    e.signs[k] = -e.signs[k - 1] * (t.q[k] < 0 ? -1 : 1);
  }
  std::vector<double> twice(n);
  for (std::size_t k = 0; k < n; ++k) twice[k] = 2.0 * e.log_abs[k];
  const double log_norm = 0.5 * log_sum_exp(twice);
  e.vector.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    e.log_abs[k] -= log_norm;
    e.vector[k] = e.signs[k] * std::exp(e.log_abs[k]);
  }
  return e;
}

inline EigenPair twisted_vector(const Interval& box, const std::vector<double>& diag, double E) {
  const Twist t = twist_pivots(diag, E);
  const auto c = static_cast<std::size_t>(std::min_element(t.gamma.begin(), t.gamma.end()) - t.gamma.begin());
  return twisted_vector(box, t, E, c);
}

/// Cyclic Jacobi for a small symmetric matrix (row-major m x m). Returns the
/// eigenvalues; `vecs` receives the eigenvectors as columns.
inline std::vector<double> jacobi_eigen(std::vector<double> a, std::size_t m, std::vector<double>& vecs) {
  vecs.assign(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) vecs[i * m + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) off += a[i * m + j] * a[i * m + j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = p + 1; q < m; ++q) {
        const double apq = a[p * m + q];
        if (apq == 0.0) continue;
        const double tau = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
        for (std::size_t k = 0; k < m; ++k) {
          const double akp = a[k * m + p], akq = a[k * m + q];
          a[k * m + p] = c * akp - s * akq;
          a[k * m + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double apk = a[p * m + k], aqk = a[q * m + k];
          a[p * m + k] = c * apk - s * aqk;
          a[q * m + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double vkp = vecs[k * m + p], vkq = vecs[k * m + q];
          vecs[k * m + p] = c * vkp - s * vkq;
          vecs[k * m + q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = a[i * m + i];
  return out;
}

/// sum_j coef[j] * basis[j], evaluated per entry in log form so that tails
/// below the double range survive.
inline EigenPair combine(const std::vector<EigenPair>& basis, const std::vector<double>& coef) {
  EigenPair e;
  e.box = basis.front().box;
  const std::size_t n = basis.front().log_abs.size();
  e.log_abs.resize(n);
  e.signs.resize(n);
  e.vector.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < basis.size(); ++j)
      if (coef[j] != 0.0) top = std::max(top, std::log(std::fabs(coef[j])) + basis[j].log_abs[k]);
    double t = 0.0;
    for (std::size_t j = 0; j < basis.size(); ++j)
      if (coef[j] != 0.0)
        t += (coef[j] < 0.0 ? -1.0 : 1.0) * basis[j].signs[k] * std::exp(std::log(std::fabs(coef[j])) + basis[j].log_abs[k] - top);
    // complete cancellation: keep a value well below the dominant term
    e.log_abs[k] = t == 0.0 ? top - 40.0 : top + std::log(std::fabs(t));
    e.signs[k] = t < 0.0 ? -1 : 1;
    e.vector[k] = e.signs[k] * std::exp(e.log_abs[k]);
  }
  return e;
}

/// Orthonormal, position-localized basis for a group of numerically
/// unresolved eigenvalues. Candidates are twisted at sites in increasing
/// |gamma| and kept when they add a new direction.
inline std::vector<EigenPair> cluster_vectors(const Interval& box, const std::vector<double>& diag,
                                              std::span<const double> energies) {
  const std::size_t m = energies.size(), n = diag.size();
  double E = 0.0;
  for (double x : energies) E += x;
  E /= double(m);
  const Twist t = twist_pivots(diag, E);
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return t.gamma[i] < t.gamma[j]; });
  std::vector<EigenPair> raw;
  std::vector<std::vector<double>> ortho;
  for (std::size_t idx = 0; idx < n && raw.size() < m; ++idx) {
    EigenPair c = twisted_vector(box, t, E, order[idx]);
    std::vector<double> r = c.vector;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : ortho) {
        double d = 0.0;
        for (std::size_t k = 0; k < n; ++k) d += u[k] * r[k];
        for (std::size_t k = 0; k < n; ++k) r[k] -= d * u[k];
      }
    double norm = 0.0;
    for (double x : r) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 0.1) continue;
    for (double& x : r) x /= norm;
    raw.push_back(std::move(c));
    ortho.push_back(std::move(r));
  }
  const std::size_t r = raw.size();
  // Gram matrix of the accepted candidates; U = V L^-T is orthonormal.
  std::vector<double> g(r * r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < n; ++k) d += raw[i].vector[k] * raw[j].vector[k];
      g[i * r + j] = g[j * r + i] = d;
    }
  std::vector<double> l(r * r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = g[i * r + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * r + k] * l[j * r + k];
      l[i * r + j] = i == j ? std::sqrt(std::max(s, 1e-300)) : s / l[j * r + j];
    }
  // inverse transpose of L: columns of C = L^-T
  std::vector<double> cmat(r * r, 0.0);
  for (std::size_t col = 0; col < r; ++col) {
    std::vector<double> y(r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      double s = i == col ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= l[i * r + k] * y[k];
      y[i] = s / l[i * r + i];
    }
    for (std::size_t i = 0; i < r; ++i) cmat[i * r + col] = y[i];  // row col of L^-1 -> column of L^-T
  }
  std::vector<double> linv = cmat;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) cmat[i * r + j] = linv[j * r + i];
  // position operator in the orthonormal basis, then rotate to its eigenbasis
  std::vector<std::vector<double>> u(r, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t k = 0; k < n; ++k) u[j][k] += cmat[i * r + j] * raw[i].vector[k];
  std::vector<double> x(r * r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < n; ++k) d += double(k) * u[i][k] * u[j][k];
      x[i * r + j] = x[j * r + i] = d;
    }
  std::vector<double> rot;
  const auto pos = jacobi_eigen(x, r, rot);
  std::vector<std::size_t> by_pos(r);
  for (std::size_t i = 0; i < r; ++i) by_pos[i] = i;
  std::sort(by_pos.begin(), by_pos.end(), [&](std::size_t i, std::size_t j) { return pos[i] < pos[j]; });
  std::vector<EigenPair> out;
  for (std::size_t q = 0; q < m; ++q) {
    if (q >= r) {
      out.push_back(twisted_vector(box, diag, energies[q]));
      continue;
    }
    const std::size_t col = by_pos[q];
    std::vector<double> coef(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) coef[i] += cmat[i * r + j] * rot[j * r + col];
    EigenPair e = combine(raw, coef);
    e.energy = energies[q];
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace detail

/// Full eigendecomposition of A_Lambda(omega, theta), energies ascending.
/// Eigenvalues that bisection cannot separate (reflection-symmetric pairs,
/// for instance) get an orthonormal, position-localized basis of their span.
inline std::vector<EigenPair> eigensystem(const FiniteOperator& op, unsigned threads = 0) {
  const auto& a = op.diagonal;
  const long long n = op.size();
  const double lo = *std::min_element(a.begin(), a.end()) - 2.0 - 1e-9;
  const double hi = *std::max_element(a.begin(), a.end()) + 2.0 + 1e-9;
  const auto energies = parallel_map(static_cast<std::size_t>(n), resolve_threads(threads), [&](std::size_t k) {
    return detail::bisect_eigenvalue(a, static_cast<long long>(k), lo, hi);
  });
  double scale = 2.0;
  for (double x : a) scale = std::max(scale, std::fabs(x) + 2.0);
  const double unresolved = 1e-10 * scale;
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t begin = 0; begin < energies.size();) {
    std::size_t end = begin + 1;
    while (end < energies.size() && energies[end] - energies[end - 1] <= unresolved) ++end;
    groups.emplace_back(begin, end);
    begin = end;
  }
  const auto blocks = parallel_map(groups.size(), resolve_threads(threads), [&](std::size_t g) {
    const auto [b, e] = groups[g];
    if (e - b == 1) return std::vector<EigenPair>{detail::twisted_vector(op.interval, a, energies[b])};
    return detail::cluster_vectors(op.interval, a, std::span<const double>(energies).subspan(b, e - b));
  });
  std::vector<EigenPair> out;
  out.reserve(static_cast<std::size_t>(n));
  for (const auto& blk : blocks)
    for (const auto& e : blk) out.push_back(e);
  return out;
}

inline std::vector<EigenPair> eigensystem(const Interval& box, const Frequency& omega, const Phase& theta,
                                          const TrigPotential& v, unsigned threads = 0) {
  return eigensystem(build_operator(box, omega, theta, v), threads);
}

/// ||(A_Lambda - E) xi||_2.
inline double eigen_residual(const FiniteOperator& op, const EigenPair& e) {
  const std::size_t n = e.vector.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = (op.diagonal[i] - e.energy) * e.vector[i];
    if (i) r += e.vector[i - 1];
    if (i + 1 < n) r += e.vector[i + 1];
    s += r * r;
  }
  return std::sqrt(s);
}

struct DecayProfile {
  long long center = 0;
  double rate = 0.0;  ///< fitted exponential decay rate, clamped at 0
  double r2 = 0.0;
  double tail_mass = 0.0;  ///< l2 mass outside radius `tail_radius` of the center
  std::size_t points = 0;
};

/// Least-squares fit of log|xi_k| against |k - center| over sites with
/// |xi_k| > floor outside a core of radius `core`.
inline DecayProfile decay_profile(const EigenPair& e, long long core = 5, double floor = 1e-14,
                                  long long tail_radius = 20) {
  DecayProfile d;
  d.center = e.center();
  const double log_floor = std::log(floor);
  std::vector<double> x, y, tail;
  for (long long k = e.box.first; k <= e.box.last; ++k) {
    const double la = e.log_abs[static_cast<std::size_t>(k - e.box.first)];
    const long long dist = std::llabs(k - d.center);
    if (dist > tail_radius) tail.push_back(2.0 * la);
    if (dist <= core || la <= log_floor) continue;
    x.push_back(double(dist));
    y.push_back(la);
  }
  d.tail_mass = tail.empty() ? 0.0 : std::exp(log_sum_exp(tail));
  const LinearFit f = fit_line(x, y);
  d.points = f.points;
  d.rate = std::max(0.0, -f.slope);
  d.r2 = f.r2;
  return d;
}

struct LocalizationSummary {
  Interval box;
  double lambda = 0.0;
  double pct_localized = 0.0;  ///< percent with rate >= min_rate and r2 >= min_r2
  double median_rate = 0.0;
};

inline LocalizationSummary summarize_localization(const std::vector<EigenPair>& pairs, double lambda,
                                                  double min_rate, double min_r2) {
  LocalizationSummary s;
  s.lambda = lambda;
  if (pairs.empty()) return s;
  s.box = pairs.front().box;
  std::vector<double> rates;
  std::size_t good = 0;
  for (const auto& p : pairs) {
    const DecayProfile d = decay_profile(p);
    rates.push_back(d.rate);
    good += d.rate >= min_rate && d.r2 >= min_r2;
  }
  std::sort(rates.begin(), rates.end());
  const std::size_t m = rates.size();
  s.median_rate = m % 2 ? rates[m / 2] : 0.5 * (rates[m / 2 - 1] + rates[m / 2]);
  s.pct_localized = 100.0 * double(good) / double(m);
  return s;
}

/// Rows (index, |xi|, log|xi|).
inline std::string profile_csv(const EigenPair& e) {
  std::ostringstream os;
  os.precision(17);
  os << "index,abs_xi,log_abs_xi\n";
  for (long long k = e.box.first; k <= e.box.last; ++k) {
    const auto i = static_cast<std::size_t>(k - e.box.first);
    os << k << ',' << std::fabs(e.vector[i]) << ',' << e.log_abs[i] << '\n';
  }
  return os.str();
}

struct ResonanceScan {
  std::optional<long long> n0;  ///< first n0 with ||G_[-n0,n0]||_HS > C^n
  double log_threshold = 0.0;   ///< n log C
  std::vector<double> log_hs;   ///< log ||G||_HS for n0 = 1, 2, ... (inf when singular)
  bool singular = false;        ///< the crossing came from a singular energy
};

/// log ||G||_HS from the signed-log entries.
inline double log_hilbert_schmidt(const GreenMatrix& g) {
  std::vector<double> twice;
  twice.reserve(g.entries.size());
  for (const auto& e : g.entries)
    if (!e.is_zero()) twice.push_back(2.0 * e.log_mag());
  return 0.5 * log_sum_exp(twice);
}

/// Scans n0 = 1..n0_max for the first box [-n0, n0] whose Green's function
/// has Hilbert-Schmidt norm above C^n. A singular energy counts as a crossing.
inline ResonanceScan resonance_scan(const Frequency& omega, double E, long long n0_max, double C, long long n,
                                    const TrigPotential& v, const Phase& theta = {0.0, 0.0}) {
  if (n0_max < 1) throw std::invalid_argument("resonance_scan: n0_max must be >= 1");
  if (!(C > 1.0)) throw std::invalid_argument("resonance_scan: threshold base must exceed 1");
  ResonanceScan s;
  s.log_threshold = double(n) * std::log(C);
  for (long long n0 = 1; n0 <= n0_max; ++n0) {
    double lhs = std::numeric_limits<double>::infinity();
    bool singular = false;
    try {
      lhs = log_hilbert_schmidt(green_solve({-n0, n0}, omega, theta, E, v));
    } catch (const SingularEnergy&) {
      singular = true;
    }
    s.log_hs.push_back(lhs);
    if (singular || lhs > s.log_threshold) {
      s.n0 = n0;
      s.singular = singular;
      break;
    }
  }
  return s;
}

struct WindowBound {
  Interval window;
  bool holds = true;           ///< two-term bound plus the residual term, on every window site
  bool two_term_holds = true;  ///< |xi_k| <= |G(k,a)||xi_{a-1}| + |G(k,b)||xi_{b+1}| without the residual term
  double worst_ratio = 0.0;    ///< max_k log|xi_k| - log(two-term + residual term)
  double two_term_ratio = 0.0; ///< max_k log|xi_k| - log(two-term side)
  double residual_share = 0.0; ///< largest fraction of the right side due to the residual term
  long long site = 0;          ///< the site N steps from the anchor
  double log_xi = 0.0;         ///< log|xi| at that site
  double log_bound = 0.0;      ///< -(delta/3) N
  bool decay_holds = true;
};

/// Converts Green decay on the window [N/2, 2N] (relative to `anchor`, on the
/// side given by `side` = +1 or -1) into a bound on the eigenvector. On the
/// window xi = G (-boundary terms + r) with r = (A - E) xi, so every site must
/// satisfy |xi_k| <= |G(k,a)||xi_{a-1}| + |G(k,b)||xi_{b+1}| + sum_m |G(k,m)||r_m|.
/// r is evaluated in log form and widened by `entry_precision` times the size
/// of its terms. Also checks |xi_N| <= exp(-(delta/3) N).
inline WindowBound window_bound_check(const EigenPair& xi, long long N, const Frequency& omega, const Phase& theta,
                                      double E, double delta, const TrigPotential& v, long long anchor = 0,
                                      int side = 1, double entry_precision = 1e-12) {
  if (N < 2) throw std::invalid_argument("window_bound_check: N must be >= 2");
  WindowBound w;
  const long long near = N / 2, far = 2 * N;
  w.window = side > 0 ? Interval{anchor + near, anchor + far} : Interval{anchor - far, anchor - near};
  if (!xi.box.contains(Interval{w.window.first - 1, w.window.last + 1}))
    throw std::invalid_argument("window_bound_check: eigenvector box must contain the window and its neighbours");
  const FiniteOperator op = build_operator(w.window, omega, theta, v);
  const GreenMatrix g = green_solve(op, E);
  const auto m = static_cast<std::size_t>(op.size());
  std::vector<LogScalar> r(m);
  for (std::size_t i = 0; i < m; ++i) {
    const long long k = w.window.first + static_cast<long long>(i);
    const LogScalar mid = LogScalar::from_double(op.diagonal[i] - E) * xi.entry(k);
    const LogScalar left = xi.entry(k - 1), right = xi.entry(k + 1);
    const LogScalar size = mid.abs() + left.abs() + right.abs();
    r[i] = (mid + left + right).abs() + LogScalar::from_double(entry_precision) * size;
  }
  const LogScalar outer_left = xi.entry(w.window.first - 1).abs();
  const LogScalar outer_right = xi.entry(w.window.last + 1).abs();
  w.worst_ratio = w.two_term_ratio = -std::numeric_limits<double>::infinity();
  for (long long k = w.window.first; k <= w.window.last; ++k) {
    const LogScalar two = g(k, w.window.first).abs() * outer_left + g(k, w.window.last).abs() * outer_right;
    LogScalar res;
    for (std::size_t i = 0; i < m; ++i) res += g(k, w.window.first + static_cast<long long>(i)).abs() * r[i];
    const LogScalar lhs = xi.entry(k).abs();
    if (lhs.is_zero()) continue;
    const LogScalar total = two + res;
    const auto log_ratio = [&](LogScalar rhs) {
      return rhs.is_zero() ? std::numeric_limits<double>::infinity() : lhs.log_mag() - rhs.log_mag();
    };
    w.worst_ratio = std::max(w.worst_ratio, log_ratio(total));
    w.two_term_ratio = std::max(w.two_term_ratio, log_ratio(two));
    if (!total.is_zero()) w.residual_share = std::max(w.residual_share, (res / total).to_double());
  }
  // ratios of exactly representable equality can land a few ulps above zero
  w.holds = w.worst_ratio <= 1e-12;
  w.two_term_holds = w.two_term_ratio <= std::log1p(1e-8);
  w.site = anchor + side * N;
  w.log_xi = xi.log_abs[static_cast<std::size_t>(w.site - xi.box.first)];
  w.log_bound = -(delta / 3.0) * double(N);
  w.decay_holds = w.log_xi <= w.log_bound;
  return w;
}

struct GrowthPair {
  std::optional<long long> j;
  double L_n = 0.0;
  double average_sum = 0.0;  ///< (1/J) sum_j of both normalized log-norms
};

/// First j in (J, 2J] where both n1^-1 log||M_n1(j omega)|| and
/// n1^-1 log||M_n1((-j - n1) omega)|| are strictly within `tolerance` of L_n1.
inline GrowthPair growth_pair_search(const Frequency& omega, double E, long long n1, long long J,
                                     const TrigPotential& v, double tolerance = 0.1,
                                     std::optional<double> L_reference = std::nullopt) {
  if (J < 1) throw std::invalid_argument("growth_pair_search: J must be >= 1");
  GrowthPair g;
  g.L_n = L_reference ? *L_reference : lyapunov_n(omega, E, n1, v).value;
  const Phase origin{0.0, 0.0};
  std::vector<double> sums;
  for (long long j = J + 1; j <= 2 * J; ++j) {
    const double plus = normalized_log_norm(omega, omega.shift(origin, j), E, n1, v);
    const double minus = normalized_log_norm(omega, omega.shift(origin, -j - n1), E, n1, v);
    sums.push_back(plus + minus);
    if (!g.j && std::fabs(plus - g.L_n) < tolerance && std::fabs(minus - g.L_n) < tolerance) g.j = j;
  }
  g.average_sum = pairwise_sum(sums) / double(sums.size());
  return g;
}

}  // namespace qplab
