#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qplab/errors.hpp"
#include "qplab/log_scalar.hpp"
#include "qplab/model.hpp"
#include "qplab/numerics.hpp"
#include "qplab/transfer.hpp"

namespace qplab {

/// Default det log-magnitude below which an energy is treated as singular.
inline constexpr double kSingularFloor = -700.0;

/// A_Lambda: diagonal v(theta + j omega), j in the interval, unit off-diagonals.
struct FiniteOperator {
  Interval interval;
  std::vector<double> diagonal;

  long long size() const { return interval.size(); }
  double diag(long long j) const { return diagonal[static_cast<std::size_t>(j - interval.first)]; }
};

inline FiniteOperator build_operator(const Interval& box, const Frequency& omega, const Phase& theta,
                                     const TrigPotential& v) {
  if (box.size() < 1) throw std::invalid_argument("build_operator: empty interval");
  return {box, orbit_values(v, omega, theta, box.first, box.size())};
}

/// Dense Green's function in signed-log form, indexed by absolute sites.
struct GreenMatrix {
  Interval interval;
  double E = 0.0;
  std::vector<LogScalar> entries;  ///< row-major |Lambda| x |Lambda|

  GreenMatrix() = default;
  GreenMatrix(const Interval& box, double energy)
      : interval(box), E(energy), entries(static_cast<std::size_t>(box.size() * box.size())) {}

  long long size() const { return interval.size(); }
  LogScalar& local(long long i, long long j) { return entries[static_cast<std::size_t>(i * size() + j)]; }
  const LogScalar& local(long long i, long long j) const {
    return entries[static_cast<std::size_t>(i * size() + j)];
  }
  const LogScalar& operator()(long long n1, long long n2) const {
    return local(n1 - interval.first, n2 - interval.first);
  }
};

namespace detail {

inline void check_singular(const LogScalar& det, double floor) {
  if (det.is_zero() || det.log_mag() < floor) {
    std::ostringstream os;
    os << "det(A - E) has log-magnitude " << det.log_mag() << " below the floor " << floor;
    throw SingularEnergy(os.str());
  }
}

inline LogScalar checkerboard(long long i, long long j) { return LogScalar::from_double((i + j) % 2 ? -1.0 : 1.0); }

}  // namespace detail

/// G(n1, n2) = (-1)^{n1+n2} det[A_{n1-1} - E] det[A_{|Lambda|-n2}(theta + n2 omega) - E] / det[A_Lambda - E]
/// for n1 <= n2 (local indices), by Cramer's rule; symmetric otherwise.
inline LogScalar green_cramer(const Interval& box, const Frequency& omega, const Phase& theta, double E,
                              const TrigPotential& v, long long n1, long long n2, double floor = kSingularFloor) {
  if (!box.contains(n1) || !box.contains(n2)) throw std::invalid_argument("green_cramer: site outside the box");
  if (n1 > n2) std::swap(n1, n2);
  const LogScalar det = det_recurrence(box, omega, theta, E, v).d_n;
  detail::check_singular(det, floor);
  const LogScalar left = n1 > box.first ? det_recurrence({box.first, n1 - 1}, omega, theta, E, v).d_n : LogScalar::one();
  const LogScalar right = n2 < box.last ? det_recurrence({n2 + 1, box.last}, omega, theta, E, v).d_n : LogScalar::one();
  return detail::checkerboard(n1 - box.first, n2 - box.first) * left * right / det;
}

/// All entries by Cramer's rule from prefix and suffix determinant sequences.
inline GreenMatrix green_cramer_matrix(const FiniteOperator& op, double E, double floor = kSingularFloor) {
  const long long n = op.size();
  std::vector<double> diag(op.diagonal), rev(op.diagonal.rbegin(), op.diagonal.rend());
  for (double& a : diag) a -= E;
  for (double& a : rev) a -= E;
  const auto left = determinant_sequence(diag);   // left[m]: first m sites
  const auto right = determinant_sequence(rev);   // right[m]: last m sites
  detail::check_singular(left[n], floor);
  GreenMatrix g(op.interval, E);
  for (long long i = 0; i < n; ++i)
    for (long long j = i; j < n; ++j) {
      const LogScalar x = detail::checkerboard(i, j) * left[i] * right[n - 1 - j] / left[n];
      g.local(i, j) = x;
      g.local(j, i) = x;
    }
  return g;
}

namespace detail {

/// Pivot with the zero-pivot safeguard.
inline double guard_pivot(double p, double a) {
  if (p != 0.0) return p;
  return std::numeric_limits<double>::epsilon() * (std::fabs(a) + 2.0);
}

}  // namespace detail

/// (A_Lambda - E)^{-1} from the forward and backward pivot sequences of the
/// tridiagonal factorization, entirely in signed-log form:
/// G(i,i) = 1 / (p_i + q_i - a_i), G(i,j) = G(i+1,j) (-1/p_i) for i < j.
inline GreenMatrix green_solve(const FiniteOperator& op, double E, double floor = kSingularFloor) {
  const long long n = op.size();
  std::vector<double> a(op.diagonal);
  for (double& x : a) x -= E;
  {
    const auto dets = determinant_sequence(a);
    detail::check_singular(dets[n], floor);
  }
  std::vector<double> p(n), q(n);
  p[0] = detail::guard_pivot(a[0], a[0]);
  for (long long i = 1; i < n; ++i) p[i] = detail::guard_pivot(a[i] - 1.0 / p[i - 1], a[i]);
  q[n - 1] = detail::guard_pivot(a[n - 1], a[n - 1]);
  for (long long i = n - 2; i >= 0; --i) q[i] = detail::guard_pivot(a[i] - 1.0 / q[i + 1], a[i]);
  GreenMatrix g(op.interval, E);
  std::vector<LogScalar> left_ratio(n), right_ratio(n);
  for (long long i = 0; i < n; ++i) {
    left_ratio[i] = LogScalar::from_double(-1.0 / p[i]);
    right_ratio[i] = LogScalar::from_double(-1.0 / q[i]);
  }
  for (long long j = 0; j < n; ++j) {
    const double left = j > 0 ? 1.0 / p[j - 1] : 0.0;
    const double right = j + 1 < n ? 1.0 / q[j + 1] : 0.0;
    const double gamma = a[j] - left - right;
    if (gamma == 0.0) throw SingularEnergy("zero pivot in the twisted factorization");
    g.local(j, j) = LogScalar::from_double(1.0 / gamma);
    for (long long i = j - 1; i >= 0; --i) g.local(i, j) = g.local(i + 1, j) * left_ratio[i];
    for (long long i = j + 1; i < n; ++i) g.local(i, j) = g.local(i - 1, j) * right_ratio[i];
  }
  return g;
}

inline GreenMatrix green_solve(const Interval& box, const Frequency& omega, const Phase& theta, double E,
                               const TrigPotential& v, double floor = kSingularFloor) {
  return green_solve(build_operator(box, omega, theta, v), E, floor);
}

struct DecayFit {
  double rate = 0.0;       ///< slope of -log|G| against |n1 - n2|
  double intercept = 0.0;
  double residual = 0.0;   ///< rms residual of the fit
  std::size_t points = 0;
};

/// Least-squares fit of -log|G(n1,n2)| against |n1 - n2| over pairs with
/// separation >= min_sep.
inline DecayFit decay_fit(const GreenMatrix& g, long long min_sep) {
  if (min_sep < 1 || g.size() < 4 * min_sep) throw std::invalid_argument("decay_fit: need |Lambda| >= 4 min_sep");
  std::vector<double> x, y;
  for (long long i = 0; i < g.size(); ++i)
    for (long long j = i + min_sep; j < g.size(); ++j) {
      const LogScalar& e = g.local(i, j);
      if (e.is_zero()) continue;
      x.push_back(double(j - i));
      y.push_back(-e.log_mag());
    }
  const LinearFit f = fit_line(x, y);
  return {f.slope, f.intercept, f.rms, f.points};
}

/// max over pairs of log|G(n1,n2)| + c |n1 - n2|.
inline double decay_excess(const GreenMatrix& g, double c) {
  double worst = -std::numeric_limits<double>::infinity();
  for (long long i = 0; i < g.size(); ++i)
    for (long long j = 0; j < g.size(); ++j) {
      const LogScalar& e = g.local(i, j);
      if (e.is_zero()) continue;
      worst = std::max(worst, e.log_mag() + c * double(std::llabs(i - j)));
    }
  return worst;
}

/// Selects a window for site x of the big interval I, or nothing.
using WindowOracle = std::function<std::optional<Interval>(long long x)>;

struct PaveOptions {
  double beta = 0.1;            ///< o(n) budget beta n in the window and certificate bounds
  long long min_sep = 0;        ///< decay fit separation; 0 means n
  int max_iterations = 100000;
  bool multiscale = false;      ///< report the sup bound and refinement rate
  double scale_ratio = 0.0;     ///< rho in 2 exp(7 rho n log(1 + ||v||))
  double gamma = 0.0;           ///< window rate used by the contraction e^{-gamma n / 4}
  long long n0 = 0;             ///< base scale of the refinement rate gamma (1 - 300 / n0)
  unsigned threads = 0;
};

struct PaveCertificate {
  double window_rate = 0.0;      ///< c supplied
  double rate = 0.0;             ///< fitted rate of the assembled G_I
  double intercept = 0.0;
  double max_excess = 0.0;       ///< max log|G_I| + (c/2)|n1 - n2|: the measured o(n) term
  bool certified = false;        ///< rate >= c / 2
  double contraction = 0.0;      ///< max_x sum_k |G_W(x)(x, k)| over boundary sites k
  int iterations = 0;
  std::vector<Interval> windows_used;
  std::vector<long long> failures;
  std::optional<double> log_sup_bound;    ///< log 2 + 7 rho n log(1 + ||v||)
  std::optional<bool> sup_bound_holds;
  std::optional<double> refinement_rate;  ///< gamma (1 - 300 / n0)
  std::optional<double> formula_contraction;
};

struct PaveResult {
  GreenMatrix green;
  PaveCertificate certificate;
};

/// Window admissibility: |G_W(n1,n2)| < exp(-c|n1 - n2| + beta n) on every pair.
inline bool window_admissible(const GreenMatrix& g, double c, double budget) { return decay_excess(g, c) <= budget; }

/// The four endpoint variants [s,e], [s+1,e], [s,e-1], [s+1,e-1] of a window,
/// clipped to I.
inline std::vector<Interval> window_variants(const Interval& w, const Interval& I) {
  std::vector<Interval> out;
  for (int ds : {0, 1})
    for (int de : {0, 1}) {
      Interval c{std::max(w.first + ds, I.first), std::min(w.last - de, I.last)};
      if (c.size() >= 1 && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
  return out;
}

namespace detail {

/// Distance from x to the part of the window boundary that is interior to I.
inline long long interior_depth(const Interval& w, const Interval& I, long long x) {
  long long d = std::numeric_limits<long long>::max();
  if (w.first > I.first) d = std::min(d, x - w.first);
  if (w.last < I.last) d = std::min(d, w.last - x);
  return d;
}

}  // namespace detail

/// Assembles G_I from window Green's functions with the resolvent identity
/// G_I(x, y) = G_W(x, y) chi_W(y) - sum_{k in W, k' notin W, |k - k'| = 1} G_W(x, k) G_I(k', y),
/// iterated to convergence. Without an oracle, windows of size n start on a
/// lattice of step n/5, each tried in its four endpoint variants; site x uses
/// the admissible window in which it is deepest, and needs depth >= n/10.
inline PaveResult pave(const Interval& I, long long n, const Frequency& omega, const Phase& theta, double E,
                       const TrigPotential& v, double c, const WindowOracle& oracle = {},
                       const PaveOptions& opt = {}) {
  if (n < 1) throw std::invalid_argument("pave: window size must be >= 1");
  const long long N = I.size();
  const double budget = opt.beta * double(n);
  const unsigned threads = opt.threads == 0 ? default_threads() : opt.threads;
  PaveResult res;
  PaveCertificate& cert = res.certificate;
  cert.window_rate = c;

  // Candidate windows.
  std::vector<Interval> candidates;
  if (N <= n) {
    candidates.push_back(I);
  } else if (!oracle) {
    const long long step = std::max<long long>(1, n / 5);
    for (long long s = I.first;; s += step) {
      const long long start = std::min(s, I.last - n + 1);
      candidates.push_back({start, start + n - 1});
      if (start + n - 1 >= I.last) break;
    }
  }
  std::vector<std::vector<Interval>> variants;
  for (const auto& w : candidates) variants.push_back(N <= n ? std::vector<Interval>{w} : window_variants(w, I));

  struct Chosen {
    bool ok = false;
    Interval box;
    GreenMatrix green;
  };
  auto solve_window = [&](const std::vector<Interval>& family) {
    Chosen out;
    for (const auto& w : family) {
      try {
        GreenMatrix g = green_solve(w, omega, theta, E, v);
        if (N <= n || window_admissible(g, c, budget)) {
          out = {true, w, std::move(g)};
          return out;
        }
      } catch (const SingularEnergy&) {
      }
    }
    return out;
  };
  std::vector<Chosen> windows = parallel_map(variants.size(), threads, [&](std::size_t i) { return solve_window(variants[i]); });

  // Assign a window to every site.
  const long long need = N <= n ? 0 : std::max<long long>(1, (n + 9) / 10);
  std::vector<int> owner(static_cast<std::size_t>(N), -1);
  if (oracle) {
    for (long long x = I.first; x <= I.last; ++x) {
      const auto w = oracle(x);
      if (!w) continue;
      if (!I.contains(*w) || !w->contains(x)) throw std::invalid_argument("pave: oracle window must lie in I and contain x");
      auto it = std::find_if(windows.begin(), windows.end(), [&](const Chosen& ch) { return ch.box == *w; });
      if (it == windows.end()) {
        Chosen ch = solve_window({*w});
        if (!ch.ok) continue;
        windows.push_back(std::move(ch));
        it = windows.end() - 1;
      }
      if (detail::interior_depth(it->box, I, x) < need - 1) continue;
      owner[static_cast<std::size_t>(x - I.first)] = static_cast<int>(it - windows.begin());
    }
  } else {
    for (long long x = I.first; x <= I.last; ++x) {
      long long best = -1;
      for (std::size_t k = 0; k < windows.size(); ++k) {
        if (!windows[k].ok || !windows[k].box.contains(x)) continue;
        const long long depth = detail::interior_depth(windows[k].box, I, x);
        if (depth >= need - 1 && depth > best) {
          best = depth;
          owner[static_cast<std::size_t>(x - I.first)] = static_cast<int>(k);
        }
      }
    }
  }
  for (long long x = I.first; x <= I.last; ++x)
    if (owner[static_cast<std::size_t>(x - I.first)] < 0) cert.failures.push_back(x);
  if (!cert.failures.empty()) {
    std::ostringstream os;
    os << cert.failures.size() << " site(s) have no admissible window:";
    for (std::size_t i = 0; i < std::min<std::size_t>(cert.failures.size(), 20); ++i) os << ' ' << cert.failures[i];
    if (cert.failures.size() > 20) os << " ...";
    throw PavingFailed(os.str());
  }
  std::vector<bool> used(windows.size(), false);
  for (int k : owner) used[static_cast<std::size_t>(k)] = true;
  for (std::size_t k = 0; k < windows.size(); ++k)
    if (used[k]) cert.windows_used.push_back(windows[k].box);

  // Boundary couplings of each window: (k inside, k' outside).
  auto couplings = [&](const Interval& w) {
    std::vector<std::pair<long long, long long>> out;
    if (w.first > I.first) out.push_back({w.first, w.first - 1});
    if (w.last < I.last) out.push_back({w.last, w.last + 1});
    return out;
  };
  auto window_at = [&](long long x) -> const Chosen& { return windows[static_cast<std::size_t>(owner[static_cast<std::size_t>(x - I.first)])]; };

  // Contraction factor.
  for (long long x = I.first; x <= I.last; ++x) {
    const Chosen& w = window_at(x);
    LogScalar sum;
    for (auto [k, kp] : couplings(w.box)) sum += w.green(x, k).abs();
    cert.contraction = std::max(cert.contraction, sum.to_double());
  }
  if (opt.multiscale) {
    cert.formula_contraction = std::exp(-opt.gamma * double(n) / 4.0);
    if (*cert.formula_contraction >= 0.5)
      throw IterationDiverged("contraction factor exp(-gamma n / 4) >= 1/2");
  }
  if (cert.contraction >= 0.5) {
    std::ostringstream os;
    os << "measured contraction factor " << cert.contraction << " >= 1/2";
    throw IterationDiverged(os.str());
  }

  // The iteration only couples the outside neighbours k' of the windows.
  std::vector<long long> hubs;
  for (long long x = I.first; x <= I.last; ++x)
    for (auto [k, kp] : couplings(window_at(x).box)) hubs.push_back(kp);
  std::sort(hubs.begin(), hubs.end());
  hubs.erase(std::unique(hubs.begin(), hubs.end()), hubs.end());
  std::vector<int> hub_index(static_cast<std::size_t>(N), -1);
  for (std::size_t h = 0; h < hubs.size(); ++h) hub_index[static_cast<std::size_t>(hubs[h] - I.first)] = static_cast<int>(h);

  auto apply = [&](long long x, long long y, const std::vector<LogScalar>& hub_values) {
    const Chosen& w = window_at(x);
    LogScalar val = w.box.contains(y) ? w.green(x, y) : LogScalar();
    for (auto [k, kp] : couplings(w.box))
      val -= w.green(x, k) * hub_values[static_cast<std::size_t>(hub_index[static_cast<std::size_t>(kp - I.first)])];
    return val;
  };

  struct Column {
    std::vector<LogScalar> values;
    int iterations = 0;
    bool converged = true;
  };
  auto solve_column = [&](std::size_t yi) {
    const long long y = I.first + static_cast<long long>(yi);
    Column col;
    std::vector<LogScalar> hv(hubs.size()), next(hubs.size());
    if (!hubs.empty()) {
      col.converged = false;
      for (int it = 1; it <= opt.max_iterations; ++it) {
        double change = 0.0;
        for (std::size_t h = 0; h < hubs.size(); ++h) {
          next[h] = apply(hubs[h], y, hv);
          change = std::max(change, relative_difference(next[h], hv[h]));
        }
        hv.swap(next);
        col.iterations = it;
        if (change <= 1e-15) {
          col.converged = true;
          break;
        }
      }
    }
    col.values.resize(static_cast<std::size_t>(N));
    for (long long x = I.first; x <= I.last; ++x) col.values[static_cast<std::size_t>(x - I.first)] = apply(x, y, hv);
    return col;
  };
  const auto columns = parallel_map(static_cast<std::size_t>(N), threads, solve_column);
  res.green = GreenMatrix(I, E);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (!columns[j].converged) throw IterationDiverged("resolvent iteration did not converge");
    cert.iterations = std::max(cert.iterations, columns[j].iterations);
    for (std::size_t i = 0; i < columns[j].values.size(); ++i)
      res.green.local(static_cast<long long>(i), static_cast<long long>(j)) = columns[j].values[i];
  }

  const long long sep = opt.min_sep > 0 ? opt.min_sep : n;
  if (N >= 4 * sep) {
    const DecayFit fit = decay_fit(res.green, sep);
    cert.rate = fit.rate;
    cert.intercept = fit.intercept;
  }
  cert.max_excess = decay_excess(res.green, c / 2.0);
  cert.certified = N >= 4 * sep && cert.rate >= c / 2.0;
  if (opt.multiscale) {
    cert.log_sup_bound = std::log(2.0) + 7.0 * opt.scale_ratio * double(n) * std::log1p(strip_norm(v).bound);
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& e : res.green.entries)
      if (!e.is_zero()) top = std::max(top, e.log_mag());
    cert.sup_bound_holds = top < *cert.log_sup_bound;
    if (opt.n0 > 0) cert.refinement_rate = opt.gamma * (1.0 - 300.0 / double(opt.n0));
  }
  return res;
}

struct WindowForm {
  bool holds = true;
  double margin = 0.0;  ///< min over pairs of (-delta|n1 - n2| + n) - log|G(n1,n2)|
};

/// Checks |G_I(n1,n2)| < exp(-delta|n1 - n2| + n) on every pair.
inline WindowForm window_form_check(const GreenMatrix& g, double delta, long long n) {
  WindowForm w;
  w.margin = double(n) - decay_excess(g, delta);
  w.holds = w.margin > 0.0;
  return w;
}

/// Rows (n1, n2, sign, log_mag) for export.
inline std::string green_csv(const GreenMatrix& g) {
  std::ostringstream os;
  os.precision(17);
  os << "n1,n2,sign,log_mag\n";
  for (long long i = 0; i < g.size(); ++i)
    for (long long j = 0; j < g.size(); ++j) {
      const LogScalar& e = g.local(i, j);
      os << g.interval.first + i << ',' << g.interval.first + j << ',' << e.sign() << ',' << e.log_mag() << '\n';
    }
  return os.str();
}

}  // namespace qplab
