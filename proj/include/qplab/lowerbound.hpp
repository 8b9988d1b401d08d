#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qplab/errors.hpp"
#include "qplab/ldt.hpp"
#include "qplab/lyapunov.hpp"
#include "qplab/model.hpp"
#include "qplab/numerics.hpp"
#include "qplab/transfer.hpp"

namespace qplab {

struct EpsilonGap {
  double delta = 0.0;
  double y0 = 0.0;        ///< witnessing height in (delta/2, delta)
  double epsilon = 0.0;   ///< certified: grid minimum less the Lipschitz slack, so the true gap at y0 exceeds it
  double grid_minimum = 0.0;  ///< inf over E1 of max_y min_x |v(x + i y) - E1| on the final grids
  double E1 = 0.0;        ///< the target attaining the infimum
  std::size_t x_grid = 0;
  std::size_t y_grid = 0;
  bool stable = false;    ///< last grid doubling moved epsilon by < 1% and the slack is < 1%
};

namespace detail {

/// inf over an x-grid (per axis) of |v(x + i y) - E1|, with y on every axis.
inline double grid_infimum(const TrigPotential& v, double y, double E1, std::size_t nx) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t rows = v.dim() == 2 ? nx : 1;
  for (std::size_t a = 0; a < nx; ++a)
    for (std::size_t b = 0; b < rows; ++b) {
      const ComplexPhase z{std::complex<double>(double(a) / double(nx), y),
                           std::complex<double>(v.dim() == 2 ? double(b) / double(nx) : 0.0, v.dim() == 2 ? y : 0.0)};
      best = std::min(best, std::abs(v.extend(z) - E1));
    }
  return best;
}

struct GapPoint {
  double epsilon, y0, E1;
};

inline GapPoint gap_on_grid(const TrigPotential& v, double delta, std::span<const double> targets, std::size_t nx,
                            std::size_t ny) {
  GapPoint worst{std::numeric_limits<double>::infinity(), 0.0, 0.0};
  for (double E1 : targets) {
    GapPoint best{-1.0, 0.0, E1};
    for (std::size_t j = 0; j < ny; ++j) {
      const double y = 0.5 * delta + 0.5 * delta * (double(j) + 0.5) / double(ny);
      const double m = grid_infimum(v, y, E1, nx);
      if (m > best.epsilon) best = {m, y, E1};
    }
    if (best.epsilon < worst.epsilon) worst = best;
  }
  return worst;
}

}  // namespace detail

/// Gap of the complexified potential from a set of targets: maximizes over a
/// y-grid in (delta/2, delta) the x-grid minimum of |v(x + i y) - E1| and
/// takes the infimum over the targets. Subtracting the Lipschitz slack of the
/// x-grid turns the grid minimum into a certified lower bound. Both grids
/// double until epsilon moves by less than 1%.
inline EpsilonGap epsilon_gap(const TrigPotential& v, double delta, std::span<const double> targets,
                              std::size_t x_grid = 256, std::size_t y_grid = 16, int max_doublings = 8) {
  if (v.is_constant()) throw PotentialConstant("epsilon_gap: every non-constant coefficient vanishes");
  if (!(delta > 0.0)) throw std::invalid_argument("epsilon_gap: delta must be positive");
  if (delta > v.strip_width() / 10.0)
    throw StripExceeded("epsilon_gap: delta exceeds the holomorphic strip " + std::to_string(v.strip_width() / 10.0));
  if (targets.empty()) throw std::invalid_argument("epsilon_gap: no targets");
  if (x_grid < 4 || y_grid < 1) throw std::invalid_argument("epsilon_gap: grids too small");
  const double lipschitz = v.derivative_bound(delta) * v.dim();
  auto certified = [&](const detail::GapPoint& p, std::size_t nx) { return p.epsilon - lipschitz * 0.5 / double(nx); };
  EpsilonGap out;
  out.delta = delta;
  std::size_t nx = x_grid, ny = y_grid;
  detail::GapPoint cur = detail::gap_on_grid(v, delta, targets, nx, ny);
  for (int it = 0; it < max_doublings; ++it) {
    const detail::GapPoint next = detail::gap_on_grid(v, delta, targets, 2 * nx, 2 * ny);
    const double before = certified(cur, nx);
    nx *= 2;
    ny *= 2;
    const double after = certified(next, nx);
    cur = next;
    if (after > 0.0 && std::fabs(after - before) < 0.01 * after && cur.epsilon - after < 0.01 * after) {
      out.stable = true;
      break;
    }
  }
  out.grid_minimum = cur.epsilon;
  out.epsilon = certified(cur, nx);
  out.y0 = cur.y0;
  out.E1 = cur.E1;
  out.x_grid = nx;
  out.y_grid = ny;
  return out;
}

inline EpsilonGap epsilon_gap(const TrigPotential& v, double delta, double E1, std::size_t x_grid = 256,
                              std::size_t y_grid = 16) {
  const double t[] = {E1};
  return epsilon_gap(v, delta, t, x_grid, y_grid);
}

struct ComplexGrowth {
  double lambda_epsilon = 0.0;
  double log_rate = 0.0;           ///< log(lambda epsilon - 1)
  double grid_infimum = 0.0;       ///< inf_x |lambda v(x + i y0) - E| on the x-grid
  double margin = 0.0;             ///< log||M_n(i y0)|| - n log(lambda epsilon - 1) at n = n_max
  double min_margin = 0.0;         ///< over n = 1..n_max
  std::vector<double> margins;     ///< per n
  bool u_dominates = true;         ///< |u_j| >= |v_j| at every step
  bool per_step_growth = true;     ///< |u_j| >= (lambda epsilon - 1)|u_{j-1}| at every step
  long long steps = 0;
};

/// Growth of the cocycle on the line Im theta = y0 for the potential
/// lambda * v. The orbit vector (u_j, v_j) = step_j (u_{j-1}, v_{j-1}) from
/// (1, 0) is followed in scaled form to check |u_j| >= |v_j| and the per-step
/// growth; the norm margin is recorded for every n.
inline ComplexGrowth complexified_growth_check(double lambda, const TrigPotential& v, const Frequency& omega,
                                               double E, double y0, double epsilon, long long n_max,
                                               std::size_t x_grid = 4096) {
  if (n_max < 1) throw std::invalid_argument("complexified_growth_check: n must be >= 1");
  ComplexGrowth g;
  g.lambda_epsilon = lambda * epsilon;
  if (!(g.lambda_epsilon > 100.0))
    throw HypothesisUnmet("complexified_growth_check: lambda * epsilon = " + std::to_string(g.lambda_epsilon) +
                          " must exceed 100");
  const TrigPotential w = v.with_coupling(lambda * v.coupling());
  (void)eval_potential_complex(w, {std::complex<double>(0.0, y0), std::complex<double>(0.0, y0)});
  double inf = std::numeric_limits<double>::infinity();
  const std::size_t rows = w.dim() == 2 ? std::max<std::size_t>(64, std::size_t(std::sqrt(double(x_grid)))) : 1;
  const std::size_t cols = w.dim() == 2 ? rows : x_grid;
  for (std::size_t a = 0; a < cols; ++a)
    for (std::size_t b = 0; b < rows; ++b) {
      const ComplexPhase z{std::complex<double>(double(a) / double(cols), y0),
                           std::complex<double>(w.dim() == 2 ? double(b) / double(rows) : 0.0, w.dim() == 2 ? y0 : 0.0)};
      inf = std::min(inf, std::abs(w.extend(z) - E));
    }
  g.grid_infimum = inf;
  if (!(inf > g.lambda_epsilon))
    throw HypothesisUnmet("complexified_growth_check: inf_x |lambda v(x + i y0) - E| = " + std::to_string(inf) +
                          " does not exceed lambda * epsilon = " + std::to_string(g.lambda_epsilon));
  g.log_rate = std::log(g.lambda_epsilon - 1.0);
  ScaledMatrix2<std::complex<double>> m;
  std::complex<double> u = 1.0, vv = 0.0;  // (u, v) scaled by exp(log_u_scale)
  double log_u_scale = 0.0, log_u_prev = 0.0;
  g.min_margin = std::numeric_limits<double>::infinity();
  for (long long j = 1; j <= n_max; ++j) {
    ComplexPhase zj{std::complex<double>(0.0, y0), std::complex<double>(0.0, w.dim() == 2 ? y0 : 0.0)};
    for (int i = 0; i < omega.dim(); ++i) zj[i] = std::complex<double>(wrap(double(j) * omega[i]), zj[i].imag());
    const std::complex<double> a = w.extend(zj) - E;
    m.left_multiply({a, 1.0, -1.0, 0.0});
    const std::complex<double> nu = a * u + vv, nv = -u;
    u = nu;
    vv = nv;
    const double s = std::max(std::abs(u), std::abs(vv));
    if (s > 0.0) {
      int e = 0;
      std::frexp(s, &e);
      u = std::ldexp(u.real(), -e) + std::complex<double>(0.0, std::ldexp(u.imag(), -e));
      vv = std::ldexp(vv.real(), -e) + std::complex<double>(0.0, std::ldexp(vv.imag(), -e));
      log_u_scale += e * std::log(2.0);
    }
    const double log_u = log_u_scale + std::log(std::abs(u));
    if (std::abs(u) < std::abs(vv)) g.u_dominates = false;
    if (log_u - log_u_prev < g.log_rate - 1e-12) g.per_step_growth = false;
    log_u_prev = log_u;
    const double margin = m.log_norm() - double(j) * g.log_rate;
    g.margins.push_back(margin);
    g.min_margin = std::min(g.min_margin, margin);
  }
  g.margin = g.margins.back();
  g.steps = n_max;
  return g;
}

struct HermanOptions {
  double C = 10.0;        ///< constant in (1 - C delta / rho)
  long long n = 500;      ///< scale of the numerical check
  std::vector<double> energies{0.0};
  Sampler sampler = Sampler::grid(200);
};

struct HermanBound {
  double log_lambda = 0.0;
  double log_lambda0 = 0.0;    ///< log(100 epsilon^-100)
  double bound = 0.0;          ///< (delta / 16) log lambda
  double intermediate = 0.0;   ///< (delta / 4)((1 - C delta / rho) log lambda - 2 log(1 / epsilon))
  double ceiling = 0.0;        ///< log((1 + ||v0||) lambda), an upper bound for every L_n
  std::vector<LyapunovEstimate> measured;
  bool verified = true;        ///< every measured L_n >= bound
  bool below_ceiling = true;
};

/// Lower bound for L from the harmonic measure of the line Im z = y0, valid
/// for lambda above lambda0 = 100 epsilon^-100, checked against lyapunov_n
/// for lambda * v0 at each requested energy.
inline HermanBound herman_style_bound(double lambda, const TrigPotential& v0, const Frequency& omega, double delta,
                                      double rho_strip, double epsilon, double y0, const HermanOptions& opt = {}) {
  if (!(epsilon > 0.0) || !(delta > 0.0) || !(rho_strip > 0.0) || !(lambda > 0.0))
    throw std::invalid_argument("herman_style_bound: lambda, delta, rho and epsilon must be positive");
  if (!(y0 > 0.5 * delta && y0 < delta)) throw std::invalid_argument("herman_style_bound: y0 must lie in (delta/2, delta)");
  HermanBound h;
  h.log_lambda = std::log(lambda);
  h.log_lambda0 = std::log(100.0) - 100.0 * std::log(epsilon);
  if (!(h.log_lambda > h.log_lambda0))
    throw HypothesisUnmet("herman_style_bound: lambda must exceed lambda0 = 100 epsilon^-100 (log lambda0 = " +
                          std::to_string(h.log_lambda0) + ")");
  h.bound = delta / 16.0 * h.log_lambda;
  h.intermediate = delta / 4.0 * ((1.0 - opt.C * delta / rho_strip) * h.log_lambda + 2.0 * std::log(epsilon));
  h.ceiling = std::log(1.0 + strip_norm(v0).bound) + h.log_lambda;
  h.below_ceiling = h.bound <= h.ceiling;
  const TrigPotential v = v0.with_coupling(lambda * v0.coupling());
  for (double E : opt.energies) {
    h.measured.push_back(lyapunov_n(omega, E, opt.n, v, opt.sampler));
    if (h.measured.back().value < h.bound) h.verified = false;
  }
  return h;
}

struct SublevelRow {
  double delta = 0.0;
  double measure = 0.0;
  double std_error = 0.0;
};

struct SublevelFit {
  double E1 = 0.0;
  double c0 = 0.0;   ///< slope of log(measure) against log(delta)
  double r2 = 0.0;
  std::vector<SublevelRow> rows;
};

struct SublevelMeasure {
  std::vector<SublevelFit> fits;
  double c0 = 0.0;   ///< smallest fitted exponent over the targets
  double E1 = 0.0;   ///< target attaining it
  std::size_t samples = 0;
};

/// Dyadic ladder 2^lo, ..., 2^hi.
inline std::vector<double> dyadic_ladder(int lo, int hi) {
  std::vector<double> out;
  for (int e = lo; e <= hi; ++e) out.push_back(std::ldexp(1.0, e));
  return out;
}

/// Monte Carlo measure of {theta : |v0(theta) - E1| < delta} on a delta
/// ladder and the fitted exponent c0. Rows with zero measure are left out of
/// the fit; if fewer than two remain, c0 is infinite (the set is empty).
inline SublevelMeasure sublevel_measure(const TrigPotential& v0, std::span<const double> targets,
                                        std::span<const double> deltas, std::size_t samples = 1000000,
                                        std::uint64_t seed = 1, unsigned threads = 0) {
  if (samples < 10000) throw std::invalid_argument("sublevel_measure: need at least 10^4 samples");
  if (targets.empty() || deltas.empty()) throw std::invalid_argument("sublevel_measure: empty targets or ladder");
  for (double d : deltas)
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("sublevel_measure: delta must lie in (0, 1)");
  const auto phases = sample_phases(v0.dim(), Sampler::monte_carlo(samples, seed), 1);
  const auto values = parallel_map(phases.size(), resolve_threads(threads), [&](std::size_t i) { return v0(phases[i]); });
  SublevelMeasure out;
  out.samples = values.size();
  out.c0 = std::numeric_limits<double>::infinity();
  for (double E1 : targets) {
    SublevelFit f;
    f.E1 = E1;
    std::vector<double> lx, ly;
    for (double d : deltas) {
      std::size_t hit = 0;
      for (double x : values) hit += std::fabs(x - E1) < d;
      SublevelRow r{d, double(hit) / double(values.size()), 0.0};
      r.std_error = std::sqrt(r.measure * (1.0 - r.measure) / double(values.size()));
      f.rows.push_back(r);
      if (hit > 0) {
        lx.push_back(std::log(d));
        ly.push_back(std::log(r.measure));
      }
    }
    if (lx.size() >= 2) {
      const LinearFit fit = fit_line(lx, ly);
      f.c0 = fit.slope;
      f.r2 = fit.r2;
    } else {
      f.c0 = std::numeric_limits<double>::infinity();
    }
    if (f.c0 < out.c0) {
      out.c0 = f.c0;
      out.E1 = E1;
    }
    out.fits.push_back(std::move(f));
  }
  return out;
}

struct InitialScaleOptions {
  bool strict = true;          ///< throw HypothesisUnmet when an inequality fails
  std::vector<double> energies{0.0};
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  Sampler sampler = Sampler::grid();
};

struct InitialScale {
  double c0 = 0.0;
  double log_lambda = 0.0;
  double analytic_measure = 0.0;   ///< n1 lambda^(-c0/100)
  bool analytic_ok = false;        ///< analytic_measure < 1/n1
  double sublevel_fraction = 0.0;  ///< worst sampled mes[|v0 - E/lambda| < lambda^(-1/100)]
  bool sublevel_ok = false;        ///< sublevel_fraction < 1/n1
  std::vector<LyapunovEstimate> measured;
  bool lyapunov_ok = true;         ///< L_n1 >= (97/100) log lambda at every energy
  bool verified = false;
};

/// Initial-scale step: the sublevel bound n1 lambda^(-c0/100) < 1/n1 (with c0
/// supplied, typically from sublevel_measure), its Monte Carlo counterpart at
/// threshold lambda^(-1/100), and L_n1 >= 0.97 log lambda for lambda * v0.
inline InitialScale initial_scale_bound(double lambda, const TrigPotential& v0, const Frequency& omega, long long n1,
                                        double c0, const InitialScaleOptions& opt = {}) {
  if (n1 < 1) throw std::invalid_argument("initial_scale_bound: n1 must be >= 1");
  if (!(lambda > 1.0)) throw std::invalid_argument("initial_scale_bound: lambda must exceed 1");
  InitialScale s;
  s.c0 = c0;
  s.log_lambda = std::log(lambda);
  s.analytic_measure = double(n1) * std::exp(-c0 / 100.0 * s.log_lambda);
  s.analytic_ok = s.analytic_measure < 1.0 / double(n1);
  if (opt.strict && !s.analytic_ok)
    throw HypothesisUnmet("initial_scale_bound: sublevel measure bound n1 * lambda^(-c0/100) = " +
                          std::to_string(s.analytic_measure) + " is not below 1/n1");
  const auto phases = sample_phases(v0.dim(), Sampler::monte_carlo(opt.samples, opt.seed), n1);
  const double threshold = std::exp(-s.log_lambda / 100.0);
  for (double E : opt.energies) {
    std::size_t hit = 0;
    for (const auto& th : phases) hit += std::fabs(v0(th) - E / lambda) < threshold;
    s.sublevel_fraction = std::max(s.sublevel_fraction, double(hit) / double(phases.size()));
  }
  s.sublevel_ok = s.sublevel_fraction < 1.0 / double(n1);
  if (opt.strict && !s.sublevel_ok)
    throw HypothesisUnmet("initial_scale_bound: sampled sublevel fraction " + std::to_string(s.sublevel_fraction) +
                          " at threshold lambda^(-1/100) is not below 1/n1");
  const TrigPotential v = v0.with_coupling(lambda * v0.coupling());
  for (double E : opt.energies) {
    s.measured.push_back(lyapunov_n(omega, E, n1, v, opt.sampler));
    if (s.measured.back().value < 0.97 * s.log_lambda) s.lyapunov_ok = false;
  }
  if (opt.strict && !s.lyapunov_ok)
    throw HypothesisUnmet("initial_scale_bound: L_n1 falls below (97/100) log lambda");
  s.verified = s.analytic_ok && s.sublevel_ok && s.lyapunov_ok;
  return s;
}

struct ScaleChoice {
  long long n0 = 0;
  std::vector<long long> descent;  ///< scales visited, starting at n
  bool reverified = true;          ///< L_m < (1 + rho) L_n0 + log_v rho n0 / m for tabulated m <= n0
  double worst_margin = 0.0;       ///< min over those m of right side - L_m
};

/// Descends n, [rho n], [rho^2 n], ... and returns the first n0 > sqrt(n)
/// with L_[rho n0] < (1 + rho) L_n0. `log_v` is log(1 + ||v||).
inline ScaleChoice scale_selection(const std::map<long long, double>& L_table, long long n, double rho,
                                   double log_v) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("scale_selection: rho must lie in (0, 1)");
  if (n < 1) throw std::invalid_argument("scale_selection: n must be >= 1");
  ScaleChoice c;
  const double floor_scale = std::sqrt(double(n));
  long long m = n;
  for (;;) {
    if (double(m) <= floor_scale) throw DescentExhausted("scale_selection: descent reached n^(1/2) without success");
    c.descent.push_back(m);
    const long long next = static_cast<long long>(std::floor(rho * double(m)));
    const auto here = L_table.find(m), below = L_table.find(next);
    if (here == L_table.end() || below == L_table.end() || next < 1)
      throw DescentExhausted("scale_selection: table has no entry for scale " +
                             std::to_string(here == L_table.end() ? m : next));
    if (below->second < (1.0 + rho) * here->second) {
      c.n0 = m;
      break;
    }
    m = next;
  }
  const double L0 = L_table.at(c.n0);
  c.worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& [scale, L] : L_table) {
    if (scale > c.n0) break;
    const double rhs = (1.0 + rho) * L0 + log_v * rho * double(c.n0) / double(scale);
    c.worst_margin = std::min(c.worst_margin, rhs - L);
    if (!(L < rhs)) c.reverified = false;
  }
  return c;
}

struct LadderRung {
  long long n = 0;
  double L = 0.0;
  double std_error = 0.0;
  double rho = 0.0;             ///< (log(1+||v||) / L_n) (log n)^(-1/2)
  double gate_lhs = 0.0;        ///< L_n
  double gate_rhs = 0.0;        ///< 1000 rho log(1+||v||)
  bool gate_ok = false;
  double gamma = 0.0;           ///< L_n - 70 rho log(1+||v||)
  double drop = 0.0;            ///< L_n - L_next (0 on the last rung)
  double drop_bound = 0.0;      ///< 1000 (log n)^(-1/2) log lambda
  double drop_margin = 0.0;     ///< drop_bound + 3 combined se - drop
  bool drop_ok = true;
  double short_drop_bound = 0.0;  ///< 71 rho log(1+||v||)
  bool short_drop_ok = true;
  double bad_fraction = 0.0;    ///< sampled deviation fraction at n^(-sigma/2) log(1+||v||)
  double bad_reference = 0.0;   ///< exp(-n^(sigma/5))
};

struct ScaleLadder {
  std::vector<LadderRung> rungs;
  double log_v = 0.0;           ///< log(1 + ||v||)
  double sigma = 0.0;
  double min_L = 0.0;
  double half_log_lambda = 0.0;
  bool lower_bound_ok = false;  ///< min_L > (1/2) log lambda
  bool gates_ok = true;
  bool drops_ok = true;
  double product_bound = 0.0;   ///< L_{n_1} prod_j max(0, 1 - 2000 (log n_j)^(-1/2))
  bool product_ok = true;
  std::string schedule_note;
};

struct RecursionOptions {
  bool strict = false;   ///< throw GateFailed / DropExceeded instead of recording
  double E = 0.0;
  std::size_t samples = 4096;
  std::uint64_t seed = 1;
  std::size_t ldt_samples = 2000;  ///< 0 skips the bad-set report
  unsigned threads = 0;
};

/// Scale ladder for lambda * v0 along a user schedule. For each rung: L_n,
/// the scale ratio rho, the admissibility gate L_n > 1000 rho log(1+||v||),
/// the drop to the next rung against 1000 (log n)^(-1/2) log lambda, and the
/// normalized bad-set fraction. The schedule stands in for the exponential
/// jumps N = ceil(exp(n^(sigma/10))), which are far beyond reach.
inline ScaleLadder multiscale_recursion(double lambda, const TrigPotential& v0, const Frequency& omega,
                                        std::span<const long long> schedule, double sigma,
                                        const RecursionOptions& opt = {}) {
  if (schedule.empty()) throw std::invalid_argument("multiscale_recursion: empty schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i] <= schedule[i - 1]) throw std::invalid_argument("multiscale_recursion: schedule must increase");
  if (schedule.front() < 2) throw std::invalid_argument("multiscale_recursion: scales must be >= 2");
  if (!(lambda > 0.0)) throw std::invalid_argument("multiscale_recursion: lambda must be positive");
  const TrigPotential v = v0.with_coupling(lambda * v0.coupling());
  ScaleLadder out;
  out.sigma = sigma;
  out.log_v = std::log(1.0 + strip_norm(v).bound);
  out.half_log_lambda = 0.5 * std::log(lambda);
  out.schedule_note = "user schedule in place of N = ceil(exp(n^(sigma/10)))";
  Sampler s = v.dim() == 1 ? Sampler::grid(opt.samples) : Sampler::monte_carlo(opt.samples, opt.seed);
  s.threads = opt.threads;
  for (long long n : schedule) {
    const LyapunovEstimate est = lyapunov_n(omega, opt.E, n, v, s);
    LadderRung r;
    r.n = n;
    r.L = est.value;
    r.std_error = est.std_error;
    r.rho = out.log_v / std::max(r.L, 1e-300) / std::sqrt(std::log(double(n)));
    r.gate_lhs = r.L;
    r.gate_rhs = 1000.0 * r.rho * out.log_v;
    r.gate_ok = r.gate_lhs > r.gate_rhs;
    r.gamma = r.L - 70.0 * r.rho * out.log_v;
    r.drop_bound = 1000.0 / std::sqrt(std::log(double(n))) * std::log(lambda);
    r.short_drop_bound = 71.0 * r.rho * out.log_v;
    if (opt.ldt_samples > 0) {
      DeviationOptions d;
      d.general_form = true;
      d.scale = out.log_v;
      d.L_reference = r.L;
      d.threads = opt.threads;
      r.bad_fraction = deviation_measure(omega, opt.E, n, sigma / 2.0, v, std::max<std::size_t>(opt.ldt_samples, 1000),
                                         opt.seed, d)
                           .fraction;
      r.bad_reference = std::exp(-std::pow(double(n), sigma / 5.0));
    }
    if (!r.gate_ok) {
      out.gates_ok = false;
      if (opt.strict)
        throw GateFailed("multiscale_recursion: admissibility gate fails at n = " + std::to_string(n) + " (L = " +
                         std::to_string(r.L) + ", needs > " + std::to_string(r.gate_rhs) + ")");
    }
    out.rungs.push_back(r);
  }
  for (std::size_t j = 0; j + 1 < out.rungs.size(); ++j) {
    auto& a = out.rungs[j];
    const auto& b = out.rungs[j + 1];
    const double se = std::hypot(a.std_error, b.std_error);
    a.drop = a.L - b.L;
    a.drop_margin = a.drop_bound + 3.0 * se - a.drop;
    a.drop_ok = a.drop_margin >= 0.0;
    a.short_drop_ok = b.L > a.L - a.short_drop_bound - 3.0 * se;
    if (!a.drop_ok) {
      out.drops_ok = false;
      if (opt.strict)
        throw DropExceeded("multiscale_recursion: drop " + std::to_string(a.drop) + " from n = " +
                           std::to_string(a.n) + " exceeds " + std::to_string(a.drop_bound));
    }
  }
  if (!out.rungs.empty()) out.rungs.back().drop_margin = out.rungs.back().drop_bound;
  out.min_L = std::numeric_limits<double>::infinity();
  for (const auto& r : out.rungs) out.min_L = std::min(out.min_L, r.L);
  out.lower_bound_ok = out.min_L > out.half_log_lambda;
  out.product_bound = out.rungs.front().L;
  for (std::size_t j = 0; j + 1 < out.rungs.size(); ++j)
    out.product_bound *= std::max(0.0, 1.0 - 2000.0 / std::sqrt(std::log(double(out.rungs[j].n))));
  const auto& last = out.rungs.back();
  out.product_ok = last.L + 3.0 * last.std_error >= out.product_bound;
  return out;
}

}  // namespace qplab
