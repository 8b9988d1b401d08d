#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qplab/model.hpp"
#include "qplab/numerics.hpp"
#include "qplab/transfer.hpp"

namespace qplab {

enum class Quadrature { grid, monte_carlo };

inline const char* to_string(Quadrature q) { return q == Quadrature::grid ? "grid" : "monte_carlo"; }

/// How phases are drawn for a theta-average. samples = 0 picks the default
/// size for the dimension and scale.
struct Sampler {
  Quadrature kind = Quadrature::grid;
  std::size_t samples = 0;
  std::uint64_t seed = 1;
  unsigned threads = 0;  ///< 0: use default_threads()

  static Sampler grid(std::size_t samples = 0) { return {Quadrature::grid, samples, 1, 0}; }
  static Sampler monte_carlo(std::size_t samples, std::uint64_t seed = 1) {
    return {Quadrature::monte_carlo, samples, seed, 0};
  }
};

inline unsigned resolve_threads(unsigned threads) { return threads == 0 ? default_threads() : threads; }

/// Default quadrature size: max(4096, 8n) grid points for d = 1, a 64 x 64
/// product grid (or 4096 stratified samples) for d = 2.
inline std::size_t default_samples(int dim, long long n) {
  if (dim == 1) return std::max<std::size_t>(4096, 8 * static_cast<std::size_t>(std::max(n, 1LL)));
  return 4096;
}

/// Phases for a theta-average. d = 1 grid: i/N. d = 2 grid: product grid with
/// ceil(sqrt(N)) points per axis. Monte Carlo: uniform (d = 1) or one uniform
/// point per cell of a stratified product grid (d = 2).
inline std::vector<Phase> sample_phases(int dim, const Sampler& s, long long n) {
  const std::size_t count = s.samples ? s.samples : default_samples(dim, n);
  std::vector<Phase> out;
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (dim == 1) {
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double x = s.kind == Quadrature::grid ? double(i) / double(count) : u(rng);
      out.push_back({x, 0.0});
    }
    return out;
  }
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(double(count))));
  out.reserve(side * side);
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      if (s.kind == Quadrature::grid) {
        out.push_back({double(i) / double(side), double(j) / double(side)});
      } else {
        const double a = u(rng), b = u(rng);
        out.push_back({(double(i) + a) / double(side), (double(j) + b) / double(side)});
      }
    }
  return out;
}

/// n^-1 log ||M_n(theta)|| for every phase, in input order.
inline std::vector<double> log_norm_samples(const Frequency& omega, double E, long long n, const TrigPotential& v,
                                            std::span<const Phase> phases, unsigned threads = 0) {
  return parallel_map(phases.size(), resolve_threads(threads),
                      [&](std::size_t i) { return normalized_log_norm(omega, phases[i], E, n, v); });
}

struct LyapunovEstimate {
  long long n = 0;
  double E = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  Quadrature quadrature = Quadrature::grid;
};

/// L_n(omega, E) = n^-1 \int log ||M_n(omega, theta, E)|| d theta.
inline LyapunovEstimate lyapunov_n(const Frequency& omega, double E, long long n, const TrigPotential& v,
                                   const Sampler& sampler = {}) {
  if (n < 1) throw std::invalid_argument("lyapunov_n: n must be >= 1");
  const auto phases = sample_phases(v.dim(), sampler, n);
  const auto values = log_norm_samples(omega, E, n, v, phases, sampler.threads);
  const SampleStats st = sample_stats(values);
  return {n, E, st.mean, st.std_error, st.count, sampler.kind};
}

struct Subadditivity {
  double residual = 0.0;   ///< L_{n1+n2} - (n1 L_{n1} + n2 L_{n2}) / (n1 + n2)
  double tolerance = 0.0;  ///< 3 combined std_errors + 1e-9
  bool holds = true;
  LyapunovEstimate whole, first, second;
};

inline Subadditivity check_subadditivity(const Frequency& omega, double E, long long n1, long long n2,
                                         const TrigPotential& v, const Sampler& sampler = {}) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("check_subadditivity: n1, n2 must be >= 1");
  Subadditivity s;
  s.whole = lyapunov_n(omega, E, n1 + n2, v, sampler);
  s.first = lyapunov_n(omega, E, n1, v, sampler);
  s.second = n2 == n1 ? s.first : lyapunov_n(omega, E, n2, v, sampler);
  const double w1 = double(n1) / double(n1 + n2), w2 = double(n2) / double(n1 + n2);
  s.residual = s.whole.value - (w1 * s.first.value + w2 * s.second.value);
  const double se = std::sqrt(s.whole.std_error * s.whole.std_error + w1 * w1 * s.first.std_error * s.first.std_error +
                              w2 * w2 * s.second.std_error * s.second.std_error);
  s.tolerance = 3.0 * se + 1e-9;
  s.holds = s.residual <= s.tolerance;
  return s;
}

struct LyapunovLimit {
  double value = 0.0;  ///< min over the schedule
  std::vector<LyapunovEstimate> table;
  bool monotone = true;  ///< L_m <= L_n + 3 se whenever n | m in the schedule
};

inline LyapunovLimit lyapunov_limit(const Frequency& omega, double E, const TrigPotential& v,
                                    std::span<const long long> schedule, const Sampler& sampler = {}) {
  if (schedule.empty()) throw std::invalid_argument("lyapunov_limit: empty schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i] <= schedule[i - 1]) throw std::invalid_argument("lyapunov_limit: schedule must increase");
  LyapunovLimit out;
  out.value = std::numeric_limits<double>::infinity();
  for (long long n : schedule) {
    out.table.push_back(lyapunov_n(omega, E, n, v, sampler));
    out.value = std::min(out.value, out.table.back().value);
  }
  for (std::size_t i = 0; i < out.table.size(); ++i)
    for (std::size_t j = i + 1; j < out.table.size(); ++j) {
      const auto &a = out.table[i], &b = out.table[j];
      if (b.n % a.n != 0) continue;
      const double se = std::hypot(a.std_error, b.std_error);
      if (b.value > a.value + 3.0 * se + 1e-9) out.monotone = false;
    }
  return out;
}

/// (1/J) sum_{j=1..J} n^-1 log ||M_n(omega, theta + j omega, E)||.
inline double shift_average(const Frequency& omega, const Phase& theta, double E, long long n, long long J,
                            const TrigPotential& v, unsigned threads = 0) {
  if (J < 1) throw std::invalid_argument("shift_average: J must be >= 1");
  if (n < 1) throw std::invalid_argument("shift_average: n must be >= 1");
  const auto values = parallel_map(static_cast<std::size_t>(J), resolve_threads(threads), [&](std::size_t j) {
    return normalized_log_norm(omega, omega.shift(theta, static_cast<long long>(j) + 1), E, n, v);
  });
  return pairwise_sum(values) / double(J);
}

struct UpperBound {
  double excess = 0.0;     ///< max(0, max_theta n^-1 log||M_n|| - L_n)
  double L_n = 0.0;        ///< grid mean
  double reference = 0.0;  ///< C n^-sigma
  double constant = 0.0;   ///< C = 2 log(1 + ||v|| + |E|)
  double sigma = 0.0;
  Phase worst{0.0, 0.0};
};

/// Largest deviation above L_n over the supplied phases, with the C n^-sigma
/// reference curve. L_n is the mean over the same phases.
inline UpperBound upper_bound_check(const Frequency& omega, double E, long long n, const TrigPotential& v,
                                    std::span<const Phase> phases, double sigma, unsigned threads = 0) {
  if (phases.empty()) throw std::invalid_argument("upper_bound_check: empty theta grid");
  const auto values = log_norm_samples(omega, E, n, v, phases, threads);
  UpperBound u;
  u.sigma = sigma;
  u.L_n = pairwise_sum(values) / double(values.size());
  u.constant = 2.0 * log_growth_bound(v, E);
  u.reference = u.constant * std::pow(double(n), -sigma);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] - u.L_n > u.excess) {
      u.excess = values[i] - u.L_n;
      u.worst = phases[i];
    }
  return u;
}

/// Equispaced grid overload: `points` phases (d = 1) or a product grid (d = 2).
inline UpperBound upper_bound_check(const Frequency& omega, double E, long long n, const TrigPotential& v,
                                    std::size_t points, double sigma, unsigned threads = 0) {
  const auto phases = sample_phases(v.dim(), Sampler::grid(points), n);
  return upper_bound_check(omega, E, n, v, phases, sigma, threads);
}

/// Default LDT / upper-bound exponent: 1/3 for d = 1, 0.1 for d = 2.
inline double default_sigma(int dim) { return dim == 1 ? 1.0 / 3.0 : 0.1; }

inline std::string lyapunov_csv_header() { return "n,E,value,std_error,samples,quadrature"; }

inline std::string to_csv(const LyapunovEstimate& e) {
  std::ostringstream os;
  os.precision(17);
  os << e.n << ',' << e.E << ',' << e.value << ',' << e.std_error << ',' << e.samples << ','
     << to_string(e.quadrature);
  return os.str();
}

}  // namespace qplab
