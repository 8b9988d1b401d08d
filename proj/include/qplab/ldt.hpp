#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qplab/errors.hpp"
#include "qplab/lyapunov.hpp"
#include "qplab/numerics.hpp"

namespace qplab {

enum class Side { two_sided, below, above };

struct DeviationOptions {
  Side side = Side::two_sided;
  bool general_form = false;  ///< accept any sigma > 0
  double scale = 1.0;         ///< deviations are compared with scale * n^-sigma
  std::optional<double> L_reference;
  unsigned threads = 0;
};

struct DeviationProfile {
  long long n = 0;
  double sigma = 0.0;
  double threshold = 0.0;  ///< scale * n^-sigma
  double fraction = 0.0;
  std::size_t samples = 0;
  double std_error = 0.0;  ///< sqrt(fraction (1 - fraction) / samples)
  bool two_sided = true;
  Side side = Side::two_sided;
  double L_n = 0.0;
  bool general_form = false;
};

inline void check_sigma(double sigma, int dim, bool general_form) {
  if (!(sigma > 0.0)) throw SigmaOutOfRange("sigma must be positive");
  if (!general_form && dim == 1 && sigma > 0.5)
    throw SigmaOutOfRange("the d = 1 strong bound needs sigma in (0, 1/2]; use the general form");
}

/// Monte Carlo measure of the theta-set where n^-1 log||M_n|| deviates from
/// L_n by more than the threshold. L_n comes from the dense grid.
inline DeviationProfile deviation_measure(const Frequency& omega, double E, long long n, double sigma,
                                          const TrigPotential& v, std::size_t samples, std::uint64_t seed,
                                          const DeviationOptions& opt = {}) {
  check_sigma(sigma, v.dim(), opt.general_form);
  if (samples < 1000) throw std::invalid_argument("deviation_measure: need at least 1000 samples");
  DeviationProfile p;
  p.n = n;
  p.sigma = sigma;
  p.side = opt.side;
  p.two_sided = opt.side == Side::two_sided;
  p.general_form = opt.general_form;
  p.threshold = opt.scale * std::pow(double(n), -sigma);
  if (opt.L_reference) {
    p.L_n = *opt.L_reference;
  } else {
    Sampler dense = Sampler::grid();
    dense.threads = opt.threads;
    p.L_n = lyapunov_n(omega, E, n, v, dense).value;
  }
  Sampler mc = Sampler::monte_carlo(samples, seed);
  const auto phases = sample_phases(v.dim(), mc, n);
  const auto values = log_norm_samples(omega, E, n, v, phases, opt.threads);
  std::size_t bad = 0;
  for (double x : values) {
    const double d = x - p.L_n;
    const bool hit = opt.side == Side::two_sided ? std::fabs(d) > p.threshold
                     : opt.side == Side::below   ? -d > p.threshold
                                                 : d > p.threshold;
    bad += hit;
  }
  p.samples = values.size();
  p.fraction = double(bad) / double(p.samples);
  p.std_error = std::sqrt(p.fraction * (1.0 - p.fraction) / double(p.samples));
  return p;
}

/// exp(-n^{1-2 sigma}) for d = 1, exp(-n^sigma) for d = 2.
inline double ldt_reference(int dim, long long n, double sigma) {
  return dim == 1 ? std::exp(-std::pow(double(n), 1.0 - 2.0 * sigma)) : std::exp(-std::pow(double(n), sigma));
}

struct LdtRow {
  DeviationProfile profile;
  double reference = 0.0;
  bool flagged = false;  ///< fraction > reference + 3 std_error
};

struct LdtTable {
  std::vector<LdtRow> rows;
  bool nonincreasing = true;  ///< within 3 combined binomial errors
};

inline LdtTable ldt_scaling_table(const Frequency& omega, double E, const TrigPotential& v, double sigma,
                                  std::span<const long long> ns, std::size_t samples, std::uint64_t seed = 1,
                                  const DeviationOptions& opt = {}) {
  for (std::size_t i = 1; i < ns.size(); ++i)
    if (ns[i] <= ns[i - 1]) throw std::invalid_argument("ldt_scaling_table: n list must increase");
  LdtTable t;
  for (long long n : ns) {
    LdtRow r;
    r.profile = deviation_measure(omega, E, n, sigma, v, samples, seed, opt);
    r.reference = ldt_reference(v.dim(), n, sigma);
    r.flagged = r.profile.fraction > r.reference + 3.0 * r.profile.std_error;
    t.rows.push_back(r);
  }
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    const auto &a = t.rows[i - 1].profile, &b = t.rows[i].profile;
    if (b.fraction > a.fraction + 3.0 * std::hypot(a.std_error, b.std_error)) t.nonincreasing = false;
  }
  return t;
}

inline std::string ldt_csv_header() { return "n,sigma,threshold,fraction,std_error,bound_reference"; }

inline std::string to_csv(const LdtRow& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.profile.n << ',' << r.profile.sigma << ',' << r.profile.threshold << ',' << r.profile.fraction << ','
     << r.profile.std_error << ',' << r.reference;
  return os.str();
}

struct FourierDecay {
  bool perfect_decay = false;  ///< every nonzero mode is below the noise floor
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::vector<double> magnitudes;  ///< |phi^(k)| for k = 1..K
  double max_weighted = 0.0;       ///< max_k k |phi^(k)|, the O(1/k) constant
  std::size_t fitted_points = 0;
};

/// Discrete Fourier coefficients of phi(theta) = n^-1 log ||M_n(theta)|| on
/// an equispaced grid and the least-squares slope of log|phi^(k)| against
/// log k over modes above the noise floor.
inline FourierDecay fourier_decay_check(const Frequency& omega, double E, long long n, const TrigPotential& v, int K,
                                        std::size_t grid = 8192, unsigned threads = 0) {
  if (v.dim() != 1) throw std::invalid_argument("fourier_decay_check: d = 1 only");
  if (K < 1 || static_cast<std::size_t>(K) > grid / 4)
    throw std::invalid_argument("fourier_decay_check: need 1 <= K <= grid / 4");
  const auto phases = sample_phases(1, Sampler::grid(grid), n);
  const auto phi = log_norm_samples(omega, E, n, v, phases, threads);
  std::vector<double> c(grid), s(grid);
  for (std::size_t j = 0; j < grid; ++j) {
    c[j] = std::cos(two_pi * double(j) / double(grid));
    s[j] = std::sin(two_pi * double(j) / double(grid));
  }
  double scale = 0.0;
  for (double x : phi) scale = std::max(scale, std::fabs(x));
  const double floor = 1e-13 * std::max(1.0, scale);
  FourierDecay out;
  std::vector<double> lx, ly;
  for (int k = 1; k <= K; ++k) {
    std::vector<double> re(grid), im(grid);
    for (std::size_t j = 0; j < grid; ++j) {
      const std::size_t idx = (j * static_cast<std::size_t>(k)) % grid;
      re[j] = phi[j] * c[idx];
      im[j] = -phi[j] * s[idx];
    }
    const double mag = std::abs(std::complex<double>(pairwise_sum(re), pairwise_sum(im))) / double(grid);
    out.magnitudes.push_back(mag);
    out.max_weighted = std::max(out.max_weighted, double(k) * mag);
    if (mag > floor) {
      lx.push_back(std::log(double(k)));
      ly.push_back(std::log(mag));
    }
  }
  out.fitted_points = lx.size();
  if (lx.size() < 2) {
    out.perfect_decay = true;
    return out;
  }
  const LinearFit f = fit_line(lx, ly);
  out.slope = f.slope;
  out.intercept = f.intercept;
  out.r2 = f.r2;
  return out;
}

}  // namespace qplab
