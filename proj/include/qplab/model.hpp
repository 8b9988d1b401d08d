#pragma once

// Torus points, diophantine frequencies and trigonometric potentials.
//
// Angle convention: the torus is [0,1)^d and every Fourier mode is
// exp(2*pi*i*k.theta), so "cos" below always means cos(2*pi*theta).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qplab/errors.hpp"

namespace qplab {

using Phase = std::array<double, 2>;
using ComplexPhase = std::array<std::complex<double>, 2>;
using Mode = std::array<int, 2>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// x mod 1 in [0, 1).
inline double wrap(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

/// Distance from x to the nearest integer.
inline double dist_to_integer(double x) { return std::fabs(x - std::nearbyint(x)); }

inline int l1_norm(const Mode& k) { return std::abs(k[0]) + std::abs(k[1]); }
inline int sup_norm(const Mode& k) { return std::max(std::abs(k[0]), std::abs(k[1])); }

/// Frequency vector on T^d (d = 1 or 2) together with the diophantine
/// parameters it is claimed to satisfy: dist(k.omega, Z) > c |k|^-A.
/// `verified_horizon` records the largest |k| that was actually checked.
class Frequency {
 public:
  Frequency(std::vector<double> components, double dio_A, double dio_c, int verified_horizon = 0)
      : dio_A_(dio_A), dio_c_(dio_c), verified_horizon_(verified_horizon) {
    if (components.empty() || components.size() > 2)
      throw std::invalid_argument("Frequency: dimension must be 1 or 2");
    if (dio_A < 1.0) throw std::invalid_argument("Frequency: diophantine exponent A must be >= 1");
    if (dio_c <= 0.0) throw std::invalid_argument("Frequency: diophantine constant c must be > 0");
    dim_ = static_cast<int>(components.size());
    for (int i = 0; i < dim_; ++i) components_[i] = wrap(components[i]);
  }

  /// (sqrt(5) - 1) / 2
  static Frequency golden(double dio_A = 2.0, double dio_c = 0.2) {
    return Frequency({(std::sqrt(5.0) - 1.0) / 2.0}, dio_A, dio_c);
  }

  /// (sqrt(2) - 1, sqrt(3) - 1)
  static Frequency default_2d(double dio_A = 4.0, double dio_c = 0.01) {
    return Frequency({std::sqrt(2.0) - 1.0, std::sqrt(3.0) - 1.0}, dio_A, dio_c);
  }

  int dim() const { return dim_; }
  const Phase& components() const { return components_; }
  double operator[](int i) const { return components_[i]; }
  double dio_A() const { return dio_A_; }
  double dio_c() const { return dio_c_; }
  int verified_horizon() const { return verified_horizon_; }

  Frequency with_verified_horizon(int horizon) const {
    Frequency copy = *this;
    copy.verified_horizon_ = horizon;
    return copy;
  }

  /// theta + j * omega, reduced to the torus.
  Phase shift(const Phase& theta, long long j) const {
    Phase out{0.0, 0.0};
    for (int i = 0; i < dim_; ++i) out[i] = wrap(theta[i] + wrap(static_cast<double>(j) * components_[i]));
    return out;
  }

 private:
  int dim_ = 1;
  Phase components_{0.0, 0.0};
  double dio_A_;
  double dio_c_;
  int verified_horizon_;
};

/// Scans every nonzero integer vector with sup-norm |k| <= K and returns the
/// violating k of largest |k|, or nullopt when the diophantine bound holds on
/// the whole horizon.
inline std::optional<Mode> verify_diophantine(const Frequency& omega, int K) {
  if (K < 1) throw std::invalid_argument("verify_diophantine: horizon must be >= 1");
  std::optional<Mode> worst;
  auto check = [&](const Mode& k) {
    double dot = 0.0;
    for (int i = 0; i < omega.dim(); ++i) dot += k[i] * omega[i];
    const double norm = sup_norm(k);
    if (!(dist_to_integer(dot) > omega.dio_c() * std::pow(norm, -omega.dio_A()))) {
      if (!worst || sup_norm(*worst) <= norm) worst = k;
    }
  };
  if (omega.dim() == 1) {
    for (int k = 1; k <= K; ++k) check({k, 0});
  } else {
    // k and -k give the same distance; scan the half-space k1 > 0 or (k1 == 0, k2 > 0).
    for (int k2 = 1; k2 <= K; ++k2) check({0, k2});
    for (int k1 = 1; k1 <= K; ++k1)
      for (int k2 = -K; k2 <= K; ++k2) check({k1, k2});
  }
  return worst;
}

/// Runs verify_diophantine and, when it succeeds, returns a copy of omega
/// with the verified horizon raised to K. Unchanged otherwise.
inline Frequency certify_frequency(const Frequency& omega, int K) {
  if (verify_diophantine(omega, K)) return omega;
  return omega.with_verified_horizon(std::max(K, omega.verified_horizon()));
}

/// Real trigonometric polynomial lambda * sum_k c_k exp(2 pi i k.theta) on T^d.
class TrigPotential {
 public:
  struct Term {
    Mode k;
    std::complex<double> amplitude;
  };

  /// `terms` must list both k and -k with conjugate amplitudes.
  TrigPotential(int dim, std::vector<Term> terms, double strip_width, double coupling)
      : dim_(dim), strip_width_(strip_width), coupling_(coupling), terms_(std::move(terms)) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("TrigPotential: dimension must be 1 or 2");
    if (strip_width <= 0.0) throw std::invalid_argument("TrigPotential: strip width must be > 0");
    if (coupling < 0.0) throw std::invalid_argument("TrigPotential: coupling must be >= 0");
    double scale = 0.0;
    for (auto& t : terms_) {
      if (dim == 1) t.k[1] = 0;
      scale = std::max(scale, std::abs(t.amplitude));
    }
    const double tol = 1e-12 * std::max(scale, 1.0);
    for (const auto& t : terms_) {
      const Mode neg{-t.k[0], -t.k[1]};
      if (std::abs(amplitude(neg) - std::conj(amplitude(t.k))) > tol)
        throw std::invalid_argument("TrigPotential: coefficients are not conjugate-symmetric");
    }
    for (const auto& t : terms_) {
      if (t.k[0] == 0 && t.k[1] == 0) {
        constant_ += t.amplitude.real();
      } else if (t.k[0] > 0 || (t.k[0] == 0 && t.k[1] > 0)) {
        half_.push_back(t);
      }
    }
  }

  /// cos(2 pi theta) scaled by `coupling`.
  static TrigPotential cosine(double coupling, double strip_width = 1.0) {
    return TrigPotential(1, {{{1, 0}, 0.5}, {{-1, 0}, 0.5}}, strip_width, coupling);
  }

  /// cos(2 pi theta_1) + cos(2 pi theta_2) scaled by `coupling`.
  static TrigPotential cosine_sum_2d(double coupling, double strip_width = 1.0) {
    return TrigPotential(2, {{{1, 0}, 0.5}, {{-1, 0}, 0.5}, {{0, 1}, 0.5}, {{0, -1}, 0.5}},
                         strip_width, coupling);
  }

  static TrigPotential constant(double value, int dim = 1) {
    return TrigPotential(dim, {{{0, 0}, value}}, 1.0, 1.0);
  }

  static TrigPotential zero(int dim = 1) { return TrigPotential(dim, {}, 1.0, 1.0); }

  int dim() const { return dim_; }
  double strip_width() const { return strip_width_; }
  double coupling() const { return coupling_; }
  const std::vector<Term>& terms() const { return terms_; }

  /// Same Fourier coefficients with a different coupling.
  TrigPotential with_coupling(double coupling) const {
    return TrigPotential(dim_, terms_, strip_width_, coupling);
  }

  std::complex<double> amplitude(const Mode& k) const {
    std::complex<double> sum = 0.0;
    for (const auto& t : terms_)
      if (t.k == k) sum += t.amplitude;
    return sum;
  }

  int degree() const {
    int d = 0;
    for (const auto& t : terms_)
      if (t.amplitude != 0.0) d = std::max(d, l1_norm(t.k));
    return d;
  }

  bool is_constant() const {
    for (const auto& t : half_)
      if (t.amplitude != 0.0) return false;
    return true;
  }

  /// Real value lambda * v0(theta), summing each +-k pair as 2 Re(.).
  double operator()(const Phase& theta) const {
    double sum = constant_;
    for (const auto& t : half_) {
      const double arg = two_pi * wrap(t.k[0] * theta[0] + t.k[1] * theta[1]);
      sum += 2.0 * (t.amplitude.real() * std::cos(arg) - t.amplitude.imag() * std::sin(arg));
    }
    return coupling_ * sum;
  }

  /// Full complex Fourier sum over every stored mode, including the +-k
  /// partners; the imaginary part is rounding residue for a real potential.
  std::complex<double> fourier_sum(const Phase& theta) const {
    std::complex<double> sum = 0.0;
    for (const auto& t : terms_) {
      const double arg = two_pi * wrap(t.k[0] * theta[0] + t.k[1] * theta[1]);
      sum += t.amplitude * std::complex<double>(std::cos(arg), std::sin(arg));
    }
    return coupling_ * sum;
  }

  /// Holomorphic extension; no strip check (see eval_potential_complex).
  std::complex<double> extend(const ComplexPhase& z) const {
    std::complex<double> sum = constant_;
    const std::complex<double> i(0.0, 1.0);
    for (const auto& t : half_) {
      // Reduce the real part of k.z mod 1 before exponentiating.
      const std::complex<double> kz = double(t.k[0]) * z[0] + double(t.k[1]) * z[1];
      const std::complex<double> reduced(wrap(kz.real()), kz.imag());
      sum += t.amplitude * std::exp(two_pi * i * reduced) +
             std::conj(t.amplitude) * std::exp(-two_pi * i * reduced);
    }
    return coupling_ * sum;
  }

  /// sum_k |c_k| exp(2 pi |k|_1 y), times the coupling.
  double coefficient_bound(double y) const {
    double sum = 0.0;
    for (const auto& t : terms_) sum += std::abs(t.amplitude) * std::exp(two_pi * l1_norm(t.k) * y);
    return coupling_ * sum;
  }

  /// sum_k 2 pi |k|_1 |c_k| exp(2 pi |k|_1 y): Lipschitz constant in each real
  /// direction on the line Im z = y.
  double derivative_bound(double y) const {
    double sum = 0.0;
    for (const auto& t : terms_)
      sum += two_pi * l1_norm(t.k) * std::abs(t.amplitude) * std::exp(two_pi * l1_norm(t.k) * y);
    return coupling_ * sum;
  }

 private:
  int dim_;
  double strip_width_;
  double coupling_;
  std::vector<Term> terms_;
  double constant_ = 0.0;
  std::vector<Term> half_;
};

inline double eval_potential(const TrigPotential& v, const Phase& theta) { return v(theta); }

/// Analytic continuation of v; only defined for |Im z_j| < strip_width / 10.
inline std::complex<double> eval_potential_complex(const TrigPotential& v, const ComplexPhase& z) {
  for (int j = 0; j < v.dim(); ++j) {
    if (!(std::fabs(z[j].imag()) < v.strip_width() / 10.0))
      throw StripExceeded("|Im z| = " + std::to_string(std::fabs(z[j].imag())) +
                          " is outside the strip of half-width " +
                          std::to_string(v.strip_width() / 10.0));
  }
  return v.extend(z);
}

struct StripNorm {
  double bound;     ///< coefficient bound sum |c_k| exp(2 pi |k| rho)
  double estimate;  ///< refined grid maximum of |v| on the strip boundary
  double rho;       ///< half-width of the strip used
};

/// sup |v(z)| over |Im z_j| <= rho. The maximum sits on the distinguished
/// boundary Im z_j = +-rho, which is what the grid scans. Default rho is the
/// holomorphic strip strip_width / 10.
inline StripNorm strip_norm(const TrigPotential& v, std::optional<double> rho_eff = std::nullopt) {
  const double rho = rho_eff.value_or(v.strip_width() / 10.0);
  StripNorm out{v.coefficient_bound(rho), 0.0, rho};
  if (v.is_constant()) {
    out.estimate = std::abs(v.extend({0.0, 0.0}));
    out.bound = out.estimate;
    return out;
  }
  const int grid = v.dim() == 1 ? 2048 : 160;
  const int corners = v.dim() == 1 ? 2 : 4;
  double best = 0.0;
  Phase best_x{0.0, 0.0};
  // Scans a points^d grid of side `width` around `center` on every corner
  // Im z_j = +-rho of the distinguished boundary.
  auto scan = [&](const Phase& center, double width, int points) {
    const int rows = v.dim() == 2 ? points : 1;
    for (int corner = 0; corner < corners; ++corner) {
      const double y0 = (corner & 1) ? rho : -rho;
      const double y1 = v.dim() == 2 ? ((corner & 2) ? rho : -rho) : 0.0;
      for (int a = 0; a < points; ++a) {
        for (int b = 0; b < rows; ++b) {
          const double x0 = center[0] + width * (double(a) / points - 0.5);
          const double x1 = v.dim() == 2 ? center[1] + width * (double(b) / points - 0.5) : 0.0;
          const double m = std::abs(v.extend({std::complex<double>(x0, y0), std::complex<double>(x1, y1)}));
          if (m > best) {
            best = m;
            best_x = {x0, x1};
          }
        }
      }
    }
  };
  scan({0.5, 0.5}, 1.0, grid);
  double width = 4.0 / grid;
  for (int round = 0; round < 6; ++round, width /= 8.0) scan(best_x, width, 32);
  out.estimate = best;
  out.bound = std::max(out.bound, out.estimate);
  return out;
}

}  // namespace qplab
