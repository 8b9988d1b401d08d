#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <type_traits>

#include "qplab/log_scalar.hpp"

namespace qplab {

/// Row-major 2x2 matrix {a, b, c, d} = [[a, b], [c, d]].
template <typename T>
using Matrix2 = std::array<T, 4>;

namespace detail {

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};

inline double abs2(double x) { return x * x; }
inline double abs2(const std::complex<double>& z) { return std::norm(z); }

}  // namespace detail

template <typename T>
Matrix2<T> multiply(const Matrix2<T>& l, const Matrix2<T>& r) {
  return {l[0] * r[0] + l[1] * r[2], l[0] * r[1] + l[1] * r[3],
          l[2] * r[0] + l[3] * r[2], l[2] * r[1] + l[3] * r[3]};
}

template <typename T>
T determinant(const Matrix2<T>& m) {
  return m[0] * m[3] - m[1] * m[2];
}

template <typename T>
double frobenius_norm(const Matrix2<T>& m) {
  return std::sqrt(detail::abs2(m[0]) + detail::abs2(m[1]) + detail::abs2(m[2]) +
                   detail::abs2(m[3]));
}

/// Largest singular value, closed form.
template <typename T>
double operator_norm(const Matrix2<T>& m) {
  if constexpr (detail::is_complex<T>::value) {
    const double f2 = detail::abs2(m[0]) + detail::abs2(m[1]) + detail::abs2(m[2]) +
                      detail::abs2(m[3]);
    const double det = std::abs(determinant(m));
    const double disc = std::max(0.0, (f2 - 2.0 * det) * (f2 + 2.0 * det));
    return std::sqrt(0.5 * (f2 + std::sqrt(disc)));
  } else {
    // s_max = (|(a+d, c-b)| + |(a-d, b+c)|) / 2
    return 0.5 * (std::hypot(m[0] + m[3], m[2] - m[1]) + std::hypot(m[0] - m[3], m[1] + m[2]));
  }
}

/// A 2x2 matrix represented as exp(log_scale) * entries. After renormalize()
/// the Frobenius norm of `entries` lies in [1, 2) unless the matrix is zero.
/// Rescaling uses exact powers of two, so it never perturbs the represented value.
template <typename T>
class ScaledMatrix2 {
 public:
  ScaledMatrix2() : entries_{T(1), T(0), T(0), T(1)}, log_scale_(0.0) {}
  explicit ScaledMatrix2(const Matrix2<T>& entries, double log_scale = 0.0)
      : entries_(entries), log_scale_(log_scale) {
    renormalize();
  }

  static ScaledMatrix2 identity() { return ScaledMatrix2(); }

  const Matrix2<T>& entries() const { return entries_; }
  double log_scale() const { return log_scale_; }

  void renormalize() {
    const double f = frobenius_norm(entries_);
    if (f == 0.0 || !std::isfinite(f)) return;
    int exponent = 0;
    std::frexp(f, &exponent);  // f = m * 2^exponent, m in [0.5, 1)
    const int shift = 1 - exponent;
    for (auto& e : entries_) {
      if constexpr (detail::is_complex<T>::value)
        e = T(std::ldexp(e.real(), shift), std::ldexp(e.imag(), shift));
      else
        e = std::ldexp(e, shift);
    }
    log_scale_ -= shift * std::log(2.0);
  }

  /// this <- step * this
  void left_multiply(const Matrix2<T>& step) {
    entries_ = multiply(step, entries_);
    renormalize();
  }

  friend ScaledMatrix2 operator*(const ScaledMatrix2& l, const ScaledMatrix2& r) {
    return ScaledMatrix2(multiply(l.entries_, r.entries_), l.log_scale_ + r.log_scale_);
  }

  /// log of the operator (spectral) norm of the represented matrix.
  double log_norm() const { return log_scale_ + std::log(operator_norm(entries_)); }

  /// log |det| of the represented matrix.
  double log_abs_det() const { return 2.0 * log_scale_ + std::log(std::abs(determinant(entries_))); }

  /// Represented entry i (row-major) in signed-log form. Real matrices only.
  LogScalar entry(int i) const
    requires(!detail::is_complex<T>::value)
  {
    const LogScalar unit = LogScalar::from_double(entries_[i]);
    return unit * LogScalar::from_log(1, log_scale_);
  }

  /// log |entry i| of the represented matrix.
  double log_abs_entry(int i) const { return log_scale_ + std::log(std::abs(entries_[i])); }

  /// Represented matrix as plain numbers; overflows for large log_scale.
  Matrix2<T> to_matrix() const {
    const double s = std::exp(log_scale_);
    return {entries_[0] * s, entries_[1] * s, entries_[2] * s, entries_[3] * s};
  }

 private:
  Matrix2<T> entries_;
  double log_scale_;
};

}  // namespace qplab
