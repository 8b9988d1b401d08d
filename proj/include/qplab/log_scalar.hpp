#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <utility>

namespace qplab {

/// A real number stored as (sign, log|x|). Products of thousands of transfer
/// matrices or Green's-function factors stay representable this way.
///
/// `sign == 0` iff the value is exactly zero, in which case `log_mag == -inf`.
class LogScalar {
 public:
  constexpr LogScalar() = default;

  static LogScalar from_double(double x) {
    if (x == 0.0) return {};
    return LogScalar(x > 0.0 ? 1 : -1, std::log(std::fabs(x)));
  }

  /// Builds sign * exp(log_mag). A sign of zero yields the zero value.
  static LogScalar from_log(int sign, double log_mag) {
    if (sign == 0 || log_mag == -std::numeric_limits<double>::infinity()) return {};
    return LogScalar(sign > 0 ? 1 : -1, log_mag);
  }

  static LogScalar one() { return LogScalar(1, 0.0); }

  int sign() const { return sign_; }
  double log_mag() const { return log_mag_; }
  bool is_zero() const { return sign_ == 0; }

  /// Overflows to +-inf and underflows to +-0 outside the double range.
  double to_double() const { return sign_ == 0 ? 0.0 : sign_ * std::exp(log_mag_); }

  LogScalar abs() const { return sign_ == 0 ? LogScalar() : LogScalar(1, log_mag_); }

  LogScalar operator-() const { return sign_ == 0 ? LogScalar() : LogScalar(-sign_, log_mag_); }

  friend LogScalar operator*(LogScalar a, LogScalar b) {
    if (a.sign_ == 0 || b.sign_ == 0) return {};
    return LogScalar(a.sign_ * b.sign_, a.log_mag_ + b.log_mag_);
  }

  friend LogScalar operator/(LogScalar a, LogScalar b) {
    if (b.sign_ == 0) {
      return a.sign_ == 0 ? LogScalar::nan()
                          : LogScalar(a.sign_, std::numeric_limits<double>::infinity());
    }
    if (a.sign_ == 0) return {};
    return LogScalar(a.sign_ * b.sign_, a.log_mag_ - b.log_mag_);
  }

  friend LogScalar operator+(LogScalar a, LogScalar b) {
    if (a.sign_ == 0) return b;
    if (b.sign_ == 0) return a;
    if (a.log_mag_ < b.log_mag_) std::swap(a, b);
    const double ratio = std::exp(b.log_mag_ - a.log_mag_);
    if (a.sign_ == b.sign_) return LogScalar(a.sign_, a.log_mag_ + std::log1p(ratio));
    if (ratio == 1.0) return {};
    return LogScalar(a.sign_, a.log_mag_ + std::log1p(-ratio));
  }

  friend LogScalar operator-(LogScalar a, LogScalar b) { return a + (-b); }

  LogScalar& operator*=(LogScalar o) { return *this = *this * o; }
  LogScalar& operator/=(LogScalar o) { return *this = *this / o; }
  LogScalar& operator+=(LogScalar o) { return *this = *this + o; }
  LogScalar& operator-=(LogScalar o) { return *this = *this - o; }

  friend bool operator<(LogScalar a, LogScalar b) {
    if (a.sign_ != b.sign_) return a.sign_ < b.sign_;
    if (a.sign_ == 0) return false;
    return a.sign_ > 0 ? a.log_mag_ < b.log_mag_ : a.log_mag_ > b.log_mag_;
  }
  friend bool operator>(LogScalar a, LogScalar b) { return b < a; }
  friend bool operator==(LogScalar a, LogScalar b) {
    return a.sign_ == b.sign_ && (a.sign_ == 0 || a.log_mag_ == b.log_mag_);
  }

  friend std::ostream& operator<<(std::ostream& os, LogScalar x) {
    return os << (x.sign_ < 0 ? "-" : x.sign_ > 0 ? "+" : "0") << "exp(" << x.log_mag_ << ")";
  }

 private:
  constexpr LogScalar(int sign, double log_mag) : sign_(sign), log_mag_(log_mag) {}

  static LogScalar nan() { return LogScalar(1, std::numeric_limits<double>::quiet_NaN()); }

  int sign_ = 0;
  double log_mag_ = -std::numeric_limits<double>::infinity();
};

/// |a - b| / max(|a|, |b|), evaluated without leaving log space. Zero when both
/// are zero; 1 when exactly one is zero; up to 2 for opposite signs.
inline double relative_difference(LogScalar a, LogScalar b) {
  if (a.is_zero() && b.is_zero()) return 0.0;
  const LogScalar diff = (a - b).abs();
  const double scale = std::max(a.log_mag(), b.log_mag());
  if (diff.is_zero()) return 0.0;
  return std::exp(diff.log_mag() - scale);
}

}  // namespace qplab
