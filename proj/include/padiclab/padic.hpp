#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "padiclab/errors.hpp"

namespace padiclab {

/// Valuation reported for the zero element.
inline constexpr int kInfiniteValuation = std::numeric_limits<int>::max();

/// Default number of significant base-p digits.
inline constexpr int kDefaultPrecision = 20;

bool is_prime(int n);

/// p^e as an unsigned 64-bit integer; throws DomainError on overflow.
std::uint64_t checked_pow(int p, int e);

/// Largest N such that p^N fits the 64-bit unit storage.
int max_precision(int p);

/**
 * Truncated element of Q_p.
 *
 * Stored as p^ord * unit where unit is an integer in [0, p^N) not divisible
 * by p; its base-p digits are the N significant digits of the expansion.
 * Arithmetic keeps N relative digits and truncates deterministically: digits
 * lost to cancellation are filled with zeros. Mixed-precision operands give a
 * result at the smaller precision.
 *
 * p^N must fit in 64 bits (N <= 39 for p = 3, N <= 63 for p = 2).
 */
class PAdic {
 public:
  struct Rational {
    std::int64_t numerator;
    std::int64_t denominator;
    bool operator==(const Rational&) const = default;
  };

  /// Zero of Q_2 at default precision; mostly useful as a placeholder.
  PAdic() : PAdic(zero(2, kDefaultPrecision)) {}

  static PAdic zero(int p, int precision);
  static PAdic one(int p, int precision) { return from_integer(1, p, precision); }
  static PAdic from_integer(std::int64_t value, int p, int precision);
  /// numerator/denominator; throws DomainError for a zero denominator.
  static PAdic from_rational(std::int64_t numerator, std::int64_t denominator, int p,
                             int precision);
  /// p^ord * unit; unit is reduced mod p^N and stripped of factors of p.
  static PAdic from_unit(int p, int precision, int ord, std::uint64_t unit);
  /// p^ord * sum_k digits[k] p^k, digits least significant first.
  static PAdic from_digits(int p, int precision, int ord, const std::vector<int>& digits);
  /// p^e exactly.
  static PAdic power_of_p(int e, int p, int precision);

  int prime() const noexcept { return p_; }
  int precision() const noexcept { return n_; }
  bool is_zero() const noexcept { return unit_ == 0; }
  /// ord_p(x); kInfiniteValuation for zero.
  int valuation() const noexcept { return ord_; }
  /// Unit part as an integer in [0, p^N).
  std::uint64_t unit() const noexcept { return unit_; }
  /// The N significant digits, least significant first (all zero for zero).
  std::vector<int> unit_digits() const;
  /// Coefficient of p^k in the expansion (0 outside the stored window).
  int digit(int k) const;

  /// |x|_p = p^{-ord}; 0 for zero.
  double norm() const;
  bool is_integral() const noexcept { return ord_ >= 0; }
  bool is_unit() const noexcept { return ord_ == 0; }

  /// x / p^{ord(x)}; zero maps to zero.
  PAdic unit_part() const;
  /// x modulo p^abs_precision (the canonical representative with digits
  /// below position abs_precision only).
  PAdic truncated(int abs_precision) const;
  PAdic with_precision(int precision) const;
  /// The p-adic fractional part sum_{k<0} d_k p^k in [0, 1).
  double fractional_part() const;
  /// Small rational with this expansion (Wang reconstruction on the unit),
  /// if one exists whose numerator and denominator fit in 64 bits.
  std::optional<Rational> to_rational() const;
  std::string to_string() const;

  PAdic operator-() const;
  PAdic& operator+=(const PAdic& o) { return *this = *this + o; }
  PAdic& operator-=(const PAdic& o) { return *this = *this - o; }
  PAdic& operator*=(const PAdic& o) { return *this = *this * o; }
  PAdic& operator/=(const PAdic& o) { return *this = *this / o; }
  friend PAdic operator+(const PAdic& a, const PAdic& b);
  friend PAdic operator-(const PAdic& a, const PAdic& b);
  friend PAdic operator*(const PAdic& a, const PAdic& b);
  /// Throws DomainError on a zero divisor.
  friend PAdic operator/(const PAdic& a, const PAdic& b);
  friend bool operator==(const PAdic& a, const PAdic& b) noexcept {
    return a.p_ == b.p_ && a.n_ == b.n_ && a.ord_ == b.ord_ && a.unit_ == b.unit_;
  }

  /// ord(a - b) >= abs_precision, i.e. a and b agree modulo p^abs_precision.
  friend bool agree_to(const PAdic& a, const PAdic& b, int abs_precision);

 private:
  PAdic(int p, int n, int ord, std::uint64_t unit) : p_(p), n_(n), ord_(ord), unit_(unit) {}

  int p_;
  int n_;
  int ord_;
  std::uint64_t unit_;
};

/// |x|^b = p^{-b ord x}, the magnitude of j_b(x); j_1(x) = x has magnitude |x|.
/// Throws DomainError for x = 0 or b outside (0, 1].
double j_b_norm(const PAdic& zeta, double b);

/// chi_1(x) = exp(2 pi i {x}_p), the rank-zero additive character of Q_p.
std::complex<double> additive_character(const PAdic& x);

/// Closed ball {x : |x - center| <= p^radius_exp}.
struct Ball {
  PAdic center;
  int radius_exp = 0;

  int prime() const { return center.prime(); }
  bool contains(const PAdic& x) const;
  /// Haar volume p^radius_exp (unit ball has volume 1).
  double volume() const;
  bool contains_ball(const Ball& other) const;
  bool disjoint_from(const Ball& other) const;
};

}  // namespace padiclab
