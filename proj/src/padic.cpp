#include "padiclab/padic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace padiclab {

namespace {

using u128 = unsigned __int128;
using i128 = __int128;

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  if (m <= (std::uint64_t{1} << 32)) return (a % m) * (b % m) % m;
  return static_cast<std::uint64_t>((static_cast<u128>(a) * b) % m);
}

std::uint64_t addmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  if (m <= (std::uint64_t{1} << 62)) return (a % m + b % m) % m;
  return static_cast<std::uint64_t>((static_cast<u128>(a) + b) % m);
}

// Inverse of a unit modulo p^N by Newton lifting from the inverse mod p.
std::uint64_t inverse_mod_pn(std::uint64_t unit, int p, std::uint64_t modulus) {
  std::uint64_t a = unit % static_cast<std::uint64_t>(p);
  std::uint64_t x = 1;
  for (std::uint64_t c = 1; c < static_cast<std::uint64_t>(p); ++c) {
    if ((a * c) % static_cast<std::uint64_t>(p) == 1) {
      x = c;
      break;
    }
  }
  // x <- x (2 - unit x) doubles the number of correct digits each round.
  for (int round = 0; round < 7; ++round) {
    std::uint64_t ux = mulmod(unit % modulus, x, modulus);
    std::uint64_t two_minus = addmod(2 % modulus, modulus - ux, modulus);
    x = mulmod(x, two_minus, modulus);
  }
  return x;
}

void check_prime(int p) {
  if (!is_prime(p)) throw DomainError("p = " + std::to_string(p) + " is not a prime");
}

void check_precision(int p, int n) {
  if (n < 1 || n > max_precision(p)) {
    throw DomainError("precision " + std::to_string(n) + " unsupported for p = " +
                      std::to_string(p) + " (max " + std::to_string(max_precision(p)) + ")");
  }
}

void check_compatible(const PAdic& a, const PAdic& b) {
  if (a.prime() != b.prime()) throw DomainError("mixing elements of Q_p for different p");
}

}  // namespace

bool is_prime(int n) {
  if (n < 2) return false;
  if (n < 8) return n != 4 && n != 6;
  for (int d = 2; d * d <= n; ++d) {
    if (n % d == 0) return false;
  }
  return true;
}

namespace {

constexpr int kTablePrimes = 128;

// p^e for p < 128 and e <= 64; 0 marks an overflow.
const std::array<std::array<std::uint64_t, 65>, kTablePrimes>& power_table() {
  static const auto table = [] {
    std::array<std::array<std::uint64_t, 65>, kTablePrimes> t{};
    for (int p = 2; p < kTablePrimes; ++p) {
      u128 r = 1;
      for (int e = 0; e <= 64; ++e) {
        t[static_cast<std::size_t>(p)][static_cast<std::size_t>(e)] =
            r > std::numeric_limits<std::uint64_t>::max() ? 0 : static_cast<std::uint64_t>(r);
        if (r <= std::numeric_limits<std::uint64_t>::max()) r *= static_cast<u128>(p);
      }
    }
    return t;
  }();
  return table;
}

}  // namespace

std::uint64_t checked_pow(int p, int e) {
  if (e < 0) throw DomainError("negative exponent in checked_pow");
  if (p >= 2 && p < kTablePrimes && e <= 64) {
    const std::uint64_t v = power_table()[static_cast<std::size_t>(p)][static_cast<std::size_t>(e)];
    if (v != 0) return v;
    throw DomainError("p^e overflows 64 bits");
  }
  u128 r = 1;
  for (int i = 0; i < e; ++i) {
    r *= static_cast<u128>(p);
    if (r > std::numeric_limits<std::uint64_t>::max()) {
      throw DomainError("p^e overflows 64 bits");
    }
  }
  return static_cast<std::uint64_t>(r);
}

int max_precision(int p) {
  if (p >= 2 && p < kTablePrimes) {
    static const auto limits = [] {
      std::array<int, kTablePrimes> out{};
      for (std::size_t q = 2; q < out.size(); ++q) {
        const auto& row = power_table()[q];
        while (out[q] < 64 && row[static_cast<std::size_t>(out[q]) + 1] != 0) ++out[q];
      }
      return out;
    }();
    return limits[static_cast<std::size_t>(p)];
  }
  u128 r = 1;
  int e = 0;
  while (r * static_cast<u128>(p) <= std::numeric_limits<std::uint64_t>::max()) {
    r *= static_cast<u128>(p);
    ++e;
  }
  return e;
}

PAdic PAdic::zero(int p, int precision) {
  check_prime(p);
  check_precision(p, precision);
  return PAdic(p, precision, kInfiniteValuation, 0);
}

PAdic PAdic::from_unit(int p, int precision, int ord, std::uint64_t unit) {
  check_prime(p);
  check_precision(p, precision);
  const std::uint64_t modulus = checked_pow(p, precision);
  unit %= modulus;
  if (unit == 0) return PAdic(p, precision, kInfiniteValuation, 0);
  while (unit % static_cast<std::uint64_t>(p) == 0) {
    unit /= static_cast<std::uint64_t>(p);
    ++ord;
  }
  return PAdic(p, precision, ord, unit);
}

PAdic PAdic::from_integer(std::int64_t value, int p, int precision) {
  return from_rational(value, 1, p, precision);
}

PAdic PAdic::from_rational(std::int64_t numerator, std::int64_t denominator, int p,
                           int precision) {
  check_prime(p);
  check_precision(p, precision);
  if (denominator == 0) throw DomainError("zero denominator");
  if (numerator == 0) return zero(p, precision);
  i128 num = numerator;
  i128 den = denominator;
  int ord = 0;
  while (num % p == 0) {
    num /= p;
    ++ord;
  }
  while (den % p == 0) {
    den /= p;
    --ord;
  }
  const std::uint64_t modulus = checked_pow(p, precision);
  const i128 m = static_cast<i128>(modulus);
  auto reduce = [m](i128 v) { return static_cast<std::uint64_t>(((v % m) + m) % m); };
  std::uint64_t u = mulmod(reduce(num), inverse_mod_pn(reduce(den), p, modulus), modulus);
  return PAdic(p, precision, ord, u);
}

PAdic PAdic::from_digits(int p, int precision, int ord, const std::vector<int>& digits) {
  check_prime(p);
  check_precision(p, precision);
  std::uint64_t unit = 0;
  std::uint64_t scale = 1;
  const int count = std::min<int>(precision, static_cast<int>(digits.size()));
  for (int k = 0; k < count; ++k) {
    if (digits[k] < 0 || digits[k] >= p) throw DomainError("digit out of range");
    unit += scale * static_cast<std::uint64_t>(digits[k]);
    if (k + 1 < count) scale *= static_cast<std::uint64_t>(p);
  }
  return from_unit(p, precision, ord, unit);
}

PAdic PAdic::power_of_p(int e, int p, int precision) { return from_unit(p, precision, e, 1); }

std::vector<int> PAdic::unit_digits() const {
  std::vector<int> out(static_cast<std::size_t>(n_), 0);
  std::uint64_t u = unit_;
  for (int k = 0; k < n_ && u != 0; ++k) {
    out[k] = static_cast<int>(u % static_cast<std::uint64_t>(p_));
    u /= static_cast<std::uint64_t>(p_);
  }
  return out;
}

int PAdic::digit(int k) const {
  if (is_zero()) return 0;
  const long long rel = static_cast<long long>(k) - ord_;
  if (rel < 0 || rel >= n_) return 0;
  std::uint64_t u = unit_;
  for (long long i = 0; i < rel; ++i) u /= static_cast<std::uint64_t>(p_);
  return static_cast<int>(u % static_cast<std::uint64_t>(p_));
}

double PAdic::norm() const {
  if (is_zero()) return 0.0;
  return std::pow(static_cast<double>(p_), -static_cast<double>(ord_));
}

PAdic PAdic::unit_part() const {
  if (is_zero()) return *this;
  return PAdic(p_, n_, 0, unit_);
}

PAdic PAdic::truncated(int abs_precision) const {
  if (is_zero() || ord_ >= abs_precision) return PAdic(p_, n_, kInfiniteValuation, 0);
  const long long keep = static_cast<long long>(abs_precision) - ord_;
  if (keep >= n_) return *this;
  return from_unit(p_, n_, ord_, unit_ % checked_pow(p_, static_cast<int>(keep)));
}

PAdic PAdic::with_precision(int precision) const {
  check_precision(p_, precision);
  if (is_zero()) return PAdic(p_, precision, kInfiniteValuation, 0);
  if (precision >= n_) return PAdic(p_, precision, ord_, unit_);
  return from_unit(p_, precision, ord_, unit_ % checked_pow(p_, precision));
}

double PAdic::fractional_part() const {
  if (is_zero() || ord_ >= 0) return 0.0;
  const long long k = -static_cast<long long>(ord_);
  if (k >= n_) {
    return static_cast<double>(static_cast<long double>(unit_) /
                               std::pow(static_cast<long double>(p_), static_cast<long double>(k)));
  }
  const std::uint64_t pk = checked_pow(p_, static_cast<int>(k));
  return static_cast<double>(static_cast<long double>(unit_ % pk) / static_cast<long double>(pk));
}

std::optional<PAdic::Rational> PAdic::to_rational() const {
  if (is_zero()) return Rational{0, 1};
  const std::uint64_t modulus = checked_pow(p_, n_);
  const i128 bound = static_cast<i128>(std::sqrt(static_cast<long double>(modulus) / 2.0L));
  i128 r0 = modulus, r1 = unit_;
  i128 s0 = 0, s1 = 1;
  while (r1 > bound) {
    const i128 q = r0 / r1;
    const i128 r2 = r0 - q * r1;
    const i128 s2 = s0 - q * s1;
    r0 = r1;
    r1 = r2;
    s0 = s1;
    s1 = s2;
  }
  if (s1 == 0) return std::nullopt;
  if (s1 < 0) {
    s1 = -s1;
    r1 = -r1;
  }
  if (s1 > bound) return std::nullopt;
  i128 num = r1, den = s1;
  const i128 limit = std::numeric_limits<std::int64_t>::max();
  for (int i = 0; i < std::abs(ord_); ++i) {
    if (ord_ > 0) {
      num *= p_;
    } else {
      den *= p_;
    }
    if (num > limit || num < -limit || den > limit) return std::nullopt;
  }
  return Rational{static_cast<std::int64_t>(num), static_cast<std::int64_t>(den)};
}

std::string PAdic::to_string() const {
  if (is_zero()) return "0 (p=" + std::to_string(p_) + ")";
  std::ostringstream os;
  const auto digits = unit_digits();
  int top = n_ - 1;
  while (top > 0 && digits[top] == 0) --top;
  for (int k = top; k >= 0; --k) {
    os << digits[k];
    if (p_ > 10 && k > 0) os << ',';
  }
  os << " * " << p_ << '^' << ord_;
  return os.str();
}

PAdic PAdic::operator-() const {
  if (is_zero()) return *this;
  return PAdic(p_, n_, ord_, checked_pow(p_, n_) - unit_);
}

PAdic operator+(const PAdic& a, const PAdic& b) {
  check_compatible(a, b);
  const int n = std::min(a.n_, b.n_);
  if (a.is_zero()) return b.with_precision(n);
  if (b.is_zero()) return a.with_precision(n);
  const PAdic& lo = a.ord_ <= b.ord_ ? a : b;
  const PAdic& hi = a.ord_ <= b.ord_ ? b : a;
  const long long shift = static_cast<long long>(hi.ord_) - lo.ord_;
  if (shift >= n) return lo.with_precision(n);
  const std::uint64_t modulus = checked_pow(a.p_, n);
  const std::uint64_t lo_unit = lo.unit_ % modulus;
  const std::uint64_t hi_unit = hi.unit_ % modulus;
  const std::uint64_t shifted = mulmod(hi_unit, checked_pow(a.p_, static_cast<int>(shift)), modulus);
  return PAdic::from_unit(a.p_, n, lo.ord_, addmod(lo_unit, shifted, modulus));
}

PAdic operator-(const PAdic& a, const PAdic& b) { return a + (-b); }

PAdic operator*(const PAdic& a, const PAdic& b) {
  check_compatible(a, b);
  const int n = std::min(a.n_, b.n_);
  if (a.is_zero() || b.is_zero()) return PAdic(a.p_, n, kInfiniteValuation, 0);
  const std::uint64_t modulus = checked_pow(a.p_, n);
  return PAdic(a.p_, n, a.ord_ + b.ord_, mulmod(a.unit_ % modulus, b.unit_ % modulus, modulus));
}

PAdic operator/(const PAdic& a, const PAdic& b) {
  check_compatible(a, b);
  if (b.is_zero()) throw DomainError("division by zero in Q_p");
  const int n = std::min(a.n_, b.n_);
  if (a.is_zero()) return PAdic(a.p_, n, kInfiniteValuation, 0);
  const std::uint64_t modulus = checked_pow(a.p_, n);
  const std::uint64_t inv = inverse_mod_pn(b.unit_ % modulus, a.p_, modulus);
  return PAdic(a.p_, n, a.ord_ - b.ord_, mulmod(a.unit_ % modulus, inv, modulus));
}

bool agree_to(const PAdic& a, const PAdic& b, int abs_precision) {
  const PAdic d = a - b;
  return d.is_zero() || d.valuation() >= abs_precision;
}

double j_b_norm(const PAdic& zeta, double b) {
  if (zeta.is_zero()) throw DomainError("j_b is evaluated on the zero flag");
  if (!(b > 0.0 && b <= 1.0)) throw DomainError("j_b requires b in (0, 1]");
  return std::pow(static_cast<double>(zeta.prime()), -b * zeta.valuation());
}

std::complex<double> additive_character(const PAdic& x) {
  const double frac = x.fractional_part();
  if (frac == 0.0) return {1.0, 0.0};
  return std::polar(1.0, 2.0 * std::numbers::pi * frac);
}

bool Ball::contains(const PAdic& x) const {
  const PAdic d = x - center;
  return d.is_zero() || d.valuation() >= -radius_exp;
}

double Ball::volume() const { return std::pow(static_cast<double>(prime()), radius_exp); }

bool Ball::contains_ball(const Ball& other) const {
  return other.radius_exp <= radius_exp && contains(other.center);
}

bool Ball::disjoint_from(const Ball& other) const {
  return !contains(other.center) && !other.contains(center);
}

}  // namespace padiclab
