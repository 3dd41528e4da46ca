#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "padiclab/padic.hpp"
#include "test_support.hpp"

using namespace padiclab;

TEST_CASE("from_rational basic valuations") {
  const PAdic one = PAdic::from_rational(1, 1, 3, 8);
  CHECK(one.valuation() == 0);
  CHECK(one.unit_digits() == std::vector<int>{1, 0, 0, 0, 0, 0, 0, 0});

  const PAdic three = PAdic::from_rational(3, 1, 3, 8);
  CHECK(three.valuation() == 1);
  CHECK(three.digit(1) == 1);
  CHECK(three.unit_digits()[0] == 1);

  const PAdic third = PAdic::from_rational(1, 3, 3, 8);
  CHECK(third.valuation() == -1);

  CHECK_THROWS_AS(PAdic::from_rational(1, 0, 3, 8), DomainError);
  CHECK_THROWS_AS(PAdic::from_rational(1, 1, 4, 8), DomainError);
  CHECK_THROWS_AS(PAdic::from_rational(1, 1, 3, 60), DomainError);
}

TEST_CASE("rational round trip") {
  const int p = 5;
  for (std::int64_t num : {-7, -1, 1, 2, 3, 25, 130, 99}) {
    for (std::int64_t den : {1, 2, 3, 5, 7, 125, -4}) {
      const PAdic x = PAdic::from_rational(num, den, p, 20);
      const auto r = x.to_rational();
      REQUIRE(r.has_value());
      CHECK(r->numerator * den == num * r->denominator);
    }
  }
  // -1 in Z_3 is ...2222
  const PAdic m1 = PAdic::from_integer(-1, 3, 6);
  CHECK(m1.unit_digits() == std::vector<int>{2, 2, 2, 2, 2, 2});
}

TEST_CASE("field arithmetic") {
  const int p = 7, n = 12;
  const PAdic a = PAdic::from_rational(3, 49, p, n);
  const PAdic b = PAdic::from_rational(-5, 2, p, n);
  CHECK((a + b).to_rational()->numerator * 98 == (6 - 245) * (a + b).to_rational()->denominator);
  CHECK((a * b) / b == a);
  CHECK((a - a).is_zero());
  CHECK(-(-a) == a);
  CHECK_THROWS_AS(a / PAdic::zero(p, n), DomainError);
  // inverse of a unit
  const PAdic u = PAdic::from_integer(123456, p, n);
  CHECK(u * (PAdic::one(p, n) / u) == PAdic::one(p, n));
}

TEST_CASE("norm definition") {
  CHECK(PAdic::zero(5, 10).norm() == 0.0);
  CHECK(PAdic::from_integer(5, 5, 10).norm() == doctest::Approx(1.0 / 5.0));
  CHECK(PAdic::from_rational(1, 25, 5, 10).norm() == doctest::Approx(25.0));
}

TEST_CASE("norm multiplicativity and strong triangle inequality, exhaustive") {
  // Every element p^o * u with o in [-2, 2] and u ranging over all units with
  // three digits; valuations make both properties exact integer statements.
  const int p = 3, n = 10;
  std::vector<PAdic> xs;
  for (int o = -2; o <= 2; ++o) {
    for (std::uint64_t u = 1; u < 27; ++u) {
      if (u % 3 != 0) xs.push_back(PAdic::from_unit(p, n, o, u));
    }
  }
  for (const auto& x : xs) {
    for (const auto& y : xs) {
      CHECK((x * y).valuation() == x.valuation() + y.valuation());
      const PAdic s = x + y;
      if (x.valuation() != y.valuation()) {
        CHECK(s.valuation() == std::min(x.valuation(), y.valuation()));
      } else {
        CHECK((s.is_zero() || s.valuation() >= x.valuation()));
      }
    }
  }
}

TEST_CASE("norm properties on random pairs") {
  std::mt19937_64 rng(17);
  for (int p : {2, 3, 5, 7}) {
    for (int i = 0; i < 2500; ++i) {
      const PAdic x = testing::random_padic(rng, p, 16, -4, 4);
      const PAdic y = testing::random_padic(rng, p, 16, -4, 4);
      // exact at the valuation level; the double norms agree to rounding
      CHECK((x * y).valuation() == x.valuation() + y.valuation());
      CHECK((x * y).norm() == doctest::Approx(x.norm() * y.norm()).epsilon(1e-15));
      const PAdic s = x + y;
      CHECK(s.norm() <= std::max(x.norm(), y.norm()));
      if (x.norm() != y.norm()) CHECK(s.norm() == std::max(x.norm(), y.norm()));
    }
  }
}

TEST_CASE("truncation is deterministic") {
  const PAdic x = PAdic::from_digits(3, 6, 0, {1, 2, 0, 1, 2, 2});
  const PAdic t = x.truncated(3);
  CHECK(t.unit_digits() == std::vector<int>{1, 2, 0, 0, 0, 0});
  CHECK(agree_to(x, t, 3));
  CHECK_FALSE(agree_to(x, t, 4));
  // cancellation pads with zeros
  const PAdic y = PAdic::from_digits(3, 6, 0, {1, 2, 0, 1, 0, 0});
  const PAdic d = x - y;
  CHECK(d.valuation() == 4);
  CHECK(d.unit_digits() == std::vector<int>{2, 2, 0, 0, 0, 0});
}

TEST_CASE("j_b magnitude") {
  const int p = 3;
  const PAdic zp = PAdic::from_integer(p, p, 10);
  CHECK(j_b_norm(zp, 0.5) == doctest::Approx(std::pow(3.0, -0.5)));
  CHECK(j_b_norm(PAdic::from_integer(2, p, 10), 0.3) == 1.0);
  const PAdic z = PAdic::from_rational(5, 9, p, 10);
  CHECK(j_b_norm(z, 1.0) == doctest::Approx(z.norm()));
  CHECK_THROWS_AS(j_b_norm(PAdic::zero(p, 10), 0.5), DomainError);
  CHECK_THROWS_AS(j_b_norm(z, 1.5), DomainError);
}

TEST_CASE("additive character") {
  for (int p : {2, 3, 5}) {
    CHECK(additive_character(PAdic::from_integer(7, p, 10)) == std::complex<double>(1.0, 0.0));
    const auto c = additive_character(PAdic::from_rational(1, p, p, 10));
    const auto expected = std::polar(1.0, 2.0 * std::numbers::pi / p);
    CHECK(std::abs(c - expected) < 1e-14);
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const PAdic x = testing::random_padic(rng, 3, 16, -5, 2);
    const PAdic y = testing::random_padic(rng, 3, 16, -5, 2);
    CHECK(std::abs(additive_character(x + y) - additive_character(x) * additive_character(y)) <
          1e-12);
    CHECK(std::abs(std::abs(additive_character(x)) - 1.0) < 1e-14);
  }
}

TEST_CASE("character orthogonality over p^-k Z_p / Z_p") {
  // For x in Z_p: (1/p^k) sum_r chi(x r) = 1 if |x| <= p^-k, else 0.
  for (int p : {2, 3, 5}) {
    for (int k = 1; k <= 3; ++k) {
      const std::uint64_t count = checked_pow(p, k);
      for (int ordx = 0; ordx <= k + 1; ++ordx) {
        const PAdic x = PAdic::from_unit(p, 16, ordx, 1 + (p > 2 ? 1 : 0));
        std::complex<double> sum = 0;
        for (std::uint64_t r = 0; r < count; ++r) {
          sum += additive_character(x * PAdic::from_unit(p, 16, -k, r));
        }
        sum /= static_cast<double>(count);
        const double expected = ordx >= k ? 1.0 : 0.0;
        CHECK(std::abs(sum - expected) < 1e-12);
      }
    }
  }
}

TEST_CASE("balls are nested or disjoint") {
  const int p = 3;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 400; ++i) {
    Ball a{testing::random_padic(rng, p, 12, -2, 3), std::uniform_int_distribution<int>(-3, 2)(rng)};
    Ball b{testing::random_padic(rng, p, 12, -2, 3), std::uniform_int_distribution<int>(-3, 2)(rng)};
    const bool nested = a.contains_ball(b) || b.contains_ball(a);
    CHECK(nested != a.disjoint_from(b));
  }
  Ball unit{PAdic::zero(p, 12), 0};
  CHECK(unit.volume() == 1.0);
  CHECK(unit.contains(PAdic::from_integer(7, p, 12)));
  CHECK_FALSE(unit.contains(PAdic::from_rational(1, 3, p, 12)));
}
