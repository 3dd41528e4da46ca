#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "padiclab/measures.hpp"
#include "padiclab/random.hpp"

using namespace padiclab;

namespace {

constexpr int kPrec = 20;

PAdic I(std::int64_t v, int p = 3) { return PAdic::from_integer(v, p, kPrec); }
PAdic Q(std::int64_t a, std::int64_t b, int p = 3) { return PAdic::from_rational(a, b, p, kPrec); }
PAdic pw(int e, int p = 3) { return PAdic::power_of_p(e, p, kPrec); }

// int_{|xi| <= p^-r} exp(-beta |xi|^q) dxi, summed shell by shell.
double gaussian_ball(int p, double beta, double q, int r) {
  double sum = 0.0;
  for (int k = -r; k > -r - 400; --k) {
    sum += std::pow(p, k) * (1.0 - 1.0 / p) * std::exp(-beta * std::pow(p, k * q));
  }
  return sum;
}

// g(u) = int exp(-beta |xi|^q) chi_1(-u xi) dxi by a lattice Fourier transform
// over |xi| <= p^M at resolution p^-N; the central cell is integrated exactly.
struct ProfileTable {
  int p;
  LatticeFunction g;

  ProfileTable(int p_, double beta, double q, int M, int N) : p(p_), g(LatticeSpec{p_, 0, 0}) {
    const LatticeSpec xi{p, M, N};
    LatticeFunction w(xi);
    for (std::uint64_t i = 1; i < xi.size(); ++i) w.values[i] = std::exp(-beta * std::pow(xi.norm(i), q));
    w.values[0] = gaussian_ball(p, beta, q, N) / xi.cell_volume();
    g = inverse_fourier(w);
  }

  double at(const PAdic& u) const {
    const auto i = g.spec.index_of(u);
    REQUIRE(i.has_value());
    return g.values[*i].real();
  }
  // |u| = p^j
  double radial(int j) const { return at(pw(-j, p)); }
};

double chi_square(const std::vector<double>& expected_prob, const std::vector<double>& counts) {
  double n = 0.0;
  for (double c : counts) n += c;
  double chi = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = n * expected_prob[i];
    chi += (counts[i] - e) * (counts[i] - e) / e;
  }
  return chi;
}

SecondTypeSpec three_balls(bool with_h) {
  SecondTypeSpec s{3,
                   {{Ball{I(0), 0}, 0.5}, {Ball{Q(1, 3), 0}, 0.3}, {Ball{Q(2, 3), 0}, 0.2}},
                   {}};
  if (with_h) s.h = {{Ball{I(0), -1}, 0.1}, {Ball{I(1), -1}, -0.1}, {Ball{Q(1, 3), -2}, 0.05},
                     {Ball{Q(1, 3) + I(1), -2}, -0.05}};
  return s;
}

ProductMeasureSpec qgauss_product(std::size_t K, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ProductMeasureSpec spec;
  for (std::size_t k = 0; k < K; ++k) {
    const double beta = 0.5 + uniform01(rng);
    const PAdic gamma = k % 3 == 0 ? I(0) : Q(static_cast<std::int64_t>(uniform_below(rng, 27)), 9);
    spec.factors.push_back(
        make_factor(QGaussianSpec::make(3, beta, 1.5, gamma), pw(static_cast<int>(k % 3) - 1)));
  }
  return spec;
}

ProductMeasureSpec second_type_product(std::size_t K) {
  ProductMeasureSpec spec;
  for (std::size_t k = 0; k < K; ++k) {
    spec.factors.push_back(make_factor(three_balls(k % 2 == 0), pw(-static_cast<int>(k % 4))));
  }
  return spec;
}

PAdic random_padic(std::mt19937_64& rng, int low_ord) {
  return PAdic::from_unit(3, kPrec, low_ord, uniform_below(rng, 19683));
}

}  // namespace

TEST_CASE("q-Gaussian profile against a lattice Fourier transform") {
  for (auto [p, beta, q] : {std::tuple{3, 1.0, 1.5}, std::tuple{2, 0.7, 2.0}, std::tuple{5, 2.0, 0.8}}) {
    CAPTURE(p);
    const ProfileTable table(p, beta, q, 6, 4);
    for (int j = -5; j <= 4; ++j) {
      const double oracle = table.radial(j);
      CHECK(std::abs(qgauss_profile(p, beta, q, j) - oracle) <= 1e-12 * std::abs(oracle) + 1e-15);
    }
    const double origin = table.at(PAdic::zero(p, kPrec));
    // the table's central cell mixes |u| <= p^-6 values, all within 1e-3 of g(0)
    CHECK(qgauss_profile_at_origin(p, beta, q) == doctest::Approx(origin).epsilon(1e-3));
    for (int r = -3; r <= 4; ++r) {
      CHECK(qgauss_ball_integral(p, beta, q, r) ==
            doctest::Approx(std::pow(p, r) * gaussian_ball(p, beta, q, r)).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(QGaussianSpec::make(3, -1.0, 1.0), SpecError);
  CHECK_THROWS_AS(QGaussianSpec::make(3, 1.0, 0.0), SpecError);
  CHECK_THROWS_AS(QGaussianSpec::make(4, 1.0, 1.0), SpecError);
}

TEST_CASE("q-Gaussian density") {
  const auto spec = QGaussianSpec::make(3, 1.0, 1.5);
  const LatticeSpec s{3, 4, 4};
  SUBCASE("radial for gamma = 0") {
    std::map<int, double> by_norm;
    for (std::uint64_t i = 1; i < s.size(); ++i) {
      const double f = qgauss_density(spec, s.point(i));
      const int j = -s.point(i).valuation();
      if (auto [it, fresh] = by_norm.emplace(j, f); !fresh) CHECK(it->second == f);
    }
    CHECK(by_norm.size() == 8);
  }
  SUBCASE("nonnegative with unit mass on m = n = 4") {
    double total = 0.0;
    for (std::uint64_t i = 0; i < s.size(); ++i) {
      const double mass = ball_mass(make_factor(spec, I(1)), Ball{s.point(i), -4});
      CHECK(mass >= 0.0);
      CHECK(qgauss_density(spec, s.point(i)) >= 0.0);
      total += mass;
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
    // densities on off-centre cells times the cell volume reproduce the cell masses
    double riemann = 0.0;
    for (std::uint64_t i = 1; i < s.size(); ++i) riemann += qgauss_density(spec, s.point(i)) * s.cell_volume();
    riemann += ball_mass(make_factor(spec, I(1)), Ball{I(0), -4});
    CHECK(std::abs(riemann - 1.0) < 1e-12);
  }
  SUBCASE("gamma translates the profile") {
    const auto shifted = QGaussianSpec::make(3, 1.0, 1.5, Q(1, 9));
    CHECK(shifted.support_exp == 4);
    CHECK(shifted.C == spec.C);
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
      const PAdic x = random_padic(rng, -3);
      CHECK(qgauss_density(shifted, x + Q(1, 9)) == qgauss_density(spec, x));
    }
    const auto far = QGaussianSpec::make(3, 1.0, 1.5, pw(-6));
    CHECK(far.support_exp == 6);
    CHECK(qgauss_density(far, pw(-7)) == 0.0);
  }
  SUBCASE("scaled factor") {
    const auto m = make_factor(spec, I(9));
    std::mt19937_64 rng(5);
    for (int t = 0; t < 100; ++t) {
      const PAdic x = random_padic(rng, 0);
      CHECK(density(m, x) == doctest::Approx(qgauss_density(spec, x / I(9)) * 9.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("second-type density") {
  const auto plain = three_balls(false);
  const auto perturbed = three_balls(true);
  plain.validate();
  perturbed.validate();
  CHECK(plain.delta() == 0.0);
  CHECK(perturbed.delta() == doctest::Approx(0.2));
  std::mt19937_64 rng(11);
  SUBCASE("translation invariance within a ball (h = 0)") {
    const auto m = make_factor(plain, pw(-1));  // |v| = 3
    for (int t = 0; t < 300; ++t) {
      const PAdic x = random_padic(rng, -2);
      const PAdic y = random_padic(rng, -1);  // |y / v| <= 1
      CHECK(density(m, x - y) == density(m, x));
    }
  }
  SUBCASE("single ball is uniform") {
    const auto haar = SecondTypeSpec::haar_unit_ball(3);
    haar.validate();
    for (int t = 0; t < 100; ++t) {
      const PAdic x = random_padic(rng, 0);
      CHECK(second_type_density(haar, x) == 1.0);
    }
    CHECK(second_type_density(haar, Q(1, 3)) == 0.0);
    CHECK_FALSE(covers(haar, Q(1, 3)));
  }
  SUBCASE("perturbation bounded by delta") {
    for (int t = 0; t < 500; ++t) {
      const PAdic x = random_padic(rng, -1);
      const double f = second_type_density(plain, x);
      if (f == 0.0) {
        CHECK(second_type_density(perturbed, x) == 0.0);
        continue;
      }
      CHECK(std::abs(second_type_density(perturbed, x) / f - 1.0) <= perturbed.delta() + 1e-15);
    }
  }
  SUBCASE("validation") {
    auto bad = plain;
    bad.pieces[1].weight = 0.4;
    CHECK_THROWS_AS(bad.validate(), SpecError);
    bad = plain;
    bad.pieces[1].ball = Ball{I(1), 0};
    CHECK_THROWS_AS(bad.validate(), SpecError);
    bad = plain;
    std::swap(bad.pieces[0], bad.pieces[1]);
    CHECK_THROWS_AS(bad.validate(), SpecError);
    bad = perturbed;
    bad.h[0].weight = 0.6;
    bad.h[1].weight = -0.6;
    CHECK_THROWS_AS(bad.validate(), SpecError);
    bad = perturbed;
    bad.h.push_back({Ball{Q(1, 9), -1}, 0.0});
    CHECK_THROWS_AS(bad.validate(), SpecError);
  }
  SUBCASE("ball masses add up") {
    const auto m = make_factor(perturbed, I(1));
    double total = 0.0;
    const LatticeSpec s = natural_lattice(m);
    for (std::uint64_t i = 0; i < s.size(); ++i) total += ball_mass(m, Ball{s.point(i), -s.n});
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ball_mass(m, Ball{I(0), 5}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ball_mass(m, Ball{I(0), -1}) == doctest::Approx(0.6 / 3));
  }
}

TEST_CASE("Kakutani affinity") {
  const auto qg = make_factor(QGaussianSpec::make(3, 1.0, 1.5), I(1));
  const auto st = make_factor(three_balls(true), I(1));
  SUBCASE("identical measures") {
    for (const auto& m : {qg, st}) {
      const auto a = kakutani_affinity(m, m, natural_lattice(m));
      CHECK(a.alpha == 1.0);
      CHECK(a.absolutely_continuous);
    }
  }
  SUBCASE("disjoint supports") {
    const auto haar = make_factor(SecondTypeSpec::haar_unit_ball(3), I(1));
    const auto moved = haar.shifted(Q(1, 3));
    const auto a = kakutani_affinity(moved, haar, LatticeSpec{3, 1, 0});
    CHECK(a.alpha == 0.0);
    CHECK_FALSE(a.absolutely_continuous);
  }
  SUBCASE("q-Gaussian shifts against the exact radial affinity") {
    const int p = 3;
    const auto spec = std::get<QGaussianSpec>(qg.base);
    auto g = [&](int j) { return qgauss_profile(p, spec.beta, spec.q, j); };
    double previous_gap = 2.0;
    for (int s = 2; s >= -2; --s) {
      CAPTURE(s);
      double exact = std::pow(p, s) * (1.0 - 2.0 / p) * g(s);
      for (int k = s + 1; k <= spec.support_exp; ++k) exact += std::pow(p, k) * (1.0 - 1.0 / p) * g(k);
      double inner = 0.0;
      for (int j = s - 1; j > s - 200; --j) inner += std::pow(p, j) * (1.0 - 1.0 / p) * std::sqrt(g(j));
      exact = spec.C * (exact + 2.0 * std::sqrt(g(s)) * inner);
      const auto [lattice, resolved] = affinity_lattice(qg, pw(-s));
      CHECK(resolved);
      const auto a = kakutani_affinity(qg.shifted(pw(-s)), qg, lattice);
      // coarse-graining can only raise the affinity, and only on the cells at 0 and z
      const double centre = spec.C * qgauss_ball_integral(p, spec.beta, spec.q, -lattice.n);
      const double slack = 2.0 * std::sqrt(centre * spec.C * std::pow(p, -lattice.n) * g(s));
      CHECK(a.alpha >= exact - 1e-12);
      CHECK(a.alpha <= exact + slack);
      CHECK(a.alpha <= 1.0);
      CHECK(a.absolutely_continuous);
      // 1 - alpha = (1/2) int (sqrt f - sqrt g)^2, nonzero only where |x| < |z| or |x - z| < |z|
      // g(p^j) - g(p^s) = sum_{-s < k <= -j} p^k (e_k - e_(k+1)), summed directly to keep tiny gaps
      auto e = [&](int k) { return std::exp(-spec.beta * std::pow(p, k * spec.q)); };
      double gap = 0.0, diff = 0.0;
      for (int j = s - 1; j > s - 200; --j) {
        diff += std::pow(p, -j) * (e(-j) - e(1 - j));
        const double root_diff = diff / (std::sqrt(g(j)) + std::sqrt(g(s)));
        gap += std::pow(p, j) * (1.0 - 1.0 / p) * root_diff * root_diff;
      }
      gap *= spec.C;
      CHECK(gap == doctest::Approx(1.0 - exact).epsilon(1e-6).scale(1e-9));
      CHECK(gap > 0.0);
      CHECK(gap < previous_gap);
      previous_gap = gap;
    }
  }
}

TEST_CASE("Kakutani dichotomy") {
  SUBCASE("zero shift") {
    const auto spec = qgauss_product(8, 1);
    const auto report = kakutani_dichotomy(spec, std::vector<PAdic>(8, I(0)), 8);
    for (double a : report.alpha) CHECK(a == 1.0);
    CHECK(report.verdict == Verdict::equivalent);
  }
  SUBCASE("second type, shifts inside the invariance domain") {
    ProductMeasureSpec spec;
    for (int k = 0; k < 12; ++k) spec.factors.push_back(make_factor(three_balls(false), pw(-(k % 4))));
    std::vector<PAdic> z;
    for (std::size_t k = 0; k < 12; ++k) z.push_back(spec.factors[k].scale * I(static_cast<std::int64_t>(k) + 1));
    const auto report = kakutani_dichotomy(spec, z, 12);
    for (double a : report.alpha) CHECK(a == 1.0);
    CHECK(report.verdict == Verdict::equivalent);
    std::ostringstream csv;
    write_kakutani_csv(csv, report);
    CHECK(csv.str().rfind("k,alpha,partial_product\n1,1,1\n", 0) == 0);
    CHECK(kakutani_verdict_json(report).find("\"equivalent\"") != std::string::npos);
  }
  SUBCASE("q-Gaussian, constant out-of-domain shift") {
    const auto factor = make_factor(QGaussianSpec::make(3, 1.0, 2.0), I(1));
    const ProductMeasureSpec spec{std::vector<OneDimMeasure>(50, factor)};
    const auto report = kakutani_dichotomy(spec, std::vector<PAdic>(50, Q(1, 9)), 50);
    for (std::size_t k = 1; k < 50; ++k) CHECK(report.partial_product[k] < report.partial_product[k - 1]);
    CHECK(report.partial_product.back() < 1e-8);
    CHECK(report.absolutely_continuous);
    CHECK(report.verdict == Verdict::orthogonal);
  }
  SUBCASE("short truncation is undecided") {
    const auto factor = make_factor(QGaussianSpec::make(3, 1.0, 2.0), I(1));
    const ProductMeasureSpec spec{std::vector<OneDimMeasure>(3, factor)};
    const auto report = kakutani_dichotomy(spec, std::vector<PAdic>(3, Q(1, 3)), 3);
    CHECK(report.verdict == Verdict::undecided);
    CHECK(to_string(report.verdict) == "undecided-at-K");
  }
  CHECK_THROWS_AS(kakutani_dichotomy(qgauss_product(2, 1), {I(0), I(0)}, 3), DomainError);
}

TEST_CASE("quasi-invariance against joint densities") {
  const std::size_t K = 6;
  const auto spec = qgauss_product(K, 7);
  // per-factor beta differs, so tabulate each
  std::vector<ProfileTable> tables;
  for (const auto& f : spec.factors) tables.emplace_back(3, std::get<QGaussianSpec>(f.base).beta, 1.5, 8, 4);
  auto joint = [&](const std::vector<PAdic>& x) {
    double d = 1.0;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& f = spec.factors[k];
      const auto& qs = std::get<QGaussianSpec>(f.base);
      const PAdic u = x[k] / f.scale;
      if (u.valuation() < -qs.support_exp) return 0.0;
      const double gauss_norm = gaussian_ball(3, qs.beta, 1.5, qs.support_exp) * std::pow(3.0, qs.support_exp);
      d *= tables[k].at(u - qs.gamma) / gauss_norm / f.scale.norm();
    }
    return d;
  };
  std::mt19937_64 rng(13);
  int compared = 0;
  for (int t = 0; t < 300; ++t) {
    std::vector<PAdic> x(K), z(K);
    for (std::size_t k = 0; k < K; ++k) {
      x[k] = spec.factors[k].scale * random_padic(rng, -3);
      z[k] = spec.factors[k].scale * random_padic(rng, -2);
    }
    std::vector<PAdic> xz(K);
    for (std::size_t k = 0; k < K; ++k) xz[k] = x[k] - z[k];
    const double den = joint(x);
    if (den == 0.0) continue;
    bool distinct = true;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& qs = std::get<QGaussianSpec>(spec.factors[k].base);
      distinct = distinct && x[k] / spec.factors[k].scale != qs.gamma && xz[k] / spec.factors[k].scale != qs.gamma;
    }
    if (!distinct) continue;
    const double rho = quasi_invariance_factor(spec, z, x, K);
    const double oracle = joint(xz) / den;
    CHECK(std::abs(rho - oracle) <= 1e-9 * std::max(1.0, oracle));
    ++compared;
  }
  CHECK(compared > 200);
  CHECK(quasi_invariance_factor(spec, std::vector<PAdic>(K, I(0)), std::vector<PAdic>(K, I(1)), K) == 1.0);
  const auto st = second_type_product(4);
  CHECK_THROWS_AS(quasi_invariance_factor(st, std::vector<PAdic>(4, I(0)), std::vector<PAdic>(4, pw(-5)), 4),
                  DomainError);
}

TEST_CASE("exact invariance and block multiplicativity") {
  const auto spec = second_type_product(8);
  ProductMeasureSpec plain;
  for (std::size_t k = 0; k < 8; ++k) plain.factors.push_back(make_factor(three_balls(false), spec.factors[k].scale));
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    std::vector<PAdic> x(8), z(8);
    for (std::size_t k = 0; k < 8; ++k) {
      x[k] = spec.factors[k].scale * random_padic(rng, -1);
      z[k] = spec.factors[k].scale * random_padic(rng, 0);
    }
    CHECK(quasi_invariance_factor(plain, z, x, 8) == 1.0);
    const double whole = quasi_invariance_factor(spec, z, x, 8);
    const ProductMeasureSpec lo{{spec.factors.begin(), spec.factors.begin() + 3}};
    const ProductMeasureSpec hi{{spec.factors.begin() + 3, spec.factors.end()}};
    const std::vector<PAdic> zl(z.begin(), z.begin() + 3), xl(x.begin(), x.begin() + 3);
    const std::vector<PAdic> zh(z.begin() + 3, z.end()), xh(x.begin() + 3, x.end());
    CHECK(whole == doctest::Approx(quasi_invariance_factor(lo, zl, xl, 3) * quasi_invariance_factor(hi, zh, xh, 5))
                       .epsilon(1e-15));
  }
}

TEST_CASE("cocycle identity") {
  std::mt19937_64 rng(19);
  const auto qg = qgauss_product(5, 3);
  const auto st = second_type_product(5);
  for (const auto* spec : {&qg, &st}) {
    double worst = 0.0;
    for (int t = 0; t < 300; ++t) {
      std::vector<PAdic> x(5), z(5), h(5);
      for (std::size_t k = 0; k < 5; ++k) {
        const PAdic v = spec->factors[k].scale;
        x[k] = v * random_padic(rng, -1);
        z[k] = v * random_padic(rng, spec == &qg ? -2 : 0);
        h[k] = v * random_padic(rng, spec == &qg ? -2 : 0);
      }
      worst = std::max(worst, cocycle_residual(*spec, z, h, x, 5));
    }
    CHECK(worst <= 1e-9);
    const std::vector<PAdic> zero(5, I(0)), x(5, I(1));
    CHECK(cocycle_residual(*spec, zero, zero, x, 5) == 0.0);
  }
}

TEST_CASE("pseudo-differentiability of measure curves") {
  SUBCASE("exact invariance direction") {
    ProductMeasureSpec spec;
    for (int k = 0; k < 3; ++k) spec.factors.push_back(make_factor(three_balls(false), pw(-k)));
    const std::vector<PAdic> z{spec.factors[0].scale, spec.factors[1].scale * I(2), spec.factors[2].scale};
    const std::vector<Cylinder> cyl{{{{0, Ball{Q(1, 3), -2}}, {2, Ball{Q(2, 3), 1}}}}};
    for (double b : {0.0, 0.5, 1.0, 2.0}) {
      const auto r = pd_of_measure(spec, b, z, cyl, I(4));
      CHECK(std::abs(r.value) <= 1e-12);
    }
  }
  SUBCASE("q-Gaussian product: finite, refinement stable, additive") {
    const auto spec = qgauss_product(3, 5);
    const std::vector<PAdic> z{I(1), Q(1, 3), I(3)};
    const Cylinder a{{{0, Ball{I(0), -1}}, {1, Ball{Q(1, 3), 0}}}};
    const Cylinder c{{{0, Ball{I(1), -1}}, {2, Ball{I(0), 1}}}};
    for (double b : {0.5, 1.0, 2.0}) {
      CAPTURE(b);
      const auto ra = pd_of_measure(spec, b, z, {a}, I(2));
      const auto rc = pd_of_measure(spec, b, z, {c}, I(2));
      const auto both = pd_of_measure(spec, b, z, {a, c}, I(2));
      CHECK(std::isfinite(ra.value.real()));
      CHECK(std::abs(ra.value) > 0.0);
      CHECK(ra.refinement_delta <= 1e-4);
      CHECK(std::abs(both.value - ra.value - rc.value) <= 1e-9);
      // brute-force definition on the r-lattice: sum over r' in Z_p of (phi(r0)-phi(r')) |r0-r'|^(-1-b)
      const int R = ra.resolution + 2;
      const LatticeSpec rs{3, 0, R};
      auto phi = [&](const PAdic& r) {
        double m = 1.0;
        for (const auto& [k, ball] : a.constraints) m *= ball_mass(spec.factors[k], Ball{ball.center - r * z[k], ball.radius_exp});
        return m;
      };
      double direct = 0.0;
      const double at_r0 = phi(I(2));
      for (std::uint64_t j = 0; j < rs.size(); ++j) {
        const PAdic r = rs.point(j);
        if (r == I(2)) continue;
        direct += (at_r0 - phi(r)) * std::pow((r - I(2)).norm(), -1.0 - b) * rs.cell_volume();
      }
      CHECK(ra.value.real() == doctest::Approx(direct).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(pd_of_measure(second_type_product(1), -0.5, {I(1)}, {}, I(0)), DomainError);
  CHECK_THROWS_AS(pd_of_measure(qgauss_product(1, 1), 1.0, {I(1)}, {{{{0, Ball{I(0), -30}}}}}, I(0)),
                  PrecisionError);
}

TEST_CASE("regular representation") {
  const auto spec = qgauss_product(3, 23);
  const SampleFunction f = [](const std::vector<PAdic>& x) {
    return Complex{std::exp(-x[0].norm()), x[1].norm() / (1.0 + x[2].norm())};
  };
  std::mt19937_64 rng(29);
  std::vector<std::vector<PAdic>> points;
  for (int t = 0; t < 50; ++t) {
    std::vector<PAdic> x;
    for (const auto& fk : spec.factors) x.push_back(fk.scale * random_padic(rng, -1));
    points.push_back(x);
  }
  SUBCASE("zero shift") {
    const auto out = regular_rep_apply(spec, points, std::vector<PAdic>(3, I(0)), f, 3);
    for (std::size_t i = 0; i < points.size(); ++i) CHECK(out[i] == f(points[i]));
  }
  SUBCASE("composition") {
    const std::vector<PAdic> g{Q(1, 3), I(2), I(1)}, h{I(1), Q(2, 3), I(3)};
    std::vector<PAdic> gh(3);
    for (std::size_t k = 0; k < 3; ++k) gh[k] = g[k] + h[k];
    const auto tgth = regular_rep(spec, g, regular_rep(spec, h, f, 3), 3);
    const auto tgh = regular_rep(spec, gh, f, 3);
    for (const auto& x : points) CHECK(std::abs(tgth(x) - tgh(x)) <= 1e-9);
  }
  SUBCASE("unitarity") {
    const auto report = unitarity_check(spec, {Q(1, 3), I(1), Q(2, 9)}, f, 3, 10000, 31, 12);
    CHECK(report.samples == 10000);
    CHECK(report.std_error > 0.0);
    CHECK(std::abs(report.norm2_Tf - report.norm2_f) <= 3.0 * report.std_error);
    const auto st = second_type_product(3);
    const auto r2 = unitarity_check(st, {st.factors[0].scale, I(0), st.factors[2].scale * Q(1, 3)}, f, 3,
                                    10000, 37, 12);
    CHECK(std::abs(r2.norm2_Tf - r2.norm2_f) <= 3.0 * r2.std_error);
  }
}

TEST_CASE("samplers reproduce ball masses") {
  const int N = 40000;
  SUBCASE("q-Gaussian spheres") {
    const auto m = make_factor(QGaussianSpec::make(3, 1.0, 1.5, Q(1, 3)), I(3));
    const MeasureSampler sampler(m);
    auto rng = make_stream(41, 0);
    // classes: |x - centre| = 3^k for k = 3..-4, and the ball below
    const PAdic centre = Q(1, 3) * I(3);
    const int top = 3, bottom = -4;
    std::vector<double> counts(9, 0.0), prob(9, 0.0);
    for (int k = top; k >= bottom; --k) {
      prob[static_cast<std::size_t>(top - k)] = ball_mass(m, Ball{centre, k}) - ball_mass(m, Ball{centre, k - 1});
    }
    prob[8] = ball_mass(m, Ball{centre, bottom - 1});
    CHECK(ball_mass(m, Ball{centre, top}) == doctest::Approx(1.0).epsilon(1e-12));
    for (int t = 0; t < N; ++t) {
      const PAdic x = sampler(rng, 16);
      const PAdic d = x - centre;
      const int k = d.is_zero() ? -100 : -d.valuation();
      CHECK(k <= top);
      counts[static_cast<std::size_t>(top - std::max(k, bottom - 1))] += 1.0;
    }
    // 8 degrees of freedom: chi^2 below 26.1 at the 0.999 level
    CHECK(chi_square(prob, counts) < 26.1);
  }
  SUBCASE("second type") {
    const auto m = make_factor(three_balls(true), pw(-1));
    const MeasureSampler sampler(m);
    auto rng = make_stream(43, 1);
    const LatticeSpec cells{3, 2, 2};  // the h sub-balls are unions of these cells after scaling
    std::vector<double> counts(cells.size(), 0.0), prob(cells.size(), 0.0);
    for (std::uint64_t i = 0; i < cells.size(); ++i) prob[i] = ball_mass(m, Ball{cells.point(i), -2});
    std::vector<double> p_used, c_used;
    for (int t = 0; t < N; ++t) {
      const auto i = cells.index_of(sampler(rng, 16));
      REQUIRE(i.has_value());
      counts[*i] += 1.0;
    }
    for (std::size_t i = 0; i < prob.size(); ++i) {
      if (prob[i] == 0.0) {
        CHECK(counts[i] == 0.0);
      } else {
        p_used.push_back(prob[i]);
        c_used.push_back(counts[i]);
      }
    }
    const double dof = static_cast<double>(p_used.size()) - 1.0;
    // Wilson-Hilferty 0.999 quantile
    const double z = 3.09, c = 2.0 / (9.0 * dof);
    CHECK(chi_square(p_used, c_used) < dof * std::pow(1.0 - c + z * std::sqrt(c), 3));
  }
  SUBCASE("same seed, same draws") {
    const MeasureSampler a(make_factor(QGaussianSpec::make(5, 2.0, 1.0, I(0, 5)), I(1, 5)));
    auto r1 = make_stream(1, 2), r2 = make_stream(1, 2);
    for (int t = 0; t < 100; ++t) CHECK(a(r1, 10) == a(r2, 10));
  }
}
