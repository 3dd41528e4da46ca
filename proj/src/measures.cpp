#include "padiclab/measures.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>
#include <tuple>

#include "json.hpp"
#include "padiclab/random.hpp"

namespace padiclab {

namespace {

constexpr int kMaxSeriesTerms = 20000;
constexpr double kSeriesTolerance = 1e-17;
constexpr std::uint64_t kMaxAffinityCells = std::uint64_t{1} << 20;

void require_prime(int p) {
  if (!is_prime(p)) throw SpecError("measure prime " + std::to_string(p) + " is not prime");
}

// Largest k with e_k = exp(-beta p^(kq)) not below exp(-800).
int top_index(int p, double beta, double q) {
  return static_cast<int>(std::ceil(std::log(800.0 / beta) / (q * std::log(p)))) + 1;
}

double e_k(int p, double beta, double q, int k) {
  return std::exp(-beta * std::pow(static_cast<double>(p), k * q));
}

// sum_{k <= start} p^k (e_k - e_(k+1)); e_k - e_(k+1) = e_k (1 - exp(-beta p^(kq) (p^q - 1))).
double profile_series(int p, double beta, double q, int start) {
  const double pq1 = std::pow(static_cast<double>(p), q) - 1.0;
  double sum = 0.0;
  for (int i = 0, k = start; i < kMaxSeriesTerms; ++i, --k) {
    const double x = beta * std::pow(static_cast<double>(p), k * q);
    const double term = std::pow(static_cast<double>(p), k) * std::exp(-x) * -std::expm1(-x * pq1);
    sum += term;
    if (term <= kSeriesTolerance * sum && x < 1.0) return sum;
  }
  throw PrecisionError("q-Gaussian profile series did not settle in " +
                       std::to_string(kMaxSeriesTerms) + " terms (beta=" + std::to_string(beta) +
                       ", q=" + std::to_string(q) + ")");
}

using ProfileKey = std::tuple<int, std::uint64_t, std::uint64_t, int>;

double cached_profile(int p, double beta, double q, int j) {
  static std::mutex mutex;
  static std::map<ProfileKey, double> cache;
  const ProfileKey key{p, std::bit_cast<std::uint64_t>(beta), std::bit_cast<std::uint64_t>(q), j};
  {
    std::lock_guard lock(mutex);
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double v = qgauss_profile(p, beta, q, j);
  std::lock_guard lock(mutex);
  cache.emplace(key, v);
  return v;
}

int log_norm(const PAdic& x) { return -x.valuation(); }

Ball support_ball(const QGaussianSpec& s) {
  return {PAdic::zero(s.p, s.gamma.precision()), s.support_exp};
}

double qgauss_ball_mass(const QGaussianSpec& s, const Ball& b) {
  const Ball w = support_ball(s);
  if (b.radius_exp >= w.radius_exp) return b.contains(w.center) ? 1.0 : 0.0;
  if (!w.contains(b.center)) return 0.0;
  const PAdic d = b.center - s.gamma;
  if (d.is_zero() || log_norm(d) <= b.radius_exp) {
    return s.C * qgauss_ball_integral(s.p, s.beta, s.q, b.radius_exp);
  }
  return s.C * b.volume() * cached_profile(s.p, s.beta, s.q, log_norm(d));
}

double piece_mass(const WeightedBall& piece, const Ball& b) {
  if (piece.ball.contains_ball(b)) return piece.weight * b.volume();
  if (b.contains_ball(piece.ball)) return piece.weight * piece.ball.volume();
  return 0.0;
}

double second_type_ball_mass(const SecondTypeSpec& s, const Ball& b) {
  double mass = 0.0;
  for (const auto& piece : s.pieces) mass += piece_mass(piece, b);
  for (const auto& piece : s.h) mass += piece_mass(piece, b);
  return mass;
}

int base_prime(const BaseMeasure& base) {
  return std::visit([](const auto& s) { return s.p; }, base);
}

// Support exponent and resolution of the base measure in its own coordinates.
std::pair<int, int> base_extent(const BaseMeasure& base) {
  if (const auto* qg = std::get_if<QGaussianSpec>(&base)) return {qg->support_exp, 4};
  const auto& st = std::get<SecondTypeSpec>(base);
  int m = 0, n = 0;
  for (const auto& piece : st.pieces) {
    m = std::max(m, piece.ball.radius_exp);
    if (!piece.ball.center.is_zero()) m = std::max(m, -piece.ball.center.valuation());
  }
  for (const auto& piece : st.h) n = std::max(n, -piece.ball.radius_exp);
  return {m, n};
}

void check_factor_count(const ProductMeasureSpec& spec, std::size_t K,
                        std::initializer_list<std::size_t> sizes) {
  if (K > spec.factors.size()) throw DomainError("truncation K exceeds the number of factors");
  for (std::size_t s : sizes) {
    if (s < K) throw DomainError("vector shorter than the truncation K");
  }
}

}  // namespace

double qgauss_profile(int p, double beta, double q, int j) {
  return profile_series(p, beta, q, std::min(-j, top_index(p, beta, q)));
}

double qgauss_profile_at_origin(int p, double beta, double q) {
  return profile_series(p, beta, q, top_index(p, beta, q));
}

double qgauss_ball_integral(int p, double beta, double q, int r) {
  const double pd = p;
  double sum = 0.0;
  for (int i = 0, k = std::min(-r, top_index(p, beta, q)); i < kMaxSeriesTerms; ++i, --k) {
    const double term = std::pow(pd, k) * (1.0 - 1.0 / pd) * e_k(p, beta, q, k);
    sum += term;
    if (term <= kSeriesTolerance * sum && beta * std::pow(pd, k * q) < 1.0) {
      return std::pow(pd, r) * sum;
    }
  }
  throw PrecisionError("q-Gaussian ball series did not settle");
}

QGaussianSpec QGaussianSpec::make(int p, double beta, double q, const PAdic& gamma) {
  require_prime(p);
  if (!(beta > 0.0) || !std::isfinite(beta)) throw SpecError("q-Gaussian needs beta > 0");
  if (!(q > 0.0) || !std::isfinite(q)) throw SpecError("q-Gaussian needs q > 0");
  if (gamma.prime() != p) throw SpecError("gamma lives over a different prime");
  QGaussianSpec s{p, beta, gamma, q, 4, 1.0};
  if (!gamma.is_zero()) s.support_exp = std::max(4, -gamma.valuation());
  // The support ball contains gamma, so it is the ball of radius p^M about gamma.
  s.C = 1.0 / qgauss_ball_integral(p, beta, q, s.support_exp);
  return s;
}

QGaussianSpec QGaussianSpec::make(int p, double beta, double q) {
  require_prime(p);
  return make(p, beta, q, PAdic::zero(p, kDefaultPrecision));
}

void SecondTypeSpec::validate() const {
  require_prime(p);
  if (pieces.empty()) throw SpecError("second-type density needs at least one ball");
  const Ball& first = pieces.front().ball;
  if (!first.center.is_zero() || first.radius_exp != 0) {
    throw SpecError("the first ball must be Z_p (x_1 = 0, r_1 = 1)");
  }
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto& a = pieces[i];
    if (a.ball.prime() != p) throw SpecError("ball over a different prime");
    if (a.ball.radius_exp < 0) throw SpecError("second-type balls must have radius >= 1");
    if (!(a.weight > 0.0 && a.weight <= 1.0)) throw SpecError("weights C_j must lie in (0, 1]");
    for (std::size_t j = i + 1; j < pieces.size(); ++j) {
      if (!a.ball.disjoint_from(pieces[j].ball)) throw SpecError("second-type balls overlap");
    }
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto owner = std::find_if(pieces.begin(), pieces.end(), [&](const WeightedBall& piece) {
      return piece.ball.contains_ball(h[i].ball);
    });
    if (owner == pieces.end()) throw SpecError("h sub-ball not inside a single B_j");
    for (std::size_t j = i + 1; j < h.size(); ++j) {
      if (!h[i].ball.disjoint_from(h[j].ball)) throw SpecError("h sub-balls overlap");
    }
  }
  if (!(delta() < 1.0)) throw SpecError("perturbation bound delta must be < 1");
  double mass = 0.0;
  for (const auto& piece : pieces) mass += piece.weight * piece.ball.volume();
  for (const auto& piece : h) mass += piece.weight * piece.ball.volume();
  if (std::abs(mass - 1.0) > 1e-12) {
    throw SpecError("second-type density has total mass " + std::to_string(mass) + ", not 1");
  }
}

double SecondTypeSpec::delta() const {
  double d = 0.0;
  for (const auto& hp : h) {
    for (const auto& piece : pieces) {
      if (piece.ball.contains_ball(hp.ball)) d = std::max(d, std::abs(hp.weight) / piece.weight);
    }
  }
  return d;
}

SecondTypeSpec SecondTypeSpec::haar_unit_ball(int p) {
  return {p, {{Ball{PAdic::zero(p, kDefaultPrecision), 0}, 1.0}}, {}};
}

int OneDimMeasure::prime() const { return base_prime(base); }

OneDimMeasure OneDimMeasure::shifted(const PAdic& z) const { return {base, scale, shift + z}; }

OneDimMeasure make_factor(BaseMeasure base, const PAdic& scale) {
  if (scale.is_zero()) throw SpecError("factor scale v must be nonzero");
  if (const auto* st = std::get_if<SecondTypeSpec>(&base)) st->validate();
  return {std::move(base), scale, PAdic::zero(scale.prime(), scale.precision())};
}

double qgauss_density(const QGaussianSpec& spec, const PAdic& x) {
  if (!support_ball(spec).contains(x)) return 0.0;
  const PAdic u = x - spec.gamma;
  if (u.is_zero()) return spec.C * qgauss_profile_at_origin(spec.p, spec.beta, spec.q);
  return spec.C * cached_profile(spec.p, spec.beta, spec.q, log_norm(u));
}

double second_type_density(const SecondTypeSpec& spec, const PAdic& x) {
  double f = 0.0;
  for (const auto& piece : spec.pieces) {
    if (piece.ball.contains(x)) {
      f = piece.weight;
      break;
    }
  }
  if (f == 0.0) return 0.0;
  for (const auto& piece : spec.h) {
    if (piece.ball.contains(x)) return f + piece.weight;
  }
  return f;
}

bool covers(const SecondTypeSpec& spec, const PAdic& x) {
  return std::any_of(spec.pieces.begin(), spec.pieces.end(),
                     [&](const WeightedBall& piece) { return piece.ball.contains(x); });
}

double base_density(const BaseMeasure& base, const PAdic& u) {
  if (const auto* qg = std::get_if<QGaussianSpec>(&base)) return qgauss_density(*qg, u);
  return second_type_density(std::get<SecondTypeSpec>(base), u);
}

double base_ball_mass(const BaseMeasure& base, const Ball& ball) {
  if (const auto* qg = std::get_if<QGaussianSpec>(&base)) return qgauss_ball_mass(*qg, ball);
  return second_type_ball_mass(std::get<SecondTypeSpec>(base), ball);
}

double density(const OneDimMeasure& m, const PAdic& x) {
  return base_density(m.base, (x - m.shift) / m.scale) / m.scale.norm();
}

double ball_mass(const OneDimMeasure& m, const Ball& ball) {
  return base_ball_mass(m.base,
                        Ball{(ball.center - m.shift) / m.scale, ball.radius_exp + m.scale.valuation()});
}

LatticeSpec natural_lattice(const OneDimMeasure& m) {
  const auto [support, resolution] = base_extent(m.base);
  int lm = support - m.scale.valuation();
  if (!m.shift.is_zero()) lm = std::max(lm, -m.shift.valuation());
  return {m.prime(), lm, resolution + m.scale.valuation()};
}

CellMasses cell_masses(const OneDimMeasure& m, const LatticeSpec& lattice) {
  lattice.validate();
  if (lattice.p != m.prime()) throw SpecError("lattice over a different prime");
  CellMasses out{std::vector<double>(lattice.size()), 0.0};
  double total = 0.0;
  for (std::uint64_t i = 0; i < lattice.size(); ++i) {
    out.cells[i] = ball_mass(m, Ball{lattice.point(i, m.scale.precision()), -lattice.n});
    total += out.cells[i];
  }
  out.outside = std::max(0.0, 1.0 - total);
  return out;
}

Affinity kakutani_affinity(const OneDimMeasure& mu, const OneDimMeasure& nu,
                           const LatticeSpec& lattice) {
  const CellMasses a = cell_masses(mu, lattice);
  const CellMasses b = cell_masses(nu, lattice);
  Affinity out{0.0, true};
  bool identical = a.outside == b.outside;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    out.alpha += std::sqrt(a.cells[i] * b.cells[i]);
    if (a.cells[i] > 0.0 && b.cells[i] == 0.0) out.absolutely_continuous = false;
    identical = identical && a.cells[i] == b.cells[i];
  }
  out.alpha += std::sqrt(a.outside * b.outside);
  if (a.outside > 0.0 && b.outside == 0.0) out.absolutely_continuous = false;
  out.alpha = identical ? 1.0 : std::min(out.alpha, 1.0);
  return out;
}

AffinityLattice affinity_lattice(const OneDimMeasure& mu, const PAdic& z) {
  const LatticeSpec a = natural_lattice(mu);
  const LatticeSpec b = natural_lattice(mu.shifted(z));
  LatticeSpec s{a.p, std::max(a.m, b.m), std::max(a.n, b.n)};
  if (std::holds_alternative<QGaussianSpec>(mu.base) && !z.is_zero()) {
    s.n = std::max(s.n, z.valuation() + 2);
  }
  bool resolved = true;
  auto cells = [&] { return std::pow(static_cast<double>(s.p), s.m + s.n); };
  while (cells() > static_cast<double>(kMaxAffinityCells) && s.m + s.n > 0) {
    --s.n;
    resolved = false;
  }
  return {s, resolved};
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::equivalent:
      return "equivalent";
    case Verdict::orthogonal:
      return "orthogonal";
    case Verdict::undecided:
      return "undecided-at-K";
  }
  return "undecided-at-K";
}

KakutaniReport kakutani_dichotomy(const ProductMeasureSpec& spec, const std::vector<PAdic>& z,
                                  std::size_t K) {
  check_factor_count(spec, K, {z.size()});
  KakutaniReport report{{}, {}, {}, true, Verdict::undecided};
  double product = 1.0;
  for (std::size_t k = 0; k < K; ++k) {
    const OneDimMeasure& nu = spec.factors[k];
    const auto [lattice, resolved] = affinity_lattice(nu, z[k]);
    const Affinity a = kakutani_affinity(nu.shifted(z[k]), nu, lattice);
    product *= a.alpha;
    report.alpha.push_back(a.alpha);
    report.partial_product.push_back(product);
    report.resolved.push_back(resolved);
    report.absolutely_continuous = report.absolutely_continuous && a.absolutely_continuous;
  }
  const std::size_t tail = std::min<std::size_t>(10, K);
  const bool tail_close = std::all_of(report.alpha.end() - static_cast<std::ptrdiff_t>(tail),
                                      report.alpha.end(), [](double a) { return a > 1.0 - 1e-6; });
  if (!report.absolutely_continuous || product < 1e-8) {
    report.verdict = Verdict::orthogonal;
  } else if (product > 1e-3 && tail_close) {
    report.verdict = Verdict::equivalent;
  }
  return report;
}

void write_kakutani_csv(std::ostream& out, const KakutaniReport& report) {
  out << "k,alpha,partial_product\n";
  out.precision(17);
  for (std::size_t k = 0; k < report.alpha.size(); ++k) {
    out << k + 1 << ',' << report.alpha[k] << ',' << report.partial_product[k] << '\n';
  }
}

std::string kakutani_verdict_json(const KakutaniReport& report) {
  nlohmann::json j{{"verdict", to_string(report.verdict)},
                   {"K", report.alpha.size()},
                   {"product", report.partial_product.empty() ? 1.0 : report.partial_product.back()},
                   {"absolutely_continuous", report.absolutely_continuous},
                   {"policy", {{"equivalent_above", 1e-3},
                               {"tail_factors", 10},
                               {"tail_above", 1.0 - 1e-6},
                               {"orthogonal_below", 1e-8}}}};
  return j.dump();
}

double quasi_invariance_factor(const ProductMeasureSpec& spec, const std::vector<PAdic>& z,
                               const std::vector<PAdic>& x, std::size_t K) {
  check_factor_count(spec, K, {z.size(), x.size()});
  double rho = 1.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double den = density(spec.factors[k], x[k]);
    if (den == 0.0) {
      throw DomainError("absolute continuity fails: density of factor " + std::to_string(k) +
                        " vanishes at x");
    }
    rho *= density(spec.factors[k], x[k] - z[k]) / den;
  }
  return rho;
}

double cocycle_residual(const ProductMeasureSpec& spec, const std::vector<PAdic>& z,
                        const std::vector<PAdic>& h, const std::vector<PAdic>& x,
                        std::size_t K) {
  check_factor_count(spec, K, {z.size(), h.size(), x.size()});
  std::vector<PAdic> zh(K), xh(K);
  for (std::size_t k = 0; k < K; ++k) {
    zh[k] = z[k] + h[k];
    xh[k] = x[k] - h[k];
  }
  return std::abs(quasi_invariance_factor(spec, zh, x, K) -
                  quasi_invariance_factor(spec, z, xh, K) * quasi_invariance_factor(spec, h, x, K));
}

namespace {

LatticeFunction curve_function(const ProductMeasureSpec& spec, const std::vector<PAdic>& z,
                               const std::vector<Cylinder>& cylinders, int p, int resolution,
                               int precision) {
  const LatticeSpec lattice{p, 0, resolution};
  LatticeFunction phi(lattice);
  for (std::uint64_t i = 0; i < lattice.size(); ++i) {
    const PAdic r = lattice.point(i, precision);
    double total = 0.0;
    for (const auto& cyl : cylinders) {
      double mass = 1.0;
      for (const auto& [k, ball] : cyl.constraints) {
        mass *= ball_mass(spec.factors[k], Ball{ball.center - r * z[k], ball.radius_exp});
      }
      total += mass;
    }
    phi.values[i] = total;
  }
  return phi;
}

}  // namespace

PdMeasureResult pd_of_measure(const ProductMeasureSpec& spec, double b,
                              const std::vector<PAdic>& z,
                              const std::vector<Cylinder>& cylinders, const PAdic& r0) {
  if (!(b >= 0.0)) throw DomainError("pd_of_measure needs b >= 0");
  if (spec.factors.empty()) throw SpecError("product measure without factors");
  const int p = spec.factors.front().prime();
  int resolution = 0;
  for (const auto& cyl : cylinders) {
    for (const auto& [k, ball] : cyl.constraints) {
      if (k >= spec.factors.size() || k >= z.size()) {
        throw DomainError("cylinder constrains a coordinate beyond the truncation");
      }
      if (!z[k].is_zero()) resolution = std::max(resolution, -ball.radius_exp - z[k].valuation());
    }
  }
  if (std::pow(static_cast<double>(p), resolution + 1) > static_cast<double>(kMaxAffinityCells)) {
    throw PrecisionError("curve r -> mu(B - r z) needs an r-lattice of p^" +
                         std::to_string(resolution) + " cells");
  }
  if (!r0.is_zero() && r0.valuation() < 0) throw DomainError("r0 must lie in Z_p");
  const int precision = r0.precision();
  PdMeasureResult out{};
  out.resolution = resolution;
  Complex values[2];
  for (int level = 0; level < 2; ++level) {
    const LatticeFunction phi =
        curve_function(spec, z, cylinders, p, resolution + level, precision);
    values[level] = pd_c(phi, b, *phi.spec.index_of(r0));
  }
  out.value = values[0];
  out.refinement_delta = std::abs(values[1] - values[0]);
  if (out.refinement_delta > 1e-9 * (1.0 + std::abs(out.value))) {
    throw PrecisionError("PD_c of the measure curve changed by " +
                         std::to_string(out.refinement_delta) + " under refinement");
  }
  return out;
}

std::vector<Complex> regular_rep_apply(const ProductMeasureSpec& spec,
                                       const std::vector<std::vector<PAdic>>& points,
                                       const std::vector<PAdic>& h, const SampleFunction& f,
                                       std::size_t K) {
  const SampleFunction t = regular_rep(spec, h, f, K);
  std::vector<Complex> out;
  out.reserve(points.size());
  for (const auto& g : points) out.push_back(t(g));
  return out;
}

SampleFunction regular_rep(const ProductMeasureSpec& spec, const std::vector<PAdic>& h,
                           SampleFunction f, std::size_t K) {
  check_factor_count(spec, K, {h.size()});
  return [spec, h, f = std::move(f), K](const std::vector<PAdic>& g) {
    std::vector<PAdic> moved(g);
    for (std::size_t k = 0; k < K; ++k) moved[k] = g[k] - h[k];
    return std::sqrt(quasi_invariance_factor(spec, h, g, K)) * f(moved);
  };
}

UnitarityReport unitarity_check(const ProductMeasureSpec& spec, const std::vector<PAdic>& h,
                                const SampleFunction& f, std::size_t K, std::size_t samples,
                                std::uint64_t seed, int precision) {
  check_factor_count(spec, K, {h.size()});
  if (samples < 2) throw DomainError("unitarity_check needs at least two samples");
  std::vector<MeasureSampler> samplers;
  for (std::size_t k = 0; k < K; ++k) samplers.emplace_back(spec.factors[k]);
  const SampleFunction t = regular_rep(spec, h, f, K);
  auto rng = make_stream(seed, 0);
  double sum_f = 0.0, sum_t = 0.0, sum_d = 0.0, sum_d2 = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const auto g = sample(samplers, rng, precision);
    const double a = std::norm(f(g));
    const double b = std::norm(t(g));
    sum_f += a;
    sum_t += b;
    sum_d += b - a;
    sum_d2 += (b - a) * (b - a);
  }
  const double n = static_cast<double>(samples);
  const double mean_d = sum_d / n;
  const double var_d = std::max(0.0, (sum_d2 - n * mean_d * mean_d) / (n - 1.0));
  return {sum_f / n, sum_t / n, std::sqrt(var_d / n), samples};
}

MeasureSampler::MeasureSampler(OneDimMeasure m) : measure_(std::move(m)) {
  std::vector<double> masses;
  const int p = measure_.prime();
  const int precision = measure_.scale.precision();
  if (const auto* qg = std::get_if<QGaussianSpec>(&measure_.base)) {
    // spheres |u - gamma| = p^k inside the support, then a negligible inner ball
    int k = qg->support_exp;
    for (; k > qg->support_exp - 4000; --k) {
      atoms_.push_back({Ball{qg->gamma, k}, true, {}});
      masses.push_back(qg->C * std::pow(static_cast<double>(p), k) * (1.0 - 1.0 / p) *
                       cached_profile(p, qg->beta, qg->q, k));
      if (qg->C * qgauss_ball_integral(p, qg->beta, qg->q, k - 1) < 1e-18) break;
    }
    atoms_.push_back({Ball{qg->gamma, k - 1}, false, {}});
    masses.push_back(qg->C * qgauss_ball_integral(p, qg->beta, qg->q, k - 1));
  } else {
    const auto& st = std::get<SecondTypeSpec>(measure_.base);
    for (const auto& piece : st.pieces) {
      Atom atom{piece.ball, false, {}};
      double volume = piece.ball.volume();
      for (const auto& hp : st.h) {
        if (!piece.ball.contains_ball(hp.ball)) continue;
        atom.exclude.push_back(hp.ball);
        volume -= hp.ball.volume();
        atoms_.push_back({hp.ball, false, {}});
        masses.push_back((piece.weight + hp.weight) * hp.ball.volume());
      }
      atoms_.push_back(atom);
      masses.push_back(piece.weight * volume);
    }
  }
  (void)precision;
  double total = 0.0;
  for (double w : masses) {
    total += std::max(w, 0.0);
    cumulative_.push_back(total);
  }
  if (!(total > 0.0)) throw SpecError("measure has no mass to sample");
  for (auto& c : cumulative_) c /= total;
}

PAdic MeasureSampler::operator()(std::mt19937_64& rng, int precision) const {
  const int p = measure_.prime();
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto index = static_cast<std::size_t>(
      std::min<std::ptrdiff_t>(it - cumulative_.begin(), static_cast<std::ptrdiff_t>(atoms_.size()) - 1));
  const Atom& atom = atoms_[index];
  const std::uint64_t modulus = checked_pow(p, precision);
  for (;;) {
    std::uint64_t digits = uniform_below(rng, modulus);
    if (atom.sphere) {
      // leading digit nonzero: |u - center| = p^radius_exp exactly
      const auto up = static_cast<std::uint64_t>(p);
      digits = 1 + uniform_below(rng, up - 1) + up * (digits / up);
    }
    const PAdic offset = PAdic::from_unit(p, precision, -atom.ball.radius_exp, digits);
    const PAdic v = atom.ball.center.with_precision(precision) + offset;
    const bool rejected = std::any_of(atom.exclude.begin(), atom.exclude.end(),
                                      [&](const Ball& b) { return b.contains(v); });
    if (!rejected) return measure_.shift.with_precision(precision) + measure_.scale.with_precision(precision) * v;
  }
}

std::vector<PAdic> sample(const std::vector<MeasureSampler>& samplers, std::mt19937_64& rng,
                          int precision) {
  std::vector<PAdic> out;
  out.reserve(samplers.size());
  for (const auto& s : samplers) out.push_back(s(rng, precision));
  return out;
}

}  // namespace padiclab
