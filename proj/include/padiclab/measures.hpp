#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "padiclab/lattice.hpp"
#include "padiclab/padic.hpp"

namespace padiclab {

/// q-Gaussian on Q_p: density C g(x - gamma) on its support ball, where
/// g(u) = int exp(-beta |xi|^q) chi_1(-u xi) dxi and chi_gamma(xi) = chi_1(gamma xi).
///
/// g has a polynomial tail |u|^(-1-q), so the measure is restricted to the
/// registered support p^-support_exp Z_p (m = 4, enlarged to contain gamma)
/// and C normalizes it there.
struct QGaussianSpec {
  int p;
  double beta;
  PAdic gamma;
  double q;
  int support_exp;
  double C;

  /// Validates beta > 0, q > 0 and computes C by exact shell quadrature.
  static QGaussianSpec make(int p, double beta, double q, const PAdic& gamma);
  static QGaussianSpec make(int p, double beta, double q);
};

struct WeightedBall {
  Ball ball;
  double weight;
};

/// f = sum_j C_j Ch_{B_j} + h with finitely many disjoint balls B_j of radius
/// >= 1, B_1 = Z_p; h is a table of weighted sub-balls of the B_j. The balls
/// cover a bounded region only: outside it the density is 0.
struct SecondTypeSpec {
  int p;
  std::vector<WeightedBall> pieces;
  std::vector<WeightedBall> h;

  /// Checks disjointness, C_j in (0, 1], delta < 1 and total mass 1 (1e-12);
  /// throws SpecError.
  void validate() const;
  /// ess-sup |h / f|.
  double delta() const;
  /// Single ball Z_p with weight 1 (Haar measure on Z_p).
  static SecondTypeSpec haar_unit_ball(int p);
};

using BaseMeasure = std::variant<QGaussianSpec, SecondTypeSpec>;

/// Law of shift + scale * U with U distributed by the base measure:
/// density(x) = base((x - shift) / scale) / |scale|.
struct OneDimMeasure {
  BaseMeasure base;
  PAdic scale;
  PAdic shift;

  int prime() const;
  /// The same measure translated by z.
  OneDimMeasure shifted(const PAdic& z) const;
};

OneDimMeasure make_factor(BaseMeasure base, const PAdic& scale);

/// Truncation prod_{k <= K} mu_k of a product measure (diagonal operator J).
struct ProductMeasureSpec {
  std::vector<OneDimMeasure> factors;
};

/// g(u) for |u| = p^j, unnormalized: sum_{k <= -j} p^k (e_k - e_(k+1)) with
/// e_k = exp(-beta p^(kq)). Throws PrecisionError if the series stalls.
double qgauss_profile(int p, double beta, double q, int j);
/// g(0) = sum_k p^k (e_k - e_(k+1)).
double qgauss_profile_at_origin(int p, double beta, double q);
/// int_{|u| <= p^r} g(u) du = p^r sum_{k <= -r} p^k (1 - 1/p) exp(-beta p^(kq)).
double qgauss_ball_integral(int p, double beta, double q, int r);

double qgauss_density(const QGaussianSpec& spec, const PAdic& x);
/// 0 outside the covered region; see covers().
double second_type_density(const SecondTypeSpec& spec, const PAdic& x);
bool covers(const SecondTypeSpec& spec, const PAdic& x);

double base_density(const BaseMeasure& base, const PAdic& u);
double base_ball_mass(const BaseMeasure& base, const Ball& ball);
double density(const OneDimMeasure& m, const PAdic& x);
double ball_mass(const OneDimMeasure& m, const Ball& ball);

/// Smallest lattice on which m lives and is resolved: support in p^-m Z_p, and
/// the density constant on cells (for a q-Gaussian, on cells away from gamma).
LatticeSpec natural_lattice(const OneDimMeasure& m);

/// Exact masses of the lattice cells; `outside` = 1 - their sum (clamped at 0).
struct CellMasses {
  std::vector<double> cells;
  double outside;
};
CellMasses cell_masses(const OneDimMeasure& m, const LatticeSpec& lattice);

struct Affinity {
  double alpha;
  /// mu << nu on the lattice cells; false flags a cell with mu > 0 = nu.
  bool absolutely_continuous;
};

/// Hellinger affinity sum_c sqrt(mu(c) nu(c)) of the coarse-grained measures
/// (cells of the lattice plus the complement of its support). Exactly 1 when
/// the cell masses coincide; an upper bound for the true affinity otherwise.
Affinity kakutani_affinity(const OneDimMeasure& mu, const OneDimMeasure& nu,
                           const LatticeSpec& lattice);

/// Lattice resolving mu and mu shifted by z (resolution below |z| by two
/// digits), at most 2^20 cells; `resolved` is false when capped.
struct AffinityLattice {
  LatticeSpec lattice;
  bool resolved;
};
AffinityLattice affinity_lattice(const OneDimMeasure& mu, const PAdic& z);

enum class Verdict { equivalent, orthogonal, undecided };
std::string to_string(Verdict v);

struct KakutaniReport {
  std::vector<double> alpha;
  std::vector<double> partial_product;
  std::vector<bool> resolved;
  bool absolutely_continuous;
  Verdict verdict;
};

/// Affinities of mu_k shifted by z_k against mu_k for k < K. Verdict:
/// equivalent if the product exceeds 1e-3 and the last 10 factors exceed
/// 1 - 1e-6; orthogonal if it falls below 1e-8 or absolute continuity fails;
/// undecided otherwise.
KakutaniReport kakutani_dichotomy(const ProductMeasureSpec& spec, const std::vector<PAdic>& z,
                                  std::size_t K);
/// Columns k,alpha,partial_product.
void write_kakutani_csv(std::ostream& out, const KakutaniReport& report);
std::string kakutani_verdict_json(const KakutaniReport& report);

/// rho(z, x) = prod_{k < K} f_k(x_k - z_k) / f_k(x_k). Throws DomainError
/// (absolute continuity) when some f_k(x_k) = 0.
double quasi_invariance_factor(const ProductMeasureSpec& spec, const std::vector<PAdic>& z,
                               const std::vector<PAdic>& x, std::size_t K);

/// |rho(z + h, x) - rho(z, x - h) rho(h, x)|.
double cocycle_residual(const ProductMeasureSpec& spec, const std::vector<PAdic>& z,
                        const std::vector<PAdic>& h, const std::vector<PAdic>& x,
                        std::size_t K);

/// Event {x : x_k in B_k for each constrained k}.
struct Cylinder {
  std::vector<std::pair<std::size_t, Ball>> constraints;
};

struct PdMeasureResult {
  Complex value;
  /// r-lattice resolution at which r -> mu(B - r z) is locally constant.
  int resolution;
  /// |value at resolution + 1 - value|.
  double refinement_delta;
};

/// PD_c(b, phi)(r0) for phi(r) = sum over the disjoint cylinders of
/// mu(B - r z), r in Z_p. phi is locally constant at radius
/// min_k p^rho_k / |z_k|, so it is tabulated exactly on that r-lattice and the
/// result is checked against one refinement. Throws PrecisionError when the
/// lattice would exceed 2^20 cells or refinement changes the value by more
/// than 1e-9.
PdMeasureResult pd_of_measure(const ProductMeasureSpec& spec, double b,
                              const std::vector<PAdic>& z,
                              const std::vector<Cylinder>& cylinders,
                              const PAdic& r0);

using SampleFunction = std::function<Complex(const std::vector<PAdic>&)>;

/// (T_h f)(g) = rho(h, g)^(1/2) f(g - h) at each point.
std::vector<Complex> regular_rep_apply(const ProductMeasureSpec& spec,
                                       const std::vector<std::vector<PAdic>>& points,
                                       const std::vector<PAdic>& h, const SampleFunction& f,
                                       std::size_t K);

/// T_h f as a function, for composing representations.
SampleFunction regular_rep(const ProductMeasureSpec& spec, const std::vector<PAdic>& h,
                           SampleFunction f, std::size_t K);

struct UnitarityReport {
  double norm2_f;
  double norm2_Tf;
  /// Standard error of the paired difference |T_h f|^2 - |f|^2.
  double std_error;
  std::size_t samples;
};

/// Monte Carlo estimates of ||f||^2 and ||T_h f||^2 in L^2(mu) from the same
/// sample of mu.
UnitarityReport unitarity_check(const ProductMeasureSpec& spec, const std::vector<PAdic>& h,
                                const SampleFunction& f, std::size_t K, std::size_t samples,
                                std::uint64_t seed, int precision);

/// Draws from a one-dimensional measure: inverse CDF over atoms (spheres
/// about gamma for a q-Gaussian, on which its density is constant; the balls
/// of a second-type density, minus their h sub-balls), then uniform digits
/// inside the atom to the requested precision.
class MeasureSampler {
 public:
  explicit MeasureSampler(OneDimMeasure m);
  PAdic operator()(std::mt19937_64& rng, int precision) const;
  const OneDimMeasure& measure() const { return measure_; }

 private:
  struct Atom {
    Ball ball;
    bool sphere;                ///< only |u - center| = p^radius_exp
    std::vector<Ball> exclude;  ///< rejected sub-balls
  };
  OneDimMeasure measure_;
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
};

std::vector<PAdic> sample(const std::vector<MeasureSampler>& samplers, std::mt19937_64& rng,
                          int precision);

}  // namespace padiclab
