#pragma once

#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "padiclab/padic.hpp"

namespace padiclab {

/// F : U -> Q_p, U a ball in Q_p.
using ScalarFunction = std::function<PAdic(const PAdic&)>;

/// f(x) = sum_m a_m C(x, m) on Z_p.
struct MahlerExpansion {
  std::vector<PAdic> coefficients;
  Ball domain;
};

/// C(x, m) = x (x-1) ... (x-m+1) / m! in truncated arithmetic.
PAdic binomial(const PAdic& x, int m);

/// Coefficients from the samples f(0), ..., f(M) by iterated forward
/// differences, a_m = sum_k (-1)^{m-k} C(m, k) f(k). Exact: interpolates
/// every sample.
MahlerExpansion mahler_coefficients(std::span<const PAdic> samples);

/// Throws DomainError for x outside Z_p.
PAdic mahler_evaluate(const MahlerExpansion& expansion, const PAdic& x);

/// Finite carrier for F : U -> Q_p, locally constant at p^-resolution: the
/// value at x is the sample stored for x mod p^resolution.
class GridFunction {
 public:
  GridFunction(Ball domain, int resolution);

  /// Samples f on every cell of the domain (p^(r + resolution) cells).
  static GridFunction tabulate(const ScalarFunction& f, Ball domain, int resolution);

  void set(const PAdic& x, const PAdic& value);
  /// Throws DomainError for x outside the domain or an unsampled cell.
  PAdic operator()(const PAdic& x) const;

  const Ball& domain() const { return domain_; }
  int resolution() const { return resolution_; }
  std::size_t size() const { return samples_.size(); }

 private:
  using Key = std::pair<int, std::uint64_t>;
  Key key(const PAdic& x) const;

  Ball domain_;
  int resolution_;
  std::map<Key, PAdic> samples_;
};

/// Phi^1 F(x; h; zeta) = (F(x + zeta h) - F(x)) / zeta; zeta h != 0.
PAdic difference_quotient_1(const ScalarFunction& f, const PAdic& x, const PAdic& h,
                            const PAdic& zeta);

/// Phi^n by the recursion on the last pair (h_n, zeta_n):
/// Phi^n F(x; h..; z..) = (Phi^{n-1} F(x + z_n h_n; ...) - Phi^{n-1} F(x; ...)) / z_n.
PAdic difference_quotient_n(const ScalarFunction& f, const PAdic& x, std::span<const PAdic> h,
                            std::span<const PAdic> zeta);

/// Phi^b as (magnitude, unit): magnitude |F(x + zeta h) - F(x)| |zeta|^-b and the
/// unit part of the numerator (j_b(zeta) = p^{b ord zeta} carries no unit for
/// b < 1; for b = 1 it is zeta itself and its unit is divided out).
struct FractionalQuotient {
  double magnitude;
  PAdic unit;
};

FractionalQuotient fractional_quotient(const ScalarFunction& f, const PAdic& x, const PAdic& h,
                                       const PAdic& zeta, double b);

/// Phi^{n+b} F = Phi^b(Phi^n F): the first n pairs drive Phi^n, the last pair
/// is the fractional step.
FractionalQuotient fractional_quotient_n(const ScalarFunction& f, const PAdic& x,
                                         std::span<const PAdic> h, std::span<const PAdic> zeta,
                                         double b);

/// Extension of Phi^1 to zeta = 0 by probing zeta = p, p^2, ..., p^probes.
struct DerivativeProbe {
  std::vector<PAdic> values;       ///< Phi^1 at each probe
  std::vector<int> difference_ord; ///< ord of successive differences
  PAdic estimate;                  ///< last probe value
  bool converged;                  ///< each difference shrinks by a factor >= p
};

DerivativeProbe derivative_probe(const ScalarFunction& f, const PAdic& x, const PAdic& h,
                                 int probes = 3);

/// One sampled point of U x V^s x S^s for the C(t) norm.
struct QuotientTuple {
  PAdic x;
  std::vector<PAdic> h;
  std::vector<PAdic> zeta;
};

/// Lower estimate of ||F||_{C(t, U -> Q_p)}: the sup over 0 <= v <= t of |Phi^v F|
/// restricted to the sampled tuples.
///
/// For |zeta| <= 1 a fractional level k + b' is dominated by level k + 1 on the
/// same tuple, so the sup is attained on the integer levels 0..[t] and on t
/// itself. Each tuple must carry ceil(t) nonzero zeta. Throws DomainError for an
/// empty grid or a tuple leaving U.
double ct_norm_estimate(const ScalarFunction& f, std::span<const QuotientTuple> grid, double t,
                        const Ball& domain);

}  // namespace padiclab
