#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "padiclab/padic.hpp"

namespace padiclab {

using Complex = std::complex<double>;

/// Finite carrier for functions on Q_p: support in p^-m Z_p, constant on
/// cosets of p^n Z_p. Cell i (0 <= i < p^(m+n)) is the coset of
/// x_i = i p^-m, whose digits d_-m ... d_(n-1) are the base-p digits of i.
struct LatticeSpec {
  int p;
  int m;
  int n;

  /// Throws SpecError for a non-prime p, m + n < 0, or more than 2^26 cells.
  void validate() const;
  std::uint64_t size() const;
  /// Spec of the Fourier image: support p^-n Z_p, resolution p^m.
  LatticeSpec dual() const { return {p, n, m}; }
  /// Haar measure of one cell, p^-n.
  double cell_volume() const;

  /// Representative x_i as an element of Q_p at the given precision.
  PAdic point(std::uint64_t index, int precision = kDefaultPrecision) const;
  /// Cell containing x, or nullopt when x lies outside p^-m Z_p.
  std::optional<std::uint64_t> index_of(const PAdic& x) const;
  /// |x_i|, with |0| = 0 for the cell of the origin.
  double norm(std::uint64_t index) const;
  /// |x_i - x_j|; 0 when i == j.
  double distance(std::uint64_t i, std::uint64_t j) const;
  /// Index of the cell of -x_i.
  std::uint64_t negate(std::uint64_t index) const;

  bool operator==(const LatticeSpec&) const = default;
};

struct LatticeFunction {
  LatticeSpec spec;
  std::vector<Complex> values;

  explicit LatticeFunction(LatticeSpec s);
  LatticeFunction(LatticeSpec s, std::vector<Complex> v);

  /// Indicator of p^-r Z_p, the ball of radius p^r about 0.
  static LatticeFunction ball_indicator(LatticeSpec s, int r);
};

/// p^-n sum of the values.
Complex haar_integral(const LatticeFunction& f);

/// F[f](a) = p^-n sum_b f(b) chi_1(a b), on the dual spec. Exact for locally
/// constant f; computed by a radix-p FFT.
LatticeFunction fourier(const LatticeFunction& f);
/// F^-1[g](x) = int g(a) chi_1(-a x) da, returning to the spec whose dual is g's.
LatticeFunction inverse_fourier(const LatticeFunction& g);
/// Reference O(P^2) character sum.
LatticeFunction fourier_direct(const LatticeFunction& f);

/// (f, g) = int f conj(g).
Complex inner_product(const LatticeFunction& f, const LatticeFunction& g);

/// D^b f = F^-1[|a|^b F[f]] with |0|^b := 0, |a|^b = exp(b log|a|).
///
/// On the lattice the zero cell p^m Z_p of the frequency side is dropped, so
/// the result is the restriction of the true D^b f to p^-m Z_p minus
/// int(f) * zero_cell_weight(spec, b). It coincides with D^b f for f of mean 0.
LatticeFunction vladimirov_multiplier(const LatticeFunction& f, Complex b);
LatticeFunction vladimirov_multiplier(const LatticeFunction& f, double b);

/// int_{p^m Z_p} |a|^b da.
Complex zero_cell_weight(const LatticeSpec& spec, Complex b);

/// (p^b - 1) / (1 - p^(-1-b)): D^b f = vladimirov_constant * pd_kernel(f).
double vladimirov_constant(int p, double b);

/// PD(b, f)(x_i) = int_K (f(x) - f(y)) |x - y|^(-1-b) dy, f extended by zero.
///
/// Lattice cells are summed exactly; the exterior |y| > p^m contributes
/// f(x) (1 - 1/p) p^(-(m+1) b) / (1 - p^-b). Throws DomainError for b <= 0.
Complex pd_kernel(const LatticeFunction& f, double b, std::uint64_t index);
LatticeFunction pd_kernel(const LatticeFunction& f, double b);

/// As pd_kernel with y restricted to the unit ball Z_p. Requires m >= 0 and
/// n >= 0 so that Z_p is a union of cells; b >= 0.
Complex pd_c(const LatticeFunction& f, double b, std::uint64_t index);

struct RieszCheck {
  double lattice_sum;
  double closed_form;
  /// Exact contribution of the dropped ball |x| <= p^-cutoff, the only
  /// difference between the two.
  double omitted_ball;
};

/// int_{Q_p^n} |x|^(nq) chi_1((y, x)) dx with y = (y, 0, ..., 0) and the max
/// norm on Q_p^n. The lattice sum runs over cells of side p^-cutoff in the
/// box |x| <= p^(1 + ord y), outside which every shell integral of the
/// character vanishes; cells are grouped by the norm of their representative.
/// The closed form is (1 - p^(nq)) (1 - p^(-n(q+1)))^-1 |y|^(-n(q+1)).
/// Throws ConvergenceError for y = 0 and DomainError when cutoff < -ord(y),
/// where the character is not constant on cells.
RieszCheck riesz_integral_check(int dim, double q, const PAdic& y, int cutoff);

/// CSV with columns index,real,imag after a one-line JSON header {"p","m","n"}.
void write_lattice_csv(std::ostream& out, const LatticeFunction& f);
LatticeFunction read_lattice_csv(std::istream& in);

}  // namespace padiclab
