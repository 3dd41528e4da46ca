#include "padiclab/mahler.hpp"

#include <algorithm>
#include <cmath>

namespace padiclab {

namespace {

void require_nonzero_step(const PAdic& h, const PAdic& zeta) {
  if (zeta.is_zero()) throw DomainError("difference quotient with zeta = 0");
  if (h.is_zero()) throw DomainError("difference quotient with zeta h = 0");
}

PAdic quotient_recursive(const ScalarFunction& f, const PAdic& x, std::span<const PAdic> h,
                         std::span<const PAdic> zeta) {
  if (h.empty()) return f(x);
  const std::size_t last = h.size() - 1;
  require_nonzero_step(h[last], zeta[last]);
  const auto h_head = h.first(last);
  const auto z_head = zeta.first(last);
  const PAdic shifted = quotient_recursive(f, x + zeta[last] * h[last], h_head, z_head);
  const PAdic base = quotient_recursive(f, x, h_head, z_head);
  return (shifted - base) / zeta[last];
}

}  // namespace

PAdic binomial(const PAdic& x, int m) {
  const int p = x.prime();
  const int n = x.precision();
  PAdic num = PAdic::one(p, n);
  PAdic den = PAdic::one(p, n);
  for (int k = 0; k < m; ++k) {
    num *= x - PAdic::from_integer(k, p, n);
    den *= PAdic::from_integer(k + 1, p, n);
  }
  return num / den;
}

MahlerExpansion mahler_coefficients(std::span<const PAdic> samples) {
  if (samples.empty()) throw DomainError("mahler_coefficients needs at least one sample");
  const int p = samples.front().prime();
  const int n = samples.front().precision();
  std::vector<PAdic> diff(samples.begin(), samples.end());
  MahlerExpansion out{{}, Ball{PAdic::zero(p, n), 0}};
  out.coefficients.reserve(diff.size());
  // a_m = (Delta^m f)(0); the forward-difference table is exact in Z-arithmetic.
  for (std::size_t m = 0; m < samples.size(); ++m) {
    out.coefficients.push_back(diff[0]);
    for (std::size_t k = 0; k + 1 < diff.size() - m; ++k) diff[k] = diff[k + 1] - diff[k];
  }
  return out;
}

PAdic mahler_evaluate(const MahlerExpansion& expansion, const PAdic& x) {
  if (!x.is_zero() && x.valuation() < 0) throw DomainError("Mahler expansion evaluated off Z_p");
  const int p = x.prime();
  const int n = x.precision();
  PAdic sum = PAdic::zero(p, n);
  PAdic c = PAdic::one(p, n);  // C(x, m), updated by C(x, m) = C(x, m-1) (x - m + 1) / m
  for (std::size_t m = 0; m < expansion.coefficients.size(); ++m) {
    if (m > 0) {
      const auto mi = static_cast<std::int64_t>(m);
      c = c * (x - PAdic::from_integer(mi - 1, p, n)) / PAdic::from_integer(mi, p, n);
    }
    sum += expansion.coefficients[m] * c;
  }
  return sum;
}

GridFunction::GridFunction(Ball domain, int resolution)
    : domain_(std::move(domain)), resolution_(resolution) {
  if (resolution_ < -domain_.radius_exp) {
    throw DomainError("grid resolution coarser than its domain ball");
  }
}

GridFunction GridFunction::tabulate(const ScalarFunction& f, Ball domain, int resolution) {
  GridFunction g(domain, resolution);
  const int p = domain.prime();
  const int n = domain.center.precision();
  const std::uint64_t cells = checked_pow(p, domain.radius_exp + resolution);
  const PAdic step = PAdic::power_of_p(-domain.radius_exp, p, n);
  for (std::uint64_t k = 0; k < cells; ++k) {
    const PAdic x = domain.center + step * PAdic::from_unit(p, n, 0, k);
    g.set(x, f(x));
  }
  return g;
}

GridFunction::Key GridFunction::key(const PAdic& x) const {
  const PAdic t = x.truncated(resolution_);
  return {t.valuation(), t.unit()};
}

void GridFunction::set(const PAdic& x, const PAdic& value) {
  if (!domain_.contains(x)) throw DomainError("grid point outside the declared ball");
  samples_.insert_or_assign(key(x), value);
}

PAdic GridFunction::operator()(const PAdic& x) const {
  if (!domain_.contains(x)) throw DomainError("grid function evaluated outside its ball");
  const auto it = samples_.find(key(x));
  if (it == samples_.end()) throw DomainError("grid function has no sample for " + x.to_string());
  return it->second;
}

PAdic difference_quotient_1(const ScalarFunction& f, const PAdic& x, const PAdic& h,
                            const PAdic& zeta) {
  require_nonzero_step(h, zeta);
  return (f(x + zeta * h) - f(x)) / zeta;
}

PAdic difference_quotient_n(const ScalarFunction& f, const PAdic& x, std::span<const PAdic> h,
                            std::span<const PAdic> zeta) {
  if (h.size() != zeta.size()) throw DomainError("h and zeta must have equal length");
  if (h.empty()) throw DomainError("difference_quotient_n needs n >= 1");
  return quotient_recursive(f, x, h, zeta);
}

FractionalQuotient fractional_quotient(const ScalarFunction& f, const PAdic& x, const PAdic& h,
                                       const PAdic& zeta, double b) {
  require_nonzero_step(h, zeta);
  if (!(b > 0.0 && b <= 1.0)) throw DomainError("fractional order must lie in (0, 1]");
  const PAdic diff = f(x + zeta * h) - f(x);
  if (diff.is_zero()) return {0.0, diff};
  const double magnitude = diff.norm() / j_b_norm(zeta, b);
  PAdic unit = diff.unit_part();
  if (b == 1.0) unit = unit / zeta.unit_part();
  return {magnitude, unit};
}

FractionalQuotient fractional_quotient_n(const ScalarFunction& f, const PAdic& x,
                                         std::span<const PAdic> h, std::span<const PAdic> zeta,
                                         double b) {
  if (h.size() != zeta.size() || h.empty()) {
    throw DomainError("fractional_quotient_n needs n + 1 matching (h, zeta) pairs");
  }
  const std::size_t n = h.size() - 1;
  if (n == 0) return fractional_quotient(f, x, h[0], zeta[0], b);
  const auto h_head = h.first(n);
  const auto z_head = zeta.first(n);
  const ScalarFunction inner = [&](const PAdic& y) {
    return quotient_recursive(f, y, h_head, z_head);
  };
  return fractional_quotient(inner, x, h[n], zeta[n], b);
}

DerivativeProbe derivative_probe(const ScalarFunction& f, const PAdic& x, const PAdic& h,
                                 int probes) {
  if (probes < 2) throw DomainError("derivative_probe needs at least two probes");
  const int p = x.prime();
  const int n = x.precision();
  DerivativeProbe out{{}, {}, PAdic::zero(p, n), true};
  for (int k = 1; k <= probes; ++k) {
    out.values.push_back(difference_quotient_1(f, x, h, PAdic::power_of_p(k, p, n)));
  }
  for (std::size_t k = 1; k < out.values.size(); ++k) {
    out.difference_ord.push_back((out.values[k] - out.values[k - 1]).valuation());
  }
  for (std::size_t k = 1; k < out.difference_ord.size(); ++k) {
    const int prev = out.difference_ord[k - 1];
    const int cur = out.difference_ord[k];
    if (cur == kInfiniteValuation) continue;
    if (prev == kInfiniteValuation || cur < prev + 1) out.converged = false;
  }
  out.estimate = out.values.back();
  return out;
}

double ct_norm_estimate(const ScalarFunction& f, std::span<const QuotientTuple> grid, double t,
                        const Ball& domain) {
  if (grid.empty()) throw DomainError("ct_norm_estimate on an empty grid");
  if (t < 0.0) throw DomainError("smoothness order t must be nonnegative");
  const int whole = static_cast<int>(std::floor(t));
  const double frac = t - whole;
  const std::size_t needed = static_cast<std::size_t>(whole + (frac > 0.0 ? 1 : 0));
  double sup = 0.0;
  for (const auto& tuple : grid) {
    if (tuple.h.size() < needed || tuple.zeta.size() < needed) {
      throw DomainError("quotient tuple carries fewer pairs than ceil(t)");
    }
    if (!domain.contains(tuple.x)) throw DomainError("tuple base point outside U");
    for (std::size_t i = 0; i < needed; ++i) {
      if (tuple.zeta[i].norm() > 1.0) throw DomainError("zeta outside the unit ball S");
      if (!domain.contains(tuple.x + tuple.zeta[i] * tuple.h[i])) {
        throw DomainError("tuple point x + zeta h outside U");
      }
    }
    const std::span<const PAdic> hs(tuple.h);
    const std::span<const PAdic> zs(tuple.zeta);
    sup = std::max(sup, f(tuple.x).norm());
    for (int k = 1; k <= whole; ++k) {
      sup = std::max(sup, difference_quotient_n(f, tuple.x, hs.first(k), zs.first(k)).norm());
    }
    if (frac > 0.0) {
      const auto top = static_cast<std::size_t>(whole + 1);
      sup = std::max(sup, fractional_quotient_n(f, tuple.x, hs.first(top), zs.first(top), frac)
                              .magnitude);
    }
  }
  return sup;
}

}  // namespace padiclab
