#include "padiclab/pmatrix.hpp"

#include <algorithm>
#include <string>

namespace padiclab {

namespace {

void check_same_shape(const PMatrix& a, const PMatrix& b) {
  if (a.dim() != b.dim() || a.prime() != b.prime()) {
    throw DomainError("matrix shape or prime mismatch");
  }
}

void check_series_domain(const PMatrix& x, const char* what) {
  if (x.prime() == 2) {
    throw ConvergenceError(std::string(what) + ": p = 2 is not supported", x.norm());
  }
  if (!x.is_zero() && x.valuation() < 1) {
    throw ConvergenceError(std::string(what) + ": argument norm " + std::to_string(x.norm()) +
                               " exceeds 1/p",
                           x.norm());
  }
}

int floor_log(int p, long long j) {
  int e = 0;
  while (j >= p) {
    j /= p;
    ++e;
  }
  return e;
}

}  // namespace

PMatrix::PMatrix(int dim, int p, int precision)
    : dim_(dim), p_(p), precision_(precision),
      entries_(static_cast<std::size_t>(dim * dim), PAdic::zero(p, precision)) {
  if (dim < 1) throw DomainError("matrix dimension must be positive");
}

PMatrix PMatrix::identity(int dim, int p, int precision) {
  PMatrix m(dim, p, precision);
  for (int i = 0; i < dim; ++i) m(i, i) = PAdic::one(p, precision);
  return m;
}

PMatrix PMatrix::from_integers(int p, int precision,
                               const std::vector<std::vector<std::int64_t>>& rows) {
  const int d = static_cast<int>(rows.size());
  PMatrix m(d, p, precision);
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(rows[i].size()) != d) throw DomainError("matrix must be square");
    for (int j = 0; j < d; ++j) m(i, j) = PAdic::from_integer(rows[i][j], p, precision);
  }
  return m;
}

double PMatrix::norm() const {
  double n = 0.0;
  for (const auto& e : entries_) n = std::max(n, e.norm());
  return n;
}

int PMatrix::valuation() const {
  int v = kInfiniteValuation;
  for (const auto& e : entries_) v = std::min(v, e.valuation());
  return v;
}

PMatrix PMatrix::truncated(int abs_precision) const {
  PMatrix out = *this;
  for (auto& e : out.entries_) e = e.truncated(abs_precision);
  return out;
}

PMatrix PMatrix::with_precision(int precision) const {
  PMatrix out(dim_, p_, precision);
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    out.entries_[k] = entries_[k].with_precision(precision);
  }
  return out;
}

bool PMatrix::congruent_to_identity() const {
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < dim_; ++j) {
      const PAdic& e = (*this)(i, j);
      if (!e.is_zero() && e.valuation() < 0) return false;
      const int expected = i == j ? 1 : 0;
      if (e.digit(0) != expected) return false;
    }
  }
  return true;
}

PMatrix operator+(const PMatrix& a, const PMatrix& b) {
  check_same_shape(a, b);
  PMatrix out(a.dim_, a.p_, std::min(a.precision_, b.precision_));
  for (std::size_t k = 0; k < a.entries_.size(); ++k) {
    out.entries_[k] = a.entries_[k] + b.entries_[k];
  }
  return out;
}

PMatrix operator-(const PMatrix& a, const PMatrix& b) {
  check_same_shape(a, b);
  PMatrix out(a.dim_, a.p_, std::min(a.precision_, b.precision_));
  for (std::size_t k = 0; k < a.entries_.size(); ++k) {
    out.entries_[k] = a.entries_[k] - b.entries_[k];
  }
  return out;
}

PMatrix operator*(const PMatrix& a, const PMatrix& b) {
  check_same_shape(a, b);
  const int d = a.dim_;
  PMatrix out(d, a.p_, std::min(a.precision_, b.precision_));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      PAdic acc = PAdic::zero(a.p_, out.precision_);
      for (int k = 0; k < d; ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

PMatrix operator*(const PAdic& s, const PMatrix& a) {
  PMatrix out = a;
  for (auto& e : out.entries_) e = s * e;
  out.precision_ = std::min(a.precision_, s.precision());
  return out;
}

PMatrix commutator(const PMatrix& x, const PMatrix& y) { return x * y - y * x; }

PMatrix matrix_exp(const PMatrix& x_in, int precision) {
  check_series_domain(x_in, "matrix_exp");
  const int p = x_in.prime();
  const PMatrix x = x_in.with_precision(precision);
  PMatrix sum = PMatrix::identity(x.dim(), p, precision);
  if (x.is_zero()) return sum;
  const int v = x.valuation();
  PMatrix term = sum;
  for (long long j = 1;; ++j) {
    // ord(X^j / j!) >= j v - (j - 1)/(p - 1); once this reaches the working
    // precision every later term does too.
    const long long bound = j * v - (j - 1) / (p - 1);
    if (bound >= precision) break;
    term = term * x;
    term = (PAdic::one(p, precision) / PAdic::from_integer(j, p, precision)) * term;
    sum = sum + term;
  }
  return sum.truncated(precision);
}

PMatrix matrix_log(const PMatrix& g_in, int precision) {
  const int p = g_in.prime();
  const PMatrix g = g_in.with_precision(precision);
  const PMatrix y = g - PMatrix::identity(g.dim(), p, precision);
  check_series_domain(y, "matrix_log");
  PMatrix sum(g.dim(), p, precision);
  if (y.is_zero()) return sum;
  const int v = y.valuation();
  PMatrix power = PMatrix::identity(g.dim(), p, precision);
  for (long long j = 1;; ++j) {
    const long long bound = j * v - floor_log(p, j);
    if (bound >= precision) break;
    power = power * y;
    PAdic coeff = PAdic::one(p, precision) / PAdic::from_integer(j, p, precision);
    if (j % 2 == 0) coeff = -coeff;
    sum = sum + coeff * power;
  }
  return sum.truncated(precision);
}

}  // namespace padiclab
