#pragma once

#include <cstdint>
#include <vector>

#include "padiclab/padic.hpp"

namespace padiclab {

/// Square matrix over Q_p with the ultrametric operator norm max_ij |x_ij|.
class PMatrix {
 public:
  PMatrix(int dim, int p, int precision);

  static PMatrix identity(int dim, int p, int precision);
  /// Row-major integer entries.
  static PMatrix from_integers(int p, int precision,
                               const std::vector<std::vector<std::int64_t>>& rows);

  int dim() const noexcept { return dim_; }
  int prime() const noexcept { return p_; }
  int precision() const noexcept { return precision_; }

  PAdic& operator()(int i, int j) { return entries_[static_cast<std::size_t>(i * dim_ + j)]; }
  const PAdic& operator()(int i, int j) const {
    return entries_[static_cast<std::size_t>(i * dim_ + j)];
  }

  double norm() const;
  /// min_ij ord(x_ij); kInfiniteValuation for the zero matrix.
  int valuation() const;
  bool is_zero() const { return valuation() == kInfiniteValuation; }
  /// All entries reduced modulo p^abs_precision.
  PMatrix truncated(int abs_precision) const;
  PMatrix with_precision(int precision) const;
  /// Exact digit-level test g = I mod p (membership in the first congruence
  /// subgroup of GL_d(Z_p)).
  bool congruent_to_identity() const;

  friend PMatrix operator+(const PMatrix& a, const PMatrix& b);
  friend PMatrix operator-(const PMatrix& a, const PMatrix& b);
  friend PMatrix operator*(const PMatrix& a, const PMatrix& b);
  friend PMatrix operator*(const PAdic& s, const PMatrix& a);
  friend bool operator==(const PMatrix& a, const PMatrix& b) = default;

 private:
  int dim_;
  int p_;
  int precision_;
  std::vector<PAdic> entries_;
};

/// XY - YX.
PMatrix commutator(const PMatrix& x, const PMatrix& y);

/// exp(X) = sum_j X^j / j!, for p odd and ||X|| <= 1/p.
///
/// Terms are summed until the lower bound j*ord(X) - (j-1)/(p-1) on their
/// valuation reaches the working precision, so the dropped tail vanishes
/// modulo p^precision. The result is returned reduced mod p^precision and is
/// congruent to I mod p. Throws ConvergenceError outside the domain.
PMatrix matrix_exp(const PMatrix& x, int precision);

/// log(g) = sum_j (-1)^{j+1} (g - I)^j / j, for p odd and ||g - I|| <= 1/p.
/// Inverse of matrix_exp on its domain modulo p^precision.
PMatrix matrix_log(const PMatrix& g, int precision);

}  // namespace padiclab
