#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "padiclab/measures.hpp"
#include "padiclab/pmatrix.hpp"

namespace padiclab {

/// Paving of the time ball B_R = p^-R Z_p by p^level cosets of radius
/// p^(R - level). Representative k is p^-R rev(k), rev reversing the level
/// base-p digits of k, so that coset k of level L is coset p k of level L + 1
/// and consecutive representatives step through the ball like the Monna map
/// does through [0, 1).
struct TimeLattice {
  int p;
  int R;
  int level;

  void validate() const;
  std::uint64_t size() const;
  PAdic time(std::uint64_t k, int precision) const;
  /// Same ball, level + 1.
  TimeLattice refined() const { return {p, R, level + 1}; }
};

/// Increments dw_k = w(t_(k+1)) - w(t_k), one vector per step k < size - 1.
struct NoisePath {
  std::vector<std::vector<PAdic>> increments;
  std::uint64_t seed;
  std::uint64_t stream;

  std::size_t dim() const { return increments.empty() ? 0 : increments.front().size(); }
  /// w(t_k) - w(t_0).
  std::vector<PAdic> value(std::size_t k) const;
};

/// Each coordinate draws from `measure` and is multiplied by scaling[i]
/// (the diagonal of the scaling operator). Stream (seed, stream) makes the
/// path reproducible independently of any other path. Throws SpecError for a
/// zero scaling entry.
NoisePath sample_noise(const MeasureSampler& sampler, const TimeLattice& lattice,
                       const std::vector<PAdic>& scaling, std::uint64_t seed,
                       std::uint64_t stream, int precision);

/// Noise on `lattice` whose increments are the sums of the refined path's
/// increments over each block of p children.
NoisePath coarsen(const NoisePath& fine, const TimeLattice& coarse);

/// Flow on {g in GL_d(Z_p) : g = I mod p}, p odd:
/// a(g) = drift + drift_feedback * (g - I), A(g) dw = sum_i dw_i diffusion[i].
/// drift_feedback = 0 makes both fields left-invariant.
struct GroupFlowSpec {
  int p;
  int d;
  int precision;
  PMatrix drift;
  PAdic drift_feedback;
  std::vector<PMatrix> diffusion;
  PMatrix start;

  /// p odd, shapes, ||drift||, ||diffusion_i|| <= 1/p, drift_feedback in Z_p,
  /// the diffusion matrices linearly independent (ker A = 0), start = I mod p.
  void validate() const;
  PMatrix drift_at(const PMatrix& g) const;
};

/// xi exp(a(xi) dt + A(xi) dw), reduced mod p^precision. Throws
/// ConvergenceError when the exponent leaves ||X|| <= 1/p.
PMatrix euler_exp_step(const PMatrix& xi, const GroupFlowSpec& spec, const PAdic& dt,
                       const std::vector<PAdic>& dw);

struct Trajectory {
  std::vector<PAdic> times;
  std::vector<PMatrix> points;
};

/// Folds euler_exp_step over the lattice from spec.start (or `start` when
/// given). Step errors are rethrown with the step index.
Trajectory simulate_flow(const GroupFlowSpec& spec, const TimeLattice& lattice,
                         const NoisePath& noise,
                         const std::optional<PMatrix>& start = std::nullopt);

/// One JSON object per step: k, t_digits (from p^-R, level digits),
/// xi (entries as digit lists mod p^precision, least significant first).
void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory,
                            const TimeLattice& lattice);

/// Class of g in G / G_(m_q + 1): digits 1..m_q of the entries of g - I,
/// packed row-major (G_1 itself is the whole group, so level m_q resolves
/// p^(m_q d^2) classes).
std::uint64_t quotient_class(const PMatrix& g, int m_q);

struct Histogram {
  int m_q;
  std::uint64_t total;
  std::map<std::uint64_t, std::uint64_t> counts;

  double frequency(std::uint64_t cls) const;
};

/// Ensemble of terminal points xi(t_last) over n_samples paths (path i uses
/// noise stream i), binned by quotient_class. Paths are split across
/// `threads` workers; the result does not depend on the split. Throws
/// CapacityError when p^(m_q d^2) exceeds 10^7.
struct EnsembleConfig {
  const GroupFlowSpec* spec;
  TimeLattice lattice;
  const MeasureSampler* sampler;
  std::vector<PAdic> scaling;
  std::uint64_t seed;
  int threads = 1;
};
Histogram transition_histogram(const EnsembleConfig& config, int m_q, std::uint64_t n_samples,
                               const std::optional<PMatrix>& start = std::nullopt);
/// Columns class_id,count,frequency.
void write_histogram_csv(std::ostream& out, const Histogram& h);
double total_variation(const Histogram& a, const Histogram& b);

struct RatioRow {
  std::uint64_t cls;
  std::uint64_t base_count;
  std::uint64_t shifted_count;
  double ratio;
  /// 95% interval from the log-ratio normal approximation; [0, upper] when
  /// shifted_count = 0.
  double lower;
  double upper;
  /// The class is populated under the base start but empty after the shift:
  /// no positive ratio is supported at this resolution.
  bool flagged;
};

struct RatioTable {
  std::vector<RatioRow> rows;
  /// Classes with base_count = 0 (ratio undefined), excluded from rows.
  std::size_t excluded;
};

/// Histograms from spec.start and from h * spec.start with shared noise,
/// compared class by class.
RatioTable quasi_invariance_empirical(const EnsembleConfig& config, const PMatrix& h, int m_q,
                                      std::uint64_t n_samples);

/// Scalar Picard iteration on the time lattice. The antiderivation
/// P[u^b, w^l] f (t_k) is realized as the Riemann sum
/// sum_{j<k} f(t_j) (dt_j)^b (dw_j)^l along the lattice order, with
/// coefficients a_(b,l)(x) = constant + linear * x.
struct PicardTerm {
  int b;
  int l;
  PAdic constant;
  PAdic linear;
};

struct PicardResult {
  std::vector<PAdic> solution;
  /// max_k |X_(n+1)(t_k) - X_n(t_k)| per iteration.
  std::vector<double> differences;
  int iterations;
  bool converged;
  /// A successive difference grew: the contraction check failed.
  bool diverged;
};

/// Noise coordinate 0 drives the w-terms. Stops once the difference drops
/// below p^(-precision+1).
PicardResult picard_iterate(const std::vector<PicardTerm>& terms, const PAdic& x0,
                            const NoisePath& noise, const TimeLattice& lattice, int n_iter,
                            int precision);

}  // namespace padiclab
