#include "padiclab/flows.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "padiclab/random.hpp"

namespace padiclab {

namespace {

constexpr double kMaxClasses = 1e7;

std::uint64_t reverse_digits(std::uint64_t k, int p, int level) {
  std::uint64_t r = 0;
  for (int i = 0; i < level; ++i) {
    r = r * static_cast<std::uint64_t>(p) + k % static_cast<std::uint64_t>(p);
    k /= static_cast<std::uint64_t>(p);
  }
  return r;
}

PAdic power(const PAdic& x, int e) {
  PAdic r = PAdic::one(x.prime(), x.precision());
  for (int i = 0; i < e; ++i) r = r * x;
  return r;
}

bool negligible(const PAdic& x, int precision) {
  return x.is_zero() || x.valuation() >= precision;
}

// Rank of the d^2-vectors of the matrices over Q_p, by elimination with
// minimal-valuation pivots.
std::size_t rank(const std::vector<PMatrix>& ms, int precision) {
  if (ms.empty()) return 0;
  const int d = ms.front().dim();
  std::vector<std::vector<PAdic>> rows;
  for (const auto& m : ms) {
    std::vector<PAdic> row;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) row.push_back(m(i, j));
    }
    rows.push_back(row);
  }
  std::size_t r = 0;
  for (int c = 0; c < d * d && r < rows.size(); ++c) {
    std::size_t pivot = rows.size();
    for (std::size_t i = r; i < rows.size(); ++i) {
      const auto& v = rows[i][static_cast<std::size_t>(c)];
      if (negligible(v, precision)) continue;
      if (pivot == rows.size() || v.valuation() < rows[pivot][static_cast<std::size_t>(c)].valuation()) {
        pivot = i;
      }
    }
    if (pivot == rows.size()) continue;
    std::swap(rows[r], rows[pivot]);
    const PAdic lead = rows[r][static_cast<std::size_t>(c)];
    for (std::size_t i = r + 1; i < rows.size(); ++i) {
      const PAdic f = rows[i][static_cast<std::size_t>(c)] / lead;
      for (std::size_t j = 0; j < rows[i].size(); ++j) rows[i][j] = rows[i][j] - f * rows[r][j];
    }
    ++r;
  }
  return r;
}

void check_in_lie_algebra(const PMatrix& m, const GroupFlowSpec& s, const char* what) {
  if (m.dim() != s.d || m.prime() != s.p) throw SpecError(std::string(what) + " has the wrong shape or prime");
  if (!m.is_zero() && m.valuation() < 1) throw SpecError(std::string(what) + " must lie in p M_d(Z_p)");
}

}  // namespace

void TimeLattice::validate() const {
  if (!is_prime(p)) throw SpecError("time lattice prime is not prime");
  if (level < 0) throw SpecError("time lattice level must be >= 0");
  if (std::pow(static_cast<double>(p), level) > static_cast<double>(1u << 26)) {
    throw CapacityError("time lattice with more than 2^26 cosets");
  }
}

std::uint64_t TimeLattice::size() const { return checked_pow(p, level); }

PAdic TimeLattice::time(std::uint64_t k, int precision) const {
  const auto r = reverse_digits(k, p, level);
  return PAdic::from_integer(static_cast<std::int64_t>(r), p, precision) *
         PAdic::power_of_p(-R, p, precision);
}

std::vector<PAdic> NoisePath::value(std::size_t k) const {
  if (k > increments.size()) throw DomainError("noise index beyond the path");
  std::vector<PAdic> w;
  for (std::size_t i = 0; i < dim(); ++i) {
    PAdic s = PAdic::zero(increments.front()[i].prime(), increments.front()[i].precision());
    for (std::size_t j = 0; j < k; ++j) s = s + increments[j][i];
    w.push_back(s);
  }
  return w;
}

NoisePath sample_noise(const MeasureSampler& sampler, const TimeLattice& lattice,
                       const std::vector<PAdic>& scaling, std::uint64_t seed,
                       std::uint64_t stream, int precision) {
  lattice.validate();
  for (const auto& s : scaling) {
    if (s.is_zero()) throw SpecError("degenerate scaling: zero diagonal entry");
    if (s.prime() != lattice.p) throw SpecError("scaling over a different prime");
  }
  auto rng = make_stream(seed, stream);
  NoisePath path{{}, seed, stream};
  const std::uint64_t steps = lattice.size() - 1;
  path.increments.reserve(steps);
  for (std::uint64_t k = 0; k < steps; ++k) {
    std::vector<PAdic> dw;
    dw.reserve(scaling.size());
    for (const auto& s : scaling) dw.push_back(s.with_precision(precision) * sampler(rng, precision));
    path.increments.push_back(std::move(dw));
  }
  return path;
}

NoisePath coarsen(const NoisePath& fine, const TimeLattice& coarse) {
  const auto p = static_cast<std::uint64_t>(coarse.p);
  const std::uint64_t steps = coarse.size() - 1;
  if (fine.increments.size() != p * coarse.size() - 1) {
    throw DomainError("noise path is not one level finer than the lattice");
  }
  NoisePath out{{}, fine.seed, fine.stream};
  for (std::uint64_t j = 0; j < steps; ++j) {
    std::vector<PAdic> sum = fine.increments[p * j];
    for (std::uint64_t i = p * j + 1; i < p * j + p; ++i) {
      for (std::size_t c = 0; c < sum.size(); ++c) sum[c] = sum[c] + fine.increments[i][c];
    }
    out.increments.push_back(std::move(sum));
  }
  return out;
}

void GroupFlowSpec::validate() const {
  if (!is_prime(p) || p == 2) throw SpecError("group flows need an odd prime");
  if (d < 1) throw SpecError("matrix size must be >= 1");
  check_in_lie_algebra(drift, *this, "drift");
  for (const auto& e : diffusion) check_in_lie_algebra(e, *this, "diffusion matrix");
  if (drift_feedback.prime() != p || (!drift_feedback.is_zero() && drift_feedback.valuation() < 0)) {
    throw SpecError("drift feedback must lie in Z_p");
  }
  if (diffusion.size() > static_cast<std::size_t>(d * d) || rank(diffusion, precision) != diffusion.size()) {
    throw SpecError("diffusion operator is not injective (matrices linearly dependent)");
  }
  if (start.dim() != d || start.prime() != p || !start.congruent_to_identity()) {
    throw SpecError("start point must be congruent to I mod p");
  }
}

PMatrix GroupFlowSpec::drift_at(const PMatrix& g) const {
  if (drift_feedback.is_zero()) return drift;
  return drift + drift_feedback * (g - PMatrix::identity(d, p, precision));
}

PMatrix euler_exp_step(const PMatrix& xi, const GroupFlowSpec& spec, const PAdic& dt,
                       const std::vector<PAdic>& dw) {
  if (dw.size() != spec.diffusion.size()) throw DomainError("noise dimension differs from diffusion");
  PMatrix x = dt * spec.drift_at(xi);
  for (std::size_t i = 0; i < dw.size(); ++i) x = x + dw[i] * spec.diffusion[i];
  if (!x.is_zero() && x.valuation() < 1) {
    throw ConvergenceError("exponent a dt + A dw has norm " + std::to_string(x.norm()) +
                               " > 1/p: outside the exp domain",
                           x.norm());
  }
  return (xi * matrix_exp(x, spec.precision)).truncated(spec.precision);
}

Trajectory simulate_flow(const GroupFlowSpec& spec, const TimeLattice& lattice,
                         const NoisePath& noise, const std::optional<PMatrix>& start) {
  lattice.validate();
  const std::uint64_t n = lattice.size();
  if (noise.increments.size() != n - 1) throw DomainError("noise path does not match the time lattice");
  Trajectory out;
  out.times.reserve(n);
  out.points.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) out.times.push_back(lattice.time(k, spec.precision));
  out.points.push_back(start.value_or(spec.start));
  for (std::uint64_t k = 0; k + 1 < n; ++k) {
    try {
      out.points.push_back(euler_exp_step(out.points.back(), spec, out.times[k + 1] - out.times[k],
                                          noise.increments[k]));
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("step " + std::to_string(k) + ": " + e.what(), e.offending_norm());
    }
  }
  return out;
}

void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory,
                            const TimeLattice& lattice) {
  for (std::size_t k = 0; k < trajectory.points.size(); ++k) {
    const PMatrix& m = trajectory.points[k];
    std::vector<int> t_digits;
    for (int i = 0; i < lattice.level; ++i) t_digits.push_back(trajectory.times[k].digit(i - lattice.R));
    nlohmann::json xi = nlohmann::json::array();
    for (int i = 0; i < m.dim(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < m.dim(); ++j) {
        std::vector<int> digits;
        for (int e = 0; e < m.precision(); ++e) digits.push_back(m(i, j).digit(e));
        row.push_back(digits);
      }
      xi.push_back(row);
    }
    out << nlohmann::json{{"k", k}, {"t_digits", t_digits}, {"xi", xi}}.dump() << '\n';
  }
}

std::uint64_t quotient_class(const PMatrix& g, int m_q) {
  const auto p = static_cast<std::uint64_t>(g.prime());
  std::uint64_t cls = 0;
  for (int i = 0; i < g.dim(); ++i) {
    for (int j = 0; j < g.dim(); ++j) {
      const PAdic x = i == j ? g(i, j) - PAdic::one(g.prime(), g.precision()) : g(i, j);
      for (int e = 1; e <= m_q; ++e) cls = cls * p + static_cast<std::uint64_t>(x.digit(e));
    }
  }
  return cls;
}

double Histogram::frequency(std::uint64_t cls) const {
  const auto it = counts.find(cls);
  return it == counts.end() || total == 0 ? 0.0
                                          : static_cast<double>(it->second) / static_cast<double>(total);
}

Histogram transition_histogram(const EnsembleConfig& config, int m_q, std::uint64_t n_samples,
                               const std::optional<PMatrix>& start) {
  const GroupFlowSpec& spec = *config.spec;
  spec.validate();
  if (m_q < 1) throw DomainError("quotient level m_q must be >= 1");
  if (std::pow(static_cast<double>(spec.p), m_q * spec.d * spec.d) > kMaxClasses) {
    throw CapacityError("quotient G/G_" + std::to_string(m_q + 1) + " has more than 10^7 classes");
  }
  const int workers = std::max(1, config.threads);
  std::vector<std::map<std::uint64_t, std::uint64_t>> partial(static_cast<std::size_t>(workers));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto work = [&](int w) {
    try {
      for (std::uint64_t i = static_cast<std::uint64_t>(w); i < n_samples; i += static_cast<std::uint64_t>(workers)) {
        const NoisePath noise =
            sample_noise(*config.sampler, config.lattice, config.scaling, config.seed, i, spec.precision);
        const Trajectory t = simulate_flow(spec, config.lattice, noise, start);
        ++partial[static_cast<std::size_t>(w)][quotient_class(t.points.back(), m_q)];
      }
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Histogram h{m_q, n_samples, {}};
  for (const auto& part : partial) {
    for (const auto& [cls, c] : part) h.counts[cls] += c;
  }
  return h;
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "class_id,count,frequency\n";
  out.precision(17);
  for (const auto& [cls, c] : h.counts) out << cls << ',' << c << ',' << h.frequency(cls) << '\n';
}

double total_variation(const Histogram& a, const Histogram& b) {
  double tv = 0.0;
  for (const auto& [cls, c] : a.counts) tv += std::abs(a.frequency(cls) - b.frequency(cls));
  for (const auto& [cls, c] : b.counts) {
    if (!a.counts.contains(cls)) tv += b.frequency(cls);
  }
  return tv / 2.0;
}

RatioTable quasi_invariance_empirical(const EnsembleConfig& config, const PMatrix& h, int m_q,
                                      std::uint64_t n_samples) {
  if (!h.congruent_to_identity()) throw DomainError("shift h must be congruent to I mod p");
  const Histogram base = transition_histogram(config, m_q, n_samples);
  const Histogram moved =
      transition_histogram(config, m_q, n_samples, (h * config.spec->start).truncated(config.spec->precision));
  RatioTable table{{}, 0};
  for (const auto& [cls, b] : base.counts) {
    const auto it = moved.counts.find(cls);
    const std::uint64_t s = it == moved.counts.end() ? 0 : it->second;
    RatioRow row{cls, b, s, static_cast<double>(s) / static_cast<double>(b), 0.0, 0.0, s == 0};
    if (s > 0) {
      const double se = std::sqrt(1.0 / static_cast<double>(s) + 1.0 / static_cast<double>(b));
      row.lower = row.ratio * std::exp(-1.96 * se);
      row.upper = row.ratio * std::exp(1.96 * se);
    } else {
      row.upper = 3.0 / static_cast<double>(b);
    }
    table.rows.push_back(row);
  }
  for (const auto& [cls, s] : moved.counts) {
    if (!base.counts.contains(cls)) ++table.excluded;
  }
  return table;
}

PicardResult picard_iterate(const std::vector<PicardTerm>& terms, const PAdic& x0,
                            const NoisePath& noise, const TimeLattice& lattice, int n_iter,
                            int precision) {
  lattice.validate();
  const std::uint64_t n = lattice.size();
  if (noise.increments.size() != n - 1) throw DomainError("noise path does not match the time lattice");
  if (n_iter < 1) throw DomainError("picard_iterate needs n_iter >= 1");
  for (const auto& t : terms) {
    if (t.b < 0 || t.l < 0) throw DomainError("Picard exponents must be >= 0");
    if (t.l > 0 && noise.dim() == 0) throw DomainError("w-terms need a noise coordinate");
  }
  // weights (dt_j)^b (dw_j)^l per term and step
  std::vector<std::vector<PAdic>> weight(terms.size());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    for (std::uint64_t j = 0; j + 1 < n; ++j) {
      const PAdic dt = lattice.time(j + 1, precision) - lattice.time(j, precision);
      PAdic w = power(dt, terms[t].b);
      if (terms[t].l > 0) w = w * power(noise.increments[j][0].with_precision(precision), terms[t].l);
      weight[t].push_back(w);
    }
  }
  const PAdic start = x0.with_precision(precision).truncated(precision);
  std::vector<PAdic> x(n, start);
  PicardResult out{{}, {}, 0, false, false};
  for (int it = 0; it < n_iter; ++it) {
    std::vector<PAdic> next(n, start);
    PAdic acc = PAdic::zero(x0.prime(), precision);
    for (std::uint64_t k = 1; k < n; ++k) {
      for (std::size_t t = 0; t < terms.size(); ++t) {
        const PAdic a = terms[t].constant + terms[t].linear * x[k - 1];
        acc = (acc + a * weight[t][k - 1]).truncated(precision);
      }
      next[k] = (start + acc).truncated(precision);
    }
    double diff = 0.0;
    for (std::uint64_t k = 0; k < n; ++k) {
      const PAdic d = (next[k] - x[k]).truncated(precision);
      if (!negligible(d, precision)) diff = std::max(diff, d.norm());
    }
    x = std::move(next);
    out.iterations = it + 1;
    out.differences.push_back(diff);
    if (out.differences.size() >= 2 && diff > out.differences[out.differences.size() - 2]) {
      out.diverged = true;
      break;
    }
    if (diff < std::pow(static_cast<double>(x0.prime()), -precision + 1)) {
      out.converged = true;
      break;
    }
  }
  out.solution = std::move(x);
  return out;
}

}  // namespace padiclab
