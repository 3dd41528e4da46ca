#include "padiclab/lattice.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace padiclab {

namespace {

constexpr std::uint64_t kMaxCells = std::uint64_t{1} << 26;

int ord_of(std::uint64_t v, int p) {
  int e = 0;
  while (v % static_cast<std::uint64_t>(p) == 0) {
    v /= static_cast<std::uint64_t>(p);
    ++e;
  }
  return e;
}

int exponent(const LatticeSpec& s) { return s.m + s.n; }

// e^(2 pi i t / P) for t < P, shared per (p, L).
std::shared_ptr<const std::vector<Complex>> twiddles(int p, int levels) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const std::vector<Complex>>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{p, levels}];
  if (!slot) {
    const std::uint64_t size = checked_pow(p, levels);
    auto table = std::make_shared<std::vector<Complex>>(size);
    for (std::uint64_t t = 0; t < size; ++t) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(size);
      (*table)[t] = {std::cos(angle), std::sin(angle)};
    }
    slot = std::move(table);
  }
  return slot;
}

std::uint64_t digit_reverse(std::uint64_t i, int p, int levels) {
  std::uint64_t r = 0;
  for (int k = 0; k < levels; ++k) {
    r = r * static_cast<std::uint64_t>(p) + i % static_cast<std::uint64_t>(p);
    i /= static_cast<std::uint64_t>(p);
  }
  return r;
}

// A(k) = sum_j a_j e^(2 pi i jk / P), decimation in time over base-p digits.
std::vector<Complex> dft_plus(const std::vector<Complex>& a, int p, int levels) {
  const std::uint64_t size = a.size();
  std::vector<Complex> x(size);
  for (std::uint64_t i = 0; i < size; ++i) x[digit_reverse(i, p, levels)] = a[i];
  const auto table = twiddles(p, levels);
  const auto& w = *table;
  std::vector<Complex> inputs(static_cast<std::size_t>(p));
  const auto up = static_cast<std::uint64_t>(p);
  for (std::uint64_t len = up; len <= size; len *= up) {
    const std::uint64_t sub = len / up;
    const std::uint64_t stride = size / len;
    for (std::uint64_t start = 0; start < size; start += len) {
      for (std::uint64_t k = 0; k < sub; ++k) {
        for (std::uint64_t t = 0; t < up; ++t) inputs[t] = x[start + t * sub + k];
        for (std::uint64_t r = 0; r < up; ++r) {
          const std::uint64_t kk = k + r * sub;
          Complex acc = inputs[0];
          for (std::uint64_t t = 1; t < up; ++t) acc += inputs[t] * w[(t * kk % len) * stride];
          x[start + kk] = acc;
        }
      }
    }
  }
  return x;
}

void require_positive_order(double b) {
  if (!(b > 0.0)) throw DomainError("kernel form of PD requires b > 0");
}

}  // namespace

void LatticeSpec::validate() const {
  if (!is_prime(p)) throw SpecError("lattice prime " + std::to_string(p) + " is not prime");
  if (m + n < 0) throw SpecError("lattice needs m + n >= 0");
  std::uint64_t cells = 1;
  for (int k = 0; k < m + n; ++k) {
    cells *= static_cast<std::uint64_t>(p);
    if (cells > kMaxCells) throw SpecError("lattice exceeds 2^26 cells");
  }
}

std::uint64_t LatticeSpec::size() const { return checked_pow(p, m + n); }

double LatticeSpec::cell_volume() const { return std::pow(static_cast<double>(p), -n); }

PAdic LatticeSpec::point(std::uint64_t index, int precision) const {
  if (index >= size()) throw DomainError("lattice index out of range");
  if (index == 0) return PAdic::zero(p, precision);
  const int e = ord_of(index, p);
  return PAdic::from_unit(p, precision, e - m, index / checked_pow(p, e));
}

std::optional<std::uint64_t> LatticeSpec::index_of(const PAdic& x) const {
  if (x.is_zero()) return 0;
  if (x.valuation() < -m) return std::nullopt;
  const int shifted = x.valuation() + m;  // ord of x p^m
  const int levels = m + n;
  if (shifted >= levels) return 0;
  const std::uint64_t unit = x.unit() % checked_pow(p, levels - shifted);
  return unit * checked_pow(p, shifted);
}

double LatticeSpec::norm(std::uint64_t index) const {
  if (index == 0) return 0.0;
  return std::pow(static_cast<double>(p), m - ord_of(index, p));
}

double LatticeSpec::distance(std::uint64_t i, std::uint64_t j) const {
  if (i == j) return 0.0;
  const std::uint64_t d = i > j ? i - j : j - i;
  return std::pow(static_cast<double>(p), m - ord_of(d, p));
}

std::uint64_t LatticeSpec::negate(std::uint64_t index) const {
  const std::uint64_t s = size();
  return (s - index % s) % s;
}

LatticeFunction::LatticeFunction(LatticeSpec s) : spec(s) {
  spec.validate();
  values.assign(spec.size(), Complex{});
}

LatticeFunction::LatticeFunction(LatticeSpec s, std::vector<Complex> v)
    : spec(s), values(std::move(v)) {
  spec.validate();
  if (values.size() != spec.size()) throw SpecError("lattice function has the wrong length");
}

LatticeFunction LatticeFunction::ball_indicator(LatticeSpec s, int r) {
  LatticeFunction f(s);
  for (std::uint64_t i = 0; i < f.values.size(); ++i) {
    // x_i in p^-r Z_p iff ord(x_i) >= -r; the origin cell always is.
    if (i == 0 || ord_of(i, s.p) - s.m >= -r) f.values[i] = 1.0;
  }
  return f;
}

Complex haar_integral(const LatticeFunction& f) {
  Complex sum{};
  for (const auto& v : f.values) sum += v;
  return sum * f.spec.cell_volume();
}

LatticeFunction fourier(const LatticeFunction& f) {
  auto values = dft_plus(f.values, f.spec.p, exponent(f.spec));
  const double scale = f.spec.cell_volume();
  for (auto& v : values) v *= scale;
  return {f.spec.dual(), std::move(values)};
}

LatticeFunction inverse_fourier(const LatticeFunction& g) {
  const LatticeFunction forward = fourier(g);
  LatticeFunction out(forward.spec);
  for (std::uint64_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = forward.values[forward.spec.negate(i)];
  }
  return out;
}

LatticeFunction fourier_direct(const LatticeFunction& f) {
  const std::uint64_t size = f.values.size();
  const auto table = twiddles(f.spec.p, exponent(f.spec));
  LatticeFunction out(f.spec.dual());
  for (std::uint64_t j = 0; j < size; ++j) {
    Complex acc{};
    for (std::uint64_t i = 0; i < size; ++i) {
      const auto t = static_cast<std::uint64_t>((static_cast<unsigned __int128>(i) * j) % size);
      acc += f.values[i] * (*table)[t];
    }
    out.values[j] = acc * f.spec.cell_volume();
  }
  return out;
}

Complex inner_product(const LatticeFunction& f, const LatticeFunction& g) {
  if (!(f.spec == g.spec)) throw SpecError("inner product of functions on different lattices");
  Complex sum{};
  for (std::size_t i = 0; i < f.values.size(); ++i) sum += f.values[i] * std::conj(g.values[i]);
  return sum * f.spec.cell_volume();
}

LatticeFunction vladimirov_multiplier(const LatticeFunction& f, Complex b) {
  LatticeFunction spectrum = fourier(f);
  const LatticeSpec& dual = spectrum.spec;
  for (std::uint64_t j = 0; j < spectrum.values.size(); ++j) {
    spectrum.values[j] *= j == 0 ? Complex{} : std::exp(b * std::log(dual.norm(j)));
  }
  return inverse_fourier(spectrum);
}

LatticeFunction vladimirov_multiplier(const LatticeFunction& f, double b) {
  if (!(b > 0.0)) throw DomainError("vladimirov_multiplier requires b > 0");
  return vladimirov_multiplier(f, Complex{b, 0.0});
}

Complex zero_cell_weight(const LatticeSpec& spec, Complex b) {
  const double p = spec.p;
  const Complex log_p = std::log(p);
  return (1.0 - 1.0 / p) * std::exp(-static_cast<double>(spec.m) * (1.0 + b) * log_p) /
         (1.0 - std::exp(-(1.0 + b) * log_p));
}

double vladimirov_constant(int p, double b) {
  return (std::pow(p, b) - 1.0) / (1.0 - std::pow(p, -1.0 - b));
}

namespace {

double exterior_tail(const LatticeSpec& s, double b) {
  const double p = s.p;
  return (1.0 - 1.0 / p) * std::pow(p, -(s.m + 1) * b) / (1.0 - std::pow(p, -b));
}

}  // namespace

Complex pd_kernel(const LatticeFunction& f, double b, std::uint64_t index) {
  require_positive_order(b);
  const LatticeSpec& s = f.spec;
  if (index >= f.values.size()) throw DomainError("lattice index out of range");
  const Complex fx = f.values[index];
  Complex sum{};
  for (std::uint64_t j = 0; j < f.values.size(); ++j) {
    if (j == index) continue;
    sum += (fx - f.values[j]) * std::pow(s.distance(index, j), -1.0 - b);
  }
  return sum * s.cell_volume() + fx * exterior_tail(s, b);
}

LatticeFunction pd_kernel(const LatticeFunction& f, double b) {
  require_positive_order(b);
  const LatticeSpec& s = f.spec;
  const int levels = exponent(s);
  const std::uint64_t size = f.values.size();
  const auto up = static_cast<std::uint64_t>(s.p);
  // residue_sums[e][r] = sum of f over cells j = r mod p^e.
  std::vector<std::vector<Complex>> residue_sums(static_cast<std::size_t>(levels) + 1);
  residue_sums[static_cast<std::size_t>(levels)] = f.values;
  for (int e = levels - 1; e >= 0; --e) {
    const auto& finer = residue_sums[static_cast<std::size_t>(e) + 1];
    auto& coarse = residue_sums[static_cast<std::size_t>(e)];
    const std::uint64_t modulus = checked_pow(s.p, e);
    coarse.assign(modulus, Complex{});
    for (std::uint64_t r = 0; r < finer.size(); ++r) coarse[r % modulus] += finer[r];
  }
  // cells at distance p^(m - e) from x_i: j = i mod p^e, j != i mod p^(e+1).
  std::vector<double> weight(static_cast<std::size_t>(levels));
  std::vector<double> count(static_cast<std::size_t>(levels));
  for (int e = 0; e < levels; ++e) {
    weight[static_cast<std::size_t>(e)] = std::pow(static_cast<double>(s.p), (s.m - e) * (-1.0 - b));
    count[static_cast<std::size_t>(e)] =
        static_cast<double>(checked_pow(s.p, levels - e) - checked_pow(s.p, levels - e - 1));
  }
  const double tail = exterior_tail(s, b);
  LatticeFunction out(s);
  for (std::uint64_t i = 0; i < size; ++i) {
    const Complex fx = f.values[i];
    Complex sum{};
    std::uint64_t modulus = 1;
    for (int e = 0; e < levels; ++e) {
      const Complex shell = residue_sums[static_cast<std::size_t>(e)][i % modulus] -
                            residue_sums[static_cast<std::size_t>(e) + 1][i % (modulus * up)];
      sum += (fx * count[static_cast<std::size_t>(e)] - shell) * weight[static_cast<std::size_t>(e)];
      modulus *= up;
    }
    out.values[i] = sum * s.cell_volume() + fx * tail;
  }
  return out;
}

Complex pd_c(const LatticeFunction& f, double b, std::uint64_t index) {
  if (!(b >= 0.0)) throw DomainError("pd_c needs b >= 0");
  const LatticeSpec& s = f.spec;
  if (s.m < 0 || s.n < 0) throw DomainError("pd_c needs Z_p to be a union of lattice cells");
  if (index >= f.values.size()) throw DomainError("lattice index out of range");
  const Complex fx = f.values[index];
  const std::uint64_t step = checked_pow(s.p, s.m);  // x_j in Z_p iff p^m | j
  Complex sum{};
  for (std::uint64_t j = 0; j < f.values.size(); j += step) {
    if (j == index) continue;
    sum += (fx - f.values[j]) * std::pow(s.distance(index, j), -1.0 - b);
  }
  return sum * s.cell_volume();
}

RieszCheck riesz_integral_check(int dim, double q, const PAdic& y, int cutoff) {
  if (dim < 1) throw DomainError("riesz_integral_check needs dimension >= 1");
  if (!(q > 0.0)) throw DomainError("riesz_integral_check needs q > 0");
  if (y.is_zero()) throw ConvergenceError("Riesz integral diverges at y = 0", 0.0);
  const int v = y.valuation();
  if (cutoff < -v) throw DomainError("cutoff below the constancy scale of chi(y x)");
  const int p = y.prime();
  const double pd = p;
  const double alpha = dim * q;
  const LatticeSpec s{p, v + 1, cutoff};
  s.validate();
  const int levels = exponent(s);
  const std::uint64_t size = s.size();

  // Tuples whose other dim - 1 coordinates all have ord >= e: p^((L - e)(dim - 1)).
  auto others_at_least = [&](int e) {
    return std::pow(pd, static_cast<double>(levels - e) * (dim - 1));
  };
  auto level_value = [&](int e) { return std::pow(pd, alpha * (s.m - e)); };
  std::vector<double> bracket(static_cast<std::size_t>(levels) + 1, 0.0);
  for (int e1 = 0; e1 <= levels; ++e1) {
    double acc = 0.0;
    for (int e = 0; e < e1; ++e) acc += (others_at_least(e) - others_at_least(e + 1)) * level_value(e);
    if (e1 < levels) acc += others_at_least(e1) * level_value(e1);
    bracket[static_cast<std::size_t>(e1)] = acc;
  }
  double sum = 0.0;
  for (std::uint64_t i = 0; i < size; ++i) {
    const int e1 = i == 0 ? levels : ord_of(i, p);
    sum += std::real(additive_character(y * s.point(i, y.precision()))) *
           bracket[static_cast<std::size_t>(e1)];
  }
  RieszCheck out{};
  out.lattice_sum = sum * std::pow(pd, -static_cast<double>(cutoff) * dim);
  const double total = alpha + dim;
  out.closed_form = (1.0 - std::pow(pd, alpha)) / (1.0 - std::pow(pd, -total)) *
                    std::pow(y.norm(), -total);
  out.omitted_ball = std::pow(pd, -cutoff * total) * (1.0 - std::pow(pd, -dim)) /
                     (1.0 - std::pow(pd, -total));
  return out;
}

void write_lattice_csv(std::ostream& out, const LatticeFunction& f) {
  const nlohmann::json header{{"p", f.spec.p}, {"m", f.spec.m}, {"n", f.spec.n}};
  out << header.dump() << "\nindex,real,imag\n";
  out.precision(17);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    out << i << ',' << f.values[i].real() << ',' << f.values[i].imag() << '\n';
  }
}

LatticeFunction read_lattice_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SpecError("lattice CSV is empty");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("lattice CSV header: ") + e.what());
  }
  const LatticeSpec spec{header.at("p").get<int>(), header.at("m").get<int>(),
                         header.at("n").get<int>()};
  LatticeFunction f(spec);
  if (!std::getline(in, line) || line != "index,real,imag") {
    throw SpecError("lattice CSV lacks the index,real,imag header");
  }
  std::vector<bool> seen(f.values.size(), false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::uint64_t index = 0;
    double re = 0.0, im = 0.0;
    char c1 = 0, c2 = 0;
    if (!(row >> index >> c1 >> re >> c2 >> im) || c1 != ',' || c2 != ',') {
      throw SpecError("malformed lattice CSV row: " + line);
    }
    if (index >= f.values.size()) throw SpecError("lattice CSV index out of range");
    f.values[index] = {re, im};
    seen[index] = true;
  }
  for (bool s : seen) {
    if (!s) throw SpecError("lattice CSV misses some cells");
  }
  return f;
}

}  // namespace padiclab
