#include "padiclab/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "padiclab/errors.hpp"
#include "padiclab/flows.hpp"
#include "padiclab/lattice.hpp"
#include "padiclab/measures.hpp"
#include "padiclab/random.hpp"

namespace padiclab::cli {

using nlohmann::json;

namespace {

// Read access to one JSON object that remembers which keys were used, so
// leftovers can be rejected.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw SchemaError(where_ + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& need(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw SchemaError(where_ + ": missing field \"" + key + "\"");
    return j_.at(key);
  }

  const json* maybe(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  template <class T>
  T get(const std::string& key) {
    return typed<T>(key, need(key));
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    const json* v = maybe(key);
    return v ? typed<T>(key, *v) : fallback;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.contains(key)) throw SchemaError(where_ + ": unknown field \"" + key + "\"");
    }
  }

  const std::string& where() const { return where_; }

 private:
  template <class T>
  T typed(const std::string& key, const json& v) const {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw SchemaError(where_ + "." + key + " must be a string");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw SchemaError(where_ + "." + key + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw SchemaError(where_ + "." + key + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw SchemaError(where_ + "." + key + " must be a number");
    }
    return v.get<T>();
  }

  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

struct Context {
  int p;
  int precision;
  std::uint64_t seed;
  int threads;
  double tolerance;
};

struct Outcome {
  json results;
  std::string csv;
  std::string summary;
  /// Extra artifacts: file suffix -> content.
  std::map<std::string, std::string> extra;
};

PAdic parse_padic(const json& v, const Context& c, const std::string& where) {
  if (v.is_number_integer()) return PAdic::from_integer(v.get<std::int64_t>(), c.p, c.precision);
  if (!v.is_string()) throw SchemaError(where + " must be an integer or a string \"a/b\"");
  const std::string s = v.get<std::string>();
  try {
    std::size_t used = 0;
    const auto slash = s.find('/');
    const std::int64_t num = std::stoll(s.substr(0, slash), &used);
    if (used != (slash == std::string::npos ? s.size() : slash)) throw std::invalid_argument(s);
    std::int64_t den = 1;
    if (slash != std::string::npos) {
      den = std::stoll(s.substr(slash + 1), &used);
      if (used != s.size() - slash - 1) throw std::invalid_argument(s);
    }
    return PAdic::from_rational(num, den, c.p, c.precision);
  } catch (const std::logic_error&) {
    throw SchemaError(where + ": cannot read \"" + s + "\" as a rational number");
  }
}

std::vector<PAdic> parse_padic_list(const json& v, const Context& c, const std::string& where) {
  if (!v.is_array()) throw SchemaError(where + " must be an array");
  std::vector<PAdic> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(parse_padic(v[i], c, where + "[" + std::to_string(i) + "]"));
  return out;
}

PMatrix parse_matrix(const json& v, int d, const Context& c, const std::string& where) {
  if (!v.is_array() || v.size() != static_cast<std::size_t>(d)) {
    throw SchemaError(where + " must be a " + std::to_string(d) + "x" + std::to_string(d) + " array");
  }
  PMatrix m(d, c.p, c.precision);
  for (int i = 0; i < d; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(d)) throw SchemaError(where + " has a malformed row");
    for (int j = 0; j < d; ++j) {
      m(i, j) = parse_padic(row[static_cast<std::size_t>(j)], c, where);
    }
  }
  return m;
}

std::vector<WeightedBall> parse_balls(const json& v, const Context& c, const std::string& where) {
  if (!v.is_array()) throw SchemaError(where + " must be an array");
  std::vector<WeightedBall> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    Fields f(v[i], where + "[" + std::to_string(i) + "]");
    const PAdic centre = parse_padic(f.need("center"), c, f.where() + ".center");
    out.push_back({Ball{centre, f.get<int>("radius_exp")}, f.get<double>("weight")});
    f.finish();
  }
  return out;
}

OneDimMeasure parse_measure(const json& v, const Context& c, const std::string& where) {
  Fields f(v, where);
  const std::string type = f.get<std::string>("type");
  const json* scale_json = f.maybe("scale");
  const PAdic scale = scale_json ? parse_padic(*scale_json, c, where + ".scale") : PAdic::one(c.p, c.precision);
  BaseMeasure base;
  if (type == "qgauss") {
    const double beta = f.get<double>("beta");
    const double q = f.get<double>("q");
    const json* gamma = f.maybe("gamma");
    base = QGaussianSpec::make(c.p, beta, q,
                               gamma ? parse_padic(*gamma, c, where + ".gamma") : PAdic::zero(c.p, c.precision));
  } else if (type == "second") {
    SecondTypeSpec s{c.p, parse_balls(f.need("pieces"), c, where + ".pieces"), {}};
    if (const json* h = f.maybe("h")) s.h = parse_balls(*h, c, where + ".h");
    base = s;
  } else if (type == "haar") {
    base = SecondTypeSpec::haar_unit_ball(c.p);
  } else {
    throw SchemaError(where + ".type must be one of qgauss, second, haar");
  }
  f.finish();
  return make_factor(base, scale);
}

ProductMeasureSpec parse_product(const json& v, const Context& c) {
  Fields f(v, "product");
  ProductMeasureSpec spec;
  if (const json* factors = f.maybe("factors")) {
    if (!factors->is_array() || factors->empty()) throw SchemaError("product.factors must be a nonempty array");
    for (std::size_t k = 0; k < factors->size(); ++k) {
      spec.factors.push_back(parse_measure((*factors)[k], c, "product.factors[" + std::to_string(k) + "]"));
    }
  } else {
    const OneDimMeasure first = parse_measure(f.need("factor"), c, "product.factor");
    const int K = f.get<int>("K");
    if (K < 1) throw SchemaError("product.K must be >= 1");
    const json* ratio_json = f.maybe("scale_ratio");
    const PAdic ratio = ratio_json ? parse_padic(*ratio_json, c, "product.scale_ratio") : PAdic::one(c.p, c.precision);
    PAdic scale = first.scale;
    for (int k = 0; k < K; ++k) {
      spec.factors.push_back(make_factor(first.base, scale));
      scale = scale * ratio;
    }
  }
  f.finish();
  return spec;
}

std::vector<PAdic> parse_shift(const json& v, const ProductMeasureSpec& spec, const Context& c,
                               const std::string& where) {
  if (v.is_array()) {
    auto z = parse_padic_list(v, c, where);
    if (z.size() != spec.factors.size()) throw SchemaError(where + " must have one entry per factor");
    return z;
  }
  Fields f(v, where);
  std::vector<PAdic> z;
  if (const json* k = f.maybe("constant")) {
    z.assign(spec.factors.size(), parse_padic(*k, c, where + ".constant"));
  } else {
    const PAdic a = parse_padic(f.need("along_scale"), c, where + ".along_scale");
    for (const auto& m : spec.factors) z.push_back(a * m.scale);
  }
  f.finish();
  return z;
}

LatticeSpec parse_lattice(const json& v, const Context& c) {
  Fields f(v, "lattice");
  LatticeSpec s{c.p, f.get<int>("m"), f.get<int>("n")};
  f.finish();
  s.validate();
  return s;
}

LatticeFunction parse_function(const json& v, const LatticeSpec& s, const Context& c) {
  Fields f(v, "function");
  const std::string type = f.get<std::string>("type");
  LatticeFunction out(s);
  if (type == "ball") {
    out = LatticeFunction::ball_indicator(s, f.get<int>("r"));
  } else if (type == "random" || type == "random_mean_zero") {
    auto rng = make_stream(c.seed, 0);
    for (auto& x : out.values) x = {2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0};
    if (type == "random_mean_zero") {
      const Complex mean = haar_integral(out) / (static_cast<double>(s.size()) * s.cell_volume());
      for (auto& x : out.values) x -= mean;
    }
  } else if (type == "values") {
    const json& vals = f.need("values");
    if (!vals.is_array() || vals.size() != s.size()) throw SchemaError("function.values needs one entry per cell");
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (vals[i].is_number()) {
        out.values[i] = vals[i].get<double>();
      } else if (vals[i].is_array() && vals[i].size() == 2) {
        out.values[i] = {vals[i][0].get<double>(), vals[i][1].get<double>()};
      } else {
        throw SchemaError("function.values entries are numbers or [re, im]");
      }
    }
  } else {
    throw SchemaError("function.type must be one of ball, random, random_mean_zero, values");
  }
  f.finish();
  return out;
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Lattice point i p^-m as a reduced rational "a/b" (or an integer).
std::string point_label(const LatticeSpec& s, std::uint64_t i) {
  if (s.m <= 0) return std::to_string(i * checked_pow(s.p, -s.m));
  const std::uint64_t den = checked_pow(s.p, s.m);
  const std::uint64_t g = std::gcd(i, den);
  return g == den ? std::to_string(i / den) : std::to_string(i / g) + "/" + std::to_string(den / g);
}

// --- subcommands -------------------------------------------------------------

Outcome run_density(Fields& f, const Context& c) {
  const OneDimMeasure m = parse_measure(f.need("measure"), c, "measure");
  const LatticeSpec s = f.has("lattice") ? parse_lattice(f.need("lattice"), c) : natural_lattice(m);
  f.finish();
  const CellMasses masses = cell_masses(m, s);
  std::ostringstream csv;
  csv << "index,x,density,cell_mass\n";
  double total = 0.0, min_density = 0.0;
  for (std::uint64_t i = 0; i < s.size(); ++i) {
    const PAdic x = s.point(i, c.precision);
    const double d = density(m, x);
    min_density = i == 0 ? d : std::min(min_density, d);
    total += masses.cells[i];
    csv << i << ',' << point_label(s, i) << ',' << num(d) << ',' << num(masses.cells[i]) << '\n';
  }
  Outcome o;
  o.results = {{"lattice", {{"p", s.p}, {"m", s.m}, {"n", s.n}}},
               {"total_mass", total},
               {"outside_mass", masses.outside},
               {"min_density", min_density},
               {"within_tolerance", std::abs(total + masses.outside - 1.0) <= c.tolerance}};
  o.csv = csv.str();
  o.summary = "density: " + std::to_string(s.size()) + " cells, lattice mass " + num(total);
  return o;
}

double norm2(const LatticeFunction& f) { return inner_product(f, f).real(); }

Outcome run_fourier(Fields& f, const Context& c) {
  const LatticeSpec s = parse_lattice(f.need("lattice"), c);
  const LatticeFunction g = parse_function(f.need("function"), s, c);
  f.finish();
  const LatticeFunction F = fourier(g);
  const LatticeFunction back = inverse_fourier(F);
  double inverse_error = 0.0;
  for (std::size_t i = 0; i < g.values.size(); ++i) inverse_error = std::max(inverse_error, std::abs(back.values[i] - g.values[i]));
  const double a = norm2(g), b = norm2(F);
  const double rel = std::abs(a - b) / std::max(a, 1e-300);
  std::ostringstream csv;
  csv << "index,x,re,im\n";
  for (std::uint64_t i = 0; i < F.spec.size(); ++i) {
    csv << i << ',' << point_label(F.spec, i) << ',' << num(F.values[i].real()) << ','
        << num(F.values[i].imag()) << '\n';
  }
  Outcome o;
  o.results = {{"norm2_f", a},
               {"norm2_Ff", b},
               {"parseval_rel_error", rel},
               {"inverse_max_error", inverse_error},
               {"within_tolerance", rel <= c.tolerance}};
  o.csv = csv.str();
  o.summary = "fourier: " + std::to_string(s.size()) + " cells, Parseval relative error " + num(rel);
  return o;
}

Outcome run_vladimirov(Fields& f, const Context& c) {
  const LatticeSpec s = parse_lattice(f.need("lattice"), c);
  const double b = f.get<double>("b");
  const LatticeFunction g = parse_function(f.need("function"), s, c);
  f.finish();
  const LatticeFunction mult = vladimirov_multiplier(g, b);
  const LatticeFunction kern = pd_kernel(g, b);
  const double cb = vladimirov_constant(s.p, b);
  const Complex lost = haar_integral(g) * zero_cell_weight(s, b);
  std::ostringstream csv;
  csv << "index,x,multiplier_re,multiplier_im,kernel_re,kernel_im\n";
  double worst = 0.0;
  for (std::uint64_t i = 0; i < s.size(); ++i) {
    const Complex k = cb * kern.values[i];
    worst = std::max(worst, std::abs(mult.values[i] + lost - k));
    csv << i << ',' << point_label(s, i) << ',' << num(mult.values[i].real()) << ','
        << num(mult.values[i].imag()) << ',' << num(k.real()) << ',' << num(k.imag()) << '\n';
  }
  Outcome o;
  o.results = {{"b", b},
               {"integral_re", haar_integral(g).real()},
               {"zero_cell_term_abs", std::abs(lost)},
               {"max_abs_difference", worst},
               {"within_tolerance", worst <= c.tolerance}};
  o.csv = csv.str();
  o.summary = "vladimirov: b=" + num(b) + ", multiplier vs kernel max difference " + num(worst);
  return o;
}

Outcome run_pd(Fields& f, const Context& c) {
  const LatticeSpec s = parse_lattice(f.need("lattice"), c);
  const double b = f.get<double>("b");
  const LatticeFunction g = parse_function(f.need("function"), s, c);
  f.finish();
  if (s.m < 0 || s.n < 0) throw DomainError("pd needs lattice m >= 0 and n >= 0");
  std::ostringstream csv;
  csv << "index,x,pd_re,pd_im\n";
  const std::uint64_t step = checked_pow(s.p, s.m);
  double worst = 0.0;
  std::size_t count = 0;
  for (std::uint64_t i = 0; i < s.size(); i += step) {
    const Complex v = pd_c(g, b, i);
    worst = std::max(worst, std::abs(v));
    ++count;
    csv << i << ',' << point_label(s, i) << ',' << num(v.real()) << ',' << num(v.imag()) << '\n';
  }
  Outcome o;
  o.results = {{"b", b}, {"points", count}, {"max_abs", worst}};
  o.csv = csv.str();
  o.summary = "pd: PD_c at " + std::to_string(count) + " points of Z_p, max |value| " + num(worst);
  return o;
}

Outcome run_riesz(Fields& f, const Context& c) {
  const int dim = f.get<int>("dim", 1);
  const double q = f.get<double>("q");
  const PAdic y = parse_padic(f.need("y"), c, "y");
  std::vector<int> cutoffs;
  const json& cj = f.need("cutoff");
  if (cj.is_array()) {
    for (const auto& x : cj) cutoffs.push_back(x.get<int>());
  } else {
    cutoffs.push_back(cj.get<int>());
  }
  f.finish();
  std::ostringstream csv;
  csv << "cutoff,lattice_sum,omitted_ball,closed_form,gap\n";
  json rows = json::array();
  bool all_ok = true;
  double closed = 0.0;
  for (int cut : cutoffs) {
    const RieszCheck r = riesz_integral_check(dim, q, y, cut);
    const double gap = std::abs(r.lattice_sum - r.closed_form);
    closed = r.closed_form;
    all_ok = all_ok && gap <= c.tolerance;
    csv << cut << ',' << num(r.lattice_sum) << ',' << num(r.omitted_ball) << ',' << num(r.closed_form) << ','
        << num(gap) << '\n';
    rows.push_back({{"cutoff", cut},
                    {"lattice_sum", r.lattice_sum},
                    {"omitted_ball", r.omitted_ball},
                    {"closed_form", r.closed_form},
                    {"gap", gap},
                    {"within_tolerance", gap <= c.tolerance}});
  }
  Outcome o;
  o.results = {{"rows", rows}, {"tolerance", c.tolerance}, {"within_tolerance", all_ok}};
  o.csv = csv.str();
  o.summary = "riesz: closed form " + num(closed) + ", lattice sums within " + num(c.tolerance) + ": " +
              (all_ok ? "yes" : "no");
  return o;
}

Outcome run_kakutani(Fields& f, const Context& c) {
  const ProductMeasureSpec spec = parse_product(f.need("product"), c);
  const std::vector<PAdic> z = parse_shift(f.need("z"), spec, c, "z");
  f.finish();
  const KakutaniReport report = kakutani_dichotomy(spec, z, spec.factors.size());
  std::ostringstream csv;
  write_kakutani_csv(csv, report);
  Outcome o;
  o.results = json::parse(kakutani_verdict_json(report));
  o.results["alpha"] = report.alpha;
  o.results["resolved"] = report.resolved;
  o.csv = csv.str();
  o.summary = "kakutani: K=" + std::to_string(spec.factors.size()) + ", product " +
              num(report.partial_product.back()) + ", verdict " + to_string(report.verdict);
  return o;
}

std::vector<MeasureSampler> samplers_for(const ProductMeasureSpec& spec) {
  std::vector<MeasureSampler> out;
  for (const auto& m : spec.factors) out.emplace_back(m);
  return out;
}

Outcome run_quasiinv(Fields& f, const Context& c) {
  const ProductMeasureSpec spec = parse_product(f.need("product"), c);
  const std::vector<PAdic> z = parse_shift(f.need("z"), spec, c, "z");
  const std::vector<PAdic> h = f.has("h") ? parse_shift(f.need("h"), spec, c, "h") : z;
  const int samples = f.get<int>("samples", 1000);
  f.finish();
  const auto samplers = samplers_for(spec);
  auto rng = make_stream(c.seed, 0);
  const std::size_t K = spec.factors.size();
  std::ostringstream csv;
  csv << "sample,rho,cocycle_residual\n";
  double worst = 0.0, sum = 0.0;
  int skipped = 0;
  for (int i = 0; i < samples; ++i) {
    const auto x = sample(samplers, rng, c.precision);
    try {
      const double rho = quasi_invariance_factor(spec, z, x, K);
      const double res = cocycle_residual(spec, z, h, x, K);
      worst = std::max(worst, res);
      sum += rho;
      csv << i << ',' << num(rho) << ',' << num(res) << '\n';
    } catch (const DomainError&) {
      ++skipped;  // x - h left the support: the cocycle is undefined there
    }
  }
  Outcome o;
  o.results = {{"samples", samples},
               {"skipped", skipped},
               {"mean_rho", sum / std::max(1, samples - skipped)},
               {"max_cocycle_residual", worst},
               {"within_tolerance", worst <= c.tolerance}};
  o.csv = csv.str();
  o.summary = "quasiinv: " + std::to_string(samples - skipped) + " samples, max cocycle residual " + num(worst);
  return o;
}

Outcome run_pdmeasure(Fields& f, const Context& c) {
  const ProductMeasureSpec spec = parse_product(f.need("product"), c);
  const double b = f.get<double>("b");
  const std::vector<PAdic> z = parse_shift(f.need("z"), spec, c, "z");
  const json& cj = f.need("cylinders");
  const json* r0j = f.maybe("r0");
  const PAdic r0 = r0j ? parse_padic(*r0j, c, "r0") : PAdic::zero(c.p, c.precision);
  f.finish();
  if (!cj.is_array()) throw SchemaError("cylinders must be an array of constraint arrays");
  std::vector<Cylinder> cylinders;
  for (std::size_t i = 0; i < cj.size(); ++i) {
    if (!cj[i].is_array()) throw SchemaError("cylinders[" + std::to_string(i) + "] must be an array");
    Cylinder cyl;
    for (std::size_t k = 0; k < cj[i].size(); ++k) {
      Fields g(cj[i][k], "cylinders[" + std::to_string(i) + "][" + std::to_string(k) + "]");
      const auto coord = g.get<std::size_t>("k");
      const PAdic centre = parse_padic(g.need("center"), c, g.where() + ".center");
      cyl.constraints.emplace_back(coord, Ball{centre, g.get<int>("radius_exp")});
      g.finish();
    }
    cylinders.push_back(cyl);
  }
  const PdMeasureResult r = pd_of_measure(spec, b, z, cylinders, r0);
  Outcome o;
  o.results = {{"b", b},
               {"value_re", r.value.real()},
               {"value_im", r.value.imag()},
               {"resolution", r.resolution},
               {"refinement_delta", r.refinement_delta}};
  o.summary = "pdmeasure: PD_c = " + num(r.value.real()) + " at r-resolution p^-" + std::to_string(r.resolution) +
              ", refinement delta " + num(r.refinement_delta);
  return o;
}

struct FlowSetup {
  GroupFlowSpec spec;
  TimeLattice time;
  OneDimMeasure measure;
  std::vector<PAdic> scaling;
};

FlowSetup parse_flow(Fields& f, const Context& c) {
  Fields fl(f.need("flow"), "flow");
  const int d = fl.get<int>("d");
  if (d < 1 || d > 6) throw SchemaError("flow.d must lie in 1..6");
  const PMatrix drift = fl.has("drift") ? parse_matrix(fl.need("drift"), d, c, "flow.drift") : PMatrix(d, c.p, c.precision);
  const json* fb = fl.maybe("drift_feedback");
  const PAdic feedback = fb ? parse_padic(*fb, c, "flow.drift_feedback") : PAdic::zero(c.p, c.precision);
  std::vector<PMatrix> diffusion;
  const json& dj = fl.need("diffusion");
  if (dj.is_string() && dj.get<std::string>() == "full") {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        PMatrix e(d, c.p, c.precision);
        e(i, j) = PAdic::from_integer(c.p, c.p, c.precision);
        diffusion.push_back(e);
      }
    }
  } else if (dj.is_array()) {
    for (std::size_t i = 0; i < dj.size(); ++i) diffusion.push_back(parse_matrix(dj[i], d, c, "flow.diffusion"));
  } else {
    throw SchemaError("flow.diffusion must be \"full\" or an array of matrices");
  }
  const PMatrix start =
      fl.has("start") ? parse_matrix(fl.need("start"), d, c, "flow.start") : PMatrix::identity(d, c.p, c.precision);
  fl.finish();
  Fields tf(f.need("time"), "time");
  const TimeLattice time{c.p, tf.get<int>("R", 0), tf.get<int>("level")};
  tf.finish();
  OneDimMeasure measure = make_factor(SecondTypeSpec::haar_unit_ball(c.p), PAdic::one(c.p, c.precision));
  std::vector<PAdic> scaling(diffusion.size(), PAdic::one(c.p, c.precision));
  if (const json* nj = f.maybe("noise")) {
    Fields nf(*nj, "noise");
    if (const json* m = nf.maybe("measure")) measure = parse_measure(*m, c, "noise.measure");
    if (const json* s = nf.maybe("scaling")) scaling = parse_padic_list(*s, c, "noise.scaling");
    nf.finish();
  }
  GroupFlowSpec spec{c.p, d, c.precision, drift, feedback, diffusion, start};
  spec.validate();
  time.validate();
  if (scaling.size() != diffusion.size()) throw SchemaError("noise.scaling needs one entry per diffusion matrix");
  return {spec, time, measure, scaling};
}

Outcome run_simulate(Fields& f, const Context& c) {
  const FlowSetup s = parse_flow(f, c);
  const int paths = f.get<int>("paths", 1);
  f.finish();
  const MeasureSampler sampler(s.measure);
  std::ostringstream jsonl;
  bool closed = true;
  for (int i = 0; i < paths; ++i) {
    const NoisePath noise =
        sample_noise(sampler, s.time, s.scaling, c.seed, static_cast<std::uint64_t>(i), c.precision);
    const Trajectory t = simulate_flow(s.spec, s.time, noise);
    for (const auto& g : t.points) closed = closed && g.congruent_to_identity();
    std::ostringstream one;
    write_trajectory_jsonl(one, t, s.time);
    std::istringstream lines(one.str());
    for (std::string line; std::getline(lines, line);) {
      json j = json::parse(line);
      j["path"] = i;
      jsonl << j.dump() << '\n';
    }
  }
  Outcome o;
  o.results = {{"paths", paths}, {"steps", s.time.size()}, {"group_closure", closed}};
  o.extra[".jsonl"] = jsonl.str();
  o.summary = "simulate: " + std::to_string(paths) + " paths of " + std::to_string(s.time.size()) +
              " points, group closure " + (closed ? "holds" : "FAILS");
  return o;
}

Outcome run_histogram(Fields& f, const Context& c) {
  const FlowSetup s = parse_flow(f, c);
  const int m_q = f.get<int>("m_q", 1);
  const auto samples = f.get<std::uint64_t>("samples");
  const json* hj = f.maybe("h");
  std::optional<PMatrix> h;
  if (hj) h = parse_matrix(*hj, s.spec.d, c, "h");
  f.finish();
  const MeasureSampler sampler(s.measure);
  const EnsembleConfig cfg{&s.spec, s.time, &sampler, s.scaling, c.seed, c.threads};
  const Histogram hist = transition_histogram(cfg, m_q, samples);
  std::ostringstream csv;
  write_histogram_csv(csv, hist);
  Outcome o;
  o.results = {{"samples", samples}, {"m_q", m_q}, {"classes_populated", hist.counts.size()}};
  o.csv = csv.str();
  o.summary = "histogram: " + std::to_string(hist.counts.size()) + " classes populated by " +
              std::to_string(samples) + " paths";
  if (h) {
    const RatioTable table = quasi_invariance_empirical(cfg, *h, m_q, samples);
    std::ostringstream ratios;
    ratios << "class_id,base_count,shifted_count,ratio,lower,upper,flagged\n";
    std::size_t flagged = 0;
    for (const auto& r : table.rows) {
      flagged += r.flagged ? 1 : 0;
      ratios << r.cls << ',' << r.base_count << ',' << r.shifted_count << ',' << num(r.ratio) << ','
             << num(r.lower) << ',' << num(r.upper) << ',' << (r.flagged ? 1 : 0) << '\n';
    }
    o.extra["_ratios.csv"] = ratios.str();
    o.results["ratio_classes"] = table.rows.size();
    o.results["ratio_flagged"] = flagged;
    o.results["ratio_excluded"] = table.excluded;
    o.summary += ", " + std::to_string(flagged) + " ratio classes flagged";
  }
  return o;
}

Outcome run_regrep(Fields& f, const Context& c) {
  const ProductMeasureSpec spec = parse_product(f.need("product"), c);
  const std::vector<PAdic> h = parse_shift(f.need("h"), spec, c, "h");
  const auto samples = f.get<std::uint64_t>("samples", 10000);
  f.finish();
  const SampleFunction fn = [](const std::vector<PAdic>& x) {
    double s = 0.0;
    for (const auto& v : x) s += v.norm();
    return std::exp(-s) * additive_character(x.front());
  };
  const std::size_t K = spec.factors.size();
  const UnitarityReport r = unitarity_check(spec, h, fn, K, samples, c.seed, c.precision);
  const bool ok = std::abs(r.norm2_Tf - r.norm2_f) <= 3.0 * r.std_error;
  Outcome o;
  o.results = {{"norm2_f", r.norm2_f},
               {"norm2_Tf", r.norm2_Tf},
               {"std_error", r.std_error},
               {"samples", r.samples},
               {"within_3_se", ok}};
  o.summary = "regrep: ||f||^2 = " + num(r.norm2_f) + ", ||T_h f||^2 = " + num(r.norm2_Tf) + " (SE " +
              num(r.std_error) + ")";
  return o;
}

Outcome run_picard(Fields& f, const Context& c) {
  Fields tf(f.need("time"), "time");
  const TimeLattice time{c.p, tf.get<int>("R", 0), tf.get<int>("level")};
  tf.finish();
  const PAdic x0 = parse_padic(f.need("x0"), c, "x0");
  const int n_iter = f.get<int>("n_iter", 50);
  std::vector<PicardTerm> terms;
  const json& tj = f.need("terms");
  if (!tj.is_array()) throw SchemaError("terms must be an array");
  for (std::size_t i = 0; i < tj.size(); ++i) {
    Fields g(tj[i], "terms[" + std::to_string(i) + "]");
    const int b = g.get<int>("b");
    const int l = g.get<int>("l");
    const json* cj = g.maybe("constant");
    const json* lj = g.maybe("linear");
    terms.push_back({b, l, cj ? parse_padic(*cj, c, "constant") : PAdic::zero(c.p, c.precision),
                     lj ? parse_padic(*lj, c, "linear") : PAdic::zero(c.p, c.precision)});
    g.finish();
  }
  OneDimMeasure measure = make_factor(SecondTypeSpec::haar_unit_ball(c.p), PAdic::one(c.p, c.precision));
  if (const json* m = f.maybe("noise_measure")) measure = parse_measure(*m, c, "noise_measure");
  f.finish();
  time.validate();
  const MeasureSampler sampler(measure);
  const NoisePath noise = sample_noise(sampler, time, {PAdic::one(c.p, c.precision)}, c.seed, 0, c.precision);
  const PicardResult r = picard_iterate(terms, x0, noise, time, n_iter, c.precision);
  std::ostringstream csv;
  csv << "k,t,value\n";
  for (std::size_t k = 0; k < r.solution.size(); ++k) {
    csv << k << ",\"" << time.time(k, c.precision).to_string() << "\",\"" << r.solution[k].to_string() << "\"\n";
  }
  Outcome o;
  o.results = {{"iterations", r.iterations},
               {"differences", r.differences},
               {"converged", r.converged},
               {"diverged", r.diverged}};
  o.csv = csv.str();
  o.summary = "picard: " + std::to_string(r.iterations) + " iterations, " +
              (r.converged ? "converged" : r.diverged ? "diverged (contraction check failed)" : "not converged");
  return o;
}

using Handler = Outcome (*)(Fields&, const Context&);

const std::map<std::string, std::pair<Handler, double>>& handlers() {
  // default tolerance per subcommand
  static const std::map<std::string, std::pair<Handler, double>> table{
      {"density", {run_density, 1e-6}},     {"fourier", {run_fourier, 1e-9}},
      {"vladimirov", {run_vladimirov, 1e-6}}, {"pd", {run_pd, 1e-9}},
      {"riesz", {run_riesz, 1e-3}},         {"kakutani", {run_kakutani, 1e-9}},
      {"quasiinv", {run_quasiinv, 1e-9}},   {"pdmeasure", {run_pdmeasure, 1e-4}},
      {"simulate", {run_simulate, 0.0}},    {"histogram", {run_histogram, 0.0}},
      {"regrep", {run_regrep, 1e-9}},       {"picard", {run_picard, 0.0}},
  };
  return table;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"density",  "fourier",  "vladimirov", "pd",
                                              "riesz",    "kakutani", "quasiinv",   "pdmeasure",
                                              "simulate", "histogram", "regrep",    "picard"};
  return names;
}

std::string config_hash(const json& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int run(const json& config, const RunOptions& options, std::ostream& summary, std::ostream& err) {
  Outcome outcome;
  std::string name;
  try {
    Fields f(config, "config");
    const std::string sub = f.get<std::string>("subcommand");
    const auto it = handlers().find(sub);
    if (it == handlers().end()) throw SchemaError("unknown subcommand \"" + sub + "\"");
    name = f.get<std::string>("name", sub);
    Context c{f.get<int>("p"), f.get<int>("precision", 20), f.get<std::uint64_t>("seed", 1),
              std::max(1, options.threads), f.get<double>("tolerance", it->second.second)};
    if (!is_prime(c.p)) throw SchemaError("p must be prime");
    if (c.precision < 1 || c.precision > max_precision(c.p)) {
      throw SchemaError("precision must lie in 1.." + std::to_string(max_precision(c.p)) + " for p = " +
                        std::to_string(c.p));
    }
    if (options.seed) c.seed = *options.seed;
    if (options.tolerance) c.tolerance = *options.tolerance;
    outcome = it->second.first(f, c);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const SpecError& e) {
    err << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    err << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    err << "numeric failure (convergence, offending norm " << e.offending_norm() << "): " << e.what() << '\n';
    return 1;
  } catch (const PrecisionError& e) {
    err << "numeric failure (precision): " << e.what() << '\n';
    return 1;
  } catch (const CapacityError& e) {
    err << "numeric failure (capacity): " << e.what() << '\n';
    return 1;
  } catch (const DomainError& e) {
    err << "numeric failure (domain): " << e.what() << '\n';
    return 1;
  }
  try {
    const std::filesystem::path dir(options.out_dir);
    std::filesystem::create_directories(dir);
    const std::string hash = config_hash(config);
    write_file(dir / (name + ".json"), json{{"config_hash", hash}, {"results", outcome.results}}.dump(2) + "\n");
    if (!outcome.csv.empty()) write_file(dir / (name + ".csv"), "# config_hash " + hash + "\n" + outcome.csv);
    for (const auto& [suffix, content] : outcome.extra) {
      const bool is_csv = suffix.size() >= 4 && suffix.compare(suffix.size() - 4, 4, ".csv") == 0;
      write_file(dir / (name + suffix), is_csv ? "# config_hash " + hash + "\n" + content : content);
    }
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return 1;
  }
  summary << outcome.summary << '\n';
  return 0;
}

int run_file(const std::string& path, const RunOptions& options, std::ostream& summary, std::ostream& err) {
  std::ifstream in(path);
  if (!in) {
    err << "schema error: cannot open config " << path << '\n';
    return 2;
  }
  json config;
  try {
    config = json::parse(in);
  } catch (const json::exception& e) {
    err << "schema error: " << path << " is not valid JSON: " << e.what() << '\n';
    return 2;
  }
  return run(config, options, summary, err);
}

}  // namespace padiclab::cli
