#pragma once

// JSON jobs for the command-line tool. A job is parsed and validated in full
// before anything is computed, so malformed input always maps to exit code 2
// and engine failures to exit code 1.

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "padic_density/density_engine.hpp"
#include "padic_density/gauss_engine.hpp"
#include "padic_density/oracle.hpp"
#include "padic_density/quadratic_model.hpp"

namespace padic_density::cli {

using json = nlohmann::json;

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitComputation = 1;
inline constexpr int kExitSchema = 2;

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline int get_int(const json& j, const char* key, std::optional<int> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw SchemaError(std::string("missing field '") + key + "'");
  }
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw SchemaError(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

inline bool get_bool(const json& j, const char* key) {
  if (!j.contains(key)) return false;
  if (!j.at(key).is_boolean()) throw SchemaError(std::string("field '") + key + "' must be a boolean");
  return j.at(key).get<bool>();
}

inline Rational rational_of(const json& v) {
  if (v.is_number_integer()) return Rational(v.get<long long>());
  if (v.is_string()) {
    try {
      return parse_fraction(v.get<std::string>());
    } catch (const InvalidInput& e) {
      throw SchemaError(e.what());
    }
  }
  throw SchemaError("expected a rational as an integer or an \"a/b\" string");
}

}  // namespace detail

inline FieldSpec parse_field(const json& j) {
  const int p = detail::get_int(j, "p");
  const int f = detail::get_int(j, "f", 1);
  std::vector<padic_density::detail::i64> modulus;
  if (j.contains("modulus")) {
    if (!j.at("modulus").is_array()) throw SchemaError("modulus must be an array of integers");
    for (const auto& c : j.at("modulus")) {
      if (!c.is_number_integer()) throw SchemaError("modulus must be an array of integers");
      modulus.push_back(c.get<padic_density::detail::i64>());
    }
  }
  try {
    return FieldSpec::create(p, f, modulus);
  } catch (const InvalidInput& e) {
    throw SchemaError(std::string("invalid field: ") + e.what());
  }
}

// An element is a rational ("a/b" or an integer) or its list of coordinates
// in the power basis of the field.
inline NumberFieldElem parse_element(const FieldSpec& spec, const json& v) {
  if (!v.is_array()) return NumberFieldElem(spec, detail::rational_of(v));
  if (static_cast<int>(v.size()) > spec.f()) throw SchemaError("element has more coordinates than f");
  std::vector<Rational> c;
  for (const auto& x : v) c.push_back(detail::rational_of(x));
  return NumberFieldElem(spec, std::move(c));
}

// {"r": 2, "quad": [[i, j, c], ...], "lin": [c_0, ...], "constant": c}
inline QuadraticPolynomial parse_poly(const FieldSpec& spec, const json& j, int precision) {
  const int r = detail::get_int(j, "r");
  if (r < 1 || r > 8) throw SchemaError("r must lie in [1, 8]");
  QuadraticPolynomial q(spec, r, precision);
  if (j.contains("quad")) {
    for (const auto& e : j.at("quad")) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() || !e[1].is_number_integer())
        throw SchemaError("quad entries are [i, j, coefficient]");
      int a = e[0].get<int>(), b = e[1].get<int>();
      if (a > b) std::swap(a, b);
      if (a < 0 || b >= r) throw SchemaError("quad index out of range");
      q.set_quad(a, b, parse_element(spec, e[2]));
    }
  }
  if (j.contains("lin")) {
    const json& lin = j.at("lin");
    if (!lin.is_array() || static_cast<int>(lin.size()) > r) throw SchemaError("lin must list at most r coefficients");
    for (std::size_t i = 0; i < lin.size(); ++i) q.set_lin(static_cast<int>(i), parse_element(spec, lin[i]));
  }
  if (j.contains("constant")) q.set_constant(parse_element(spec, j.at("constant")));
  return q;
}

inline DyadicMode parse_mode(const std::string& s) {
  if (s == "both") return DyadicMode::both;
  if (s == "case_table") return DyadicMode::case_table;
  if (s == "lemma_sum") return DyadicMode::lemma_sum;
  throw SchemaError("mode must be one of both, case_table, lemma_sum");
}

struct Instance {
  QuadraticPolynomial q;
  NumberFieldElem n;
  int k = 0;
};

struct Job {
  std::string command;
  FieldSpec spec;
  std::optional<QuadraticPolynomial> poly;
  std::optional<NumberFieldElem> n;
  int k = 5;
  int precision = 12;
  DensityOptions density;
  OracleOptions oracle;
  bool trace = false;
  // gauss
  std::string op;
  std::map<std::string, NumberFieldElem> args;
  int ell = 0;
  // verify
  std::vector<Instance> instances;
};

inline Job parse_job(const json& j) {
  if (!j.is_object()) throw SchemaError("job must be a JSON object");
  Job job;
  const json& cmd = detail::require(j, "command");
  if (!cmd.is_string()) throw SchemaError("command must be a string");
  job.command = cmd.get<std::string>();
  static const std::vector<std::string> commands = {"density", "reduce", "gauss", "oracle", "verify"};
  if (std::find(commands.begin(), commands.end(), job.command) == commands.end())
    throw SchemaError("unknown command '" + job.command + "'");
  job.spec = parse_field(detail::require(j, "field"));
  job.k = detail::get_int(j, "k", 5);
  job.precision = detail::get_int(j, "precision", 12);
  if (job.k < 1 || job.k > 16) throw SchemaError("k must lie in [1, 16]");
  if (job.precision < 1 || job.precision > padic_density::detail::max_precision(job.spec.p()))
    throw SchemaError("precision out of range for this prime");
  if (j.contains("mode")) {
    if (!j.at("mode").is_string()) throw SchemaError("mode must be a string");
    job.density.mode = parse_mode(j.at("mode").get<std::string>());
  }
  job.density.assume_n_zero = detail::get_bool(j, "assume_n_zero");
  job.trace = detail::get_bool(j, "trace");
  if (j.contains("budget")) {
    if (!j.at("budget").is_number_integer() || j.at("budget").get<long long>() <= 0)
      throw SchemaError("budget must be a positive integer");
    job.oracle.budget = j.at("budget").get<padic_density::detail::i64>();
  }
  const bool needs_poly = job.command == "density" || job.command == "reduce" || job.command == "oracle";
  if (needs_poly) job.poly = parse_poly(job.spec, detail::require(j, "poly"), job.precision);
  if (job.command == "density" || job.command == "oracle") job.n = parse_element(job.spec, detail::require(j, "n"));
  if (job.command == "gauss") {
    const json& op = detail::require(j, "op");
    if (!op.is_string()) throw SchemaError("op must be a string");
    job.op = op.get<std::string>();
    for (const char* key : {"sigma", "tau", "tau1", "tau2", "a", "alpha", "m"})
      if (j.contains(key)) job.args.emplace(key, parse_element(job.spec, j.at(key)));
    job.ell = detail::get_int(j, "ell", 0);
  }
  if (job.command == "verify") {
    const json& list = detail::require(j, "instances");
    if (!list.is_array() || list.empty()) throw SchemaError("instances must be a nonempty array");
    for (const auto& e : list) {
      job.instances.push_back({parse_poly(job.spec, detail::require(e, "poly"), job.precision),
                               parse_element(job.spec, detail::require(e, "n")), detail::get_int(e, "k", job.k)});
      if (job.instances.back().k < 1 || job.instances.back().k > 16) throw SchemaError("k must lie in [1, 16]");
    }
  }
  return job;
}

// ---------------------------------------------------------------------------
// Serialization.

inline json to_json(const Rational& r) { return to_fraction_string(r); }

inline json to_json(const ClosedValue& v) {
  json out;
  if (v.is_rational()) out["rational"] = to_fraction_string(v.as_rational());
  json coords = json::array();
  for (const auto& c : v.coordinates()) coords.push_back(to_fraction_string(c));
  out["coordinates"] = coords;
  if (!v.twist().is_zero())
    out["twist"] = std::to_string(v.twist().numerator()) + "/" + std::to_string(v.p()) + "^" +
                   std::to_string(v.twist().log_denominator());
  out["text"] = v.to_string();
  return out;
}

inline json to_json(const RingElem& x) { return x.coords(); }

inline json to_json(const PadicApprox& x) {
  if (x.is_exact_zero()) return json{{"zero", true}};
  if (x.is_indeterminate()) return json{{"indeterminate", true}, {"known_to", x.valuation_lower_bound()}};
  return json{{"valuation", x.valuation()}, {"unit", x.unit().coords()}, {"relative_precision", x.relative_precision()}};
}

inline json to_json(const QuadraticPolynomial& q) {
  json quad = json::array();
  for (int i = 0; i < q.r(); ++i)
    for (int j = i; j < q.r(); ++j)
      if (!q.quad(i, j).is_zero()) quad.push_back({i, j, to_json(q.quad(i, j))});
  json lin = json::array();
  for (int i = 0; i < q.r(); ++i) lin.push_back(to_json(q.lin(i)));
  return json{{"r", q.r()}, {"precision", q.precision()}, {"quad", quad}, {"lin", lin}, {"constant", to_json(q.constant())}};
}

inline json to_json(const Transform& t) {
  json rows = json::array();
  for (int i = 0; i < t.r(); ++i) {
    json row = json::array();
    for (int j = 0; j < t.r(); ++j) row.push_back(to_json(t.entry(i, j)));
    rows.push_back(row);
  }
  return rows;
}

inline json to_json(const DensityResult& res, bool trace) {
  json out;
  out["beta"] = res.value ? json(to_fraction_string(*res.value)) : json(nullptr);
  out["convergent"] = res.convergent();
  json terms = json::array();
  for (const auto& t : res.terms) {
    if (!trace && t.value.is_zero()) continue;
    json e{{"t", t.t}, {"value", to_json(t.value)}};
    if (trace) e["tag"] = t.tag;
    terms.push_back(e);
  }
  out["terms"] = terms;
  static const char* kinds[] = {"none", "geometric", "divergent"};
  json tail{{"kind", kinds[static_cast<int>(res.tail.kind)]}};
  if (res.tail.kind != TailInfo::Kind::none) {
    tail["start"] = res.tail.start;
    tail["ratio"] = to_fraction_string(res.tail.ratio);
    tail["seed"] = to_json(res.tail.seed);
    if (res.tail.kind == TailInfo::Kind::geometric) tail["sum"] = to_json(res.tail.sum);
  }
  out["tail"] = tail;
  if (trace) {
    out["precision"] = res.precision_used;
    out["notes"] = res.notes;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands.

namespace detail {

inline const NumberFieldElem& arg(const Job& job, const char* key) {
  const auto it = job.args.find(key);
  if (it == job.args.end()) throw SchemaError(std::string("gauss op '") + job.op + "' needs '" + key + "'");
  return it->second;
}

inline PadicApprox padic_arg(const Job& job, const char* key) {
  const auto it = job.args.find(key);
  if (it == job.args.end()) return PadicApprox::zero(job.spec);
  return it->second.to_padic(job.precision);
}

inline RingElem ring_arg(const Job& job, const char* key, int k) {
  const PadicApprox x = arg(job, key).to_padic(k);
  if (!x.is_exact_zero() && x.valuation() < 0) throw InvalidInput(std::string(key) + " must be integral");
  return x.to_ring(k);
}

inline json run_gauss(const Job& job) {
  const FieldSpec& spec = job.spec;
  const bool dyadic = spec.p() == 2;
  const std::string& op = job.op;
  ClosedValue v;
  if (op == "gauss_sum") {
    v = dyadic ? dyadic_gauss_sum_closed(ring_arg(job, "sigma", 3)) : gauss_sum_closed(ring_arg(job, "sigma", 1));
  } else if (op == "quadratic_integral") {
    const PadicApprox sigma = arg(job, "sigma").to_padic(job.precision);
    const PadicApprox tau = padic_arg(job, "tau");
    v = dyadic ? quadratic_integral_dyadic(sigma, tau) : quadratic_integral_odd(sigma, tau);
  } else if (op == "twisted_unit_integral") {
    v = twisted_unit_integral(arg(job, "sigma").to_padic(job.precision));
  } else if (op == "hyperbolic_integral") {
    v = hyperbolic_integral(arg(job, "sigma").to_padic(job.precision), padic_arg(job, "tau1"), padic_arg(job, "tau2"));
  } else if (op == "anisotropic_integral") {
    v = anisotropic_integral(arg(job, "sigma").to_padic(job.precision), padic_arg(job, "tau1"), padic_arg(job, "tau2"),
                             select_rho(spec, job.precision));
  } else if (op == "unit_shell_integral") {
    v = unit_shell_integral(teichmuller(ring_arg(job, "a", job.precision)), padic_arg(job, "alpha"),
                            padic_arg(job, "m"), job.ell);
  } else if (op == "dyadic_quadratic_sum") {
    v = dyadic_quadratic_sum_closed(ring_arg(job, "sigma", 1), job.args.count("tau") ? ring_arg(job, "tau", 1)
                                                                                     : RingElem::from_int(spec, 1, 0));
  } else {
    throw SchemaError("unknown gauss op '" + op + "'");
  }
  json out = to_json(v);
  out["op"] = op;
  if (v.is_rational()) out["value"] = to_fraction_string(v.as_rational());
  return out;
}

inline json run_reduce(const Job& job) {
  const QuadraticPolynomial& q = *job.poly;
  json out;
  if (job.spec.p() == 2) {
    const ReducedDyadic red = reduce_dyadic(q);
    json squares = json::array(), hyper = json::array(), aniso = json::array();
    for (const auto& s : red.squares) squares.push_back({{"b", to_json(s.b)}, {"c", to_json(s.c)}});
    for (const auto& h : red.hyperbolic) hyper.push_back({{"b", to_json(h.b)}, {"c1", to_json(h.c1)}, {"c2", to_json(h.c2)}});
    for (const auto& a : red.anisotropic) aniso.push_back({{"b", to_json(a.b)}, {"c1", to_json(a.c1)}, {"c2", to_json(a.c2)}});
    out = {{"squares", squares}, {"hyperbolic", hyper}, {"anisotropic", aniso}, {"rho", to_json(red.rho)},
           {"constant", to_json(red.constant)}, {"transform", to_json(red.transform)}, {"reduced", to_json(red.reduced)}};
    out["certified"] = red.transform.is_invertible() && apply_transform(q, red.transform) == red.reduced;
  } else {
    const ReducedNonDyadic red = reduce_nondyadic(q);
    json terms = json::array();
    for (const auto& s : red.terms) terms.push_back({{"b", to_json(s.b)}, {"c", to_json(s.c)}});
    out = {{"terms", terms}, {"constant", to_json(red.constant)}, {"transform", to_json(red.transform)},
           {"reduced", to_json(red.reduced)}};
    out["certified"] = red.transform.is_invertible() && apply_transform(q, red.transform) == red.reduced;
  }
  return out;
}

inline json run_oracle(const Job& job) {
  const CountResult res = stabilized_density(*job.poly, job.n->to_padic(job.precision + job.k), job.k, job.oracle);
  json history = json::array();
  for (const auto& h : res.history) history.push_back(to_fraction_string(h));
  return {{"density", to_fraction_string(res.density)}, {"stabilized", res.stabilized}, {"k", res.k},
          {"history", history}};
}

// Oracle levels 1..k, stopping early only when the budget runs out. The
// settled value needs the last three computed levels to agree; a plateau
// earlier on can be followed by further change.
struct LevelScan {
  std::vector<Rational> history;
  std::optional<Rational> settled;
  std::optional<Rational> first_plateau;
};

inline LevelScan scan_levels(const QuadraticPolynomial& q, const PadicApprox& n, int k, const OracleOptions& opt) {
  LevelScan out;
  for (int level = 1; level <= k; ++level) {
    try {
      out.history.push_back(count_density(q, n, level, opt).density);
    } catch (const BudgetExceeded&) {
      break;
    }
    const auto& h = out.history;
    const std::size_t m = h.size();
    if (m >= 3 && h[m - 1] == h[m - 2] && h[m - 2] == h[m - 3] && !out.first_plateau) out.first_plateau = h[m - 1];
  }
  const auto& h = out.history;
  const std::size_t m = h.size();
  if (m >= 3 && h[m - 1] == h[m - 2] && h[m - 2] == h[m - 3]) out.settled = h[m - 1];
  return out;
}

inline json run_verify(const Job& job) {
  json list = json::array();
  int passed = 0, failed = 0, inconclusive = 0;
  for (const auto& inst : job.instances) {
    DensityOptions opts = job.density;
    opts.allow_divergent = true;
    const DensityResult res = beta(inst.q, inst.n, opts);
    const LevelScan scan = scan_levels(inst.q, inst.n.to_padic(job.precision + inst.k), inst.k, job.oracle);
    std::string status;
    if (!res.convergent()) status = scan.settled ? "fail" : "pass";
    else if (!scan.settled) status = "inconclusive";
    else status = *res.value == *scan.settled ? "pass" : "fail";
    (status == "pass" ? passed : status == "fail" ? failed : inconclusive) += 1;
    json history = json::array();
    for (const auto& h : scan.history) history.push_back(to_fraction_string(h));
    json e{{"beta", res.value ? json(to_fraction_string(*res.value)) : json(nullptr)},
           {"oracle", scan.settled ? json(to_fraction_string(*scan.settled)) : json(nullptr)},
           {"history", history},
           {"k", inst.k},
           {"status", status}};
    if (scan.first_plateau && scan.first_plateau != scan.settled)
      e["first_plateau"] = to_fraction_string(*scan.first_plateau);
    list.push_back(e);
  }
  return {{"instances", list}, {"passed", passed}, {"failed", failed}, {"inconclusive", inconclusive}};
}

}  // namespace detail

struct Outcome {
  int exit_code = kExitOk;
  json report;
};

inline json error_report(const std::string& name, const std::string& message) {
  return {{"error", name}, {"message", message}};
}

// Runs a validated job. Engine errors are reported with their stable name.
inline Outcome run(const Job& job) {
  try {
    json body;
    if (job.command == "density") {
      body = to_json(beta(*job.poly, *job.n, job.density), job.trace);
    } else if (job.command == "reduce") {
      body = detail::run_reduce(job);
    } else if (job.command == "gauss") {
      body = detail::run_gauss(job);
    } else if (job.command == "oracle") {
      body = detail::run_oracle(job);
    } else {
      body = detail::run_verify(job);
    }
    body["command"] = job.command;
    body["field"] = {{"p", job.spec.p()}, {"f", job.spec.f()}};
    return {kExitOk, body};
  } catch (const SchemaError& e) {
    return {kExitSchema, error_report("SchemaError", e.what())};
  } catch (const Error& e) {
    return {kExitComputation, error_report(e.name(), e.what())};
  }
}

inline Outcome run(const json& j) {
  Job job;
  try {
    job = parse_job(j);
  } catch (const SchemaError& e) {
    return {kExitSchema, error_report("SchemaError", e.what())};
  } catch (const json::exception& e) {
    return {kExitSchema, error_report("SchemaError", e.what())};
  } catch (const InvalidInput& e) {
    return {kExitSchema, error_report("SchemaError", e.what())};
  }
  return run(job);
}

inline Outcome run_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    return {kExitSchema, error_report("SchemaError", e.what())};
  }
  return run(j);
}

}  // namespace padic_density::cli
