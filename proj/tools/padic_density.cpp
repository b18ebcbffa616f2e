// Command-line front end: builds a JSON job from flags (or reads one whole)
// and prints the JSON report. Exit 1 on a computational error, 2 on bad input.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "padic_density/cli.hpp"

namespace {

using padic_density::cli::json;
using padic_density::cli::SchemaError;

// A flag value is inline JSON when it starts with '{' or '[', else a file.
json load_json(const std::string& arg) {
  if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) return json::parse(arg);
  std::ifstream in(arg);
  if (!in) throw SchemaError("cannot read '" + arg + "'");
  return json::parse(in);
}

// "a/b" or an integer stays a string; "[..]" becomes a coordinate list.
json element_arg(const std::string& s) {
  if (!s.empty() && s.front() == '[') return json::parse(s);
  return s;
}

struct Flags {
  std::string job, field, poly, n, instances, op, output;
  std::map<std::string, std::string> elems;
  int k = 0, precision = 0, ell = 0;
  long long budget = 0;
  std::string mode;
  bool trace = false, assume_n_zero = false;
};

json build_job(const std::string& command, const Flags& f) {
  json j = f.job.empty() ? json::object() : load_json(f.job);
  if (!command.empty()) j["command"] = command;
  if (!f.field.empty()) j["field"] = load_json(f.field);
  if (!f.poly.empty()) j["poly"] = load_json(f.poly);
  if (!f.n.empty()) j["n"] = element_arg(f.n);
  if (!f.instances.empty()) j["instances"] = load_json(f.instances);
  if (!f.op.empty()) j["op"] = f.op;
  for (const auto& [key, value] : f.elems)
    if (!value.empty()) j[key] = element_arg(value);
  if (f.k) j["k"] = f.k;
  if (f.precision) j["precision"] = f.precision;
  if (f.ell) j["ell"] = f.ell;
  if (f.budget) j["budget"] = f.budget;
  if (!f.mode.empty()) j["mode"] = f.mode;
  if (f.trace) j["trace"] = true;
  if (f.assume_n_zero) j["assume_n_zero"] = true;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local densities of quadratic polynomials over unramified p-adic rings"};
  app.require_subcommand(1);
  Flags flags;
  for (const char* key : {"sigma", "tau", "tau1", "tau2", "a", "alpha", "m"}) flags.elems[key];
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"density", "closed-form local density"},
      {"reduce", "Jordan-type reduction with its transform"},
      {"gauss", "closed-form exponential integrals"},
      {"oracle", "brute-force density by counting"},
      {"verify", "closed form against the oracle on listed instances"},
      {"run", "run a complete JSON job file"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--job", flags.job, "job JSON (file or inline); flags override its fields");
    sub->add_option("-o,--output", flags.output, "write the report here instead of stdout");
    if (name == "run") continue;
    sub->add_option("--field", flags.field, "field JSON {\"p\":..,\"f\":..}");
    sub->add_option("--budget", flags.budget, "oracle budget in ring operations");
    sub->add_option("--precision", flags.precision, "working precision of the inputs");
    if (name == "density" || name == "reduce" || name == "oracle") sub->add_option("--poly", flags.poly, "polynomial JSON");
    if (name == "density" || name == "oracle") sub->add_option("--n", flags.n, "target: \"a/b\" or [c0, c1, ..]");
    if (name == "oracle" || name == "verify") sub->add_option("--k", flags.k, "oracle level cap");
    if (name == "density" || name == "verify") {
      sub->add_option("--mode", flags.mode, "dyadic evaluation: both, case_table, lemma_sum");
      sub->add_flag("--assume-n-zero", flags.assume_n_zero, "treat an unresolved shifted target as 0");
    }
    if (name == "density") sub->add_flag("--trace", flags.trace, "report every term with its derivation tag");
    if (name == "verify") sub->add_option("--instances", flags.instances, "JSON array of {poly, n, k}");
    if (name == "gauss") {
      sub->add_option("--op", flags.op, "gauss_sum, quadratic_integral, twisted_unit_integral, hyperbolic_integral, "
                                        "anisotropic_integral, unit_shell_integral, dyadic_quadratic_sum");
      for (auto& [key, value] : flags.elems) sub->add_option("--" + key, value, "element argument");
      sub->add_option("--ell", flags.ell, "character exponent for unit_shell_integral");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : padic_density::cli::kExitSchema;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  padic_density::cli::Outcome outcome;
  try {
    outcome = padic_density::cli::run(build_job(command == "run" ? "" : command, flags));
  } catch (const SchemaError& e) {
    outcome = {padic_density::cli::kExitSchema, padic_density::cli::error_report("SchemaError", e.what())};
  } catch (const json::exception& e) {
    outcome = {padic_density::cli::kExitSchema, padic_density::cli::error_report("SchemaError", e.what())};
  }
  const std::string text = outcome.report.dump(2) + "\n";
  if (flags.output.empty() || outcome.exit_code != 0) {
    (outcome.exit_code == 0 ? std::cout : std::cerr) << text;
  } else {
    std::ofstream(flags.output) << text;
  }
  return outcome.exit_code;
}
