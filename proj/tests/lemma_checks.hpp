#pragma once

// Randomized closed-form versus brute-force checks for the Gauss sums and
// Gauss integrals. Shared by the unit tests and the acceptance binary.

#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "padic_density/gauss_engine.hpp"
#include "padic_density/oracle.hpp"
#include "padic_density/quadratic_model.hpp"
#include "test_support.hpp"

namespace padic_density::testing {

struct LemmaStats {
  int draws = 0;
  int failures = 0;
  int exact = 0;  // comparisons done exactly in Q(zeta_8)[sqrt p]
  int conductor_checks = 0;
  std::string first_failure;

  void record(const Comparison& c, const std::string& what) {
    ++draws;
    if (c.exact) ++exact;
    if (!c.equal) {
      ++failures;
      if (first_failure.empty()) {
        std::ostringstream os;
        os << what << " (difference " << c.difference << ")";
        first_failure = os.str();
      }
    }
  }
  void fail(const std::string& what) {
    ++failures;
    if (first_failure.empty()) first_failure = what;
  }
  bool ok() const { return failures == 0; }
};

inline constexpr int kRel = 12;
inline constexpr double kTol = 1e-9;

// Nonzero p-adic number with valuation in [lo, hi].
inline PadicApprox draw_nonzero(std::mt19937_64& rng, const FieldSpec& spec, int lo, int hi) {
  return random_with_valuation(rng, spec, random_int(rng, lo, hi), kRel);
}

// As above, but exactly zero one time in eight.
inline PadicApprox draw_value(std::mt19937_64& rng, const FieldSpec& spec, int lo, int hi) {
  if (random_int(rng, 0, 7) == 0) return PadicApprox::zero(spec);
  return draw_nonzero(rng, spec, lo, hi);
}

inline std::string describe(const PadicApprox& x) {
  if (x.is_exact_zero()) return "0";
  std::ostringstream os;
  os << "p^" << x.valuation() << "*(";
  const auto c = x.unit().coords();
  for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
  os << ")";
  return os.str();
}

// Runs check(rng, spec, stats) `per_field` times for each field.
inline LemmaStats run_draws(const std::vector<std::pair<int, int>>& fields, int per_field,
                            std::uint64_t seed,
                            const std::function<void(std::mt19937_64&, const FieldSpec&, LemmaStats&)>& check) {
  std::mt19937_64 rng(seed);
  LemmaStats stats;
  for (auto [p, f] : fields) {
    const auto spec = FieldSpec::create(p, f);
    for (int i = 0; i < per_field; ++i) check(rng, spec, stats);
  }
  return stats;
}

// Conductor soundness on cheap draws: one more level gives the same sum.
inline void conductor_check(LemmaStats& stats, const ExpSum& base, const std::function<ExpSum()>& finer,
                            bool cheap) {
  if (!cheap) return;
  ++stats.conductor_checks;
  if (!(base.normalized() == finer().normalized())) stats.fail("oracle changed at a finer level");
}

inline LemmaStats check_gauss_sums(int per_field, std::uint64_t seed = 1) {
  return run_draws({{3, 1}, {5, 1}, {7, 1}, {3, 2}, {5, 2}, {11, 1}, {13, 1}}, per_field, seed,
                   [](std::mt19937_64& rng, const FieldSpec& spec, LemmaStats& st) {
                     const RingElem s = random_unit(rng, spec, 1);
                     const ClosedValue closed = gauss_sum_closed(s);
                     st.record(compare(gauss_sum(s), closed, kTol), "gauss sum (linear form)");
                     --st.draws;
                     st.record(compare(gauss_sum_oracle(s), closed, kTol), "gauss sum (quadratic form)");
                   });
}

inline LemmaStats check_quadratic_odd(int per_field, std::uint64_t seed = 2) {
  return run_draws({{3, 1}, {5, 1}, {7, 1}, {3, 2}}, per_field, seed,
                   [](std::mt19937_64& rng, const FieldSpec& spec, LemmaStats& st) {
                     const auto s = draw_nonzero(rng, spec, -6, 3);
                     const auto t = draw_value(rng, spec, -6, 3);
                     const ExpSum o = quadratic_integral_oracle(s, t);
                     st.record(compare(o, quadratic_integral_odd(s, t), kTol),
                               "odd quadratic integral sigma=" + describe(s) + " tau=" + describe(t));
                     conductor_check(st, o, [&] { return quadratic_integral_oracle(s, t, 1); },
                                     detail::denominator_exponent({s, t}) <= 4);
                   });
}

inline LemmaStats check_twisted_unit(int per_field, std::uint64_t seed = 3) {
  return run_draws({{3, 1}, {5, 1}, {7, 1}, {3, 2}}, per_field, seed,
                   [](std::mt19937_64& rng, const FieldSpec& spec, LemmaStats& st) {
                     const auto s = draw_nonzero(rng, spec, -6, 3);
                     const ExpSum o = twisted_unit_integral_oracle(s);
                     st.record(compare(o, twisted_unit_integral(s), kTol),
                               "twisted unit integral sigma=" + describe(s));
                     conductor_check(st, o, [&] { return twisted_unit_integral_oracle(s, 1); },
                                     detail::denominator_exponent({s}) <= 4);
                   });
}

inline LemmaStats check_quadratic_dyadic(int per_field, std::uint64_t seed = 4) {
  return run_draws({{2, 1}, {2, 2}, {2, 3}}, per_field, seed,
                   [](std::mt19937_64& rng, const FieldSpec& spec, LemmaStats& st) {
                     const auto s = draw_nonzero(rng, spec, -6, 3);
                     // Equal orders are rare at random; force them now and then.
                     auto t = draw_value(rng, spec, -6, 3);
                     if (random_int(rng, 0, 3) == 0) t = draw_nonzero(rng, spec, s.valuation(), s.valuation());
                     const ExpSum o = quadratic_integral_oracle(s, t);
                     st.record(compare(o, quadratic_integral_dyadic(s, t), kTol),
                               "dyadic quadratic integral sigma=" + describe(s) + " tau=" + describe(t));
                     conductor_check(st, o, [&] { return quadratic_integral_oracle(s, t, 1); },
                                     detail::denominator_exponent({s, t}) <= 5);
                   });
}

inline LemmaStats check_hyperbolic(int per_field, std::uint64_t seed = 5) {
  LemmaStats st;
  std::mt19937_64 rng(seed);
  // Two-dimensional enumeration costs q^(2k); keep the wider valuation range
  // on the smaller residue fields.
  const std::vector<std::tuple<int, int, int>> fields = {{2, 1, -6}, {2, 2, -4}, {3, 1, -5}, {5, 1, -3}};
  for (auto [p, f, lo] : fields) {
    const auto spec = FieldSpec::create(p, f);
    for (int i = 0; i < per_field; ++i) {
      const auto s = draw_nonzero(rng, spec, lo, 3);
      const auto t1 = draw_value(rng, spec, lo, 3);
      const auto t2 = draw_value(rng, spec, lo, 3);
      const ExpSum o = hyperbolic_integral_oracle(s, t1, t2);
      st.record(compare(o, hyperbolic_integral(s, t1, t2), kTol),
                "hyperbolic integral sigma=" + describe(s) + " tau=" + describe(t1) + "," + describe(t2));
      conductor_check(st, o, [&] { return hyperbolic_integral_oracle(s, t1, t2, 1); },
                      p == 2 && f == 1 && detail::denominator_exponent({s, t1, t2}) <= 4);
    }
  }
  return st;
}

inline LemmaStats check_anisotropic(int per_field, std::uint64_t seed = 6) {
  LemmaStats st;
  std::mt19937_64 rng(seed);
  const std::vector<std::tuple<int, int, int>> fields = {{2, 1, -6}, {2, 2, -4}, {2, 3, -3}};
  for (auto [p, f, lo] : fields) {
    const auto spec = FieldSpec::create(p, f);
    const RingElem rho = select_rho(spec, kRel);
    for (int i = 0; i < per_field; ++i) {
      const auto s = draw_nonzero(rng, spec, lo, 3);
      const auto t1 = draw_value(rng, spec, lo, 3);
      const auto t2 = draw_value(rng, spec, lo, 3);
      const ExpSum o = anisotropic_integral_oracle(s, t1, t2, rho);
      st.record(compare(o, anisotropic_integral(s, t1, t2, rho), kTol),
                "anisotropic integral sigma=" + describe(s) + " tau=" + describe(t1) + "," + describe(t2));
      conductor_check(st, o, [&] { return anisotropic_integral_oracle(s, t1, t2, rho, 1); },
                      f == 1 && detail::denominator_exponent({s, t1, t2}) <= 4);
    }
  }
  return st;
}

inline LemmaStats check_unit_shell(int per_field, std::uint64_t seed = 7) {
  return run_draws({{2, 1}, {2, 2}, {2, 3}}, per_field, seed,
                   [](std::mt19937_64& rng, const FieldSpec& spec, LemmaStats& st) {
                     const RingElem a = random_teichmuller_unit(rng, spec, kRel);
                     const int ell = random_int(rng, 0, 1);
                     // Valuations of alpha near -3 are where the formulas are
                     // non-trivial; bias toward them.
                     const int lo = spec.f() == 3 ? -5 : -6;
                     auto alpha = random_int(rng, 0, 1) ? draw_value(rng, spec, lo, 3)
                                                        : draw_nonzero(rng, spec, -4, -2);
                     // Make 8 alpha a + m vanish to higher order some of the time.
                     const PadicApprox one = PadicApprox::from_int(spec, 1, kRel);
                     PadicApprox m = random_int(rng, 0, 1) ? one + draw_value(rng, spec, 1, 3)
                                                           : draw_value(rng, spec, 1, 3);
                     if (random_int(rng, 0, 3) == 0 && !alpha.is_exact_zero() && alpha.valuation() >= -3) {
                       const PadicApprox pa = PadicApprox::from_ring(a);
                       const PadicApprox target = draw_value(rng, spec, 2, 4);
                       const PadicApprox candidate = target - alpha.shifted(3) * pa;
                       const bool admissible =
                           candidate.is_exact_zero() || candidate.valuation() > 0 ||
                           (candidate.valuation() == 0 && candidate.unit().reduce(1) == RingElem::from_int(spec, 1, 1));
                       if (admissible) m = candidate;
                     }
                     const ExpSum o = unit_shell_integral_oracle(a, alpha, m, ell);
                     st.record(compare(o, unit_shell_integral(a, alpha, m, ell), kTol),
                               "unit shell integral alpha=" + describe(alpha) + " m=" + describe(m) +
                                   " ell=" + std::to_string(ell));
                     conductor_check(st, o, [&] { return unit_shell_integral_oracle(a, alpha, m, ell, 1); },
                                     spec.f() == 1);
                   });
}

inline LemmaStats check_dyadic_quadratic_sum(int per_field, std::uint64_t seed = 8) {
  return run_draws({{2, 1}, {2, 2}, {2, 3}, {2, 4}}, per_field, seed,
                   [](std::mt19937_64& rng, const FieldSpec& spec, LemmaStats& st) {
                     const RingElem s = random_unit(rng, spec, 1);
                     const RingElem t = random_elem(rng, spec, 1);
                     const ClosedValue closed = dyadic_quadratic_sum_closed(s, t);
                     st.record(compare(dyadic_quadratic_sum(s, t), closed, kTol), "dyadic quadratic sum");
                     --st.draws;
                     st.record(compare(dyadic_quadratic_sum_oracle(s, t), closed, kTol),
                               "dyadic quadratic sum (oracle)");
                   });
}

}  // namespace padic_density::testing
