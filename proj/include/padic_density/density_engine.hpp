#pragma once

// Local densities beta(n; Q) of a nondegenerate integral quadratic polynomial,
// summed shell by shell over sigma in pi^-t U for t = 1, 2, ...

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "padic_density/gauss_engine.hpp"
#include "padic_density/number_field.hpp"
#include "padic_density/quadratic_model.hpp"

namespace padic_density {

enum class DyadicMode { case_table, lemma_sum, both };

struct DensityOptions {
  DyadicMode mode = DyadicMode::both;
  // Treat a shifted target that vanishes to working precision as exactly 0.
  bool assume_n_zero = false;
  // Skip the linear-term bookkeeping when the polynomial is a pure form.
  bool form_shortcut = true;
  // Residue condition for U(t) with the roles of b and c exchanged (for
  // comparison only; it disagrees with brute force once f >= 3).
  bool exchanged_unit_condition = false;
  // Return a result without value instead of throwing NonConvergent.
  bool allow_divergent = false;
  // Working precision; 0 picks it automatically.
  int precision = 0;
};

struct TermRecord {
  int t = 0;
  ClosedValue value;
  std::string tag;
};

struct TailInfo {
  enum class Kind { none, geometric, divergent };
  Kind kind = Kind::none;
  int start = 0;         // first t summed by the tail
  Rational ratio = 0;    // term(t + 2) / term(t) once t >= start - 2
  ClosedValue seed;      // term(start - 2) + term(start - 1)
  ClosedValue sum;
};

struct DensityResult {
  std::optional<Rational> value;  // empty when divergent
  std::vector<TermRecord> terms;
  TailInfo tail;
  int precision_used = 0;
  int last_t = 0;  // largest t evaluated explicitly
  std::vector<std::string> notes;

  bool convergent() const { return value.has_value(); }
};

// Data supplied by the pipeline rather than the reduced form.
struct AnalysisHints {
  // n minus the critical value of Q, when both are known exactly.
  std::optional<PadicApprox> exact_shifted_target;
  // The polynomial had no linear part.
  bool form = false;
};

namespace detail {

inline constexpr int kInf = PadicApprox::kInfinite;

// Position of ord c relative to ord b: -1 below, 0 equal, 1 above.
inline int order_relation(int vb, const PadicApprox& c) {
  if (c.is_exact_zero()) return 1;
  if (c.is_indeterminate()) {
    if (c.valuation_lower_bound() > vb) return 1;
    throw PrecisionExhausted("linear coefficient vanishes to working precision");
  }
  return c.valuation() < vb ? -1 : (c.valuation() == vb ? 0 : 1);
}

// (lower?, t) for a pair block: lower when some c has order below ord b.
inline std::pair<bool, int> pair_relation(int vb, const PadicApprox& c1, const PadicApprox& c2) {
  const int r1 = order_relation(vb, c1), r2 = order_relation(vb, c2);
  if (r1 >= 0 && r2 >= 0) return {false, vb};
  int t = kInf;
  if (r1 < 0) t = std::min(t, c1.valuation());
  if (r2 < 0) t = std::min(t, c2.valuation());
  return {true, t};
}


inline int sign_pow(int parity_exponent) { return parity_exponent % 2 == 0 ? 1 : -1; }

inline bool values_agree(const ClosedValue& a, const ClosedValue& b) {
  if (a == b) return true;
  return std::abs(a.numeric() - b.numeric()) < 1e-9;
}

// Resolves the shifted target: (exactly zero?, valuation, value).
struct ShiftedTarget {
  bool zero = false;
  int order = kInf;
  PadicApprox value;
};

inline ShiftedTarget resolve_target(const PadicApprox& n, int td, bool assume_zero) {
  ShiftedTarget out{false, kInf, n};
  if (n.is_exact_zero()) {
    out.zero = true;
    return out;
  }
  if (n.is_indeterminate()) {
    // Every shell that survives (t <= td) sees n as 0 once n = 0 mod p^td.
    if (assume_zero || n.valuation_lower_bound() >= td) {
      out.zero = true;
      out.value = PadicApprox::zero(n.spec());
      return out;
    }
    throw PrecisionExhausted("shifted target vanishes to working precision; exact vanishing is undecidable"
                             " (pass assume_n_zero to treat it as 0)");
  }
  out.order = n.valuation();
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Odd residue characteristic.

struct NonDyadicIndex {
  int t = 0;
  bool lower = false;  // ord b > ord c
  int legendre_u = 1;  // (u_i / p) for the unit part u_i of b_i
};

struct NonDyadicTermData {
  FieldSpec spec;
  int precision = 0;
  std::vector<NonDyadicIndex> index;
  int td = detail::kInf;
  bool n_zero = false;
  int tn = detail::kInf;
  PadicApprox shifted_target;
  int legendre_un = 1;
  ClosedValue eps, eps3;

  int n_count() const {
    return static_cast<int>(std::count_if(index.begin(), index.end(), [](const auto& i) { return !i.lower; }));
  }
  int ell(int t) const {
    int l = 0;
    for (const auto& i : index)
      if (!i.lower && i.t < t && (t - i.t) % 2 != 0) ++l;
    return l;
  }
  // 2 tau(t).
  int tau2(int t) const {
    int s = 2 * t;
    for (const auto& i : index)
      if (!i.lower && i.t < t) s += i.t - t;
    return s;
  }
  ClosedValue delta(int t) const {
    const int p = spec.p();
    ClosedValue d = ClosedValue::one(p);
    int sign = 1;
    for (const auto& i : index)
      if (!i.lower && i.t < t && (t - i.t) % 2 != 0) {
        d = d * eps3;
        sign *= i.legendre_u;
      }
    return d * Rational(sign);
  }

  TermRecord term(int t) const {
    const int p = spec.p(), f = spec.f();
    const int q = static_cast<int>(spec.q());
    const int tn_eff = n_zero ? detail::kInf : tn;
    if (t < 1 || t > td || t > tn_eff + 1) return {t, ClosedValue::zero(p), "zero"};
    const int l = ell(t);
    if (t <= tn_eff) {
      if (l % 2 != 0) return {t, ClosedValue::zero(p), "main (odd)"};
      return {t, delta(t) * Rational(q - 1, q) * ClosedValue::sqrt_q_power(p, f, tau2(t)), "main"};
    }
    if (l % 2 == 0)
      return {t, delta(t) * Rational(-1, q) * ClosedValue::sqrt_q_power(p, f, tau2(t)), "omega (even)"};
    return {t, delta(t) * eps * Rational(legendre_un) * ClosedValue::sqrt_q_power(p, f, tau2(t) - 1),
            "omega (odd)"};
  }

  std::optional<int> last_term() const {
    const int lim = std::min(td, n_zero ? detail::kInf : tn + 1);
    if (lim >= detail::kInf) return std::nullopt;
    return lim;
  }
  int tail_start() const {
    int m = 0;
    for (const auto& i : index)
      if (!i.lower) m = std::max(m, i.t);
    return m + 2;
  }
  Rational tail_ratio() const { return rational_pow(Rational(spec.q()), 2 - n_count()); }
};

inline NonDyadicTermData analyze_nondyadic(const ReducedNonDyadic& red, const PadicApprox& n,
                                           const DensityOptions& opts = {}, const AnalysisHints& hints = {}) {
  const FieldSpec& spec = red.spec;
  detail::require_prime(spec, false);
  NonDyadicTermData d;
  d.spec = spec;
  d.precision = red.reduced.precision();
  d.eps = gauss_sign(spec);
  d.eps3 = gauss_sign_cubed(spec);
  const int rel = d.precision;
  PadicApprox target = n;
  bool all_n = true;
  for (const auto& term : red.terms) {
    const int vb = detail::require_nonzero(term.b, "diagonal coefficient").valuation();
    NonDyadicIndex idx;
    idx.legendre_u = legendre(term.b.unit());
    const int rel_c = hints.form ? 1 : detail::order_relation(vb, term.c);
    if (rel_c < 0) {
      idx.lower = true;
      idx.t = term.c.valuation();
      d.td = std::min(d.td, idx.t);
      all_n = false;
    } else {
      idx.t = vb;
      if (!hints.form && !term.c.is_exact_zero())
        target = target + term.c * term.c / (detail::constant(spec, 4, rel) * term.b);
    }
    d.index.push_back(idx);
  }
  if (all_n && hints.exact_shifted_target) target = *hints.exact_shifted_target;
  const auto st = detail::resolve_target(target, d.td, opts.assume_n_zero);
  d.n_zero = st.zero;
  d.tn = st.order;
  d.shifted_target = st.value;
  if (!d.n_zero) d.legendre_un = legendre(d.shifted_target.unit());
  return d;
}

// ---------------------------------------------------------------------------
// p = 2.

struct DyadicSquare {
  enum class Kind { lower, equal, upper };  // ord b > ord c, =, <
  Kind kind = Kind::upper;
  int t = 0;
  PadicApprox u;       // unit part of b
  RingElem u_power;    // u^(q - 1)
  int eta_u = 1;
  RingElem b_res, c_res;  // residues of the unit parts (equal orders only)
};

struct DyadicPair {
  bool lower = false;  // ord b > min ord c
  int t = 0;
};

// One case-table entry: the case number and its value, or nullopt when the
// entry divides by a vanishing digit or m(t) = 0.
struct CaseEntry {
  int number = 0;
  std::optional<ClosedValue> omega;
};

struct DyadicTermData {
  FieldSpec spec;
  int precision = 0;
  DyadicMode mode = DyadicMode::both;
  bool exchanged_unit_condition = false;
  std::vector<DyadicSquare> squares;
  std::vector<DyadicPair> hyperbolic, anisotropic;
  int rho_trace = 1;
  int td = detail::kInf;
  bool n_zero = false;
  int tn = detail::kInf;
  PadicApprox shifted_target;
  std::vector<RingElem> units;  // Teichmueller representatives of U

  int ell(int t) const {
    int l = 0;
    for (const auto& s : squares)
      if (s.kind == DyadicSquare::Kind::upper) {
        const int e = s.t - t + 1;
        if (e < 0 && e % 2 != 0) ++l;
      }
    return l;
  }
  int tau2(int t) const {
    int s = 2 * t;
    for (const auto& sq : squares)
      if (sq.kind == DyadicSquare::Kind::upper && sq.t + 1 < t) s += sq.t - t + 1;
    for (const auto* blocks : {&hyperbolic, &anisotropic})
      for (const auto& b : *blocks)
        if (!b.lower && b.t < t) s += 2 * (b.t - t);
    return s;
  }
  int delta(int t) const {
    const int f = spec.f();
    int sign = 1;
    for (const auto& s : squares)
      if (s.kind == DyadicSquare::Kind::upper) {
        const int e = s.t - t + 1;
        if (e < 0 && e % 2 != 0) sign *= detail::sign_pow(f - 1) * s.eta_u;
      }
    for (const auto& b : anisotropic)
      if (!b.lower && b.t < t && (t - b.t) % 2 != 0) sign *= detail::sign_pow(rho_trace);
    return sign;
  }
  PadicApprox m(int t) const {
    PadicApprox acc = PadicApprox::zero(spec);
    for (const auto& s : squares)
      if (s.kind == DyadicSquare::Kind::upper && s.t + 1 < t) acc = acc + PadicApprox::from_ring(s.u_power);
    return acc;
  }
  // Teichmueller units a with the equal-order conditions at level t.
  std::vector<RingElem> unit_set(int t) const {
    std::vector<RingElem> out;
    for (const RingElem& a : units) {
      bool keep = true;
      for (const auto& s : squares) {
        if (s.kind != DyadicSquare::Kind::equal || s.t + 1 != t) continue;
        // Shell sigma = a / pi^t, a in a + p: the term is nonzero iff
        // b' = a c'^2 on residues (b', c' the unit parts).
        const RingElem lhs = exchanged_unit_condition ? s.c_res : s.b_res;
        const RingElem rhs = exchanged_unit_condition ? s.b_res * s.b_res : s.c_res * s.c_res;
        if (!(lhs == a.reduce(1) * rhs)) {
          keep = false;
          break;
        }
      }
      if (keep) out.push_back(a);
    }
    return out;
  }
  bool skipped(int t) const {
    for (const auto& s : squares)
      if (s.kind == DyadicSquare::Kind::upper && s.t + 1 == t) return true;
    return false;
  }
  PadicApprox alpha(int t) const {
    return n_zero ? PadicApprox::zero(spec) : (-shifted_target).shifted(-t);
  }

  ClosedValue omega_lemma(int t) const {
    const int q = static_cast<int>(spec.q());
    const PadicApprox a = alpha(t), mt = m(t);
    const int l = ell(t) % 2;
    ClosedValue acc = ClosedValue::zero(2);
    for (const RingElem& u : unit_set(t)) acc = acc + unit_shell_integral(u, a, mt, l);
    return acc * Rational(q);
  }

  std::vector<CaseEntry> omega_cases(int t) const;

  TermRecord term(int t) const {
    const int f = spec.f();
    const int tn_eff = n_zero ? detail::kInf : tn;
    if (t < 1 || t > td || (tn_eff < detail::kInf && t > tn_eff + 3)) return {t, ClosedValue::zero(2), "zero"};
    if (skipped(t)) return {t, ClosedValue::zero(2), "skipped"};
    const ClosedValue scale = ClosedValue::sqrt_q_power(2, f, tau2(t) - 2) * Rational(delta(t));
    std::string tag;
    std::optional<ClosedValue> lemma, table;
    if (mode != DyadicMode::case_table) lemma = omega_lemma(t);
    if (mode != DyadicMode::lemma_sum) {
      for (const CaseEntry& e : omega_cases(t)) {
        const std::string name = "case(" + std::to_string(e.number) + ")";
        if (!e.omega) {
          tag += (tag.empty() ? "" : ",") + name + " undefined";
          continue;
        }
        if (table && !detail::values_agree(*table, *e.omega))
          throw InternalInconsistency("overlapping cases disagree at t = " + std::to_string(t));
        table = e.omega;
        tag += (tag.empty() ? "" : ",") + name;
      }
    }
    if (mode == DyadicMode::both && table && !detail::values_agree(*table, *lemma))
      throw InternalInconsistency("case table and lemma sum disagree at t = " + std::to_string(t) + " (" + tag +
                                  "): " + table->to_string() + " vs " + lemma->to_string());
    if (mode == DyadicMode::case_table && !table) {
      lemma = omega_lemma(t);
      tag += (tag.empty() ? "" : ",") + std::string("lemma_sum fallback");
    }
    if (mode == DyadicMode::lemma_sum) tag = "lemma_sum";
    else if (mode == DyadicMode::both) tag = tag.empty() ? "lemma_sum" : tag + "=lemma_sum";
    const ClosedValue omega = lemma ? *lemma : *table;
    return {t, omega * scale, tag};
  }

  std::optional<int> last_term() const {
    const int lim = std::min(td, n_zero ? detail::kInf : tn + 3);
    if (lim >= detail::kInf) return std::nullopt;
    return lim;
  }
  int tail_start() const {
    int m = 0;
    for (const auto& s : squares)
      if (s.kind == DyadicSquare::Kind::upper) m = std::max(m, s.t + 1);
    for (const auto* blocks : {&hyperbolic, &anisotropic})
      for (const auto& b : *blocks)
        if (!b.lower) m = std::max(m, b.t);
    return m + 2;
  }
  Rational tail_ratio() const {
    int w = 0;
    for (const auto& s : squares)
      if (s.kind == DyadicSquare::Kind::upper) ++w;
    for (const auto* blocks : {&hyperbolic, &anisotropic})
      for (const auto& b : *blocks)
        if (!b.lower) w += 2;
    return rational_pow(Rational(spec.q()), 2 - w);
  }
};

// The eight closed cases for omega(t) = q sum_{a in U(t)} I_a(-n/pi^t, m(t), l).
// Indicators are evaluated first so that a vanishing denominator only matters
// when the entry would otherwise be nonzero.
inline std::vector<CaseEntry> DyadicTermData::omega_cases(int t) const {
  const int f = spec.f();
  const int q = static_cast<int>(spec.q());
  const int K = precision;
  const auto uset = unit_set(t);
  const bool full = uset.size() == units.size();
  if (uset.empty()) return {{1, ClosedValue::zero(2)}};
  const int l = ell(t) % 2;
  const PadicApprox mt = m(t);
  const bool m_unit = !mt.is_zero_like() && mt.valuation() == 0;
  // 8 alpha = -8 n / pi^t and its digits n0 + 2 n1.
  const PadicApprox a8 = alpha(t).shifted(3);
  const auto nd = teichmuller_digits(a8.to_ring(3), 2);
  auto lift = [&](const RingElem& d) { return PadicApprox::from_ring(teichmuller(d.reduce(1).lift(K))); };
  const bool n0_zero = nd[0].reduce(1).is_zero();
  const bool n1_zero = nd[1].reduce(1).is_zero();
  const PadicApprox n0 = n0_zero ? PadicApprox::zero(spec) : lift(nd[0]);
  const PadicApprox n1 = n1_zero ? PadicApprox::zero(spec) : lift(nd[1]);
  auto in_p2 = [](const PadicApprox& x) { return x.to_ring(2).is_zero(); };
  auto e8 = [](const PadicApprox& x) { return ClosedValue::root_of_unity(epi_phase(x.shifted(-3))); };
  const ClosedValue zero = ClosedValue::zero(2);
  const Rational sign(detail::sign_pow(f - 1));
  const ClosedValue inv_root_q = ClosedValue::sqrt_q_power(2, f, -1);
  std::vector<CaseEntry> out;

  if (l == 0) {
    if (m_unit) {
      if (uset.size() == 1) {  // (2)
        const PadicApprox x = mt + PadicApprox::from_ring(uset[0]) * a8;
        out.push_back({2, in_p2(x) ? e8(x) : zero});
      }
      if (full) {  // (3)
        const PadicApprox x = n0 * mt + a8;
        if (!in_p2(x)) out.push_back({3, zero});
        else if (n0_zero) out.push_back({3, std::nullopt});
        else out.push_back({3, e8(mt + a8 / n0)});
      }
      return out;
    }
    if (!full) return {{0, std::nullopt}};  // not covered by the table
    const bool n_zero_or_low = n_zero || t <= tn + 1;
    if (n_zero_or_low) {  // (4)
      const bool chi_t = n_zero || tn >= t;
      if (!in_p2(mt)) return {{4, zero}};
      return {{4, e8(mt) * Rational(chi_t ? q - 1 : -1)}};
    }
    // (5): chi of ord(n / m) = t - 3.
    if (mt.is_exact_zero()) return {{5, std::nullopt}};
    if (mt.is_indeterminate()) {
      if (tn - mt.valuation_lower_bound() < t - 3) return {{5, zero}};
      throw PrecisionExhausted("m(t) vanishes to working precision");
    }
    if (tn - mt.valuation() != t - 3) return {{5, zero}};
    if (n1_zero) return {{5, std::nullopt}};
    const auto md = teichmuller_digits(mt.to_ring(2), 2);
    const PadicApprox m1 = md[1].reduce(1).is_zero() ? PadicApprox::zero(spec) : lift(md[1]);
    return {{5, e8(mt + m1 * a8 / n1)}};
  }

  if (m_unit) {
    const int eta_m = eta_char(mt);
    if (uset.size() == 1) {  // (6)
      if (!n0_zero) {
        out.push_back({6, zero});
      } else {
        const PadicApprox u = PadicApprox::from_ring(uset[0]);
        const PadicApprox x = detail::constant(spec, 2, K) * n1 * u * mt + u * a8;
        out.push_back({6, e8(x) * sign * Rational(eta_m) * inv_root_q});
      }
    }
    if (full) {  // (7)
      if (!n0_zero) {
        out.push_back({7, zero});
      } else {
        const bool chi = in_p2(n1 * mt + a8.shifted(-1));
        out.push_back({7, inv_root_q * sign * Rational(eta_m) * Rational(chi ? q - 1 : -1)});
      }
    }
    if (out.empty()) return {{0, std::nullopt}};
    return out;
  }
  // (8)
  if (n0_zero) return {{8, zero}};
  const RingElem inv = n0.unit().inverse().reduce(1);
  const bool member = std::any_of(uset.begin(), uset.end(), [&](const RingElem& a) { return a.reduce(1) == inv; });
  if (!member) return {{8, zero}};
  const auto md = teichmuller_digits(mt.to_ring(2), 2);
  const PadicApprox m1 = md[1].reduce(1).is_zero() ? PadicApprox::zero(spec) : lift(md[1]);
  const int eta = eta_char((-a8) * (detail::constant(spec, 1, K) + mt));
  const PadicApprox x = m1 * n1 / n0;
  return {{8, ClosedValue::root_of_unity(epi_phase(x.shifted(-1))) * sign * Rational(eta) * inv_root_q}};
}

inline DyadicTermData analyze_dyadic(const ReducedDyadic& red, const PadicApprox& n, const DensityOptions& opts = {},
                                     const AnalysisHints& hints = {}) {
  const FieldSpec& spec = red.spec;
  detail::require_prime(spec, true);
  DyadicTermData d;
  d.spec = spec;
  d.precision = red.reduced.precision();
  d.mode = opts.mode;
  d.exchanged_unit_condition = opts.exchanged_unit_condition;
  const int rel = d.precision;
  const int q = static_cast<int>(spec.q());
  PadicApprox target = n;
  bool all_upper = true;
  for (const auto& term : red.squares) {
    const int vb = detail::require_nonzero(term.b, "square coefficient").valuation();
    DyadicSquare s;
    s.u = PadicApprox::from_unit(0, term.b.unit());
    s.u_power = term.b.unit().pow(static_cast<detail::u64>(q - 1));
    s.eta_u = eta_char(s.u);
    const int r = hints.form ? 1 : detail::order_relation(vb, term.c);
    if (r < 0) {
      s.kind = DyadicSquare::Kind::lower;
      s.t = term.c.valuation();
      d.td = std::min(d.td, s.t);
    } else if (r == 0) {
      s.kind = DyadicSquare::Kind::equal;
      s.t = vb;
      s.b_res = term.b.unit().reduce(1);
      s.c_res = term.c.unit().reduce(1);
      d.td = std::min(d.td, s.t + 1);
    } else {
      s.kind = DyadicSquare::Kind::upper;
      s.t = vb;
      if (!hints.form && !term.c.is_exact_zero())
        target = target + term.c * term.c / (detail::constant(spec, 4, rel) * term.b);
    }
    if (s.kind != DyadicSquare::Kind::upper) all_upper = false;
    d.squares.push_back(s);
  }
  const PadicApprox rho = PadicApprox::from_ring(red.rho.lift(std::max(red.rho.precision(), 3)));
  d.rho_trace = static_cast<int>(trace(red.rho.reduce(1)));
  auto add_pairs = [&](const std::vector<PairTerm>& blocks, std::vector<DyadicPair>& out, bool aniso) {
    for (const auto& b : blocks) {
      const int vb = detail::require_nonzero(b.b, "block scale").valuation();
      DyadicPair pr;
      if (hints.form) {
        pr = {false, vb};
      } else {
        const auto [lower, t] = detail::pair_relation(vb, b.c1, b.c2);
        pr = {lower, t};
      }
      if (pr.lower) {
        d.td = std::min(d.td, pr.t);
        all_upper = false;
      } else if (!hints.form) {
        if (!aniso) {
          target = target + b.c1 * b.c2 / b.b;
        } else {
          const PadicApprox numr = rho * b.c1 * b.c1 + b.c2 * b.c2 - b.c1 * b.c2;
          if (!numr.is_exact_zero())
            target = target + numr / ((detail::constant(spec, 4, rel) * rho - detail::constant(spec, 1, rel)) * b.b);
        }
      }
      out.push_back(pr);
    }
  };
  add_pairs(red.hyperbolic, d.hyperbolic, false);
  add_pairs(red.anisotropic, d.anisotropic, true);
  if (all_upper && hints.exact_shifted_target) target = *hints.exact_shifted_target;
  const auto st = detail::resolve_target(target, d.td, opts.assume_n_zero);
  d.n_zero = st.zero;
  d.tn = st.order;
  d.shifted_target = st.value;
  const GrContext ring(spec, d.precision);
  const auto reps = teichmuller_set(ring);
  for (std::size_t i = 1; i < reps.size(); ++i) d.units.emplace_back(spec, d.precision, reps[i]);
  return d;
}

// ---------------------------------------------------------------------------
// Assembly.

namespace detail {

template <class Data>
DensityResult assemble(const Data& d, bool allow_divergent) {
  const int p = d.spec.p();
  DensityResult out;
  out.precision_used = d.precision;
  out.tail.seed = ClosedValue::zero(p);
  out.tail.sum = ClosedValue::zero(p);
  ClosedValue total = ClosedValue::one(p);
  auto visit = [&](int t) {
    TermRecord rec = d.term(t);
    total = total + rec.value;
    out.terms.push_back(std::move(rec));
    out.last_t = t;
  };
  if (const auto last = d.last_term()) {
    for (int t = 1; t <= *last; ++t) visit(t);
  } else {
    const int t0 = d.tail_start();
    for (int t = 1; t <= t0 + 1; ++t) visit(t);
    const Rational ratio = d.tail_ratio();
    const ClosedValue a = out.terms[static_cast<std::size_t>(t0 - 1)].value;
    const ClosedValue b = out.terms[static_cast<std::size_t>(t0)].value;
    // The period-two recurrence is derived, not assumed: check it once.
    if (!values_agree(d.term(t0 + 2).value, a * ratio) || !values_agree(d.term(t0 + 3).value, b * ratio))
      throw InternalInconsistency("tail terms do not follow the expected geometric ratio");
    out.tail.start = t0 + 2;
    out.tail.ratio = ratio;
    out.tail.seed = a + b;
    if (a.is_zero() && b.is_zero()) {
      out.tail.kind = TailInfo::Kind::none;
    } else if (ratio >= 1) {
      out.tail.kind = TailInfo::Kind::divergent;
      if (!allow_divergent)
        throw NonConvergent("terms recur with ratio " + to_fraction_string(ratio) + " every two steps");
      return out;
    } else {
      out.tail.kind = TailInfo::Kind::geometric;
      out.tail.sum = out.tail.seed * (ratio / (Rational(1) - ratio));
      total = total + out.tail.sum;
    }
  }
  if (!total.is_rational())
    throw InternalInconsistency("irrational components do not cancel: " + total.to_string());
  const Rational v = total.as_rational();
  if (v < 0) throw InternalInconsistency("negative density " + to_fraction_string(v));
  out.value = v;
  return out;
}

// 1 + sum of the terms with t <= k: the level-k density.
template <class Data>
ClosedValue partial_sum(const Data& d, int k) {
  ClosedValue total = ClosedValue::one(d.spec.p());
  for (int t = 1; t <= k; ++t) total = total + d.term(t).value;
  return total;
}

}  // namespace detail

inline DensityResult beta_nondyadic(const NonDyadicTermData& data, bool allow_divergent = false) {
  return detail::assemble(data, allow_divergent);
}

inline DensityResult beta_dyadic(const DyadicTermData& data, bool allow_divergent = false) {
  return detail::assemble(data, allow_divergent);
}

inline ClosedValue partial_density(const NonDyadicTermData& data, int k) { return detail::partial_sum(data, k); }
inline ClosedValue partial_density(const DyadicTermData& data, int k) { return detail::partial_sum(data, k); }

// ---------------------------------------------------------------------------
// Pipeline.

namespace detail {

// Runs fn on the analyzed data of (Q, n) at precision k.
template <class Fn>
auto with_analysis(const QuadraticPolynomial& q_in, const PadicApprox& n_in, const std::optional<NumberFieldElem>& exact_n,
                   const DensityOptions& opts, int k, Fn&& fn) {
  const QuadraticPolynomial q = q_in.precision() == k ? q_in : q_in.at_precision(k);
  const PadicApprox n = exact_n ? exact_n->to_padic(k) : n_in;
  AnalysisHints hints;
  hints.form = opts.form_shortcut && q.linear_part_exactly_zero();
  if (hints.form && exact_n) hints.exact_shifted_target = (*exact_n - q.exact_constant()).to_padic(k);
  else if (q.is_exact() && exact_n) hints.exact_shifted_target = (*exact_n - critical_value(q)).to_padic(k);
  const auto [q0, n0] = constant_normalize(q, n);
  if (q.spec().p() == 2) return fn(analyze_dyadic(reduce_dyadic(q0), n0, opts, hints));
  return fn(analyze_nondyadic(reduce_nondyadic(q0), n0, opts, hints));
}

// Working precisions to try: the first guess, then the largest available.
inline std::vector<int> precision_attempts(const QuadraticPolynomial& q, const DensityOptions& opts, int first) {
  const int cap = max_precision(q.spec().p());
  if (!q.is_exact()) return {opts.precision ? std::min(opts.precision, q.precision()) : q.precision()};
  if (opts.precision) return {std::min(opts.precision, cap)};
  if (std::min(cap, first) == cap) return {cap};
  return {first, cap};
}

template <class Fn>
auto with_retry(const QuadraticPolynomial& q, const DensityOptions& opts, int first, Fn&& fn) {
  const auto attempts = precision_attempts(q, opts, first);
  for (std::size_t i = 0;; ++i) {
    try {
      return fn(attempts[i], i > 0);
    } catch (const PrecisionExhausted&) {
      if (i + 1 == attempts.size()) throw;
    }
  }
}

}  // namespace detail

// Default first working precision; the retry uses the largest one available.
inline constexpr int kFirstPrecision = 24;


// beta(n; Q) for integral nondegenerate Q. The working precision starts at
// kFirstPrecision (or opts.precision) and is raised once on PrecisionExhausted.
inline DensityResult beta(const QuadraticPolynomial& q, const PadicApprox& n, const DensityOptions& opts = {},
                          const std::optional<NumberFieldElem>& exact_n = std::nullopt) {
  return detail::with_retry(q, opts, kFirstPrecision, [&](int k, bool retried) {
    DensityResult r = detail::with_analysis(q, n, exact_n, opts, k, [&](const auto& data) {
      return detail::assemble(data, opts.allow_divergent);
    });
    if (retried) r.notes.push_back("retried at precision " + std::to_string(k));
    return r;
  });
}

// Level-k densities 1 + sum_{t <= k} term(t) for k = 1..k_max; these equal
// the normalized solution counts modulo p^k.
inline std::vector<ClosedValue> partial_densities(const QuadraticPolynomial& q, const PadicApprox& n, int k_max,
                                                  const DensityOptions& opts = {},
                                                  const std::optional<NumberFieldElem>& exact_n = std::nullopt) {
  return detail::with_retry(q, opts, std::max(kFirstPrecision, k_max + 8), [&](int k, bool) {
    return detail::with_analysis(q, n, exact_n, opts, k, [&](const auto& data) {
      std::vector<ClosedValue> out;
      ClosedValue total = ClosedValue::one(q.spec().p());
      for (int t = 1; t <= k_max; ++t) {
        total = total + data.term(t).value;
        out.push_back(total);
      }
      return out;
    });
  });
}

inline std::vector<ClosedValue> partial_densities(const QuadraticPolynomial& q, const NumberFieldElem& n, int k_max,
                                                  const DensityOptions& opts = {}) {
  return partial_densities(q, n.to_padic(std::max(q.precision(), 1)), k_max, opts, n);
}

inline DensityResult beta(const QuadraticPolynomial& q, const NumberFieldElem& n, const DensityOptions& opts = {}) {
  const int k = q.precision();
  return beta(q, n.to_padic(std::max(k, 1)), opts, n);
}

}  // namespace padic_density
