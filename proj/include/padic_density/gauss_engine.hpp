#pragma once

#include <cmath>

#include "padic_density/exact_values.hpp"

namespace padic_density {

namespace detail {

inline int order_lb(const PadicApprox& x) {
  if (x.is_exact_zero()) return PadicApprox::kInfinite;
  return x.valuation_lower_bound();
}

// ord(a) <= ord(b) where a is a known nonzero value. Throws when b is only
// known to be O(p^N) with N <= ord(a).
inline bool order_le(const PadicApprox& a, const PadicApprox& b) {
  const int va = a.valuation();
  if (b.is_exact_zero()) return true;
  if (b.is_indeterminate()) {
    if (b.valuation_lower_bound() >= va) return true;
    throw PrecisionExhausted("order comparison needs more digits");
  }
  return va <= b.valuation();
}

inline const PadicApprox& require_nonzero(const PadicApprox& x, const char* what) {
  if (x.is_exact_zero()) throw InvalidInput(std::string(what) + " must be nonzero");
  if (x.is_indeterminate()) throw PrecisionExhausted(std::string(what) + " is zero to working precision");
  return x;
}

inline void require_prime(const FieldSpec& spec, bool dyadic) {
  if ((spec.p() == 2) != dyadic)
    throw InvalidInput(dyadic ? "operation needs p = 2" : "operation needs an odd prime");
}

inline ClosedValue sign_value(int p, int s) { return ClosedValue(p, Rational(s)); }

inline PadicApprox constant(const FieldSpec& spec, detail::i64 c, int rel) {
  return PadicApprox::from_int(spec, c, rel);
}

// Element of GR(p^k) as a p-adic approximation.
inline PadicApprox approx(const RingElem& x) { return PadicApprox::from_ring(x); }

}  // namespace detail

// Quadratic Gauss sum over the residue field, computed as the Legendre-weighted
// linear sum over the nonzero Teichmueller representatives.
inline ExpSum gauss_sum(const RingElem& sigma) {
  const FieldSpec& spec = sigma.spec();
  detail::require_prime(spec, false);
  if (!sigma.is_unit()) throw NonUnit("Gauss sum needs a unit");
  const GrContext res(spec, 1);
  const Coords s = res.reduce(sigma.raw(), sigma.ring());
  ExpSum out(spec.p());
  const auto reps = teichmuller_set(res);
  for (std::size_t i = 1; i < reps.size(); ++i) {
    const int chi = legendre(RingElem(spec, 1, reps[i]));
    out.add(Phase(spec.p(), -res.trace(res.mul(s, reps[i])), 1), chi);
  }
  return out;
}

// The fourth root of unity eps with G(1) = eps^3 sqrt(q), found by matching
// the four candidates against the exact sum.
inline ClosedValue gauss_sign(const FieldSpec& spec) {
  detail::require_prime(spec, false);
  const auto g = gauss_sum(RingElem::from_int(spec, 1, 1)).numeric();
  const ClosedValue root_q = ClosedValue::sqrt_q_power(spec.p(), spec.f(), 1);
  for (int j = 0; j < 4; ++j) {
    const ClosedValue eps = ClosedValue::zeta8(spec.p(), 2 * j);
    const ClosedValue cand = eps * eps * eps * root_q;
    if (std::abs(cand.numeric() - g) < 1e-6 * std::abs(root_q.numeric())) return eps;
  }
  throw InternalInconsistency("no fourth root of unity matches the Gauss sum");
}

inline ClosedValue gauss_sign_cubed(const FieldSpec& spec) {
  const ClosedValue e = gauss_sign(spec);
  return e * e * e;
}

// eps^3 (sigma / p) sqrt(q).
inline ClosedValue gauss_sum_closed(const RingElem& sigma) {
  const FieldSpec& spec = sigma.spec();
  return gauss_sign_cubed(spec) * Rational(legendre(sigma)) *
         ClosedValue::sqrt_q_power(spec.p(), spec.f(), 1);
}

// Integral over o of e(sigma x^2) for odd p, sigma = u p^s.
inline ClosedValue quadratic_integral_odd_homogeneous(const PadicApprox& sigma) {
  const FieldSpec& spec = sigma.spec();
  detail::require_prime(spec, false);
  const int p = spec.p();
  const int s = detail::require_nonzero(sigma, "sigma").valuation();
  if (s >= 0) return ClosedValue::one(p);
  ClosedValue v = ClosedValue::sqrt_q_power(p, spec.f(), s);
  if (s % 2 != 0) v = v * gauss_sign_cubed(spec) * Rational(legendre(sigma.unit()));
  return v;
}

// Integral over o of e(sigma x^2 + tau x), odd p.
inline ClosedValue quadratic_integral_odd(const PadicApprox& sigma, const PadicApprox& tau) {
  const FieldSpec& spec = sigma.spec();
  detail::require_prime(spec, false);
  const int p = spec.p();
  const int s = detail::require_nonzero(sigma, "sigma").valuation();
  if (s >= 0 && detail::order_lb(tau) >= 0) return ClosedValue::one(p);
  if (!detail::order_le(sigma, tau)) return ClosedValue::zero(p);
  const PadicApprox shift = -(tau * tau) / (detail::constant(spec, 4, sigma.relative_precision()) * sigma);
  return ClosedValue::root_of_unity(epi_phase(shift)) * quadratic_integral_odd_homogeneous(sigma);
}

// Integral over the units of (x / p) e(sigma x), odd p.
inline ClosedValue twisted_unit_integral(const PadicApprox& sigma) {
  const FieldSpec& spec = sigma.spec();
  detail::require_prime(spec, false);
  if (detail::require_nonzero(sigma, "sigma").valuation() != -1) return ClosedValue::zero(spec.p());
  return gauss_sign_cubed(spec) * Rational(legendre(sigma.unit())) *
         ClosedValue::sqrt_q_power(spec.p(), spec.f(), -1);
}

// Integral over o of e(sigma x^2) for p = 2.
inline ClosedValue quadratic_integral_dyadic_homogeneous(const PadicApprox& sigma) {
  const FieldSpec& spec = sigma.spec();
  detail::require_prime(spec, true);
  const int s = detail::require_nonzero(sigma, "sigma").valuation();
  if (s >= 0) return ClosedValue::one(2);
  if (s == -1) return ClosedValue::zero(2);
  const RingElem u = sigma.unit().reduce(3);
  const int sign = ((s + 1) * (spec.f() - 1)) % 2 == 0 ? 1 : -1;
  const int eta = (s + 1) % 2 == 0 ? 1 : eta_char(u);
  const RingElem w = u.pow(static_cast<detail::u64>(spec.q() - 1));
  const Phase ph(2, -trace(w), 3);
  return ClosedValue::root_of_unity(ph) * Rational(sign * eta) *
         ClosedValue::sqrt_q_power(2, spec.f(), s + 1);
}

// Integral over o of e(sigma x^2 + tau x) for p = 2.
inline ClosedValue quadratic_integral_dyadic(const PadicApprox& sigma, const PadicApprox& tau) {
  const FieldSpec& spec = sigma.spec();
  detail::require_prime(spec, true);
  const int s = detail::require_nonzero(sigma, "sigma").valuation();
  if (s >= 0 && detail::order_lb(tau) >= 0) return ClosedValue::one(2);
  if (!detail::order_le(sigma, tau)) return ClosedValue::zero(2);
  const bool equal_orders = !tau.is_zero_like() && tau.valuation() == s;
  if (equal_orders) {
    if (s < -1) return ClosedValue::zero(2);
    // chi_p(2 sigma - 4 tau^2): both terms are units here.
    const RingElem a = sigma.unit().reduce(1);
    const RingElem b = tau.unit().reduce(1);
    return (a - b * b).is_zero() ? ClosedValue::one(2) : ClosedValue::zero(2);
  }
  const PadicApprox shift = -(tau * tau) / (detail::constant(spec, 4, sigma.relative_precision()) * sigma);
  return ClosedValue::root_of_unity(epi_phase(shift)) * quadratic_integral_dyadic_homogeneous(sigma);
}

// Integral over o^2 of e(sigma y1 y2 + tau1 y1 + tau2 y2); valid for every p.
inline ClosedValue hyperbolic_integral(const PadicApprox& sigma, const PadicApprox& tau1,
                                       const PadicApprox& tau2) {
  const int p = sigma.spec().p();
  const int s = detail::require_nonzero(sigma, "sigma").valuation();
  if (s >= 0 && detail::order_lb(tau1) >= 0 && detail::order_lb(tau2) >= 0) return ClosedValue::one(p);
  if (!detail::order_le(sigma, tau1) || !detail::order_le(sigma, tau2)) return ClosedValue::zero(p);
  const PadicApprox shift = -(tau1 * tau2) / sigma;
  return ClosedValue::root_of_unity(epi_phase(shift)) * ClosedValue::sqrt_q_power(p, sigma.spec().f(), 2 * s);
}

// Integral over o^2 of e(sigma (z1^2 + z1 z2 + rho z2^2) + tau1 z1 + tau2 z2), p = 2.
inline ClosedValue anisotropic_integral(const PadicApprox& sigma, const PadicApprox& tau1,
                                        const PadicApprox& tau2, const RingElem& rho) {
  const FieldSpec& spec = sigma.spec();
  detail::require_prime(spec, true);
  const int s = detail::require_nonzero(sigma, "sigma").valuation();
  if (s >= 0 && detail::order_lb(tau1) >= 0 && detail::order_lb(tau2) >= 0) return ClosedValue::one(2);
  if (!detail::order_le(sigma, tau1) || !detail::order_le(sigma, tau2)) return ClosedValue::zero(2);
  const PadicApprox r = detail::approx(rho);
  const PadicApprox four = detail::constant(spec, 4, rho.precision());
  const PadicApprox one = detail::constant(spec, 1, rho.precision());
  const PadicApprox num = tau1 * tau2 - r * tau1 * tau1 - tau2 * tau2;
  const PadicApprox den = (four * r - one) * sigma;
  const Phase ph = epi_phase(num / den);
  const int tr = static_cast<int>(trace(rho.reduce(1)));
  const int sign = (tr * s) % 2 == 0 ? 1 : -1;
  return ClosedValue::root_of_unity(ph) * Rational(sign) * ClosedValue::sqrt_q_power(2, spec.f(), 2 * s);
}

// e((a - 2b) / 8a) (-1)^(f-1) sqrt(q) for sigma = a + 2b mod 4: the common
// value of the quarter-period sums over the residues.
inline ClosedValue dyadic_gauss_sum_closed(const RingElem& sigma) {
  const FieldSpec& spec = sigma.spec();
  detail::require_prime(spec, true);
  if (!sigma.is_unit()) throw NonUnit("sigma must be a unit");
  const auto d = teichmuller_digits(sigma.lift(std::max(sigma.precision(), 2)).reduce(2), 2);
  const RingElem a = d[0].lift(3), b = d[1].lift(3);
  const RingElem a3 = teichmuller(a);
  const RingElem b3 = teichmuller(b);
  const RingElem w = (a3 - RingElem::from_int(spec, 3, 2) * b3) * a3.inverse();
  const int sign = (spec.f() - 1) % 2 == 0 ? 1 : -1;
  return ClosedValue::root_of_unity(Phase(2, -trace(w), 3)) * Rational(sign) *
         ClosedValue::sqrt_q_power(2, spec.f(), 1);
}

// Integral over a + 2o of eta(x)^ell e(x alpha + x^(2^f - 1) m / 8), for a
// Teichmueller unit a and integral m. Indicators are evaluated before any
// quotient that they gate.
inline ClosedValue unit_shell_integral(const RingElem& a, const PadicApprox& alpha, const PadicApprox& m,
                                       int ell) {
  const FieldSpec& spec = a.spec();
  detail::require_prime(spec, true);
  if (!a.is_unit()) throw NonUnit("shell center must be a unit");
  if (detail::order_lb(m) < 0) throw InvalidInput("m must be integral");
  if (!m.is_zero_like() && m.valuation() == 0 && !(m.unit().reduce(1) == RingElem::from_int(spec, 1, 1)))
    throw InvalidInput("m must lie in 1 + p or in p");
  const int f = spec.f();
  const int K = std::max(a.precision(), 6);
  const PadicApprox pa = detail::approx(teichmuller(a.lift(K)));
  const PadicApprox alpha8 = alpha.shifted(3);
  const Rational inv_q = Rational(1, spec.q());
  if (ell % 2 == 0) {
    const PadicApprox v = alpha8 * pa + m;
    if (detail::order_lb(v) < 2) {
      if (v.is_indeterminate()) throw PrecisionExhausted("shell indicator undecidable");
      return ClosedValue::zero(2);
    }
    return ClosedValue::root_of_unity(epi_phase(v.shifted(-3))) * inv_q;
  }
  if (detail::order_lb(alpha8) < 0) {
    if (alpha8.is_indeterminate()) throw PrecisionExhausted("shell indicator undecidable");
    return ClosedValue::zero(2);
  }
  const RingElem a8 = alpha8.to_ring(3);
  const auto ad = teichmuller_digits(a8, 2);
  const RingElem alpha0 = ad[0].reduce(1), alpha1 = ad[1].reduce(1);
  const int sign = (f - 1) % 2 == 0 ? 1 : -1;
  const ClosedValue scale = ClosedValue::sqrt_q_power(2, f, -3) * Rational(sign);
  const RingElem mr = m.to_ring(3);
  if (mr.is_unit()) {
    if (!alpha0.is_zero()) return ClosedValue::zero(2);
    // q^-2 e((8 alpha a + m) / 8) sum_{b in U_0} e((8 alpha a - m) b / 4), the
    // last factor being a quarter-period Gauss sum.
    const RingElem a3 = teichmuller(a.lift(3));
    const RingElem x = a8 * a3 + mr;
    const RingElem y = a8 * a3 - mr;
    return ClosedValue::root_of_unity(Phase(2, -trace(x), 3)) * dyadic_gauss_sum_closed(y) *
           Rational(1, spec.q() * spec.q());
  }
  if (!(alpha0 * a.reduce(1) == RingElem::from_int(spec, 1, 1))) return ClosedValue::zero(2);
  const auto md = teichmuller_digits(mr.reduce(2), 2);
  const RingElem m1 = md[1].reduce(1);
  const RingElem x = m1 * alpha1 * alpha0.inverse();
  const int eta = eta_char(a8 * (RingElem::from_int(spec, 3, 1) + mr));
  return ClosedValue::root_of_unity(Phase(2, -trace(x), 1)) * Rational(eta) * scale;
}

// sum over r in o/p of e((sigma r^2 + tau r) / 2), enumerated over the
// Teichmueller representatives.
inline ExpSum dyadic_quadratic_sum(const RingElem& sigma, const RingElem& tau) {
  const FieldSpec& spec = sigma.spec();
  detail::require_prime(spec, true);
  if (!sigma.is_unit()) throw NonUnit("sigma must be a unit");
  const GrContext res(spec, 1);
  const Coords s = res.reduce(sigma.raw(), sigma.ring());
  const Coords t = res.reduce(tau.raw(), tau.ring());
  ExpSum out(2);
  for (const Coords& r : teichmuller_set(res))
    out.add(Phase(2, -res.trace(res.add(res.mul(s, res.mul(r, r)), res.mul(t, r))), 1));
  return out;
}

// q chi_p(sigma - tau^2).
inline ClosedValue dyadic_quadratic_sum_closed(const RingElem& sigma, const RingElem& tau) {
  const FieldSpec& spec = sigma.spec();
  detail::require_prime(spec, true);
  const RingElem s = sigma.reduce(1), t = tau.reduce(1);
  return (s - t * t).is_zero() ? ClosedValue(2, Rational(spec.q())) : ClosedValue::zero(2);
}

}  // namespace padic_density
