#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "padic_density/padic_approx.hpp"

namespace padic_density {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Rational rational_pow(const Rational& base, int e) {
  Rational r = 1;
  Rational b = e >= 0 ? base : Rational(1) / base;
  for (int i = 0; i < std::abs(e); ++i) r *= b;
  return r;
}

inline std::string to_fraction_string(const Rational& r) {
  return boost::multiprecision::numerator(r).str() + "/" +
         boost::multiprecision::denominator(r).str();
}

inline Rational parse_fraction(const std::string& s) {
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rational(BigInt(s));
    BigInt num(s.substr(0, slash));
    BigInt den(s.substr(slash + 1));
    if (den == 0) throw InvalidInput("zero denominator in '" + s + "'");
    return Rational(num, den);
  } catch (const std::runtime_error&) {
    throw InvalidInput("malformed rational '" + s + "'");
  }
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

// Exact element of Q(zeta_8)[sqrt p], optionally times a root of unity of
// p-power order (the twist). Coordinates are over the basis
// {1, z, z^2, z^3} x {1, sqrt p} with z = exp(2 pi i / 8); index 4*s + j holds
// the coefficient of z^j sqrt(p)^s. For p = 2 the sqrt part is folded into
// z - z^3, so the representation stays canonical. Twists of order dividing 8
// are folded into the coordinates.
class ClosedValue {
 public:
  using Coordinates = std::array<Rational, 8>;

  ClosedValue() = default;
  explicit ClosedValue(int p) : p_(p), twist_(Phase::zero(p)) {}
  ClosedValue(int p, const Rational& r) : ClosedValue(p) { c_[0] = r; }
  ClosedValue(int p, Coordinates c, Phase twist = {})
      : p_(p), c_(std::move(c)), twist_(twist.p() == p ? twist : Phase::zero(p)) {
    normalize();
  }

  static ClosedValue zero(int p) { return ClosedValue(p); }
  static ClosedValue one(int p) { return ClosedValue(p, Rational(1)); }
  // exp(2 pi i j / 8).
  static ClosedValue zeta8(int p, int j) {
    j = static_cast<int>(detail::mod(j, 8));
    ClosedValue v(p);
    const int sign = j >= 4 ? -1 : 1;
    v.c_[static_cast<std::size_t>(j % 4)] = sign;
    return v;
  }
  static ClosedValue imag_unit(int p) { return zeta8(p, 2); }
  static ClosedValue sqrt_p(int p) {
    ClosedValue v(p);
    v.c_[4] = 1;
    v.normalize();
    return v;
  }
  // q^(e/2) with q = p^f.
  static ClosedValue sqrt_q_power(int p, int f, int e) {
    const int total = f * e;  // exponent of sqrt(p)
    const int half = total >= 0 ? total / 2 : -((-total + 1) / 2);
    ClosedValue v(p, rational_pow(Rational(p), half));
    if (total - 2 * half == 1) v = v * sqrt_p(p);
    return v;
  }
  static ClosedValue root_of_unity(const Phase& phase) {
    ClosedValue v(phase.p(), Coordinates{Rational(1)}, phase);
    return v;
  }

  int p() const { return p_; }
  const Coordinates& coordinates() const { return c_; }
  const Phase& twist() const { return twist_; }

  bool is_zero() const {
    for (const auto& x : c_)
      if (x != 0) return false;
    return true;
  }
  bool is_rational() const {
    if (!twist_.is_zero()) return false;
    for (std::size_t i = 1; i < 8; ++i)
      if (c_[i] != 0) return false;
    return true;
  }
  Rational rational_part() const { return c_[0]; }
  Rational as_rational() const {
    if (!is_rational()) throw InternalInconsistency("value is not rational");
    return c_[0];
  }

  std::complex<double> numeric() const {
    std::complex<double> acc = 0;
    const double sp = std::sqrt(static_cast<double>(p_));
    for (int s = 0; s < 2; ++s)
      for (int j = 0; j < 4; ++j) {
        const auto& x = c_[static_cast<std::size_t>(4 * s + j)];
        if (x == 0) continue;
        acc += to_double(x) * (s ? sp : 1.0) * std::polar(1.0, std::numbers::pi * j / 4);
      }
    return acc * std::polar(1.0, 2 * std::numbers::pi * twist_.value());
  }

  friend ClosedValue operator+(const ClosedValue& a, const ClosedValue& b) {
    check(a, b);
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    if (!(a.twist_ == b.twist_))
      throw InternalInconsistency("sum of values with different twists");
    ClosedValue r = a;
    for (std::size_t i = 0; i < 8; ++i) r.c_[i] += b.c_[i];
    r.normalize();
    return r;
  }
  ClosedValue operator-() const {
    ClosedValue r = *this;
    for (auto& x : r.c_) x = -x;
    return r;
  }
  friend ClosedValue operator-(const ClosedValue& a, const ClosedValue& b) { return a + (-b); }

  friend ClosedValue operator*(const ClosedValue& a, const ClosedValue& b) {
    check(a, b);
    ClosedValue r(a.p_);
    for (int s1 = 0; s1 < 2; ++s1)
      for (int j1 = 0; j1 < 4; ++j1) {
        const auto& x = a.c_[static_cast<std::size_t>(4 * s1 + j1)];
        if (x == 0) continue;
        for (int s2 = 0; s2 < 2; ++s2)
          for (int j2 = 0; j2 < 4; ++j2) {
            const auto& y = b.c_[static_cast<std::size_t>(4 * s2 + j2)];
            if (y == 0) continue;
            Rational v = x * y;
            int s = s1 + s2;
            if (s == 2) {
              v *= a.p_;
              s = 0;
            }
            int j = j1 + j2;
            if (j >= 4) {
              v = -v;
              j -= 4;
            }
            r.c_[static_cast<std::size_t>(4 * s + j)] += v;
          }
      }
    r.twist_ = a.twist_ + b.twist_;
    r.normalize();
    return r;
  }
  friend ClosedValue operator*(const ClosedValue& a, const Rational& s) {
    ClosedValue r = a;
    for (auto& x : r.c_) x *= s;
    r.normalize();
    return r;
  }

  friend bool operator==(const ClosedValue& a, const ClosedValue& b) {
    if (a.p_ != b.p_) return false;
    if (a.is_zero() && b.is_zero()) return true;
    return a.twist_ == b.twist_ && a.c_ == b.c_;
  }

  std::string to_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < 8; ++i) {
      if (i) s += ", ";
      s += to_fraction_string(c_[i]);
    }
    s += "]";
    if (!twist_.is_zero())
      s += " * e(" + std::to_string(twist_.numerator()) + "/" + std::to_string(p_) + "^" +
           std::to_string(twist_.log_denominator()) + ")";
    return s;
  }

 private:
  static void check(const ClosedValue& a, const ClosedValue& b) {
    if (a.p_ != b.p_) throw SpecMismatch("closed values over different primes");
  }

  void normalize() {
    if (p_ == 2) {
      // sqrt 2 = z - z^3.
      for (int j = 0; j < 4; ++j) {
        Rational x = c_[static_cast<std::size_t>(4 + j)];
        if (x == 0) continue;
        c_[static_cast<std::size_t>(4 + j)] = 0;
        add_power(j + 1, x);
        add_power(j + 3, -x);
      }
      if (!twist_.is_zero() && twist_.log_denominator() <= 3) {
        const int j = static_cast<int>(twist_.numerator()) << (3 - twist_.log_denominator());
        twist_ = Phase::zero(2);
        Coordinates old = c_;
        c_ = Coordinates{};
        for (int i = 0; i < 4; ++i) add_power(i + j, old[static_cast<std::size_t>(i)]);
      }
    }
    if (is_zero()) twist_ = Phase::zero(p_);
  }

  void add_power(int j, const Rational& x) {
    j = static_cast<int>(detail::mod(j, 8));
    if (j >= 4)
      c_[static_cast<std::size_t>(j - 4)] -= x;
    else
      c_[static_cast<std::size_t>(j)] += x;
  }

  int p_ = 2;
  Coordinates c_{};
  Phase twist_{};
};

// Exact character sum: scale * sum over phases of multiplicity * e(phase),
// where e(phase) = exp(2 pi i phase).
class ExpSum {
 public:
  ExpSum() = default;
  explicit ExpSum(int p, Rational scale = 1) : p_(p), scale_(std::move(scale)) {}

  void add(const Phase& phase, const BigInt& multiplicity = 1) {
    if (phase.p() != p_) throw SpecMismatch("phase for a different prime");
    if (multiplicity == 0) return;
    auto [it, inserted] = terms_.try_emplace(phase, multiplicity);
    if (!inserted) {
      it->second += multiplicity;
      if (it->second == 0) terms_.erase(it);
    }
  }

  int p() const { return p_; }
  const Rational& scale() const { return scale_; }
  const std::map<Phase, BigInt>& terms() const { return terms_; }

  // Phase -> multiplicity * scale; equal for sums of the same value computed
  // at different levels.
  std::map<Phase, Rational> normalized() const {
    std::map<Phase, Rational> out;
    for (const auto& [ph, m] : terms_) out.emplace(ph, Rational(m) * scale_);
    return out;
  }

  std::complex<double> numeric() const {
    std::complex<double> acc = 0;
    for (const auto& [ph, m] : terms_)
      acc += m.convert_to<double>() * std::polar(1.0, 2 * std::numbers::pi * ph.value());
    return acc * to_double(scale_);
  }

  // Exact value when every phase has order dividing 8 (or is trivial).
  bool foldable() const {
    for (const auto& [ph, m] : terms_) {
      if (ph.is_zero()) continue;
      if (p_ != 2 || ph.log_denominator() > 3) return false;
    }
    return true;
  }
  ClosedValue to_closed_value() const {
    if (!foldable()) throw InternalInconsistency("sum has phases outside Q(zeta_8)");
    ClosedValue acc = ClosedValue::zero(p_);
    for (const auto& [ph, m] : terms_)
      acc = acc + ClosedValue::root_of_unity(ph) * Rational(m);
    return acc * scale_;
  }

 private:
  int p_ = 2;
  Rational scale_ = 1;
  std::map<Phase, BigInt> terms_;
};

struct Comparison {
  bool equal = false;
  bool exact = false;
  double difference = 0;
};

// Exact when both sides live in Q(zeta_8)[sqrt p]; numeric otherwise.
inline Comparison compare(const ExpSum& s, const ClosedValue& v, double tol = 1e-9) {
  if (s.p() != v.p()) throw SpecMismatch("comparison across primes");
  if (s.foldable() && v.twist().is_zero()) {
    const ClosedValue w = s.to_closed_value();
    return {w == v, true, std::abs(w.numeric() - v.numeric())};
  }
  const double d = std::abs(s.numeric() - v.numeric());
  return {d <= tol, false, d};
}

inline Comparison compare(const ExpSum& a, const ExpSum& b, double tol = 1e-9) {
  if (a.normalized() == b.normalized()) return {true, true, 0};
  if (a.foldable() && b.foldable())
    return {a.to_closed_value() == b.to_closed_value(), true,
            std::abs(a.numeric() - b.numeric())};
  const double d = std::abs(a.numeric() - b.numeric());
  return {d <= tol, false, d};
}

}  // namespace padic_density
