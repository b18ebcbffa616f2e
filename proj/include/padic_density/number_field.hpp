#pragma once

#include <vector>

#include "padic_density/exact_values.hpp"

namespace padic_density {

inline int rational_valuation(const Rational& r, int p) {
  if (r == 0) return PadicApprox::kInfinite;
  BigInt num = boost::multiprecision::numerator(r);
  BigInt den = boost::multiprecision::denominator(r);
  int v = 0;
  while (num % p == 0) {
    num /= p;
    ++v;
  }
  while (den % p == 0) {
    den /= p;
    --v;
  }
  return v;
}

// Residue of a p-integral rational modulo m = p^k.
inline detail::i64 rational_mod(const Rational& r, detail::i64 m) {
  BigInt num = boost::multiprecision::numerator(r) % m;
  BigInt den = boost::multiprecision::denominator(r) % m;
  if (num < 0) num += m;
  const auto n = num.convert_to<detail::i64>();
  const auto d = den.convert_to<detail::i64>();
  // Inverse of d modulo m by extended Euclid.
  detail::i128 a = d, b = m, x0 = 1, x1 = 0;
  while (b != 0) {
    const detail::i128 qt = a / b;
    detail::i128 t = a - qt * b;
    a = b;
    b = t;
    t = x0 - qt * x1;
    x0 = x1;
    x1 = t;
  }
  if (a != 1) throw NonUnit("denominator divisible by p");
  const detail::i64 inv = detail::mod(static_cast<detail::i64>(x0 % m), m);
  return detail::mulmod(n, inv, m);
}

// Exact element of Q(theta), theta a root of the field's modulus; the exact
// counterpart of PadicApprox used to decide vanishing questions.
class NumberFieldElem {
 public:
  NumberFieldElem() = default;
  explicit NumberFieldElem(const FieldSpec& spec)
      : spec_(spec), c_(static_cast<std::size_t>(spec.f()), Rational(0)) {}
  NumberFieldElem(const FieldSpec& spec, const Rational& r) : NumberFieldElem(spec) { c_[0] = r; }
  NumberFieldElem(const FieldSpec& spec, std::vector<Rational> c) : spec_(spec), c_(std::move(c)) {
    if (static_cast<int>(c_.size()) > spec.f()) throw InvalidInput("too many coordinates");
    c_.resize(static_cast<std::size_t>(spec.f()), Rational(0));
  }
  static NumberFieldElem from_integers(const FieldSpec& spec, std::span<const detail::i64> c) {
    std::vector<Rational> v;
    for (auto x : c) v.emplace_back(x);
    return NumberFieldElem(spec, std::move(v));
  }
  // p^val * (integer coordinates).
  static NumberFieldElem from_scaled(const FieldSpec& spec, int val, std::span<const detail::i64> c) {
    NumberFieldElem e = from_integers(spec, c);
    return e * NumberFieldElem(spec, rational_pow(Rational(spec.p()), val));
  }
  static NumberFieldElem from_ring(const RingElem& r) {
    return from_integers(r.spec(), r.coords());
  }

  const FieldSpec& spec() const { return spec_; }
  const std::vector<Rational>& coords() const { return c_; }
  // "a" for rationals, "[a0, a1, ...]" in the power basis otherwise.
  std::string to_string() const {
    bool rational = true;
    for (std::size_t i = 1; i < c_.size(); ++i) rational = rational && c_[i] == 0;
    if (rational) return to_fraction_string(c_[0]);
    std::string out = "[";
    for (std::size_t i = 0; i < c_.size(); ++i) out += (i ? ", " : "") + to_fraction_string(c_[i]);
    return out + "]";
  }
  bool is_zero() const {
    for (const auto& x : c_)
      if (x != 0) return false;
    return true;
  }

  friend NumberFieldElem operator+(const NumberFieldElem& a, const NumberFieldElem& b) {
    require_same_field(a.spec_, b.spec_);
    NumberFieldElem r = a;
    for (std::size_t i = 0; i < r.c_.size(); ++i) r.c_[i] += b.c_[i];
    return r;
  }
  NumberFieldElem operator-() const {
    NumberFieldElem r = *this;
    for (auto& x : r.c_) x = -x;
    return r;
  }
  friend NumberFieldElem operator-(const NumberFieldElem& a, const NumberFieldElem& b) {
    return a + (-b);
  }
  friend NumberFieldElem operator*(const NumberFieldElem& a, const NumberFieldElem& b) {
    require_same_field(a.spec_, b.spec_);
    const int f = a.spec_.f();
    std::vector<Rational> prod(static_cast<std::size_t>(2 * f), Rational(0));
    for (int i = 0; i < f; ++i) {
      if (a.c_[static_cast<std::size_t>(i)] == 0) continue;
      for (int j = 0; j < f; ++j)
        prod[static_cast<std::size_t>(i + j)] +=
            a.c_[static_cast<std::size_t>(i)] * b.c_[static_cast<std::size_t>(j)];
    }
    const auto& g = a.spec_.modulus();
    for (int d = 2 * f - 2; d >= f; --d) {
      const Rational c = prod[static_cast<std::size_t>(d)];
      if (c == 0) continue;
      prod[static_cast<std::size_t>(d)] = 0;
      for (int i = 0; i < f; ++i)
        prod[static_cast<std::size_t>(d - f + i)] -= c * Rational(g[static_cast<std::size_t>(i)]);
    }
    prod.resize(static_cast<std::size_t>(f));
    return NumberFieldElem(a.spec_, std::move(prod));
  }

  NumberFieldElem inverse() const {
    if (is_zero()) throw DegenerateForm("inverse of zero in the number field");
    const int f = spec_.f();
    // Columns: this * theta^j. Solve M x = e_0.
    std::vector<std::vector<Rational>> m(static_cast<std::size_t>(f),
                                         std::vector<Rational>(static_cast<std::size_t>(f + 1)));
    NumberFieldElem basis(spec_);
    for (int j = 0; j < f; ++j) {
      std::vector<Rational> e(static_cast<std::size_t>(f), Rational(0));
      e[static_cast<std::size_t>(j)] = 1;
      const NumberFieldElem col = *this * NumberFieldElem(spec_, e);
      for (int i = 0; i < f; ++i)
        m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = col.c_[static_cast<std::size_t>(i)];
    }
    m[0][static_cast<std::size_t>(f)] = 1;
    for (int col = 0; col < f; ++col) {
      int piv = col;
      while (piv < f && m[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)] == 0) ++piv;
      if (piv == f) throw InternalInconsistency("singular multiplication matrix");
      std::swap(m[static_cast<std::size_t>(piv)], m[static_cast<std::size_t>(col)]);
      auto& prow = m[static_cast<std::size_t>(col)];
      const Rational inv = Rational(1) / prow[static_cast<std::size_t>(col)];
      for (auto& x : prow) x *= inv;
      for (int r = 0; r < f; ++r) {
        if (r == col) continue;
        auto& row = m[static_cast<std::size_t>(r)];
        const Rational factor = row[static_cast<std::size_t>(col)];
        if (factor == 0) continue;
        for (int c = 0; c <= f; ++c)
          row[static_cast<std::size_t>(c)] -= factor * prow[static_cast<std::size_t>(c)];
      }
    }
    std::vector<Rational> x(static_cast<std::size_t>(f));
    for (int i = 0; i < f; ++i) x[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)];
    return NumberFieldElem(spec_, std::move(x));
  }

  friend bool operator==(const NumberFieldElem& a, const NumberFieldElem& b) {
    return a.spec_ == b.spec_ && a.c_ == b.c_;
  }

  // p-adic valuation; exact because p is inert and the power basis is
  // integral.
  int valuation() const {
    int v = PadicApprox::kInfinite;
    for (const auto& x : c_) v = std::min(v, rational_valuation(x, spec_.p()));
    return v;
  }

  PadicApprox to_padic(int rel_prec) const {
    if (is_zero()) return PadicApprox::zero(spec_);
    const int v = valuation();
    const Rational scale = rational_pow(Rational(spec_.p()), -v);
    const GrContext r(spec_, rel_prec);
    Coords u{};
    for (std::size_t i = 0; i < c_.size(); ++i) u[i] = rational_mod(c_[i] * scale, r.pk());
    return PadicApprox::from_unit(v, RingElem(spec_, rel_prec, u));
  }

 private:
  FieldSpec spec_;
  std::vector<Rational> c_;
};

}  // namespace padic_density
