#pragma once

#include <algorithm>
#include <compare>
#include <limits>
#include <string>

#include "padic_density/galois_ring.hpp"

namespace padic_density {

// Element of Q_p / Z_p of p-power order: numerator / p^log_den, reduced.
class Phase {
 public:
  Phase() = default;
  Phase(int p, detail::i64 num, int log_den) : p_(p) {
    if (log_den < 0) throw InvalidInput("negative phase exponent");
    detail::i64 den = detail::ipow(p, log_den);
    num = detail::mod(num, den);
    while (log_den > 0 && num % p == 0) {
      num /= p;
      --log_den;
    }
    num_ = num;
    log_den_ = log_den;
  }
  static Phase zero(int p) { return Phase(p, 0, 0); }

  int p() const { return p_; }
  detail::i64 numerator() const { return num_; }
  int log_denominator() const { return log_den_; }
  bool is_zero() const { return num_ == 0; }
  double value() const {
    return static_cast<double>(num_) / static_cast<double>(detail::ipow(p_, log_den_));
  }

  friend Phase operator+(const Phase& a, const Phase& b) {
    if (a.p_ != b.p_) throw SpecMismatch("phases for different primes");
    const int m = std::max(a.log_den_, b.log_den_);
    const detail::i64 den = detail::ipow(a.p_, m);
    const detail::i64 na = a.num_ * detail::ipow(a.p_, m - a.log_den_);
    const detail::i64 nb = b.num_ * detail::ipow(b.p_, m - b.log_den_);
    return Phase(a.p_, detail::mod(na + nb, den), m);
  }
  Phase operator-() const { return Phase(p_, -num_, log_den_); }
  friend Phase operator-(const Phase& a, const Phase& b) { return a + (-b); }
  Phase times(detail::i64 n) const {
    const detail::i64 den = detail::ipow(p_, log_den_);
    return Phase(p_, detail::mulmod(num_, detail::mod(n, den), den), log_den_);
  }

  friend bool operator==(const Phase&, const Phase&) = default;
  friend auto operator<=>(const Phase& a, const Phase& b) {
    if (auto c = a.log_den_ <=> b.log_den_; c != 0) return c;
    return a.num_ <=> b.num_;
  }

 private:
  int p_ = 2;
  detail::i64 num_ = 0;
  int log_den_ = 0;
};

// Element of K = Q_p(theta) known to finite relative precision, written
// p^v * unit with the unit known modulo p^rel. Two zero states exist: an exact
// zero and an indeterminate O(p^N) whose digits below N all vanish.
class PadicApprox {
 public:
  static constexpr int kInfinite = std::numeric_limits<int>::max() / 4;

  PadicApprox() = default;

  static PadicApprox zero(const FieldSpec& spec) {
    PadicApprox x;
    x.spec_ = spec;
    x.kind_ = Kind::exact_zero;
    x.val_ = kInfinite;
    return x;
  }
  static PadicApprox indeterminate(const FieldSpec& spec, int n) {
    PadicApprox x;
    x.spec_ = spec;
    x.kind_ = Kind::indeterminate;
    x.val_ = n;
    return x;
  }
  // p^val * unit, with unit known to the precision of its ring.
  static PadicApprox from_unit(int val, const RingElem& unit) {
    if (!unit.is_unit()) throw NonUnit("from_unit needs a unit");
    PadicApprox x;
    x.spec_ = unit.spec();
    x.kind_ = Kind::value;
    x.val_ = val;
    x.rel_ = unit.precision();
    x.unit_ = unit.raw();
    return x;
  }
  // Element of O known modulo p^k.
  static PadicApprox from_ring(const RingElem& r) {
    const GrContext ring = r.ring();
    const int v = ring.valuation(r.raw());
    if (v >= r.precision()) return indeterminate(r.spec(), r.precision());
    const GrContext rel(r.spec(), r.precision() - v);
    return from_unit(v, RingElem(r.spec(), rel.k(), rel.reduce(ring.shift_down(r.raw(), v),
                                                                 GrContext(r.spec(), r.precision() - v))));
  }
  static PadicApprox from_int(const FieldSpec& spec, detail::i64 n, int rel_prec) {
    if (n == 0) return zero(spec);
    const int v = detail::vp(n, spec.p());
    detail::i64 u = n;
    for (int i = 0; i < v; ++i) u /= spec.p();
    return from_unit(v, RingElem::from_int(spec, rel_prec, u));
  }
  // p^val * (integer coordinates), at relative precision rel_prec.
  static PadicApprox from_coords(const FieldSpec& spec, int val,
                                 std::span<const detail::i64> coords, int rel_prec) {
    bool all_zero = std::all_of(coords.begin(), coords.end(), [](detail::i64 c) { return c == 0; });
    if (all_zero) return zero(spec);
    int extra = kInfinite;
    for (detail::i64 c : coords)
      if (c != 0) extra = std::min(extra, detail::vp(c, spec.p()));
    std::vector<detail::i64> u(coords.begin(), coords.end());
    const detail::i64 pe = detail::ipow(spec.p(), extra);
    for (auto& c : u) c /= pe;
    return from_unit(val + extra, RingElem::from_coords(spec, rel_prec, u));
  }

  const FieldSpec& spec() const { return spec_; }
  bool is_exact_zero() const { return kind_ == Kind::exact_zero; }
  bool is_indeterminate() const { return kind_ == Kind::indeterminate; }
  // Zero as far as known: exact zero or O(p^N).
  bool is_zero_like() const { return kind_ != Kind::value; }

  // Valuation; for O(p^N) this throws, since only a lower bound is known.
  int valuation() const {
    if (kind_ == Kind::indeterminate)
      throw PrecisionExhausted("valuation of O(p^" + std::to_string(val_) + ") is unknown");
    return val_;
  }
  // Known lower bound on the valuation (exact for values).
  int valuation_lower_bound() const { return val_; }
  int relative_precision() const { return kind_ == Kind::value ? rel_ : 0; }
  int absolute_precision() const {
    switch (kind_) {
      case Kind::exact_zero: return kInfinite;
      case Kind::indeterminate: return val_;
      case Kind::value: return val_ + rel_;
    }
    return 0;
  }
  RingElem unit() const {
    if (kind_ != Kind::value) throw NonUnit("zero has no unit part");
    return RingElem(spec_, rel_, unit_);
  }

  // Residue class in GR(p^k); requires non-negative valuation and enough digits.
  RingElem to_ring(int k) const {
    if (kind_ == Kind::exact_zero) return RingElem(spec_, k);
    if (val_ >= k) return RingElem(spec_, k);
    if (absolute_precision() < k)
      throw PrecisionExhausted("need " + std::to_string(k) + " digits, have " +
                               std::to_string(absolute_precision()));
    if (kind_ == Kind::indeterminate) return RingElem(spec_, k);
    if (val_ < 0) throw NonUnit("element is not integral");
    const GrContext ring(spec_, k);
    const GrContext low(spec_, k - val_);
    Coords c = low.reduce(unit_, GrContext(spec_, rel_));
    return RingElem(spec_, k, ring.shift_up(c, val_));
  }

  PadicApprox operator-() const {
    if (kind_ != Kind::value) return *this;
    PadicApprox x = *this;
    x.unit_ = GrContext(spec_, rel_).neg(unit_);
    return x;
  }

  friend PadicApprox operator*(const PadicApprox& a, const PadicApprox& b) {
    require_same_field(a.spec_, b.spec_);
    if (a.is_exact_zero() || b.is_exact_zero()) return zero(a.spec_);
    if (a.is_indeterminate() || b.is_indeterminate()) {
      // O(p^N) * x is O(p^(N + v(x))) when x is a value; O(p^(N+M)) otherwise.
      return indeterminate(a.spec_, a.val_ + b.val_);
    }
    const int rel = std::min(a.rel_, b.rel_);
    const GrContext r(a.spec_, rel);
    const Coords ua = r.reduce(a.unit_, GrContext(a.spec_, a.rel_));
    const Coords ub = r.reduce(b.unit_, GrContext(b.spec_, b.rel_));
    PadicApprox x;
    x.spec_ = a.spec_;
    x.kind_ = Kind::value;
    x.val_ = a.val_ + b.val_;
    x.rel_ = rel;
    x.unit_ = r.mul(ua, ub);
    return x;
  }

  friend PadicApprox operator+(const PadicApprox& a, const PadicApprox& b) {
    require_same_field(a.spec_, b.spec_);
    if (a.is_exact_zero()) return b;
    if (b.is_exact_zero()) return a;
    const int abs_prec = std::min(a.absolute_precision(), b.absolute_precision());
    const int lo = std::min(a.val_, b.val_);
    if (abs_prec <= lo) return indeterminate(a.spec_, abs_prec);
    // Work with (a + b) / p^lo modulo p^(abs_prec - lo).
    const int width = abs_prec - lo;
    const GrContext r(a.spec_, width);
    auto part = [&](const PadicApprox& x) -> Coords {
      if (x.kind_ != Kind::value) return r.zero();
      const int shift = x.val_ - lo;
      if (shift >= width) return r.zero();
      const GrContext low(a.spec_, width - shift);
      return r.shift_up(low.reduce(x.unit_, GrContext(a.spec_, x.rel_)), shift);
    };
    const Coords s = r.add(part(a), part(b));
    const int v = r.valuation(s);
    if (v >= width) return indeterminate(a.spec_, abs_prec);
    const GrContext out(a.spec_, width - v);
    PadicApprox x;
    x.spec_ = a.spec_;
    x.kind_ = Kind::value;
    x.val_ = lo + v;
    x.rel_ = width - v;
    x.unit_ = out.reduce(r.shift_down(s, v), GrContext(a.spec_, width - v));
    return x;
  }
  friend PadicApprox operator-(const PadicApprox& a, const PadicApprox& b) { return a + (-b); }

  PadicApprox inverse() const {
    if (kind_ != Kind::value) throw PrecisionExhausted("division by a zero-like element");
    PadicApprox x = *this;
    x.val_ = -val_;
    x.unit_ = GrContext(spec_, rel_).inverse(unit_);
    return x;
  }
  friend PadicApprox operator/(const PadicApprox& a, const PadicApprox& b) {
    return a * b.inverse();
  }

  // Multiplication by p^s.
  PadicApprox shifted(int s) const {
    if (kind_ == Kind::exact_zero) return *this;
    PadicApprox x = *this;
    x.val_ += s;
    return x;
  }
  // Drops digits so that the relative precision is at most rel.
  PadicApprox truncated(int rel) const {
    if (kind_ != Kind::value || rel >= rel_) return *this;
    if (rel <= 0) return indeterminate(spec_, val_);
    PadicApprox x = *this;
    x.rel_ = rel;
    x.unit_ = GrContext(spec_, rel).reduce(unit_, GrContext(spec_, rel_));
    return x;
  }
  // Caps the absolute precision at n.
  PadicApprox capped(int n) const {
    if (kind_ == Kind::exact_zero) return indeterminate(spec_, n);
    if (kind_ == Kind::indeterminate) return indeterminate(spec_, std::min(n, val_));
    if (n <= val_) return indeterminate(spec_, n);
    return truncated(n - val_);
  }

  // Equality of the known digits; zero-like elements compare by state.
  friend bool operator==(const PadicApprox& a, const PadicApprox& b) {
    if (!(a.spec_ == b.spec_) || a.kind_ != b.kind_ || a.val_ != b.val_) return false;
    if (a.kind_ != Kind::value) return true;
    if (a.rel_ != b.rel_) return false;
    return GrContext(a.spec_, a.rel_).equal(a.unit_, b.unit_);
  }

  // Agreement modulo p^n (both must be known to that precision).
  bool congruent(const PadicApprox& other, int n) const {
    const PadicApprox d = *this - other;
    if (d.is_exact_zero()) return true;
    if (d.is_indeterminate()) {
      if (d.val_ >= n) return true;
      throw PrecisionExhausted("congruence undecidable at the available precision");
    }
    return d.val_ >= n;
  }

 private:
  enum class Kind { exact_zero, indeterminate, value };
  FieldSpec spec_;
  Kind kind_ = Kind::exact_zero;
  int val_ = kInfinite;
  int rel_ = 0;
  Coords unit_{};
};

// Additive character phase: e(alpha) = exp(2 pi i * phase) with
// phase = -Tr(alpha) mod Z_p.
inline Phase epi_phase(const PadicApprox& alpha) {
  const int p = alpha.spec().p();
  if (alpha.is_exact_zero()) return Phase::zero(p);
  if (alpha.is_indeterminate()) {
    if (alpha.valuation_lower_bound() >= 0) return Phase::zero(p);
    throw PrecisionExhausted("phase of an indeterminate non-integral element");
  }
  const int v = alpha.valuation();
  if (v >= 0) return Phase::zero(p);
  if (alpha.relative_precision() < -v)
    throw PrecisionExhausted("phase needs " + std::to_string(-v) + " digits, have " +
                             std::to_string(alpha.relative_precision()));
  const RingElem u = alpha.unit().reduce(-v);
  return Phase(p, -trace(u), -v);
}

// Teichmueller digits: x = d_0 + d_1 p + ... mod p^count, each d_i in U_0.
// Returned as elements of GR(p^count).
inline std::vector<RingElem> teichmuller_digits(const RingElem& x, int count) {
  if (count > x.precision())
    throw PrecisionExhausted("not enough digits for the expansion");
  const GrContext r(x.spec(), count);
  Coords cur = r.reduce(x.raw(), x.ring());
  std::vector<RingElem> out;
  for (int i = 0; i < count; ++i) {
    const Coords d = r.teichmuller(cur);
    out.emplace_back(x.spec(), count, d);
    Coords diff = r.sub(cur, d);
    // diff is divisible by p; shifting drops the top digit, which no later
    // digit depends on.
    Coords next{};
    for (int j = 0; j < r.f(); ++j)
      next[static_cast<std::size_t>(j)] = diff[static_cast<std::size_t>(j)] / r.p();
    cur = next;
  }
  return out;
}

// Quadratic-type character on units for p = 2: with u = a + 2b + 4c in
// Teichmueller digits, the sign e((c - b) / (2a)).
inline int eta_char(const RingElem& u) {
  if (u.spec().p() != 2) throw InvalidInput("eta is defined for p = 2");
  if (u.precision() < 3) throw PrecisionExhausted("eta needs the unit modulo 8");
  if (!u.is_unit()) throw NonUnit("eta of a non-unit");
  const auto d = teichmuller_digits(u.reduce(3), 3);
  const GrContext r1(u.spec(), 1);
  const Coords a = r1.reduce(d[0].raw(), d[0].ring());
  const Coords b = r1.reduce(d[1].raw(), d[1].ring());
  const Coords c = r1.reduce(d[2].raw(), d[2].ring());
  const Coords x = r1.mul(r1.sub(c, b), r1.inverse(a));
  return r1.trace(x) == 0 ? 1 : -1;
}

inline int eta_char(const PadicApprox& u) {
  if (u.is_zero_like() || u.valuation() != 0) throw NonUnit("eta of a non-unit");
  return eta_char(u.to_ring(3));
}

}  // namespace padic_density
