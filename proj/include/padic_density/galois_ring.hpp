#pragma once

#include <array>
#include <span>
#include <vector>

#include "padic_density/field_spec.hpp"
#include "padic_density/modular.hpp"

namespace padic_density {

using Coords = std::array<detail::i64, kMaxDegree>;

// Arithmetic in the Galois ring GR(p^k, f) = (Z/p^k)[x]/(modulus) on raw
// coordinate arrays. Cheap to build; inner loops use it directly.
class GrContext {
 public:
  GrContext(const FieldSpec& spec, int k) : spec_(spec), k_(k) {
    if (k < 1) throw InvalidInput("ring precision must be at least 1");
    if (k > detail::max_precision(spec.p()))
      throw PrecisionExhausted("precision " + std::to_string(k) +
                               " exceeds the 62-bit residue limit");
    p_ = spec.p();
    f_ = spec.f();
    pk_ = detail::ipow(p_, k);
    for (int i = 0; i <= f_; ++i)
      g_[static_cast<std::size_t>(i)] =
          detail::mod(spec.modulus()[static_cast<std::size_t>(i)], pk_);
    for (int j = 0; j < f_; ++j)
      trace_basis_[static_cast<std::size_t>(j)] = detail::mod(spec.power_sum(j), pk_);
  }

  const FieldSpec& spec() const { return spec_; }
  int p() const { return p_; }
  int f() const { return f_; }
  int k() const { return k_; }
  detail::i64 pk() const { return pk_; }

  Coords zero() const { return Coords{}; }
  Coords from_int(detail::i64 v) const {
    Coords c{};
    c[0] = detail::mod(v, pk_);
    return c;
  }
  Coords theta() const {
    if (f_ == 1) return from_int(-spec_.modulus()[0]);
    Coords c{};
    c[1] = 1;
    return c;
  }
  Coords normalize(std::span<const detail::i64> v) const {
    if (static_cast<int>(v.size()) > f_)
      throw InvalidInput("too many coordinates for the field degree");
    Coords c{};
    for (std::size_t i = 0; i < v.size(); ++i) c[i] = detail::mod(v[i], pk_);
    return c;
  }

  Coords add(const Coords& a, const Coords& b) const {
    Coords c{};
    for (int i = 0; i < f_; ++i) {
      detail::i64 s = a[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(i)];
      c[static_cast<std::size_t>(i)] = s >= pk_ ? s - pk_ : s;
    }
    return c;
  }
  Coords sub(const Coords& a, const Coords& b) const {
    Coords c{};
    for (int i = 0; i < f_; ++i) {
      detail::i64 s = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
      c[static_cast<std::size_t>(i)] = s < 0 ? s + pk_ : s;
    }
    return c;
  }
  Coords neg(const Coords& a) const { return sub(zero(), a); }
  Coords scale(const Coords& a, detail::i64 s) const {
    s = detail::mod(s, pk_);
    Coords c{};
    for (int i = 0; i < f_; ++i)
      c[static_cast<std::size_t>(i)] =
          detail::mulmod(a[static_cast<std::size_t>(i)], s, pk_);
    return c;
  }

  Coords mul(const Coords& a, const Coords& b) const {
    if (f_ == 1) {
      Coords c{};
      c[0] = detail::mulmod(a[0], b[0], pk_);
      return c;
    }
    std::array<detail::i64, 2 * kMaxDegree> prod{};
    if (pk_ <= kSmallModulus) {
      // Products and their sums stay below 2^62 without intermediate reduction.
      for (int i = 0; i < f_; ++i)
        for (int j = 0; j < f_; ++j)
          prod[static_cast<std::size_t>(i + j)] += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
      for (int d = 2 * f_ - 2; d >= 0; --d) prod[static_cast<std::size_t>(d)] %= pk_;
      for (int d = 2 * f_ - 2; d >= f_; --d) {
        const detail::i64 c = prod[static_cast<std::size_t>(d)];
        if (c == 0) continue;
        for (int i = 0; i < f_; ++i) {
          auto& slot = prod[static_cast<std::size_t>(d - f_ + i)];
          slot = (slot + (pk_ - c) * g_[static_cast<std::size_t>(i)]) % pk_;
        }
      }
      Coords out{};
      for (int i = 0; i < f_; ++i) out[static_cast<std::size_t>(i)] = prod[static_cast<std::size_t>(i)];
      return out;
    }
    const auto m = static_cast<detail::u128>(pk_);
    for (int i = 0; i < f_; ++i) {
      for (int j = 0; j < f_; ++j) {
        const auto t = static_cast<detail::u128>(a[static_cast<std::size_t>(i)]) *
                           static_cast<detail::u128>(b[static_cast<std::size_t>(j)]) % m;
        auto& slot = prod[static_cast<std::size_t>(i + j)];
        slot = static_cast<detail::i64>((static_cast<detail::u128>(slot) + t) % m);
      }
    }
    for (int d = 2 * f_ - 2; d >= f_; --d) {
      const detail::i64 c = prod[static_cast<std::size_t>(d)];
      if (c == 0) continue;
      prod[static_cast<std::size_t>(d)] = 0;
      for (int i = 0; i < f_; ++i) {
        auto& slot = prod[static_cast<std::size_t>(d - f_ + i)];
        slot = detail::mod(slot - detail::mulmod(c, g_[static_cast<std::size_t>(i)], pk_), pk_);
      }
    }
    Coords out{};
    for (int i = 0; i < f_; ++i) out[static_cast<std::size_t>(i)] = prod[static_cast<std::size_t>(i)];
    return out;
  }

  Coords pow(Coords b, detail::u64 e) const {
    Coords r = from_int(1);
    while (e) {
      if (e & 1) r = mul(r, b);
      b = mul(b, b);
      e >>= 1;
    }
    return r;
  }

  bool is_zero(const Coords& a) const {
    for (int i = 0; i < f_; ++i)
      if (a[static_cast<std::size_t>(i)] != 0) return false;
    return true;
  }
  bool equal(const Coords& a, const Coords& b) const {
    for (int i = 0; i < f_; ++i)
      if (a[static_cast<std::size_t>(i)] != b[static_cast<std::size_t>(i)]) return false;
    return true;
  }
  // p-adic valuation of the element; k when it vanishes.
  int valuation(const Coords& a) const {
    int v = k_;
    for (int i = 0; i < f_; ++i) {
      const detail::i64 x = a[static_cast<std::size_t>(i)];
      if (x != 0) v = std::min(v, detail::vp(x, p_));
    }
    return v;
  }
  bool is_unit(const Coords& a) const { return valuation(a) == 0; }

  Coords inverse(const Coords& a) const {
    if (!is_unit(a)) throw NonUnit("element is not a unit");
    const GrContext res(spec_, 1);
    Coords x = res.pow(res.reduce(a, *this), static_cast<detail::u64>(spec_.q() - 2));
    const Coords two = from_int(2);
    for (int prec = 1; prec < k_; prec *= 2) x = mul(x, sub(two, mul(a, x)));
    return x;
  }

  // Coordinates of a (from a ring of precision >= k) reduced to this ring.
  Coords reduce(const Coords& a, const GrContext& from) const {
    if (from.k_ < k_) throw PrecisionExhausted("cannot raise precision by reduction");
    Coords c{};
    for (int i = 0; i < f_; ++i)
      c[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)] % pk_;
    return c;
  }

  // Divides by p^s; requires valuation >= s.
  Coords shift_down(const Coords& a, int s) const {
    const detail::i64 ps = detail::ipow(p_, s);
    Coords c{};
    for (int i = 0; i < f_; ++i) {
      if (a[static_cast<std::size_t>(i)] % ps != 0)
        throw InternalInconsistency("division by p^s of a non-multiple");
      c[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)] / ps;
    }
    return c;
  }
  Coords shift_up(const Coords& a, int s) const {
    if (s >= k_) return zero();
    return scale(a, detail::ipow(p_, s));
  }

  // Absolute trace to Z/p^k, via the trace form of the power basis.
  detail::i64 trace(const Coords& a) const {
    detail::i64 t = 0;
    for (int j = 0; j < f_; ++j)
      t = (t + detail::mulmod(a[static_cast<std::size_t>(j)],
                              trace_basis_[static_cast<std::size_t>(j)], pk_)) % pk_;
    return t;
  }

  // Fixed point of x -> x^q lying over the residue of a.
  Coords teichmuller(const Coords& a) const {
    Coords t = a;
    for (int i = 0; i <= k_; ++i) {
      Coords next = pow(t, static_cast<detail::u64>(spec_.q()));
      if (equal(next, t)) return t;
      t = next;
    }
    return t;
  }

  // Frobenius automorphism: the root of the modulus congruent to theta^p.
  Coords frobenius_of_theta() const {
    Coords y = pow(theta(), static_cast<detail::u64>(p_));
    for (int it = 0; it <= k_ + 1; ++it) {
      Coords gy{}, dgy{};
      Coords power = from_int(1);
      for (int i = 0; i <= f_; ++i) {
        gy = add(gy, scale(power, g_[static_cast<std::size_t>(i)]));
        if (i < f_)
          dgy = add(dgy, scale(power, detail::mulmod(g_[static_cast<std::size_t>(i + 1)],
                                                      i + 1, pk_)));
        power = mul(power, y);
      }
      if (is_zero(gy)) break;
      y = sub(y, mul(gy, inverse(dgy)));
    }
    return y;
  }

  Coords apply_frobenius(const Coords& a, const Coords& phi_theta) const {
    Coords r{};
    Coords power = from_int(1);
    for (int j = 0; j < f_; ++j) {
      r = add(r, scale(power, a[static_cast<std::size_t>(j)]));
      power = mul(power, phi_theta);
    }
    return r;
  }

  // Number of elements, q^k, when it fits.
  detail::i64 size() const { return detail::ipow(spec_.q(), k_); }

  Coords decode(detail::i64 code) const {
    Coords c{};
    for (int i = 0; i < f_; ++i) {
      c[static_cast<std::size_t>(i)] = code % pk_;
      code /= pk_;
    }
    return c;
  }
  detail::i64 encode(const Coords& a) const {
    detail::i64 code = 0;
    for (int i = f_ - 1; i >= 0; --i) code = code * pk_ + a[static_cast<std::size_t>(i)];
    return code;
  }

 private:
  static constexpr detail::i64 kSmallModulus = detail::i64{1} << 28;
  FieldSpec spec_;
  int k_ = 1;
  int p_ = 2;
  int f_ = 1;
  detail::i64 pk_ = 2;
  std::array<detail::i64, kMaxDegree + 1> g_{};
  std::array<detail::i64, kMaxDegree> trace_basis_{};
};

// Element of GR(p^k, f) tagged with its ring.
class RingElem {
 public:
  RingElem() = default;
  RingElem(const FieldSpec& spec, int k) : spec_(spec), k_(k) {
    (void)GrContext(spec, k);
  }
  static RingElem from_int(const FieldSpec& spec, int k, detail::i64 v) {
    const GrContext r(spec, k);
    return RingElem(spec, k, r.from_int(v));
  }
  static RingElem from_coords(const FieldSpec& spec, int k,
                              std::span<const detail::i64> v) {
    const GrContext r(spec, k);
    return RingElem(spec, k, r.normalize(v));
  }
  static RingElem theta(const FieldSpec& spec, int k) {
    const GrContext r(spec, k);
    return RingElem(spec, k, r.theta());
  }
  RingElem(const FieldSpec& spec, int k, const Coords& c)
      : spec_(spec), k_(k), c_(c) {}

  const FieldSpec& spec() const { return spec_; }
  int precision() const { return k_; }
  const Coords& raw() const { return c_; }
  std::vector<detail::i64> coords() const {
    return std::vector<detail::i64>(c_.begin(), c_.begin() + spec_.f());
  }
  GrContext ring() const { return GrContext(spec_, k_); }

  friend RingElem operator+(const RingElem& a, const RingElem& b) {
    check(a, b);
    return RingElem(a.spec_, a.k_, a.ring().add(a.c_, b.c_));
  }
  friend RingElem operator-(const RingElem& a, const RingElem& b) {
    check(a, b);
    return RingElem(a.spec_, a.k_, a.ring().sub(a.c_, b.c_));
  }
  friend RingElem operator*(const RingElem& a, const RingElem& b) {
    check(a, b);
    return RingElem(a.spec_, a.k_, a.ring().mul(a.c_, b.c_));
  }
  RingElem operator-() const { return RingElem(spec_, k_, ring().neg(c_)); }
  friend bool operator==(const RingElem& a, const RingElem& b) {
    return a.spec_ == b.spec_ && a.k_ == b.k_ && a.ring().equal(a.c_, b.c_);
  }

  RingElem pow(detail::u64 e) const { return RingElem(spec_, k_, ring().pow(c_, e)); }
  RingElem inverse() const { return RingElem(spec_, k_, ring().inverse(c_)); }
  bool is_zero() const { return ring().is_zero(c_); }
  bool is_unit() const { return ring().is_unit(c_); }
  int valuation() const { return ring().valuation(c_); }
  RingElem reduce(int k) const {
    const GrContext to(spec_, k);
    return RingElem(spec_, k, to.reduce(c_, ring()));
  }
  // Same coordinates read in a ring of higher precision (one particular lift).
  RingElem lift(int k) const {
    if (k < k_) return reduce(k);
    return RingElem(spec_, k, c_);
  }
  RingElem residue() const { return reduce(1); }

 private:
  static void check(const RingElem& a, const RingElem& b) {
    require_same_field(a.spec_, b.spec_);
    if (a.k_ != b.k_) throw SpecMismatch("operands have different precision");
  }

  FieldSpec spec_;
  int k_ = 1;
  Coords c_{};
};

inline RingElem teichmuller(const RingElem& x) {
  const GrContext r = x.ring();
  return RingElem(x.spec(), x.precision(), r.teichmuller(x.raw()));
}

// Absolute trace, as an integer in [0, p^k).
inline detail::i64 trace(const RingElem& x) { return x.ring().trace(x.raw()); }

// Trace computed as the sum of Frobenius conjugates; used as a cross-check.
inline detail::i64 trace_by_frobenius(const RingElem& x) {
  const GrContext r = x.ring();
  const Coords phi = r.frobenius_of_theta();
  Coords acc{};
  Coords cur = x.raw();
  for (int i = 0; i < r.f(); ++i) {
    acc = r.add(acc, cur);
    cur = r.apply_frobenius(cur, phi);
  }
  for (int i = 1; i < r.f(); ++i)
    if (acc[static_cast<std::size_t>(i)] != 0)
      throw InternalInconsistency("Frobenius trace is not rational");
  return acc[0];
}

// Quadratic character of the residue field, via x^((q-1)/2). Requires p odd.
inline int legendre(const RingElem& x) {
  if (x.spec().p() == 2) throw InvalidInput("quadratic character needs p odd");
  const GrContext res(x.spec(), 1);
  const Coords xr = res.reduce(x.raw(), x.ring());
  if (res.is_zero(xr)) return 0;
  const Coords e = res.pow(xr, static_cast<detail::u64>((x.spec().q() - 1) / 2));
  return res.equal(e, res.from_int(1)) ? 1 : -1;
}

// Teichmueller representatives of the residue field in GR(p^k, f); index 0 is
// zero, the rest run over the powers of the residue of theta (a generator).
inline Coords residue_generator(const GrContext& r) {
  const GrContext res(r.spec(), 1);
  const detail::i64 order = r.spec().q() - 1;
  const auto factors = detail::prime_factors(order);
  const Coords one = res.from_int(1);
  auto is_generator = [&](const Coords& x) {
    if (res.is_zero(x)) return false;
    for (detail::i64 l : factors)
      if (res.equal(res.pow(x, static_cast<detail::u64>(order / l)), one)) return false;
    return true;
  };
  if (is_generator(res.theta())) return r.theta();
  for (detail::i64 code = 1; code < r.spec().q(); ++code) {
    const Coords x = res.decode(code);
    if (is_generator(x)) return x;
  }
  throw InternalInconsistency("residue field has no generator");
}

inline std::vector<Coords> teichmuller_set(const GrContext& r) {
  std::vector<Coords> out;
  out.push_back(r.zero());
  const Coords gen = r.teichmuller(residue_generator(r));
  Coords cur = r.from_int(1);
  for (detail::i64 i = 0; i + 1 < r.spec().q(); ++i) {
    out.push_back(cur);
    cur = r.mul(cur, gen);
  }
  return out;
}

// Complete residue system of the residue field with coordinates in [0, p).
inline std::vector<Coords> residue_digits(const GrContext& r) {
  std::vector<Coords> out;
  const detail::i64 q = r.spec().q();
  for (detail::i64 code = 0; code < q; ++code) {
    Coords c{};
    detail::i64 x = code;
    for (int i = 0; i < r.f(); ++i) {
      c[static_cast<std::size_t>(i)] = x % r.p();
      x /= r.p();
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace padic_density
