#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "padic_density/number_field.hpp"

namespace padic_density {

inline RingElem to_ring(const NumberFieldElem& x, int k) {
  const GrContext r(x.spec(), k);
  Coords c{};
  for (std::size_t i = 0; i < x.coords().size(); ++i) {
    if (rational_valuation(x.coords()[i], x.spec().p()) < 0)
      throw InvalidInput("coefficient is not integral");
    c[i] = rational_mod(x.coords()[i], r.pk());
  }
  return RingElem(x.spec(), k, c);
}

// Q(x) = sum_{i<=j} a_ij x_i x_j + sum_i b_i x_i + c with integral
// coefficients, known modulo p^precision. When built from exact data the
// exact coefficients are retained, so the polynomial can be re-read at any
// precision.
class QuadraticPolynomial {
 public:
  QuadraticPolynomial() = default;
  QuadraticPolynomial(const FieldSpec& spec, int r, int precision)
      : spec_(spec), r_(r), k_(precision) {
    if (r < 1 || r > 16) throw InvalidInput("number of variables must be in [1, 16]");
    const GrContext ring(spec, precision);
    quad_.assign(static_cast<std::size_t>(r * (r + 1) / 2), RingElem(spec, precision));
    lin_.assign(static_cast<std::size_t>(r), RingElem(spec, precision));
    constant_ = RingElem(spec, precision);
    exact_ = Exact{std::vector<NumberFieldElem>(quad_.size(), NumberFieldElem(spec)),
                   std::vector<NumberFieldElem>(lin_.size(), NumberFieldElem(spec)),
                   NumberFieldElem(spec)};
  }

  const FieldSpec& spec() const { return spec_; }
  int r() const { return r_; }
  int precision() const { return k_; }
  bool is_exact() const { return exact_.has_value(); }

  // Coefficient of x_i x_j (of x_i^2 when i == j); order of i, j is free.
  const RingElem& quad(int i, int j) const { return quad_[index(i, j)]; }
  const RingElem& lin(int i) const { return lin_[static_cast<std::size_t>(i)]; }
  const RingElem& constant() const { return constant_; }

  void set_quad(int i, int j, const RingElem& v) {
    quad_[index(i, j)] = fit(v);
    exact_.reset();
  }
  void set_lin(int i, const RingElem& v) {
    lin_[static_cast<std::size_t>(i)] = fit(v);
    exact_.reset();
  }
  void set_constant(const RingElem& v) {
    constant_ = fit(v);
    exact_.reset();
  }

  void set_quad(int i, int j, const NumberFieldElem& v) {
    quad_[index(i, j)] = to_ring(v, k_);
    if (exact_) exact_->quad[index(i, j)] = v;
  }
  void set_lin(int i, const NumberFieldElem& v) {
    lin_[static_cast<std::size_t>(i)] = to_ring(v, k_);
    if (exact_) exact_->lin[static_cast<std::size_t>(i)] = v;
  }
  void set_constant(const NumberFieldElem& v) {
    constant_ = to_ring(v, k_);
    if (exact_) exact_->constant = v;
  }
  void set_quad(int i, int j, detail::i64 v) { set_quad(i, j, NumberFieldElem(spec_, Rational(v))); }
  void set_lin(int i, detail::i64 v) { set_lin(i, NumberFieldElem(spec_, Rational(v))); }
  void set_constant(detail::i64 v) { set_constant(NumberFieldElem(spec_, Rational(v))); }

  const NumberFieldElem& exact_quad(int i, int j) const { return exact().quad[index(i, j)]; }
  const NumberFieldElem& exact_lin(int i) const { return exact().lin[static_cast<std::size_t>(i)]; }
  const NumberFieldElem& exact_constant() const { return exact().constant; }

  // Whether the linear part is known to vanish exactly.
  bool linear_part_exactly_zero() const {
    if (!exact_) return false;
    for (const auto& b : exact_->lin)
      if (!b.is_zero()) return false;
    return true;
  }

  // Same polynomial read at another precision; raising needs exact data.
  QuadraticPolynomial at_precision(int k) const {
    QuadraticPolynomial out = *this;
    out.k_ = k;
    if (exact_) {
      for (std::size_t i = 0; i < quad_.size(); ++i) out.quad_[i] = to_ring(exact_->quad[i], k);
      for (std::size_t i = 0; i < lin_.size(); ++i) out.lin_[i] = to_ring(exact_->lin[i], k);
      out.constant_ = to_ring(exact_->constant, k);
      return out;
    }
    if (k > k_) throw PrecisionExhausted("polynomial known only to precision " + std::to_string(k_));
    for (auto& x : out.quad_) x = x.reduce(k);
    for (auto& x : out.lin_) x = x.reduce(k);
    out.constant_ = out.constant_.reduce(k);
    return out;
  }

  // Value at x (coordinates in ring r, whose precision is at most ours).
  Coords evaluate(const GrContext& r, std::span<const Coords> x) const {
    Coords acc = r.reduce(constant_.raw(), constant_.ring());
    for (int i = 0; i < r_; ++i) {
      Coords row = r.reduce(lin(i).raw(), lin(i).ring());
      for (int j = i; j < r_; ++j)
        row = r.add(row, r.mul(r.reduce(quad(i, j).raw(), quad(i, j).ring()), x[static_cast<std::size_t>(j)]));
      acc = r.add(acc, r.mul(row, x[static_cast<std::size_t>(i)]));
    }
    return acc;
  }

  // Minimal valuation of the quadratic coefficients (precision when all vanish).
  int min_quadratic_valuation() const {
    int v = k_;
    for (const auto& a : quad_) v = std::min(v, a.valuation());
    return v;
  }

  friend bool operator==(const QuadraticPolynomial& a, const QuadraticPolynomial& b) {
    return a.spec_ == b.spec_ && a.r_ == b.r_ && a.k_ == b.k_ && a.quad_ == b.quad_ &&
           a.lin_ == b.lin_ && a.constant_ == b.constant_;
  }

 private:
  struct Exact {
    std::vector<NumberFieldElem> quad;
    std::vector<NumberFieldElem> lin;
    NumberFieldElem constant;
  };

  std::size_t index(int i, int j) const {
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= r_) throw InvalidInput("variable index out of range");
    return static_cast<std::size_t>(i * r_ - i * (i - 1) / 2 + (j - i));
  }
  RingElem fit(const RingElem& v) const {
    require_same_field(v.spec(), spec_);
    if (v.precision() < k_) throw PrecisionExhausted("coefficient known to fewer digits than the polynomial");
    return v.reduce(k_);
  }
  const Exact& exact() const {
    if (!exact_) throw InvalidInput("polynomial has no exact coefficients");
    return *exact_;
  }

  FieldSpec spec_;
  int r_ = 0;
  int k_ = 0;
  std::vector<RingElem> quad_;
  std::vector<RingElem> lin_;
  RingElem constant_;
  std::optional<Exact> exact_;
};

// Linear substitution x = T y with T in GL_r(O), stored modulo p^precision.
class Transform {
 public:
  Transform() = default;
  static Transform identity(const FieldSpec& spec, int r, int precision) {
    Transform t;
    t.spec_ = spec;
    t.r_ = r;
    t.k_ = precision;
    const GrContext ring(spec, precision);
    t.m_.assign(static_cast<std::size_t>(r * r), ring.zero());
    for (int i = 0; i < r; ++i) t.at(i, i) = ring.from_int(1);
    return t;
  }
  static Transform from_entries(const FieldSpec& spec, int r, int precision, std::vector<Coords> m) {
    Transform t = identity(spec, r, precision);
    if (static_cast<int>(m.size()) != r * r) throw InvalidInput("transform has wrong size");
    t.m_ = std::move(m);
    return t;
  }

  int r() const { return r_; }
  int precision() const { return k_; }
  const FieldSpec& spec() const { return spec_; }
  const Coords& at(int i, int j) const { return m_[static_cast<std::size_t>(i * r_ + j)]; }
  Coords& at(int i, int j) { return m_[static_cast<std::size_t>(i * r_ + j)]; }
  RingElem entry(int i, int j) const { return RingElem(spec_, k_, at(i, j)); }

  // Determinant modulo p^precision by elimination with unit pivots.
  RingElem determinant() const {
    const GrContext ring(spec_, k_);
    std::vector<Coords> a = m_;
    Coords det = ring.from_int(1);
    for (int col = 0; col < r_; ++col) {
      int piv = -1;
      for (int row = col; row < r_; ++row)
        if (ring.is_unit(a[static_cast<std::size_t>(row * r_ + col)])) {
          piv = row;
          break;
        }
      if (piv < 0) return RingElem(spec_, k_, ring.zero()).reduce(1);
      if (piv != col) {
        for (int j = 0; j < r_; ++j)
          std::swap(a[static_cast<std::size_t>(piv * r_ + j)], a[static_cast<std::size_t>(col * r_ + j)]);
        det = ring.neg(det);
      }
      const Coords pv = a[static_cast<std::size_t>(col * r_ + col)];
      det = ring.mul(det, pv);
      const Coords inv = ring.inverse(pv);
      for (int row = col + 1; row < r_; ++row) {
        const Coords factor = ring.mul(a[static_cast<std::size_t>(row * r_ + col)], inv);
        for (int j = col; j < r_; ++j)
          a[static_cast<std::size_t>(row * r_ + j)] =
              ring.sub(a[static_cast<std::size_t>(row * r_ + j)], ring.mul(factor, a[static_cast<std::size_t>(col * r_ + j)]));
      }
    }
    return RingElem(spec_, k_, det);
  }
  bool is_invertible() const { return determinant().is_unit(); }

 private:
  FieldSpec spec_;
  int r_ = 0;
  int k_ = 0;
  std::vector<Coords> m_;
};

// Q(T y) as a polynomial in y. Precision is the smaller of the two; exact
// coefficients survive, reading T's residues as exact integral elements.
inline QuadraticPolynomial apply_transform(const QuadraticPolynomial& q, const Transform& t) {
  if (q.r() != t.r()) throw InvalidInput("transform size does not match polynomial");
  require_same_field(q.spec(), t.spec());
  const int r = q.r();
  const int k = std::min(q.precision(), t.precision());
  const FieldSpec& spec = q.spec();
  QuadraticPolynomial out(spec, r, k);
  if (q.is_exact()) {
    std::vector<NumberFieldElem> te(static_cast<std::size_t>(r * r));
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        te[static_cast<std::size_t>(i * r + j)] = NumberFieldElem::from_ring(t.entry(i, j));
    auto T = [&](int i, int j) -> const NumberFieldElem& { return te[static_cast<std::size_t>(i * r + j)]; };
    for (int a = 0; a < r; ++a)
      for (int b = a; b < r; ++b) {
        NumberFieldElem acc(spec);
        for (int i = 0; i < r; ++i)
          for (int j = i; j < r; ++j) {
            const auto& c = q.exact_quad(i, j);
            if (c.is_zero()) continue;
            NumberFieldElem m = T(i, a) * T(j, b);
            if (a != b) m = m + T(i, b) * T(j, a);
            acc = acc + c * m;
          }
        out.set_quad(a, b, acc);
      }
    for (int a = 0; a < r; ++a) {
      NumberFieldElem acc(spec);
      for (int i = 0; i < r; ++i) acc = acc + q.exact_lin(i) * T(i, a);
      out.set_lin(a, acc);
    }
    out.set_constant(q.exact_constant());
    return out.at_precision(k);
  }
  const GrContext ring(spec, k);
  auto Q = [&](int i, int j) { return ring.reduce(q.quad(i, j).raw(), q.quad(i, j).ring()); };
  auto T = [&](int i, int j) { return ring.reduce(t.at(i, j), GrContext(spec, t.precision())); };
  for (int a = 0; a < r; ++a)
    for (int b = a; b < r; ++b) {
      Coords acc = ring.zero();
      for (int i = 0; i < r; ++i)
        for (int j = i; j < r; ++j) {
          Coords m = ring.mul(T(i, a), T(j, b));
          if (a != b) m = ring.add(m, ring.mul(T(i, b), T(j, a)));
          acc = ring.add(acc, ring.mul(Q(i, j), m));
        }
      out.set_quad(a, b, RingElem(spec, k, acc));
    }
  for (int a = 0; a < r; ++a) {
    Coords acc = ring.zero();
    for (int i = 0; i < r; ++i)
      acc = ring.add(acc, ring.mul(ring.reduce(q.lin(i).raw(), q.lin(i).ring()), T(i, a)));
    out.set_lin(a, RingElem(spec, k, acc));
  }
  out.set_constant(q.constant().reduce(k));
  return out;
}

// Exact value of Q at its critical point, Q(x0) with grad Q(x0) = 0, over
// Q(theta). Throws DegenerateForm when the quadratic part is singular.
inline NumberFieldElem critical_value(const QuadraticPolynomial& q) {
  const FieldSpec& spec = q.spec();
  const int r = q.r();
  // Gradient system: 2 a_ii x_i + sum_{j != i} a_ij x_j = -b_i.
  std::vector<std::vector<NumberFieldElem>> m(static_cast<std::size_t>(r),
                                              std::vector<NumberFieldElem>(static_cast<std::size_t>(r + 1), NumberFieldElem(spec)));
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j)
      m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          i == j ? q.exact_quad(i, i) * NumberFieldElem(spec, Rational(2)) : q.exact_quad(i, j);
    m[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] = -q.exact_lin(i);
  }
  for (int col = 0; col < r; ++col) {
    int piv = col;
    while (piv < r && m[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)].is_zero()) ++piv;
    if (piv == r) throw DegenerateForm("quadratic part is singular");
    std::swap(m[static_cast<std::size_t>(piv)], m[static_cast<std::size_t>(col)]);
    const NumberFieldElem inv = m[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)].inverse();
    for (auto& x : m[static_cast<std::size_t>(col)]) x = x * inv;
    for (int row = 0; row < r; ++row) {
      if (row == col) continue;
      const NumberFieldElem factor = m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
      if (factor.is_zero()) continue;
      for (int j = col; j <= r; ++j)
        m[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] =
            m[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] - factor * m[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)];
    }
  }
  // Q(x0) = c + b.x0 / 2.
  NumberFieldElem acc(spec);
  for (int i = 0; i < r; ++i) acc = acc + q.exact_lin(i) * m[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)];
  return q.exact_constant() + acc * NumberFieldElem(spec, Rational(1, 2));
}

struct SquareTerm {
  PadicApprox b;  // coefficient of y^2
  PadicApprox c;  // coefficient of y
};

struct PairTerm {
  PadicApprox b;   // block scale
  PadicApprox c1;  // coefficient of y_1
  PadicApprox c2;  // coefficient of y_2
};

// Diagonal form sum b_i y_i^2 + c_i y_i + constant, for p odd.
struct ReducedNonDyadic {
  FieldSpec spec;
  std::vector<SquareTerm> terms;
  PadicApprox constant;
  Transform transform;
  QuadraticPolynomial reduced;
};

// Block form for p = 2: squares b y^2 + c y, hyperbolic pairs b y1 y2 +
// c1 y1 + c2 y2, anisotropic pairs b (y1^2 + y1 y2 + rho y2^2) + c1 y1 + c2 y2.
struct ReducedDyadic {
  FieldSpec spec;
  std::vector<SquareTerm> squares;
  std::vector<PairTerm> hyperbolic;
  std::vector<PairTerm> anisotropic;
  RingElem rho;
  PadicApprox constant;
  Transform transform;
  QuadraticPolynomial reduced;
};

// Teichmueller unit with odd absolute trace: the first residue (in coordinate
// order) whose trace is 1. This is 1 for odd f and the cube root of unity for
// f = 2 under the default modulus.
inline RingElem select_rho(const FieldSpec& spec, int k) {
  if (spec.p() != 2) throw InvalidInput("rho is only used for p = 2");
  const GrContext res(spec, 1);
  for (detail::i64 code = 1; code < spec.q(); ++code) {
    const Coords x = res.decode(code);
    if (res.trace(x) == 1) {
      const GrContext r(spec, k);
      return RingElem(spec, k, r.teichmuller(x));
    }
  }
  throw InternalInconsistency("no residue of trace one");
}

// (Q - c, n - c).
inline std::pair<QuadraticPolynomial, PadicApprox> constant_normalize(const QuadraticPolynomial& q,
                                                                      const PadicApprox& n) {
  QuadraticPolynomial out = q;
  const PadicApprox c = PadicApprox::from_ring(q.constant());
  if (q.is_exact()) {
    out.set_constant(NumberFieldElem(q.spec()));
    const int rel = std::min(q.precision() + 8, detail::max_precision(q.spec().p()));
    return {out, n - q.exact_constant().to_padic(rel)};
  }
  out.set_constant(RingElem(q.spec(), q.precision()));
  return {out, n - c};
}

namespace detail {

// Polynomial under elementary substitutions, tracking x_old = T x_new.
class ReductionWork {
 public:
  explicit ReductionWork(const QuadraticPolynomial& q)
      : ring_(q.spec(), q.precision()), r_(q.r()), q_(q), t_(Transform::identity(q.spec(), q.r(), q.precision())) {
    for (int i = 0; i < r_; ++i)
      for (int j = i; j < r_; ++j) a_.push_back(q.quad(i, j).raw());
    for (int i = 0; i < r_; ++i) b_.push_back(q.lin(i).raw());
  }

  const GrContext& ring() const { return ring_; }
  int r() const { return r_; }
  Coords& a(int i, int j) {
    if (i > j) std::swap(i, j);
    return a_[static_cast<std::size_t>(i * r_ - i * (i - 1) / 2 + (j - i))];
  }
  Coords& b(int i) { return b_[static_cast<std::size_t>(i)]; }
  Transform& transform() { return t_; }

  // x_i <- x_i + c x_k.
  void substitute_add(int i, int k, const Coords& c) {
    if (ring_.is_zero(c)) return;
    const Coords aii = a(i, i);
    const Coords aik = a(i, k);
    a(k, k) = ring_.add(a(k, k), ring_.add(ring_.mul(c, aik), ring_.mul(ring_.mul(c, c), aii)));
    a(i, k) = ring_.add(aik, ring_.scale(ring_.mul(c, aii), 2));
    for (int j = 0; j < r_; ++j) {
      if (j == i || j == k) continue;
      a(k, j) = ring_.add(a(k, j), ring_.mul(c, a(i, j)));
    }
    b(k) = ring_.add(b(k), ring_.mul(c, b(i)));
    for (int row = 0; row < r_; ++row)
      t_.at(row, k) = ring_.add(t_.at(row, k), ring_.mul(c, t_.at(row, i)));
  }

  // x_i <- u x_i.
  void scale_var(int i, const Coords& u) {
    a(i, i) = ring_.mul(a(i, i), ring_.mul(u, u));
    for (int j = 0; j < r_; ++j)
      if (j != i) a(i, j) = ring_.mul(a(i, j), u);
    b(i) = ring_.mul(b(i), u);
    for (int row = 0; row < r_; ++row) t_.at(row, i) = ring_.mul(t_.at(row, i), u);
  }

  // x / p^s in GR(p^(k-s)), lifted back to GR(p^k).
  Coords quotient_by_power(const Coords& x, int s) const {
    return ring_.shift_down(x, s);
  }

  // Permutes variables so that new variable j is old variable order[j].
  void permute(const std::vector<int>& order) {
    std::vector<Coords> a2, b2;
    for (int i = 0; i < r_; ++i)
      for (int j = i; j < r_; ++j) a2.push_back(a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]));
    for (int i = 0; i < r_; ++i) b2.push_back(b(order[static_cast<std::size_t>(i)]));
    Transform t2 = t_;
    for (int row = 0; row < r_; ++row)
      for (int j = 0; j < r_; ++j) t2.at(row, j) = t_.at(row, order[static_cast<std::size_t>(j)]);
    a_ = std::move(a2);
    b_ = std::move(b2);
    t_ = std::move(t2);
  }

  // The reduced polynomial recomputed from the original and T, checked
  // against the incrementally updated coefficients.
  QuadraticPolynomial finish() {
    QuadraticPolynomial out = apply_transform(q_, t_);
    for (int i = 0; i < r_; ++i) {
      for (int j = i; j < r_; ++j)
        if (!ring_.equal(out.quad(i, j).raw(), a(i, j)))
          throw InternalInconsistency("reduction bookkeeping diverged from Q(Tx)");
      if (!ring_.equal(out.lin(i).raw(), b(i)))
        throw InternalInconsistency("reduction bookkeeping diverged on linear terms");
    }
    if (!t_.is_invertible()) throw InternalInconsistency("reduction produced a singular transform");
    return out;
  }

  // Linear coefficient i as a p-adic number, exact zero when known to vanish.
  PadicApprox linear(const QuadraticPolynomial& reduced, int i) const {
    if (reduced.is_exact() && reduced.exact_lin(i).is_zero()) return PadicApprox::zero(reduced.spec());
    return PadicApprox::from_ring(reduced.lin(i));
  }

  PadicApprox coefficient(const QuadraticPolynomial& reduced, int i, int j) const {
    const PadicApprox x = PadicApprox::from_ring(reduced.quad(i, j));
    if (x.is_zero_like())
      throw PrecisionExhausted("reduced coefficient vanishes to working precision");
    return x;
  }

 private:
  GrContext ring_;
  int r_;
  QuadraticPolynomial q_;
  Transform t_;
  std::vector<Coords> a_;
  std::vector<Coords> b_;
};

inline void degenerate_or_exhausted(const QuadraticPolynomial& q) {
  if (q.is_exact()) (void)critical_value(q);  // throws DegenerateForm if singular
  throw PrecisionExhausted("quadratic part vanishes to working precision " + std::to_string(q.precision()));
}

}  // namespace detail

// Diagonalization for p odd: pivot on a minimal-valuation diagonal entry, or,
// when the minimum sits off the diagonal, first replace x_j by x_j + x_i.
inline ReducedNonDyadic reduce_nondyadic(const QuadraticPolynomial& q) {
  if (q.spec().p() == 2) throw InvalidInput("reduce_nondyadic needs p odd");
  detail::ReductionWork w(q);
  const GrContext& ring = w.ring();
  const int r = q.r();
  const int k = q.precision();
  std::vector<int> active(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) active[static_cast<std::size_t>(i)] = i;
  std::vector<int> order;
  while (!active.empty()) {
    int best = k, bi = -1, bj = -1;
    for (int i : active)
      for (int j : active) {
        if (j < i) continue;
        const int v = ring.valuation(w.a(i, j));
        if (v < best || (v == best && i == j && bi != bj)) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    if (bi < 0 || best >= k) detail::degenerate_or_exhausted(q);
    if (bi != bj) w.substitute_add(bj, bi, ring.from_int(1));
    const int piv = bi;
    const Coords unit_inv = ring.inverse(ring.scale(w.quotient_by_power(w.a(piv, piv), best), 2));
    for (int other : active) {
      if (other == piv) continue;
      // x_piv <- x_piv - a_{piv,other} / (2 a_{piv,piv}) x_other.
      const Coords c = ring.mul(w.quotient_by_power(w.a(piv, other), best), unit_inv);
      w.substitute_add(piv, other, ring.neg(c));
      if (!ring.is_zero(w.a(piv, other))) throw InternalInconsistency("elimination left a cross term");
    }
    order.push_back(piv);
    active.erase(std::find(active.begin(), active.end(), piv));
  }
  w.permute(order);
  ReducedNonDyadic out;
  out.spec = q.spec();
  out.reduced = w.finish();
  out.transform = w.transform();
  for (int i = 0; i < r; ++i)
    out.terms.push_back({w.coefficient(out.reduced, i, i), w.linear(out.reduced, i)});
  out.constant = q.is_exact() ? q.exact_constant().to_padic(k) : PadicApprox::from_ring(q.constant());
  return out;
}

namespace detail {

// Solves a x^2 + x + c = 0 modulo p^k (p = 2) given a residue root.
inline Coords hensel_quadratic(const GrContext& r, const Coords& a, const Coords& b, const Coords& c,
                               Coords x) {
  for (int it = 0; it <= r.k() + 1; ++it) {
    const Coords g = r.add(r.add(r.mul(a, r.mul(x, x)), r.mul(b, x)), c);
    if (r.is_zero(g)) return x;
    const Coords dg = r.add(r.scale(r.mul(a, x), 2), b);
    x = r.sub(x, r.mul(g, r.inverse(dg)));
  }
  throw InternalInconsistency("Hensel iteration did not converge");
}

inline std::optional<Coords> residue_root(const GrContext& r, const Coords& a, const Coords& b,
                                          const Coords& c) {
  const GrContext res(r.spec(), 1);
  const Coords a1 = res.reduce(a, r), b1 = res.reduce(b, r), c1 = res.reduce(c, r);
  for (i64 code = 0; code < r.spec().q(); ++code) {
    const Coords x = res.decode(code);
    if (res.is_zero(res.add(res.add(res.mul(a1, res.mul(x, x)), res.mul(b1, x)), c1))) return x;
  }
  return std::nullopt;
}

}  // namespace detail

// Block reduction for p = 2 over the even bilinear form (2 a_ii on the
// diagonal, a_ij off it): split y^2 terms off a minimal diagonal entry, else
// split a 2x2 block and bring it to u y1 y2 or u (y1^2 + y1 y2 + rho y2^2).
inline ReducedDyadic reduce_dyadic(const QuadraticPolynomial& q) {
  if (q.spec().p() != 2) throw InvalidInput("reduce_dyadic needs p = 2");
  detail::ReductionWork w(q);
  const GrContext& ring = w.ring();
  const FieldSpec& spec = q.spec();
  const int r = q.r();
  const int k = q.precision();
  const RingElem rho = select_rho(spec, k);
  std::vector<int> active(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) active[static_cast<std::size_t>(i)] = i;
  std::vector<int> squares;
  std::vector<std::pair<int, int>> hyper, aniso;

  auto weight = [&](int i, int j) {
    const int v = ring.valuation(w.a(i, j));
    return i == j ? std::min(v + 1, k + 1) : v;
  };
  auto remove = [&](int i) { active.erase(std::find(active.begin(), active.end(), i)); };

  while (!active.empty()) {
    int best = k + 1, bi = -1, bj = -1;
    for (int i : active)
      for (int j : active) {
        if (j < i) continue;
        const int v = weight(i, j);
        if (v < best || (v == best && i == j && bi != bj)) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    if (bi < 0 || best >= k) detail::degenerate_or_exhausted(q);

    if (bi == bj) {
      const int piv = bi;
      const int v = best - 1;  // valuation of a_piv,piv
      const Coords unit_inv = ring.inverse(w.quotient_by_power(w.a(piv, piv), v));
      for (int other : active) {
        if (other == piv) continue;
        // c = a_{piv,other} / (2 a_piv,piv), integral since val(a_{piv,other}) >= v + 1.
        const Coords c = ring.mul(w.quotient_by_power(w.a(piv, other), v + 1), unit_inv);
        w.substitute_add(piv, other, ring.neg(c));
        if (!ring.is_zero(w.a(piv, other))) throw InternalInconsistency("elimination left a cross term");
      }
      squares.push_back(piv);
      remove(piv);
      continue;
    }

    const int i = bi, j = bj, m = best;
    // Clear couplings of the block with the other variables: solve
    // G0 (s, t) = (a_ik, a_jk) / 2^m with G0 = [[2a_ii, a_ij], [a_ij, 2a_jj]] / 2^m.
    {
      const GrContext low(spec, k - m);
      auto down = [&](const Coords& x) { return low.reduce(w.quotient_by_power(x, m), ring); };
      const Coords g11 = down(ring.scale(w.a(i, i), 2));
      const Coords g12 = down(w.a(i, j));
      const Coords g22 = down(ring.scale(w.a(j, j), 2));
      const Coords det = low.sub(low.mul(g11, g22), low.mul(g12, g12));
      const Coords det_inv = low.inverse(det);
      for (int other : active) {
        if (other == i || other == j) continue;
        const Coords w1 = down(w.a(i, other));
        const Coords w2 = down(w.a(j, other));
        const Coords s = low.mul(low.sub(low.mul(g22, w1), low.mul(g12, w2)), det_inv);
        const Coords t = low.mul(low.sub(low.mul(g11, w2), low.mul(g12, w1)), det_inv);
        w.substitute_add(i, other, ring.neg(s));
        w.substitute_add(j, other, ring.neg(t));
        if (!ring.is_zero(w.a(i, other)) || !ring.is_zero(w.a(j, other)))
          throw InternalInconsistency("block elimination left a cross term");
      }
    }
    // Make the cross coefficient exactly 2^m.
    w.scale_var(j, ring.inverse(w.quotient_by_power(w.a(i, j), m)));
    const GrContext low(spec, k - m);
    const Coords alpha = low.reduce(w.quotient_by_power(w.a(i, i), m), ring);
    const Coords gamma = low.reduce(w.quotient_by_power(w.a(j, j), m), ring);
    const GrContext res(spec, 1);
    const bool isotropic =
        res.trace(res.mul(res.reduce(alpha, low), res.reduce(gamma, low))) == 0;
    if (isotropic) {
      // Root x0 of alpha x^2 + x + gamma; then x_i <- x_i + x0 x_j kills y^2,
      // and x_j <- x_j - (alpha / beta1) x_i kills x^2.
      const auto root = detail::residue_root(low, alpha, low.from_int(1), gamma);
      if (!root) throw InternalInconsistency("isotropic block without a residue root");
      const Coords x0 = detail::hensel_quadratic(low, alpha, low.from_int(1), gamma, *root);
      w.substitute_add(i, j, x0);
      if (!ring.is_zero(w.a(j, j))) throw InternalInconsistency("isotropic vector did not clear y^2");
      const Coords beta1 = low.reduce(w.quotient_by_power(w.a(i, j), m), ring);
      const Coords c = low.mul(low.reduce(w.quotient_by_power(w.a(i, i), m), ring), low.inverse(beta1));
      w.substitute_add(j, i, ring.neg(c));
      if (!ring.is_zero(w.a(i, i))) throw InternalInconsistency("hyperbolic normalization left x^2");
      hyper.emplace_back(i, j);
    } else {
      // alpha is a unit here. x_j <- alpha x_j gives 2^m alpha (x^2 + xy + delta y^2);
      // then x_j <- (1 - 2s) x_j, x_i <- x_i + s x_j with
      // (4 delta - 1)(s^2 - s) + delta - rho = 0.
      w.scale_var(j, alpha);
      const Coords unit = low.reduce(w.quotient_by_power(w.a(i, i), m), ring);
      const Coords delta = low.mul(low.reduce(w.quotient_by_power(w.a(j, j), m), ring), low.inverse(unit));
      const Coords rho_low = low.reduce(rho.raw(), rho.ring());
      const Coords lead = low.sub(low.scale(delta, 4), low.from_int(1));
      const Coords cst = low.sub(delta, rho_low);
      const auto root = detail::residue_root(low, lead, low.neg(lead), cst);
      if (!root) throw InternalInconsistency("anisotropic block normalization has no residue root");
      const Coords s = detail::hensel_quadratic(low, lead, low.neg(lead), cst, *root);
      w.scale_var(j, ring.sub(ring.from_int(1), ring.scale(s, 2)));
      w.substitute_add(i, j, s);
      const Coords ai = w.a(i, i);
      if (!ring.equal(w.a(i, j), ai) || !ring.equal(w.a(j, j), ring.mul(ai, rho.raw())))
        throw InternalInconsistency("anisotropic normalization failed");
      aniso.emplace_back(i, j);
    }
    remove(i);
    remove(j);
  }

  std::vector<int> order(squares.begin(), squares.end());
  for (auto [i, j] : hyper) {
    order.push_back(i);
    order.push_back(j);
  }
  for (auto [i, j] : aniso) {
    order.push_back(i);
    order.push_back(j);
  }
  w.permute(order);
  ReducedDyadic out;
  out.spec = spec;
  out.rho = rho;
  out.reduced = w.finish();
  out.transform = w.transform();
  int pos = 0;
  for (std::size_t s = 0; s < squares.size(); ++s, ++pos)
    out.squares.push_back({w.coefficient(out.reduced, pos, pos), w.linear(out.reduced, pos)});
  for (std::size_t h = 0; h < hyper.size(); ++h, pos += 2)
    out.hyperbolic.push_back({w.coefficient(out.reduced, pos, pos + 1), w.linear(out.reduced, pos),
                              w.linear(out.reduced, pos + 1)});
  for (std::size_t a = 0; a < aniso.size(); ++a, pos += 2)
    out.anisotropic.push_back({w.coefficient(out.reduced, pos, pos), w.linear(out.reduced, pos),
                               w.linear(out.reduced, pos + 1)});
  out.constant = q.is_exact() ? q.exact_constant().to_padic(k) : PadicApprox::from_ring(q.constant());
  return out;
}

}  // namespace padic_density
