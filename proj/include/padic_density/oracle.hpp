#pragma once

#include <cstdlib>
#include <functional>
#include <numeric>
#include <thread>
#include <vector>

#include "padic_density/exact_values.hpp"
#include "padic_density/quadratic_model.hpp"

namespace padic_density {

inline constexpr detail::i64 kDefaultBudget = 100'000'000;

// Budget from PADIC_DENSITY_BUDGET when set, else the default.
inline detail::i64 default_budget() {
  if (const char* env = std::getenv("PADIC_DENSITY_BUDGET")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && v > 0) return static_cast<detail::i64>(v);
  }
  return kDefaultBudget;
}

struct OracleOptions {
  detail::i64 budget = default_budget();
  int threads = 1;
};

struct CountResult {
  int k = 0;
  BigInt count = 0;
  Rational density = 0;  // count * q^(-k(r-1))
  bool stabilized = false;
  std::vector<Rational> history;  // density at levels 1..k (stabilized_density only)
};

namespace detail {

inline i64 checked_power(i64 base, i64 e, i64 budget, const char* what) {
  i64 v = 1;
  for (i64 i = 0; i < e; ++i) {
    if (v > budget / base) throw BudgetExceeded(std::string(what) + " exceeds the budget");
    v *= base;
  }
  return v;
}

// Connected components of the cross-term graph.
inline std::vector<std::vector<int>> components(const QuadraticPolynomial& q) {
  const int r = q.r();
  std::vector<int> parent(static_cast<std::size_t>(r));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    return parent[static_cast<std::size_t>(x)] == x ? x : parent[static_cast<std::size_t>(x)] = find(parent[static_cast<std::size_t>(x)]);
  };
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j)
      if (!q.quad(i, j).is_zero()) parent[static_cast<std::size_t>(find(i))] = find(j);
  std::vector<std::vector<int>> out;
  std::vector<int> slot(static_cast<std::size_t>(r), -1);
  for (int i = 0; i < r; ++i) {
    const int root = find(i);
    if (slot[static_cast<std::size_t>(root)] < 0) {
      slot[static_cast<std::size_t>(root)] = static_cast<int>(out.size());
      out.emplace_back();
    }
    out[static_cast<std::size_t>(slot[static_cast<std::size_t>(root)])].push_back(i);
  }
  return out;
}

// Histogram of the values of the restriction of Q (without constant) to the
// variables in comp, indexed by value code in GR(p^k).
inline std::vector<i64> component_histogram(const QuadraticPolynomial& q, const GrContext& ring,
                                            const std::vector<int>& comp, const OracleOptions& opt) {
  const i64 size = ring.size();
  const int s = static_cast<int>(comp.size());
  const i64 points = checked_power(size, s, opt.budget, "enumeration");
  std::vector<Coords> elems(static_cast<std::size_t>(size));
  for (i64 c = 0; c < size; ++c) elems[static_cast<std::size_t>(c)] = ring.decode(c);
  std::vector<Coords> a(static_cast<std::size_t>(s * s)), b(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) {
    b[static_cast<std::size_t>(i)] = ring.reduce(q.lin(comp[static_cast<std::size_t>(i)]).raw(), q.lin(0).ring());
    for (int j = i; j < s; ++j)
      a[static_cast<std::size_t>(i * s + j)] =
          ring.reduce(q.quad(comp[static_cast<std::size_t>(i)], comp[static_cast<std::size_t>(j)]).raw(), q.quad(0, 0).ring());
  }
  // Q restricted to the component is C(x') + y (L(x') + a_yy y) with y the
  // last variable. For fixed x' the inner loop runs over y in code order and
  // updates L y by additions only.
  const int last = s - 1;
  std::vector<Coords> y_square(static_cast<std::size_t>(size));
  for (i64 c = 0; c < size; ++c)
    y_square[static_cast<std::size_t>(c)] =
        ring.mul(a[static_cast<std::size_t>(last * s + last)], ring.mul(elems[static_cast<std::size_t>(c)], elems[static_cast<std::size_t>(c)]));
  const i64 outer = size == 0 ? 0 : points / size;
  const i64 pk = ring.pk();
  auto worker = [&](i64 lo, i64 hi, std::vector<i64>& hist) {
    hist.assign(static_cast<std::size_t>(size), 0);
    std::vector<Coords> x(static_cast<std::size_t>(s));
    std::vector<Coords> step(static_cast<std::size_t>(ring.f()));
    for (i64 idx = lo; idx < hi; ++idx) {
      i64 rest = idx;
      for (int i = last - 1; i >= 0; --i) {
        x[static_cast<std::size_t>(i)] = elems[static_cast<std::size_t>(rest % size)];
        rest /= size;
      }
      Coords base = ring.zero();
      Coords lin = b[static_cast<std::size_t>(last)];
      for (int i = 0; i < last; ++i) {
        Coords row = b[static_cast<std::size_t>(i)];
        for (int j = i; j < last; ++j)
          row = ring.add(row, ring.mul(a[static_cast<std::size_t>(i * s + j)], x[static_cast<std::size_t>(j)]));
        base = ring.add(base, ring.mul(row, x[static_cast<std::size_t>(i)]));
        lin = ring.add(lin, ring.mul(a[static_cast<std::size_t>(i * s + last)], x[static_cast<std::size_t>(i)]));
      }
      // Going from code c to c + 1 with j carries adds theta^j + ... + theta^0
      // to y modulo p^k.
      Coords power = ring.from_int(1), acc = ring.zero();
      for (int j = 0; j < ring.f(); ++j) {
        acc = ring.add(acc, ring.mul(lin, power));
        step[static_cast<std::size_t>(j)] = acc;
        power = ring.mul(power, ring.theta());
      }
      Coords ly = ring.zero();
      for (i64 c = 0; c < size; ++c) {
        if (c > 0) {
          int j = 0;
          for (i64 t = c; t % pk == 0; t /= pk) ++j;
          ly = ring.add(ly, step[static_cast<std::size_t>(j)]);
        }
        ++hist[static_cast<std::size_t>(ring.encode(ring.add(ring.add(base, y_square[static_cast<std::size_t>(c)]), ly)))];
      }
    }
  };
  const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(std::min<i64>(outer, 64))));
  std::vector<std::vector<i64>> parts(static_cast<std::size_t>(threads));
  if (threads == 1) {
    worker(0, outer, parts[0]);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back(worker, outer * t / threads, outer * (t + 1) / threads, std::ref(parts[static_cast<std::size_t>(t)]));
    for (auto& th : pool) th.join();
  }
  std::vector<i64> hist = std::move(parts[0]);
  for (int t = 1; t < threads; ++t)
    for (i64 v = 0; v < size; ++v) hist[static_cast<std::size_t>(v)] += parts[static_cast<std::size_t>(t)][static_cast<std::size_t>(v)];
  return hist;
}

}  // namespace detail

// Number of x in (o/p^k)^r with Q(x) = n mod p^k, and the normalized density
// count * q^(-k(r-1)). Variables are grouped by the cross-term graph; each
// group is enumerated directly and the value histograms are convolved.
inline CountResult count_density(const QuadraticPolynomial& q_in, const PadicApprox& n, int k,
                                 const OracleOptions& opt = {}) {
  using detail::i64;
  if (k < 1) throw InvalidInput("level must be at least 1");
  const QuadraticPolynomial q = q_in.at_precision(k);
  const FieldSpec& spec = q.spec();
  const GrContext ring(spec, k);
  const i64 size = ring.size();
  const auto comps = detail::components(q);
  std::vector<std::vector<i64>> hists;
  for (const auto& c : comps) hists.push_back(detail::component_histogram(q, ring, c, opt));

  const Coords target = ring.sub(n.to_ring(k).raw(), ring.reduce(q.constant().raw(), q.constant().ring()));
  const i64 target_code = ring.encode(target);
  // Codes are base-p^k digit strings; addition is digit-wise modulo p^k.
  const i64 pk = ring.pk();
  const int f = spec.f();
  auto add_codes = [&](i64 a, i64 b, bool subtract) {
    i64 out = 0, scale = 1;
    for (int i = 0; i < f; ++i) {
      const i64 da = a % pk, db = b % pk;
      a /= pk;
      b /= pk;
      out += scale * (subtract ? (da - db + pk) % pk : (da + db) % pk);
      scale *= pk;
    }
    return out;
  };
  // Fold all but the last histogram into one (sparse products), then read off
  // the last at target - value. Counts fit in 64 bits when size^r does.
  bool small = true;
  {
    i64 bound = 1;
    for (int i = 0; i < q.r() && small; ++i) {
      if (bound > (i64{1} << 62) / size) small = false;
      bound *= size;
    }
  }
  auto fold = [&](auto zero_value) {
    using Count = decltype(zero_value);
    std::vector<Count> acc(static_cast<std::size_t>(size), Count(0));
    acc[0] = 1;
    i64 work = 0;
    for (std::size_t h = 0; h + 1 < hists.size(); ++h) {
      std::vector<Count> next(static_cast<std::size_t>(size), Count(0));
      std::vector<i64> nz_a, nz_b;
      for (i64 v = 0; v < size; ++v) {
        if (acc[static_cast<std::size_t>(v)] != 0) nz_a.push_back(v);
        if (hists[h][static_cast<std::size_t>(v)] != 0) nz_b.push_back(v);
      }
      work += static_cast<i64>(nz_a.size()) * static_cast<i64>(nz_b.size());
      if (work > opt.budget) throw BudgetExceeded("histogram convolution exceeds the budget");
      for (i64 va : nz_a) {
        const Count ca = acc[static_cast<std::size_t>(va)];
        for (i64 vb : nz_b)
          next[static_cast<std::size_t>(add_codes(va, vb, false))] += ca * Count(hists[h][static_cast<std::size_t>(vb)]);
      }
      acc = std::move(next);
    }
    const auto& last = hists.back();
    Count total(0);
    for (i64 v = 0; v < size; ++v) {
      if (acc[static_cast<std::size_t>(v)] == 0) continue;
      total += acc[static_cast<std::size_t>(v)] * Count(last[static_cast<std::size_t>(add_codes(target_code, v, true))]);
    }
    return BigInt(total);
  };
  const BigInt count = small ? fold(i64{0}) : fold(BigInt(0));
  CountResult out;
  out.k = k;
  out.count = count;
  out.density = Rational(count) * rational_pow(Rational(spec.q()), -k * (q.r() - 1));
  return out;
}

// Smallest k with density_k = density_(k+1) = density_(k+2); otherwise the
// value at k_max with stabilized = false. A stopping heuristic, not a proof.
inline CountResult stabilized_density(const QuadraticPolynomial& q, const PadicApprox& n, int k_max,
                                      const OracleOptions& opt = {}) {
  std::vector<Rational> hist;
  for (int k = 1; k <= k_max; ++k) {
    hist.push_back(count_density(q, n, k, opt).density);
    const std::size_t m = hist.size();
    if (m >= 3 && hist[m - 1] == hist[m - 2] && hist[m - 2] == hist[m - 3]) {
      CountResult out;
      out.k = k - 2;
      out.density = hist[m - 3];
      out.stabilized = true;
      out.history = hist;
      return out;
    }
  }
  CountResult out;
  out.k = k_max;
  out.density = hist.back();
  out.history = hist;
  return out;
}

// ---------------------------------------------------------------------------
// Integral oracles: the integral over o^d (or a sub-domain) of a locally
// constant integrand, as q^(-kd) times the sum over (o/p^k)^d.

enum class OracleDomain { full, units, shell };

// One integrand value: weight * e(phase). Weight 0 drops the point.
struct OracleTerm {
  Phase phase;
  int weight = 1;
};

// fn(points, ring) -> OracleTerm, with points in GR(p^k). For the shell domain
// the points run over center + p*o, for units over o^x in every coordinate.
inline ExpSum sum_integral_oracle(const FieldSpec& spec, int k, int d, OracleDomain domain,
                                  const std::function<OracleTerm(std::span<const Coords>, const GrContext&)>& fn,
                                  const Coords& center = {}, detail::i64 budget = default_budget()) {
  const GrContext ring(spec, k);
  const detail::i64 size = ring.size();
  const detail::i64 points = detail::checked_power(size, d, budget, "integral oracle");
  ExpSum out(spec.p(), rational_pow(Rational(spec.q()), -k * d));
  std::vector<Coords> x(static_cast<std::size_t>(d));
  const GrContext res(spec, 1);
  for (detail::i64 idx = 0; idx < points; ++idx) {
    detail::i64 rest = idx;
    bool keep = true;
    for (int i = d - 1; i >= 0; --i) {
      const Coords c = ring.decode(rest % size);
      rest /= size;
      const Coords c1 = res.reduce(c, ring);
      if (domain == OracleDomain::units && res.is_zero(c1)) keep = false;
      if (domain == OracleDomain::shell && !res.equal(c1, res.reduce(center, ring))) keep = false;
      x[static_cast<std::size_t>(i)] = c;
    }
    if (!keep) continue;
    const OracleTerm t = fn(x, ring);
    if (t.weight != 0) out.add(t.phase, t.weight);
  }
  return out;
}

namespace detail {

// x * p^D reduced into GR(p^K); requires x p^D integral.
inline Coords scaled_into(const PadicApprox& x, int D, const GrContext& ring) {
  if (x.is_exact_zero()) return ring.zero();
  return ring.reduce(x.shifted(D).to_ring(ring.k()).raw(), GrContext(x.spec(), ring.k()));
}

inline int order_of(const PadicApprox& x) {
  if (x.is_exact_zero()) return PadicApprox::kInfinite;
  return x.valuation();
}

inline int denominator_exponent(std::initializer_list<PadicApprox> xs) {
  int v = 0;
  for (const auto& x : xs) v = std::min(v, order_of(x));
  return -v;
}

// e(value / p^D), value in GR(p^K), K >= D.
inline Phase phase_over(const GrContext& ring, const Coords& value, int D) {
  return Phase(ring.p(), -ring.trace(value), D);
}

}  // namespace detail

// Oracle for the integral over o of e(sigma x^2 + tau x); extra raises the
// level past the conductor.
inline ExpSum quadratic_integral_oracle(const PadicApprox& sigma, const PadicApprox& tau, int extra = 0) {
  const FieldSpec& spec = sigma.spec();
  const int D = detail::denominator_exponent({sigma, tau});
  const int k = std::max(1, D) + extra;
  const GrContext work(spec, std::max(1, D));
  const Coords s = detail::scaled_into(sigma, D, work);
  const Coords t = detail::scaled_into(tau, D, work);
  return sum_integral_oracle(spec, k, 1, OracleDomain::full, [&](std::span<const Coords> x, const GrContext& r) {
    const Coords y = work.reduce(x[0], r);
    return OracleTerm{detail::phase_over(work, work.add(work.mul(s, work.mul(y, y)), work.mul(t, y)), D)};
  });
}

// Oracle for the integral over o^x of (x/p) e(sigma x).
inline ExpSum twisted_unit_integral_oracle(const PadicApprox& sigma, int extra = 0) {
  const FieldSpec& spec = sigma.spec();
  const int D = detail::denominator_exponent({sigma});
  const int k = std::max(1, D) + extra;
  const GrContext work(spec, std::max(1, D));
  const Coords s = detail::scaled_into(sigma, D, work);
  return sum_integral_oracle(spec, k, 1, OracleDomain::units, [&](std::span<const Coords> x, const GrContext& r) {
    const Coords y = work.reduce(x[0], r);
    return OracleTerm{detail::phase_over(work, work.mul(s, y), D), legendre(RingElem(spec, r.k(), x[0]))};
  });
}

// Oracle for the integral over o^2 of e(sigma y1 y2 + tau1 y1 + tau2 y2).
inline ExpSum hyperbolic_integral_oracle(const PadicApprox& sigma, const PadicApprox& tau1,
                                         const PadicApprox& tau2, int extra = 0) {
  const FieldSpec& spec = sigma.spec();
  const int D = detail::denominator_exponent({sigma, tau1, tau2});
  const int k = std::max(1, D) + extra;
  const GrContext work(spec, std::max(1, D));
  const Coords s = detail::scaled_into(sigma, D, work);
  const Coords t1 = detail::scaled_into(tau1, D, work);
  const Coords t2 = detail::scaled_into(tau2, D, work);
  return sum_integral_oracle(spec, k, 2, OracleDomain::full, [&](std::span<const Coords> x, const GrContext& r) {
    const Coords y1 = work.reduce(x[0], r), y2 = work.reduce(x[1], r);
    const Coords v = work.add(work.mul(s, work.mul(y1, y2)), work.add(work.mul(t1, y1), work.mul(t2, y2)));
    return OracleTerm{detail::phase_over(work, v, D)};
  });
}

// Oracle for the integral over o^2 of
// e(sigma (z1^2 + z1 z2 + rho z2^2) + tau1 z1 + tau2 z2).
inline ExpSum anisotropic_integral_oracle(const PadicApprox& sigma, const PadicApprox& tau1,
                                          const PadicApprox& tau2, const RingElem& rho, int extra = 0) {
  const FieldSpec& spec = sigma.spec();
  const int D = detail::denominator_exponent({sigma, tau1, tau2});
  const int k = std::max(1, D) + extra;
  const GrContext work(spec, std::max(1, D));
  const Coords s = detail::scaled_into(sigma, D, work);
  const Coords t1 = detail::scaled_into(tau1, D, work);
  const Coords t2 = detail::scaled_into(tau2, D, work);
  const Coords rh = work.reduce(rho.lift(std::max(rho.precision(), work.k())).raw(), GrContext(spec, std::max(rho.precision(), work.k())));
  return sum_integral_oracle(spec, k, 2, OracleDomain::full, [&](std::span<const Coords> x, const GrContext& r) {
    const Coords z1 = work.reduce(x[0], r), z2 = work.reduce(x[1], r);
    const Coords form = work.add(work.add(work.mul(z1, z1), work.mul(z1, z2)), work.mul(rh, work.mul(z2, z2)));
    const Coords v = work.add(work.mul(s, form), work.add(work.mul(t1, z1), work.mul(t2, z2)));
    return OracleTerm{detail::phase_over(work, v, D)};
  });
}

// Oracle for the integral over a + 2o of eta(s)^l e(s alpha + s^(2^f - 1) m / 8).
inline ExpSum unit_shell_integral_oracle(const RingElem& a, const PadicApprox& alpha, const PadicApprox& m,
                                         int ell, int extra = 0) {
  const FieldSpec& spec = a.spec();
  if (spec.p() != 2) throw InvalidInput("unit-shell integrals need p = 2");
  const int D = std::max(3, detail::denominator_exponent({alpha, m}));
  const int k = D + extra;
  const GrContext work(spec, D);
  const Coords al = detail::scaled_into(alpha, D, work);
  const Coords mm = detail::scaled_into(m, D - 3, work);
  const detail::u64 e = static_cast<detail::u64>(spec.q() - 1);
  const GrContext big(spec, std::max(k, a.precision()));
  const Coords center = GrContext(spec, k).reduce(a.lift(big.k()).raw(), big);
  return sum_integral_oracle(
      spec, k, 1, OracleDomain::shell,
      [&](std::span<const Coords> x, const GrContext& r) {
        const Coords s = work.reduce(x[0], r);
        const Coords v = work.add(work.mul(al, s), work.mul(mm, work.pow(s, e)));
        const int w = ell % 2 == 0 ? 1 : eta_char(RingElem(spec, r.k(), x[0]));
        return OracleTerm{detail::phase_over(work, v, D), w};
      },
      center);
}

// The quadratic Gauss sum over the residue field, sum_x e(sigma x^2 / p), as
// q times an integral over o at level 1.
inline ExpSum gauss_sum_oracle(const RingElem& sigma) {
  const FieldSpec& spec = sigma.spec();
  const GrContext work(spec, 1);
  const Coords s = work.reduce(sigma.raw(), sigma.ring());
  ExpSum raw = sum_integral_oracle(spec, 1, 1, OracleDomain::full, [&](std::span<const Coords> x, const GrContext&) {
    return OracleTerm{detail::phase_over(work, work.mul(s, work.mul(x[0], x[0])), 1)};
  });
  ExpSum out(spec.p(), raw.scale() * spec.q());
  for (const auto& [ph, mult] : raw.terms()) out.add(ph, mult);
  return out;
}

// sum over r in o/p of e((sigma r^2 + tau r) / 2), enumerated at level 1.
inline ExpSum dyadic_quadratic_sum_oracle(const RingElem& sigma, const RingElem& tau) {
  const FieldSpec& spec = sigma.spec();
  const GrContext work(spec, 1);
  const Coords s = work.reduce(sigma.raw(), sigma.ring());
  const Coords t = work.reduce(tau.raw(), tau.ring());
  ExpSum raw = sum_integral_oracle(spec, 1, 1, OracleDomain::full, [&](std::span<const Coords> x, const GrContext&) {
    const Coords v = work.add(work.mul(s, work.mul(x[0], x[0])), work.mul(t, x[0]));
    return OracleTerm{detail::phase_over(work, v, 1)};
  });
  ExpSum out(spec.p(), raw.scale() * spec.q());
  for (const auto& [ph, mult] : raw.terms()) out.add(ph, mult);
  return out;
}

}  // namespace padic_density
