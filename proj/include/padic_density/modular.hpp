#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "padic_density/errors.hpp"

namespace padic_density::detail {

using i64 = std::int64_t;
using u64 = std::uint64_t;
using i128 = __int128;
using u128 = unsigned __int128;

// Residues modulo p^k are kept below this bound so products fit in 128 bits.
inline constexpr i64 kModulusBound = i64{1} << 62;

inline i64 mod(i64 a, i64 m) {
  a %= m;
  return a < 0 ? a + m : a;
}

inline i64 mulmod(i64 a, i64 b, i64 m) {
  return static_cast<i64>(static_cast<u128>(a) * static_cast<u128>(b) %
                          static_cast<u128>(m));
}

inline i64 powmod(i64 b, u64 e, i64 m) {
  i64 r = 1 % m;
  b = mod(b, m);
  while (e) {
    if (e & 1) r = mulmod(r, b, m);
    b = mulmod(b, b, m);
    e >>= 1;
  }
  return r;
}

// Exact power; throws when the result leaves the residue bound.
inline i64 ipow(i64 b, int e) {
  i64 r = 1;
  for (int i = 0; i < e; ++i) {
    if (r > kModulusBound / b)
      throw PrecisionExhausted("power " + std::to_string(b) + "^" +
                               std::to_string(e) + " exceeds 62 bits");
    r *= b;
  }
  return r;
}

// Largest k with p^k below the residue bound.
inline int max_precision(i64 p) {
  int k = 0;
  i64 r = 1;
  while (r <= kModulusBound / p) {
    r *= p;
    ++k;
  }
  return k;
}

inline int vp(i64 x, i64 p) {
  int v = 0;
  while (x != 0 && x % p == 0) {
    x /= p;
    ++v;
  }
  return v;
}

inline bool is_prime(i64 n) {
  if (n < 2) return false;
  for (i64 d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

inline std::vector<i64> prime_factors(i64 n) {
  std::vector<i64> out;
  for (i64 d = 2; d * d <= n; ++d) {
    if (n % d == 0) {
      out.push_back(d);
      while (n % d == 0) n /= d;
    }
  }
  if (n > 1) out.push_back(n);
  return out;
}

}  // namespace padic_density::detail
