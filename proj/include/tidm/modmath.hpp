#pragma once

#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "tidm/error.hpp"

namespace tidm {

using u64 = std::uint64_t;
using i64 = std::int64_t;
using u128 = unsigned __int128;
using i128 = __int128;

inline u64 mul_mod(u64 a, u64 b, u64 m) {
  return static_cast<u64>(static_cast<u128>(a) * b % m);
}

inline u64 add_mod(u64 a, u64 b, u64 m) {
  u128 s = static_cast<u128>(a) + b;
  return static_cast<u64>(s >= m ? s - m : s);
}

inline u64 sub_mod(u64 a, u64 b, u64 m) { return a >= b ? a - b : a + (m - b); }

inline u64 pow_mod(u64 base, u64 exp, u64 m) {
  if (m == 1) return 0;
  u64 result = 1;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = mul_mod(result, base, m);
    base = mul_mod(base, base, m);
    exp >>= 1;
  }
  return result;
}

// Inverse of a modulo m for gcd(a, m) = 1; throws NotInvertible otherwise.
inline u64 inv_mod(u64 a, u64 m) {
  require(m > 1, Err::NotInvertible, "modulus must exceed 1");
  i64 t = 0, new_t = 1;
  i64 r = static_cast<i64>(m), new_r = static_cast<i64>(a % m);
  while (new_r != 0) {
    i64 q = r / new_r;
    t = std::exchange(new_t, t - q * new_t);
    r = std::exchange(new_r, r - q * new_r);
  }
  require(r == 1, Err::NotInvertible, "value not invertible modulo " + std::to_string(m));
  return static_cast<u64>(t < 0 ? t + static_cast<i64>(m) : t);
}

// Floor division toward negative infinity, exact over __int128.
inline i64 floor_div(i128 num, i64 den) {
  i128 q = num / den;
  i128 r = num % den;
  if (r != 0 && ((r < 0) != (den < 0))) --q;
  return static_cast<i64>(q);
}

// Jacobi symbol (a / n) for odd n > 0.
inline int jacobi(u64 a, u64 n) {
  require(n % 2 == 1 && n > 0, Err::InvalidConfig, "jacobi needs odd positive n");
  a %= n;
  int result = 1;
  while (a != 0) {
    while (a % 2 == 0) {
      a /= 2;
      u64 r = n % 8;
      if (r == 3 || r == 5) result = -result;
    }
    std::swap(a, n);
    if (a % 4 == 3 && n % 4 == 3) result = -result;
    a %= n;
  }
  return n == 1 ? result : 0;
}

// Deterministic Miller-Rabin, exact for all 64-bit inputs.
inline bool is_prime_u64(u64 n) {
  if (n < 2) return false;
  for (u64 p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    if (n % p == 0) return n == p;
  }
  u64 d = n - 1;
  int s = 0;
  while (d % 2 == 0) { d /= 2; ++s; }
  for (u64 a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    u64 x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 0; i < s - 1; ++i) {
      x = mul_mod(x, x, n);
      if (x == n - 1) { composite = false; break; }
    }
    if (composite) return false;
  }
  return true;
}

// Smallest prime strictly greater than n.
inline u64 next_prime_above(u64 n) {
  u64 candidate = n + 1;
  if (candidate <= 2) return 2;
  if (candidate % 2 == 0) ++candidate;
  while (!is_prime_u64(candidate)) candidate += 2;
  return candidate;
}

inline std::vector<u64> primes_up_to(u64 bound) {
  std::vector<u64> out;
  if (bound < 2) return out;
  std::vector<bool> sieve(bound + 1, true);
  for (u64 i = 2; i <= bound; ++i) {
    if (!sieve[i]) continue;
    out.push_back(i);
    for (u64 j = i * i; j <= bound; j += i) sieve[j] = false;
  }
  return out;
}

}  // namespace tidm
