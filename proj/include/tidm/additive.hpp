#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tidm/error.hpp"
#include "tidm/modmath.hpp"
#include "tidm/rng.hpp"

namespace tidm {

// k-of-k additive sharing. With a modulus the parts sum to the secret mod m;
// without one the parts are plain integers (possibly negative) summing to the
// secret, as needed by the shared private-exponent construction.
struct AdditiveShareVector {
  std::size_t parties = 0;
  std::vector<i64> values;
  std::optional<u64> modulus;
};

// Range for the random parts when sharing over the integers.
inline constexpr u64 kAdditiveIntegerRange = 1ull << 61;

inline AdditiveShareVector additive_share(i64 secret, std::size_t k, std::optional<u64> modulus,
                                          RandomSource& rng) {
  require(k >= 2, Err::PartyCountTooSmall, "additive sharing needs k >= 2");
  AdditiveShareVector out{k, {}, modulus};
  out.values.reserve(k);
  if (modulus) {
    u64 m = *modulus;
    require(m > 1, Err::InvalidConfig, "modulus must exceed 1");
    u64 target = static_cast<u64>(((secret % static_cast<i64>(m)) + static_cast<i64>(m))) % m;
    u64 acc = 0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      u64 v = rng.below(m);
      out.values.push_back(static_cast<i64>(v));
      acc = add_mod(acc, v, m);
    }
    out.values.push_back(static_cast<i64>(sub_mod(target, acc, m)));
  } else {
    i64 acc = 0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      i64 v = static_cast<i64>(rng.below(kAdditiveIntegerRange));
      out.values.push_back(v);
      acc += v;
    }
    out.values.push_back(secret - acc);
  }
  return out;
}

inline i64 additive_reconstruct(const AdditiveShareVector& v) {
  if (v.modulus) {
    u64 m = *v.modulus;
    u64 acc = 0;
    for (i64 x : v.values) {
      i64 r = x % static_cast<i64>(m);
      if (r < 0) r += static_cast<i64>(m);
      acc = add_mod(acc, static_cast<u64>(r), m);
    }
    return static_cast<i64>(acc);
  }
  i64 acc = 0;
  for (i64 x : v.values) acc += x;
  return acc;
}

}  // namespace tidm
