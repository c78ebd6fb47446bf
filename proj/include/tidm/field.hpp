#pragma once

#include <cstdint>

#include "tidm/error.hpp"
#include "tidm/modmath.hpp"

namespace tidm {

// Prime field Z_q. The modulus is validated with a deterministic primality
// check at construction; elements are plain u64 residues.
class PrimeField {
public:
  explicit PrimeField(u64 modulus) : modulus_(modulus) {
    require(modulus > 2, Err::InvalidConfig, "field modulus must exceed 2");
    require(is_prime_u64(modulus), Err::InvalidConfig,
            "field modulus " + std::to_string(modulus) + " is not prime");
  }

  u64 modulus() const { return modulus_; }

  u64 reduce(u64 v) const { return v % modulus_; }

  // Maps a signed integer into [0, q).
  u64 from_signed(i64 v) const {
    i64 r = v % static_cast<i64>(modulus_);
    if (r < 0) r += static_cast<i64>(modulus_);
    return static_cast<u64>(r);
  }

  u64 add(u64 a, u64 b) const { return add_mod(a, b, modulus_); }
  u64 sub(u64 a, u64 b) const { return sub_mod(a, b, modulus_); }
  u64 mul(u64 a, u64 b) const { return mul_mod(a, b, modulus_); }
  u64 neg(u64 a) const { return a == 0 ? 0 : modulus_ - a; }
  u64 pow(u64 a, u64 e) const { return pow_mod(a, e, modulus_); }
  u64 inv(u64 a) const { return inv_mod(a, modulus_); }

  bool operator==(const PrimeField& other) const { return modulus_ == other.modulus_; }

private:
  u64 modulus_;
};

// Default field for session-key sharing: smallest prime above 2^61, found by
// deterministic search (2^61 + 15).
inline const PrimeField& default_share_field() {
  static const PrimeField field(next_prime_above(1ull << 61));
  return field;
}

}  // namespace tidm
