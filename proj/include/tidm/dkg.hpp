#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tidm/bgw.hpp"
#include "tidm/error.hpp"
#include "tidm/field.hpp"
#include "tidm/modmath.hpp"
#include "tidm/rng.hpp"
#include "tidm/shamir.hpp"

namespace tidm {

inline unsigned ceil_log2(u64 n) {
  unsigned bits = 0;
  u64 v = 1;
  while (v < n) { v <<= 1; ++bits; }
  return bits;
}

struct KeygenConfig {
  std::size_t parties = 3;              // k
  unsigned prime_share_bits = 16;       // bits per p_i / q_i fragment
  u64 trial_division_bound = 200;       // B
  std::size_t biprimality_rounds = 40;  // s
  u64 public_exponent = 65537;          // e, odd prime
  u64 bgw_prime = 0;                    // 0 = smallest adequate prime
  std::size_t max_attempts = 20000;
  std::size_t batch_size = 8;           // candidates pipelined per iteration
  std::size_t backup_threshold = 2;     // t for d_i share backups

  void validate() const {
    require(parties >= 3, Err::InvalidConfig, "keygen needs k >= 3 parties");
    require(prime_share_bits >= 4, Err::InvalidConfig, "prime share bits must be >= 4");
    require(public_exponent >= 3 && public_exponent % 2 == 1 && is_prime_u64(public_exponent),
            Err::InvalidConfig, "public exponent must be an odd prime >= 3");
    require(biprimality_rounds >= 1, Err::InvalidConfig, "need at least one biprimality round");
    require(batch_size >= 1, Err::InvalidConfig, "batch size must be >= 1");
    require(max_attempts >= 1, Err::InvalidConfig, "max attempts must be >= 1");
    require(backup_threshold >= 2 && backup_threshold <= parties, Err::InvalidConfig,
            "backup threshold out of range");
    unsigned modulus_bits = 2 * (prime_share_bits + ceil_log2(parties));
    require(modulus_bits <= 60, Err::InvalidConfig,
            "prime share bits too large for 64-bit arithmetic");
    require(effective_bgw_prime() > (u64{1} << modulus_bits), Err::InvalidConfig,
            "BGW prime does not dominate the modulus range");
  }

  // P must exceed every possible N = (sum p_i)(sum q_i).
  u64 effective_bgw_prime() const {
    if (bgw_prime != 0) return bgw_prime;
    unsigned modulus_bits = 2 * (prime_share_bits + ceil_log2(parties));
    return next_prime_above(u64{1} << modulus_bits);
  }
};

struct RsaPublicKey {
  u64 modulus = 0;  // N
  u64 exponent = 0; // e
};

struct PrivateShare {
  int party_id = 0;
  u64 p = 0;        // p_i fragment
  u64 q = 0;        // q_i fragment
  i64 phi = 0;      // phi_i: party 1 holds N - p_1 - q_1 + 1, others -(p_i + q_i)
  i64 d = 0;        // additive fragment of the private exponent
  u64 correction = 0;  // public c with e (sum d_i + c) = 1 mod phi(N)
};

struct BiprimalityRound {
  u64 base = 0;
  std::vector<u64> v_values;
  bool accepted = false;
  std::optional<u64> leaked_factor;
};

struct BiprimalityResult {
  bool accepted = false;
  std::vector<BiprimalityRound> rounds;
  std::optional<u64> leaked_factor;
};

struct ShareBackup {
  int owner = 0;
  int holder = 0;
  SharePoint sub_share;
};

// Fragment of a prime-sum candidate. Party 1 draws values congruent to
// 3 mod 4, everyone else 0 mod 4, so the sums are 3 mod 4 by construction.
inline u64 generate_candidate_fragment(unsigned bits, int party_id, RandomSource& rng) {
  u64 base = u64{1} << (bits - 1);
  u64 target = party_id == 1 ? 3 : 0;
  for (;;) {
    u64 v = base + rng.below(base);
    if (v % 4 == target) return v;
  }
}

inline std::pair<u64, u64> generate_candidate_shares(const KeygenConfig& cfg, int party_id,
                                                     RandomSource& rng) {
  u64 p = generate_candidate_fragment(cfg.prime_share_bits, party_id, rng);
  u64 q = generate_candidate_fragment(cfg.prime_share_bits, party_id, rng);
  return {p, q};
}

// N from per-party fragments via the shared product; nothing beyond the
// opened product leaves any party (asserted over the returned views).
inline BgwResult compute_shared_modulus(std::span<const u64> p_fragments,
                                        std::span<const u64> q_fragments, const PrimeField& field,
                                        RandomSource& rng) {
  return bgw_shared_product(p_fragments, q_fragments, field, rng);
}

inline bool trial_division_accepts(u64 n, u64 bound) {
  require(n > 1, Err::InvalidConfig, "trial division needs N > 1");
  for (u64 p : primes_up_to(bound)) {
    if (n % p == 0) return false;
  }
  return true;
}

inline i64 phi_fragment(int party_id, u64 modulus, u64 p_i, u64 q_i) {
  if (party_id == 1) return static_cast<i64>(modulus) - static_cast<i64>(p_i + q_i) + 1;
  return -static_cast<i64>(p_i + q_i);
}

// Exponent used in a biprimality round: party 1 raises to (N - p_1 - q_1 + 1)/4,
// the others to (p_i + q_i)/4; all are integers thanks to the congruence rule.
inline u64 biprimality_exponent(int party_id, u64 modulus, u64 p_i, u64 q_i) {
  if (party_id == 1) {
    u64 num = modulus - p_i - q_i + 1;
    require(num % 4 == 0, Err::InvalidConfig, "party 1 exponent not divisible by 4");
    return num / 4;
  }
  u64 num = p_i + q_i;
  require(num % 4 == 0, Err::InvalidConfig, "fragment sum not divisible by 4");
  return num / 4;
}

inline bool biprimality_round_accepts(u64 modulus, std::span<const u64> v_values) {
  u64 rhs = 1;
  for (std::size_t i = 1; i < v_values.size(); ++i) rhs = mul_mod(rhs, v_values[i], modulus);
  return v_values[0] == rhs || v_values[0] == (rhs == 0 ? 0 : modulus - rhs);
}

// Samples a test base: uniform g in [2, N-2] until the Jacobi symbol is +1.
// A g sharing a factor with N is returned as a leak, rejecting the candidate.
inline std::pair<u64, std::optional<u64>> sample_biprimality_base(u64 modulus,
                                                                  RandomSource& rng) {
  for (;;) {
    u64 g = 2 + rng.below(modulus - 3);
    u64 d = std::gcd(g, modulus);
    if (d != 1) return {g, d};
    if (jacobi(g, modulus) == 1) return {g, std::nullopt};
  }
}

// Distributed Boneh-Franklin biprimality check, simulated locally: s rounds,
// each testing v_1 = +-(product of v_i) for a fresh Jacobi(+1) base.
inline BiprimalityResult biprimality_test(u64 modulus,
                                          std::span<const std::pair<u64, u64>> fragments,
                                          std::size_t rounds, RandomSource& rng) {
  require(modulus % 4 == 1, Err::InvalidConfig, "biprimality needs N = 1 mod 4");
  u128 sum_p = 0, sum_q = 0;
  for (const auto& [p, q] : fragments) { sum_p += p; sum_q += q; }
  require(sum_p * sum_q == modulus, Err::InvalidConfig, "fragments inconsistent with N");

  BiprimalityResult result;
  for (std::size_t r = 0; r < rounds; ++r) {
    auto [g, leak] = sample_biprimality_base(modulus, rng);
    BiprimalityRound round;
    round.base = g;
    if (leak) {
      round.leaked_factor = leak;
      result.rounds.push_back(std::move(round));
      result.leaked_factor = leak;
      result.accepted = false;
      return result;
    }
    for (std::size_t i = 0; i < fragments.size(); ++i) {
      u64 exp = biprimality_exponent(static_cast<int>(i + 1), modulus, fragments[i].first,
                                     fragments[i].second);
      round.v_values.push_back(pow_mod(g, exp, modulus));
    }
    round.accepted = biprimality_round_accepts(modulus, round.v_values);
    bool accepted = round.accepted;
    result.rounds.push_back(std::move(round));
    if (!accepted) {
      result.accepted = false;
      return result;
    }
  }
  result.accepted = true;
  return result;
}

struct ExponentShares {
  std::vector<i64> d;      // per-party fragments, floor(T phi_i / e)
  u64 correction = 0;      // public c found by trial decryption of m = 2
  u64 zeta = 0;            // revealed (sum phi_i) mod e
  u64 t_multiplier = 0;    // -zeta^{-1} mod e
};

inline u64 pow_mod_signed(u64 base, i64 exp, u64 modulus) {
  base %= modulus;
  if (exp >= 0) return pow_mod(base, static_cast<u64>(exp), modulus);
  u64 inv;
  try {
    inv = inv_mod(base, modulus);
  } catch (const Error&) {
    fail(Err::NonInvertibleCiphertext, "base shares a factor with the modulus");
  }
  return pow_mod(inv, static_cast<u64>(-exp), modulus);
}

// Partial decryption c^{d_i} mod N; negative fragments go through the inverse.
inline u64 partial_decrypt(u64 ciphertext, i64 d_i, u64 modulus) {
  require(ciphertext > 0 && ciphertext < modulus, Err::InvalidConfig,
          "ciphertext outside (0, N)");
  return pow_mod_signed(ciphertext, d_i, modulus);
}

// Derives the additive sharing of the private exponent from the phi fragments.
// zeta = phi mod e is revealed; everything else stays local.
inline ExponentShares compute_shared_private_exponent(u64 public_exponent,
                                                      std::span<const i64> phi_fragments,
                                                      u64 modulus) {
  const u64 e = public_exponent;
  i64 zeta_acc = 0;
  for (i64 phi : phi_fragments) {
    zeta_acc = (zeta_acc + phi % static_cast<i64>(e)) % static_cast<i64>(e);
  }
  u64 zeta = static_cast<u64>(zeta_acc < 0 ? zeta_acc + static_cast<i64>(e) : zeta_acc);
  require(zeta != 0, Err::NotInvertible, "public exponent divides phi(N)");

  ExponentShares out;
  out.zeta = zeta;
  out.t_multiplier = e - inv_mod(zeta, e);

  out.d.reserve(phi_fragments.size());
  for (i64 phi : phi_fragments) {
    out.d.push_back(floor_div(static_cast<i128>(out.t_multiplier) * phi, static_cast<i64>(e)));
  }

  // Fix the floor defect by trial decryption of m = 2 (coprime to odd N).
  u64 trial_cipher = pow_mod(2, e, modulus);
  u64 acc = 1;
  for (i64 d_i : out.d) acc = mul_mod(acc, partial_decrypt(trial_cipher, d_i, modulus), modulus);
  std::size_t k = phi_fragments.size();
  bool found = false;
  for (u64 c = 0; c <= k + 1; ++c) {
    if (acc == 2) { out.correction = c; found = true; break; }
    acc = mul_mod(acc, trial_cipher, modulus);
  }
  require(found, Err::CorrectionNotFound, "no correction in [0, k+1] decrypts the test message");
  return out;
}

struct PartyPartial {
  int party_id = 0;
  u64 value = 0;
};

// Product of one partial per party times ciphertext^correction. Requires all
// k parties represented exactly once (originals or recovered).
inline u64 combine_partials(std::span<const PartyPartial> partials, u64 correction,
                            u64 ciphertext, u64 modulus, std::size_t k) {
  std::map<int, u64> by_party;
  for (const auto& p : partials) {
    auto it = by_party.find(p.party_id);
    if (it != by_party.end()) {
      require(it->second == p.value, Err::DuplicatePartyPartial,
              "conflicting partials from party " + std::to_string(p.party_id));
    } else {
      by_party.emplace(p.party_id, p.value);
    }
  }
  for (std::size_t i = 1; i <= k; ++i) {
    require(by_party.contains(static_cast<int>(i)), Err::MissingParty,
            "no partial from party " + std::to_string(i));
  }
  u64 acc = pow_mod(ciphertext % modulus, correction, modulus);
  for (const auto& [id, v] : by_party) {
    (void)id;
    acc = mul_mod(acc, v, modulus);
  }
  return acc;
}

// Threshold signature on a digest value h in (0, N): sigma = h^(sum d_i + c).
inline u64 threshold_sign_digest(u64 digest_value, std::span<const PartyPartial> partials,
                                 u64 correction, u64 modulus, std::size_t k) {
  return combine_partials(partials, correction, digest_value, modulus, k);
}

// --- fault-tolerance backups -------------------------------------------------

// Field for backing up d_i fragments: must embed every value of
// d_i + k N for d_i in (-N, N), hence Q > 2 k N.
inline u64 backup_field_modulus(std::size_t k, u64 modulus) {
  return next_prime_above(2 * static_cast<u64>(k) * modulus);
}

inline u64 backup_offset_map(i64 d_i, std::size_t k, u64 modulus) {
  return static_cast<u64>(d_i + static_cast<i64>(k * modulus));
}

inline i64 backup_offset_unmap(u64 stored, std::size_t k, u64 modulus) {
  return static_cast<i64>(stored) - static_cast<i64>(k * modulus);
}

// t-of-k Shamir backup of one party's exponent fragment, one sub-share per
// holder. The fragment is offset-mapped into [0, Q) to handle negatives.
inline std::vector<ShareBackup> replicate_share(i64 d_i, int owner, std::size_t t, std::size_t k,
                                                u64 backup_modulus, u64 rsa_modulus,
                                                RandomSource& rng) {
  require(t >= 2 && t <= k, Err::ThresholdOutOfRange, "backup threshold out of range");
  require(backup_modulus > 2 * static_cast<u64>(k) * rsa_modulus, Err::FieldTooSmall,
          "backup field cannot embed offset fragments");
  PrimeField field(backup_modulus);
  u64 mapped = backup_offset_map(d_i, k, rsa_modulus);
  auto shares = shamir_share(mapped, t, k, field, rng);
  std::vector<ShareBackup> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    out.push_back({owner, static_cast<int>(j + 1), shares.points[j]});
  }
  return out;
}

// Rebuilds an absent party's fragment from >= t distinct backups.
inline i64 recover_absent_share(std::span<const ShareBackup> backups, std::size_t t,
                                u64 backup_modulus, std::size_t k, u64 rsa_modulus) {
  std::vector<SharePoint> points;
  points.reserve(backups.size());
  for (const auto& b : backups) points.push_back(b.sub_share);
  PrimeField field(backup_modulus);
  u64 stored = shamir_reconstruct(points, t, field);
  return backup_offset_unmap(stored, k, rsa_modulus);
}

inline u64 recover_absent_partial(std::span<const ShareBackup> backups, std::size_t t,
                                  u64 backup_modulus, std::size_t k, u64 rsa_modulus,
                                  u64 ciphertext) {
  i64 d_absent = recover_absent_share(backups, t, backup_modulus, k, rsa_modulus);
  return partial_decrypt(ciphertext, d_absent, rsa_modulus);
}

}  // namespace tidm
