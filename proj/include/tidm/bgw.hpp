#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tidm/error.hpp"
#include "tidm/field.hpp"
#include "tidm/shamir.hpp"

namespace tidm {

// What one party observes during a shared-product run: the input and mask
// shares it received from each peer, and the opening broadcasts.
struct BgwPartyView {
  struct Received {
    std::size_t from = 0;  // 1-based party id
    u64 a_share = 0;
    u64 b_share = 0;
    u64 zero_share = 0;
  };
  std::vector<Received> received;
  std::vector<u64> broadcasts;  // w_1..w_k, indexed by sender - 1
};

struct BgwResult {
  u64 product = 0;
  std::vector<BgwPartyView> views;  // indexed by party - 1
};

// Honest-majority shared multiplication, simulated in one process: party i
// shares a_i and b_i with degree floor((k-1)/2) polynomials, every party adds
// a degree-(k-1) zero sharing, broadcasts its point of (sum f_a)(sum f_b) + h,
// and the opening polynomial is interpolated at 0. Requires k >= 3 so the
// masked product stays interpolable from k broadcasts.
inline BgwResult bgw_shared_product(std::span<const u64> per_party_a,
                                    std::span<const u64> per_party_b, const PrimeField& field,
                                    RandomSource& rng) {
  const std::size_t k = per_party_a.size();
  require(per_party_b.size() == k, Err::InvalidConfig, "input vectors differ in length");
  require(k >= 3, Err::PartyCountTooSmall, "shared product needs k >= 3 parties");

  u128 sum_a = 0, sum_b = 0;
  for (u64 v : per_party_a) sum_a += v;
  for (u64 v : per_party_b) sum_b += v;
  bool product_fits = sum_a == 0 || sum_b <= ~u128{0} / sum_a;
  require(product_fits && sum_a * sum_b < static_cast<u128>(field.modulus()), Err::FieldTooSmall,
          "field modulus does not exceed the product");

  const std::size_t degree = (k - 1) / 2;

  // Input sharings (degree floor((k-1)/2)) and zero maskings (degree k-1).
  std::vector<ShareSet> a_shares, b_shares, masks;
  a_shares.reserve(k);
  b_shares.reserve(k);
  masks.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    a_shares.push_back(shamir_share(field.reduce(per_party_a[i]), degree + 1, k, field, rng));
    b_shares.push_back(shamir_share(field.reduce(per_party_b[i]), degree + 1, k, field, rng));
    masks.push_back(zero_share(k - 1, k, field, rng));
  }

  BgwResult result;
  result.views.resize(k);

  // Each party j aggregates its received points and broadcasts the masked
  // local product.
  std::vector<SharePoint> opening;
  opening.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    u64 aj = 0, bj = 0, hj = 0;
    for (std::size_t i = 0; i < k; ++i) {
      u64 fa = a_shares[i].points[j].value;
      u64 fb = b_shares[i].points[j].value;
      u64 fz = masks[i].points[j].value;
      aj = field.add(aj, fa);
      bj = field.add(bj, fb);
      hj = field.add(hj, fz);
      if (i != j) result.views[j].received.push_back({i + 1, fa, fb, fz});
    }
    u64 wj = field.add(field.mul(aj, bj), hj);
    opening.push_back({static_cast<u64>(j + 1), wj});
  }
  for (std::size_t j = 0; j < k; ++j) {
    result.views[j].broadcasts.reserve(k);
    for (const auto& p : opening) result.views[j].broadcasts.push_back(p.value);
  }

  result.product = lagrange_at_zero(opening, field);
  return result;
}

}  // namespace tidm
