#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "tidm/canonical.hpp"
#include "tidm/error.hpp"
#include "tidm/field.hpp"
#include "tidm/rng.hpp"

namespace tidm {

struct SharePoint {
  u64 index = 0;  // evaluation point, never 0
  u64 value = 0;  // field element

  bool operator==(const SharePoint&) const = default;
  auto operator<=>(const SharePoint&) const = default;
};

struct ShareSet {
  std::size_t threshold = 0;
  std::size_t count = 0;
  u64 modulus = 0;
  std::vector<SharePoint> points;
};

// Canonical digest of one share: SHA-256 over the serialization of
// (index, value, modulus). Used to detect duplicate shares on the wire.
inline Digest share_digest(const SharePoint& p, std::optional<u64> modulus) {
  Canon::Array tuple{Canon(p.index), Canon(p.value)};
  if (modulus) tuple.emplace_back(*modulus);
  return canon_sha256(Canon(std::move(tuple)));
}

// Removes exact duplicates (first occurrence kept, order preserved). Two
// points sharing an index with different values are contradictory.
inline std::vector<SharePoint> dedup_shares(std::span<const SharePoint> points,
                                            std::optional<u64> modulus = std::nullopt) {
  std::vector<SharePoint> out;
  std::set<Digest> seen;
  std::map<u64, u64> value_at_index;
  for (const auto& p : points) {
    auto it = value_at_index.find(p.index);
    if (it != value_at_index.end()) {
      require(it->second == p.value, Err::IndexCollision,
              "contradictory shares at index " + std::to_string(p.index));
    } else {
      value_at_index.emplace(p.index, p.value);
    }
    if (seen.insert(share_digest(p, modulus)).second) out.push_back(p);
  }
  return out;
}

// Lagrange interpolation at x = 0 over the given points; indices must be
// pairwise distinct and nonzero.
inline u64 lagrange_at_zero(std::span<const SharePoint> points, const PrimeField& field) {
  u64 acc = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    u64 num = 1, den = 1;
    u64 xi = field.reduce(points[i].index);
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      u64 xj = field.reduce(points[j].index);
      num = field.mul(num, xj);
      den = field.mul(den, field.sub(xj, xi));
    }
    u64 term = field.mul(points[i].value, field.mul(num, field.inv(den)));
    acc = field.add(acc, term);
  }
  return acc;
}

// Degree-(t-1) polynomial sharing of `secret` over `field`, points at x=1..n.
// Coefficients 1..t-1 are drawn from rng in ascending order.
inline ShareSet shamir_share(u64 secret, std::size_t t, std::size_t n, const PrimeField& field,
                             RandomSource& rng) {
  require(t >= 1 && t <= n, Err::ThresholdOutOfRange,
          "threshold " + std::to_string(t) + " of " + std::to_string(n));
  require(secret < field.modulus(), Err::SecretOutOfField, "secret exceeds field modulus");
  require(n < field.modulus(), Err::FieldTooSmall, "share count exceeds field size");

  std::vector<u64> coeffs(t);
  coeffs[0] = secret;
  for (std::size_t i = 1; i < t; ++i) coeffs[i] = rng.below(field.modulus());

  ShareSet out{t, n, field.modulus(), {}};
  out.points.reserve(n);
  for (u64 x = 1; x <= n; ++x) {
    u64 y = 0;
    for (std::size_t i = coeffs.size(); i-- > 0;) y = field.add(field.mul(y, x), coeffs[i]);
    out.points.push_back({x, y});
  }
  return out;
}

// Interpolates the secret from >= t distinct points. When more are supplied,
// the t with smallest indices are used (deterministic tie-break).
inline u64 shamir_reconstruct(std::span<const SharePoint> points, std::size_t t,
                              const PrimeField& field) {
  auto distinct = dedup_shares(points, field.modulus());
  require(distinct.size() >= t, Err::InsufficientShares,
          std::to_string(distinct.size()) + " distinct shares, need " + std::to_string(t));
  std::sort(distinct.begin(), distinct.end(),
            [](const SharePoint& a, const SharePoint& b) { return a.index < b.index; });
  distinct.resize(t);
  return lagrange_at_zero(distinct, field);
}

// Random polynomial of the given degree with h(0) = 0, used as the masking
// term in the shared-product protocol.
inline ShareSet zero_share(std::size_t degree, std::size_t n, const PrimeField& field,
                           RandomSource& rng) {
  require(degree >= 1 && n > degree, Err::ThresholdOutOfRange,
          "zero sharing needs degree >= 1 and n > degree");
  require(n < field.modulus(), Err::FieldTooSmall, "share count exceeds field size");

  std::vector<u64> coeffs(degree + 1, 0);
  for (std::size_t i = 1; i <= degree; ++i) coeffs[i] = rng.below(field.modulus());

  ShareSet out{degree + 1, n, field.modulus(), {}};
  out.points.reserve(n);
  for (u64 x = 1; x <= n; ++x) {
    u64 y = 0;
    for (std::size_t i = coeffs.size(); i-- > 0;) y = field.add(field.mul(y, x), coeffs[i]);
    out.points.push_back({x, y});
  }
  return out;
}

}  // namespace tidm
