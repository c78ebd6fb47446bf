#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tidm/access_tree.hpp"
#include "tidm/canonical.hpp"
#include "tidm/error.hpp"
#include "tidm/json_util.hpp"
#include "tidm/sha256.hpp"

namespace tidm {

struct BundleItem {
  std::string label;
  double sensitivity = 0.0;  // in [0, 1]
  Bytes ciphertext;          // sealed claim: nonce || ct || tag
};

// Session-key material carried inside the bundle: the key is Shamir-shared
// across the roster and each party's point is sealed under that party's
// sealing key, so only the roster can release it.
struct CredentialCiphertext {
  std::vector<int> roster;
  std::size_t threshold = 0;
  std::vector<std::pair<int, Bytes>> sealed_shares;  // (party, sealed SharePoint)
  Bytes masked_key;   // K xor SHA-256(canonical(field secret))
  Bytes nonce;        // bundle-level freshness nonce
  u64 share_modulus = 0;
};

// Self-protecting container: encrypted claims plus the policy metadata and
// thresholds that drive apoptosis/evaporation on arrival at a host.
struct ActiveBundle {
  std::string bundle_id;
  std::vector<BundleItem> items;  // kept sorted by label
  std::optional<AccessTree> access_tree;
  CredentialCiphertext credential;
  double apoptosis_threshold = 0.0;   // Ta
  double evaporation_threshold = 0.0; // Te
  i64 creation_epoch = 0;
  bool tombstone = false;
  Digest integrity_digest{};
};

struct HostProfile {
  std::string host_id;
  double trust_level = 0.0;  // in [0, 1]
};

inline Canon bundle_body_canon(const ActiveBundle& ab) {
  Canon::Object o;
  o.emplace("bundleId", Canon(ab.bundle_id));
  Canon::Array items;
  for (const auto& it : ab.items) {
    Canon::Object item;
    item.emplace("label", Canon(it.label));
    item.emplace("sensitivity", Canon(it.sensitivity));
    item.emplace("ciphertext", Canon(it.ciphertext));
    items.push_back(Canon(std::move(item)));
  }
  o.emplace("items", Canon(std::move(items)));
  o.emplace("accessTree", ab.access_tree ? ab.access_tree->to_canon() : Canon(nullptr));
  Canon::Object cred;
  Canon::Array roster;
  for (int p : ab.credential.roster) roster.push_back(Canon(static_cast<i64>(p)));
  cred.emplace("roster", Canon(std::move(roster)));
  cred.emplace("threshold", Canon(static_cast<u64>(ab.credential.threshold)));
  Canon::Array sealed;
  for (const auto& [party, blob] : ab.credential.sealed_shares) {
    Canon::Object s;
    s.emplace("party", Canon(static_cast<i64>(party)));
    s.emplace("sealed", Canon(blob));
    sealed.push_back(Canon(std::move(s)));
  }
  cred.emplace("sealedShares", Canon(std::move(sealed)));
  cred.emplace("maskedKey", Canon(ab.credential.masked_key));
  cred.emplace("nonce", Canon(ab.credential.nonce));
  cred.emplace("shareModulus", Canon(ab.credential.share_modulus));
  o.emplace("credential", Canon(std::move(cred)));
  o.emplace("apoptosisThreshold", Canon(ab.apoptosis_threshold));
  o.emplace("evaporationThreshold", Canon(ab.evaporation_threshold));
  o.emplace("creationEpoch", Canon(ab.creation_epoch));
  o.emplace("tombstone", Canon(ab.tombstone));
  return Canon(std::move(o));
}

inline Digest bundle_digest(const ActiveBundle& ab) { return sha256(canon_encode(bundle_body_canon(ab))); }

inline void normalize_bundle(ActiveBundle& ab) {
  std::sort(ab.items.begin(), ab.items.end(),
            [](const BundleItem& a, const BundleItem& b) { return a.label < b.label; });
}

inline void reseal_bundle(ActiveBundle& ab) {
  normalize_bundle(ab);
  ab.integrity_digest = bundle_digest(ab);
}

inline ActiveBundle make_bundle(std::string bundle_id, std::vector<BundleItem> items,
                                std::optional<AccessTree> tree, CredentialCiphertext credential,
                                double apoptosis_threshold, double evaporation_threshold,
                                i64 creation_epoch) {
  require(apoptosis_threshold >= 0.0 && evaporation_threshold <= 1.0 &&
              apoptosis_threshold <= evaporation_threshold,
          Err::ThresholdViolation, "need 0 <= Ta <= Te <= 1");
  ActiveBundle ab;
  ab.bundle_id = std::move(bundle_id);
  ab.items = std::move(items);
  ab.access_tree = std::move(tree);
  ab.credential = std::move(credential);
  ab.apoptosis_threshold = apoptosis_threshold;
  ab.evaporation_threshold = evaporation_threshold;
  ab.creation_epoch = creation_epoch;
  reseal_bundle(ab);
  return ab;
}

inline bool verify_integrity(const ActiveBundle& ab) { return bundle_digest(ab) == ab.integrity_digest; }

// Total clean deletion: ciphertexts are zeroed, then the items dropped.
inline ActiveBundle apoptose(const ActiveBundle& ab) {
  ActiveBundle out = ab;
  for (auto& item : out.items) std::fill(item.ciphertext.begin(), item.ciphertext.end(), 0);
  out.items.clear();
  for (auto& [party, blob] : out.credential.sealed_shares) {
    (void)party;
    std::fill(blob.begin(), blob.end(), 0);
  }
  out.credential.sealed_shares.clear();
  std::fill(out.credential.masked_key.begin(), out.credential.masked_key.end(), 0);
  out.credential.masked_key.clear();
  out.tombstone = true;
  reseal_bundle(out);
  return out;
}

// Partial removal: items more sensitive than the host's trust level go away.
inline ActiveBundle evaporate(const ActiveBundle& ab, double trust_level) {
  require(trust_level >= ab.apoptosis_threshold && trust_level < ab.evaporation_threshold,
          Err::ThresholdViolation, "trust level outside [Ta, Te)");
  ActiveBundle out = ab;
  for (auto& item : out.items) {
    if (item.sensitivity > trust_level) {
      std::fill(item.ciphertext.begin(), item.ciphertext.end(), 0);
    }
  }
  std::erase_if(out.items,
                [&](const BundleItem& item) { return item.sensitivity > trust_level; });
  reseal_bundle(out);
  return out;
}

enum class ArrivalKind { Apoptosis, Evaporate, Full };

struct ArrivalDecision {
  ArrivalKind kind = ArrivalKind::Apoptosis;
  std::vector<std::string> retained_labels;
  bool integrity_failure = false;
};

// Trust gate on arrival. An integrity failure is treated as apoptosis.
inline ArrivalDecision evaluate_arrival(const ActiveBundle& ab, const HostProfile& host) {
  ArrivalDecision decision;
  if (!verify_integrity(ab)) {
    decision.integrity_failure = true;
    return decision;
  }
  double trust = host.trust_level;
  if (trust < ab.apoptosis_threshold) return decision;
  if (trust >= ab.evaporation_threshold) {
    decision.kind = ArrivalKind::Full;
    for (const auto& item : ab.items) decision.retained_labels.push_back(item.label);
    return decision;
  }
  decision.kind = ArrivalKind::Evaporate;
  for (const auto& item : ab.items) {
    if (item.sensitivity <= trust) decision.retained_labels.push_back(item.label);
  }
  return decision;
}

// Applies an arrival decision, producing the bundle the host actually keeps.
inline ActiveBundle apply_arrival(const ActiveBundle& ab, const ArrivalDecision& decision,
                                  double trust_level) {
  switch (decision.kind) {
    case ArrivalKind::Apoptosis:
      return apoptose(ab);
    case ArrivalKind::Evaporate:
      return evaporate(ab, trust_level);
    case ArrivalKind::Full:
      return ab;
  }
  return ab;
}

// --- .ab.json file form -------------------------------------------------------

inline Canon bundle_to_canon(const ActiveBundle& ab) {
  Canon body = bundle_body_canon(ab);
  Canon::Object o;
  // Re-emit the body fields plus the digest; keys sort canonically anyway.
  o.emplace("bundle", std::move(body));
  o.emplace("integrityDigest", Canon(ab.integrity_digest));
  return Canon(std::move(o));
}

inline std::string bundle_to_json(const ActiveBundle& ab) { return canon_encode(bundle_to_canon(ab)); }

inline ActiveBundle bundle_from_json(const Json& j) {
  require(j.is_object() && j.contains("bundle") && j.contains("integrityDigest"),
          Err::ParseError, "not a bundle file");
  const Json& b = j.at("bundle");
  ActiveBundle ab;
  ab.bundle_id = b.at("bundleId").get<std::string>();
  for (const auto& item : b.at("items")) {
    BundleItem it;
    it.label = item.at("label").get<std::string>();
    it.sensitivity = item.at("sensitivity").get<double>();
    it.ciphertext = get_hex_bytes(item.at("ciphertext"));
    ab.items.push_back(std::move(it));
  }
  if (!b.at("accessTree").is_null()) ab.access_tree = AccessTree::from_json(b.at("accessTree"));
  const Json& cred = b.at("credential");
  for (const auto& p : cred.at("roster")) ab.credential.roster.push_back(static_cast<int>(get_i64(p)));
  ab.credential.threshold = get_u64(cred.at("threshold"));
  for (const auto& s : cred.at("sealedShares")) {
    ab.credential.sealed_shares.emplace_back(static_cast<int>(get_i64(s.at("party"))),
                                             get_hex_bytes(s.at("sealed")));
  }
  ab.credential.masked_key = get_hex_bytes(cred.at("maskedKey"));
  ab.credential.nonce = get_hex_bytes(cred.at("nonce"));
  ab.credential.share_modulus = get_u64(cred.at("shareModulus"));
  ab.apoptosis_threshold = b.at("apoptosisThreshold").get<double>();
  ab.evaporation_threshold = b.at("evaporationThreshold").get<double>();
  ab.creation_epoch = get_i64(b.at("creationEpoch"));
  ab.tombstone = b.at("tombstone").get<bool>();
  auto digest_bytes = get_hex_bytes(j.at("integrityDigest"));
  require(digest_bytes.size() == ab.integrity_digest.size(), Err::ParseError, "bad digest length");
  std::copy(digest_bytes.begin(), digest_bytes.end(), ab.integrity_digest.begin());
  require(!ab.tombstone || ab.items.empty(), Err::ParseError, "tombstone bundle carries items");
  require(ab.apoptosis_threshold <= ab.evaporation_threshold, Err::ParseError,
          "thresholds out of order");
  return ab;
}

inline ActiveBundle bundle_from_json_text(std::string_view text) {
  return bundle_from_json(parse_json(text));
}

}  // namespace tidm
