#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tidm/access_tree.hpp"
#include "tidm/canonical.hpp"
#include "tidm/error.hpp"
#include "tidm/sha256.hpp"

namespace tidm {

inline Digest fold_tag(const Digest& parent_tag, std::string_view child_user) {
  Sha256 h;
  h.update(std::span<const std::uint8_t>(parent_tag.data(), parent_tag.size()));
  h.update("dlg");
  h.update(canon_encode(Canon(child_user)));
  return h.finish();
}

// Per-authority-party tag chain. The root tag binds one authority's master
// fragment to the first grantee and the attribute; each delegation folds the
// child identity in, so authorities can verify chains from mk_i alone.
inline Digest issue_tag(std::span<const std::uint8_t> mk_i, std::string_view root_user,
                        const AttributeId& attribute, std::span<const std::string> fold_ids) {
  Sha256 h;
  h.update(mk_i);
  h.update(canon_encode(Canon(root_user)));
  h.update(canon_encode(Canon(attribute.canonical())));
  Digest tag = h.finish();
  for (const auto& child : fold_ids) {
    tag = fold_tag(tag, child);
  }
  return tag;
}

struct AttributeKey {
  std::string user_id;
  std::set<AttributeId> attributes;
  std::string rank;
  i64 epoch = 0;
  // tags[attribute][i] is the tag issued by authority party i+1.
  std::map<AttributeId, std::vector<Digest>> tags;
  std::vector<std::string> delegation_chain;  // ancestor user ids, oldest first

  // Identity path from the original grantee down to this key's holder.
  std::vector<std::string> identity_path() const {
    auto path = delegation_chain;
    path.push_back(user_id);
    return path;
  }
};

struct RevocationList {
  std::uint64_t version = 0;
  std::set<std::string> revoked_users;
  std::set<std::pair<std::string, AttributeId>> revoked_grants;
  int maintainer_party = 1;
};

struct RevocationTarget {
  std::string user_id;
  std::optional<AttributeId> attribute;  // absent: revoke the user entirely
};

// Single-writer mutation; replicas only ever receive copies.
inline void revoke(RevocationList& list, const RevocationTarget& target, int caller_party) {
  require(caller_party == list.maintainer_party, Err::NotMaintainer,
          "revocation list is maintained by party " + std::to_string(list.maintainer_party));
  if (target.attribute) {
    list.revoked_grants.emplace(target.user_id, *target.attribute);
  } else {
    list.revoked_users.insert(target.user_id);
  }
  list.version += 1;
}

inline bool revocation_blocks(const RevocationList& list, const AttributeKey& key,
                              const AttributeId& attribute) {
  for (const auto& member : key.identity_path()) {
    if (list.revoked_users.contains(member)) return true;
    if (list.revoked_grants.contains({member, attribute})) return true;
  }
  return false;
}

inline bool user_revoked(const RevocationList& list, const AttributeKey& key) {
  for (const auto& member : key.identity_path()) {
    if (list.revoked_users.contains(member)) return true;
  }
  return false;
}

// Does the key's tag for this attribute match what party i would have
// issued along the delegation chain? Revocation is checked separately.
inline bool tag_matches(std::size_t party_index, std::span<const std::uint8_t> mk_i,
                        const AttributeKey& key, const AttributeId& attribute) {
  auto it = key.tags.find(attribute);
  if (it == key.tags.end() || party_index >= it->second.size()) return false;
  auto path = key.identity_path();
  Digest expected =
      issue_tag(mk_i, path.front(), attribute, std::span<const std::string>(path).subspan(1));
  return expected == it->second[party_index];
}

// Authority party i's check: recompute the expected tag chain from mk_i and
// compare, then consult the revocation replica. A replica older than the
// maintainer's current version fails closed.
inline bool verify_attribute_tag(std::size_t party_index, std::span<const std::uint8_t> mk_i,
                                 const AttributeKey& key, const AttributeId& attribute,
                                 const RevocationList& replica,
                                 std::uint64_t maintainer_version) {
  require(replica.version >= maintainer_version, Err::StaleRevocationList,
          "replica at version " + std::to_string(replica.version) + ", maintainer at " +
              std::to_string(maintainer_version));
  if (!tag_matches(party_index, mk_i, key, attribute)) return false;
  return !revocation_blocks(replica, key, attribute);
}

// Offline delegation: the parent folds its tags with the child identity and
// hands over a key for a subset of its attributes. No authority contact.
inline AttributeKey delegate_key(const AttributeKey& parent, std::string_view child_user,
                                 const std::set<AttributeId>& subset) {
  require(child_user != parent.user_id, Err::SelfDelegation, "cannot delegate to self");
  for (const auto& ancestor : parent.delegation_chain) {
    require(child_user != ancestor, Err::SelfDelegation, "delegation chain would cycle");
  }
  for (const auto& a : subset) {
    require(parent.attributes.contains(a), Err::NotASubset,
            "attribute " + a.canonical() + " not held by delegator");
  }

  AttributeKey child;
  child.user_id = std::string(child_user);
  child.attributes = subset;
  child.rank = parent.rank;
  child.epoch = parent.epoch;
  child.delegation_chain = parent.delegation_chain;
  child.delegation_chain.push_back(parent.user_id);
  for (const auto& a : subset) {
    std::vector<Digest> folded;
    for (const auto& tag : parent.tags.at(a)) folded.push_back(fold_tag(tag, child_user));
    child.tags.emplace(a, std::move(folded));
  }
  return child;
}

}  // namespace tidm
