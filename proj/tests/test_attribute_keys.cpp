#include <doctest.h>

#include <array>
#include <set>
#include <vector>

#include <tidm/attribute_keys.hpp>

using namespace tidm;

namespace {

std::array<std::uint8_t, 32> master_fragment(std::uint8_t fill) {
  std::array<std::uint8_t, 32> mk{};
  mk.fill(fill);
  return mk;
}

const AttributeId kLecturer = {"dept", "lecturer"};
const AttributeId kMember = {"dept", "member of security lab"};
const AttributeId kHead = {"dept", "head of security lab"};

AttributeKey issue_root_key(const std::string& user, const std::set<AttributeId>& attributes,
                            const std::vector<std::array<std::uint8_t, 32>>& mks) {
  AttributeKey key;
  key.user_id = user;
  key.attributes = attributes;
  key.rank = "regular";
  for (const auto& attr : attributes) {
    std::vector<Digest> tags;
    for (const auto& mk : mks) tags.push_back(issue_tag(mk, user, attr, {}));
    key.tags.emplace(attr, std::move(tags));
  }
  return key;
}

}  // namespace

TEST_CASE("tag issuance is deterministic and chain folding matches") {
  auto mk = master_fragment(7);
  Digest root = issue_tag(mk, "alice", kLecturer, {});
  CHECK(root == issue_tag(mk, "alice", kLecturer, {}));

  std::vector<std::string> chain = {"bob"};
  Digest delegated = issue_tag(mk, "alice", kLecturer, chain);
  CHECK(delegated == fold_tag(root, "bob"));
  CHECK(delegated != root);

  auto other_mk = master_fragment(9);
  CHECK(issue_tag(other_mk, "alice", kLecturer, {}) != root);
}

TEST_CASE("verification accepts valid keys and rejects forgeries") {
  std::vector<std::array<std::uint8_t, 32>> mks = {master_fragment(1), master_fragment(2),
                                                   master_fragment(3)};
  auto key = issue_root_key("alice", {kLecturer, kMember}, mks);
  RevocationList arl;

  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(verify_attribute_tag(i, mks[i], key, kLecturer, arl, arl.version));
    CHECK(verify_attribute_tag(i, mks[i], key, kMember, arl, arl.version));
  }
  CHECK_FALSE(verify_attribute_tag(0, mks[0], key, kHead, arl, arl.version));

  auto forged = key;
  forged.tags[kLecturer][1][0] ^= 0x01;
  CHECK_FALSE(verify_attribute_tag(1, mks[1], forged, kLecturer, arl, arl.version));
  CHECK(verify_attribute_tag(0, mks[0], forged, kLecturer, arl, arl.version));
}

TEST_CASE("delegation restricts attributes and folds tags offline") {
  std::vector<std::array<std::uint8_t, 32>> mks = {master_fragment(1), master_fragment(2),
                                                   master_fragment(3)};
  auto alice = issue_root_key("alice", {kHead, kLecturer, kMember}, mks);

  auto bob = delegate_key(alice, "bob", {kLecturer, kMember});
  CHECK(bob.user_id == "bob");
  CHECK(bob.delegation_chain == std::vector<std::string>{"alice"});
  CHECK(bob.attributes == std::set<AttributeId>{kLecturer, kMember});

  RevocationList arl;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(verify_attribute_tag(i, mks[i], bob, kLecturer, arl, arl.version));
    CHECK(verify_attribute_tag(i, mks[i], bob, kMember, arl, arl.version));
  }

  CHECK_THROWS_WITH_AS((void)delegate_key(bob, "carol", {kHead}), doctest::Contains("NotASubset"),
                       Error);
  CHECK_THROWS_WITH_AS((void)delegate_key(alice, "alice", {kLecturer}),
                       doctest::Contains("SelfDelegation"), Error);
  CHECK_THROWS_WITH_AS((void)delegate_key(bob, "alice", {kLecturer}),
                       doctest::Contains("SelfDelegation"), Error);

  // Two-level chains verify too.
  auto carol = delegate_key(bob, "carol", {kLecturer});
  CHECK(carol.delegation_chain == std::vector<std::string>{"alice", "bob"});
  CHECK(verify_attribute_tag(0, mks[0], carol, kLecturer, arl, arl.version));
}

TEST_CASE("revocation cascades over delegation chains and is absorbing") {
  std::vector<std::array<std::uint8_t, 32>> mks = {master_fragment(1), master_fragment(2),
                                                   master_fragment(3)};
  auto alice = issue_root_key("alice", {kHead, kLecturer, kMember}, mks);
  auto bob = delegate_key(alice, "bob", {kLecturer, kMember});

  RevocationList arl;
  revoke(arl, {"bob", std::nullopt}, arl.maintainer_party);
  CHECK(arl.version == 1);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK_FALSE(verify_attribute_tag(i, mks[i], bob, kLecturer, arl, arl.version));
    CHECK(verify_attribute_tag(i, mks[i], alice, kLecturer, arl, arl.version));
  }

  // Revoking the ancestor kills every descendant key.
  RevocationList arl2;
  revoke(arl2, {"alice", std::nullopt}, arl2.maintainer_party);
  CHECK_FALSE(verify_attribute_tag(0, mks[0], bob, kLecturer, arl2, arl2.version));
  CHECK_FALSE(verify_attribute_tag(0, mks[0], alice, kLecturer, arl2, arl2.version));

  // Grant-level revocation hits only that attribute, cascading to delegates.
  RevocationList arl3;
  revoke(arl3, {"alice", kMember}, arl3.maintainer_party);
  CHECK(verify_attribute_tag(0, mks[0], bob, kLecturer, arl3, arl3.version));
  CHECK_FALSE(verify_attribute_tag(0, mks[0], bob, kMember, arl3, arl3.version));
  CHECK_FALSE(verify_attribute_tag(0, mks[0], alice, kMember, arl3, arl3.version));
}

TEST_CASE("revocation list bookkeeping") {
  RevocationList arl;
  CHECK_THROWS_WITH_AS(revoke(arl, {"bob", std::nullopt}, 2), doctest::Contains("NotMaintainer"),
                       Error);
  revoke(arl, {"bob", std::nullopt}, 1);
  revoke(arl, {"bob", std::nullopt}, 1);
  CHECK(arl.version == 2);  // versions increase even for repeated targets

  std::uint64_t last = 0;
  for (int i = 0; i < 5; ++i) {
    revoke(arl, {"user" + std::to_string(i), std::nullopt}, 1);
    CHECK(arl.version > last);
    last = arl.version;
  }
}

TEST_CASE("stale replicas fail closed") {
  std::vector<std::array<std::uint8_t, 32>> mks = {master_fragment(1)};
  auto key = issue_root_key("alice", {kLecturer}, mks);
  RevocationList replica;  // version 0
  CHECK_THROWS_WITH_AS(
      (void)verify_attribute_tag(0, mks[0], key, kLecturer, replica, replica.version + 1),
      doctest::Contains("StaleRevocationList"), Error);
}
