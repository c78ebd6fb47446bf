#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include <tidm/idm.hpp>

using namespace tidm;

namespace {

const AttributeId kHead = {"dept", "head of security lab"};
const AttributeId kLecturer = {"dept", "lecturer"};
const AttributeId kMember = {"dept", "member of security lab"};

KeygenConfig fast_cfg() {
  KeygenConfig cfg;
  cfg.parties = 3;
  cfg.prime_share_bits = 16;
  cfg.biprimality_rounds = 40;
  return cfg;
}

IdmSystem make_system(u64 seed = 7) {
  return IdmSystem::setup(fast_cfg(), RankPolicy::standard(3), {}, seed);
}

IdentityRecord alice_record() {
  return {"alice", {{"name", "Alice A."}, {"dob", "1980-01-02"}, {"ssn", "078-05-1120"}}, "senior"};
}

IdentityRecord bob_record() {
  return {"bob", {{"name", "Bob B."}, {"dob", "1991-03-04"}}, "regular"};
}

EncryptOptions lab_options() {
  EncryptOptions opt;
  opt.sensitivity = {{"ssn", 0.9}, {"name", 0.2}, {"dob", 0.5}};
  opt.creation_epoch = 90;
  return opt;
}

AccessTree lab_tree() {
  return AccessTree::all_of({AccessTree::attribute(kLecturer), AccessTree::attribute(kMember)});
}

}  // namespace

TEST_CASE("setup produces a verified key and per-party master fragments") {
  auto sys = make_system();
  CHECK(sys.pk().rsa.modulus > 2);
  CHECK(sys.pk().rsa.exponent == 65537);
  CHECK(sys.pk().parties == 3);
  CHECK(sys.pk().share_field_modulus == 2305843009213693967ull);
  CHECK(sys.party(1).mk != sys.party(2).mk);
  CHECK(sys.party(1).seal_key != sys.party(2).seal_key);

  // Rank policy invariants are rejected up front.
  RankPolicy bad;
  bad.required = {{"senior", 5}};
  CHECK_THROWS_AS((void)IdmSystem::setup(fast_cfg(), bad, {}, 7), Error);
  KeygenConfig two = fast_cfg();
  two.parties = 2;
  CHECK_THROWS_AS((void)IdmSystem::setup(two, RankPolicy::standard(2), {}, 7), Error);
}

TEST_CASE("enrollment decrypts through partials and stores the record") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(21);
  sys.enroll(alice_record(), rng);
  CHECK(sys.is_enrolled("alice"));
  CHECK_FALSE(sys.is_enrolled("bob"));
  for (int id = 1; id <= 3; ++id) {
    CHECK(sys.party(id).enrolled.at("alice").claims.at("name") == "Alice A.");
  }
}

TEST_CASE("worked enrollment on the N = 437 key set") {
  // Restore a cluster holding the hand-computed shares d = (329, -7, -7),
  // c = 2 for N = 437, e = 5.
  PublicParams pk;
  pk.rsa = {437, 5};
  pk.parties = 3;
  pk.share_field_modulus = default_share_field().modulus();
  pk.backup_modulus = backup_field_modulus(3, 437);
  pk.backup_threshold = 2;
  pk.rank_policy = RankPolicy::standard(3);
  std::vector<AuthorityParty> parties(3);
  const i64 d[3] = {329, -7, -7};
  for (int i = 0; i < 3; ++i) {
    parties[static_cast<std::size_t>(i)].id = i + 1;
    parties[static_cast<std::size_t>(i)].rsa_share = {i + 1, 0, 0, 0, d[i], 2};
  }
  auto sys = IdmSystem::restore(pk, std::move(parties));

  // Scripted rng: key value 2 (ciphertext 2^5 = 32), then 16 nonce bytes.
  std::vector<u64> script = {0};
  for (u64 i = 0; i < 16; ++i) script.push_back(i);
  ScriptedRandom rng(script);
  auto request = IdmSystem::make_enrollment_request(bob_record(), pk.rsa, rng);
  CHECK(request.key_ciphertext == 32);
  sys.process_enrollment(request);
  CHECK(sys.is_enrolled("bob"));
  CHECK(sys.party(2).enrolled.at("bob").claims.at("name") == "Bob B.");
}

TEST_CASE("tampered enrollment payloads are rejected") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(20);
  auto request = IdmSystem::make_enrollment_request(alice_record(), sys.pk().rsa, rng);
  request.sealed_payload[20] ^= 0x01;
  CHECK_THROWS_WITH_AS(sys.process_enrollment(request), doctest::Contains("IntegrityFailure"),
                       Error);
  CHECK_FALSE(sys.is_enrolled("alice"));
}

TEST_CASE("enrollment with a crashed party recovers the missing partial") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(22);
  sys.crash_party(3);
  CHECK_THROWS_AS(sys.crash_party(3), Error);
  sys.enroll(alice_record(), rng);
  CHECK(sys.is_enrolled("alice"));
  CHECK(sys.metrics().recoveries >= 1);
  bool recovery_logged = false;
  for (const auto& m : sys.transcript()) {
    if (m.kind == "idm/recovered-partial") recovery_logged = true;
  }
  CHECK(recovery_logged);
}

TEST_CASE("rank policy drives the sharing threshold") {
  RankPolicy policy;
  policy.required = {{"senior", 4}, {"regular", 2}};
  policy.ordering = {"regular", "senior"};
  CHECK_NOTHROW(policy.validate(5));
  CHECK(policy.threshold_for("senior") == 4);
  CHECK(policy.threshold_for("regular") == 2);
  CHECK_THROWS_WITH_AS((void)policy.threshold_for("intern"), doctest::Contains("UnknownRank"),
                       Error);

  RankPolicy inverted;
  inverted.required = {{"senior", 2}, {"regular", 3}};
  inverted.ordering = {"regular", "senior"};
  CHECK_THROWS_AS(inverted.validate(5), Error);
}

TEST_CASE("encrypt seals one share per party and hides the session key") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(23);
  sys.enroll(alice_record(), rng);
  auto bundle = sys.encrypt(alice_record(), lab_tree(), lab_options(), rng);
  CHECK(verify_integrity(bundle));
  CHECK(bundle.credential.roster == std::vector<int>{1, 2, 3});
  CHECK(bundle.credential.sealed_shares.size() == 3);
  CHECK(bundle.credential.threshold == 2);  // senior -> k-1 = 2
  CHECK(bundle.items.size() == 3);
  for (const auto& item : bundle.items) {
    if (item.label == "ssn") CHECK(item.sensitivity == doctest::Approx(0.9));
  }
}

TEST_CASE("key issuance gives Alice and Bob the worked attribute sets") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(24);
  sys.enroll(alice_record(), rng);
  sys.enroll(bob_record(), rng);

  auto alice_key = sys.key_gen("alice", {kHead, kLecturer, kMember}, "senior", 90);
  CHECK(alice_key.attributes == std::set<AttributeId>{kHead, kLecturer, kMember});
  for (const auto& [attr, tags] : alice_key.tags) CHECK(tags.size() == 3);

  CHECK_THROWS_WITH_AS((void)sys.key_gen("mallory", {kLecturer}, "regular", 90),
                       doctest::Contains("UnknownUser"), Error);
}

TEST_CASE("authentication end to end with minimum disclosure") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(25);
  sys.enroll(alice_record(), rng);
  sys.enroll(bob_record(), rng);
  auto bundle = sys.encrypt(alice_record(), lab_tree(), lab_options(), rng);

  auto alice_key = sys.key_gen("alice", {kHead, kLecturer, kMember}, "senior", 90);
  auto bob_key = delegate_key(alice_key, "bob", {kLecturer, kMember});

  EvaluationContext ctx{95, "lab"};
  auto result = sys.authenticate(bundle, bob_key, ctx, {"name"}, rng);
  REQUIRE(result.verdict == AuthVerdict::Granted);
  CHECK(result.claims.size() == 1);
  CHECK(result.claims.at("name") == "Alice A.");
  REQUIRE(result.token.has_value());
  CHECK(verify_sso_token(*result.token, sys.pk().rsa, "sp/default", 95).ok);

  // The response must not contain other claims' plaintext.
  CHECK(result.claims.find("ssn") == result.claims.end());
  CHECK(result.claims.find("dob") == result.claims.end());

  // Request for a label that is not in the bundle.
  auto missing = sys.authenticate(bundle, bob_key, ctx, {"salary"}, rng);
  CHECK(missing.verdict == AuthVerdict::LabelUnknown);
}

TEST_CASE("policies with head-of-lab leaves deny Bob") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(26);
  sys.enroll(alice_record(), rng);
  sys.enroll(bob_record(), rng);
  auto head_tree =
      AccessTree::all_of({AccessTree::attribute(kHead), AccessTree::attribute(kMember)});
  auto bundle = sys.encrypt(alice_record(), head_tree, lab_options(), rng);

  auto alice_key = sys.key_gen("alice", {kHead, kLecturer, kMember}, "senior", 90);
  auto bob_key = delegate_key(alice_key, "bob", {kLecturer, kMember});

  EvaluationContext ctx{95, "lab"};
  CHECK(sys.authenticate(bundle, alice_key, ctx, {"name"}, rng).verdict ==
        AuthVerdict::Granted);
  CHECK(sys.authenticate(bundle, bob_key, ctx, {"name"}, rng).verdict ==
        AuthVerdict::PolicyDenied);
}

TEST_CASE("time and location attributes gate decryption") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(27);
  sys.enroll(alice_record(), rng);
  auto tree = AccessTree::all_of({AccessTree::attribute(kLecturer),
                                  AccessTree::time_window(90, 100),
                                  AccessTree::location({"lab"})});
  auto bundle = sys.encrypt(alice_record(), tree, lab_options(), rng);
  auto key = sys.key_gen("alice", {kLecturer}, "regular", 90);

  CHECK(sys.authenticate(bundle, key, {95, "lab"}, {"name"}, rng).verdict ==
        AuthVerdict::Granted);
  CHECK(sys.authenticate(bundle, key, {101, "lab"}, {"name"}, rng).verdict ==
        AuthVerdict::PolicyDenied);
  CHECK(sys.authenticate(bundle, key, {95, "cafe"}, {"name"}, rng).verdict ==
        AuthVerdict::PolicyDenied);
}

TEST_CASE("full delegation and revocation scenario") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(28);
  sys.enroll(alice_record(), rng);
  sys.enroll(bob_record(), rng);
  auto bundle = sys.encrypt(alice_record(), lab_tree(), lab_options(), rng);

  auto alice_key = sys.key_gen("alice", {kHead, kLecturer, kMember}, "senior", 90);
  auto bob_key = delegate_key(alice_key, "bob", {kLecturer, kMember});
  EvaluationContext ctx{95, "lab"};

  // grant -> grant -> (graduation) revoke -> deny
  CHECK(sys.authenticate(bundle, alice_key, ctx, {"name"}, rng).verdict ==
        AuthVerdict::Granted);
  CHECK(sys.authenticate(bundle, bob_key, ctx, {"name"}, rng).verdict == AuthVerdict::Granted);
  u64 v1 = sys.revoke_target({"bob", std::nullopt}, sys.maintainer());
  CHECK(v1 == 1);
  CHECK(sys.authenticate(bundle, bob_key, ctx, {"name"}, rng).verdict == AuthVerdict::Revoked);
  CHECK(sys.authenticate(bundle, alice_key, ctx, {"name"}, rng).verdict ==
        AuthVerdict::Granted);

  // Cascade: revoking one of Alice's attribute grants breaks Bob's delegated
  // key on policies that need it.
  u64 v2 = sys.revoke_target({"alice", kMember}, sys.maintainer());
  CHECK(v2 == 2);
  CHECK(sys.authenticate(bundle, alice_key, ctx, {"name"}, rng).verdict ==
        AuthVerdict::Revoked);

  CHECK_THROWS_WITH_AS((void)sys.revoke_target({"carol", std::nullopt}, 2),
                       doctest::Contains("NotMaintainer"), Error);
}

TEST_CASE("crash tolerance at k=3, t=2") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(29);
  sys.enroll(bob_record(), rng);
  auto bundle = sys.encrypt(bob_record(), lab_tree(), lab_options(), rng);
  auto alice_key_holder = sys.key_gen("bob", {kLecturer, kMember}, "regular", 90);
  EvaluationContext ctx{95, "lab"};

  // One crash: authentication still succeeds (t = 2 live shares) and the
  // token signature recovers the crashed party's partial from backups.
  sys.crash_party(3);
  auto result = sys.authenticate(bundle, alice_key_holder, ctx, {"name"}, rng);
  REQUIRE(result.verdict == AuthVerdict::Granted);
  CHECK(verify_sso_token(*result.token, sys.pk().rsa, "sp/default", 95).ok);
  CHECK(sys.metrics().recoveries >= 1);

  // Two crashes: below threshold.
  sys.crash_party(2);
  CHECK(sys.authenticate(bundle, alice_key_holder, ctx, {"name"}, rng).verdict ==
        AuthVerdict::PolicyDenied);
}

TEST_CASE("tampered bundles are rejected before any policy work") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(30);
  sys.enroll(bob_record(), rng);
  auto bundle = sys.encrypt(bob_record(), lab_tree(), lab_options(), rng);
  auto key = sys.key_gen("bob", {kLecturer, kMember}, "regular", 90);

  auto tampered = bundle;
  tampered.items[0].ciphertext[0] ^= 1;
  CHECK(sys.authenticate(tampered, key, {95, "lab"}, {"name"}, rng).verdict ==
        AuthVerdict::IntegrityFailure);
}

TEST_CASE("sso tokens verify, expire and bind audiences") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(31);
  auto token = sys.issue_sso_token("alice", {"sp/mail", "sp/files"}, 10, 90, rng);
  CHECK(token.expiry_epoch == 100);

  CHECK(verify_sso_token(token, sys.pk().rsa, "sp/mail", 99).ok);
  CHECK(verify_sso_token(token, sys.pk().rsa, "sp/mail", 100).ok);
  auto expired = verify_sso_token(token, sys.pk().rsa, "sp/mail", 101);
  CHECK_FALSE(expired.ok);
  CHECK(expired.reason == "Expired");
  auto wrong_audience = verify_sso_token(token, sys.pk().rsa, "sp/other", 99);
  CHECK_FALSE(wrong_audience.ok);
  CHECK(wrong_audience.reason == "UnknownAudience");

  auto forged = token;
  forged.signature ^= 1;
  CHECK_FALSE(verify_sso_token(forged, sys.pk().rsa, "sp/mail", 99).ok);
}

TEST_CASE("token bodies altered in any field fail verification") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(32);
  auto token = sys.issue_sso_token("alice", {"sp/mail"}, 10, 90, rng);
  auto check = [&](SsoToken t) { return verify_sso_token(t, sys.pk().rsa, "sp/mail", 95).ok; };
  CHECK(check(token));

  auto t1 = token;
  t1.subject = "mallory";
  CHECK_FALSE(check(t1));
  auto t2 = token;
  t2.expiry_epoch += 1000;
  CHECK_FALSE(check(t2));
  auto t3 = token;
  t3.issued_epoch -= 1;
  CHECK_FALSE(check(t3));
  auto t4 = token;
  t4.nonce[0] ^= 1;
  CHECK_FALSE(check(t4));

  // Fuzz: random single-field mutations never verify.
  auto rng2 = Sha256Drbg::from_u64(33);
  int rejected = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto mutated = token;
    switch (rng2.below(4)) {
      case 0: mutated.subject += static_cast<char>('a' + rng2.below(26)); break;
      case 1: mutated.expiry_epoch += 1 + static_cast<i64>(rng2.below(1000)); break;
      case 2: mutated.issued_epoch -= 1 + static_cast<i64>(rng2.below(1000)); break;
      default: mutated.nonce[rng2.below(mutated.nonce.size())] ^=
          static_cast<std::uint8_t>(1 + rng2.below(255));
    }
    if (!check(mutated)) ++rejected;
  }
  CHECK(rejected == 500);
}

TEST_CASE("anonymous authentication issues pseudonymous tokens") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(34);
  sys.enroll(bob_record(), rng);
  auto bundle = sys.encrypt(bob_record(), lab_tree(), lab_options(), rng);
  auto key = sys.key_gen("bob", {kLecturer, kMember}, "regular", 90);

  AuthenticateOptions opt;
  opt.anonymous = true;
  auto result = sys.authenticate(bundle, key, {95, "lab"}, {"name"}, rng, opt);
  REQUIRE(result.verdict == AuthVerdict::Granted);
  REQUIRE(result.token.has_value());
  CHECK(result.token->subject.starts_with("pseud:"));
  CHECK(result.token->subject.find("bob") == std::string::npos);
  // Linkage table lives only at the authority parties.
  CHECK(sys.party(1).pseudonyms.at(result.token->subject) == "bob");
}

TEST_CASE("group authentication commits and reconstructs") {
  auto rng = Sha256Drbg::from_u64(35);
  PrimeField field(11);
  ScriptedRandom scripted({5, 2});  // secret 5, polynomial 5 + 2x
  auto state = group_setup("lab-group", 3, 2, field, 7, scripted);
  CHECK(state.member_shares.at(1) == SharePoint{1, 7});
  CHECK(state.member_shares.at(2) == SharePoint{2, 9});
  CHECK(state.member_shares.at(3) == SharePoint{3, 0});
  CHECK(state.commitment == group_commitment(5, 7));

  std::vector<SharePoint> two = {{1, 7}, {2, 9}};
  CHECK(group_authenticate(state, two, 7));
  CHECK(state.consumed);
  CHECK_THROWS_WITH_AS((void)group_authenticate(state, two, 7), doctest::Contains("Consumed"),
                       Error);

  auto state2 = group_setup("lab-group", 3, 2, field, 8, rng);
  std::vector<SharePoint> one = {state2.member_shares.at(1)};
  CHECK_THROWS_WITH_AS((void)group_authenticate(state2, one, 8),
                       doctest::Contains("InsufficientShares"), Error);
  CHECK_THROWS_WITH_AS((void)group_authenticate(state2, two, 9),
                       doctest::Contains("EpochMismatch"), Error);

  // Wrong shares reconstruct a wrong secret and fail the commitment.
  std::vector<SharePoint> wrong = {{1, 8}, {2, 9}};
  CHECK_FALSE(group_authenticate(state2, wrong, 8));

  // Fresh epochs get fresh commitments.
  auto rng_a = Sha256Drbg::from_u64(36);
  auto rng_b = Sha256Drbg::from_u64(36);
  auto epoch1 = group_setup("g", 3, 2, field, 1, rng_a);
  auto epoch2 = group_setup("g", 3, 2, field, 2, rng_b);
  CHECK(epoch1.commitment != epoch2.commitment);

  CHECK_THROWS_WITH_AS((void)group_setup("g", 3, 4, field, 1, rng),
                       doctest::Contains("ThresholdOutOfRange"), Error);
}

TEST_CASE("disclose releases exactly one item") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(37);
  sys.enroll(alice_record(), rng);
  auto bundle = sys.encrypt(alice_record(), lab_tree(), lab_options(), rng);
  auto alice_key = sys.key_gen("alice", {kHead, kLecturer, kMember}, "senior", 90);
  auto bob_key = delegate_key(alice_key, "bob", {kLecturer, kMember});
  EvaluationContext ctx{95, "lab"};

  auto ok = sys.disclose_item(bundle, "name", bob_key, ctx, rng);
  CHECK(ok.verdict == AuthVerdict::Granted);
  CHECK(ok.plaintext == "Alice A.");

  // ssn evaporated away: label unknown afterwards.
  auto evaporated = evaporate(bundle, 0.5);
  auto gone = sys.disclose_item(evaporated, "ssn", bob_key, ctx, rng);
  CHECK(gone.verdict == AuthVerdict::LabelUnknown);

  sys.revoke_target({"bob", std::nullopt}, sys.maintainer());
  auto revoked = sys.disclose_item(bundle, "name", bob_key, ctx, rng);
  CHECK(revoked.verdict == AuthVerdict::Revoked);

  auto dead = apoptose(bundle);
  auto nothing = sys.disclose_item(dead, "name", bob_key, ctx, rng);
  CHECK(nothing.verdict == AuthVerdict::LabelUnknown);
}

TEST_CASE("apoptosis totality: no operation surface returns plaintext") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(38);
  sys.enroll(alice_record(), rng);
  auto bundle = sys.encrypt(alice_record(), lab_tree(), lab_options(), rng);
  auto key = sys.key_gen("alice", {kHead, kLecturer, kMember}, "senior", 90);
  auto dead = apoptose(bundle);
  EvaluationContext ctx{95, "lab"};

  for (const auto& label : {"name", "dob", "ssn"}) {
    auto a = sys.authenticate(dead, key, ctx, {label}, rng);
    CHECK(a.verdict == AuthVerdict::LabelUnknown);
    CHECK(a.claims.empty());
    auto d = sys.disclose_item(dead, label, key, ctx, rng);
    CHECK(d.verdict == AuthVerdict::LabelUnknown);
    CHECK(d.plaintext.empty());
  }
  CHECK(evaluate_arrival(dead, {"h", 1.0}).retained_labels.empty());
}

TEST_CASE("end-to-end soundness sweep: policy x revocation x liveness") {
  const std::vector<AttributeId> pool = {kHead, kLecturer, kMember};
  std::vector<AccessTree> trees;
  trees.push_back(AccessTree::all_of(
      {AccessTree::attribute(kHead), AccessTree::attribute(kLecturer)}));
  trees.push_back(AccessTree::any_of(
      {AccessTree::attribute(kHead), AccessTree::attribute(kMember)}));
  trees.push_back(AccessTree::at_least(2, {AccessTree::attribute(kHead),
                                           AccessTree::attribute(kLecturer),
                                           AccessTree::attribute(kMember)}));

  auto base = make_system(77);
  auto rng = Sha256Drbg::from_u64(78);
  IdentityRecord record = bob_record();  // rank regular -> t = 2
  base.enroll(record, rng);

  // One key per attribute subset, issued while the full roster is live.
  std::vector<std::set<AttributeId>> subsets;
  std::vector<AttributeKey> keys;
  for (unsigned mask = 0; mask < 8; ++mask) {
    std::set<AttributeId> attrs;
    for (unsigned i = 0; i < 3; ++i) {
      if (mask & (1u << i)) attrs.insert(pool[i]);
    }
    subsets.push_back(attrs);
    keys.push_back(attrs.empty() ? AttributeKey{"bob", {}, "regular", 90, {}, {}}
                                 : base.key_gen("bob", attrs, "regular", 90));
  }

  const std::vector<std::set<int>> crash_patterns = {{}, {1}, {2}, {3}, {1, 2}, {1, 3}, {2, 3}};
  EvaluationContext ctx{95, "lab"};
  int granted_count = 0, checked = 0;

  for (const auto& tree : trees) {
    auto bundle = base.encrypt(record, tree, lab_options(), rng);
    for (bool revoked : {false, true}) {
      for (const auto& crashes : crash_patterns) {
        for (std::size_t s = 0; s < subsets.size(); ++s) {
          IdmSystem sys = base;
          auto local_rng = Sha256Drbg::from_u64(100 + checked);
          if (revoked) sys.revoke_target({"bob", std::nullopt}, sys.maintainer());
          for (int id : crashes) sys.crash_party(id);

          bool expect_grant = satisfies(tree, subsets[s], ctx) &&
                              (3 - crashes.size()) >= 2 && !revoked;
          auto result = sys.authenticate(bundle, keys[s], ctx, {"name"}, local_rng);
          CHECK((result.verdict == AuthVerdict::Granted) == expect_grant);
          if (expect_grant) {
            CHECK(result.claims.at("name") == "Bob B.");
            ++granted_count;
          }
          ++checked;
        }
      }
    }
  }
  CHECK(checked == 3 * 2 * 7 * 8);
  CHECK(granted_count > 0);
}

TEST_CASE("rank monotonicity over the liveness lattice at k = 5") {
  KeygenConfig cfg = fast_cfg();
  cfg.parties = 5;
  RankPolicy policy;
  policy.required = {{"regular", 2}, {"senior", 4}};
  policy.ordering = {"regular", "senior"};
  auto base = IdmSystem::setup(cfg, policy, {}, 13);
  auto rng = Sha256Drbg::from_u64(50);
  base.enroll(bob_record(), rng);
  IdentityRecord senior = bob_record();
  senior.rank = "senior";
  auto low_bundle = base.encrypt(bob_record(), lab_tree(), lab_options(), rng);
  auto high_bundle = base.encrypt(senior, lab_tree(), lab_options(), rng);
  auto key = base.key_gen("bob", {kLecturer, kMember}, "regular", 90);
  EvaluationContext ctx{95, "lab"};

  // Every liveness pattern under which the senior credential opens must also
  // open the regular one.
  int high_opens = 0, violations = 0;
  for (unsigned pattern = 0; pattern < 32; ++pattern) {
    IdmSystem sys = base;  // fresh copy per pattern
    auto pattern_rng = Sha256Drbg::from_u64(60 + pattern);
    for (int id = 1; id <= 5; ++id) {
      if ((pattern & (1u << (id - 1))) == 0) sys.crash_party(id);
    }
    if (sys.live_parties().empty()) continue;
    auto low = sys.authenticate(low_bundle, key, ctx, {"name"}, pattern_rng);
    IdmSystem sys2 = base;
    auto pattern_rng2 = Sha256Drbg::from_u64(90 + pattern);
    for (int id = 1; id <= 5; ++id) {
      if ((pattern & (1u << (id - 1))) == 0) sys2.crash_party(id);
    }
    auto high = sys2.authenticate(high_bundle, key, ctx, {"name"}, pattern_rng2);
    if (high.verdict == AuthVerdict::Granted) {
      ++high_opens;
      CHECK(low.verdict == AuthVerdict::Granted);
      if (low.verdict != AuthVerdict::Granted) ++violations;
    }
  }
  CHECK(high_opens > 0);
  CHECK(violations == 0);
}

TEST_CASE("disclosure minimality: no sibling plaintext or ciphertext leaks") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(55);
  sys.enroll(alice_record(), rng);
  auto bundle = sys.encrypt(alice_record(), lab_tree(), lab_options(), rng);
  auto key = sys.key_gen("alice", {kHead, kLecturer, kMember}, "senior", 90);
  EvaluationContext ctx{95, "lab"};

  auto result = sys.authenticate(bundle, key, ctx, {"name"}, rng);
  REQUIRE(result.verdict == AuthVerdict::Granted);

  // Serialize everything the caller gets back.
  std::string response = result.claims.at("name");
  response += canon_encode(result.token->to_canon());

  for (const auto& sibling : {"dob", "ssn"}) {
    std::string plaintext = alice_record().claims.at(sibling);
    CHECK(response.find(plaintext) == std::string::npos);
    for (const auto& item : bundle.items) {
      if (item.label == sibling) {
        CHECK(response.find(hex_encode(item.ciphertext)) == std::string::npos);
      }
    }
  }
}

TEST_CASE("no combined secrets in any inter-party message") {
  auto sys = make_system(123);
  auto rng = Sha256Drbg::from_u64(39);
  sys.enroll(alice_record(), rng);
  auto bundle = sys.encrypt(alice_record(), lab_tree(), lab_options(), rng);
  auto key = sys.key_gen("alice", {kHead, kLecturer, kMember}, "senior", 90);
  auto result = sys.authenticate(bundle, key, {95, "lab"}, {"name"}, rng);
  REQUIRE(result.verdict == AuthVerdict::Granted);

  i64 d_sum = 0;
  for (int id = 1; id <= 3; ++id) d_sum += sys.party(id).rsa_share.d;

  std::vector<std::string> probes;
  probes.push_back(canon_encode(Canon(d_sum)));
  for (int id = 1; id <= 3; ++id) {
    const auto& p = sys.party(id);
    probes.push_back(canon_encode(Canon(Bytes(p.mk.begin(), p.mk.end()))));
    probes.push_back(canon_encode(Canon(Bytes(p.seal_key.begin(), p.seal_key.end()))));
  }
  for (const auto& m : sys.transcript()) {
    auto body = to_string(m.body);
    for (const auto& probe : probes) {
      CHECK(body.find(probe) == std::string::npos);
    }
  }
}

TEST_CASE("stale replica check fails closed then recovers after sync") {
  auto sys = make_system();
  auto rng = Sha256Drbg::from_u64(40);
  sys.enroll(bob_record(), rng);
  auto bundle = sys.encrypt(bob_record(), lab_tree(), lab_options(), rng);
  auto key = sys.key_gen("bob", {kLecturer, kMember}, "regular", 90);

  // Manufacture staleness: move the maintainer ahead without broadcast.
  revoke(sys.party(sys.maintainer()).arl, {"carol", std::nullopt}, sys.maintainer());
  CHECK(sys.party(2).arl.version < sys.party(sys.maintainer()).arl.version);

  // Direct party-side check fails closed...
  CHECK_THROWS_WITH_AS((void)verify_attribute_tag(1, sys.party(2).mk, key, kLecturer,
                                                  sys.party(2).arl,
                                                  sys.party(sys.maintainer()).arl.version),
                       doctest::Contains("StaleRevocationList"), Error);

  // ...while the orchestrated flow refreshes the replica and proceeds.
  auto result = sys.authenticate(bundle, key, {95, "lab"}, {"name"}, rng);
  CHECK(result.verdict == AuthVerdict::Granted);
  CHECK(sys.party(2).arl.version == sys.party(sys.maintainer()).arl.version);
}
