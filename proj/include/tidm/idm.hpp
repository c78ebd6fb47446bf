#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tidm/access_tree.hpp"
#include "tidm/attribute_keys.hpp"
#include "tidm/bundle.hpp"
#include "tidm/canonical.hpp"
#include "tidm/dkg_protocol.hpp"
#include "tidm/error.hpp"
#include "tidm/netsim.hpp"
#include "tidm/shamir.hpp"
#include "tidm/stream_cipher.hpp"

namespace tidm {

struct IdentityRecord {
  std::string user_id;
  std::map<std::string, std::string> claims;
  std::string rank;

  Canon to_canon() const {
    Canon::Object claims_obj;
    for (const auto& [label, value] : claims) claims_obj.emplace(label, Canon(value));
    Canon::Object o;
    o.emplace("userId", Canon(user_id));
    o.emplace("claims", Canon(std::move(claims_obj)));
    o.emplace("rank", Canon(rank));
    return Canon(std::move(o));
  }
};

// How many parties must release their session-key share, by identity rank.
// Higher-privilege ranks must require at least as many participants.
struct RankPolicy {
  std::map<std::string, std::size_t> required;
  std::vector<std::string> ordering;  // least to most privileged
  std::string default_rank;

  static RankPolicy standard(std::size_t k) {
    RankPolicy p;
    p.required = {{"regular", 2}, {"senior", k - 1}};
    p.ordering = {"regular", "senior"};
    p.default_rank = "regular";
    return p;
  }

  void validate(std::size_t k) const {
    require(!required.empty(), Err::InvalidConfig, "rank policy must name at least one rank");
    for (const auto& [rank, t] : required) {
      require(t >= 2 && t <= k, Err::InvalidConfig,
              "rank " + rank + " needs t in [2, k], got " + std::to_string(t));
    }
    std::size_t prev = 0;
    for (const auto& rank : ordering) {
      auto it = required.find(rank);
      require(it != required.end(), Err::InvalidConfig, "ordering names unknown rank " + rank);
      require(it->second >= prev, Err::InvalidConfig,
              "rank ordering violates participant monotonicity at " + rank);
      prev = it->second;
    }
    if (!default_rank.empty()) {
      require(required.contains(default_rank), Err::UnknownRank,
              "default rank " + default_rank + " not in policy");
    }
  }

  std::size_t threshold_for(const std::string& rank) const {
    auto it = required.find(rank);
    if (it != required.end()) return it->second;
    if (!default_rank.empty()) {
      auto d = required.find(default_rank);
      if (d != required.end()) return d->second;
    }
    fail(Err::UnknownRank, "no participant count for rank " + rank);
  }
};

struct SsoToken {
  std::string subject;
  std::vector<std::string> audiences;
  i64 issued_epoch = 0;
  i64 expiry_epoch = 0;
  Bytes nonce;
  u64 signature = 0;

  Canon body_canon() const {
    Canon::Object o;
    o.emplace("subject", Canon(subject));
    Canon::Array a;
    for (const auto& aud : audiences) a.push_back(Canon(aud));
    o.emplace("audiences", Canon(std::move(a)));
    o.emplace("issuedEpoch", Canon(issued_epoch));
    o.emplace("expiryEpoch", Canon(expiry_epoch));
    o.emplace("nonce", Canon(nonce));
    return Canon(std::move(o));
  }

  Canon to_canon() const {
    Canon body = body_canon();
    Canon::Object o;
    o.emplace("body", std::move(body));
    o.emplace("signature", Canon(signature));
    return Canon(std::move(o));
  }
};

// Digest of the canonical token body mapped into [2, N): mod (N-2) + 2
// avoids the 0/1 fixed points of RSA exponentiation.
inline u64 token_digest_value(const Canon& body, u64 rsa_modulus) {
  Digest d = canon_sha256(body);
  u64 m = rsa_modulus - 2;
  u64 acc = 0;
  for (std::uint8_t b : d) acc = (static_cast<u128>(acc) * 256 + b) % m;
  return acc + 2;
}

struct TokenVerdict {
  bool ok = false;
  std::string reason;  // empty when ok
};

inline TokenVerdict verify_sso_token(const SsoToken& token, const RsaPublicKey& pk,
                                     const std::string& audience, i64 now_epoch) {
  u64 digest = token_digest_value(token.body_canon(), pk.modulus);
  if (pow_mod(token.signature, pk.exponent, pk.modulus) != digest) return {false, "BadSignature"};
  if (std::find(token.audiences.begin(), token.audiences.end(), audience) ==
      token.audiences.end()) {
    return {false, "UnknownAudience"};
  }
  if (now_epoch > token.expiry_epoch) return {false, "Expired"};
  return {true, ""};
}

// Many-to-many group authentication: commit to a fresh secret per epoch,
// deal t-of-n shares, accept when any t members jointly reconstruct it.
struct GroupAuthState {
  std::string group_id;
  i64 epoch = 0;
  Digest commitment{};
  std::map<int, SharePoint> member_shares;  // member number -> share
  std::size_t threshold = 0;
  std::size_t member_count = 0;
  u64 field_modulus = 0;
  bool consumed = false;
};

inline Digest group_commitment(u64 secret, i64 epoch) {
  return canon_sha256(Canon(Canon::Array{Canon(secret), Canon(epoch)}));
}

inline GroupAuthState group_setup(std::string group_id, std::size_t members, std::size_t t,
                                  const PrimeField& field, i64 epoch, RandomSource& rng) {
  require(t >= 2 && t <= members, Err::ThresholdOutOfRange,
          "group threshold must lie in [2, member count]");
  u64 secret = rng.below(field.modulus());
  auto shares = shamir_share(secret, t, members, field, rng);
  GroupAuthState state;
  state.group_id = std::move(group_id);
  state.epoch = epoch;
  state.commitment = group_commitment(secret, epoch);
  for (std::size_t i = 0; i < members; ++i) {
    state.member_shares.emplace(static_cast<int>(i + 1), shares.points[i]);
  }
  state.threshold = t;
  state.member_count = members;
  state.field_modulus = field.modulus();
  return state;
}

inline bool group_authenticate(GroupAuthState& state, std::span<const SharePoint> submitted,
                               i64 epoch) {
  require(epoch == state.epoch, Err::EpochMismatch, "group state is for another epoch");
  require(!state.consumed, Err::Consumed, "group state already used");
  PrimeField field(state.field_modulus);
  u64 candidate = shamir_reconstruct(submitted, state.threshold, field);
  bool ok = group_commitment(candidate, epoch) == state.commitment;
  if (ok) state.consumed = true;
  return ok;
}

// --- the authority cluster ----------------------------------------------------

struct PublicParams {
  RsaPublicKey rsa;
  std::size_t parties = 0;
  u64 share_field_modulus = 0;  // session-key sharing field
  u64 backup_modulus = 0;       // Q for d_i backups
  std::size_t backup_threshold = 0;
  RankPolicy rank_policy;

  Canon to_canon() const {
    Canon::Object o;
    o.emplace("modulus", Canon(rsa.modulus));
    o.emplace("exponent", Canon(rsa.exponent));
    o.emplace("parties", Canon(static_cast<u64>(parties)));
    o.emplace("shareFieldModulus", Canon(share_field_modulus));
    o.emplace("backupModulus", Canon(backup_modulus));
    o.emplace("backupThreshold", Canon(static_cast<u64>(backup_threshold)));
    Canon::Object ranks;
    for (const auto& [rank, t] : rank_policy.required) {
      ranks.emplace(rank, Canon(static_cast<u64>(t)));
    }
    o.emplace("rankPolicy", Canon(std::move(ranks)));
    Canon::Array order;
    for (const auto& r : rank_policy.ordering) order.push_back(Canon(r));
    o.emplace("rankOrdering", Canon(std::move(order)));
    o.emplace("defaultRank", Canon(rank_policy.default_rank));
    return Canon(std::move(o));
  }
};

struct AuthorityParty {
  int id = 0;
  PrivateShare rsa_share;
  std::array<std::uint8_t, 32> mk{};
  std::array<std::uint8_t, 32> seal_key{};
  std::vector<ShareBackup> held;  // backups this party holds for others
  RevocationList arl;             // replica; master lives at the maintainer
  std::map<std::string, IdentityRecord> enrolled;
  std::map<std::string, std::string> pseudonyms;  // pseudonym -> user
  bool crashed = false;
};

enum class AuthVerdict { Granted, PolicyDenied, Revoked, IntegrityFailure, LabelUnknown };

inline const char* auth_verdict_name(AuthVerdict v) {
  switch (v) {
    case AuthVerdict::Granted: return "Granted";
    case AuthVerdict::PolicyDenied: return "PolicyDenied";
    case AuthVerdict::Revoked: return "Revoked";
    case AuthVerdict::IntegrityFailure: return "IntegrityFailure";
    case AuthVerdict::LabelUnknown: return "LabelUnknown";
  }
  return "Unknown";
}

struct AuthResult {
  AuthVerdict verdict = AuthVerdict::PolicyDenied;
  std::map<std::string, std::string> claims;
  std::optional<SsoToken> token;
};

struct EncryptOptions {
  double apoptosis_threshold = 0.3;
  double evaporation_threshold = 0.8;
  std::map<std::string, double> sensitivity;  // label -> [0, 1]
  double default_sensitivity = 0.5;
  i64 creation_epoch = 0;
};

struct AuthenticateOptions {
  std::vector<std::string> audiences{"sp/default"};
  i64 token_ttl = 10;
  bool anonymous = false;
};

// The five-algorithm protocol over k authority parties, plus SSO and group
// authentication. Authority state machines interact only through logged
// messages; requester-side assembly happens in the caller's context.
class IdmSystem {
public:
  static IdmSystem setup(const KeygenConfig& cfg, RankPolicy rank_policy,
                         const AdversaryConfig& adversary, u64 seed, bool parallel = false) {
    rank_policy.validate(cfg.parties);
    auto keygen = run_distributed_keygen(cfg, adversary, seed, parallel);

    IdmSystem sys;
    sys.pk_.rsa = keygen.public_key;
    sys.pk_.parties = cfg.parties;
    sys.pk_.share_field_modulus = default_share_field().modulus();
    sys.pk_.backup_modulus = keygen.backup_modulus;
    sys.pk_.backup_threshold = cfg.backup_threshold;
    sys.pk_.rank_policy = std::move(rank_policy);
    sys.transcript_ = std::move(keygen.transcript);
    sys.metrics_ = keygen.metrics;
    sys.round_ = sys.metrics_.rounds;

    for (std::size_t i = 0; i < cfg.parties; ++i) {
      AuthorityParty party;
      party.id = static_cast<int>(i + 1);
      party.rsa_share = keygen.shares[i];
      auto local = party_rng(seed, party.id);
      auto mk_bytes = local.child("mk").bytes(32);
      auto seal_bytes = local.child("seal").bytes(32);
      std::copy(mk_bytes.begin(), mk_bytes.end(), party.mk.begin());
      std::copy(seal_bytes.begin(), seal_bytes.end(), party.seal_key.begin());
      party.held = keygen.held[i];
      party.arl.maintainer_party = 1;
      sys.parties_.push_back(std::move(party));
    }
    return sys;
  }

  // Rebuilds a system from persisted state (no transcript, fresh metrics).
  static IdmSystem restore(PublicParams pk, std::vector<AuthorityParty> parties) {
    require(parties.size() == pk.parties, Err::InvalidConfig,
            "party state does not match the public parameters");
    IdmSystem sys;
    sys.pk_ = std::move(pk);
    sys.parties_ = std::move(parties);
    return sys;
  }

  const PublicParams& pk() const { return pk_; }
  const Transcript& transcript() const { return transcript_; }
  const Metrics& metrics() const { return metrics_; }
  std::size_t party_count() const { return parties_.size(); }
  AuthorityParty& party(int id) { return parties_.at(static_cast<std::size_t>(id - 1)); }
  const AuthorityParty& party(int id) const {
    return parties_.at(static_cast<std::size_t>(id - 1));
  }
  int maintainer() const { return maintainer_; }

  void crash_party(int id) {
    auto& p = party(id);
    require(!p.crashed, Err::AlreadyCrashed, "party " + std::to_string(id) + " already crashed");
    p.crashed = true;
  }

  std::vector<int> live_parties() const {
    std::vector<int> out;
    for (const auto& p : parties_) {
      if (!p.crashed) out.push_back(p.id);
    }
    return out;
  }

  // Requester half of enrollment: RSA-encrypt a fresh session key and seal
  // the record under it. Composed offline, away from the parties.
  struct EnrollmentRequest {
    u64 key_ciphertext = 0;
    Bytes sealed_payload;
  };

  static EnrollmentRequest make_enrollment_request(const IdentityRecord& record,
                                                   const RsaPublicKey& pk, RandomSource& rng) {
    const u64 n = pk.modulus;
    u64 key_value = 2 + rng.below(n - 2);
    EnrollmentRequest request;
    request.key_ciphertext = pow_mod(key_value, pk.exponent, n);
    Digest record_key = sha256(canon_encode(Canon(key_value)));
    request.sealed_payload =
        sealed_to_bytes(seal(record_key, rng.bytes(16), canon_bytes(record.to_canon())));
    return request;
  }

  // Authority half: the parties jointly decrypt the session key via partial
  // decryptions and store the stream-decrypted record.
  void process_enrollment(const EnrollmentRequest& request) {
    const u64 n = pk_.rsa.modulus;
    for (int id : live_parties()) {
      Canon::Object body;
      body.emplace("ciphertext", Canon(request.key_ciphertext));
      body.emplace("payload", Canon(request.sealed_payload));
      log(kClient, id, "idm/enroll", Canon(std::move(body)));
    }

    auto partials = gather_partials(request.key_ciphertext);

    // Every live party combines and stores; all see the same broadcasts.
    u64 recovered = combine_partials(partials, parties_[0].rsa_share.correction,
                                     request.key_ciphertext, n, pk_.parties);
    Digest derived = sha256(canon_encode(Canon(recovered)));
    auto opened = open_sealed(derived, sealed_from_bytes(request.sealed_payload));
    require(opened.has_value(), Err::IntegrityFailure, "enrollment payload tag mismatch");
    auto parsed = parse_json(to_string(*opened));
    IdentityRecord stored;
    stored.user_id = parsed.at("userId").get<std::string>();
    stored.rank = parsed.at("rank").get<std::string>();
    for (const auto& [label, value] : parsed.at("claims").items()) {
      stored.claims.emplace(label, value.get<std::string>());
    }
    for (int id : live_parties()) party(id).enrolled[stored.user_id] = stored;
  }

  void enroll(const IdentityRecord& record, RandomSource& rng) {
    process_enrollment(make_enrollment_request(record, pk_.rsa, rng));
  }

  bool is_enrolled(const std::string& user_id) const {
    for (const auto& p : parties_) {
      if (!p.crashed) return p.enrolled.contains(user_id);
    }
    return false;
  }

  // encrypt: session key K protects the claims; K is Shamir-shared t-of-k
  // with t from the rank policy, and each party seals its own share so the
  // bundle is self-contained on untrusted storage.
  ActiveBundle encrypt(const IdentityRecord& record, const AccessTree& tree,
                       const EncryptOptions& options, RandomSource& rng) {
    const std::size_t k = pk_.parties;
    std::size_t t = pk_.rank_policy.threshold_for(record.rank);
    require(live_parties().size() == k, Err::MissingParty,
            "bundle creation requires the full roster");

    Bytes session_key = rng.bytes(32);
    PrimeField field(pk_.share_field_modulus);
    u64 field_secret = 0;
    for (std::size_t i = 0; i < 8; ++i) {
      field_secret = field_secret << 8 | session_key[i];
    }
    field_secret %= field.modulus();
    auto shares = shamir_share(field_secret, t, k, field, rng);

    CredentialCiphertext cred;
    cred.threshold = t;
    cred.share_modulus = field.modulus();
    cred.nonce = rng.bytes(16);
    Digest mask = sha256(canon_encode(Canon(field_secret)));
    cred.masked_key = session_key;
    for (std::size_t i = 0; i < 32; ++i) cred.masked_key[i] ^= mask[i];

    for (std::size_t i = 0; i < k; ++i) {
      int id = static_cast<int>(i + 1);
      const SharePoint& pt = shares.points[i];
      Canon::Object request;
      request.emplace("index", Canon(pt.index));
      request.emplace("value", Canon(pt.value));
      request.emplace("nonce", Canon(cred.nonce));
      log(kClient, id, "idm/seal-request", Canon(std::move(request)));

      Bytes sealed_share = seal_share_at_party(id, pt, cred.nonce);
      Canon::Object reply;
      reply.emplace("sealed", Canon(sealed_share));
      log(id, kClient, "idm/sealed", Canon(std::move(reply)));
      cred.roster.push_back(id);
      cred.sealed_shares.emplace_back(id, std::move(sealed_share));
    }

    std::vector<BundleItem> items;
    for (const auto& [label, value] : record.claims) {
      BundleItem item;
      item.label = label;
      auto s = options.sensitivity.find(label);
      item.sensitivity = s != options.sensitivity.end() ? s->second : options.default_sensitivity;
      SealedBox box = seal(session_key, rng.bytes(16), to_bytes(value));
      item.ciphertext = sealed_to_bytes(box);
      items.push_back(std::move(item));
    }

    std::string bundle_id =
        hex_encode(canon_sha256(Canon(Canon::Array{Canon(record.user_id), Canon(cred.nonce)})))
            .substr(0, 16);
    return make_bundle(bundle_id, std::move(items), tree, std::move(cred),
                       options.apoptosis_threshold, options.evaporation_threshold,
                       options.creation_epoch);
  }

  // keyGen: every authority party issues its tag for each granted attribute;
  // no party sees another's master fragment.
  AttributeKey key_gen(const std::string& user_id, const std::set<AttributeId>& attributes,
                       const std::string& rank, i64 epoch) {
    require(is_enrolled(user_id), Err::UnknownUser, "user " + user_id + " not enrolled");
    require(live_parties().size() == pk_.parties, Err::MissingParty,
            "key issuance requires the full roster");

    AttributeKey key;
    key.user_id = user_id;
    key.attributes = attributes;
    key.rank = rank;
    key.epoch = epoch;
    for (const auto& attr : attributes) key.tags.emplace(attr, std::vector<Digest>{});

    Canon::Array attr_list;
    for (const auto& attr : attributes) attr_list.push_back(Canon(attr.canonical()));
    for (auto& p : parties_) {
      Canon::Object request;
      request.emplace("user", Canon(user_id));
      request.emplace("attrs", Canon(attr_list));
      log(kClient, p.id, "idm/keygen-request", Canon(std::move(request)));

      Canon::Object tags_obj;
      for (const auto& attr : attributes) {
        Digest tag = issue_tag(p.mk, user_id, attr, {});
        key.tags[attr].push_back(tag);
        tags_obj.emplace(attr.canonical(), Canon(tag));
      }
      Canon::Object reply;
      reply.emplace("tags", Canon(std::move(tags_obj)));
      log(p.id, kClient, "idm/keygen-tags", Canon(std::move(reply)));
    }
    return key;
  }

  // authenticate: each roster party independently verifies tags, policy and
  // revocation before releasing its sealed session-key share; the requester
  // reconstructs K from any t distinct shares and decrypts only the requested
  // claims. Success is notarized with a threshold-signed SSO token.
  AuthResult authenticate(const ActiveBundle& bundle, const AttributeKey& key,
                          const EvaluationContext& ctx,
                          const std::vector<std::string>& requested_labels, RandomSource& rng,
                          const AuthenticateOptions& options = {}) {
    require(!requested_labels.empty(), Err::InvalidConfig, "must request at least one label");
    AuthResult result;
    if (!verify_integrity(bundle)) {
      result.verdict = AuthVerdict::IntegrityFailure;
      return result;
    }
    require(bundle.access_tree.has_value(), Err::InvalidConfig, "bundle carries no policy");
    const AccessTree& tree = *bundle.access_tree;

    for (const auto& label : requested_labels) {
      if (!find_item(bundle, label)) {
        result.verdict = AuthVerdict::LabelUnknown;
        return result;
      }
    }

    std::vector<SharePoint> released;
    bool revocation_blocked = false;
    u64 current_version = parties_[static_cast<std::size_t>(maintainer_ - 1)].arl.version;

    for (int id : bundle.credential.roster) {
      AuthorityParty& p = party(id);
      if (p.crashed) continue;

      Canon::Object request;
      request.emplace("bundle", Canon(bundle.bundle_id));
      request.emplace("user", Canon(key.user_id));
      request.emplace("epoch", Canon(ctx.now_epoch));
      request.emplace("location", Canon(ctx.location));
      log(kClient, id, "idm/authn-request", Canon(std::move(request)));

      // Checks against a stale replica fail closed: refresh, then proceed.
      if (p.arl.version < current_version) {
        Canon::Object sync;
        sync.emplace("version", Canon(current_version));
        log(id, maintainer_, "idm/arl-sync", Canon(std::move(sync)));
        p.arl = party(maintainer_).arl;
      }

      if (user_revoked(p.arl, key)) {
        revocation_blocked = true;
        log(id, kClient, "idm/authn-deny", deny_body("Revoked"));
        continue;
      }

      // Split the check in two so a revocation-caused denial is reportable.
      std::set<AttributeId> tag_valid;
      std::set<AttributeId> effective;
      for (const auto& attr : key.attributes) {
        if (!tag_matches(static_cast<std::size_t>(id - 1), p.mk, key, attr)) continue;
        tag_valid.insert(attr);
        if (!revocation_blocks(p.arl, key, attr)) effective.insert(attr);
      }

      if (satisfies(tree, effective, ctx)) {
        auto share = unseal_share_at_party(p, bundle);
        if (!share) {
          log(id, kClient, "idm/authn-deny", deny_body("IntegrityFailure"));
          continue;
        }
        Canon::Object release;
        release.emplace("index", Canon(share->index));
        release.emplace("value", Canon(share->value));
        log(id, kClient, "idm/authn-release", Canon(std::move(release)));
        released.push_back(*share);
      } else if (satisfies(tree, tag_valid, ctx)) {
        revocation_blocked = true;
        log(id, kClient, "idm/authn-deny", deny_body("Revoked"));
      } else {
        log(id, kClient, "idm/authn-deny", deny_body("PolicyDenied"));
      }
    }

    auto distinct = dedup_shares(released, bundle.credential.share_modulus);
    if (distinct.size() < bundle.credential.threshold) {
      result.verdict = revocation_blocked ? AuthVerdict::Revoked : AuthVerdict::PolicyDenied;
      return result;
    }

    PrimeField field(bundle.credential.share_modulus);
    u64 field_secret = shamir_reconstruct(distinct, bundle.credential.threshold, field);
    Digest mask = sha256(canon_encode(Canon(field_secret)));
    Bytes session_key = bundle.credential.masked_key;
    require(session_key.size() == 32, Err::IntegrityFailure, "masked key malformed");
    for (std::size_t i = 0; i < 32; ++i) session_key[i] ^= mask[i];

    for (const auto& label : requested_labels) {
      const BundleItem* item = find_item(bundle, label);
      auto opened = open_sealed(session_key, sealed_from_bytes(item->ciphertext));
      if (!opened) {
        result.verdict = AuthVerdict::IntegrityFailure;
        return result;
      }
      result.claims.emplace(label, to_string(*opened));
    }

    std::string subject = key.user_id;
    if (options.anonymous) {
      Bytes pseudonym_nonce = rng.bytes(16);
      subject = "pseud:" +
                hex_encode(canon_sha256(
                    Canon(Canon::Array{Canon(key.user_id), Canon(pseudonym_nonce)})));
      for (int id : live_parties()) party(id).pseudonyms[subject] = key.user_id;
    }
    result.token = issue_sso_token(subject, options.audiences, options.token_ttl, ctx.now_epoch,
                                   rng);
    result.verdict = AuthVerdict::Granted;
    return result;
  }

  // revoke: single maintainer mutates, replicas follow by broadcast.
  u64 revoke_target(const RevocationTarget& target, int caller_party) {
    AuthorityParty& m = party(maintainer_);
    revoke(m.arl, target, caller_party);
    Canon::Object body;
    body.emplace("version", Canon(m.arl.version));
    body.emplace("user", Canon(target.user_id));
    body.emplace("attr",
                 target.attribute ? Canon(target.attribute->canonical()) : Canon(nullptr));
    log(maintainer_, kBroadcast, "idm/arl-update", Canon(std::move(body)));
    for (auto& p : parties_) {
      if (p.id != maintainer_ && !p.crashed) p.arl = m.arl;
    }
    return m.arl.version;
  }

  SsoToken issue_sso_token(const std::string& subject, const std::vector<std::string>& audiences,
                           i64 ttl_epochs, i64 now_epoch, RandomSource& rng) {
    require(ttl_epochs > 0, Err::InvalidConfig, "token ttl must be positive");
    SsoToken token;
    token.subject = subject;
    token.audiences = audiences;
    token.issued_epoch = now_epoch;
    token.expiry_epoch = now_epoch + ttl_epochs;
    token.nonce = rng.bytes(16);
    u64 digest = token_digest_value(token.body_canon(), pk_.rsa.modulus);
    token.signature = threshold_sign(digest);
    return token;
  }

  // sigma = h^(sum d_i + c) assembled from per-party partials; absent parties
  // are covered by recovering their fragment from t backup holders.
  u64 threshold_sign(u64 digest_value) {
    auto partials = gather_partials(digest_value);
    return combine_partials(partials, parties_[0].rsa_share.correction, digest_value,
                            pk_.rsa.modulus, pk_.parties);
  }

  struct DiscloseResult {
    AuthVerdict verdict = AuthVerdict::LabelUnknown;
    std::string plaintext;
    std::optional<SsoToken> token;
  };

  // Minimum disclosure: exactly one item, never the whole record.
  DiscloseResult disclose_item(const ActiveBundle& bundle, const std::string& label,
                               const AttributeKey& key, const EvaluationContext& ctx,
                               RandomSource& rng) {
    DiscloseResult out;
    if (bundle.tombstone || !find_item(bundle, label)) {
      out.verdict = AuthVerdict::LabelUnknown;
      return out;
    }
    auto res = authenticate(bundle, key, ctx, {label}, rng);
    out.verdict = res.verdict;
    if (res.verdict == AuthVerdict::Granted) {
      out.plaintext = res.claims.at(label);
      out.token = res.token;
    }
    return out;
  }

  Metrics& metrics() { return metrics_; }

private:
  static Canon deny_body(const char* reason) {
    Canon::Object o;
    o.emplace("deny", Canon(reason));
    return Canon(std::move(o));
  }

  static const BundleItem* find_item(const ActiveBundle& bundle, const std::string& label) {
    for (const auto& item : bundle.items) {
      if (item.label == label) return &item;
    }
    return nullptr;
  }

  Bytes seal_share_at_party(int id, const SharePoint& pt, const Bytes& bundle_nonce) {
    AuthorityParty& p = party(id);
    // Deterministic per-bundle nonce so state replays are byte-identical.
    Sha256 h;
    h.update(std::span<const std::uint8_t>(p.seal_key.data(), p.seal_key.size()));
    h.update(std::uint8_t{0x04});
    h.update(bundle_nonce);
    auto nd = h.finish();
    Bytes nonce(nd.begin(), nd.begin() + 16);
    Canon::Object share_obj;
    share_obj.emplace("index", Canon(pt.index));
    share_obj.emplace("value", Canon(pt.value));
    SealedBox box = seal(p.seal_key, nonce, canon_bytes(Canon(std::move(share_obj))));
    return sealed_to_bytes(box);
  }

  std::optional<SharePoint> unseal_share_at_party(AuthorityParty& p, const ActiveBundle& bundle) {
    for (const auto& [party_id, blob] : bundle.credential.sealed_shares) {
      if (party_id != p.id) continue;
      auto opened = open_sealed(p.seal_key, sealed_from_bytes(blob));
      if (!opened) return std::nullopt;
      auto parsed = parse_json(to_string(*opened));
      return SharePoint{get_u64(parsed.at("index")), get_u64(parsed.at("value"))};
    }
    return std::nullopt;
  }

  // Partial decryptions from every party: live parties broadcast theirs, a
  // coordinator rebuilds each crashed party's from >= t backup sub-shares.
  std::vector<PartyPartial> gather_partials(u64 ciphertext) {
    const u64 n = pk_.rsa.modulus;
    auto live = live_parties();
    require(!live.empty(), Err::MissingParty, "no live parties");

    std::vector<PartyPartial> partials;
    for (int id : live) {
      u64 v = partial_decrypt(ciphertext, party(id).rsa_share.d, n);
      Canon::Object body;
      body.emplace("value", Canon(v));
      log(id, kBroadcast, "idm/partial", Canon(std::move(body)));
      partials.push_back({id, v});
    }

    for (auto& p : parties_) {
      if (!p.crashed) continue;
      int coordinator = live.front();
      std::vector<ShareBackup> backups;
      for (int holder_id : live) {
        for (const auto& b : party(holder_id).held) {
          if (b.owner != p.id) continue;
          Canon::Object body;
          body.emplace("owner", Canon(static_cast<u64>(b.owner)));
          body.emplace("index", Canon(b.sub_share.index));
          body.emplace("value", Canon(b.sub_share.value));
          log(holder_id, coordinator, "idm/backup-share", Canon(std::move(body)));
          backups.push_back(b);
        }
      }
      u64 recovered = recover_absent_partial(backups, pk_.backup_threshold, pk_.backup_modulus,
                                             pk_.parties, n, ciphertext);
      metrics_.recoveries += 1;
      Canon::Object body;
      body.emplace("owner", Canon(static_cast<u64>(p.id)));
      body.emplace("value", Canon(recovered));
      log(coordinator, kBroadcast, "idm/recovered-partial", Canon(std::move(body)));
      partials.push_back({p.id, recovered});
    }
    return partials;
  }

  void log(int from, int to, std::string kind, const Canon& body) {
    Message m;
    m.round = round_++;
    m.from = from;
    m.to = to;
    m.kind = std::move(kind);
    m.body = canon_bytes(body);
    metrics_.total_bytes += m.body.size();
    transcript_.push_back(std::move(m));
  }

  PublicParams pk_;
  std::vector<AuthorityParty> parties_;
  int maintainer_ = 1;
  Transcript transcript_;
  Metrics metrics_;
  u64 round_ = 0;
};

}  // namespace tidm
