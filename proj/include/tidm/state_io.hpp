#pragma once

// State-directory layout: pk.json, party-<i>.secret.json, arl.json,
// bundles/*.ab.json, tokens/*.json, groups/*.json. Everything is written in
// canonical JSON so replays are byte-identical.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tidm/bundle.hpp"
#include "tidm/idm.hpp"
#include "tidm/json_util.hpp"

namespace tidm {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Err::ParseError, "cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), Err::ParseError, "cannot write " + path.string());
  out << content;
}

// --- public parameters ---------------------------------------------------------

inline PublicParams public_params_from_json(const Json& j) {
  PublicParams pk;
  pk.rsa.modulus = get_u64(j.at("modulus"));
  pk.rsa.exponent = get_u64(j.at("exponent"));
  pk.parties = get_u64(j.at("parties"));
  pk.share_field_modulus = get_u64(j.at("shareFieldModulus"));
  pk.backup_modulus = get_u64(j.at("backupModulus"));
  pk.backup_threshold = get_u64(j.at("backupThreshold"));
  for (const auto& [rank, t] : j.at("rankPolicy").items()) {
    pk.rank_policy.required.emplace(rank, get_u64(t));
  }
  for (const auto& r : j.at("rankOrdering")) {
    pk.rank_policy.ordering.push_back(r.get<std::string>());
  }
  pk.rank_policy.default_rank = j.at("defaultRank").get<std::string>();
  return pk;
}

// --- authority party state -----------------------------------------------------

inline Canon party_to_canon(const AuthorityParty& p) {
  Canon::Object o;
  o.emplace("partyId", Canon(static_cast<i64>(p.id)));
  Canon::Object share;
  share.emplace("p", Canon(p.rsa_share.p));
  share.emplace("q", Canon(p.rsa_share.q));
  share.emplace("phi", Canon(p.rsa_share.phi));
  share.emplace("d", Canon(p.rsa_share.d));
  share.emplace("correction", Canon(p.rsa_share.correction));
  o.emplace("rsaShare", Canon(std::move(share)));
  o.emplace("mk", Canon(Bytes(p.mk.begin(), p.mk.end())));
  o.emplace("sealKey", Canon(Bytes(p.seal_key.begin(), p.seal_key.end())));
  Canon::Array held;
  for (const auto& b : p.held) {
    Canon::Object backup;
    backup.emplace("owner", Canon(static_cast<i64>(b.owner)));
    backup.emplace("holder", Canon(static_cast<i64>(b.holder)));
    backup.emplace("index", Canon(b.sub_share.index));
    backup.emplace("value", Canon(b.sub_share.value));
    held.push_back(Canon(std::move(backup)));
  }
  o.emplace("heldBackups", Canon(std::move(held)));
  Canon::Object arl;
  arl.emplace("version", Canon(p.arl.version));
  Canon::Array users;
  for (const auto& u : p.arl.revoked_users) users.push_back(Canon(u));
  arl.emplace("revokedUsers", Canon(std::move(users)));
  Canon::Array grants;
  for (const auto& [user, attr] : p.arl.revoked_grants) {
    grants.push_back(Canon(Canon::Array{Canon(user), Canon(attr.canonical())}));
  }
  arl.emplace("revokedGrants", Canon(std::move(grants)));
  arl.emplace("maintainerPartyId", Canon(static_cast<i64>(p.arl.maintainer_party)));
  o.emplace("arlReplica", Canon(std::move(arl)));
  Canon::Object enrolled;
  for (const auto& [user, record] : p.enrolled) enrolled.emplace(user, record.to_canon());
  o.emplace("enrolled", Canon(std::move(enrolled)));
  Canon::Object pseudonyms;
  for (const auto& [pseud, user] : p.pseudonyms) pseudonyms.emplace(pseud, Canon(user));
  o.emplace("pseudonyms", Canon(std::move(pseudonyms)));
  o.emplace("crashed", Canon(p.crashed));
  return Canon(std::move(o));
}

inline RevocationList arl_from_json(const Json& j) {
  RevocationList arl;
  arl.version = get_u64(j.at("version"));
  for (const auto& u : j.at("revokedUsers")) arl.revoked_users.insert(u.get<std::string>());
  for (const auto& g : j.at("revokedGrants")) {
    arl.revoked_grants.emplace(g.at(0).get<std::string>(),
                               AttributeId::parse(g.at(1).get<std::string>()));
  }
  arl.maintainer_party = static_cast<int>(get_i64(j.at("maintainerPartyId")));
  return arl;
}

inline IdentityRecord record_from_json(const Json& j) {
  IdentityRecord r;
  r.user_id = j.at("userId").get<std::string>();
  r.rank = j.at("rank").get<std::string>();
  for (const auto& [label, value] : j.at("claims").items()) {
    r.claims.emplace(label, value.get<std::string>());
  }
  return r;
}

inline AuthorityParty party_from_json(const Json& j) {
  AuthorityParty p;
  p.id = static_cast<int>(get_i64(j.at("partyId")));
  const Json& share = j.at("rsaShare");
  p.rsa_share.party_id = p.id;
  p.rsa_share.p = get_u64(share.at("p"));
  p.rsa_share.q = get_u64(share.at("q"));
  p.rsa_share.phi = get_i64(share.at("phi"));
  p.rsa_share.d = get_i64(share.at("d"));
  p.rsa_share.correction = get_u64(share.at("correction"));
  auto mk = get_hex_bytes(j.at("mk"));
  auto seal = get_hex_bytes(j.at("sealKey"));
  require(mk.size() == 32 && seal.size() == 32, Err::ParseError, "bad key material length");
  std::copy(mk.begin(), mk.end(), p.mk.begin());
  std::copy(seal.begin(), seal.end(), p.seal_key.begin());
  for (const auto& b : j.at("heldBackups")) {
    p.held.push_back({static_cast<int>(get_i64(b.at("owner"))),
                      static_cast<int>(get_i64(b.at("holder"))),
                      {get_u64(b.at("index")), get_u64(b.at("value"))}});
  }
  p.arl = arl_from_json(j.at("arlReplica"));
  for (const auto& [user, record] : j.at("enrolled").items()) {
    (void)user;
    auto r = record_from_json(record);
    p.enrolled.emplace(r.user_id, std::move(r));
  }
  for (const auto& [pseud, user] : j.at("pseudonyms").items()) {
    p.pseudonyms.emplace(pseud, user.get<std::string>());
  }
  p.crashed = j.at("crashed").get<bool>();
  return p;
}

// --- tokens and groups ----------------------------------------------------------

inline SsoToken token_from_json(const Json& j) {
  SsoToken t;
  const Json& body = j.at("body");
  t.subject = body.at("subject").get<std::string>();
  for (const auto& a : body.at("audiences")) t.audiences.push_back(a.get<std::string>());
  t.issued_epoch = get_i64(body.at("issuedEpoch"));
  t.expiry_epoch = get_i64(body.at("expiryEpoch"));
  t.nonce = get_hex_bytes(body.at("nonce"));
  t.signature = get_u64(j.at("signature"));
  return t;
}

inline Canon group_state_to_canon(const GroupAuthState& g) {
  Canon::Object o;
  o.emplace("groupId", Canon(g.group_id));
  o.emplace("epoch", Canon(g.epoch));
  o.emplace("commitment", Canon(g.commitment));
  Canon::Array shares;
  for (const auto& [member, point] : g.member_shares) {
    shares.push_back(Canon(Canon::Array{Canon(static_cast<i64>(member)), Canon(point.index),
                                        Canon(point.value)}));
  }
  o.emplace("memberShares", Canon(std::move(shares)));
  o.emplace("threshold", Canon(static_cast<u64>(g.threshold)));
  o.emplace("memberCount", Canon(static_cast<u64>(g.member_count)));
  o.emplace("fieldModulus", Canon(g.field_modulus));
  o.emplace("consumed", Canon(g.consumed));
  return Canon(std::move(o));
}

inline GroupAuthState group_state_from_json(const Json& j) {
  GroupAuthState g;
  g.group_id = j.at("groupId").get<std::string>();
  g.epoch = get_i64(j.at("epoch"));
  auto digest = get_hex_bytes(j.at("commitment"));
  require(digest.size() == g.commitment.size(), Err::ParseError, "bad commitment length");
  std::copy(digest.begin(), digest.end(), g.commitment.begin());
  for (const auto& s : j.at("memberShares")) {
    g.member_shares.emplace(static_cast<int>(get_i64(s.at(0))),
                            SharePoint{get_u64(s.at(1)), get_u64(s.at(2))});
  }
  g.threshold = get_u64(j.at("threshold"));
  g.member_count = get_u64(j.at("memberCount"));
  g.field_modulus = get_u64(j.at("fieldModulus"));
  g.consumed = j.at("consumed").get<bool>();
  return g;
}

// --- attribute keys --------------------------------------------------------------

inline Canon attribute_key_to_canon(const AttributeKey& key) {
  Canon::Object o;
  o.emplace("userId", Canon(key.user_id));
  Canon::Array attrs;
  for (const auto& a : key.attributes) attrs.push_back(Canon(a.canonical()));
  o.emplace("attributes", Canon(std::move(attrs)));
  o.emplace("rank", Canon(key.rank));
  o.emplace("epoch", Canon(key.epoch));
  Canon::Object tags;
  for (const auto& [attr, per_party] : key.tags) {
    Canon::Array list;
    for (const auto& t : per_party) list.push_back(Canon(t));
    tags.emplace(attr.canonical(), Canon(std::move(list)));
  }
  o.emplace("tags", Canon(std::move(tags)));
  Canon::Array chain;
  for (const auto& c : key.delegation_chain) chain.push_back(Canon(c));
  o.emplace("delegationChain", Canon(std::move(chain)));
  return Canon(std::move(o));
}

inline AttributeKey attribute_key_from_json(const Json& j) {
  AttributeKey key;
  key.user_id = j.at("userId").get<std::string>();
  for (const auto& a : j.at("attributes")) {
    key.attributes.insert(AttributeId::parse(a.get<std::string>()));
  }
  key.rank = j.at("rank").get<std::string>();
  key.epoch = get_i64(j.at("epoch"));
  for (const auto& [attr, list] : j.at("tags").items()) {
    std::vector<Digest> tags;
    for (const auto& t : list) {
      auto bytes = get_hex_bytes(t);
      require(bytes.size() == 32, Err::ParseError, "bad tag length");
      Digest d{};
      std::copy(bytes.begin(), bytes.end(), d.begin());
      tags.push_back(d);
    }
    key.tags.emplace(AttributeId::parse(attr), std::move(tags));
  }
  for (const auto& c : j.at("delegationChain")) {
    key.delegation_chain.push_back(c.get<std::string>());
  }
  return key;
}

// --- whole-system persistence -----------------------------------------------------

inline void save_system(const IdmSystem& sys, const fs::path& dir) {
  write_file(dir / "pk.json", canon_encode(sys.pk().to_canon()));
  for (std::size_t i = 1; i <= sys.party_count(); ++i) {
    const auto& p = sys.party(static_cast<int>(i));
    write_file(dir / ("party-" + std::to_string(i) + ".secret.json"),
               canon_encode(party_to_canon(p)));
  }
  const auto& maintainer = sys.party(sys.maintainer());
  Canon::Object arl;
  arl.emplace("version", Canon(maintainer.arl.version));
  Canon::Array users;
  for (const auto& u : maintainer.arl.revoked_users) users.push_back(Canon(u));
  arl.emplace("revokedUsers", Canon(std::move(users)));
  Canon::Array grants;
  for (const auto& [user, attr] : maintainer.arl.revoked_grants) {
    grants.push_back(Canon(Canon::Array{Canon(user), Canon(attr.canonical())}));
  }
  arl.emplace("revokedGrants", Canon(std::move(grants)));
  arl.emplace("maintainerPartyId", Canon(static_cast<i64>(maintainer.arl.maintainer_party)));
  write_file(dir / "arl.json", canon_encode(Canon(std::move(arl))));
}

inline IdmSystem load_system(const fs::path& dir) {
  auto pk = public_params_from_json(parse_json(read_file(dir / "pk.json")));
  std::vector<AuthorityParty> parties;
  for (std::size_t i = 1; i <= pk.parties; ++i) {
    parties.push_back(party_from_json(
        parse_json(read_file(dir / ("party-" + std::to_string(i) + ".secret.json")))));
  }
  return IdmSystem::restore(std::move(pk), std::move(parties));
}

// --- CLI configuration --------------------------------------------------------------

struct CliConfig {
  std::size_t parties = 3;
  u64 seed = 7;
  KeygenConfig keygen;
  RankPolicy rank_policy;
  EncryptOptions encrypt_options;

  static CliConfig defaults() {
    CliConfig cfg;
    cfg.keygen.parties = cfg.parties;
    cfg.rank_policy = RankPolicy::standard(cfg.parties);
    return cfg;
  }
};

inline CliConfig cli_config_from_json(const Json& j) {
  CliConfig cfg = CliConfig::defaults();
  static const std::set<std::string> known = {
      "parties",     "seed",          "rankPolicy",         "rankOrdering",
      "defaultRank", "keygen",        "sensitivity",        "defaultSensitivity",
      "apoptosisThreshold",           "evaporationThreshold"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    require(known.contains(key), Err::InvalidConfig, "unknown config key " + key);
  }
  if (j.contains("parties")) cfg.parties = get_u64(j.at("parties"));
  cfg.keygen.parties = cfg.parties;
  cfg.rank_policy = RankPolicy::standard(cfg.parties);
  if (j.contains("seed")) cfg.seed = get_u64(j.at("seed"));
  if (j.contains("rankPolicy")) {
    cfg.rank_policy.required.clear();
    for (const auto& [rank, t] : j.at("rankPolicy").items()) {
      cfg.rank_policy.required.emplace(rank, get_u64(t));
    }
    cfg.rank_policy.ordering.clear();
  }
  if (j.contains("rankOrdering")) {
    cfg.rank_policy.ordering.clear();
    for (const auto& r : j.at("rankOrdering")) {
      cfg.rank_policy.ordering.push_back(r.get<std::string>());
    }
  }
  if (j.contains("defaultRank")) cfg.rank_policy.default_rank = j.at("defaultRank").get<std::string>();
  if (j.contains("keygen")) {
    static const std::set<std::string> keygen_keys = {
        "primeShareBits", "trialDivisionBound", "biprimalityRounds", "publicExponent",
        "bgwPrime",       "maxAttempts",        "batchSize",         "backupThreshold"};
    for (const auto& [key, value] : j.at("keygen").items()) {
      (void)value;
      require(keygen_keys.contains(key), Err::InvalidConfig, "unknown keygen key " + key);
    }
    const Json& kg = j.at("keygen");
    if (kg.contains("primeShareBits"))
      cfg.keygen.prime_share_bits = static_cast<unsigned>(get_u64(kg.at("primeShareBits")));
    if (kg.contains("trialDivisionBound"))
      cfg.keygen.trial_division_bound = get_u64(kg.at("trialDivisionBound"));
    if (kg.contains("biprimalityRounds"))
      cfg.keygen.biprimality_rounds = get_u64(kg.at("biprimalityRounds"));
    if (kg.contains("publicExponent")) cfg.keygen.public_exponent = get_u64(kg.at("publicExponent"));
    if (kg.contains("bgwPrime")) cfg.keygen.bgw_prime = get_u64(kg.at("bgwPrime"));
    if (kg.contains("maxAttempts")) cfg.keygen.max_attempts = get_u64(kg.at("maxAttempts"));
    if (kg.contains("batchSize")) cfg.keygen.batch_size = get_u64(kg.at("batchSize"));
    if (kg.contains("backupThreshold"))
      cfg.keygen.backup_threshold = get_u64(kg.at("backupThreshold"));
  }
  if (j.contains("sensitivity")) {
    for (const auto& [label, s] : j.at("sensitivity").items()) {
      cfg.encrypt_options.sensitivity.emplace(label, s.get<double>());
    }
  }
  if (j.contains("defaultSensitivity"))
    cfg.encrypt_options.default_sensitivity = j.at("defaultSensitivity").get<double>();
  if (j.contains("apoptosisThreshold"))
    cfg.encrypt_options.apoptosis_threshold = j.at("apoptosisThreshold").get<double>();
  if (j.contains("evaporationThreshold"))
    cfg.encrypt_options.evaporation_threshold = j.at("evaporationThreshold").get<double>();
  return cfg;
}

}  // namespace tidm
