// Command-line front end: runs the identity-management flows against a state
// directory. Machine-readable JSON goes to stdout, diagnostics to stderr.
// Exit codes: 0 success, 1 denial/reject verdict, 2 usage error, 3 internal.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <tidm/state_io.hpp>
#include <tidm/tidm.hpp>

using namespace tidm;

namespace {

struct GlobalArgs {
  std::string state_dir = "state";
  std::string config_file;
  u64 seed = 7;
  bool seed_set = false;
  std::string transcript_out;
  bool parallel = false;
};

CliConfig load_config(const GlobalArgs& args) {
  CliConfig cfg = CliConfig::defaults();
  if (!args.config_file.empty()) {
    cfg = cli_config_from_json(parse_json(read_file(args.config_file)));
  }
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

void emit(const Canon& value) { std::cout << canon_encode(value) << "\n"; }

void write_transcript(const GlobalArgs& args, const Transcript& transcript) {
  if (!args.transcript_out.empty()) {
    write_file(args.transcript_out, transcript_to_jsonl(transcript));
  }
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string current;
  for (char c : csv) {
    if (c == ',') {
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

std::set<AttributeId> parse_attrs(const std::string& csv) {
  std::set<AttributeId> out;
  for (const auto& item : split_list(csv)) out.insert(AttributeId::parse(item));
  return out;
}

fs::path token_path(const GlobalArgs& args, const SsoToken& token) {
  return fs::path(args.state_dir) / "tokens" / (hex_encode(token.nonce) + ".json");
}

Canon claims_canon(const std::map<std::string, std::string>& claims) {
  Canon::Object o;
  for (const auto& [label, value] : claims) o.emplace(label, Canon(value));
  return Canon(std::move(o));
}

int run(int argc, char** argv) {
  CLI::App app{"threshold identity management over a state directory"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may appear after the subcommand

  GlobalArgs args;
  app.add_option("--state", args.state_dir, "state directory")->capture_default_str();
  app.add_option("--config", args.config_file, "configuration file (canonical JSON)");
  app.add_option_function<u64>(
      "--seed",
      [&args](u64 v) {
        args.seed = v;
        args.seed_set = true;
      },
      "seed for this invocation");
  app.add_option("--transcript", args.transcript_out, "write the message transcript here");
  app.add_flag("--parallel", args.parallel, "step simulated parties in parallel");

  // --- setup -----------------------------------------------------------------
  auto* setup_cmd = app.add_subcommand("setup", "distributed key generation and party state");
  std::size_t setup_parties = 0;
  setup_cmd->add_option("--parties", setup_parties, "number of authority parties");
  setup_cmd->callback([&] {
    CliConfig cfg = load_config(args);
    if (setup_parties != 0) {
      cfg.parties = setup_parties;
      cfg.keygen.parties = setup_parties;
      cfg.rank_policy = RankPolicy::standard(setup_parties);
    }
    auto sys = IdmSystem::setup(cfg.keygen, cfg.rank_policy, {}, cfg.seed, args.parallel);
    save_system(sys, args.state_dir);
    write_transcript(args, sys.transcript());
    emit(sys.pk().to_canon());
  });

  // --- enroll ----------------------------------------------------------------
  auto* enroll_cmd = app.add_subcommand("enroll", "submit an encrypted identity record");
  std::string enroll_record;
  std::vector<int> enroll_crashes;
  enroll_cmd->add_option("--record", enroll_record, "record file")->required();
  enroll_cmd->add_option("--crash", enroll_crashes, "simulate crashed parties");
  enroll_cmd->callback([&] {
    CliConfig cfg = load_config(args);
    auto sys = load_system(args.state_dir);
    for (int id : enroll_crashes) sys.crash_party(id);
    auto record = record_from_json(parse_json(read_file(enroll_record)));
    auto rng = Sha256Drbg::from_u64(cfg.seed);
    sys.enroll(record, rng);
    save_system(sys, args.state_dir);
    write_transcript(args, sys.transcript());
    Canon::Object out;
    out.emplace("enrolled", Canon(record.user_id));
    out.emplace("claims", Canon(static_cast<u64>(record.claims.size())));
    out.emplace("recoveries", Canon(sys.metrics().recoveries));
    emit(Canon(std::move(out)));
  });

  // --- keygen-user -------------------------------------------------------------
  auto* keygen_cmd = app.add_subcommand("keygen-user", "issue an attribute key");
  std::string kg_user, kg_attrs, kg_rank = "regular";
  i64 kg_epoch = 0;
  keygen_cmd->add_option("--user", kg_user)->required();
  keygen_cmd->add_option("--attrs", kg_attrs, "comma-separated namespace/name list")->required();
  keygen_cmd->add_option("--rank", kg_rank);
  keygen_cmd->add_option("--epoch", kg_epoch);
  keygen_cmd->callback([&] {
    auto sys = load_system(args.state_dir);
    auto key = sys.key_gen(kg_user, parse_attrs(kg_attrs), kg_rank, kg_epoch);
    write_transcript(args, sys.transcript());
    emit(attribute_key_to_canon(key));
  });

  // --- encrypt -----------------------------------------------------------------
  auto* encrypt_cmd = app.add_subcommand("encrypt", "pack a record into an active bundle");
  std::string enc_user, enc_tree, enc_record;
  i64 enc_epoch = 0;
  encrypt_cmd->add_option("--user", enc_user, "enrolled user to encrypt");
  encrypt_cmd->add_option("--record", enc_record, "record file (instead of --user)");
  encrypt_cmd->add_option("--tree", enc_tree, "access tree file")->required();
  encrypt_cmd->add_option("--epoch", enc_epoch);
  encrypt_cmd->callback([&] {
    CliConfig cfg = load_config(args);
    auto sys = load_system(args.state_dir);
    IdentityRecord record;
    if (!enc_record.empty()) {
      record = record_from_json(parse_json(read_file(enc_record)));
    } else {
      require(!enc_user.empty(), Err::InvalidConfig, "need --user or --record");
      require(sys.is_enrolled(enc_user), Err::UnknownUser, "user " + enc_user + " not enrolled");
      record = sys.party(1).enrolled.at(enc_user);
    }
    auto tree = AccessTree::parse(read_file(enc_tree));
    auto options = cfg.encrypt_options;
    options.creation_epoch = enc_epoch;
    auto rng = Sha256Drbg::from_u64(cfg.seed);
    auto bundle = sys.encrypt(record, tree, options, rng);
    fs::path path = fs::path(args.state_dir) / "bundles" / (bundle.bundle_id + ".ab.json");
    write_file(path, bundle_to_json(bundle));
    save_system(sys, args.state_dir);
    write_transcript(args, sys.transcript());
    Canon::Object out;
    out.emplace("bundleId", Canon(bundle.bundle_id));
    out.emplace("path", Canon(path.string()));
    out.emplace("threshold", Canon(static_cast<u64>(bundle.credential.threshold)));
    emit(Canon(std::move(out)));
  });

  // --- authn ---------------------------------------------------------------------
  auto* authn_cmd = app.add_subcommand("authn", "authenticate against a bundle");
  std::string an_bundle, an_key, an_labels, an_loc, an_audiences = "sp/default";
  i64 an_epoch = 0, an_ttl = 10;
  bool an_anonymous = false;
  std::vector<int> an_crashes;
  int authn_exit = 0;
  authn_cmd->add_option("--bundle", an_bundle)->required();
  authn_cmd->add_option("--key", an_key)->required();
  authn_cmd->add_option("--labels", an_labels, "claims to disclose")->required();
  authn_cmd->add_option("--epoch", an_epoch)->required();
  authn_cmd->add_option("--loc", an_loc, "declared location");
  authn_cmd->add_option("--audiences", an_audiences);
  authn_cmd->add_option("--ttl", an_ttl);
  authn_cmd->add_flag("--anonymous", an_anonymous);
  authn_cmd->add_option("--crash", an_crashes, "simulate crashed parties");
  authn_cmd->callback([&] {
    CliConfig cfg = load_config(args);
    auto sys = load_system(args.state_dir);
    for (int id : an_crashes) sys.crash_party(id);
    auto bundle = bundle_from_json_text(read_file(an_bundle));
    auto key = attribute_key_from_json(parse_json(read_file(an_key)));
    EvaluationContext ctx{an_epoch, an_loc};
    AuthenticateOptions options;
    options.audiences = split_list(an_audiences);
    options.token_ttl = an_ttl;
    options.anonymous = an_anonymous;
    auto rng = Sha256Drbg::from_u64(cfg.seed);
    auto result = sys.authenticate(bundle, key, ctx, split_list(an_labels), rng, options);
    save_system(sys, args.state_dir);
    write_transcript(args, sys.transcript());
    Canon::Object out;
    out.emplace("verdict", Canon(auth_verdict_name(result.verdict)));
    if (result.verdict == AuthVerdict::Granted) {
      out.emplace("claims", claims_canon(result.claims));
      out.emplace("token", result.token->to_canon());
      write_file(token_path(args, *result.token), canon_encode(result.token->to_canon()));
    }
    emit(Canon(std::move(out)));
    authn_exit = result.verdict == AuthVerdict::Granted ? 0 : 1;
  });

  // --- delegate ---------------------------------------------------------------------
  auto* delegate_cmd = app.add_subcommand("delegate", "derive a child key offline");
  std::string dg_parent, dg_child, dg_attrs;
  delegate_cmd->add_option("--parent", dg_parent, "parent key file")->required();
  delegate_cmd->add_option("--child", dg_child, "child user id")->required();
  delegate_cmd->add_option("--attrs", dg_attrs, "attribute subset")->required();
  delegate_cmd->callback([&] {
    auto parent = attribute_key_from_json(parse_json(read_file(dg_parent)));
    auto child = delegate_key(parent, dg_child, parse_attrs(dg_attrs));
    emit(attribute_key_to_canon(child));
  });

  // --- revoke -----------------------------------------------------------------------
  auto* revoke_cmd = app.add_subcommand("revoke", "update the attribute revocation list");
  std::string rv_user, rv_attr;
  int rv_party = 0;
  int revoke_exit = 0;
  revoke_cmd->add_option("--user", rv_user)->required();
  revoke_cmd->add_option("--attr", rv_attr, "revoke only this attribute grant");
  revoke_cmd->add_option("--party", rv_party, "calling party (default: maintainer)");
  revoke_cmd->callback([&] {
    auto sys = load_system(args.state_dir);
    RevocationTarget target{rv_user, std::nullopt};
    if (!rv_attr.empty()) target.attribute = AttributeId::parse(rv_attr);
    int caller = rv_party == 0 ? sys.maintainer() : rv_party;
    try {
      u64 version = sys.revoke_target(target, caller);
      save_system(sys, args.state_dir);
      write_transcript(args, sys.transcript());
      Canon::Object out;
      out.emplace("version", Canon(version));
      emit(Canon(std::move(out)));
    } catch (const Error& e) {
      if (e.code() != Err::NotMaintainer) throw;
      Canon::Object out;
      out.emplace("verdict", Canon("NotMaintainer"));
      emit(Canon(std::move(out)));
      revoke_exit = 1;
    }
  });

  // --- sso-issue / sso-verify ----------------------------------------------------------
  auto* sso_issue_cmd = app.add_subcommand("sso-issue", "threshold-sign a single sign-on token");
  std::string si_subject, si_audiences;
  i64 si_ttl = 10, si_epoch = 0;
  sso_issue_cmd->add_option("--subject", si_subject)->required();
  sso_issue_cmd->add_option("--audiences", si_audiences)->required();
  sso_issue_cmd->add_option("--ttl", si_ttl);
  sso_issue_cmd->add_option("--epoch", si_epoch)->required();
  sso_issue_cmd->callback([&] {
    CliConfig cfg = load_config(args);
    auto sys = load_system(args.state_dir);
    auto rng = Sha256Drbg::from_u64(cfg.seed);
    auto token = sys.issue_sso_token(si_subject, split_list(si_audiences), si_ttl, si_epoch, rng);
    write_file(token_path(args, token), canon_encode(token.to_canon()));
    write_transcript(args, sys.transcript());
    emit(token.to_canon());
  });

  auto* sso_verify_cmd = app.add_subcommand("sso-verify", "check a token offline");
  std::string sv_token, sv_audience;
  i64 sv_epoch = 0;
  int sso_exit = 0;
  sso_verify_cmd->add_option("--token", sv_token)->required();
  sso_verify_cmd->add_option("--audience", sv_audience)->required();
  sso_verify_cmd->add_option("--epoch", sv_epoch)->required();
  sso_verify_cmd->callback([&] {
    auto pk = public_params_from_json(parse_json(read_file(fs::path(args.state_dir) / "pk.json")));
    auto token = token_from_json(parse_json(read_file(sv_token)));
    auto verdict = verify_sso_token(token, pk.rsa, sv_audience, sv_epoch);
    Canon::Object out;
    out.emplace("verdict", Canon(verdict.ok ? "accept" : verdict.reason));
    emit(Canon(std::move(out)));
    sso_exit = verdict.ok ? 0 : 1;
  });

  // --- group-setup / group-auth ----------------------------------------------------------
  auto* group_setup_cmd = app.add_subcommand("group-setup", "deal shares for group authentication");
  std::string gs_group;
  std::size_t gs_members = 0, gs_threshold = 0;
  i64 gs_epoch = 0;
  u64 gs_modulus = 0;
  group_setup_cmd->add_option("--group", gs_group)->required();
  group_setup_cmd->add_option("--members", gs_members)->required();
  group_setup_cmd->add_option("--threshold", gs_threshold)->required();
  group_setup_cmd->add_option("--epoch", gs_epoch)->required();
  group_setup_cmd->add_option("--modulus", gs_modulus, "field modulus (default: session field)");
  group_setup_cmd->callback([&] {
    CliConfig cfg = load_config(args);
    PrimeField field(gs_modulus != 0 ? gs_modulus : default_share_field().modulus());
    auto rng = Sha256Drbg::from_u64(cfg.seed);
    auto state = group_setup(gs_group, gs_members, gs_threshold, field, gs_epoch, rng);
    write_file(fs::path(args.state_dir) / "groups" / (gs_group + ".json"),
               canon_encode(group_state_to_canon(state)));
    emit(group_state_to_canon(state));
  });

  auto* group_auth_cmd = app.add_subcommand("group-auth", "reconstruct and check the commitment");
  std::string ga_group, ga_shares;
  i64 ga_epoch = 0;
  int group_exit = 0;
  group_auth_cmd->add_option("--group", ga_group)->required();
  group_auth_cmd->add_option("--shares", ga_shares, "index:value,index:value,...")->required();
  group_auth_cmd->add_option("--epoch", ga_epoch)->required();
  group_auth_cmd->callback([&] {
    fs::path path = fs::path(args.state_dir) / "groups" / (ga_group + ".json");
    auto state = group_state_from_json(parse_json(read_file(path)));
    std::vector<SharePoint> submitted;
    for (const auto& part : split_list(ga_shares)) {
      auto colon = part.find(':');
      require(colon != std::string::npos, Err::ParseError, "share must be index:value");
      submitted.push_back(
          {std::stoull(part.substr(0, colon)), std::stoull(part.substr(colon + 1))});
    }
    Canon::Object out;
    try {
      bool ok = group_authenticate(state, submitted, ga_epoch);
      write_file(path, canon_encode(group_state_to_canon(state)));
      out.emplace("verdict", Canon(ok ? "accept" : "reject"));
      group_exit = ok ? 0 : 1;
    } catch (const Error& e) {
      if (e.code() == Err::InsufficientShares || e.code() == Err::EpochMismatch ||
          e.code() == Err::Consumed) {
        out.emplace("verdict", Canon(err_name(e.code())));
        group_exit = 1;
      } else {
        throw;
      }
    }
    emit(Canon(std::move(out)));
  });

  // --- bundle-send -------------------------------------------------------------------------
  auto* bundle_send_cmd = app.add_subcommand("bundle-send", "deliver a bundle to a host");
  std::string bs_bundle, bs_host = "host";
  double bs_trust = 0.0;
  bundle_send_cmd->add_option("--bundle", bs_bundle)->required();
  bundle_send_cmd->add_option("--host", bs_host);
  bundle_send_cmd->add_option("--trust", bs_trust, "host trust level in [0,1]")->required();
  bundle_send_cmd->callback([&] {
    auto bundle = bundle_from_json_text(read_file(bs_bundle));
    HostProfile host{bs_host, bs_trust};
    auto decision = evaluate_arrival(bundle, host);
    auto after = apply_arrival(bundle, decision, bs_trust);
    write_file(bs_bundle, bundle_to_json(after));
    Canon::Object out;
    switch (decision.kind) {
      case ArrivalKind::Apoptosis: out.emplace("decision", Canon("Apoptosis")); break;
      case ArrivalKind::Evaporate: out.emplace("decision", Canon("Evaporate")); break;
      case ArrivalKind::Full: out.emplace("decision", Canon("Full")); break;
    }
    Canon::Array retained;
    for (const auto& label : decision.retained_labels) retained.push_back(Canon(label));
    out.emplace("retained", Canon(std::move(retained)));
    out.emplace("integrityFailure", Canon(decision.integrity_failure));
    emit(Canon(std::move(out)));
  });

  // --- bench-dkg -----------------------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench-dkg", "keygen benchmark over a seed range");
  std::string bench_seeds = "1..20";
  bench_cmd->add_option("--seeds", bench_seeds, "range, e.g. 1..20");
  bench_cmd->callback([&] {
    CliConfig cfg = load_config(args);
    auto dots = bench_seeds.find("..");
    require(dots != std::string::npos, Err::ParseError, "seed range must be lo..hi");
    u64 lo = std::stoull(bench_seeds.substr(0, dots));
    u64 hi = std::stoull(bench_seeds.substr(dots + 2));
    require(lo <= hi, Err::ParseError, "empty seed range");
    Canon::Array runs;
    Metrics total;
    for (u64 seed = lo; seed <= hi; ++seed) {
      auto out = run_distributed_keygen(cfg.keygen, {}, seed, args.parallel);
      Canon::Object entry;
      entry.emplace("seed", Canon(seed));
      entry.emplace("modulus", Canon(out.public_key.modulus));
      entry.emplace("metrics", out.metrics.to_canon());
      runs.push_back(Canon(std::move(entry)));
      total.rounds += out.metrics.rounds;
      total.total_bytes += out.metrics.total_bytes;
      total.candidate_attempts += out.metrics.candidate_attempts;
      total.wall_clock_seconds += out.metrics.wall_clock_seconds;
    }
    Canon::Object out;
    out.emplace("runs", Canon(std::move(runs)));
    out.emplace("total", total.to_canon());
    emit(Canon(std::move(out)));
  });

  // --- export-party-secret ---------------------------------------------------------------------
  auto* export_cmd = app.add_subcommand("export-party-secret", "print one party's secret state");
  int ex_party = 0;
  export_cmd->add_option("--party", ex_party)->required();
  export_cmd->callback([&] {
    std::cerr << "warning: exporting secret material of party " << ex_party << "\n";
    std::cout << read_file(fs::path(args.state_dir) /
                           ("party-" + std::to_string(ex_party) + ".secret.json"))
              << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  if (authn_exit != 0) return authn_exit;
  if (sso_exit != 0) return sso_exit;
  if (group_exit != 0) return group_exit;
  if (revoke_exit != 0) return revoke_exit;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
}
