#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tidm/canonical.hpp"
#include "tidm/dkg.hpp"
#include "tidm/json_util.hpp"
#include "tidm/netsim.hpp"

namespace tidm {

struct KeygenOutput {
  RsaPublicKey public_key;
  std::vector<PrivateShare> shares;           // indexed by party - 1
  std::vector<std::vector<ShareBackup>> held; // held[i]: sub-shares stored at party i+1
  u64 backup_modulus = 0;
  Metrics metrics;
  Transcript transcript;
};

// One authority party's half of the dealer-free keygen. Candidates are
// pipelined batch_size at a time; every message derives from broadcasts plus
// per-candidate substreams, so transcripts are identical in serial and
// parallel scheduling and the candidate stream does not depend on batching.
class KeygenParty final : public Protocol {
public:
  explicit KeygenParty(KeygenConfig cfg) : cfg_(std::move(cfg)), field_(cfg_.effective_bgw_prime()) {}

  void on_round(PartyContext& ctx, const std::vector<Message>& inbox) override {
    switch (stage_) {
      case Stage::Start:
        start_iteration(ctx);
        break;
      case Stage::AwaitShares:
        handle_shares(ctx, inbox);
        break;
      case Stage::AwaitOpen:
        handle_open(ctx, inbox);
        break;
      case Stage::AwaitBase:
        handle_base(ctx, inbox);
        break;
      case Stage::AwaitV:
        handle_v(ctx, inbox);
        break;
      case Stage::AwaitZeta:
        handle_zeta(ctx, inbox);
        break;
      case Stage::AwaitTrial:
        handle_trial(ctx, inbox);
        break;
      case Stage::AwaitBackups:
        handle_backups(ctx, inbox);
        break;
      case Stage::Done:
        break;
    }
  }

  bool done() const override { return stage_ == Stage::Done; }

  const PrivateShare& share() const { return share_; }
  const RsaPublicKey& public_key() const { return public_key_; }
  const std::vector<ShareBackup>& held_backups() const { return held_; }
  u64 backup_modulus() const { return backup_modulus_; }
  u64 candidate_attempts() const { return attempts_; }

private:
  enum class Stage { Start, AwaitShares, AwaitOpen, AwaitBase, AwaitV, AwaitZeta, AwaitTrial,
                     AwaitBackups, Done };

  struct Slot {
    u64 cand_index = 0;
    bool alive = true;
    u64 my_p = 0, my_q = 0;
    u64 sum_a = 0, sum_b = 0, sum_z = 0;  // accumulated shares at this party
    u64 modulus = 0;
    std::size_t rounds_done = 0;
    std::optional<Sha256Drbg> base_rng;   // party 1 only
    u64 current_base = 0;
    u64 my_v = 0;
  };

  void start_iteration(PartyContext& ctx) {
    require(attempts_ < cfg_.max_attempts, Err::MaxAttemptsExceeded,
            "no biprime found within " + std::to_string(cfg_.max_attempts) + " candidates");
    std::size_t width = std::min(cfg_.batch_size, cfg_.max_attempts - attempts_);
    const std::size_t k = cfg_.parties;
    const std::size_t degree = (k - 1) / 2;

    slots_.clear();
    slots_.resize(width);
    // Per-recipient share bundles.
    std::vector<Canon::Array> bundles(k);
    for (std::size_t s = 0; s < width; ++s) {
      Slot& slot = slots_[s];
      slot.cand_index = attempts_ + s + 1;
      Sha256Drbg cand_rng =
          Sha256Drbg(ctx.seed_key()).child("cand/" + std::to_string(slot.cand_index));
      auto [p, q] = generate_candidate_shares(cfg_, ctx.id(), cand_rng);
      slot.my_p = p;
      slot.my_q = q;

      auto a_shares = shamir_share(field_.reduce(p), degree + 1, k, field_, cand_rng);
      auto b_shares = shamir_share(field_.reduce(q), degree + 1, k, field_, cand_rng);
      auto mask = zero_share(k - 1, k, field_, cand_rng);

      for (std::size_t r = 0; r < k; ++r) {
        if (static_cast<int>(r + 1) == ctx.id()) {
          slot.sum_a = field_.add(slot.sum_a, a_shares.points[r].value);
          slot.sum_b = field_.add(slot.sum_b, b_shares.points[r].value);
          slot.sum_z = field_.add(slot.sum_z, mask.points[r].value);
        } else {
          Canon::Object entry;
          entry.emplace("j", Canon(slot.cand_index));
          entry.emplace("a", Canon(a_shares.points[r].value));
          entry.emplace("b", Canon(b_shares.points[r].value));
          entry.emplace("z", Canon(mask.points[r].value));
          bundles[r].push_back(Canon(std::move(entry)));
        }
      }
    }
    attempts_ += width;

    for (std::size_t r = 0; r < k; ++r) {
      if (static_cast<int>(r + 1) == ctx.id()) continue;
      Canon::Object body;
      body.emplace("cands", Canon(std::move(bundles[r])));
      ctx.send(static_cast<int>(r + 1), "dkg/shares", canon_bytes(Canon(std::move(body))));
    }
    stage_ = Stage::AwaitShares;
  }

  void handle_shares(PartyContext& ctx, const std::vector<Message>& inbox) {
    for (const auto& m : inbox) {
      if (m.kind != "dkg/shares") continue;
      auto body = parse_body(m.body);
      for (const auto& entry : body.at("cands")) {
        Slot& slot = slot_for(get_u64(entry.at("j")));
        slot.sum_a = field_.add(slot.sum_a, get_u64(entry.at("a")));
        slot.sum_b = field_.add(slot.sum_b, get_u64(entry.at("b")));
        slot.sum_z = field_.add(slot.sum_z, get_u64(entry.at("z")));
      }
    }
    Canon::Array opens;
    for (Slot& slot : slots_) {
      Canon::Object entry;
      entry.emplace("j", Canon(slot.cand_index));
      entry.emplace("w", Canon(field_.add(field_.mul(slot.sum_a, slot.sum_b), slot.sum_z)));
      opens.push_back(Canon(std::move(entry)));
    }
    Canon::Object body;
    body.emplace("w", Canon(std::move(opens)));
    ctx.broadcast("dkg/open", canon_bytes(Canon(std::move(body))));
    stage_ = Stage::AwaitOpen;
  }

  void handle_open(PartyContext& ctx, const std::vector<Message>& inbox) {
    std::map<u64, std::vector<SharePoint>> opening;
    for (const auto& m : inbox) {
      if (m.kind != "dkg/open") continue;
      auto body = parse_body(m.body);
      for (const auto& entry : body.at("w")) {
        opening[get_u64(entry.at("j"))].push_back(
            {static_cast<u64>(m.from), get_u64(entry.at("w"))});
      }
    }
    for (Slot& slot : slots_) {
      auto points = opening.at(slot.cand_index);
      slot.modulus = lagrange_at_zero(points, field_);
      if (slot.modulus <= 1 || !trial_division_accepts(slot.modulus, cfg_.trial_division_bound)) {
        slot.alive = false;
      }
    }
    if (!any_alive()) {
      start_iteration(ctx);
      return;
    }
    if (ctx.id() == 1) broadcast_bases(ctx);
    stage_ = Stage::AwaitBase;
  }

  void broadcast_bases(PartyContext& ctx) {
    Canon::Array bases;
    for (Slot& slot : slots_) {
      if (!slot.alive) continue;
      if (!slot.base_rng) {
        slot.base_rng =
            Sha256Drbg(ctx.seed_key()).child("biprime/" + std::to_string(slot.cand_index));
      }
      auto [g, leak] = sample_biprimality_base(slot.modulus, *slot.base_rng);
      (void)leak;  // receivers detect the shared factor from g and N themselves
      Canon::Object entry;
      entry.emplace("j", Canon(slot.cand_index));
      entry.emplace("g", Canon(g));
      bases.push_back(Canon(std::move(entry)));
    }
    Canon::Object body;
    body.emplace("bases", Canon(std::move(bases)));
    ctx.broadcast("dkg/base", canon_bytes(Canon(std::move(body))));
  }

  void handle_base(PartyContext& ctx, const std::vector<Message>& inbox) {
    for (const auto& m : inbox) {
      if (m.kind != "dkg/base") continue;
      auto body = parse_body(m.body);
      for (const auto& entry : body.at("bases")) {
        Slot& slot = slot_for(get_u64(entry.at("j")));
        slot.current_base = get_u64(entry.at("g"));
      }
    }
    Canon::Array vs;
    for (Slot& slot : slots_) {
      if (!slot.alive) continue;
      if (std::gcd(slot.current_base, slot.modulus) != 1) {
        // GcdLeak: the base exposes a factor, candidate discarded.
        slot.alive = false;
        continue;
      }
      u64 exp = biprimality_exponent(ctx.id(), slot.modulus, slot.my_p, slot.my_q);
      slot.my_v = pow_mod(slot.current_base, exp, slot.modulus);
      Canon::Object entry;
      entry.emplace("j", Canon(slot.cand_index));
      entry.emplace("v", Canon(slot.my_v));
      vs.push_back(Canon(std::move(entry)));
    }
    if (!any_alive()) {
      start_iteration(ctx);
      return;
    }
    Canon::Object body;
    body.emplace("vs", Canon(std::move(vs)));
    ctx.broadcast("dkg/v", canon_bytes(Canon(std::move(body))));
    stage_ = Stage::AwaitV;
  }

  void handle_v(PartyContext& ctx, const std::vector<Message>& inbox) {
    std::map<u64, std::map<int, u64>> values;
    for (const auto& m : inbox) {
      if (m.kind != "dkg/v") continue;
      auto body = parse_body(m.body);
      for (const auto& entry : body.at("vs")) {
        values[get_u64(entry.at("j"))][m.from] = get_u64(entry.at("v"));
      }
    }
    for (Slot& slot : slots_) {
      if (!slot.alive) continue;
      std::vector<u64> vs;
      for (std::size_t i = 1; i <= cfg_.parties; ++i) {
        vs.push_back(values.at(slot.cand_index).at(static_cast<int>(i)));
      }
      if (!biprimality_round_accepts(slot.modulus, vs)) {
        slot.alive = false;
      } else {
        slot.rounds_done += 1;
      }
    }
    if (!any_alive()) {
      start_iteration(ctx);
      return;
    }
    if (first_alive().rounds_done < cfg_.biprimality_rounds) {
      if (ctx.id() == 1) broadcast_bases(ctx);
      stage_ = Stage::AwaitBase;
      return;
    }
    // All survivors passed s rounds; reveal phi_i mod e per survivor.
    Canon::Array zetas;
    for (Slot& slot : slots_) {
      if (!slot.alive) continue;
      i64 phi = phi_fragment(ctx.id(), slot.modulus, slot.my_p, slot.my_q);
      i64 e = static_cast<i64>(cfg_.public_exponent);
      i64 r = phi % e;
      if (r < 0) r += e;
      Canon::Object entry;
      entry.emplace("j", Canon(slot.cand_index));
      entry.emplace("z", Canon(static_cast<u64>(r)));
      zetas.push_back(Canon(std::move(entry)));
    }
    Canon::Object body;
    body.emplace("zetas", Canon(std::move(zetas)));
    ctx.broadcast("dkg/zeta", canon_bytes(Canon(std::move(body))));
    stage_ = Stage::AwaitZeta;
  }

  void handle_zeta(PartyContext& ctx, const std::vector<Message>& inbox) {
    std::map<u64, u64> zeta_sum;
    for (const auto& m : inbox) {
      if (m.kind != "dkg/zeta") continue;
      auto body = parse_body(m.body);
      for (const auto& entry : body.at("zetas")) {
        u64 j = get_u64(entry.at("j"));
        zeta_sum[j] = (zeta_sum[j] + get_u64(entry.at("z"))) % cfg_.public_exponent;
      }
    }
    winner_ = nullptr;
    for (Slot& slot : slots_) {
      if (!slot.alive) continue;
      if (zeta_sum.at(slot.cand_index) == 0) {
        // gcd(e, phi) = e: exponent not invertible, retry with the next one.
        slot.alive = false;
        continue;
      }
      winner_ = &slot;
      break;
    }
    if (winner_ == nullptr) {
      start_iteration(ctx);
      return;
    }
    u64 zeta = zeta_sum.at(winner_->cand_index);
    u64 e = cfg_.public_exponent;
    u64 t_mult = e - inv_mod(zeta, e);
    i64 phi = phi_fragment(ctx.id(), winner_->modulus, winner_->my_p, winner_->my_q);
    my_d_ = floor_div(static_cast<i128>(t_mult) * phi, static_cast<i64>(e));
    my_phi_ = phi;

    u64 trial_cipher = pow_mod(2, e, winner_->modulus);
    Canon::Object body;
    body.emplace("j", Canon(winner_->cand_index));
    body.emplace("partial", Canon(partial_decrypt(trial_cipher, my_d_, winner_->modulus)));
    ctx.broadcast("dkg/trial", canon_bytes(Canon(std::move(body))));
    stage_ = Stage::AwaitTrial;
  }

  void handle_trial(PartyContext& ctx, const std::vector<Message>& inbox) {
    const u64 modulus = winner_->modulus;
    u64 acc = 1;
    for (const auto& m : inbox) {
      if (m.kind != "dkg/trial") continue;
      acc = mul_mod(acc, get_u64(parse_body(m.body).at("partial")), modulus);
    }
    u64 trial_cipher = pow_mod(2, cfg_.public_exponent, modulus);
    std::optional<u64> correction;
    for (u64 c = 0; c <= cfg_.parties + 1; ++c) {
      if (acc == 2) { correction = c; break; }
      acc = mul_mod(acc, trial_cipher, modulus);
    }
    require(correction.has_value(), Err::CorrectionNotFound,
            "no correction in [0, k+1] decrypts the test message");

    public_key_ = {modulus, cfg_.public_exponent};
    share_ = {ctx.id(), winner_->my_p, winner_->my_q, my_phi_, my_d_, *correction};

    // Back up my exponent fragment t-of-k across all parties.
    backup_modulus_ = backup_field_modulus(cfg_.parties, modulus);
    Sha256Drbg backup_rng = Sha256Drbg(ctx.seed_key()).child("backup");
    auto backups = replicate_share(my_d_, ctx.id(), cfg_.backup_threshold, cfg_.parties,
                                   backup_modulus_, modulus, backup_rng);
    for (const auto& b : backups) {
      if (b.holder == ctx.id()) {
        held_.push_back(b);
        continue;
      }
      Canon::Object body;
      body.emplace("owner", Canon(static_cast<u64>(b.owner)));
      body.emplace("index", Canon(b.sub_share.index));
      body.emplace("value", Canon(b.sub_share.value));
      ctx.send(b.holder, "dkg/backup", canon_bytes(Canon(std::move(body))));
    }
    stage_ = Stage::AwaitBackups;
  }

  void handle_backups(PartyContext& ctx, const std::vector<Message>& inbox) {
    for (const auto& m : inbox) {
      if (m.kind != "dkg/backup") continue;
      auto body = parse_body(m.body);
      held_.push_back({static_cast<int>(get_u64(body.at("owner"))), ctx.id(),
                       {get_u64(body.at("index")), get_u64(body.at("value"))}});
    }
    stage_ = Stage::Done;
  }

  Slot& slot_for(u64 cand_index) {
    for (Slot& slot : slots_) {
      if (slot.cand_index == cand_index) return slot;
    }
    fail(Err::ParseError, "unknown candidate index " + std::to_string(cand_index));
  }

  bool any_alive() const {
    for (const Slot& slot : slots_) {
      if (slot.alive) return true;
    }
    return false;
  }

  Slot& first_alive() {
    for (Slot& slot : slots_) {
      if (slot.alive) return slot;
    }
    fail(Err::InvalidConfig, "no live candidate");
  }

  KeygenConfig cfg_;
  PrimeField field_;
  Stage stage_ = Stage::Start;
  std::vector<Slot> slots_;
  Slot* winner_ = nullptr;
  std::size_t attempts_ = 0;
  i64 my_d_ = 0;
  i64 my_phi_ = 0;
  PrivateShare share_;
  RsaPublicKey public_key_;
  std::vector<ShareBackup> held_;
  u64 backup_modulus_ = 0;
};

// Runs the full keygen on the simulator and gathers every party's outputs.
inline KeygenOutput run_distributed_keygen(const KeygenConfig& cfg,
                                           const AdversaryConfig& adversary, u64 seed,
                                           bool parallel = false) {
  cfg.validate();
  require(adversary.crash_schedule().empty(), Err::InvalidConfig,
          "keygen requires all parties live");

  std::vector<std::unique_ptr<Protocol>> parties;
  std::vector<KeygenParty*> raw;
  for (std::size_t i = 0; i < cfg.parties; ++i) {
    auto p = std::make_unique<KeygenParty>(cfg);
    raw.push_back(p.get());
    parties.push_back(std::move(p));
  }

  auto run = run_protocol(parties, adversary, seed, parallel);

  KeygenOutput out;
  out.public_key = raw[0]->public_key();
  out.backup_modulus = raw[0]->backup_modulus();
  out.metrics = run.metrics;
  out.metrics.candidate_attempts = raw[0]->candidate_attempts();
  out.transcript = std::move(run.transcript);
  for (auto* p : raw) {
    out.shares.push_back(p->share());
    auto held = p->held_backups();
    std::sort(held.begin(), held.end(),
              [](const ShareBackup& a, const ShareBackup& b) { return a.owner < b.owner; });
    out.held.push_back(std::move(held));
  }
  return out;
}

}  // namespace tidm
