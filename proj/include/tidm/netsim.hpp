#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "tidm/bytes.hpp"
#include "tidm/canonical.hpp"
#include "tidm/error.hpp"
#include "tidm/rng.hpp"

namespace tidm {

// Addressing: parties are 1..k, kBroadcast fans a message out to every party
// (sender included), kClient marks the requester side of a driven session.
inline constexpr int kBroadcast = -1;
inline constexpr int kClient = 0;

struct Message {
  std::uint64_t round = 0;
  int from = 0;
  int to = 0;
  std::string kind;
  Bytes body;
};

using Transcript = std::vector<Message>;

struct Metrics {
  std::uint64_t rounds = 0;
  std::uint64_t total_bytes = 0;
  std::uint64_t candidate_attempts = 0;
  std::uint64_t recoveries = 0;
  double wall_clock_seconds = 0.0;

  Canon to_canon() const {
    Canon::Object o;
    o.emplace("rounds", Canon(rounds));
    o.emplace("totalBytes", Canon(total_bytes));
    o.emplace("candidateAttempts", Canon(candidate_attempts));
    o.emplace("recoveries", Canon(recoveries));
    o.emplace("wallClockSeconds", Canon(wall_clock_seconds));
    return Canon(std::move(o));
  }
};

// Passive corruption set plus crash schedule. Corrupted parties follow the
// protocol; the harness replays their view for leakage assertions.
class AdversaryConfig {
public:
  AdversaryConfig() = default;

  AdversaryConfig& corrupt(int party) {
    corrupted_.insert(party);
    return *this;
  }

  AdversaryConfig& crash_at(int party, std::uint64_t round) {
    require(!crash_schedule_.contains(party), Err::AlreadyCrashed,
            "party " + std::to_string(party) + " already scheduled to crash");
    crash_schedule_.emplace(party, round);
    return *this;
  }

  const std::set<int>& corrupted() const { return corrupted_; }
  const std::map<int, std::uint64_t>& crash_schedule() const { return crash_schedule_; }

  void validate(std::size_t k) const {
    require(corrupted_.size() <= (k - 1) / 2, Err::InvalidConfig,
            "corrupted set violates the honest-majority bound");
    for (auto [p, r] : crash_schedule_) {
      require(p >= 1 && p <= static_cast<int>(k), Err::InvalidConfig, "crash target out of range");
      (void)r;
    }
    for (int p : corrupted_) {
      require(p >= 1 && p <= static_cast<int>(k), Err::InvalidConfig,
              "corrupted party out of range");
    }
  }

private:
  std::set<int> corrupted_;
  std::map<int, std::uint64_t> crash_schedule_;
};

class PartyContext {
public:
  PartyContext(int id, std::size_t k, Sha256Drbg rng)
      : id_(id), k_(k), rng_(std::move(rng)) {}

  int id() const { return id_; }
  std::size_t party_count() const { return k_; }
  RandomSource& rng() { return rng_; }
  const Digest& seed_key() const { return rng_.key(); }

  void send(int to, std::string kind, Bytes body) {
    outbox_.push_back(Message{0, id_, to, std::move(kind), std::move(body)});
  }

  void broadcast(std::string kind, Bytes body) {
    send(kBroadcast, std::move(kind), std::move(body));
  }

  std::vector<Message> take_outbox() { return std::exchange(outbox_, {}); }

private:
  int id_;
  std::size_t k_;
  Sha256Drbg rng_;
  std::vector<Message> outbox_;
};

// One party's half of a synchronous protocol. on_round is called once per
// round with the messages delivered that round (round 0 delivers nothing).
class Protocol {
public:
  virtual ~Protocol() = default;
  virtual void on_round(PartyContext& ctx, const std::vector<Message>& inbox) = 0;
  virtual bool done() const = 0;
};

struct RunResult {
  Transcript transcript;
  Metrics metrics;
};

// Synchronous round scheduler: messages sent in round r are delivered in
// round r+1; delivery order within a round is canonical (from, to, kind), so
// transcripts are bit-identical in serial and parallel modes.
inline RunResult run_protocol(std::vector<std::unique_ptr<Protocol>>& parties,
                              const AdversaryConfig& adversary, std::uint64_t seed,
                              bool parallel = false, std::uint64_t max_rounds = 1u << 20) {
  const std::size_t k = parties.size();
  require(k >= 1, Err::InvalidConfig, "need at least one party");
  adversary.validate(k);

  auto started = std::chrono::steady_clock::now();

  std::vector<PartyContext> contexts;
  contexts.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    contexts.emplace_back(static_cast<int>(i + 1), k,
                          party_rng(seed, static_cast<int>(i + 1)));
  }

  RunResult result;
  std::vector<Message> pending;

  auto crashed = [&](int party, std::uint64_t round) {
    auto it = adversary.crash_schedule().find(party);
    return it != adversary.crash_schedule().end() && round >= it->second;
  };

  for (std::uint64_t round = 0; round < max_rounds; ++round) {
    // Deliver last round's sends.
    std::vector<std::vector<Message>> inboxes(k);
    for (const auto& m : pending) {
      if (m.to == kBroadcast) {
        for (std::size_t j = 0; j < k; ++j) inboxes[j].push_back(m);
      } else if (m.to >= 1 && m.to <= static_cast<int>(k)) {
        inboxes[static_cast<std::size_t>(m.to - 1)].push_back(m);
      }
    }
    pending.clear();

    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < k; ++i) {
      if (!parties[i]->done() && !crashed(static_cast<int>(i + 1), round)) live.push_back(i);
    }
    if (live.empty()) break;

    auto step = [&](std::size_t i) { parties[i]->on_round(contexts[i], inboxes[i]); };
    if (parallel) {
      std::vector<std::future<void>> futures;
      futures.reserve(live.size());
      for (std::size_t i : live) {
        futures.push_back(std::async(std::launch::async, step, i));
      }
      for (auto& f : futures) f.get();
    } else {
      for (std::size_t i : live) step(i);
    }

    std::vector<Message> sent;
    for (std::size_t i : live) {
      for (auto& m : contexts[i].take_outbox()) {
        m.round = round;
        sent.push_back(std::move(m));
      }
    }
    std::stable_sort(sent.begin(), sent.end(), [](const Message& a, const Message& b) {
      return std::tie(a.from, a.to, a.kind) < std::tie(b.from, b.to, b.kind);
    });

    result.metrics.rounds = round + 1;
    for (const auto& m : sent) result.metrics.total_bytes += m.body.size();
    for (const auto& m : sent) result.transcript.push_back(m);
    pending = std::move(sent);

    bool all_done = true;
    for (std::size_t i = 0; i < k; ++i) {
      if (!parties[i]->done() && !crashed(static_cast<int>(i + 1), round + 1)) all_done = false;
    }
    if (all_done) break;
    require(!pending.empty(), Err::Deadlock, "no party progressed in round " + std::to_string(round));
  }

  result.metrics.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

// Everything a passively corrupted coalition observes: messages it sent,
// messages addressed to it, and all broadcasts (when the coalition is
// non-empty).
inline Transcript corrupt_view(const Transcript& transcript, const AdversaryConfig& adversary) {
  Transcript view;
  const auto& bad = adversary.corrupted();
  if (bad.empty()) return view;
  for (const auto& m : transcript) {
    if (bad.contains(m.from) || bad.contains(m.to) || m.to == kBroadcast) view.push_back(m);
  }
  return view;
}

inline Canon message_to_canon(const Message& m) {
  Canon::Object o;
  o.emplace("round", Canon(m.round));
  o.emplace("from", Canon(static_cast<std::int64_t>(m.from)));
  o.emplace("to", m.to == kBroadcast ? Canon("broadcast") : Canon(static_cast<std::int64_t>(m.to)));
  o.emplace("kind", Canon(m.kind));
  o.emplace("bodyHex", Canon(hex_encode(m.body)));
  return Canon(std::move(o));
}

// One JSON object per message, newline separated.
inline std::string transcript_to_jsonl(const Transcript& t) {
  std::string out;
  for (const auto& m : t) {
    out += canon_encode(message_to_canon(m));
    out += '\n';
  }
  return out;
}

}  // namespace tidm
