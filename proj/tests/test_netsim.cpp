#include <doctest.h>

#include <memory>
#include <vector>

#include <tidm/netsim.hpp>

using namespace tidm;

namespace {

// Each party broadcasts a greeting in round 0, echoes what it heard in round
// 1, and stops.
class EchoParty final : public Protocol {
public:
  void on_round(PartyContext& ctx, const std::vector<Message>& inbox) override {
    if (step_ == 0) {
      ctx.broadcast("hello", to_bytes("hi from " + std::to_string(ctx.id())));
    } else if (step_ == 1) {
      for (const auto& m : inbox) {
        if (m.from != ctx.id()) ctx.send(m.from, "echo", m.body);
      }
    } else {
      finished_ = true;
    }
    ++step_;
  }

  bool done() const override { return finished_; }

private:
  int step_ = 0;
  bool finished_ = false;
};

class SilentParty final : public Protocol {
public:
  void on_round(PartyContext&, const std::vector<Message>&) override {}
  bool done() const override { return false; }
};

std::vector<std::unique_ptr<Protocol>> make_echo(std::size_t k) {
  std::vector<std::unique_ptr<Protocol>> parties;
  for (std::size_t i = 0; i < k; ++i) parties.push_back(std::make_unique<EchoParty>());
  return parties;
}

}  // namespace

TEST_CASE("identical seeds give identical transcripts") {
  auto a = make_echo(3);
  auto b = make_echo(3);
  auto ra = run_protocol(a, {}, 1);
  auto rb = run_protocol(b, {}, 1);
  REQUIRE(ra.transcript.size() == rb.transcript.size());
  CHECK(transcript_to_jsonl(ra.transcript) == transcript_to_jsonl(rb.transcript));
  CHECK(ra.transcript.size() == 3 + 6);  // 3 broadcasts + 6 echoes
}

TEST_CASE("serial and parallel modes agree byte for byte") {
  auto a = make_echo(4);
  auto b = make_echo(4);
  auto serial = run_protocol(a, {}, 9, false);
  auto parallel = run_protocol(b, {}, 9, true);
  CHECK(transcript_to_jsonl(serial.transcript) == transcript_to_jsonl(parallel.transcript));
  CHECK(serial.metrics.total_bytes == parallel.metrics.total_bytes);
  CHECK(serial.metrics.rounds == parallel.metrics.rounds);
}

TEST_CASE("crashed parties emit nothing from their crash round") {
  auto parties = make_echo(3);
  AdversaryConfig adv;
  adv.crash_at(3, 1);
  auto result = run_protocol(parties, adv, 1);
  for (const auto& m : result.transcript) {
    if (m.from == 3) CHECK(m.round < 1);
  }
  bool party3_round0 = false;
  for (const auto& m : result.transcript) {
    if (m.from == 3 && m.round == 0) party3_round0 = true;
  }
  CHECK(party3_round0);
}

TEST_CASE("crash scheduling the same party twice is rejected") {
  AdversaryConfig adv;
  adv.crash_at(2, 1);
  CHECK_THROWS_WITH_AS(adv.crash_at(2, 5), doctest::Contains("AlreadyCrashed"), Error);
}

TEST_CASE("honest-majority bound on corrupted parties") {
  AdversaryConfig adv;
  adv.corrupt(1).corrupt(2);
  auto parties = make_echo(3);
  CHECK_THROWS_WITH_AS((void)run_protocol(parties, adv, 1), doctest::Contains("InvalidConfig"),
                       Error);
  AdversaryConfig ok;
  ok.corrupt(2);
  auto parties2 = make_echo(3);
  CHECK_NOTHROW((void)run_protocol(parties2, ok, 1));
}

TEST_CASE("corrupt view filters exactly the coalition's messages") {
  auto parties = make_echo(3);
  AdversaryConfig adv;
  adv.corrupt(2);
  auto result = run_protocol(parties, adv, 5);

  auto empty_view = corrupt_view(result.transcript, {});
  CHECK(empty_view.empty());

  auto view = corrupt_view(result.transcript, adv);
  for (const auto& m : view) {
    CHECK((m.from == 2 || m.to == 2 || m.to == kBroadcast));
  }
  // Private echo between 1 and 3 must be excluded.
  bool found_private_13 = false;
  for (const auto& m : result.transcript) {
    if (m.from == 1 && m.to == 3) found_private_13 = true;
  }
  CHECK(found_private_13);
  for (const auto& m : view) {
    CHECK(!(m.from == 1 && m.to == 3));
  }
}

TEST_CASE("metrics conserve transcript bytes") {
  auto parties = make_echo(5);
  auto result = run_protocol(parties, {}, 2);
  std::uint64_t total = 0;
  for (const auto& m : result.transcript) total += m.body.size();
  CHECK(result.metrics.total_bytes == total);
}

TEST_CASE("stalled protocols deadlock instead of spinning") {
  std::vector<std::unique_ptr<Protocol>> parties;
  parties.push_back(std::make_unique<SilentParty>());
  parties.push_back(std::make_unique<SilentParty>());
  CHECK_THROWS_WITH_AS((void)run_protocol(parties, {}, 1), doctest::Contains("Deadlock"), Error);
}

TEST_CASE("transcript serialization marks broadcasts") {
  Message m{3, 1, kBroadcast, "kind", to_bytes("xy")};
  auto line = canon_encode(message_to_canon(m));
  CHECK(line ==
        R"({"bodyHex":"7879","from":1,"kind":"kind","round":3,"to":"broadcast"})");
}
