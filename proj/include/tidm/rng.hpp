#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tidm/bytes.hpp"
#include "tidm/error.hpp"
#include "tidm/sha256.hpp"

namespace tidm {

// Injectable randomness source. Every randomized operation takes one of these
// so tests can pin polynomial coefficients and candidate values exactly.
class RandomSource {
public:
  virtual ~RandomSource() = default;

  virtual std::uint64_t next_u64() = 0;

  // Uniform value in [0, bound) via rejection sampling.
  virtual std::uint64_t below(std::uint64_t bound) {
    require(bound > 0, Err::InvalidConfig, "below(0)");
    if (bound == 1) return 0;
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  virtual void fill(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
      std::uint64_t v = next_u64();
      for (int b = 0; b < 8 && i < out.size(); ++b) {
        out[i++] = static_cast<std::uint8_t>(v >> (8 * b));
      }
    }
  }

  Bytes bytes(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
  }
};

// Deterministic SHA-256 counter generator: block i = SHA-256(key || be64(i)),
// key = SHA-256(seed material). Stream identical across platforms.
class Sha256Drbg final : public RandomSource {
public:
  explicit Sha256Drbg(std::span<const std::uint8_t> seed) : key_(sha256(seed)) {}

  explicit Sha256Drbg(const Digest& key) : key_(key) {}

  static Sha256Drbg from_u64(std::uint64_t seed) {
    auto b = be64(seed);
    return Sha256Drbg(std::span<const std::uint8_t>(b.data(), b.size()));
  }

  // Independent substream: key' = SHA-256(key || label).
  Sha256Drbg child(std::string_view label) const {
    Sha256 h;
    h.update(std::span<const std::uint8_t>(key_.data(), key_.size()));
    h.update(label);
    return Sha256Drbg(h.finish());
  }

  const Digest& key() const { return key_; }

  std::uint64_t next_u64() override {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | take_byte();
    return v;
  }

  void fill(std::span<std::uint8_t> out) override {
    for (auto& b : out) b = take_byte();
  }

private:
  std::uint8_t take_byte() {
    if (pos_ == block_.size()) {
      Sha256 h;
      h.update(std::span<const std::uint8_t>(key_.data(), key_.size()));
      auto ctr = be64(counter_++);
      h.update(std::span<const std::uint8_t>(ctr.data(), ctr.size()));
      block_ = h.finish();
      pos_ = 0;
    }
    return block_[pos_++];
  }

  Digest key_;
  Digest block_{};
  std::size_t pos_ = block_.size();
  std::uint64_t counter_ = 0;
};

// Test stub: below() and next_u64() replay a scripted sequence.
class ScriptedRandom final : public RandomSource {
public:
  explicit ScriptedRandom(std::vector<std::uint64_t> values) : values_(std::move(values)) {}

  std::uint64_t next_u64() override { return take(); }

  std::uint64_t below(std::uint64_t bound) override { return take() % bound; }

  void fill(std::span<std::uint8_t> out) override {
    for (auto& b : out) b = static_cast<std::uint8_t>(take());
  }

private:
  std::uint64_t take() {
    require(next_ < values_.size(), Err::InvalidConfig, "scripted rng exhausted");
    return values_[next_++];
  }

  std::vector<std::uint64_t> values_;
  std::size_t next_ = 0;
};

// Per-party stream per the simulator contract: SHA-256(seed || partyId).
inline Sha256Drbg party_rng(std::uint64_t seed, int party_id) {
  Sha256 h;
  auto s = be64(seed);
  h.update(std::span<const std::uint8_t>(s.data(), s.size()));
  auto p = be64(static_cast<std::uint64_t>(party_id));
  h.update(std::span<const std::uint8_t>(p.data(), p.size()));
  return Sha256Drbg(h.finish());
}

}  // namespace tidm
