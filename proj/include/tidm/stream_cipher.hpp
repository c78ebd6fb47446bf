#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>

#include "tidm/bytes.hpp"
#include "tidm/error.hpp"
#include "tidm/sha256.hpp"

namespace tidm {

// Toy stream cipher, defined bit-exactly:
//   keystream block j = SHA-256(key || 0x00 || be64(j)), XORed over the data
//   tag              = SHA-256(key || 0x01 || ciphertext)
// Deliberately not an AEAD; the artifact never claims production hardening.

inline Bytes stream_xor(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
  Bytes out(data.begin(), data.end());
  for (std::size_t block = 0; block * 32 < out.size(); ++block) {
    Sha256 h;
    h.update(key);
    h.update(std::uint8_t{0x00});
    auto ctr = be64(block);
    h.update(std::span<const std::uint8_t>(ctr.data(), ctr.size()));
    Digest ks = h.finish();
    for (std::size_t i = 0; i < 32 && block * 32 + i < out.size(); ++i) {
      out[block * 32 + i] ^= ks[i];
    }
  }
  return out;
}

inline Digest stream_tag(std::span<const std::uint8_t> key,
                         std::span<const std::uint8_t> ciphertext) {
  Sha256 h;
  h.update(key);
  h.update(std::uint8_t{0x01});
  h.update(ciphertext);
  return h.finish();
}

// Per-item key derivation so every claim can be released independently:
// item key = SHA-256(key || 0x02 || nonce).
inline Digest derive_item_key(std::span<const std::uint8_t> key,
                              std::span<const std::uint8_t> nonce) {
  Sha256 h;
  h.update(key);
  h.update(std::uint8_t{0x02});
  h.update(nonce);
  return h.finish();
}

struct SealedBox {
  Bytes nonce;
  Bytes ciphertext;
  Digest tag{};
};

inline SealedBox seal(std::span<const std::uint8_t> key, std::span<const std::uint8_t> nonce,
                      std::span<const std::uint8_t> plaintext) {
  Digest item_key = derive_item_key(key, nonce);
  SealedBox box;
  box.nonce = Bytes(nonce.begin(), nonce.end());
  box.ciphertext = stream_xor(item_key, plaintext);
  box.tag = stream_tag(item_key, box.ciphertext);
  return box;
}

inline std::optional<Bytes> open_sealed(std::span<const std::uint8_t> key, const SealedBox& box) {
  Digest item_key = derive_item_key(key, box.nonce);
  if (stream_tag(item_key, box.ciphertext) != box.tag) return std::nullopt;
  return stream_xor(item_key, box.ciphertext);
}

// Flat wire form: nonce(16) || ciphertext || tag(32).
inline Bytes sealed_to_bytes(const SealedBox& box) {
  Bytes out = box.nonce;
  append(out, box.ciphertext);
  append(out, std::span<const std::uint8_t>(box.tag.data(), box.tag.size()));
  return out;
}

inline SealedBox sealed_from_bytes(std::span<const std::uint8_t> raw, std::size_t nonce_len = 16) {
  require(raw.size() >= nonce_len + 32, Err::ParseError, "sealed blob too short");
  SealedBox box;
  box.nonce = Bytes(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(nonce_len));
  box.ciphertext = Bytes(raw.begin() + static_cast<std::ptrdiff_t>(nonce_len), raw.end() - 32);
  std::copy(raw.end() - 32, raw.end(), box.tag.begin());
  return box;
}

}  // namespace tidm
