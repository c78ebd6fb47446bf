#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "tidm/bytes.hpp"
#include "tidm/error.hpp"
#include "tidm/modmath.hpp"

namespace tidm {

using Json = nlohmann::json;

inline Json parse_json(std::string_view text) {
  Json j = Json::parse(text, nullptr, false);
  require(!j.is_discarded(), Err::ParseError, "malformed JSON");
  return j;
}

inline Json parse_body(const Bytes& body) { return parse_json(to_string(body)); }

// Canonical integers round-trip either as plain JSON numbers or as
// "0x"-prefixed hex strings once the magnitude reaches 2^53.
inline u64 get_u64(const Json& j) {
  if (j.is_number_unsigned()) return j.get<u64>();
  if (j.is_number_integer()) {
    auto v = j.get<i64>();
    require(v >= 0, Err::ParseError, "expected non-negative integer");
    return static_cast<u64>(v);
  }
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    require(s.size() > 2 && s[0] == '0' && s[1] == 'x', Err::ParseError,
            "expected 0x-prefixed integer string");
    u64 v = 0;
    for (std::size_t i = 2; i < s.size(); ++i) {
      int nib = hex_nibble(s[i]);
      require(nib >= 0, Err::ParseError, "invalid hex digit in integer");
      require(v <= (~u64{0} >> 4), Err::ParseError, "integer overflows 64 bits");
      v = v << 4 | static_cast<u64>(nib);
    }
    return v;
  }
  fail(Err::ParseError, "expected integer");
}

inline i64 get_i64(const Json& j) {
  if (j.is_number_integer()) return j.get<i64>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (!s.empty() && s[0] == '-') {
      u64 mag = get_u64(Json(s.substr(1)));
      require(mag <= static_cast<u64>(INT64_MAX) + 1, Err::ParseError, "integer underflow");
      return mag == static_cast<u64>(INT64_MAX) + 1 ? INT64_MIN : -static_cast<i64>(mag);
    }
    u64 mag = get_u64(j);
    require(mag <= static_cast<u64>(INT64_MAX), Err::ParseError, "integer overflow");
    return static_cast<i64>(mag);
  }
  fail(Err::ParseError, "expected integer");
}

inline Bytes get_hex_bytes(const Json& j) {
  require(j.is_string(), Err::ParseError, "expected hex string");
  const auto& s = j.get_ref<const std::string&>();
  require(s.size() >= 2 && s[0] == '0' && s[1] == 'x', Err::ParseError,
          "expected 0x-prefixed byte string");
  return hex_decode(std::string_view(s).substr(2));
}

}  // namespace tidm
