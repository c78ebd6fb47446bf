#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tidm/bytes.hpp"
#include "tidm/error.hpp"
#include "tidm/sha256.hpp"

namespace tidm {

// Canonical JSON value. Everything that is hashed or signed anywhere in the
// system is first serialized through canon_encode:
//   - object keys sorted lexicographically byte-wise, no whitespace
//   - integers of magnitude >= 2^53 and all byte strings as "0x"-prefixed
//     lowercase hex strings
//   - reals as shortest round-trip decimal
class Canon {
public:
  using Array = std::vector<Canon>;
  using Object = std::map<std::string, Canon>;

  Canon() : v_(nullptr) {}
  Canon(std::nullptr_t) : v_(nullptr) {}
  Canon(bool b) : v_(b) {}
  Canon(int v) : v_(static_cast<std::int64_t>(v)) {}
  Canon(unsigned v) : v_(static_cast<std::uint64_t>(v)) {}
  Canon(long v) : v_(static_cast<std::int64_t>(v)) {}
  Canon(long long v) : v_(static_cast<std::int64_t>(v)) {}
  Canon(unsigned long v) : v_(static_cast<std::uint64_t>(v)) {}
  Canon(unsigned long long v) : v_(static_cast<std::uint64_t>(v)) {}
  Canon(double v) : v_(v) {}
  Canon(const char* s) : v_(std::string(s)) {}
  Canon(std::string s) : v_(std::move(s)) {}
  Canon(std::string_view s) : v_(std::string(s)) {}
  Canon(Bytes b) : v_(std::move(b)) {}
  Canon(const Digest& d) : v_(Bytes(d.begin(), d.end())) {}
  Canon(Array a) : v_(std::move(a)) {}
  Canon(Object o) : v_(std::move(o)) {}

  static Canon array(Array a = {}) { return Canon(std::move(a)); }
  static Canon object(Object o = {}) { return Canon(std::move(o)); }

  Canon& operator[](const std::string& key) { return std::get<Object>(v_)[key]; }

  void push_back(Canon v) { std::get<Array>(v_).push_back(std::move(v)); }

  void encode(std::string& out) const {
    std::visit([&out](const auto& v) { encode_value(out, v); }, v_);
  }

private:
  static void encode_value(std::string& out, std::nullptr_t) { out += "null"; }

  static void encode_value(std::string& out, bool b) { out += b ? "true" : "false"; }

  static void encode_value(std::string& out, std::int64_t v) {
    if (v < 0 && v != INT64_MIN && static_cast<std::uint64_t>(-v) >= (1ull << 53)) {
      out += "\"-0x";
      append_hex(out, static_cast<std::uint64_t>(-v));
      out += '"';
    } else if (v == INT64_MIN) {
      out += "\"-0x8000000000000000\"";
    } else if (v >= 0) {
      encode_value(out, static_cast<std::uint64_t>(v));
    } else {
      out += std::to_string(v);
    }
  }

  static void encode_value(std::string& out, std::uint64_t v) {
    if (v >= (1ull << 53)) {
      out += "\"0x";
      append_hex(out, v);
      out += '"';
    } else {
      out += std::to_string(v);
    }
  }

  static void encode_value(std::string& out, double v) {
    require(std::isfinite(v), Err::InvalidConfig, "non-finite real in canonical value");
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
  }

  static void encode_value(std::string& out, const std::string& s) {
    out += '"';
    for (unsigned char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        default:
          if (c < 0x20) {
            static const char* digits = "0123456789abcdef";
            out += "\\u00";
            out += digits[c >> 4];
            out += digits[c & 0xf];
          } else {
            out += static_cast<char>(c);
          }
      }
    }
    out += '"';
  }

  static void encode_value(std::string& out, const Bytes& b) {
    out += "\"0x";
    out += hex_encode(b);
    out += '"';
  }

  static void encode_value(std::string& out, const Array& a) {
    out += '[';
    bool first = true;
    for (const auto& v : a) {
      if (!first) out += ',';
      first = false;
      v.encode(out);
    }
    out += ']';
  }

  static void encode_value(std::string& out, const Object& o) {
    out += '{';
    bool first = true;
    for (const auto& [k, v] : o) {
      if (!first) out += ',';
      first = false;
      encode_value(out, k);
      out += ':';
      v.encode(out);
    }
    out += '}';
  }

  static void append_hex(std::string& out, std::uint64_t v) {
    char buf[16];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, 16);
    out.append(buf, res.ptr);
  }

  std::variant<std::nullptr_t, bool, std::int64_t, std::uint64_t, double, std::string, Bytes,
               Array, Object>
      v_;
};

inline std::string canon_encode(const Canon& v) {
  std::string out;
  v.encode(out);
  return out;
}

inline Bytes canon_bytes(const Canon& v) { return to_bytes(canon_encode(v)); }

inline Digest canon_sha256(const Canon& v) { return sha256(canon_encode(v)); }

}  // namespace tidm
