#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "essd/error.hpp"

namespace essd {

// Hierarchical drug classification code: one to four two-digit components
// joined by hyphens, e.g. "05-01-01-01". A shorter code names the family
// containing every code that extends it.
struct BnfCode {
  std::array<std::uint8_t, 4> component{};
  std::uint8_t length = 0;

  friend auto operator<=>(const BnfCode&, const BnfCode&) = default;

  bool has_prefix(const BnfCode& prefix) const {
    if (prefix.length > length) return false;
    for (std::uint8_t i = 0; i < prefix.length; ++i)
      if (component[i] != prefix.component[i]) return false;
    return true;
  }
};

inline std::optional<BnfCode> try_parse_bnf(std::string_view s) {
  BnfCode code;
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (code.length == 4) return std::nullopt;
    if (pos + 2 > s.size()) return std::nullopt;
    char a = s[pos], b = s[pos + 1];
    if (a < '0' || a > '9' || b < '0' || b > '9') return std::nullopt;
    code.component[code.length++] =
        static_cast<std::uint8_t>((a - '0') * 10 + (b - '0'));
    pos += 2;
    if (pos == s.size()) break;
    if (s[pos] != '-') return std::nullopt;
    ++pos;
    if (pos == s.size()) return std::nullopt;
  }
  if (code.length == 0) return std::nullopt;
  return code;
}

inline BnfCode parse_bnf(std::string_view s) {
  auto code = try_parse_bnf(s);
  if (!code)
    throw Error(Errc::MalformedRow,
                "invalid drug code '" + std::string(s) + "'");
  return *code;
}

inline std::string to_string(const BnfCode& code) {
  std::string out;
  for (std::uint8_t i = 0; i < code.length; ++i) {
    if (i) out.push_back('-');
    out.push_back(static_cast<char>('0' + code.component[i] / 10));
    out.push_back(static_cast<char>('0' + code.component[i] % 10));
  }
  return out;
}

// A drug family is identified by a code prefix; membership is prefix match.
using DrugFamily = BnfCode;

}  // namespace essd
