// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptk/error.hpp"

namespace ptk::uni {

struct CodepointRange {
  char32_t lo;
  char32_t hi;
};

#include "ptk/unicode_tables.inc"

namespace detail {
template <std::size_t N>
bool in_ranges(char32_t cp, const CodepointRange (&ranges)[N]) {
  std::size_t lo = 0, hi = N;
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (cp < ranges[mid].lo) {
      hi = mid;
    } else if (cp > ranges[mid].hi) {
      lo = mid + 1;
    } else {
      return true;
    }
  }
  return false;
}
}  // namespace detail

inline bool is_letter(char32_t cp) { return detail::in_ranges(cp, kLetterRanges); }
inline bool is_digit(char32_t cp) { return detail::in_ranges(cp, kDigitRanges); }
inline bool is_whitespace(char32_t cp) { return detail::in_ranges(cp, kWhitespaceRanges); }

/// Decodes the scalar starting at byte offset i. Returns the number of bytes
/// consumed, or 0 if the input is not well-formed UTF-8 at i (overlong forms,
/// surrogates, out-of-range values and truncation all count as malformed).
inline std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
  if (i >= s.size()) return 0;
  auto byte = [&](std::size_t k) { return static_cast<std::uint8_t>(s[k]); };
  std::uint8_t b0 = byte(i);
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  if (b0 < 0xC2) return 0;  // continuation byte or overlong C0/C1
  auto cont = [&](std::size_t k) { return k < s.size() && (byte(k) & 0xC0) == 0x80; };
  if (b0 < 0xE0) {
    if (!cont(i + 1)) return 0;
    cp = (char32_t{b0 & 0x1Fu} << 6) | (byte(i + 1) & 0x3Fu);
    return 2;
  }
  if (b0 < 0xF0) {
    if (!cont(i + 1) || !cont(i + 2)) return 0;
    cp = (char32_t{b0 & 0x0Fu} << 12) | (char32_t{byte(i + 1) & 0x3Fu} << 6) |
         (byte(i + 2) & 0x3Fu);
    if (cp < 0x800) return 0;
    if (cp >= 0xD800 && cp <= 0xDFFF) return 0;
    return 3;
  }
  if (b0 < 0xF5) {
    if (!cont(i + 1) || !cont(i + 2) || !cont(i + 3)) return 0;
    cp = (char32_t{b0 & 0x07u} << 18) | (char32_t{byte(i + 1) & 0x3Fu} << 12) |
         (char32_t{byte(i + 2) & 0x3Fu} << 6) | (byte(i + 3) & 0x3Fu);
    if (cp < 0x10000 || cp > 0x10FFFF) return 0;
    return 4;
  }
  return 0;
}

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  char32_t cp;
  while (i < s.size()) {
    std::size_t n = decode_utf8(s, i, cp);
    if (n == 0) return false;
    i += n;
  }
  return true;
}

/// Number of unicode scalars. Errors on malformed input.
inline std::size_t scalar_count(std::string_view s) {
  std::size_t i = 0, count = 0;
  char32_t cp;
  while (i < s.size()) {
    std::size_t n = decode_utf8(s, i, cp);
    require(n > 0, "invalid UTF-8 at byte offset ", i);
    i += n;
    ++count;
  }
  return count;
}

inline std::size_t letter_count(std::string_view s) {
  std::size_t i = 0, count = 0;
  char32_t cp;
  while (i < s.size()) {
    std::size_t n = decode_utf8(s, i, cp);
    require(n > 0, "invalid UTF-8 at byte offset ", i);
    if (is_letter(cp)) ++count;
    i += n;
  }
  return count;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

/// Byte spans [begin, end) of maximal non-whitespace runs.
inline std::vector<std::pair<std::size_t, std::size_t>> word_spans(std::string_view s) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t i = 0;
  char32_t cp;
  std::size_t word_start = std::string_view::npos;
  while (i < s.size()) {
    std::size_t n = decode_utf8(s, i, cp);
    require(n > 0, "invalid UTF-8 at byte offset ", i);
    if (is_whitespace(cp)) {
      if (word_start != std::string_view::npos) {
        spans.emplace_back(word_start, i);
        word_start = std::string_view::npos;
      }
    } else if (word_start == std::string_view::npos) {
      word_start = i;
    }
    i += n;
  }
  if (word_start != std::string_view::npos) spans.emplace_back(word_start, s.size());
  return spans;
}

inline std::size_t word_count(std::string_view s) { return word_spans(s).size(); }

/// True when every scalar in s is whitespace (and s is non-empty valid UTF-8).
inline bool whitespace_only(std::string_view s) {
  if (s.empty() || !valid_utf8(s)) return false;
  std::size_t i = 0;
  char32_t cp;
  while (i < s.size()) {
    std::size_t n = decode_utf8(s, i, cp);
    if (!is_whitespace(cp)) return false;
    i += n;
  }
  return true;
}

}  // namespace ptk::uni
