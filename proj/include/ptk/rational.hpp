// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>

#include "ptk/error.hpp"

namespace ptk {

/// Exact rational on 64-bit numerator / positive denominator, with 128-bit
/// intermediates. Big enough for token-count arithmetic (values up to ~1e18);
/// anything that would not reduce back into 64 bits is an error, not a
/// silent truncation.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t n) : num_(n) {}  // NOLINT(google-explicit-constructor)
  Rational(std::int64_t num, std::int64_t den) { assign(num, den); }

  /// Accepts "4", "3/2", "1.5", and scientific forms like "1e12" or "1.5e-4".
  static Rational parse(std::string_view s) {
    auto slash = s.find('/');
    if (slash != std::string_view::npos) {
      return Rational(parse_int(s.substr(0, slash)), parse_int(s.substr(slash + 1)));
    }
    return parse_decimal(s);
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  bool is_integer() const { return den_ == 1; }
  bool is_zero() const { return num_ == 0; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  std::int64_t to_int() const {
    require(den_ == 1, "rational ", str(), " is not an integer");
    return num_;
  }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  /// floor(*this * x). x is a plain integer (e.g. a native token count).
  std::int64_t floor_mul(std::int64_t x) const {
    __int128 p = static_cast<__int128>(num_) * x;
    __int128 q = floor_div(p, den_);
    return narrow(q, "floor_mul overflow");
  }

  /// round(*this * scale) with round-half-up, computed exactly.
  std::int64_t round_scaled(std::int64_t scale) const {
    __int128 p = static_cast<__int128>(num_) * scale;
    // floor((2p + den) / (2 den))
    __int128 q = floor_div(2 * p + den_, 2 * static_cast<__int128>(den_));
    return narrow(q, "round_scaled overflow");
  }

  std::int64_t floor() const { return narrow(floor_div(num_, den_), "floor overflow"); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return from128(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                   static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return from128(static_cast<__int128>(a.num_) * b.den_ - static_cast<__int128>(b.num_) * a.den_,
                   static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return from128(static_cast<__int128>(a.num_) * b.num_,
                   static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    require(b.num_ != 0, "rational division by zero");
    return from128(static_cast<__int128>(a.num_) * b.den_,
                   static_cast<__int128>(a.den_) * b.num_);
  }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num_) * b.den_ < static_cast<__int128>(b.num_) * a.den_;
  }
  friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
  friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
  friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

 private:
  void assign(__int128 num, __int128 den) {
    require(den != 0, "rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    __int128 g = gcd128(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    num_ = narrow(num, "rational numerator overflow");
    den_ = narrow(den, "rational denominator overflow");
  }

  static Rational from128(__int128 num, __int128 den) {
    Rational r;
    r.assign(num, den);
    return r;
  }

  static __int128 gcd128(__int128 a, __int128 b) {
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? 1 : a;
  }

  static __int128 floor_div(__int128 a, __int128 b) {
    __int128 q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  }

  static std::int64_t narrow(__int128 v, const char* what) {
    require(v >= std::numeric_limits<std::int64_t>::min() &&
                v <= std::numeric_limits<std::int64_t>::max(),
            what);
    return static_cast<std::int64_t>(v);
  }

  static std::int64_t parse_int(std::string_view s) {
    require(!s.empty(), "empty number");
    bool neg = false;
    std::size_t i = 0;
    if (s[0] == '+' || s[0] == '-') {
      neg = s[0] == '-';
      i = 1;
    }
    require(i < s.size(), "malformed number: ", std::string(s));
    __int128 v = 0;
    for (; i < s.size(); ++i) {
      require(s[i] >= '0' && s[i] <= '9', "malformed number: ", std::string(s));
      v = v * 10 + (s[i] - '0');
      require(v <= std::numeric_limits<std::int64_t>::max(), "number out of range: ", std::string(s));
    }
    return static_cast<std::int64_t>(neg ? -v : v);
  }

  static Rational parse_decimal(std::string_view s) {
    require(!s.empty(), "empty number");
    std::size_t i = 0;
    bool neg = false;
    if (s[0] == '+' || s[0] == '-') {
      neg = s[0] == '-';
      i = 1;
    }
    __int128 mantissa = 0;
    std::int64_t frac_digits = 0;
    bool seen_digit = false, seen_dot = false;
    std::int64_t exponent = 0;
    for (; i < s.size(); ++i) {
      char c = s[i];
      if (c >= '0' && c <= '9') {
        mantissa = mantissa * 10 + (c - '0');
        require(mantissa <= std::numeric_limits<std::int64_t>::max(),
                "number out of range: ", std::string(s));
        if (seen_dot) ++frac_digits;
        seen_digit = true;
      } else if (c == '.' && !seen_dot) {
        seen_dot = true;
      } else if ((c == 'e' || c == 'E') && seen_digit) {
        exponent = parse_int(s.substr(i + 1));
        break;
      } else {
        fail("malformed number: ", std::string(s));
      }
    }
    require(seen_digit, "malformed number: ", std::string(s));
    if (neg) mantissa = -mantissa;
    std::int64_t pow10 = exponent - frac_digits;
    __int128 num = mantissa, den = 1;
    for (std::int64_t p = 0; p < pow10; ++p) {
      num *= 10;
      require(num <= std::numeric_limits<std::int64_t>::max() &&
                  num >= std::numeric_limits<std::int64_t>::min(),
              "number out of range: ", std::string(s));
    }
    for (std::int64_t p = 0; p > pow10; --p) den *= 10;
    return from128(num, den);
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace ptk
