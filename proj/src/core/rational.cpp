#include "kqrk/rational.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>

#include "kqrk/error.hpp"

namespace kqrk {

namespace {

__extension__ using i128 = __int128;

Rational make_checked(i128 num, i128 den) {
  if (den == 0) throw Error(ErrorKind::InvalidArgument, "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  i128 a = num < 0 ? -num : num;
  i128 b = den;
  while (b != 0) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  const i128 g = a == 0 ? 1 : a;
  num /= g;
  den /= g;
  constexpr i128 lim = INT64_MAX;
  if (num > lim || num < -lim || den > lim) {
    throw Error(ErrorKind::InvalidArgument, "rational overflow");
  }
  return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error(ErrorKind::InvalidArgument, "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = num / (g == 0 ? 1 : g);
  den_ = den / (g == 0 ? 1 : g);
}

Rational Rational::parse(std::string_view text) {
  const std::string s(text);
  if (s.empty()) throw Error(ErrorKind::InvalidArgument, "empty rational");
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    char* end = nullptr;
    const long long n = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + slash) throw Error(ErrorKind::InvalidArgument, "bad rational '" + s + "'");
    const char* dstart = s.c_str() + slash + 1;
    const long long d = std::strtoll(dstart, &end, 10);
    if (end == dstart || *end != '\0') throw Error(ErrorKind::InvalidArgument, "bad rational '" + s + "'");
    return Rational(n, d);
  }

  // Decimal with optional exponent, converted digit by digit.
  std::size_t pos = 0;
  bool negative = false;
  if (s[pos] == '+' || s[pos] == '-') negative = s[pos++] == '-';
  i128 mantissa = 0;
  int scale = 0;
  bool any_digit = false;
  bool after_point = false;
  for (; pos < s.size(); ++pos) {
    const char c = s[pos];
    if (c >= '0' && c <= '9') {
      mantissa = mantissa * 10 + (c - '0');
      if (after_point) ++scale;
      any_digit = true;
      if (mantissa > (i128(1) << 100)) throw Error(ErrorKind::InvalidArgument, "rational too long '" + s + "'");
    } else if (c == '.' && !after_point) {
      after_point = true;
    } else {
      break;
    }
  }
  if (!any_digit) throw Error(ErrorKind::InvalidArgument, "bad rational '" + s + "'");
  if (pos < s.size()) {
    if (s[pos] != 'e' && s[pos] != 'E') throw Error(ErrorKind::InvalidArgument, "bad rational '" + s + "'");
    char* end = nullptr;
    const long exp = std::strtol(s.c_str() + pos + 1, &end, 10);
    if (*end != '\0' || exp > 18 || exp < -18) throw Error(ErrorKind::InvalidArgument, "bad rational '" + s + "'");
    scale -= static_cast<int>(exp);
  }
  i128 num = negative ? -mantissa : mantissa;
  i128 den = 1;
  for (; scale > 0; --scale) den *= 10;
  for (; scale < 0; ++scale) num *= 10;
  return make_checked(num, den);
}

Rational Rational::nearest_feasible(double value, std::size_t m, std::int64_t lo, std::int64_t hi) {
  if (m == 0) throw Error(ErrorKind::InvalidArgument, "m must be positive");
  auto k = static_cast<std::int64_t>(std::llround(value * static_cast<double>(m)));
  if (k < lo) k = lo;
  if (k > hi) k = hi;
  return Rational(k, static_cast<std::int64_t>(m));
}

bool Rational::scales_to_integer(std::size_t m) const {
  return (i128(num_) * i128(m)) % den_ == 0;
}

std::size_t Rational::count_of(std::size_t m) const {
  if (!scales_to_integer(m)) {
    throw Error(ErrorKind::NonIntegerQuantile,
                str() + " * " + std::to_string(m) + " is not an integer");
  }
  const i128 v = i128(num_) * i128(m) / den_;
  if (v < 0) throw Error(ErrorKind::InvalidArgument, "negative count from " + str());
  return static_cast<std::size_t>(v);
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
  return make_checked(i128(a.num_) * b.den_ + i128(b.num_) * a.den_, i128(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  return make_checked(i128(a.num_) * b.den_ - i128(b.num_) * a.den_, i128(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return make_checked(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw Error(ErrorKind::InvalidArgument, "division by zero");
  return make_checked(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  const i128 lhs = i128(a.num_) * b.den_;
  const i128 rhs = i128(b.num_) * a.den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

}  // namespace kqrk
