#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <string_view>

#include "rackcoop/error.hpp"

namespace rackcoop {

// Exact arbitrary-precision rational; all tradeoff and flow arithmetic uses it.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline BigInt numerator_of(const Rational& q) { return boost::multiprecision::numerator(q); }
inline BigInt denominator_of(const Rational& q) { return boost::multiprecision::denominator(q); }

inline Rational make_rational(std::int64_t num, std::int64_t den = 1) {
    if (den == 0) throw ValidationError("rational with zero denominator");
    return Rational(BigInt(num), BigInt(den));
}

// Canonical text form: "p" for integers, "p/q" otherwise.
inline std::string to_string(const Rational& q) {
    const BigInt den = denominator_of(q);
    if (den == 1) return numerator_of(q).str();
    return numerator_of(q).str() + "/" + den.str();
}

namespace detail {

inline BigInt parse_integer(std::string_view text, std::string_view whole) {
    std::size_t i = 0;
    bool negative = false;
    if (i < text.size() && (text[i] == '-' || text[i] == '+')) {
        negative = text[i] == '-';
        ++i;
    }
    if (i == text.size()) throw ValidationError("malformed rational '" + std::string(whole) + "'");
    BigInt value = 0;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (c < '0' || c > '9') throw ValidationError("malformed rational '" + std::string(whole) + "'");
        value = value * 10 + (c - '0');
    }
    return negative ? BigInt(-value) : value;
}

}  // namespace detail

// Accepts "p" or "p/q" with decimal integers.
inline Rational parse_rational(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return Rational(detail::parse_integer(text, text));
    const BigInt num = detail::parse_integer(text.substr(0, slash), text);
    const BigInt den = detail::parse_integer(text.substr(slash + 1), text);
    if (den == 0) throw ValidationError("malformed rational '" + std::string(text) + "': zero denominator");
    return Rational(num, den);
}

}  // namespace rackcoop
