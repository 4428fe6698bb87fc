#include "dece/rational.hpp"

#include <algorithm>
#include <stdexcept>

namespace dece {

double to_double(const Rational& r) {
    return r.convert_to<double>();
}

std::string to_fixed(const Rational& r, int digits) {
    BigInt scale = 1;
    for (int i = 0; i < digits; ++i) scale *= 10;

    BigInt num = numerator(r) * scale;
    BigInt den = denominator(r);
    const bool negative = num < 0;
    if (negative) num = -num;

    // round half away from zero
    BigInt q = (num + den / 2) / den;

    std::string body = q.str();
    if (static_cast<int>(body.size()) <= digits) {
        body.insert(0, digits + 1 - body.size(), '0');
    }
    if (digits > 0) {
        body.insert(body.size() - digits, ".");
    }
    return negative && q != 0 ? "-" + body : body;
}

std::string to_percent(const Rational& r, int digits) {
    return to_fixed(r * 100, digits);
}

std::string to_fraction(const Rational& r) {
    if (denominator(r) == 1) return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

Rational parse_rational(const std::string& input) {
    if (input.find('/') != std::string::npos) return Rational(input);
    std::string s = input;
    const bool negative = !s.empty() && s[0] == '-';
    if (negative || (!s.empty() && s[0] == '+')) s.erase(0, 1);
    const auto dot = s.find('.');
    std::string digits = dot == std::string::npos ? s : s.substr(0, dot) + s.substr(dot + 1);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("not a rational: \"" + input + "\"");
    // leading zeros would read as an octal prefix
    const auto nz = digits.find_first_not_of('0');
    digits = nz == std::string::npos ? "0" : digits.substr(nz);
    BigInt den = 1;
    if (dot != std::string::npos)
        for (std::size_t i = dot + 1; i < s.size(); ++i) den *= 10;
    const Rational r(BigInt(digits), den);
    return negative ? -r : r;
}

Rational mean(const std::vector<Rational>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sequence");
    Rational sum = 0;
    for (const auto& x : xs) sum += x;
    return sum / static_cast<int>(xs.size());
}

Rational lower_median(std::vector<Rational> xs) {
    if (xs.empty()) throw std::invalid_argument("median of empty sequence");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : xs[n / 2 - 1];
}

}  // namespace dece
