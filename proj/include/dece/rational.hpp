#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <vector>

namespace dece {

// Scores stay exact until report rendering; doubles appear only at the edges.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

double to_double(const Rational& r);

/// Fixed-point rendering with exactly `digits` fractional digits,
/// rounding half away from zero. Used for all score fields in reports.
std::string to_fixed(const Rational& r, int digits = 4);

/// "87.33" style rendering of r as a percentage.
std::string to_percent(const Rational& r, int digits = 2);

/// Exact n/d as "n/d" (or "n" when d == 1).
std::string to_fraction(const Rational& r);

/// Parses "n/d", integer, and decimal forms ("0.8333", "-2.5").
Rational parse_rational(const std::string& s);

Rational mean(const std::vector<Rational>& xs);

/// Lower-median convention: for even counts the lower of the two middle
/// values is returned.
Rational lower_median(std::vector<Rational> xs);

}  // namespace dece
