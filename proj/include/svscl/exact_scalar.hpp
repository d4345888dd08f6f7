#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <map>
#include <string>

namespace svscl {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Largest squarefree divisor decomposition: n = square^2 * core.
struct SquarefreeSplit {
  std::uint64_t square;
  std::uint64_t core;
};
SquarefreeSplit split_squarefree(std::uint64_t n);
bool is_squarefree(std::uint64_t n);

/// An element of Q(sqrt 2, sqrt 3, sqrt 5, ...): a finite sum  sum_m q_m * sqrt(m)
/// over distinct squarefree m >= 1. Because the square roots of distinct
/// squarefree integers are linearly independent over Q, the value is zero
/// exactly when every stored rational is zero; zero terms are never stored.
class ExactScalar {
 public:
  ExactScalar() = default;
  ExactScalar(long long value);  // NOLINT: implicit from integers is intended
  ExactScalar(const Rational& value);  // NOLINT

  /// sqrt(n) reduced to s*sqrt(core).
  static ExactScalar sqrt_of(std::uint64_t n);

  const std::map<std::uint64_t, Rational>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_rational() const;
  Rational rational_part() const;

  double to_double() const;

  ExactScalar operator-() const;
  ExactScalar& operator+=(const ExactScalar& other);
  ExactScalar& operator-=(const ExactScalar& other);
  ExactScalar& operator*=(const Rational& factor);
  ExactScalar& operator*=(const ExactScalar& other);

  friend ExactScalar operator+(ExactScalar a, const ExactScalar& b) { return a += b; }
  friend ExactScalar operator-(ExactScalar a, const ExactScalar& b) { return a -= b; }
  friend ExactScalar operator*(ExactScalar a, const Rational& b) { return a *= b; }
  friend ExactScalar operator*(const Rational& b, ExactScalar a) { return a *= b; }
  friend ExactScalar operator*(ExactScalar a, const ExactScalar& b) { return a *= b; }
  friend bool operator==(const ExactScalar& a, const ExactScalar& b) { return a.terms_ == b.terms_; }

  /// Canonical literal, e.g. "3/2 + 1/2*sqrt(3)". Parsable by the config grammar.
  std::string to_string() const;

 private:
  void add_term(std::uint64_t core, const Rational& q);
  std::map<std::uint64_t, Rational> terms_;
};

}  // namespace svscl
