#include "svscl/exact_scalar.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace svscl {

SquarefreeSplit split_squarefree(std::uint64_t n) {
  std::uint64_t square = 1;
  std::uint64_t core = 1;
  for (std::uint64_t p = 2; p * p <= n; ++p) {
    int power = 0;
    while (n % p == 0) {
      n /= p;
      ++power;
    }
    for (int i = 0; i < power / 2; ++i) square *= p;
    if (power % 2 == 1) core *= p;
  }
  core *= n;  // remaining prime factor, if any
  return {square, core};
}

bool is_squarefree(std::uint64_t n) { return n >= 1 && split_squarefree(n).square == 1; }

ExactScalar::ExactScalar(long long value) {
  if (value != 0) terms_.emplace(1, Rational(value));
}

ExactScalar::ExactScalar(const Rational& value) {
  if (value != 0) terms_.emplace(1, value);
}

ExactScalar ExactScalar::sqrt_of(std::uint64_t n) {
  ExactScalar out;
  if (n == 0) return out;
  auto [square, core] = split_squarefree(n);
  out.terms_.emplace(core, Rational(static_cast<long long>(square)));
  return out;
}

bool ExactScalar::is_rational() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first == 1);
}

Rational ExactScalar::rational_part() const {
  auto it = terms_.find(1);
  return it == terms_.end() ? Rational(0) : it->second;
}

double ExactScalar::to_double() const {
  // Sum in long double to keep cancellation between terms tame.
  long double acc = 0.0L;
  for (const auto& [core, q] : terms_) {
    acc += static_cast<long double>(q.convert_to<double>()) *
           std::sqrt(static_cast<long double>(core));
  }
  return static_cast<double>(acc);
}

void ExactScalar::add_term(std::uint64_t core, const Rational& q) {
  if (q == 0) return;
  auto [it, inserted] = terms_.emplace(core, q);
  if (!inserted) {
    it->second += q;
    if (it->second == 0) terms_.erase(it);
  }
}

ExactScalar ExactScalar::operator-() const {
  ExactScalar out = *this;
  for (auto& [core, q] : out.terms_) q = -q;
  return out;
}

ExactScalar& ExactScalar::operator+=(const ExactScalar& other) {
  for (const auto& [core, q] : other.terms_) add_term(core, q);
  return *this;
}

ExactScalar& ExactScalar::operator-=(const ExactScalar& other) {
  for (const auto& [core, q] : other.terms_) add_term(core, -q);
  return *this;
}

ExactScalar& ExactScalar::operator*=(const Rational& factor) {
  if (factor == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& [core, q] : terms_) q *= factor;
  return *this;
}

ExactScalar& ExactScalar::operator*=(const ExactScalar& other) {
  // sqrt(a)*sqrt(b) = g*sqrt(ab/g^2) with g = gcd(a,b) for squarefree a, b.
  ExactScalar product;
  for (const auto& [a, qa] : terms_) {
    for (const auto& [b, qb] : other.terms_) {
      std::uint64_t g = std::gcd(a, b);
      std::uint64_t core = (a / g) * (b / g);
      product.add_term(core, qa * qb * Rational(static_cast<long long>(g)));
    }
  }
  *this = std::move(product);
  return *this;
}

std::string ExactScalar::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream out;
  bool first = true;
  for (const auto& [core, q] : terms_) {
    Rational mag = q < 0 ? Rational(-q) : q;
    if (first) {
      if (q < 0) out << "-";
    } else {
      out << (q < 0 ? " - " : " + ");
    }
    first = false;
    if (core == 1) {
      out << mag;
    } else if (mag == 1) {
      out << "sqrt(" << core << ")";
    } else {
      out << mag << "*sqrt(" << core << ")";
    }
  }
  return out.str();
}

}  // namespace svscl
