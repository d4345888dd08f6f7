#pragma once

// Brute-force reference for the reachability recursion, written without any
// of the library's lattice machinery: coefficients are plain rationals and
// every set is enumerated explicitly.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdio>
#include <cstdlib>
#include <random>
#include <set>
#include <vector>

namespace oracle {

using Q = boost::multiprecision::cpp_rational;
using K = std::vector<int>;

inline int inf_norm(const K& k) {
  int m = 0;
  for (int v : k) m = std::max(m, std::abs(v));
  return m;
}

// Integer multiple of a rational vector (denominators cleared).
inline std::vector<long long> clear_denominators(const std::vector<Q>& c) {
  boost::multiprecision::cpp_int l = 1;
  for (const auto& v : c) l = boost::multiprecision::lcm(l, boost::multiprecision::denominator(v));
  std::vector<long long> out;
  for (const auto& v : c) out.push_back(static_cast<long long>(boost::multiprecision::numerator(Q(v * l))));
  return out;
}

inline bool pairing_nonzero(const std::vector<long long>& c, const K& k) {
  long long s = 0;
  for (std::size_t i = 0; i < k.size(); ++i) s += c[i] * k[i];
  return s != 0;
}

// Sums of exactly `terms` elements of z0 (repetition allowed).
inline std::set<K> sums_of(const std::set<K>& z0, int terms, int dim) {
  std::set<K> acc{K(dim, 0)};
  for (int t = 0; t < terms; ++t) {
    std::set<K> next;
    for (const auto& a : acc) {
      for (const auto& b : z0) {
        K s(dim);
        for (int i = 0; i < dim; ++i) s[i] = a[i] + b[i];
        next.insert(s);
      }
    }
    acc = std::move(next);
  }
  return acc;
}

// Z_n computed level by level on |k|_inf <= window until the sequence of
// levels repeats; the union of all levels seen is returned. Levels are dense
// 0/1 arrays over the window cube.
inline std::set<K> z_infinity(const std::vector<Q>& c_top, int degree, const std::set<K>& z0,
                              int dim, int window) {
  if (degree == 1) return z0;
  const auto ell_set = sums_of(z0, degree - 1, dim);
  const std::vector<K> ell(ell_set.begin(), ell_set.end());
  const auto c = clear_denominators(c_top);
  const int side = 2 * window + 1;
  std::size_t cells = 1;
  for (int i = 0; i < dim; ++i) cells *= side;
  auto index = [&](const K& k) {
    std::size_t idx = 0;
    for (int i = 0; i < dim; ++i) idx = idx * side + (k[i] + window);
    return idx;
  };
  auto point = [&](std::size_t idx) {
    K k(dim);
    for (int i = dim - 1; i >= 0; --i) {
      k[i] = static_cast<int>(idx % side) - window;
      idx /= side;
    }
    return k;
  };
  std::vector<char> level(cells, 0), all(cells, 0);
  for (const auto& k : z0) level[index(k)] = 1;
  std::set<std::vector<char>> seen;
  while (seen.insert(level).second) {
    std::vector<char> next(cells, 0);
    for (std::size_t idx = 0; idx < cells; ++idx) {
      if (!level[idx]) continue;
      all[idx] = 1;
      const K kappa = point(idx);
      for (const auto& l : ell) {
        K s(dim);
        for (int i = 0; i < dim; ++i) s[i] = kappa[i] + l[i];
        if (inf_norm(s) <= window && pairing_nonzero(c, s)) next[index(s)] = 1;
      }
    }
    level = std::move(next);
  }
  std::set<K> out;
  for (std::size_t idx = 0; idx < cells; ++idx) {
    if (all[idx]) out.insert(point(idx));
  }
  return out;
}

}  // namespace oracle
