#include "svscl/lattice.hpp"

#include "svscl/error.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <limits>
#include <numeric>

namespace svscl {

int max_norm(const Wavevector& k) {
  int m = 0;
  for (int v : k) m = std::max(m, std::abs(v));
  return m;
}

long long norm2(const Wavevector& k) {
  long long s = 0;
  for (int v : k) s += static_cast<long long>(v) * v;
  return s;
}

Wavevector negate(const Wavevector& k) {
  Wavevector out(k.size());
  std::transform(k.begin(), k.end(), out.begin(), [](int v) { return -v; });
  return out;
}

Wavevector add(const Wavevector& a, const Wavevector& b) {
  Wavevector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

bool is_zero(const Wavevector& k) {
  return std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
}

bool is_positive(const Wavevector& k) {
  for (int v : k) {
    if (v != 0) return v > 0;
  }
  return false;
}

Wavevector axis_vector(int dim, int axis, int scale) {
  Wavevector k(dim, 0);
  k.at(axis) = scale;
  return k;
}

// ---------------------------------------------------------------------------
// FluxPoly

namespace {

BigInt lcm_big(const BigInt& a, const BigInt& b) {
  return a / boost::multiprecision::gcd(a, b) * b;
}

}  // namespace

FluxPoly::FluxPoly(int dim, std::vector<std::vector<ExactScalar>> coeffs)
    : dim_(dim), max_power_(0), coeffs_(std::move(coeffs)) {
  if (dim_ < 1) throw PreconditionError("flux dimension must be >= 1");
  if (static_cast<int>(coeffs_.size()) != dim_) {
    throw PreconditionError("flux needs exactly one component per dimension");
  }
  for (const auto& row : coeffs_) {
    max_power_ = std::max(max_power_, static_cast<int>(row.size()) - 1);
  }
  for (auto& row : coeffs_) row.resize(max_power_ + 1);

  rows_.resize(max_power_ + 1);
  small_rows_.resize(max_power_ + 1);
  for (int j = 0; j <= max_power_; ++j) {
    // One rational row per squarefree core, then clear denominators.
    std::map<std::uint64_t, std::vector<Rational>> by_core;
    for (int i = 0; i < dim_; ++i) {
      for (const auto& [core, q] : coeffs_[i][j].terms()) {
        auto& r = by_core[core];
        r.resize(dim_);
        r[i] = q;
      }
    }
    for (auto& [core, r] : by_core) {
      BigInt den = 1;
      for (const auto& q : r) den = lcm_big(den, boost::multiprecision::denominator(q));
      std::vector<BigInt> row(dim_);
      std::vector<long long> small(dim_);
      for (int i = 0; i < dim_; ++i) {
        Rational scaled = r[i] * Rational(den);
        row[i] = boost::multiprecision::numerator(scaled);
        if (boost::multiprecision::abs(row[i]) > BigInt(std::numeric_limits<int>::max())) {
          throw PreconditionError("flux coefficient too large for lattice arithmetic");
        }
        small[i] = row[i].convert_to<long long>();
      }
      rows_[j].push_back(std::move(row));
      small_rows_[j].push_back(std::move(small));
    }
  }
}

const ExactScalar& FluxPoly::coeff(int component, int power) const {
  static const ExactScalar zero;
  if (power < 0 || power > max_power_) return zero;
  return coeffs_.at(component).at(power);
}

std::vector<ExactScalar> FluxPoly::coefficient_vector(int power) const {
  std::vector<ExactScalar> out(dim_);
  for (int i = 0; i < dim_; ++i) out[i] = coeff(i, power);
  return out;
}

ExactScalar FluxPoly::pairing(int power, const Wavevector& k) const {
  ExactScalar s;
  for (int i = 0; i < dim_; ++i) s += coeff(i, power) * Rational(k.at(i));
  return s;
}

bool FluxPoly::pairing_is_zero(int power, const Wavevector& k) const {
  if (power < 0 || power > max_power_) return true;
  for (const auto& row : small_rows_[power]) {
    long long s = 0;
    for (int i = 0; i < dim_; ++i) s += row[i] * k[i];
    if (s != 0) return false;
  }
  return true;
}

double FluxPoly::pairing_value(int power, const Wavevector& k) const {
  if (pairing_is_zero(power, k)) return 0.0;
  return pairing(power, k).to_double();
}

// ---------------------------------------------------------------------------
// NoiseSet

NoiseSet::NoiseSet(int dim_, std::vector<Wavevector> ks, std::vector<double> bs) : dim(dim_) {
  if (ks.size() != bs.size()) throw PreconditionError("noise: one amplitude per wavevector");
  std::vector<std::size_t> order(ks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ks[a] < ks[b]; });
  for (auto idx : order) {
    if (static_cast<int>(ks[idx].size()) != dim) {
      throw PreconditionError("noise wavevector has wrong dimension");
    }
    if (is_zero(ks[idx])) throw PreconditionError("noise set may not contain the zero mode");
    if (bs[idx] == 0.0) throw PreconditionError("noise amplitudes must be nonzero");
    if (!wavevectors.empty() && wavevectors.back() == ks[idx]) {
      throw PreconditionError("duplicate noise wavevector");
    }
    wavevectors.push_back(ks[idx]);
    amplitudes.push_back(bs[idx]);
  }
  for (const auto& k : wavevectors) {
    if (!contains(negate(k))) throw PreconditionError("noise set must be symmetric (-Z0 = Z0)");
  }
}

bool NoiseSet::contains(const Wavevector& k) const {
  return std::binary_search(wavevectors.begin(), wavevectors.end(), k);
}

double NoiseSet::amplitude(const Wavevector& k) const {
  auto it = std::lower_bound(wavevectors.begin(), wavevectors.end(), k);
  if (it == wavevectors.end() || *it != k) return 0.0;
  return amplitudes[static_cast<std::size_t>(it - wavevectors.begin())];
}

NoiseSet axis_pattern_noise(int dim, double amplitude) {
  std::vector<Wavevector> ks;
  for (int i = 0; i < dim; ++i) {
    for (int s : {-2, -1, 1, 2}) ks.push_back(axis_vector(dim, i, s));
  }
  std::vector<double> bs(ks.size(), amplitude);
  return NoiseSet(dim, std::move(ks), std::move(bs));
}

// ---------------------------------------------------------------------------
// Degree and kernels

int flux_degree(const FluxPoly& flux) {
  for (int j = flux.max_power(); j >= 1; --j) {
    for (int i = 0; i < flux.dim(); ++i) {
      if (!flux.coeff(i, j).is_zero()) return j;
    }
  }
  throw AllLinearTermsZero();
}

std::vector<Wavevector> integer_kernel(const std::vector<std::vector<BigInt>>& rows, int dim) {
  // Unimodular column reduction: A*U becomes column echelon; the trailing
  // columns of U annihilate every row and generate the integer kernel.
  std::vector<std::vector<BigInt>> a = rows;
  std::vector<std::vector<BigInt>> u(dim, std::vector<BigInt>(dim));
  for (int i = 0; i < dim; ++i) u[i][i] = 1;

  auto col_axpy = [&](int dst, int src, const BigInt& q) {
    for (auto& r : a) r[dst] -= q * r[src];
    for (auto& r : u) r[dst] -= q * r[src];
  };
  auto col_swap = [&](int c1, int c2) {
    if (c1 == c2) return;
    for (auto& r : a) std::swap(r[c1], r[c2]);
    for (auto& r : u) std::swap(r[c1], r[c2]);
  };

  int pivot = 0;
  for (std::size_t r = 0; r < a.size() && pivot < dim; ++r) {
    while (true) {
      int best = -1;
      for (int c = pivot; c < dim; ++c) {
        if (a[r][c] == 0) continue;
        if (best < 0 || boost::multiprecision::abs(a[r][c]) < boost::multiprecision::abs(a[r][best])) {
          best = c;
        }
      }
      if (best < 0) break;
      col_swap(pivot, best);
      bool done = true;
      for (int c = pivot + 1; c < dim; ++c) {
        if (a[r][c] == 0) continue;
        col_axpy(c, pivot, a[r][c] / a[r][pivot]);
        if (a[r][c] != 0) done = false;
      }
      if (done) {
        ++pivot;
        break;
      }
    }
  }

  // Kernel vectors as rows, then row Hermite normal form for a canonical basis.
  std::vector<std::vector<BigInt>> basis;
  for (int c = pivot; c < dim; ++c) {
    std::vector<BigInt> v(dim);
    for (int i = 0; i < dim; ++i) v[i] = u[i][c];
    basis.push_back(std::move(v));
  }
  std::size_t row = 0;
  for (int col = 0; col < dim && row < basis.size(); ++col) {
    while (true) {
      std::size_t best = basis.size();
      for (std::size_t i = row; i < basis.size(); ++i) {
        if (basis[i][col] == 0) continue;
        if (best == basis.size() ||
            boost::multiprecision::abs(basis[i][col]) < boost::multiprecision::abs(basis[best][col])) {
          best = i;
        }
      }
      if (best == basis.size()) break;
      std::swap(basis[row], basis[best]);
      bool done = true;
      for (std::size_t i = row + 1; i < basis.size(); ++i) {
        if (basis[i][col] == 0) continue;
        BigInt q = basis[i][col] / basis[row][col];
        for (int c = 0; c < dim; ++c) basis[i][c] -= q * basis[row][c];
        if (basis[i][col] != 0) done = false;
      }
      if (done) break;
    }
    if (row < basis.size() && basis[row][col] != 0) {
      if (basis[row][col] < 0) {
        for (auto& x : basis[row]) x = -x;
      }
      for (std::size_t i = 0; i < row; ++i) {
        // floor division keeps entries above the pivot in [0, pivot)
        BigInt q = basis[i][col] / basis[row][col];
        if (basis[i][col] - q * basis[row][col] < 0) q -= 1;
        for (int c = 0; c < dim; ++c) basis[i][c] -= q * basis[row][c];
      }
      ++row;
    }
  }

  std::vector<Wavevector> out;
  for (const auto& v : basis) {
    Wavevector k(dim);
    for (int i = 0; i < dim; ++i) {
      if (boost::multiprecision::abs(v[i]) > BigInt(std::numeric_limits<int>::max())) {
        throw PreconditionError("kernel basis entry exceeds int range");
      }
      k[i] = v[i].convert_to<int>();
    }
    out.push_back(std::move(k));
  }
  return out;
}

std::vector<Wavevector> a_perp_kernel(const FluxPoly& flux) {
  const int degree = flux_degree(flux);
  std::vector<std::vector<BigInt>> stacked;
  for (int j = 1; j <= degree; ++j) {
    const auto& rows = flux.constraint_rows(j);
    stacked.insert(stacked.end(), rows.begin(), rows.end());
  }
  return integer_kernel(stacked, flux.dim());
}

bool in_a_perp(const FluxPoly& flux, const Wavevector& k) {
  const int degree = flux_degree(flux);
  for (int j = 1; j <= degree; ++j) {
    if (!flux.pairing_is_zero(j, k)) return false;
  }
  return true;
}

WavevectorSet minkowski_power(const NoiseSet& noise, int degree) {
  if (degree < 1) throw PreconditionError("flux degree must be >= 1");
  WavevectorSet current{Wavevector(noise.dim, 0)};
  if (degree == 1) return current;
  for (int step = 0; step < degree - 1; ++step) {
    WavevectorSet next;
    for (const auto& a : current) {
      for (const auto& z : noise.wavevectors) next.insert(add(a, z));
    }
    current = std::move(next);
  }
  return current;
}

// ---------------------------------------------------------------------------
// Reachability

namespace {

class WindowIndex {
 public:
  WindowIndex(int dim, int window) : dim_(dim), window_(window), side_(2 * window + 1) {
    long double cells = 1;
    for (int i = 0; i < dim; ++i) cells *= side_;
    if (cells > 2e8L) throw WindowOverflow("exploration window too large");
    seen_.assign(static_cast<std::size_t>(cells), 0);
  }
  bool inside(const Wavevector& k) const { return max_norm(k) <= window_; }
  std::size_t index(const Wavevector& k) const {
    std::size_t idx = 0;
    for (int i = dim_ - 1; i >= 0; --i) idx = idx * side_ + static_cast<std::size_t>(k[i] + window_);
    return idx;
  }
  bool mark(const Wavevector& k) {
    auto& cell = seen_[index(k)];
    if (cell) return false;
    cell = 1;
    return true;
  }

 private:
  int dim_;
  int window_;
  std::size_t side_;
  std::vector<char> seen_;
};

}  // namespace

ReachableSet reachable_set(const FluxPoly& flux, const NoiseSet& noise, int radius, int margin,
                           std::size_t cap) {
  if (margin < 0) throw PreconditionError("margin must be >= 0");
  if (noise.dim != flux.dim()) throw PreconditionError("noise and flux dimensions differ");
  for (const auto& z : noise.wavevectors) {
    if (max_norm(z) > radius) throw PreconditionError("radius must cover every forced mode");
  }
  const int degree = flux_degree(flux);
  const int window = radius + margin;
  const auto shifts = minkowski_power(noise, degree);

  ReachableSet out;
  out.saturated = true;
  WindowIndex seen(flux.dim(), window);
  std::deque<Wavevector> frontier;
  WavevectorSet fixed_point;
  for (const auto& z : noise.wavevectors) {
    if (seen.mark(z)) {
      frontier.push_back(z);
      fixed_point.insert(z);
    }
  }
  while (!frontier.empty()) {
    Wavevector kappa = std::move(frontier.front());
    frontier.pop_front();
    for (const auto& ell : shifts) {
      Wavevector cand = add(kappa, ell);
      if (flux.pairing_is_zero(degree, cand)) continue;
      if (!seen.inside(cand)) {
        out.saturated = false;
        continue;
      }
      if (seen.mark(cand)) {
        fixed_point.insert(cand);
        if (fixed_point.size() > cap) throw WindowOverflow("reachable set exceeds working-set cap");
        frontier.push_back(std::move(cand));
      }
    }
  }
  out.explored = fixed_point.size();
  for (const auto& k : fixed_point) {
    if (max_norm(k) <= radius) out.wavevectors.insert(k);
  }
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::HoldsExact: return "HOLDS_EXACT";
    case Verdict::HoldsUpToRadius: return "HOLDS_UP_TO_RADIUS";
    case Verdict::Violated: return "VIOLATED";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

std::string to_string(Certificate c) {
  switch (c) {
    case Certificate::None: return "none";
    case Certificate::C1: return "C1";
    case Certificate::C2: return "C2";
  }
  return "none";
}

bool check_pattern_lemma_b1(const FluxPoly& flux, const NoiseSet& noise) {
  if (noise.dim != flux.dim()) return false;
  int degree = 0;
  try {
    degree = flux_degree(flux);
  } catch (const AllLinearTermsZero&) {
    return false;
  }
  if (degree < 2) return false;
  WavevectorSet pattern;
  for (int i = 0; i < flux.dim(); ++i) {
    for (int s : {-2, -1, 1, 2}) pattern.insert(axis_vector(flux.dim(), i, s));
  }
  return noise.as_set() == pattern;
}

namespace {

// Witness preference: shortest first, then Z_+^d, then lexicographically largest,
// so axis directions like (1,0) come out ahead of (0,1) and (-1,0).
bool witness_before(const Wavevector& a, const Wavevector& b) {
  const auto na = norm2(a), nb = norm2(b);
  if (na != nb) return na < nb;
  const bool pa = is_positive(a), pb = is_positive(b);
  if (pa != pb) return pa;
  return a > b;
}

template <typename Visit>
void for_each_in_ball(int dim, int radius, Visit&& visit) {
  Wavevector k(dim, -radius);
  while (true) {
    if (!is_zero(k)) visit(k);
    int i = 0;
    while (i < dim && k[i] == radius) k[i++] = -radius;
    if (i == dim) return;
    ++k[i];
  }
}

}  // namespace

ConditionReport check_condition(const FluxPoly& flux, const NoiseSet& noise, int radius, int margin,
                                std::size_t cap) {
  ConditionReport rep;
  rep.degree = flux_degree(flux);
  rep.explored_radius = radius;
  rep.margin = margin;
  auto reach = reachable_set(flux, noise, radius, margin, cap);
  rep.saturated = reach.saturated;
  rep.z_infty_in_ball = reach.wavevectors;
  rep.a_perp_kernel_basis = a_perp_kernel(flux);
  rep.pattern_lemma = check_pattern_lemma_b1(flux, noise);

  auto consider = [&](const Wavevector& k, Certificate c) {
    if (!rep.witness || witness_before(k, *rep.witness)) {
      rep.witness = k;
      rep.certificate = c;
    }
  };

  bool ball_covered = true;
  for_each_in_ball(flux.dim(), radius, [&](const Wavevector& k) {
    const bool perp = in_a_perp(flux, k);
    const bool reached = reach.wavevectors.count(k) > 0;
    if (!perp && !reached) ball_covered = false;
    if (perp) return;
    // C1: no Z_n with n >= 1 contains k since <c_deg,k> = 0, and k is not forced.
    if (flux.pairing_is_zero(rep.degree, k) && !noise.contains(k)) {
      consider(k, Certificate::C1);
    } else if (reach.saturated && !reached) {
      consider(k, Certificate::C2);
    }
  });

  if (!rep.witness && reach.saturated) {
    // Saturation puts all of Z_infinity inside the window, so any point just
    // outside it that is not in A^perp is unreachable.
    const int beyond = radius + margin + 1;
    for (int i = 0; i < flux.dim(); ++i) {
      Wavevector k = axis_vector(flux.dim(), i, beyond);
      if (!in_a_perp(flux, k)) {
        rep.witness = k;
        rep.certificate = Certificate::C2;
        break;
      }
    }
  }

  if (!rep.witness && rep.pattern_lemma) {
    // Z_infinity contains every k with <c_deg,k> != 0, so the complement lies in
    // the kernel lattice of c_deg. The condition holds exactly iff that lattice
    // coincides with A^perp (both are saturated sublattices, so rank decides).
    auto top_kernel = integer_kernel(flux.constraint_rows(rep.degree), flux.dim());
    if (top_kernel.size() == rep.a_perp_kernel_basis.size()) {
      rep.verdict = Verdict::HoldsExact;
      return rep;
    }
    for (const auto& b : top_kernel) {
      if (in_a_perp(flux, b)) continue;
      for (int m = 1;; ++m) {
        Wavevector k = b;
        for (auto& x : k) x *= m;
        if (!noise.contains(k)) {
          rep.witness = k;
          rep.certificate = Certificate::C1;
          break;
        }
      }
      break;
    }
  }

  if (rep.witness) {
    rep.verdict = Verdict::Violated;
  } else if (ball_covered) {
    rep.verdict = Verdict::HoldsUpToRadius;
  } else {
    rep.verdict = Verdict::Inconclusive;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Non-degeneracy

namespace {

// Determinant by Leibniz expansion; only products and sums of exact scalars.
ExactScalar exact_determinant(const std::vector<std::vector<ExactScalar>>& m) {
  const int n = static_cast<int>(m.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  ExactScalar det;
  do {
    int inversions = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (perm[i] > perm[j]) ++inversions;
    ExactScalar term(1);
    for (int i = 0; i < n && !term.is_zero(); ++i) term *= m[i][perm[i]];
    if (inversions % 2) term = -term;
    det += term;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return det;
}

}  // namespace

NondegeneracyReport check_algebraic_nondegeneracy(const FluxPoly& flux, const NoiseSet& /*noise*/) {
  NondegeneracyReport rep;
  // A^perp is a lattice; it fits in the finite set Z_0 ∪ {0} only when it is {0}.
  rep.algebraic = a_perp_kernel(flux).empty();

  const int degree = flux_degree(flux);
  const int d = flux.dim();
  std::vector<std::vector<ExactScalar>> rows;
  for (int j = 2; j <= degree; ++j) rows.push_back(flux.coefficient_vector(j));
  // Real kernel trivial iff the rows have rank d iff some d x d minor is nonzero.
  if (static_cast<int>(rows.size()) >= d) {
    std::vector<int> pick(rows.size(), 0);
    std::fill(pick.begin(), pick.begin() + d, 1);
    std::sort(pick.begin(), pick.end(), std::greater<>());
    do {
      std::vector<std::vector<ExactScalar>> minor;
      for (std::size_t r = 0; r < rows.size(); ++r)
        if (pick[r]) minor.push_back(rows[r]);
      if (!exact_determinant(minor).is_zero()) {
        rep.real_kernel_trivial = true;
        break;
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return rep;
}

}  // namespace svscl
