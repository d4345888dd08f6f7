#pragma once

#include "svscl/exact_scalar.hpp"

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace svscl {

/// Integer wavevector k in Z^d.
using Wavevector = std::vector<int>;
using WavevectorSet = std::set<Wavevector>;

int max_norm(const Wavevector& k);
long long norm2(const Wavevector& k);
Wavevector negate(const Wavevector& k);
Wavevector add(const Wavevector& a, const Wavevector& b);
bool is_zero(const Wavevector& k);
/// First nonzero coordinate positive (the Z_+^d half of Z_*^d).
bool is_positive(const Wavevector& k);
/// Unit vector along axis `axis` (0-based) scaled by `scale`.
Wavevector axis_vector(int dim, int axis, int scale = 1);

/// Polynomial flux A_i(u) = sum_j c_{i,j} u^j with exact coefficients.
class FluxPoly {
 public:
  /// coeffs[i][j] is c_{i+1,j}; rows may have different lengths.
  FluxPoly(int dim, std::vector<std::vector<ExactScalar>> coeffs);

  int dim() const { return dim_; }
  /// Highest stored power (not necessarily the degree).
  int max_power() const { return max_power_; }
  const ExactScalar& coeff(int component, int power) const;
  /// The vector c_j = (c_{1,j}, ..., c_{d,j}).
  std::vector<ExactScalar> coefficient_vector(int power) const;

  /// <c_j, k> as an exact scalar.
  ExactScalar pairing(int power, const Wavevector& k) const;
  /// Exact zero test of <c_j, k> via integer constraint rows.
  bool pairing_is_zero(int power, const Wavevector& k) const;
  /// Floating value of <c_j, k>; exactly 0.0 whenever the exact pairing vanishes.
  double pairing_value(int power, const Wavevector& k) const;

  /// Integer rows R_j with <c_j,k> = 0  <=>  R_j k = 0, one row per squarefree
  /// component present in c_j (denominators cleared).
  const std::vector<std::vector<BigInt>>& constraint_rows(int power) const {
    return rows_.at(power);
  }

  friend bool operator==(const FluxPoly& a, const FluxPoly& b) {
    return a.dim_ == b.dim_ && a.coeffs_ == b.coeffs_;
  }

 private:
  int dim_;
  int max_power_;
  std::vector<std::vector<ExactScalar>> coeffs_;  // [component][power], padded
  std::vector<std::vector<std::vector<BigInt>>> rows_;        // [power][row][component]
  std::vector<std::vector<std::vector<long long>>> small_rows_;
};

/// Finite symmetric forced set Z_0 with amplitudes b_k.
struct NoiseSet {
  int dim = 1;
  std::vector<Wavevector> wavevectors;  // sorted, symmetric
  std::vector<double> amplitudes;       // parallel to wavevectors

  NoiseSet() = default;
  NoiseSet(int dim, std::vector<Wavevector> wavevectors, std::vector<double> amplitudes);

  bool empty() const { return wavevectors.empty(); }
  std::size_t size() const { return wavevectors.size(); }
  bool contains(const Wavevector& k) const;
  double amplitude(const Wavevector& k) const;
  WavevectorSet as_set() const { return {wavevectors.begin(), wavevectors.end()}; }

  friend bool operator==(const NoiseSet&, const NoiseSet&) = default;
};

/// {±e_i, ±2e_i : i = 1..d} with a common amplitude.
NoiseSet axis_pattern_noise(int dim, double amplitude);

int flux_degree(const FluxPoly& flux);

/// Lattice basis of A^perp = {k in Z^d : <c_j,k> = 0 for j = 1..degree}, in
/// row Hermite normal form. Empty means A^perp = {0}.
std::vector<Wavevector> a_perp_kernel(const FluxPoly& flux);
bool in_a_perp(const FluxPoly& flux, const Wavevector& k);

/// Integer kernel basis of a stacked integer system (Hermite normal form rows).
std::vector<Wavevector> integer_kernel(const std::vector<std::vector<BigInt>>& rows, int dim);

/// The (degree-1)-fold Minkowski sum of Z_0; {0} for degree 1.
WavevectorSet minkowski_power(const NoiseSet& noise, int degree);

struct ReachableSet {
  WavevectorSet wavevectors;  // explored fixed point intersected with the radius ball
  bool saturated = false;     // no admissible candidate was cut off by the window
  std::size_t explored = 0;   // size of the fixed point in the extended window
};

inline constexpr std::size_t kDefaultWindowCap = 1'000'000;

ReachableSet reachable_set(const FluxPoly& flux, const NoiseSet& noise, int radius, int margin,
                           std::size_t cap = kDefaultWindowCap);

enum class Verdict { HoldsExact, HoldsUpToRadius, Violated, Inconclusive };
std::string to_string(Verdict v);

enum class Certificate { None, C1, C2 };
std::string to_string(Certificate c);

struct ConditionReport {
  Verdict verdict = Verdict::Inconclusive;
  int explored_radius = 0;
  int margin = 0;
  std::optional<Wavevector> witness;
  Certificate certificate = Certificate::None;
  WavevectorSet z_infty_in_ball;
  std::vector<Wavevector> a_perp_kernel_basis;
  bool saturated = false;
  bool pattern_lemma = false;
  int degree = 0;
};

ConditionReport check_condition(const FluxPoly& flux, const NoiseSet& noise, int radius,
                                int margin, std::size_t cap = kDefaultWindowCap);

/// True iff Z_0 is exactly {±e_i, ±2e_i}, the degree is >= 2 and c_degree != 0.
bool check_pattern_lemma_b1(const FluxPoly& flux, const NoiseSet& noise);

struct NondegeneracyReport {
  bool algebraic = false;             // A^perp subset of Z_0 ∪ {0}
  bool real_kernel_trivial = false;   // {beta in R^d : <c_j,beta> = 0, j >= 2} = {0}
};

NondegeneracyReport check_algebraic_nondegeneracy(const FluxPoly& flux, const NoiseSet& noise);

}  // namespace svscl
