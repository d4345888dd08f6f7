#pragma once

#include "svscl/lattice.hpp"

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace svscl {

/// L2 norm of an unnormalized basis function e_k on [-pi,pi]^d: sqrt((2 pi)^d / 2).
/// Fields store coordinates against e_k divided by this constant; forcing
/// amplitudes b_k act on the unnormalized e_k and are scaled by it exactly once.
inline double basis_norm(int dim) {
  return std::sqrt(std::pow(2.0 * std::numbers::pi, dim) / 2.0);
}

/// Sobolev exponent floor(d/2 + 1) of the state space.
inline int state_sobolev_index(int dim) { return dim / 2 + 1; }

/// Moment exponent 40 k d (d + 14 k)^2 appearing in the a priori bounds.
inline long long moment_exponent(int dim, int degree) {
  const long long d = dim, k = degree;
  return 40 * k * d * (d + 14 * k) * (d + 14 * k);
}

/// e_k(x): sin<k,x> for k in Z_+^d, -cos<k,x> otherwise (unnormalized).
double basis_eval(const Wavevector& k, std::span<const double> point);

/// All wavevectors of the cube [-N,N]^d without the origin, in lexicographic
/// order. The cube is symmetric about its centre, so -k sits at the mirrored slot.
class ModeLayout {
 public:
  static std::shared_ptr<const ModeLayout> get(int dim, int cutoff);

  ModeLayout(int dim, int cutoff);

  int dim() const { return dim_; }
  int cutoff() const { return cutoff_; }
  std::size_t size() const { return modes_.size(); }
  const Wavevector& wavevector(std::size_t i) const { return modes_[i]; }
  double norm2(std::size_t i) const { return norm2_[i]; }
  bool positive(std::size_t i) const { return positive_[i] != 0; }
  std::size_t partner(std::size_t i) const { return size() - 1 - i; }
  std::optional<std::size_t> find(const Wavevector& k) const;

 private:
  int dim_;
  int cutoff_;
  std::vector<Wavevector> modes_;
  std::vector<double> norm2_;
  std::vector<char> positive_;
};

/// Mean-zero real field in orthonormalized trigonometric coordinates.
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(int dim, int cutoff);
  explicit SpectralField(std::shared_ptr<const ModeLayout> layout);

  static SpectralField single_mode(int dim, int cutoff, const Wavevector& k, double value = 1.0);

  int dim() const { return layout_->dim(); }
  int cutoff() const { return layout_->cutoff(); }
  const ModeLayout& layout() const { return *layout_; }
  const std::shared_ptr<const ModeLayout>& layout_ptr() const { return layout_; }
  std::size_t size() const { return coeffs_.size(); }

  std::span<double> coeffs() { return coeffs_; }
  std::span<const double> coeffs() const { return coeffs_; }
  double& operator[](std::size_t i) { return coeffs_[i]; }
  double operator[](std::size_t i) const { return coeffs_[i]; }

  /// Coordinate on e_k / ||e_k||; zero for untracked k.
  double coeff(const Wavevector& k) const;
  void set(const Wavevector& k, double value);

  /// Same field on a different cutoff (zero padded or truncated).
  SpectralField with_cutoff(int cutoff) const;
  bool is_finite() const;

  SpectralField& operator+=(const SpectralField& other);
  SpectralField& operator-=(const SpectralField& other);
  SpectralField& operator*=(double factor);
  /// this += factor * other
  SpectralField& axpy(double factor, const SpectralField& other);

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
  friend SpectralField operator*(SpectralField a, double s) { return a *= s; }
  friend bool operator==(const SpectralField& a, const SpectralField& b) {
    return a.dim() == b.dim() && a.cutoff() == b.cutoff() && a.coeffs_ == b.coeffs_;
  }

 private:
  std::shared_ptr<const ModeLayout> layout_;
  std::vector<double> coeffs_;
};

/// L2 inner product (orthonormal coordinates); both fields share a layout.
double dot(const SpectralField& a, const SpectralField& b);
double l2_norm(const SpectralField& a);

/// Values on the uniform grid x_j = -pi + 2 pi j / M in each direction.
struct GridField {
  int dim = 1;
  int points_per_dim = 1;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double cell_volume() const {
    return std::pow(2.0 * std::numbers::pi / points_per_dim, dim);
  }
};

/// (sum |k|^{2 alpha} u_k^2)^{1/2} with the Euclidean |k|.
double sobolev_norm(const SpectralField& field, double alpha);

/// (integral |u|^p)^{1/p} for even p by grid quadrature; throws GridTooSmall
/// unless grid_size >= p * cutoff + 1.
double lp_norm(const SpectralField& field, int p, int grid_size);

/// L1 norm. In one dimension the integral is evaluated exactly between the
/// zeros of u through its trigonometric antiderivative; otherwise by
/// oversampled quadrature.
double l1_norm(const SpectralField& field);

/// Keep modes with Euclidean |k| <= n / the remainder.
SpectralField project_low(const SpectralField& field, double n);
SpectralField project_high(const SpectralField& field, double n);

/// Smallest odd grid size >= minimum whose prime factors are all in {3,5,7,11}.
int fft_friendly_odd(int minimum);
/// Grid size that resolves a degree-`degree` nonlinearity of a cutoff-N field exactly.
int dealiased_grid_size(int cutoff, int degree);

/// div A(u) truncated to cutoff degree*N. Requires grid_size >= 2*degree*N + 1.
SpectralField flux_divergence(const SpectralField& field, const FluxPoly& flux, int grid_size);

}  // namespace svscl
