#pragma once

#include "svscl/field.hpp"

#include <complex>
#include <span>
#include <vector>

namespace svscl {

using Complex = std::complex<double>;

/// Fast transform between SpectralField coordinates and the collocation grid.
/// Internally the real sine/cosine basis is mapped to complex exponentials;
/// the arrays handed around here hold true Fourier coefficients c_k of
/// u(x) = sum_k c_k exp(i<k,x>), indexed like the M^d DFT.
class SpectralTransform {
 public:
  SpectralTransform(int dim, int grid_size);

  int dim() const { return dim_; }
  int grid_size() const { return grid_size_; }
  std::size_t points() const { return points_; }
  /// Largest |k|_inf whose coefficient is recoverable without aliasing.
  int max_resolved() const { return (grid_size_ - 1) / 2; }

  GridField to_grid(const SpectralField& field) const;
  void to_grid(const SpectralField& field, std::span<double> values) const;
  SpectralField to_spectral(std::span<const double> values, int cutoff) const;

  /// DFT slot of wavevector k.
  std::size_t slot(const Wavevector& k) const;

  /// Fourier coefficients of a real field (length points()).
  void spectral_to_hat(const SpectralField& field, std::span<Complex> hat) const;
  /// Real coordinates on `out`'s layout from Fourier coefficients.
  void hat_to_spectral(std::span<const Complex> hat, SpectralField& out) const;

  void hat_to_grid(std::span<const Complex> hat, std::span<double> values) const;
  void grid_to_hat(std::span<const double> values, std::span<Complex> hat) const;

 private:
  int dim_;
  int grid_size_;
  std::size_t points_;
  void* plan_forward_;
  void* plan_backward_;
};

/// Flux terms on a fixed cutoff and grid: the nonlinearity div A(u), its
/// linearization div(A'(u) xi), the transpose of that linearization, and the
/// second-order term div(A''(u) a b). All products are formed on a grid large
/// enough that the retained Fourier coefficients are exact.
class FluxOperator {
 public:
  FluxOperator(const FluxPoly& flux, int cutoff, int grid_size);

  int degree() const { return degree_; }
  int cutoff() const { return cutoff_; }
  const SpectralTransform& transform() const { return transform_; }

  GridField grid_of(const SpectralField& u) const { return transform_.to_grid(u); }

  /// div A(u) on modes |k|_inf <= out_cutoff (out_cutoff <= degree * cutoff).
  SpectralField divergence(const GridField& u_grid, int out_cutoff) const;
  SpectralField divergence(const SpectralField& u) const;

  /// D(u) xi = P_N div(A'(u) xi).
  SpectralField linearized(const GridField& u_grid, const SpectralField& xi) const;
  /// D(u)^T phi = -P_N sum_i A_i'(u) d_i phi.
  SpectralField linearized_transpose(const GridField& u_grid, const SpectralField& phi) const;
  /// P_N div(A''(u) a b).
  SpectralField second_order(const GridField& u_grid, const SpectralField& a,
                             const SpectralField& b) const;

 private:
  // div of sum_j c_j g_j for grid functions g_j, j = 1..degree (null = skip).
  SpectralField divergence_of(const std::vector<const double*>& g, int out_cutoff) const;
  const std::vector<double>& pairings(int out_cutoff) const;
  std::vector<double> build_pairings(int out_cutoff) const;

  FluxPoly flux_;
  int degree_;
  int cutoff_;
  SpectralTransform transform_;
  std::vector<bool> active_;  // c_j != 0
  // <c_j, k_i> tables, index (j-1) * modes + i, for output cutoffs N and degree*N
  std::vector<double> pairings_low_;
  std::vector<double> pairings_full_;
};

}  // namespace svscl
