#pragma once

#include "svscl/dynamics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace svscl {

/// A control v on checkpoints [from, to]: values[r - from][j] is the
/// coordinate of v_r on the j-th forced mode (noise order).
struct ForcingPath {
  std::size_t from = 0;
  std::size_t to = 0;
  std::vector<std::vector<double>> values;

  std::size_t nodes() const { return values.size(); }
};

/// Trapezoid weights on nodes from..to with spacing dt (dt/2 at both ends).
double trapezoid_weight(std::size_t node, std::size_t from, std::size_t to, double dt);

/// Shared quadrature inner product sum_r w_r <a_r, b_r>.
double quadrature_dot(const ForcingPath& a, const ForcingPath& b, double dt);

/// int_s^t J_{r,t} Q v_r dr by trapezoid quadrature on the checkpoints.
SpectralField apply_A(const TrajectoryCheckpoints& traj, const ForcingPath& v);
/// (A* phi)(r) = Q* K_{r,t} phi on every node of [s, t].
ForcingPath apply_A_star(const TrajectoryCheckpoints& traj, const SpectralField& phi, double s, double t);
ForcingPath apply_A_star_steps(const TrajectoryCheckpoints& traj, const SpectralField& phi,
                               std::size_t from, std::size_t to);

struct MalliavinGram {
  std::vector<Wavevector> basis;
  Eigen::MatrixXd matrix;
  double s = 0.0;
  double t = 0.0;
  std::size_t quad_nodes = 0;
  std::uint64_t trajectory_hash = 0;

  std::size_t size() const { return basis.size(); }
  /// Ascending eigenvalues.
  Eigen::VectorXd eigenvalues() const;
  double trace() const { return matrix.trace(); }
};

inline constexpr std::size_t kDefaultGramCap = 1024;

/// FNV-1a hash of the checkpoint states in [from, to].
std::uint64_t trajectory_hash(const TrajectoryCheckpoints& traj, std::size_t from, std::size_t to);

/// G_ab = <A* e_a, A* e_b> under the trapezoid quadrature, one adjoint sweep
/// per basis vector.
MalliavinGram malliavin_gram(const TrajectoryCheckpoints& traj, double s, double t,
                             const std::vector<Wavevector>& basis, std::size_t cap = kDefaultGramCap);
MalliavinGram malliavin_gram_steps(const TrajectoryCheckpoints& traj, std::size_t from, std::size_t to,
                                   const std::vector<Wavevector>& basis,
                                   std::size_t cap = kDefaultGramCap);

/// Every tracked wavevector with Euclidean |k| <= radius (layout order).
std::vector<Wavevector> modes_within(int dim, double radius);
/// Every wavevector of the cutoff-N layout.
std::vector<Wavevector> all_modes(int dim, int cutoff);

struct CapMinimum {
  double value = 0.0;            // min of phi^T G phi on the cap
  double lambda_min_full = 0.0;  // lower bound
  double lambda_min_low = 0.0;   // upper bound (low-block minimum)
  double multiplier = 0.0;       // constraint multiplier at the optimum (0: inactive)
  bool constraint_active = false;
};

/// min phi^T G phi over unit phi in the tracked span with ||P_n phi|| >= alpha,
/// P_n the projection onto tracked modes with |k| <= n_low.
CapMinimum min_quadratic_on_cap(const MalliavinGram& gram, double alpha, double n_low);
CapMinimum min_quadratic_on_cap(const Eigen::MatrixXd& g, const std::vector<bool>& low, double alpha);

struct ResidualOptions {
  double beta = 1e-2;
  /// Interpret beta as a multiple of trace(G)/D of the first window.
  bool beta_relative_to_trace = false;
  double window_length = 1.0;
};

struct ResidualWindow {
  int n = 0;                      // window pair index; rho is rho_{2n}
  double time = 0.0;
  double rho_norm = 0.0;
  double uncontrolled_norm = 0.0;  // ||J_{0,t} xi||
  double cross_check_error = 0.0;  // relative gap to J_{0,t} xi - A_{0,t} v
  double gram_trace = 0.0;         // window starting here (0 on the last record)
  double gram_lambda_min = 0.0;
};

struct ResidualRun {
  double beta = 0.0;
  std::vector<ResidualWindow> windows;  // n = 0..n_windows
  std::vector<ForcingPath> controls;    // realized v on each controlled window
};

/// Residual of the Cameron-Martin control over [0, 2 n_windows L]: on windows
/// [2nL, (2n+1)L] the control is A*(G + beta)^{-1} J rho, on the following
/// window it is zero. G is the Gram on the full Galerkin span.
ResidualRun control_residual_run(const SimConfig& base, const SpectralField& xi, int n_windows,
                                 const ResidualOptions& options);

}  // namespace svscl
