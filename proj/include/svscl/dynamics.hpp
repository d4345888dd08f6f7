#pragma once

#include "svscl/field.hpp"
#include "svscl/lattice.hpp"
#include "svscl/rng.hpp"
#include "svscl/transform.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace svscl {

enum class Scheme { ExpEuler, SemiImplicitEuler };
std::string to_string(Scheme s);

struct SimConfig {
  double nu = 1.0;
  FluxPoly flux{1, {{0}}};
  NoiseSet noise;
  int cutoff = 8;
  int grid_size = 0;  // 0: smallest dealiased size
  double dt = 1e-3;
  double t_end = 1.0;
  Scheme scheme = Scheme::ExpEuler;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  double blowup_threshold = 1e6;
  SpectralField initial;  // empty: zero field

  std::size_t steps() const;
  int resolved_grid_size() const;
  /// Throws PreconditionError / GridTooSmall on an invalid configuration.
  void validate() const;
};

/// True when every coefficient of degree >= 1 vanishes.
bool flux_is_zero(const FluxPoly& flux);

/// One time step of the Galerkin system and of its linearizations. Holds the
/// per-mode factors for a fixed (nu, cutoff, dt, scheme) and the flux operator.
class Stepper {
 public:
  explicit Stepper(const SimConfig& config);

  const SimConfig& config() const { return config_; }
  int cutoff() const { return config_.cutoff; }
  double dt() const { return config_.dt; }
  std::size_t forced_count() const { return forced_slot_.size(); }
  /// Layout index of the i-th forced wavevector (noise order).
  std::size_t forced_slot(std::size_t i) const { return forced_slot_[i]; }
  /// Amplitude of the i-th forced mode in orthonormal coordinates.
  double forced_amplitude(std::size_t i) const { return forced_amp_[i]; }
  const FluxOperator* flux_operator() const { return op_ ? &*op_ : nullptr; }

  GridField grid_of(const SpectralField& u) const;

  /// u_{n+1} from u_n; `increments` holds the Brownian increments (variance dt)
  /// of the forced modes in noise order. Empty means no forcing.
  SpectralField step(const SpectralField& u, std::span<const double> increments) const;
  SpectralField step(const SpectralField& u, const GridField& u_grid,
                     std::span<const double> increments) const;

  /// Derivative of `step` at u applied to xi.
  SpectralField tangent(const GridField& u_grid, const SpectralField& xi) const;
  /// Transpose of `tangent` (one backward step of the discrete adjoint).
  SpectralField tangent_transpose(const GridField& u_grid, const SpectralField& phi) const;
  /// Second variation step: tangent(j2) plus the second derivative of `step`
  /// at u in the directions a, b.
  SpectralField second_variation(const GridField& u_grid, const SpectralField& j2,
                                 const SpectralField& a, const SpectralField& b) const;

  /// Increments of the given step drawn from the stream of this config.
  std::vector<double> draw_increments(const NoiseStream& stream, std::uint64_t step) const;

 private:
  // out = M u - H * nonlin  (H the nonlinear weight, M the linear factor)
  SpectralField combine(const SpectralField& u, const SpectralField* nonlin) const;

  SimConfig config_;
  std::optional<FluxOperator> op_;
  std::vector<double> linear_;     // e^{-lambda dt} or 1/(1+lambda dt)
  std::vector<double> nonlinear_;  // phi_1(-lambda dt) dt or dt/(1+lambda dt)
  std::vector<std::size_t> forced_slot_;
  std::vector<double> forced_amp_;
  std::vector<double> noise_gain_;  // per forced mode, multiplies the increment
};

/// Every-step record of one trajectory.
struct TrajectoryCheckpoints {
  std::shared_ptr<const Stepper> stepper;
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<SpectralField> states;
  /// noise_increments[i] drives states[i] -> states[i+1].
  std::vector<std::vector<double>> noise_increments;
  /// ||u||_n at every checkpoint (n = floor(d/2+1)).
  std::vector<double> sobolev_trace;
  /// (time, ||u||_{L^p}) samples, p = monitored_lp_exponent.
  std::vector<std::pair<double, double>> lp_trace;
  int monitored_lp_exponent = 0;

  std::size_t size() const { return states.size(); }
  /// Checkpoint index of time t; OutOfRange if t is not on the grid.
  std::size_t index_of(double t) const;
};

struct SimulateOptions {
  /// Sample ||u||_{L^p} every this many steps (0 disables).
  std::size_t lp_every = 10;
  /// Upper bound on the monitored L^p exponent.
  int lp_max_exponent = 8;
};

/// Exponent of the L^p norm monitored by `simulate`: min(m, lp_max) rounded
/// down to an even integer, where m = 40 k d (d + 14 k)^2.
int monitored_lp_exponent(int dim, int degree, int lp_max);

TrajectoryCheckpoints simulate(const SimConfig& config, const SimulateOptions& options = {});

/// Runs without storing the path. `observe(step, time, state)` is called at
/// every step including step 0 and may return false to stop early.
void run(const SimConfig& config,
         const std::function<bool(std::size_t, double, const SpectralField&)>& observe);

/// Same as `run` for an already built stepper and an explicit initial state.
void run(const Stepper& stepper, const SpectralField& initial, const NoiseStream& stream,
         std::size_t steps,
         const std::function<bool(std::size_t, double, const SpectralField&)>& observe);

struct TangentState {
  SpectralField field;
  double base_time = 0.0;
};

/// One tangent step along the base state u at tangent.base_time.
TangentState step_tangent(const Stepper& stepper, const SpectralField& u, const TangentState& tangent);

/// One second-variation step; phi and psi are the tangents at the current time.
TangentState step_second_variation(const Stepper& stepper, const SpectralField& u,
                                   const SpectralField& phi, const SpectralField& psi,
                                   const TangentState& j2);

/// J_{s,t} xi along the recorded path.
SpectralField tangent_solve(const TrajectoryCheckpoints& traj, const SpectralField& xi, double s, double t);
SpectralField tangent_solve_steps(const TrajectoryCheckpoints& traj, const SpectralField& xi,
                                  std::size_t from, std::size_t to);

/// K_{r,t} phi: the exact discrete adjoint of J_{r,t}.
SpectralField adjoint_solve(const TrajectoryCheckpoints& traj, const SpectralField& phi, double t, double r);
/// Backward adjoint sweep from index `to` down to `from`; `visit(i, K_{i,to} phi)`
/// is called for i = to, to-1, ..., from.
void adjoint_sweep(const TrajectoryCheckpoints& traj, const SpectralField& phi, std::size_t from,
                   std::size_t to, const std::function<void(std::size_t, const SpectralField&)>& visit);

/// J^(2)_{s,t}(phi, psi) along the recorded path.
SpectralField second_variation_solve(const TrajectoryCheckpoints& traj, const SpectralField& phi,
                                     const SpectralField& psi, double s, double t);

/// Calls fn(i) for i in [0, n) on a small thread pool. Each index must write
/// only its own output slot.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace svscl
