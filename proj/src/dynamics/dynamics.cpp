#include "svscl/dynamics.hpp"

#include "svscl/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace svscl {

std::string to_string(Scheme s) {
  return s == Scheme::ExpEuler ? "EXP_EULER" : "SEMI_IMPLICIT_EULER";
}

bool flux_is_zero(const FluxPoly& flux) {
  for (int j = 1; j <= flux.max_power(); ++j) {
    for (int i = 0; i < flux.dim(); ++i) {
      if (!flux.coeff(i, j).is_zero()) return false;
    }
  }
  return true;
}

std::size_t SimConfig::steps() const {
  const double n = t_end / dt;
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-9 * std::max(1.0, n)) {
    throw PreconditionError("t_end must be an integer multiple of dt");
  }
  return static_cast<std::size_t>(r);
}

int SimConfig::resolved_grid_size() const {
  if (grid_size > 0) return grid_size;
  const int degree = flux_is_zero(flux) ? 1 : flux_degree(flux);
  return dealiased_grid_size(cutoff, degree);
}

void SimConfig::validate() const {
  if (!(nu > 0.0)) throw PreconditionError("nu must be positive");
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  if (t_end < 0.0) throw PreconditionError("t_end must be non-negative");
  if (cutoff < 1) throw PreconditionError("cutoff must be >= 1");
  if (!(blowup_threshold > 0.0)) throw PreconditionError("blowup threshold must be positive");
  if (!noise.empty() && noise.dim != flux.dim()) {
    throw PreconditionError("noise and flux dimensions differ");
  }
  for (const auto& k : noise.wavevectors) {
    if (max_norm(k) > cutoff) throw PreconditionError("forced wavevector outside the cutoff");
  }
  const int degree = flux_is_zero(flux) ? 1 : flux_degree(flux);
  const int m = resolved_grid_size();
  if (m % 2 == 0) throw PreconditionError("grid size must be odd");
  if (m < 2 * degree * cutoff + 1) {
    throw GridTooSmall("grid_size " + std::to_string(m) + " below 2*degree*cutoff+1 = " +
                       std::to_string(2 * degree * cutoff + 1));
  }
  if (initial.size() > 0 && (initial.dim() != flux.dim() || initial.cutoff() != cutoff)) {
    throw PreconditionError("initial field does not match dimension/cutoff");
  }
  steps();
}

// ---------------------------------------------------------------------------
// Stepper

namespace {

// (e^z - 1)/z
double phi1(double z) {
  if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
  return std::expm1(z) / z;
}

}  // namespace

Stepper::Stepper(const SimConfig& config) : config_(config) {
  config_.validate();
  const int dim = config_.flux.dim();
  const int m = config_.resolved_grid_size();
  if (!flux_is_zero(config_.flux)) op_.emplace(config_.flux, config_.cutoff, m);

  const auto layout = ModeLayout::get(dim, config_.cutoff);
  const double dt = config_.dt;
  linear_.resize(layout->size());
  nonlinear_.resize(layout->size());
  for (std::size_t i = 0; i < layout->size(); ++i) {
    const double lambda = config_.nu * layout->norm2(i);
    if (config_.scheme == Scheme::ExpEuler) {
      linear_[i] = std::exp(-lambda * dt);
      nonlinear_[i] = phi1(-lambda * dt) * dt;
    } else {
      linear_[i] = 1.0 / (1.0 + lambda * dt);
      nonlinear_[i] = dt / (1.0 + lambda * dt);
    }
  }
  const double s = basis_norm(dim);
  for (std::size_t j = 0; j < config_.noise.size(); ++j) {
    const auto& k = config_.noise.wavevectors[j];
    const std::size_t slot = *layout->find(k);
    const double lambda = config_.nu * layout->norm2(slot);
    forced_slot_.push_back(slot);
    forced_amp_.push_back(config_.noise.amplitudes[j] * s);
    double gain;
    if (config_.scheme == Scheme::ExpEuler) {
      // exact variance of the stochastic convolution over one step
      const double z = 2.0 * lambda * dt;
      gain = std::sqrt(-std::expm1(-z) / z);
    } else {
      gain = 1.0 / (1.0 + lambda * dt);
    }
    noise_gain_.push_back(forced_amp_.back() * gain);
  }
  if (config_.initial.size() == 0) config_.initial = SpectralField(dim, config_.cutoff);
}

GridField Stepper::grid_of(const SpectralField& u) const {
  if (op_) return op_->grid_of(u);
  return GridField{u.dim(), 0, {}};
}

SpectralField Stepper::combine(const SpectralField& u, const SpectralField* nonlin) const {
  SpectralField out(u.layout_ptr());
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = linear_[i] * u[i];
    if (nonlin) out[i] -= nonlinear_[i] * (*nonlin)[i];
  }
  return out;
}

SpectralField Stepper::step(const SpectralField& u, std::span<const double> increments) const {
  return step(u, grid_of(u), increments);
}

SpectralField Stepper::step(const SpectralField& u, const GridField& u_grid,
                            std::span<const double> increments) const {
  SpectralField out;
  if (op_) {
    const SpectralField div = op_->divergence(u_grid, config_.cutoff);
    out = combine(u, &div);
  } else {
    out = combine(u, nullptr);
  }
  if (!increments.empty()) {
    if (increments.size() != forced_slot_.size()) {
      throw PreconditionError("one increment per forced mode is required");
    }
    for (std::size_t j = 0; j < forced_slot_.size(); ++j) {
      out[forced_slot_[j]] += noise_gain_[j] * increments[j];
    }
  }
  return out;
}

SpectralField Stepper::tangent(const GridField& u_grid, const SpectralField& xi) const {
  if (!op_) return combine(xi, nullptr);
  const SpectralField d = op_->linearized(u_grid, xi);
  return combine(xi, &d);
}

SpectralField Stepper::tangent_transpose(const GridField& u_grid, const SpectralField& phi) const {
  // (M - H D)^T phi = M phi - D^T (H phi), M and H diagonal
  SpectralField out = combine(phi, nullptr);
  if (!op_) return out;
  SpectralField h(phi.layout_ptr());
  for (std::size_t i = 0; i < phi.size(); ++i) h[i] = nonlinear_[i] * phi[i];
  out -= op_->linearized_transpose(u_grid, h);
  return out;
}

SpectralField Stepper::second_variation(const GridField& u_grid, const SpectralField& j2,
                                        const SpectralField& a, const SpectralField& b) const {
  if (!op_) return combine(j2, nullptr);
  SpectralField src = op_->linearized(u_grid, j2);
  if (op_->degree() >= 2) src += op_->second_order(u_grid, a, b);
  return combine(j2, &src);
}

std::vector<double> Stepper::draw_increments(const NoiseStream& stream, std::uint64_t step) const {
  std::vector<double> inc(forced_slot_.size());
  const double sdt = std::sqrt(config_.dt);
  for (std::size_t j = 0; j < inc.size(); ++j) {
    inc[j] = sdt * stream.normal(step, static_cast<std::uint32_t>(j));
  }
  return inc;
}

// ---------------------------------------------------------------------------
// Trajectories

std::size_t TrajectoryCheckpoints::index_of(double t) const {
  const double x = (t - t0) / dt;
  const double r = std::round(x);
  if (std::abs(x - r) > 1e-6 || r < 0.0 || r >= static_cast<double>(states.size())) {
    throw OutOfRange("time " + std::to_string(t) + " is not on the checkpoint grid");
  }
  return static_cast<std::size_t>(r);
}

int monitored_lp_exponent(int dim, int degree, int lp_max) {
  const long long m = moment_exponent(dim, degree);
  long long p = std::min<long long>(m, lp_max);
  if (p % 2 != 0) --p;
  return static_cast<int>(std::max<long long>(p, 2));
}

namespace {

void check_blowup(const SpectralField& u, double norm, double threshold, double time) {
  if (!std::isfinite(norm) || norm > threshold || !u.is_finite()) {
    throw Blowup("solution norm " + std::to_string(norm) + " exceeded threshold at t=" +
                     std::to_string(time),
                 time, norm);
  }
}

}  // namespace

TrajectoryCheckpoints simulate(const SimConfig& config, const SimulateOptions& options) {
  auto stepper = std::make_shared<const Stepper>(config);
  const SimConfig& cfg = stepper->config();
  const std::size_t steps = cfg.steps();
  const int dim = cfg.flux.dim();
  const int sob = state_sobolev_index(dim);
  const int degree = flux_is_zero(cfg.flux) ? 1 : flux_degree(cfg.flux);
  const int p = monitored_lp_exponent(dim, degree, options.lp_max_exponent);
  const int lp_grid = fft_friendly_odd(p * cfg.cutoff + 1);

  TrajectoryCheckpoints traj;
  traj.stepper = stepper;
  traj.dt = cfg.dt;
  traj.monitored_lp_exponent = p;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.noise_increments.reserve(steps);

  const NoiseStream stream(cfg.seed, cfg.stream_id);
  SpectralField u = cfg.initial;
  for (std::size_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * cfg.dt;
    const double norm = sobolev_norm(u, sob);
    traj.sobolev_trace.push_back(norm);
    if (options.lp_every > 0 && n % options.lp_every == 0) {
      traj.lp_trace.emplace_back(t, lp_norm(u, p, lp_grid));
    }
    traj.times.push_back(t);
    traj.states.push_back(u);
    check_blowup(u, norm, cfg.blowup_threshold, t);
    if (n == steps) break;
    auto inc = stepper->draw_increments(stream, n);
    u = stepper->step(u, inc);
    traj.noise_increments.push_back(std::move(inc));
  }
  return traj;
}

void run(const Stepper& stepper, const SpectralField& initial, const NoiseStream& stream,
         std::size_t steps,
         const std::function<bool(std::size_t, double, const SpectralField&)>& observe) {
  const auto& cfg = stepper.config();
  const int sob = state_sobolev_index(cfg.flux.dim());
  SpectralField u = initial;
  for (std::size_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * cfg.dt;
    check_blowup(u, sobolev_norm(u, sob), cfg.blowup_threshold, t);
    if (!observe(n, t, u) || n == steps) break;
    u = stepper.step(u, stepper.draw_increments(stream, n));
  }
}

void run(const SimConfig& config,
         const std::function<bool(std::size_t, double, const SpectralField&)>& observe) {
  const Stepper stepper(config);
  run(stepper, stepper.config().initial, NoiseStream(config.seed, config.stream_id),
      stepper.config().steps(), observe);
}

TangentState step_tangent(const Stepper& stepper, const SpectralField& u, const TangentState& tangent) {
  return {stepper.tangent(stepper.grid_of(u), tangent.field), tangent.base_time + stepper.dt()};
}

TangentState step_second_variation(const Stepper& stepper, const SpectralField& u,
                                   const SpectralField& phi, const SpectralField& psi,
                                   const TangentState& j2) {
  return {stepper.second_variation(stepper.grid_of(u), j2.field, phi, psi), j2.base_time + stepper.dt()};
}

SpectralField tangent_solve_steps(const TrajectoryCheckpoints& traj, const SpectralField& xi,
                                  std::size_t from, std::size_t to) {
  if (from > to || to >= traj.size()) throw OutOfRange("tangent window outside the trajectory");
  const auto& st = *traj.stepper;
  SpectralField x = xi;
  for (std::size_t i = from; i < to; ++i) x = st.tangent(st.grid_of(traj.states[i]), x);
  return x;
}

SpectralField tangent_solve(const TrajectoryCheckpoints& traj, const SpectralField& xi, double s, double t) {
  return tangent_solve_steps(traj, xi, traj.index_of(s), traj.index_of(t));
}

void adjoint_sweep(const TrajectoryCheckpoints& traj, const SpectralField& phi, std::size_t from,
                   std::size_t to, const std::function<void(std::size_t, const SpectralField&)>& visit) {
  if (from > to || to >= traj.size()) throw OutOfRange("adjoint window outside the trajectory");
  const auto& st = *traj.stepper;
  SpectralField y = phi;
  visit(to, y);
  for (std::size_t i = to; i > from; --i) {
    y = st.tangent_transpose(st.grid_of(traj.states[i - 1]), y);
    visit(i - 1, y);
  }
}

SpectralField adjoint_solve(const TrajectoryCheckpoints& traj, const SpectralField& phi, double t, double r) {
  const std::size_t ti = traj.index_of(t), ri = traj.index_of(r);
  if (ri > ti) throw OutOfRange("adjoint needs r <= t");
  SpectralField out;
  adjoint_sweep(traj, phi, ri, ti, [&](std::size_t i, const SpectralField& y) {
    if (i == ri) out = y;
  });
  return out;
}

SpectralField second_variation_solve(const TrajectoryCheckpoints& traj, const SpectralField& phi,
                                     const SpectralField& psi, double s, double t) {
  const std::size_t from = traj.index_of(s), to = traj.index_of(t);
  if (from > to) throw OutOfRange("second variation needs s <= t");
  const auto& st = *traj.stepper;
  SpectralField a = phi, b = psi, j2(phi.layout_ptr());
  for (std::size_t i = from; i < to; ++i) {
    const GridField g = st.grid_of(traj.states[i]);
    j2 = st.second_variation(g, j2, a, b);
    a = st.tangent(g, a);
    b = st.tangent(g, b);
  }
  return j2;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace svscl
