#include "svscl/malliavin.hpp"

#include "svscl/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

namespace svscl {

double trapezoid_weight(std::size_t node, std::size_t from, std::size_t to, double dt) {
  if (from == to) return 0.0;
  return (node == from || node == to) ? 0.5 * dt : dt;
}

double quadrature_dot(const ForcingPath& a, const ForcingPath& b, double dt) {
  if (a.from != b.from || a.to != b.to) throw PreconditionError("forcing paths on different windows");
  double s = 0.0;
  for (std::size_t r = 0; r < a.nodes(); ++r) {
    double inner = 0.0;
    for (std::size_t j = 0; j < a.values[r].size(); ++j) inner += a.values[r][j] * b.values[r][j];
    s += trapezoid_weight(a.from + r, a.from, a.to, dt) * inner;
  }
  return s;
}

namespace {

void add_forcing(const Stepper& st, const std::vector<double>& v, double weight, SpectralField& out) {
  if (v.size() != st.forced_count()) throw PreconditionError("control needs one value per forced mode");
  for (std::size_t j = 0; j < v.size(); ++j) {
    out[st.forced_slot(j)] += weight * st.forced_amplitude(j) * v[j];
  }
}

}  // namespace

SpectralField apply_A(const TrajectoryCheckpoints& traj, const ForcingPath& v) {
  if (v.from > v.to || v.to >= traj.size() || v.nodes() != v.to - v.from + 1) {
    throw OutOfRange("control window outside the trajectory");
  }
  const auto& st = *traj.stepper;
  SpectralField x(traj.states[v.from].layout_ptr());
  add_forcing(st, v.values[0], trapezoid_weight(v.from, v.from, v.to, traj.dt), x);
  for (std::size_t i = v.from; i < v.to; ++i) {
    x = st.tangent(st.grid_of(traj.states[i]), x);
    add_forcing(st, v.values[i + 1 - v.from], trapezoid_weight(i + 1, v.from, v.to, traj.dt), x);
  }
  return x;
}

ForcingPath apply_A_star_steps(const TrajectoryCheckpoints& traj, const SpectralField& phi,
                               std::size_t from, std::size_t to) {
  const auto& st = *traj.stepper;
  ForcingPath out;
  out.from = from;
  out.to = to;
  out.values.assign(to - from + 1, std::vector<double>(st.forced_count()));
  adjoint_sweep(traj, phi, from, to, [&](std::size_t i, const SpectralField& y) {
    auto& row = out.values[i - from];
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = st.forced_amplitude(j) * y[st.forced_slot(j)];
  });
  return out;
}

ForcingPath apply_A_star(const TrajectoryCheckpoints& traj, const SpectralField& phi, double s, double t) {
  return apply_A_star_steps(traj, phi, traj.index_of(s), traj.index_of(t));
}

// ---------------------------------------------------------------------------
// Gram matrix

Eigen::VectorXd MalliavinGram::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

std::uint64_t trajectory_hash(const TrajectoryCheckpoints& traj, std::size_t from, std::size_t to) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  for (std::size_t i = from; i <= to && i < traj.size(); ++i) {
    const auto c = traj.states[i].coeffs();
    feed(c.data(), c.size() * sizeof(double));
  }
  return h;
}

std::vector<Wavevector> modes_within(int dim, double radius) {
  const int cutoff = std::max(1, static_cast<int>(std::floor(radius)));
  const auto layout = ModeLayout::get(dim, cutoff);
  std::vector<Wavevector> out;
  for (std::size_t i = 0; i < layout->size(); ++i) {
    if (layout->norm2(i) <= radius * radius) out.push_back(layout->wavevector(i));
  }
  return out;
}

std::vector<Wavevector> all_modes(int dim, int cutoff) {
  const auto layout = ModeLayout::get(dim, cutoff);
  std::vector<Wavevector> out;
  for (std::size_t i = 0; i < layout->size(); ++i) out.push_back(layout->wavevector(i));
  return out;
}

MalliavinGram malliavin_gram_steps(const TrajectoryCheckpoints& traj, std::size_t from, std::size_t to,
                                   const std::vector<Wavevector>& basis, std::size_t cap) {
  if (basis.size() > cap) {
    throw CapExceeded("Gram basis of size " + std::to_string(basis.size()) + " exceeds cap " +
                      std::to_string(cap));
  }
  if (from > to || to >= traj.size()) throw OutOfRange("Gram window outside the trajectory");
  const auto& st = *traj.stepper;
  const int dim = traj.states[0].dim();
  const int cutoff = traj.states[0].cutoff();
  for (const auto& k : basis) {
    if (static_cast<int>(k.size()) != dim || !traj.states[0].layout().find(k)) {
      throw PreconditionError("Gram basis vector outside the Galerkin span");
    }
  }
  const std::size_t nodes = to - from + 1;
  const std::size_t forced = st.forced_count();
  const std::size_t d = basis.size();
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                               static_cast<Eigen::Index>(nodes * forced));
  parallel_for(d, [&](std::size_t a) {
    const auto path = apply_A_star_steps(traj, SpectralField::single_mode(dim, cutoff, basis[a]), from, to);
    for (std::size_t r = 0; r < nodes; ++r) {
      const double sw = std::sqrt(trapezoid_weight(from + r, from, to, traj.dt));
      for (std::size_t j = 0; j < forced; ++j) {
        rows(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(r * forced + j)) = sw * path.values[r][j];
      }
    }
  });
  MalliavinGram g;
  g.basis = basis;
  g.matrix = rows * rows.transpose();
  g.matrix = 0.5 * (g.matrix + g.matrix.transpose()).eval();
  g.s = traj.times[from];
  g.t = traj.times[to];
  g.quad_nodes = nodes;
  g.trajectory_hash = trajectory_hash(traj, from, to);
  return g;
}

MalliavinGram malliavin_gram(const TrajectoryCheckpoints& traj, double s, double t,
                             const std::vector<Wavevector>& basis, std::size_t cap) {
  return malliavin_gram_steps(traj, traj.index_of(s), traj.index_of(t), basis, cap);
}

// ---------------------------------------------------------------------------
// Minimum of the quadratic form on the cap

namespace {

double smallest_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Two tracked modes, one low (index 0) and one high: search the arc directly.
double two_mode_minimum(double a, double b, double d, double alpha) {
  const double theta0 = std::acos(std::clamp(alpha, 0.0, 1.0));
  auto f = [&](double th) {
    const double c = std::cos(th), s = std::sin(th);
    return a * c * c + 2.0 * b * c * s + d * s * s;
  };
  double best = std::min(f(theta0), f(-theta0));
  const double base = 0.5 * std::atan2(2.0 * b, a - d);
  for (int k = -4; k <= 4; ++k) {
    const double th = base + k * std::numbers::pi / 2.0;
    if (std::abs(th) <= theta0) best = std::min(best, f(th));
  }
  return best;
}

}  // namespace

CapMinimum min_quadratic_on_cap(const Eigen::MatrixXd& g, const std::vector<bool>& low, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw PreconditionError("alpha must lie in (0, 1]");
  const Eigen::Index n = g.rows();
  if (g.cols() != n || static_cast<Eigen::Index>(low.size()) != n) {
    throw PreconditionError("matrix and low-mode mask disagree in size");
  }
  std::vector<Eigen::Index> lo, hi;
  for (Eigen::Index i = 0; i < n; ++i) (low[i] ? lo : hi).push_back(i);
  if (lo.empty()) throw PreconditionError("no tracked mode inside the low projection");

  CapMinimum out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(g);
  out.lambda_min_full = full.eigenvalues()(0);
  Eigen::MatrixXd gll(lo.size(), lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) {
    for (std::size_t j = 0; j < lo.size(); ++j) gll(i, j) = g(lo[i], lo[j]);
  }
  out.lambda_min_low = smallest_eigenvalue(gll);

  if (hi.empty()) {  // the cap is the whole sphere
    out.value = out.lambda_min_full;
    return out;
  }
  out.constraint_active = true;
  if (alpha >= 1.0) {
    out.value = out.lambda_min_low;
    out.multiplier = std::numeric_limits<double>::infinity();
    return out;
  }

  // Is some minimizer of the unconstrained problem feasible?
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  Eigen::Index m = 0;
  while (m < n && full.eigenvalues()(m) <= out.lambda_min_full + tol) ++m;
  Eigen::MatrixXd vl(lo.size(), m);
  for (std::size_t i = 0; i < lo.size(); ++i) vl.row(i) = full.eigenvectors().row(lo[i]).leftCols(m);
  const double best_low_mass = smallest_eigenvalue(-(vl.transpose() * vl));
  if (-best_low_mass >= alpha * alpha) {
    out.value = out.lambda_min_full;
    out.constraint_active = false;
    return out;
  }

  if (n == 2) {
    const Eigen::Index l = lo[0], h = hi[0];
    out.value = two_mode_minimum(g(l, l), g(l, h), g(h, h), alpha);
  } else {
    // Concave dual g(mu) = lambda_min(G - mu P) + mu alpha^2, mu >= 0; the
    // joint numerical range of two quadratic forms on the sphere is convex for
    // n >= 3, so its maximum equals the primal minimum.
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (auto i : lo) p(i, i) = 1.0;
    auto slope = [&](double mu, double* value) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g - mu * p);
      const Eigen::VectorXd v = es.eigenvectors().col(0);
      double mass = 0.0;
      for (auto i : lo) mass += v(i) * v(i);
      if (value) *value = es.eigenvalues()(0) + mu * alpha * alpha;
      return alpha * alpha - mass;
    };
    double a = 0.0, b = scale;
    int guard = 0;
    while (slope(b, nullptr) > 0.0 && guard++ < 200) {
      a = b;
      b *= 2.0;
    }
    for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
      const double mid = 0.5 * (a + b);
      (slope(mid, nullptr) > 0.0 ? a : b) = mid;
    }
    double va = 0.0, vb = 0.0;
    slope(a, &va);
    slope(b, &vb);
    out.value = std::max(va, vb);
    out.multiplier = 0.5 * (a + b);
  }
  out.value = std::clamp(out.value, out.lambda_min_full, out.lambda_min_low);
  return out;
}

CapMinimum min_quadratic_on_cap(const MalliavinGram& gram, double alpha, double n_low) {
  if (gram.basis.empty()) throw PreconditionError("empty Gram basis");
  const int dim = static_cast<int>(gram.basis[0].size());
  for (const auto& k : modes_within(dim, n_low)) {
    if (std::find(gram.basis.begin(), gram.basis.end(), k) == gram.basis.end()) {
      throw PreconditionError("tracked basis must contain every mode with |k| <= n_low");
    }
  }
  std::vector<bool> low;
  for (const auto& k : gram.basis) low.push_back(static_cast<double>(norm2(k)) <= n_low * n_low);
  return min_quadratic_on_cap(gram.matrix, low, alpha);
}

// ---------------------------------------------------------------------------
// Control residual

ResidualRun control_residual_run(const SimConfig& base, const SpectralField& xi, int n_windows,
                                 const ResidualOptions& options) {
  if (n_windows < 1) throw PreconditionError("need at least one window pair");
  if (std::abs(l2_norm(xi) - 1.0) > 1e-10) throw PreconditionError("xi must have unit norm");
  if (!(options.beta > 0.0)) throw PreconditionError("beta must be positive");
  const double steps_real = options.window_length / base.dt;
  const auto spw = static_cast<std::size_t>(std::llround(steps_real));
  if (spw == 0 || std::abs(steps_real - static_cast<double>(spw)) > 1e-9 * steps_real) {
    throw PreconditionError("window length must be a multiple of dt");
  }
  SimConfig cfg = base;
  cfg.t_end = static_cast<double>(2 * n_windows * spw) * base.dt;
  const auto traj = simulate(cfg, {0, 8});
  if (xi.layout_ptr() != traj.states[0].layout_ptr()) throw PreconditionError("xi must live on the cutoff");

  const auto basis = all_modes(xi.dim(), xi.cutoff());
  ResidualRun run;
  run.beta = options.beta;
  SpectralField rho = xi, plain = xi, control(xi.layout_ptr());
  for (int n = 0;; ++n) {
    const std::size_t a = 2 * static_cast<std::size_t>(n) * spw;
    ResidualWindow rec;
    rec.n = n;
    rec.time = traj.times[a];
    rec.rho_norm = l2_norm(rho);
    rec.uncontrolled_norm = l2_norm(plain);
    const double denom = std::max({l2_norm(plain), l2_norm(control), 1e-300});
    rec.cross_check_error = l2_norm(rho - (plain - control)) / denom;
    if (n == n_windows) {
      run.windows.push_back(rec);
      break;
    }
    const std::size_t b = a + spw, c = b + spw;
    const auto gram = malliavin_gram_steps(traj, a, b, basis);
    rec.gram_trace = gram.trace();
    rec.gram_lambda_min = gram.eigenvalues()(0);
    run.windows.push_back(rec);
    if (n == 0 && options.beta_relative_to_trace) {
      run.beta = options.beta * gram.trace() / static_cast<double>(gram.size());
    }

    const SpectralField jrho = tangent_solve_steps(traj, rho, a, b);
    const Eigen::Map<const Eigen::VectorXd> y(jrho.coeffs().data(), static_cast<Eigen::Index>(jrho.size()));
    Eigen::MatrixXd shifted = gram.matrix;
    shifted.diagonal().array() += run.beta;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) throw SolveFailure("G + beta I is not positive definite");
    const Eigen::VectorXd w = llt.solve(y);
    if (!w.allFinite()) throw SolveFailure("non-finite control coefficients");

    SpectralField wf(xi.layout_ptr());
    for (std::size_t i = 0; i < wf.size(); ++i) wf[i] = w(static_cast<Eigen::Index>(i));
    ForcingPath v = apply_A_star_steps(traj, wf, a, b);

    // rho_{2n+1} = J rho - G w = beta w, then free evolution over the odd window
    rho = tangent_solve_steps(traj, run.beta * wf, b, c);
    plain = tangent_solve_steps(traj, plain, a, c);
    control = tangent_solve_steps(traj, control, a, b) + apply_A(traj, v);
    control = tangent_solve_steps(traj, control, b, c);
    run.controls.push_back(std::move(v));
  }
  return run;
}

}  // namespace svscl
