#include "doctest.h"

#include "svscl/error.hpp"
#include "svscl/malliavin.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace svscl;

namespace {

NoiseSet pm(int dim, std::initializer_list<Wavevector> positive, double b) {
  std::vector<Wavevector> ks;
  for (const auto& k : positive) {
    ks.push_back(k);
    ks.push_back(negate(k));
  }
  return NoiseSet(dim, ks, std::vector<double>(ks.size(), b));
}

SpectralField random_field(int dim, int cutoff, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  SpectralField f(dim, cutoff);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = g(rng) / (1.0 + f.layout().norm2(i));
  return f;
}

ForcingPath random_path(std::size_t from, std::size_t to, std::size_t forced, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ForcingPath v{from, to, {}};
  for (std::size_t r = from; r <= to; ++r) {
    std::vector<double> row(forced);
    for (auto& x : row) x = g(rng);
    v.values.push_back(row);
  }
  return v;
}

SimConfig heat(double nu, int cutoff, double dt, double t_end, NoiseSet noise) {
  SimConfig c;
  c.nu = nu;
  c.cutoff = cutoff;
  c.dt = dt;
  c.t_end = t_end;
  c.noise = std::move(noise);
  return c;
}

SimConfig burgers(int cutoff, double dt, double t_end, NoiseSet noise, std::uint64_t stream) {
  SimConfig c = heat(0.1, cutoff, dt, t_end, std::move(noise));
  c.flux = FluxPoly(1, {{0, 0, ExactScalar(Rational(1) / 2)}});
  c.stream_id = stream;
  c.seed = 77;
  c.initial = SpectralField::single_mode(1, cutoff, {1}, 1.0);
  return c;
}

}  // namespace

TEST_CASE("A on the heat flow") {
  const double nu = 0.2, t = 1.0, b = 0.7;
  const auto traj = simulate(heat(nu, 3, 1e-3, t, pm(1, {{2}}, b)), {0, 8});
  const std::size_t last = traj.size() - 1;
  // forced modes in noise order: (-2), (2)
  ForcingPath v{0, last, std::vector<std::vector<double>>(last + 1, std::vector<double>{0.0, 1.5})};
  const auto out = apply_A(traj, v);
  const double lambda = nu * 4, bt = b * basis_norm(1);
  CHECK(out.coeff({2}) == doctest::Approx(bt * 1.5 * (1 - std::exp(-lambda * t)) / lambda).epsilon(1e-6));
  CHECK(out.coeff({-2}) == 0.0);

  ForcingPath zero{0, last, std::vector<std::vector<double>>(last + 1, std::vector<double>(2, 0.0))};
  CHECK(l2_norm(apply_A(traj, zero)) == 0.0);

  const auto star = apply_A_star(traj, SpectralField::single_mode(1, 3, {2}), 0.0, t);
  for (std::size_t r = 0; r <= last; r += 100) {
    CHECK(star.values[r][1] == doctest::Approx(bt * std::exp(-lambda * (t - traj.times[r]))).epsilon(1e-12));
    CHECK(star.values[r][0] == 0.0);
  }
  const auto none = apply_A_star(traj, SpectralField::single_mode(1, 3, {1}), 0.0, t);
  for (const auto& row : none.values) CHECK((row[0] == 0.0 && row[1] == 0.0));
}

TEST_CASE("A and A* are adjoint under the shared quadrature") {
  std::mt19937_64 rng(5);
  const auto traj = simulate(burgers(12, 2e-3, 0.5, pm(1, {{1}, {2}}, 0.5), 1), {0, 8});
  const std::size_t from = 50, to = 250;
  for (int trial = 0; trial < 10; ++trial) {
    const auto v = random_path(from, to, 4, rng), w = random_path(from, to, 4, rng);
    const auto phi = random_field(1, 12, rng);
    const double lhs = dot(apply_A(traj, v), phi);
    const double rhs = quadrature_dot(v, apply_A_star_steps(traj, phi, from, to), traj.dt);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    ForcingPath sum = v;
    for (std::size_t r = 0; r < sum.nodes(); ++r) {
      for (std::size_t j = 0; j < 4; ++j) sum.values[r][j] = 2.0 * v.values[r][j] - w.values[r][j];
    }
    const auto lin = apply_A(traj, sum) - (2.0 * apply_A(traj, v) - apply_A(traj, w));
    CHECK(l2_norm(lin) <= 1e-12 * l2_norm(apply_A(traj, sum)));
  }
}

TEST_CASE("Gram on the heat flow") {
  const double nu = 0.3, t = 1.0, b = 0.6;
  const auto traj = simulate(heat(nu, 3, 1e-3, t, pm(1, {{1}}, b)), {0, 8});
  const auto g = malliavin_gram(traj, 0.0, t, {{1}, {2}, {-1}});
  const double bt = b * basis_norm(1);
  CHECK(g.matrix(0, 0) == doctest::Approx(bt * bt * (1 - std::exp(-2 * nu * t)) / (2 * nu)).epsilon(1e-6));
  CHECK(g.matrix(1, 1) == 0.0);
  CHECK(g.matrix(0, 1) == 0.0);
  CHECK(g.matrix(0, 2) == 0.0);
  CHECK(g.quad_nodes == traj.size());
  CHECK_THROWS_AS(malliavin_gram(traj, 0.0, t, {{1}, {2}}, 1), CapExceeded);
  CHECK_THROWS_AS(malliavin_gram(traj, 0.0, t, {{5}}), PreconditionError);
}

TEST_CASE("Gram properties on Burgers") {
  std::mt19937_64 rng(6);
  const auto traj = simulate(burgers(12, 2e-3, 1.0, pm(1, {{1}}, 1.0), 2), {0, 8});
  const auto basis = modes_within(1, 4);
  CHECK(basis.size() == 8);
  const auto g = malliavin_gram(traj, 0.0, 1.0, basis);
  CHECK((g.matrix - g.matrix.transpose()).norm() <= 1e-12 * g.matrix.norm());
  CHECK(g.eigenvalues()(0) >= -1e-10 * g.trace() / 8);
  const auto idx1 = std::find(basis.begin(), basis.end(), Wavevector{1}) - basis.begin();
  const auto idx2 = std::find(basis.begin(), basis.end(), Wavevector{2}) - basis.begin();
  CHECK(g.matrix(idx1, idx1) > 0.0);
  CHECK(g.matrix(idx2, idx2) > 0.0);

  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd c = Eigen::VectorXd::Random(8);
    SpectralField phi(1, 12);
    for (std::size_t a = 0; a < basis.size(); ++a) phi.set(basis[a], c(a));
    const auto star = apply_A_star(traj, phi, 0.0, 1.0);
    const double direct = quadrature_dot(star, star, traj.dt);
    CHECK(c.dot(g.matrix * c) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("minimum on the cap: closed cases") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(4, 4);
  for (double alpha : {0.1, 0.5, 1.0}) {
    CHECK(min_quadratic_on_cap(id, {true, true, false, false}, alpha).value == doctest::Approx(1.0));
  }
  Eigen::MatrixXd d(2, 2);
  d << 1, 0, 0, 0;
  CHECK(min_quadratic_on_cap(d, {true, false}, 1.0).value == doctest::Approx(1.0));
  CHECK(min_quadratic_on_cap(d, {true, true}, 0.5).value == doctest::Approx(0.0));
  // alpha = 1/2 with the zero mode high: cos^2 >= 1/4 -> value 1/4
  CHECK(min_quadratic_on_cap(d, {true, false}, 0.5).value == doctest::Approx(0.25));
  Eigen::MatrixXd d3 = Eigen::MatrixXd::Zero(3, 3);
  d3(0, 0) = 1.0;
  d3(1, 1) = 2.0;
  const auto r = min_quadratic_on_cap(d3, {true, true, false}, 0.5);
  CHECK(r.value == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(r.lambda_min_full == doctest::Approx(0.0));
  CHECK(r.lambda_min_low == doctest::Approx(1.0));
}

TEST_CASE("minimum on the cap against a sphere grid") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 6; ++trial) {
    Eigen::MatrixXd a(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a(i, j) = g(rng);
    }
    const Eigen::MatrixXd gm = a * a.transpose();
    const std::vector<bool> low = trial % 2 ? std::vector<bool>{true, false, false} : std::vector<bool>{true, true, false};
    const double alpha = 0.3 + 0.1 * trial;
    double best = 1e300;
    const int n = 1500;
    for (int i = 0; i <= n; ++i) {
      const double th = std::numbers::pi * i / n;
      for (int j = 0; j < 2 * n; ++j) {
        const double ph = std::numbers::pi * j / n;
        const Eigen::Vector3d x(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
        double mass = 0.0;
        for (int k = 0; k < 3; ++k) mass += low[k] ? x(k) * x(k) : 0.0;
        if (mass < alpha * alpha) continue;
        best = std::min(best, x.dot(gm * x));
      }
    }
    const auto r = min_quadratic_on_cap(gm, low, alpha);
    CAPTURE(trial);
    CHECK(r.value <= best + 1e-10);
    CHECK(best - r.value <= 1e-4 * gm.norm());
  }
}

TEST_CASE("control residual on the heat flow") {
  SimConfig c = heat(0.2, 2, 1e-2, 1.0, pm(1, {{1}, {2}}, 0.5));
  SpectralField xi(1, 2);
  xi.set({1}, 0.6);
  xi.set({-2}, 0.8);
  ResidualOptions opt;
  opt.beta = 1e-2;
  const auto run = control_residual_run(c, xi, 2, opt);
  REQUIRE(run.windows.size() == 3);
  // diagonal closed form: rho_2 = e^{-2 lambda} beta / (beta + G_kk) rho_0
  const double bt = 0.5 * basis_norm(1);
  auto gkk = [&](double lambda) {
    // trapezoid on 101 nodes of int_0^1 bt^2 e^{-2 lambda (1-r)} dr
    double s = 0.0;
    for (int i = 0; i <= 100; ++i) s += (i == 0 || i == 100 ? 0.005 : 0.01) * std::exp(-2 * lambda * (1 - i / 100.0));
    return bt * bt * s;
  };
  double expect = 0.0;
  for (auto [k, v] : {std::pair{1, 0.6}, std::pair{-2, 0.8}}) {
    const double lambda = 0.2 * k * k;
    const double f = std::exp(-2 * lambda) * opt.beta / (opt.beta + gkk(lambda));
    expect += f * f * v * v;
  }
  CHECK(run.windows[1].rho_norm == doctest::Approx(std::sqrt(expect)).epsilon(1e-9));
  CHECK(run.windows[1].rho_norm < run.windows[0].rho_norm);
  for (const auto& w : run.windows) CHECK(w.cross_check_error <= 1e-10);
}

TEST_CASE("control residual without control follows J") {
  SimConfig c = burgers(8, 2e-3, 1.0, pm(1, {{1}, {2}}, 0.5), 3);
  SpectralField xi(1, 8);
  xi.set({1}, 1.0);
  ResidualOptions opt;
  opt.beta = 1e12;
  opt.beta_relative_to_trace = true;
  const auto run = control_residual_run(c, xi, 2, opt);
  for (const auto& w : run.windows) {
    CHECK(std::abs(w.rho_norm - w.uncontrolled_norm) <= 1e-8 * w.uncontrolled_norm);
  }
  opt.beta = 1e-2;
  const auto ctl = control_residual_run(c, xi, 2, opt);
  for (const auto& w : ctl.windows) CHECK(w.cross_check_error <= 1e-6);
  CHECK(ctl.windows.back().rho_norm < run.windows.back().rho_norm);
}
