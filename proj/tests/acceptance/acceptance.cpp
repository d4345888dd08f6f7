// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "lattice_oracle.hpp"
#include "svscl/cli.hpp"
#include "svscl/ergolab.hpp"
#include "svscl/lattice.hpp"
#include "svscl/malliavin.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace svscl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

ExactScalar q(long long n, long long d = 1) { return ExactScalar(Rational(n) / d); }

FluxPoly burgers() { return FluxPoly(1, {{0, 0, q(1, 2)}}); }

NoiseSet pm(int dim, const std::vector<Wavevector>& positive, double b) {
  std::vector<Wavevector> k;
  for (const auto& p : positive) {
    k.push_back(p);
    k.push_back(negate(p));
  }
  return NoiseSet(dim, k, std::vector<double>(k.size(), b));
}

RunConfig fixture(const std::string& name) {
  std::ifstream in(std::string(SVSCL_FIXTURE_DIR) + "/" + name + ".cfg");
  if (!in) throw Error("missing fixture " + name);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

ExperimentRecord run_default(const std::string& name) { return run_experiment(default_spec(name)); }

std::string metric_line(const ExperimentRecord& r, std::initializer_list<const char*> keys) {
  std::string s;
  for (const char* k : keys) s += std::string(s.empty() ? "" : ", ") + k + "=" + num(r.metrics.at(k));
  return s;
}

Outcome heat_exactness() {
  SimConfig c;
  c.nu = 0.1;
  c.flux = FluxPoly(1, {{0}});
  c.cutoff = 4;
  c.dt = 1e-2;
  c.t_end = 1.0;
  c.scheme = Scheme::ExpEuler;
  c.initial = SpectralField(1, c.cutoff);
  c.initial.set({3}, 1.0);
  SpectralField end;
  run(c, [&](std::size_t n, double, const SpectralField& u) {
    if (n == c.steps()) end = u;
    return true;
  });
  const double expect = std::exp(-0.9);
  const double err = std::abs(end.coeff({3}) - expect) / expect;
  return {err <= 1e-10, "relative error " + num(err)};
}

Outcome energy_identity() {
  const auto r = run_default("energy_identity");
  return {r.metrics.at("max_defect") < 10.0 * r.metrics.at("dt"), metric_line(r, {"max_defect", "dt"})};
}

Outcome l1_contraction() {
  const auto r = run_default("l1_contraction");
  return {r.metrics.at("pairs") == 100 && r.metrics.at("violations") == 0, metric_line(r, {"pairs", "violations"})};
}

Outcome tangent_correctness() {
  SimConfig c;
  c.nu = 0.1;
  c.flux = burgers();
  c.noise = pm(1, {{1}, {2}}, 0.5);
  c.cutoff = 16;
  c.dt = 1e-3;
  c.t_end = 1.0;
  c.seed = 77;
  c.initial = SpectralField(1, c.cutoff);
  c.initial.set({1}, std::sqrt(M_PI));
  const auto traj = simulate(c, {0, 8});
  const std::size_t last = traj.size() - 1;

  // finite differences along xi = e_2
  SpectralField xi(1, c.cutoff);
  xi.set({2}, 1.0);
  const SpectralField j = tangent_solve(traj, xi, 0.0, c.t_end);
  std::vector<double> errors;
  for (double eps : {1e-3, 1e-4, 1e-5}) {
    SimConfig p = c;
    p.initial = c.initial + eps * xi;
    SpectralField end;
    run(p, [&](std::size_t n, double, const SpectralField& u) {
      if (n == p.steps()) end = u;
      return true;
    });
    errors.push_back(l2_norm((1.0 / eps) * (end - traj.states.back()) - j) / l2_norm(j));
  }
  bool first_order = true;
  for (std::size_t i = 1; i < errors.size(); ++i) first_order = first_order && errors[i - 1] / errors[i] >= 5.0;

  // duality on random pairs and random windows
  const NoiseStream stream(4040, 0);
  std::mt19937_64 rng(4040);
  double worst = 0.0;
  for (std::uint64_t p = 0; p < 50; ++p) {
    const SpectralField x = random_field(1, c.cutoff, 8.0, 1.0, stream, 2 * p);
    const SpectralField phi = random_field(1, c.cutoff, 8.0, 1.0, stream, 2 * p + 1);
    std::size_t a = rng() % last, b = rng() % last;
    if (a > b) std::swap(a, b);
    ++b;
    const double r = traj.times[a], t = traj.times[b];
    const double lhs = dot(adjoint_solve(traj, phi, t, r), x);
    const double rhs = dot(phi, tangent_solve(traj, x, r, t));
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
  }
  return {first_order && worst <= 1e-8, "fd errors " + num(errors[0]) + " / " + num(errors[1]) + " / " +
                                            num(errors[2]) + ", worst duality " + num(worst)};
}

Outcome perp_decay() {
  const auto r = run_default("perp_decay");
  const bool ok = r.metrics.at("precondition_ok") == 1.0 && r.metrics.at("rate_rel_error") <= 0.01 &&
                  r.metrics.at("r2") > 0.999;
  return {ok, metric_line(r, {"rate", "rate_rel_error", "r2"})};
}

Outcome ou_law() {
  const auto r = run_default("ou_law");
  const bool ok = decide("ou_law", r.metrics) == ExperimentVerdict::Pass && r.metrics.at("effective_samples") >= 1e4;
  return {ok, metric_line(r, {"est_11", "ref_11", "est_12", "ref_12", "est_22", "ref_22", "effective_samples"})};
}

Outcome lattice_oracle() {
  std::mt19937_64 rng(2718);
  std::uniform_int_distribution<int> coef(-5, 5), dimd(1, 3), degd(1, 4), sized(1, 3), entry(-2, 2);
  int matches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = dimd(rng), degree = degd(rng);
    std::vector<std::vector<ExactScalar>> rows(dim, std::vector<ExactScalar>(degree + 1));
    std::vector<oracle::Q> top(dim);
    bool any_top = false;
    while (!any_top) {
      for (int i = 0; i < dim; ++i) {
        for (int jj = 1; jj <= degree; ++jj) {
          int d = 0;
          while (d == 0) d = coef(rng);
          const Rational v = Rational(coef(rng)) / d;
          rows[i][jj] = ExactScalar(v);
          if (jj == degree) top[i] = oracle::Q(v);
        }
        any_top = any_top || top[i] != 0;
      }
    }
    std::set<oracle::K> z0;
    const int half = dim == 1 ? std::min(sized(rng), 2) : sized(rng);
    while (static_cast<int>(z0.size()) < 2 * half) {
      oracle::K k(dim);
      for (auto& v : k) v = entry(rng);
      if (oracle::inf_norm(k) == 0) continue;
      z0.insert(k);
      for (auto& v : k) v = -v;
      z0.insert(k);
    }
    const FluxPoly flux(dim, rows);
    const NoiseSet noise(dim, {z0.begin(), z0.end()}, std::vector<double>(z0.size(), 1.0));
    // the recursion is window-closed at |k|_inf <= 10; compare well inside it
    const auto got = reachable_set(flux, noise, 6, 4);
    WavevectorSet expect;
    for (const auto& k : oracle::z_infinity(top, degree, z0, dim, 10)) {
      if (oracle::inf_norm(k) <= 6) expect.insert(k);
    }
    matches += got.wavevectors == expect;
  }
  auto holds = [](const RunConfig& c) {
    const auto v = check_condition(c.sim.flux, c.sim.noise, c.radius, c.lattice_margin()).verdict;
    return v == Verdict::HoldsExact || v == Verdict::HoldsUpToRadius;
  };
  const bool fixtures_hold =
      holds(fixture("square_flux_2d")) && holds(fixture("irrational_slopes_2d")) && holds(fixture("cubic_1d"));
  const RunConfig bad = fixture("x_flux_y_noise");
  const auto rep = check_condition(bad.sim.flux, bad.sim.noise, bad.radius, bad.lattice_margin());
  const bool counter = rep.verdict == Verdict::Violated && rep.witness && *rep.witness == Wavevector{1, 0};
  return {matches == 20 && fixtures_hold && counter,
          std::to_string(matches) + "/20 oracle matches, fixtures hold=" + (fixtures_hold ? "yes" : "no") +
              ", counterexample witness (1,0)=" + (counter ? "yes" : "no")};
}

Outcome nondegeneracy() {
  const bool b = check_algebraic_nondegeneracy(burgers(), pm(1, {{1}}, 1.0)).algebraic;
  const bool sq = check_algebraic_nondegeneracy(FluxPoly(2, {{0, 0, 1}, {0, 0, 1}}), axis_pattern_noise(2, 1)).algebraic;
  const bool ir = check_algebraic_nondegeneracy(FluxPoly(2, {{0, 0, 1}, {0, 0, ExactScalar::sqrt_of(2)}}),
                                                axis_pattern_noise(2, 1))
                      .algebraic;
  return {b && !sq && ir, std::string("burgers=") + (b ? "true" : "false") + ", (u^2,u^2)=" + (sq ? "true" : "false") +
                              ", (u^2,sqrt(2)u^2)=" + (ir ? "true" : "false")};
}

Outcome malliavin_spectrum() {
  const auto r = run_default("malliavin_spectrum");
  const bool ok = r.metrics.at("holding_positive") == 20 && r.metrics.at("holding_min") > 1e-8 &&
                  r.metrics.at("control_max") <= 1e-12;
  return {ok, metric_line(r, {"holding_positive", "holding_min", "control_max"})};
}

Outcome residual_decay() {
  const auto r = run_default("residual_decay");
  const bool ok = decide("residual_decay", r.metrics) == ExperimentVerdict::Pass;
  std::string d;
  for (int i = 0; i < static_cast<int>(r.metrics.at("beta_count")); ++i) {
    const std::string s = std::to_string(i);
    d += "slope_" + s + "=" + num(r.metrics.at("slope_" + s)) + " r2_" + s + "=" + num(r.metrics.at("r2_" + s)) + ", ";
  }
  return {ok, d + "beta_inf_gap=" + num(r.metrics.at("beta_inf_gap"))};
}

Outcome density_proxy() {
  const auto r = run_default("density_proxy");
  return {decide("density_proxy", r.metrics) == ExperimentVerdict::Pass,
          metric_line(r, {"max_bin_fraction", "collapse_fraction", "normality_p_value"})};
}

Outcome uniqueness_eproperty() {
  const auto u = run_default("uniqueness_probe");
  const auto e = run_default("eproperty");
  const bool ok = u.metrics.at("p_value") > 0.01 && e.metrics.at("monotone") == 1.0;
  return {ok, metric_line(u, {"p_value"}) + ", " + metric_line(e, {"modulus_0", "modulus_1", "modulus_2"})};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "heat exactness", 1, heat_exactness},
      {2, "energy identity", 10, energy_identity},
      {3, "L1 contraction", 120, l1_contraction},
      {4, "tangent correctness", 600, tangent_correctness},
      {5, "perp-mode decay", 60, perp_decay},
      {6, "OU law", 120, ou_law},
      {7, "lattice oracle equivalence", 10, lattice_oracle},
      {8, "algebraic non-degeneracy", 1, nondegeneracy},
      {9, "Malliavin spectrum", 300, malliavin_spectrum},
      {10, "residual decay", 600, residual_decay},
      {11, "density proxy", 300, density_proxy},
      {12, "uniqueness and e-property snapshots", 900, uniqueness_eproperty},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %2d %s: %s [%s; %.2f s of %.0f s%s]\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%s: %d of %zu criteria passed\n", failed ? "FAIL" : "PASS", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed ? 1 : 0;
}
