#include "svscl/ergolab.hpp"

#include "svscl/error.hpp"
#include "svscl/malliavin.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <map>

namespace svscl {

namespace {

// Stream-id offsets keeping every family of draws disjoint from path streams.
constexpr std::uint64_t kInitialStreams = 1ull << 40;
constexpr std::uint64_t kSecondSet = 1ull << 32;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ExperimentRecord make_record(const ExperimentSpec& spec) {
  ExperimentRecord r;
  r.name = spec.name;
  r.params = spec.params;
  r.params["nu"] = fmt(spec.config.nu);
  r.params["cutoff"] = std::to_string(spec.config.cutoff);
  r.params["dt"] = fmt(spec.config.dt);
  r.params["t_end"] = fmt(spec.config.t_end);
  r.params["scheme"] = to_string(spec.config.scheme);
  r.params["burn_in"] = fmt(spec.burn_in);
  r.ensemble_size = spec.ensemble_size;
  r.seed = spec.config.seed;
  r.rule = verdict_rule(spec.name);
  return r;
}

void add_stats(ExperimentRecord& r, const std::string& name, std::vector<double> series) {
  if (series.size() >= kMinBatches) r.statistics.push_back({name, batch_means(series)});
  r.series[name] = std::move(series);
}

void finish(ExperimentRecord& r) { r.verdict = decide(r.name, r.metrics); }

SpectralField initial_of(const SimConfig& c) {
  return c.initial.size() ? c.initial.with_cutoff(c.cutoff) : SpectralField(c.flux.dim(), c.cutoff);
}

void check_state(const SpectralField& u, double t, double threshold) {
  if (!u.is_finite()) throw Blowup("non-finite state", t, std::numeric_limits<double>::infinity());
  const double n = l2_norm(u);
  if (n > threshold) throw Blowup("state norm above blowup threshold", t, n);
}

std::size_t steps_for(double time, double dt, const char* what) {
  const double s = time / dt;
  const auto n = static_cast<std::size_t>(std::llround(s));
  if (std::abs(s - static_cast<double>(n)) > 1e-9 * std::max(1.0, s)) {
    throw PreconditionError(std::string(what) + " must be a multiple of dt");
  }
  return n;
}

double default_burn_in(const ExperimentSpec& spec) {
  // slowest tracked heat rate is nu * 1^2
  return spec.burn_in > 0.0 ? spec.burn_in : 5.0 / spec.config.nu;
}

Wavevector first_axis(const ExperimentSpec& spec) { return axis_vector(spec.config.flux.dim(), 0); }

SpectralField unit_mode(const SimConfig& c, const Wavevector& k) {
  SpectralField f(c.flux.dim(), c.cutoff);
  if (!f.layout().find(k)) throw PreconditionError("mode outside the cutoff");
  f.set(k, 1.0);
  return f;
}

bool reachable_contains(const SimConfig& c, const Wavevector& k) {
  if (flux_is_zero(c.flux)) return c.noise.contains(k);
  int radius = std::max(max_norm(k), 1);
  for (const auto& f : c.noise.wavevectors) radius = std::max(radius, max_norm(f));
  return reachable_set(c.flux, c.noise, radius, 4).wavevectors.contains(k);
}

bool perp_contains(const SimConfig& c, const Wavevector& k) {
  return flux_is_zero(c.flux) || in_a_perp(c.flux, k);
}

}  // namespace

SpectralField random_field(int dim, int cutoff, double radius, double amplitude, const NoiseStream& stream,
                           std::uint64_t step) {
  SpectralField f(dim, cutoff);
  const auto& layout = f.layout();
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double k2 = layout.norm2(i);
    if (k2 <= radius * radius) {
      f[i] = amplitude / std::sqrt(k2) * stream.normal(step, static_cast<std::uint32_t>(i));
    }
  }
  return f;
}

std::array<double, 3> lyapunov_2x2(const std::array<double, 4>& b, double q1, double q2) {
  // unknowns (s11, s12, s22) of B S + S B^T = -diag(q1^2, q2^2)
  Eigen::Matrix3d m;
  m << 2.0 * b[0], 2.0 * b[1], 0.0,  //
      b[2], b[0] + b[3], b[1],       //
      0.0, 2.0 * b[2], 2.0 * b[3];
  const Eigen::Vector3d rhs(-q1 * q1, 0.0, -q2 * q2);
  const Eigen::Vector3d s = m.fullPivLu().solve(rhs);
  if (!s.allFinite() || (m * s - rhs).norm() > 1e-10 * (1.0 + rhs.norm())) {
    throw SolveFailure("drift has no stationary covariance");
  }
  return {s(0), s(1), s(2)};
}

ExperimentRecord exp_energy_identity(const ExperimentSpec& spec) {
  const SimConfig& c = spec.config;
  if (!c.noise.empty()) throw PreconditionError("energy_identity requires an empty noise set");
  c.validate();
  const Stepper stepper(c);
  SpectralField u = initial_of(c);
  if (l2_norm(u) == 0.0) throw PreconditionError("energy_identity requires a nonzero initial field");

  // Exact heat dissipation over one step, mode by mode:
  // int_0^dt 2 nu |k|^2 e^{-2 nu |k|^2 s} ds = 1 - e^{-2 nu |k|^2 dt}.
  const auto& layout = u.layout();
  std::vector<double> loss(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) loss[i] = -std::expm1(-2.0 * c.nu * layout.norm2(i) * c.dt);

  ExperimentRecord r = make_record(spec);
  std::vector<double> defects;
  const std::size_t steps = c.steps();
  defects.reserve(steps);
  double worst = 0.0;
  for (std::size_t n = 0; n < steps; ++n) {
    SpectralField next = stepper.step(u, {});
    check_state(next, static_cast<double>(n + 1) * c.dt, c.blowup_threshold);
    double e0 = 0.0, e1 = 0.0, diss = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      e0 += u[i] * u[i];
      e1 += next[i] * next[i];
      diss += loss[i] * u[i] * u[i];
    }
    const double d = diss > 0.0 ? std::abs(e1 - e0 + diss) / diss : 0.0;
    defects.push_back(d);
    worst = std::max(worst, d);
    u = std::move(next);
  }
  r.metrics = {{"max_defect", worst}, {"dt", c.dt}, {"steps", static_cast<double>(steps)},
               {"final_energy", l2_norm(u) * l2_norm(u)}};
  add_stats(r, "relative_defect", std::move(defects));
  finish(r);
  return r;
}

ExperimentRecord exp_l1_contraction(const ExperimentSpec& spec) {
  const SimConfig& c = spec.config;
  c.validate();
  const auto stepper = std::make_shared<const Stepper>(c);
  const bool random_initial = spec.initial_b.size() == 0 || spec.param_int("random_initial", 0) != 0;
  const double radius = spec.param("init_radius", 4.0);
  const double amplitude = spec.param("init_amplitude", 1.0);
  const auto every = static_cast<std::size_t>(std::max(1LL, spec.param_int("monitor_every", 10)));
  const std::size_t steps = c.steps();
  const int dim = c.flux.dim();

  struct PairResult {
    std::size_t violations = 0;
    double worst_excess = 0.0;
    double first = 0.0;
    double last = 0.0;
    std::size_t points = 0;
    std::vector<double> trace;
  };
  std::vector<PairResult> results(spec.ensemble_size);
  parallel_for(spec.ensemble_size, [&](std::size_t p) {
    SpectralField u, v;
    if (random_initial) {
      const NoiseStream init(c.seed, c.stream_id + kInitialStreams + p);
      u = random_field(dim, c.cutoff, radius, amplitude, init, 0);
      v = random_field(dim, c.cutoff, radius, amplitude, init, 1);
    } else {
      u = initial_of(c);
      v = spec.initial_b.with_cutoff(c.cutoff);
    }
    const NoiseStream stream(c.seed, c.stream_id + p);
    PairResult& res = results[p];
    double bound = std::numeric_limits<double>::infinity();
    auto monitor = [&](std::size_t n) {
      const double d = l1_norm(u - v);
      if (d > bound) {
        ++res.violations;
        res.worst_excess = std::max(res.worst_excess, (d - bound) / bound);
      }
      bound = std::min(bound, d * (1.0 + 1e-6) + 1e-8);
      if (n == 0) res.first = d;
      res.last = d;
      ++res.points;
      if (p == 0) res.trace.push_back(d);
    };
    monitor(0);
    for (std::size_t n = 0; n < steps; ++n) {
      const auto inc = stepper->draw_increments(stream, n);
      u = stepper->step(u, inc);
      v = stepper->step(v, inc);
      const double t = static_cast<double>(n + 1) * c.dt;
      check_state(u, t, c.blowup_threshold);
      check_state(v, t, c.blowup_threshold);
      if ((n + 1) % every == 0 || n + 1 == steps) monitor(n + 1);
    }
  });

  ExperimentRecord r = make_record(spec);
  std::size_t violations = 0, points = 0;
  double worst = 0.0;
  std::vector<double> finals, ratios;
  for (const auto& res : results) {
    violations += res.violations;
    points += res.points;
    worst = std::max(worst, res.worst_excess);
    finals.push_back(res.last);
    ratios.push_back(res.first > 0.0 ? res.last / res.first : 0.0);
  }
  r.metrics = {{"violations", static_cast<double>(violations)},
               {"pairs", static_cast<double>(results.size())},
               {"monitored_points", static_cast<double>(points)},
               {"worst_relative_excess", worst}};
  add_stats(r, "l1_distance_final", std::move(finals));
  add_stats(r, "l1_ratio_final_initial", std::move(ratios));
  r.series["l1_distance_pair0"] = std::move(results[0].trace);
  if (violations) r.diagnostic = std::to_string(violations) + " monitored points exceed the contraction bound";
  finish(r);
  return r;
}

ExperimentRecord exp_perp_decay(const ExperimentSpec& spec) {
  SimConfig c = spec.config;
  const Wavevector k = spec.param_wavevector("k_star", {});
  if (k.empty()) throw PreconditionError("perp_decay needs parameter k_star");
  const Wavevector mk = negate(k);
  const auto every = static_cast<std::size_t>(std::max(1LL, spec.param_int("sample_every", 20)));

  ExperimentRecord r = make_record(spec);
  const bool perp = perp_contains(c, k);
  const bool forced = c.noise.contains(k) || c.noise.contains(mk);
  const bool reachable = reachable_contains(c, k);
  const bool pre_ok = perp && !forced && !reachable;

  SpectralField u0 = initial_of(c);
  if (!u0.layout().find(k)) throw PreconditionError("k_star outside the cutoff");
  u0.set(k, 1.0);
  c.initial = u0;
  c.validate();

  std::vector<double> times, logs, energy;
  run(c, [&](std::size_t n, double t, const SpectralField& u) {
    if (n % every == 0) {
      const double e = u.coeff(k) * u.coeff(k) + u.coeff(mk) * u.coeff(mk);
      energy.push_back(e);
      if (e > 0.0) {
        times.push_back(t);
        logs.push_back(std::log(e));
      }
    }
    return true;
  });
  if (times.size() < 2) throw PreconditionError("pair energy vanished; nothing to fit");
  const LinearFit fit = linear_fit(times, logs);
  const double expected = 2.0 * c.nu * static_cast<double>(norm2(k));
  const double rate = -fit.slope;
  r.metrics = {{"rate", rate},
               {"expected_rate", expected},
               {"rate_rel_error", std::abs(rate - expected) / expected},
               {"r2", fit.r2},
               {"precondition_ok", pre_ok ? 1.0 : 0.0},
               {"k_star_forced", forced ? 1.0 : 0.0},
               {"k_star_in_a_perp", perp ? 1.0 : 0.0},
               {"k_star_reachable", reachable ? 1.0 : 0.0}};
  if (!pre_ok) {
    r.diagnostic = forced ? "k_star is forced: pair energy plateaus at its stationary level"
                          : (!perp ? "k_star is not in A-perp" : "k_star is reachable");
  }
  add_stats(r, "pair_energy", std::move(energy));
  r.series["time"] = times;
  finish(r);
  return r;
}

ExperimentRecord exp_ou_law(const ExperimentSpec& spec) {
  const SimConfig& c = spec.config;
  if (flux_is_zero(c.flux) || flux_degree(c.flux) != 1) throw PreconditionError("ou_law requires a degree-1 flux");
  c.validate();
  Wavevector k = spec.param_wavevector("k", first_axis(spec));
  if (!is_positive(k)) k = negate(k);
  const Wavevector mk = negate(k);
  const auto samples = static_cast<std::size_t>(spec.param_int("samples_per_path", 150));
  const std::size_t spacing = steps_for(spec.param("spacing", 5.0), c.dt, "spacing");
  const std::size_t burn = steps_for(default_burn_in(spec), c.dt, "burn_in");
  if (samples == 0 || spacing == 0) throw PreconditionError("ou_law needs samples and a positive spacing");

  const Stepper stepper(c);
  const SpectralField u0 = initial_of(c);
  if (!u0.layout().find(k)) throw PreconditionError("mode outside the cutoff");
  std::vector<std::vector<double>> xs(spec.ensemble_size), ys(spec.ensemble_size);
  parallel_for(spec.ensemble_size, [&](std::size_t p) {
    const NoiseStream stream(c.seed, c.stream_id + p);
    auto& x = xs[p];
    auto& y = ys[p];
    run(stepper, u0, stream, burn + samples * spacing, [&](std::size_t n, double, const SpectralField& u) {
      if (n > burn && (n - burn) % spacing == 0) {
        x.push_back(u.coeff(k));
        y.push_back(u.coeff(mk));
      }
      return true;
    });
  });
  std::vector<double> x, y, xx, xy, yy;
  for (std::size_t p = 0; p < xs.size(); ++p) {
    x.insert(x.end(), xs[p].begin(), xs[p].end());
    y.insert(y.end(), ys[p].begin(), ys[p].end());
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx.push_back(x[i] * x[i]);
    xy.push_back(x[i] * y[i]);
    yy.push_back(y[i] * y[i]);
  }

  // du_k = (-lambda u_k - <a,k> u_{-k}) dt + q dW,  du_{-k} = (-lambda u_{-k} + <a,k> u_k) dt + q' dW'
  const double lambda = c.nu * static_cast<double>(norm2(k));
  const double ak = c.flux.pairing_value(1, k);
  const double s = basis_norm(c.flux.dim());
  const double q1 = c.noise.contains(k) ? c.noise.amplitude(k) * s : 0.0;
  const double q2 = c.noise.contains(mk) ? c.noise.amplitude(mk) * s : 0.0;
  const auto ref = lyapunov_2x2({-lambda, -ak, ak, -lambda}, q1, q2);

  ExperimentRecord r = make_record(spec);
  const double mx = x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  const double my = y.empty() ? 0.0 : std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  const BatchMeans bxx = batch_means(xx), bxy = batch_means(xy), byy = batch_means(yy);
  auto n_eff = [](const BatchMeans& b) {
    return b.std_error > 0.0 ? b.variance / (b.std_error * b.std_error) : static_cast<double>(b.samples);
  };
  r.metrics = {{"ref_11", ref[0]},
               {"ref_12", ref[1]},
               {"ref_22", ref[2]},
               {"est_11", bxx.mean - mx * mx},
               {"est_12", bxy.mean - mx * my},
               {"est_22", byy.mean - my * my},
               {"se_11", bxx.std_error},
               {"se_12", bxy.std_error},
               {"se_22", byy.std_error},
               {"samples", static_cast<double>(x.size())},
               {"effective_samples", std::min({n_eff(bxx), n_eff(bxy), n_eff(byy)})}};
  add_stats(r, Observable::mode(k).name(), std::move(x));
  add_stats(r, Observable::mode(mk).name(), std::move(y));
  add_stats(r, "product_11", std::move(xx));
  add_stats(r, "product_12", std::move(xy));
  add_stats(r, "product_22", std::move(yy));
  finish(r);
  return r;
}

ExperimentRecord exp_uniqueness_probe(const ExperimentSpec& spec) {
  const SimConfig& c = spec.config;
  c.validate();
  const Stepper stepper(c);
  const int dim = c.flux.dim();
  const auto modes = modes_within(dim, spec.param("observable_radius", 2.0));
  const auto perms = static_cast<std::size_t>(spec.param_int("permutations", 500));
  const auto snapshots = static_cast<std::size_t>(std::max(1LL, spec.param_int("snapshots", 10)));
  const std::size_t total = c.steps();
  const double burn = std::min(default_burn_in(spec), c.t_end);
  const std::size_t burn_steps = steps_for(burn, c.dt, "burn_in");
  if (burn_steps >= total) throw PreconditionError("t_end must exceed the burn-in");
  std::vector<std::size_t> snap_steps;
  for (std::size_t j = 1; j <= snapshots; ++j) snap_steps.push_back(burn_steps + (total - burn_steps) * j / snapshots);

  const SpectralField ua = initial_of(c);
  const SpectralField ub = spec.initial_b.size() ? spec.initial_b.with_cutoff(c.cutoff) : ua;
  const std::size_t m = spec.ensemble_size;
  // obs[set][path][snapshot] = observable vector
  std::vector<std::vector<std::vector<Sample>>> obs(2, std::vector<std::vector<Sample>>(m));
  parallel_for(2 * m, [&](std::size_t job) {
    const std::size_t set = job / m, p = job % m;
    const NoiseStream stream(c.seed, c.stream_id + set * kSecondSet + p);
    auto& out = obs[set][p];
    std::size_t next = 0;
    run(stepper, set ? ub : ua, stream, total, [&](std::size_t n, double t, const SpectralField& u) {
      if (next < snap_steps.size() && n == snap_steps[next]) {
        check_state(u, t, c.blowup_threshold);
        Sample s;
        for (const auto& k : modes) s.push_back(u.coeff(k));
        out.push_back(std::move(s));
        ++next;
      }
      return true;
    });
  });

  ExperimentRecord r = make_record(spec);
  std::vector<double> times, distances;
  for (std::size_t j = 0; j < snap_steps.size(); ++j) {
    std::vector<Sample> a, b;
    for (std::size_t p = 0; p < m; ++p) {
      a.push_back(obs[0][p][j]);
      b.push_back(obs[1][p][j]);
    }
    times.push_back(static_cast<double>(snap_steps[j]) * c.dt);
    distances.push_back(energy_distance(a, b));
  }
  std::vector<Sample> a, b;
  for (std::size_t p = 0; p < m; ++p) {
    a.push_back(obs[0][p].back());
    b.push_back(obs[1][p].back());
  }
  const PermutationTest test = energy_permutation_test(a, b, perms, c.seed);
  r.metrics = {{"p_value", test.p_value},
               {"energy_distance", test.statistic},
               {"permutations", static_cast<double>(perms)},
               {"burn_in", burn},
               {"t_end", c.t_end}};
  for (std::size_t i = 0; i < modes.size(); ++i) {
    std::vector<double> sa, sb;
    for (std::size_t p = 0; p < m; ++p) {
      sa.push_back(a[p][i]);
      sb.push_back(b[p][i]);
    }
    const std::string name = Observable::mode(modes[i]).name();
    add_stats(r, "A:" + name, std::move(sa));
    add_stats(r, "B:" + name, std::move(sb));
  }
  r.series["time"] = std::move(times);
  r.series["energy_distance"] = std::move(distances);
  finish(r);
  return r;
}

ExperimentRecord exp_irreducibility(const ExperimentSpec& spec) {
  SimConfig c = spec.config;
  const double gamma = spec.param("gamma", 0.5);
  if (!(gamma > 0.0)) throw PreconditionError("gamma must be positive");
  const double order = state_sobolev_index(c.flux.dim());
  SpectralField u0 = initial_of(c);
  const double target = spec.param("initial_norm", 0.0);
  if (target > 0.0) {
    const double n0 = sobolev_norm(u0, order);
    if (n0 == 0.0) throw PreconditionError("cannot rescale a zero initial field");
    u0 *= target / n0;
  }
  c.initial = u0;
  c.validate();
  const Stepper stepper(c);
  const std::size_t steps = c.steps();
  std::vector<double> finals(spec.ensemble_size);
  parallel_for(spec.ensemble_size, [&](std::size_t p) {
    const NoiseStream stream(c.seed, c.stream_id + p);
    run(stepper, u0, stream, steps, [&](std::size_t n, double t, const SpectralField& u) {
      if (n == steps) {
        check_state(u, t, c.blowup_threshold);
        finals[p] = sobolev_norm(u, order);
      }
      return true;
    });
  });
  std::size_t hits = 0;
  for (double v : finals) hits += v <= gamma ? 1 : 0;
  const auto [lo, hi] = clopper_pearson(hits, finals.size());
  ExperimentRecord r = make_record(spec);
  r.metrics = {{"hits", static_cast<double>(hits)},
               {"paths", static_cast<double>(finals.size())},
               {"frequency", static_cast<double>(hits) / static_cast<double>(finals.size())},
               {"cp_low", lo},
               {"cp_high", hi},
               {"gamma", gamma},
               {"initial_norm", sobolev_norm(u0, order)}};
  add_stats(r, Observable::sobolev(order).name(), std::move(finals));
  finish(r);
  return r;
}

ExperimentRecord exp_eproperty(const ExperimentSpec& spec) {
  const SimConfig& c = spec.config;
  c.validate();
  std::vector<double> deltas = spec.param_list("deltas", {0.1, 0.05, 0.025});
  std::sort(deltas.begin(), deltas.end(), std::greater<>());
  const Wavevector xi_k = spec.param_wavevector("xi", first_axis(spec));
  const Wavevector f_k = spec.param_wavevector("f_mode", first_axis(spec));
  const std::size_t every = steps_for(spec.param("horizon_every", 5.0), c.dt, "horizon_every");
  if (every == 0) throw PreconditionError("horizon_every must be positive");
  const Stepper stepper(c);
  const std::size_t steps = c.steps();
  const SpectralField u0 = initial_of(c);
  const SpectralField xi = unit_mode(c, xi_k);
  std::vector<std::size_t> horizon;
  for (std::size_t n = every; n <= steps; n += every) horizon.push_back(n);
  if (horizon.empty()) throw PreconditionError("horizon grid is empty");

  const std::size_t variants = deltas.size() + 1;
  // f_values[path][variant][horizon index]
  std::vector<std::vector<std::vector<double>>> fv(
      spec.ensemble_size, std::vector<std::vector<double>>(variants, std::vector<double>(horizon.size())));
  parallel_for(spec.ensemble_size, [&](std::size_t p) {
    const NoiseStream stream(c.seed, c.stream_id + p);
    std::vector<SpectralField> states;
    states.push_back(u0);
    for (double d : deltas) states.push_back(u0 + d * xi);
    std::size_t h = 0;
    for (std::size_t n = 0; n < steps; ++n) {
      const auto inc = stepper.draw_increments(stream, n);
      for (auto& s : states) s = stepper.step(s, inc);
      if (h < horizon.size() && n + 1 == horizon[h]) {
        for (std::size_t v = 0; v < variants; ++v) {
          check_state(states[v], static_cast<double>(n + 1) * c.dt, c.blowup_threshold);
          fv[p][v][h] = std::tanh(states[v].coeff(f_k));
        }
        ++h;
      }
    }
  });

  ExperimentRecord r = make_record(spec);
  const auto m = static_cast<double>(spec.ensemble_size);
  std::vector<double> modulus(deltas.size(), 0.0), at_end(deltas.size(), 0.0);
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    std::vector<double> curve;
    for (std::size_t h = 0; h < horizon.size(); ++h) {
      double diff = 0.0;
      for (std::size_t p = 0; p < spec.ensemble_size; ++p) diff += fv[p][d + 1][h] - fv[p][0][h];
      curve.push_back(std::abs(diff / m));
    }
    modulus[d] = *std::max_element(curve.begin(), curve.end());
    at_end[d] = curve.back();
    r.series["difference_delta_" + fmt(deltas[d])] = std::move(curve);
    std::vector<double> per_path;
    for (std::size_t p = 0; p < spec.ensemble_size; ++p) per_path.push_back(fv[p][d + 1].back() - fv[p][0].back());
    add_stats(r, "f_difference_delta_" + fmt(deltas[d]), std::move(per_path));
  }
  bool monotone = true;
  for (std::size_t d = 1; d < deltas.size(); ++d) monotone = monotone && modulus[d] <= modulus[d - 1];
  r.metrics["delta_count"] = static_cast<double>(deltas.size());
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    const std::string s = std::to_string(d);
    r.metrics["delta_" + s] = deltas[d];
    r.metrics["modulus_" + s] = modulus[d];
    r.metrics["end_value_" + s] = at_end[d];
  }
  r.metrics["monotone"] = monotone ? 1.0 : 0.0;
  r.metrics["end_smallest_below_largest"] = at_end.back() < at_end.front() ? 1.0 : 0.0;
  std::vector<double> times;
  for (auto n : horizon) times.push_back(static_cast<double>(n) * c.dt);
  r.series["time"] = std::move(times);
  finish(r);
  return r;
}

ExperimentRecord exp_density_proxy(const ExperimentSpec& spec) {
  const SimConfig& c = spec.config;
  c.validate();
  const Wavevector kc = spec.param_wavevector("k_cont", {});
  const Wavevector ka = spec.param_wavevector("k_atom", {});
  if (kc.empty() || ka.empty()) throw PreconditionError("density_proxy needs k_cont and k_atom");
  if (!reachable_contains(c, kc)) throw PreconditionError("k_cont is not in the reachable set");
  if (reachable_contains(c, ka)) throw PreconditionError("k_atom is in the reachable set");
  if (!perp_contains(c, ka)) throw PreconditionError("k_atom is not in A-perp");
  if (c.noise.contains(ka)) throw PreconditionError("k_atom is forced");

  const SpectralField u0 = initial_of(c);
  const double rate = c.nu * static_cast<double>(norm2(ka));
  const double atom0 = std::hypot(u0.coeff(ka), u0.coeff(negate(ka)));
  double burn = std::max(default_burn_in(spec), 5.0 / rate);
  // long enough for the initial k_atom component to fall below 1e-7
  if (atom0 > 1e-7) burn = std::max(burn, std::log(atom0 / 1e-7) / rate);
  const std::size_t burn_steps = static_cast<std::size_t>(std::ceil(burn / c.dt - 1e-9));
  const auto samples = static_cast<std::size_t>(spec.param_int("samples_per_path", 50));
  const std::size_t spacing = steps_for(spec.param("spacing", 1.0), c.dt, "spacing");
  if (samples == 0 || spacing == 0) throw PreconditionError("density_proxy needs samples and a positive spacing");

  const Stepper stepper(c);
  std::vector<std::vector<double>> cont(spec.ensemble_size), atom(spec.ensemble_size);
  parallel_for(spec.ensemble_size, [&](std::size_t p) {
    const NoiseStream stream(c.seed, c.stream_id + p);
    run(stepper, u0, stream, burn_steps + samples * spacing, [&](std::size_t n, double t, const SpectralField& u) {
      if (n > burn_steps && (n - burn_steps) % spacing == 0) {
        check_state(u, t, c.blowup_threshold);
        cont[p].push_back(u.coeff(kc));
        atom[p].push_back(u.coeff(ka));
      }
      return true;
    });
  });
  std::vector<double> xc, xa;
  for (std::size_t p = 0; p < cont.size(); ++p) {
    xc.insert(xc.end(), cont[p].begin(), cont[p].end());
    xa.insert(xa.end(), atom[p].begin(), atom[p].end());
  }

  ExperimentRecord r = make_record(spec);
  double mean = 0.0;
  for (double v : xc) mean += v;
  mean /= static_cast<double>(xc.size());
  double var = 0.0;
  for (double v : xc) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(xc.size() - 1));
  double max_bin = 1.0;
  if (sd > 0.0) {
    const double width = sd / 10.0;
    const double lo = *std::min_element(xc.begin(), xc.end());
    std::map<long long, std::size_t> bins;
    for (double v : xc) ++bins[static_cast<long long>(std::floor((v - lo) / width))];
    std::size_t top = 0;
    for (const auto& [bin, count] : bins) top = std::max(top, count);
    max_bin = static_cast<double>(top) / static_cast<double>(xc.size());
  }
  std::size_t collapsed = 0;
  for (double v : xa) collapsed += std::abs(v) <= 1e-6 ? 1 : 0;
  r.metrics = {{"max_bin_fraction", max_bin},
               {"collapse_fraction", static_cast<double>(collapsed) / static_cast<double>(xa.size())},
               {"burn_in", burn},
               {"cont_std", sd},
               {"atom_max_abs", std::abs(*std::max_element(xa.begin(), xa.end(), [](double a, double b) {
                  return std::abs(a) < std::abs(b);
                }))},
               {"normality_p_value", jarque_bera_p_value(xc)},
               {"samples", static_cast<double>(xc.size())}};
  add_stats(r, Observable::mode(kc).name(), std::move(xc));
  add_stats(r, Observable::mode(ka).name(), std::move(xa));
  finish(r);
  return r;
}

ExperimentRecord exp_malliavin_spectrum(const ExperimentSpec& spec) {
  const SimConfig& c = spec.config;
  c.validate();
  const double alpha = spec.param("alpha", 0.5);
  const double n_low = spec.param("n_low", 2.0);
  const auto basis = modes_within(c.flux.dim(), spec.param("basis_radius", 4.0));
  const auto control_paths = static_cast<std::size_t>(std::max(1LL, spec.param_int("control_paths", 2)));

  SimConfig control = c;
  {
    std::vector<std::vector<ExactScalar>> zero(c.flux.dim(), std::vector<ExactScalar>{ExactScalar(0)});
    control.flux = FluxPoly(c.flux.dim(), zero);
  }
  const std::size_t m = spec.ensemble_size;
  std::vector<double> values(m + control_paths), lambda_min(m + control_paths), diag_min(m + control_paths);
  parallel_for(m + control_paths, [&](std::size_t job) {
    SimConfig cfg = job < m ? c : control;
    cfg.stream_id = c.stream_id + (job < m ? job : kSecondSet + job - m);
    const auto traj = simulate(cfg, {0, 8});
    const auto gram = malliavin_gram(traj, 0.0, cfg.t_end, basis);
    const CapMinimum cap = min_quadratic_on_cap(gram, alpha, n_low);
    values[job] = cap.value;
    lambda_min[job] = cap.lambda_min_full;
    diag_min[job] = gram.matrix.diagonal().minCoeff();
  });

  ExperimentRecord r = make_record(spec);
  const std::vector<double> holding(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m));
  const std::vector<double> ctrl(values.begin() + static_cast<std::ptrdiff_t>(m), values.end());
  const auto positive = std::count_if(holding.begin(), holding.end(), [](double v) { return v > 1e-8; });
  r.metrics = {{"holding_min", *std::min_element(holding.begin(), holding.end())},
               {"holding_max", *std::max_element(holding.begin(), holding.end())},
               {"holding_positive", static_cast<double>(positive)},
               {"paths", static_cast<double>(m)},
               {"control_max", *std::max_element(ctrl.begin(), ctrl.end())},
               {"control_min_diagonal",
                *std::min_element(diag_min.begin() + static_cast<std::ptrdiff_t>(m), diag_min.end())},
               {"basis_size", static_cast<double>(basis.size())}};
  add_stats(r, "cap_minimum", holding);
  r.series["control_cap_minimum"] = ctrl;
  r.series["lambda_min"] = lambda_min;
  finish(r);
  return r;
}

ExperimentRecord exp_residual_decay(const ExperimentSpec& spec) {
  const SimConfig& c = spec.config;
  c.validate();
  const std::vector<double> betas = spec.param_list("betas", {0.1, 0.01, 0.001});
  const bool relative = spec.param_int("beta_relative", 1) != 0;
  const int windows = static_cast<int>(spec.param_int("windows", 6));
  const double length = spec.param("window_length", 1.0);
  const double beta_inf = spec.param("beta_infinity", 1e12);
  if (betas.empty()) throw PreconditionError("residual_decay needs at least one beta");
  const SpectralField xi = unit_mode(c, spec.param_wavevector("xi", first_axis(spec)));

  std::vector<ResidualRun> runs(betas.size() + 1);
  parallel_for(runs.size(), [&](std::size_t i) {
    const double beta = i < betas.size() ? betas[i] : beta_inf;
    runs[i] = control_residual_run(c, xi, windows, {beta, relative, length});
  });

  ExperimentRecord r = make_record(spec);
  r.metrics["beta_count"] = static_cast<double>(betas.size());
  for (std::size_t i = 0; i < betas.size(); ++i) {
    std::vector<double> n, logs, norms;
    double cross = 0.0;
    for (const auto& w : runs[i].windows) {
      norms.push_back(w.rho_norm);
      cross = std::max(cross, w.cross_check_error);
      if (w.n >= 1) {
        n.push_back(w.n);
        logs.push_back(std::log(std::max(w.rho_norm, std::numeric_limits<double>::min())));
      }
    }
    const LinearFit fit = linear_fit(n, logs);
    const std::string s = std::to_string(i);
    r.metrics["beta_" + s] = runs[i].beta;
    r.metrics["slope_" + s] = fit.slope;
    r.metrics["r2_" + s] = fit.r2;
    r.metrics["cross_check_" + s] = cross;
    r.series["rho_norm_beta_" + s] = std::move(norms);
  }
  double gap = 0.0;
  std::vector<double> plain;
  for (const auto& w : runs.back().windows) {
    gap = std::max(gap, std::abs(w.rho_norm - w.uncontrolled_norm) / std::max(w.uncontrolled_norm, 1e-300));
    plain.push_back(w.uncontrolled_norm);
  }
  r.metrics["beta_inf_gap"] = gap;
  r.metrics["beta_inf"] = runs.back().beta;
  r.series["uncontrolled_norm"] = std::move(plain);
  finish(r);
  return r;
}

}  // namespace svscl
