#include "svscl/cli.hpp"

#include "svscl/error.hpp"
#include "svscl/malliavin.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace svscl {

namespace {

using json = nlohmann::ordered_json;

json to_json(const Wavevector& k) { return json(k); }

json to_json(const WavevectorSet& s) {
  json a = json::array();
  for (const auto& k : s) a.push_back(k);
  return a;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_k(const Wavevector& k) {
  std::string s = "(";
  for (std::size_t i = 0; i < k.size(); ++i) s += (i ? "," : "") + std::to_string(k[i]);
  return s + ")";
}

std::string hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Field snapshot with 17 significant digits, written by hand so the digit
/// count does not depend on the JSON library's shortest-representation output.
std::string snapshot_record(const SpectralField& u, std::size_t step, double time) {
  std::string s = "{\"type\":\"snapshot\",\"step\":" + std::to_string(step) + ",\"time\":" + fmt17(time) +
                  ",\"dim\":" + std::to_string(u.dim()) + ",\"cutoff\":" + std::to_string(u.cutoff()) + ",\"coeffs\":[";
  bool first = true;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] == 0.0) continue;
    const auto& k = u.layout().wavevector(i);
    s += first ? "[[" : ",[[";
    first = false;
    for (std::size_t j = 0; j < k.size(); ++j) s += (j ? "," : "") + std::to_string(k[j]);
    s += "]," + fmt17(u[i]) + "]";
  }
  return s + "]}";
}

json condition_record(const ConditionReport& r) {
  json j = {{"type", "condition"},
            {"verdict", to_string(r.verdict)},
            {"explored_radius", r.explored_radius},
            {"margin", r.margin},
            {"certificate", to_string(r.certificate)},
            {"z_infty_in_ball", to_json(r.z_infty_in_ball)},
            {"a_perp_kernel_basis", r.a_perp_kernel_basis},
            {"saturated", r.saturated},
            {"pattern_lemma", r.pattern_lemma},
            {"degree", r.degree}};
  j["witness"] = r.witness ? to_json(*r.witness) : json(nullptr);
  return j;
}

json experiment_record(const ExperimentRecord& r) {
  json stats = json::array();
  for (const auto& s : r.statistics) {
    stats.push_back({{"name", s.name},
                     {"mean", s.summary.mean},
                     {"variance", s.summary.variance},
                     {"std_error", s.summary.std_error},
                     {"ci_low", s.summary.ci_low},
                     {"ci_high", s.summary.ci_high},
                     {"samples", s.summary.samples},
                     {"batches", s.summary.batches}});
  }
  return {{"type", "experiment"},     {"name", r.name},         {"params", r.params},
          {"ensemble_size", r.ensemble_size}, {"seed", r.seed}, {"statistics", stats},
          {"metrics", r.metrics},     {"verdict", to_string(r.verdict)}, {"rule", r.rule},
          {"diagnostic", r.diagnostic}, {"raw_series_ref", r.raw_series_ref}};
}

int exit_code(ExperimentVerdict v) { return v == ExperimentVerdict::Fail ? 1 : 0; }

struct Context {
  RunConfig config;
  bool have_config = false;
  bool config_sets_sim = false;  // any of [flux], [noise], [sim], [initial] present
  std::string out_path;
  std::ostream* human = nullptr;
  std::ostream* records = nullptr;
  std::unique_ptr<std::ofstream> file;
};

void emit(Context& ctx, const json& j) { *ctx.records << j.dump() << "\n"; }

int cmd_check(Context& ctx) {
  const RunConfig& c = ctx.config;
  const ConditionReport rep = check_condition(c.sim.flux, c.sim.noise, c.radius, c.lattice_margin());
  emit(ctx, condition_record(rep));
  const NondegeneracyReport nd = check_algebraic_nondegeneracy(c.sim.flux, c.sim.noise);
  emit(ctx, {{"type", "nondegeneracy"}, {"algebraic", nd.algebraic}, {"real_kernel_trivial", nd.real_kernel_trivial}});
  std::ostream& h = *ctx.human;
  h << "verdict: " << to_string(rep.verdict);
  if (rep.witness) h << " witness " << fmt_k(*rep.witness) << " (" << to_string(rep.certificate) << ")";
  h << "\nalgebraic non-degeneracy: " << (nd.algebraic ? "true" : "false") << "\n";
  if (rep.verdict == Verdict::HoldsExact || rep.verdict == Verdict::HoldsUpToRadius) return 0;
  if (rep.degree == 1 && rep.verdict == Verdict::Violated) {
    h << "condition fails but degree-1 fast path applies\n";
    return 0;
  }
  return 1;
}

int cmd_simulate(Context& ctx) {
  const RunConfig& c = ctx.config;
  const std::size_t steps = c.sim.steps();
  const std::size_t every = c.snapshot_every ? c.snapshot_every : std::max<std::size_t>(1, steps / 100);
  emit(ctx, {{"type", "header"},
             {"config_hash", hex(config_hash(c))},
             {"seed", c.sim.seed},
             {"stream_id", c.sim.stream_id},
             {"dt", c.sim.dt},
             {"scheme", to_string(c.sim.scheme)},
             {"steps", steps},
             {"snapshot_every", every}});
  SpectralField last;
  run(c.sim, [&](std::size_t n, double t, const SpectralField& u) {
    if (n % every == 0 || n == steps) *ctx.records << snapshot_record(u, n, t) << "\n";
    if (n == steps) last = u;
    return true;
  });
  const double order = state_sobolev_index(c.sim.flux.dim());
  emit(ctx, {{"type", "summary"},
             {"steps", steps},
             {"t_end", c.sim.t_end},
             {"l2_norm", l2_norm(last)},
             {"sobolev_norm", sobolev_norm(last, order)}});
  *ctx.human << "simulated " << steps << " steps, final ||u|| = " << l2_norm(last) << "\n";
  return 0;
}

int cmd_tangent(Context& ctx) {
  const RunConfig& c = ctx.config;
  const int dim = c.sim.flux.dim();
  const Wavevector xk = c.tangent_xi.empty() ? axis_vector(dim, 0) : c.tangent_xi;
  SpectralField xi(dim, c.sim.cutoff);
  if (!xi.layout().find(xk)) throw PreconditionError("tangent xi outside the cutoff");
  xi.set(xk, 1.0);
  const auto traj = simulate(c.sim, {0, 8});
  const SpectralField j = tangent_solve(traj, xi, 0.0, c.sim.t_end);
  const SpectralField& base = traj.states.back();
  const SpectralField u0 = traj.states.front();
  const double jn = std::max(l2_norm(j), 1e-300);

  std::vector<double> errors;
  for (double eps : c.tangent_epsilons) {
    SimConfig p = c.sim;
    p.initial = u0 + eps * xi;
    SpectralField end;
    run(p, [&](std::size_t n, double, const SpectralField& u) {
      if (n == p.steps()) end = u;
      return true;
    });
    const double err = l2_norm((1.0 / eps) * (end - base) - j) / jn;
    errors.push_back(err);
    emit(ctx, {{"type", "tangent_fd"}, {"epsilon", eps}, {"relative_error", err}});
  }
  // first order: each tenfold smaller epsilon shrinks the error at least 5x,
  // unless the error is already at round-off level
  bool first_order = true;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const double ratio = c.tangent_epsilons[i - 1] / c.tangent_epsilons[i];
    if (errors[i] > 1e-8 && errors[i - 1] / errors[i] < 0.5 * ratio) first_order = false;
  }
  SpectralField phi(dim, c.sim.cutoff);
  phi.set(xk, 1.0);
  const SpectralField k = adjoint_solve(traj, phi, c.sim.t_end, 0.0);
  const double lhs = dot(k, xi), rhs = dot(phi, j);
  const double duality = std::abs(lhs - rhs) / std::max({std::abs(rhs), l2_norm(phi) * jn * 1e-12, 1e-300});
  const bool ok = first_order && duality <= 1e-8;
  emit(ctx, {{"type", "tangent_summary"},
             {"first_order", first_order},
             {"duality_relative_error", duality},
             {"verdict", ok ? "PASS" : "FAIL"}});
  *ctx.human << "tangent: " << (ok ? "PASS" : "FAIL") << " (duality error " << duality << ")\n";
  return ok ? 0 : 1;
}

int cmd_malliavin(Context& ctx) {
  const RunConfig& c = ctx.config;
  const auto traj = simulate(c.sim, {0, 8});
  const auto basis = modes_within(c.sim.flux.dim(), c.gram_basis_radius);
  const std::size_t last = traj.size() - 1;
  const auto windows = static_cast<std::size_t>(c.gram_windows);
  if (windows > last) throw PreconditionError("more Gram windows than steps");
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t a = last * w / windows, b = last * (w + 1) / windows;
    const MalliavinGram g = malliavin_gram_steps(traj, a, b, basis);
    json rows = json::array();
    for (Eigen::Index i = 0; i < g.matrix.rows(); ++i) {
      for (Eigen::Index jj = 0; jj < g.matrix.cols(); ++jj) rows.push_back(g.matrix(i, jj));
    }
    const Eigen::VectorXd ev = g.eigenvalues();
    emit(ctx, {{"type", "gram"},
               {"window", {g.s, g.t}},
               {"basis", g.basis},
               {"matrix", rows},
               {"eigenvalues", std::vector<double>(ev.data(), ev.data() + ev.size())},
               {"quad_nodes", g.quad_nodes},
               {"trajectory_hash", hex(g.trajectory_hash)}});
    *ctx.human << "gram window [" << g.s << ", " << g.t << "]: lambda_min = " << ev(0) << "\n";
  }
  return 0;
}

void write_series(const RunConfig& c, ExperimentRecord& r) {
  if (c.series_dir.empty()) return;
  std::filesystem::create_directories(c.series_dir);
  for (const auto& [name, values] : r.series) {
    std::string file = r.name + "_" + name + ".csv";
    for (auto& ch : file) {
      if (ch == '(' || ch == ')' || ch == ',' || ch == ':' || ch == ' ') ch = '_';
    }
    std::ofstream o(std::filesystem::path(c.series_dir) / file);
    if (!o) throw Error("cannot write series file in " + c.series_dir);
    o << "index,value\n";
    for (std::size_t i = 0; i < values.size(); ++i) o << i << "," << fmt17(values[i]) << "\n";
  }
  r.raw_series_ref = c.series_dir;
}

int cmd_experiment(Context& ctx, std::string name) {
  if (name.empty()) name = ctx.config.experiment;
  if (name.empty()) throw PreconditionError("experiment name missing");
  if (!is_experiment(name)) throw PreconditionError("unknown experiment: " + name);
  ExperimentSpec spec = experiment_spec(ctx.config, name, ctx.config_sets_sim);
  ExperimentRecord r = run_experiment(spec);
  write_series(ctx.config, r);
  emit(ctx, experiment_record(r));
  *ctx.human << "experiment " << name << ": " << to_string(r.verdict);
  if (!r.diagnostic.empty()) *ctx.human << " (" << r.diagnostic << ")";
  *ctx.human << "\n";
  return exit_code(r.verdict);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_path, std::ostream& out) {
  if (inputs.empty()) throw PreconditionError("report needs at least one NDJSON file");
  std::ostringstream csv;
  csv << "source,type,name,verdict,key,value\n";
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(path + ":" + std::to_string(line_no) + ": invalid JSON");
      }
      const std::string type = j.value("type", "");
      if (type == "experiment") {
        const std::string name = j.value("name", ""), verdict = j.value("verdict", "");
        for (const auto& [k, v] : j["metrics"].items()) {
          csv << csv_field(path) << ",experiment," << name << "," << verdict << "," << csv_field(k) << ","
              << fmt17(v.get<double>()) << "\n";
        }
      } else if (type == "condition") {
        csv << csv_field(path) << ",condition,," << j.value("verdict", "") << ",explored_radius,"
            << j.value("explored_radius", 0) << "\n";
      } else if (type == "summary") {
        csv << csv_field(path) << ",summary,,,l2_norm," << fmt17(j.value("l2_norm", 0.0)) << "\n";
      }
    }
  }
  if (out_path.empty()) {
    out << csv.str();
  } else {
    std::ofstream o(out_path);
    if (!o) throw Error("cannot write " + out_path);
    o << csv.str();
  }
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic scalar conservation laws on the torus: lattice checks, simulation, experiments"};
  app.name("svscl");
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_path;
  std::uint64_t seed = 0;
  int radius = 0, margin = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the RNG seed");
  app.add_option("--config", config_path, "Configuration file");
  app.add_option("--out", out_path, "Output file (NDJSON records, CSV for report)");
  auto* radius_opt = app.add_option("--radius", radius, "Lattice radius");
  auto* margin_opt = app.add_option("--margin", margin, "Lattice margin");

  app.add_subcommand("check", "Decide the bracket condition for the configured flux and noise");
  app.add_subcommand("simulate", "Write a trajectory as NDJSON snapshots");
  app.add_subcommand("tangent", "Finite-difference and duality validation of the tangent flow");
  app.add_subcommand("malliavin", "Write Malliavin Gram records");
  std::string experiment_name;
  auto* exp = app.add_subcommand("experiment", "Run a registered experiment");
  exp->add_option("name", experiment_name, "Experiment name");
  std::vector<std::string> report_inputs;
  auto* rep = app.add_subcommand("report", "Aggregate NDJSON records into a CSV summary");
  rep->add_option("inputs", report_inputs, "NDJSON files");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    for (std::size_t i = 0; i < args.size(); ++i) {
      const std::string& a = args[i];
      if (!a.empty() && a[0] == '-') {
        if (a.find('=') == std::string::npos && a != "-h" && a != "--help") ++i;  // option value
        continue;
      }
      if (!app.get_subcommand_no_throw(a)) what = "unknown subcommand '" + a + "'";
      break;
    }
    err << "error: " << what << "\n" << app.help();
    return 2;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    if (sub == "report") return cmd_report(report_inputs, out_path, out);

    Context ctx;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error("cannot read " + config_path);
      std::stringstream buf;
      buf << in.rdbuf();
      const std::string text = buf.str();
      ctx.config = parse_config(text);
      ctx.have_config = true;
      std::istringstream lines(text);
      for (std::string line; std::getline(lines, line);) {
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos || line[b] != '[') continue;
        const auto e = line.find(']', b);
        const std::string sec = line.substr(b + 1, e == std::string::npos ? std::string::npos : e - b - 1);
        if (sec == "flux" || sec == "noise" || sec == "sim" || sec == "initial") ctx.config_sets_sim = true;
      }
    } else if (sub != "experiment") {
      throw PreconditionError(sub + " needs --config");
    }
    if (seed_opt->count()) ctx.config.sim.seed = seed;
    if (radius_opt->count()) ctx.config.radius = radius;
    if (margin_opt->count()) ctx.config.margin = margin;
    if (ctx.config.radius < 1 || (ctx.config.margin && *ctx.config.margin < 0)) {
      throw PreconditionError("invalid radius or margin");
    }
    ctx.out_path = out_path.empty() ? ctx.config.output_path : out_path;
    if (ctx.out_path.empty()) {
      ctx.records = &out;
      ctx.human = &err;
    } else {
      ctx.file = std::make_unique<std::ofstream>(ctx.out_path, std::ios::app);
      if (!*ctx.file) throw Error("cannot write " + ctx.out_path);
      ctx.records = ctx.file.get();
      ctx.human = &out;
    }
    if (sub == "check") return cmd_check(ctx);
    if (sub == "simulate") return cmd_simulate(ctx);
    if (sub == "tangent") return cmd_tangent(ctx);
    if (sub == "malliavin") return cmd_malliavin(ctx);
    if (seed_opt->count() && !ctx.config_sets_sim) {
      // seed override on top of the registered simulation settings
      const std::string name = experiment_name.empty() ? ctx.config.experiment : experiment_name;
      if (is_experiment(name)) {
        const ExperimentSpec s = default_spec(name);
        ctx.config.sim = s.config;
        ctx.config.sim.seed = seed;
        ctx.config_sets_sim = true;
        if (ctx.config.initial_b.size() == 0) ctx.config.initial_b = s.initial_b;
      }
    }
    return cmd_experiment(ctx, experiment_name);
  } catch (const Blowup& e) {
    err << "error: " << e.what() << " (t=" << e.time() << ", norm=" << e.norm() << ")\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace svscl
