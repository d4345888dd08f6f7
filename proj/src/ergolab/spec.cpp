#include "svscl/ergolab.hpp"

#include "svscl/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace svscl {

std::string to_string(ExperimentVerdict v) {
  switch (v) {
    case ExperimentVerdict::Pass:
      return "PASS";
    case ExperimentVerdict::Fail:
      return "FAIL";
    case ExperimentVerdict::ReportOnly:
      return "REPORT-ONLY";
  }
  return "?";
}

std::string Observable::name() const {
  switch (kind) {
    case Kind::Mode: {
      std::string s = "mode(";
      for (std::size_t i = 0; i < k.size(); ++i) s += (i ? "," : "") + std::to_string(k[i]);
      return s + ")";
    }
    case Kind::Sobolev: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "sobolev(%g)", order);
      return buf;
    }
    case Kind::L2:
      return "l2";
  }
  return "?";
}

double Observable::evaluate(const SpectralField& u) const {
  switch (kind) {
    case Kind::Mode:
      return u.coeff(k);
    case Kind::Sobolev:
      return sobolev_norm(u, order);
    case Kind::L2:
      return l2_norm(u);
  }
  return 0.0;
}

namespace {

double parse_double(const std::string& key, std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw PreconditionError("parameter '" + key + "': not a number: " + std::string(s));
  }
  return v;
}

std::vector<std::string_view> split_list(std::string_view s) {
  while (!s.empty() && (s.front() == '(' || s.front() == '[' || s.front() == ' ')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ')' || s.back() == ']' || s.back() == ' ')) s.remove_suffix(1);
  std::vector<std::string_view> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

double ExperimentSpec::param(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : parse_double(key, it->second);
}

long long ExperimentSpec::param_int(const std::string& key, long long fallback) const {
  const double v = param(key, static_cast<double>(fallback));
  if (v != std::floor(v)) throw PreconditionError("parameter '" + key + "' must be an integer");
  return static_cast<long long>(v);
}

Wavevector ExperimentSpec::param_wavevector(const std::string& key, const Wavevector& fallback) const {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  Wavevector k;
  for (auto part : split_list(it->second)) {
    const double v = parse_double(key, part);
    if (v != std::floor(v)) throw PreconditionError("parameter '" + key + "' must be an integer vector");
    k.push_back(static_cast<int>(v));
  }
  if (static_cast<int>(k.size()) != config.flux.dim()) {
    throw PreconditionError("parameter '" + key + "' has the wrong dimension");
  }
  return k;
}

std::vector<double> ExperimentSpec::param_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  std::vector<double> out;
  for (auto part : split_list(it->second)) out.push_back(parse_double(key, part));
  return out;
}

void ExperimentSpec::validate() const {
  if (!is_experiment(name)) throw PreconditionError("unknown experiment: " + name);
  if (ensemble_size == 0) throw PreconditionError("ensemble_size must be >= 1");
  if (burn_in < 0.0) throw PreconditionError("burn_in must be >= 0");
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "energy_identity", "l1_contraction", "perp_decay",         "ou_law",          "uniqueness_probe",
      "irreducibility",  "eproperty",      "density_proxy",      "malliavin_spectrum", "residual_decay"};
  return names;
}

bool is_experiment(const std::string& name) {
  const auto& n = experiment_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

namespace {

FluxPoly burgers() { return FluxPoly{1, {{ExactScalar(0), ExactScalar(0), ExactScalar(Rational(1) / 2)}}}; }

FluxPoly diagonal_square() {
  return FluxPoly{2, {{ExactScalar(0), ExactScalar(0), ExactScalar(1)}, {ExactScalar(0), ExactScalar(0), ExactScalar(1)}}};
}

NoiseSet noise_1d(std::initializer_list<int> positive, double amplitude) {
  std::vector<Wavevector> ks;
  for (int k : positive) {
    ks.push_back({k});
    ks.push_back({-k});
  }
  std::sort(ks.begin(), ks.end());
  return NoiseSet{1, ks, std::vector<double>(ks.size(), amplitude)};
}

SpectralField sine(int cutoff, double scale = 1.0) {
  // sin x = basis_norm(1) * e_1 / ||e_1||
  return SpectralField::single_mode(1, cutoff, {1}, scale * basis_norm(1));
}

}  // namespace

ExperimentSpec default_spec(const std::string& name) {
  ExperimentSpec s;
  s.name = name;
  SimConfig& c = s.config;
  if (name == "energy_identity") {
    c.flux = burgers();
    c.nu = 0.1;
    c.cutoff = 64;
    c.dt = 1e-3;
    c.t_end = 2.0;
    c.initial = sine(64);
  } else if (name == "l1_contraction") {
    c.flux = burgers();
    c.nu = 0.1;
    c.noise = noise_1d({1, 2}, 0.5);
    c.cutoff = 32;
    c.dt = 1e-3;
    c.t_end = 5.0;
    c.seed = 20240611;
    s.ensemble_size = 100;
    s.params = {{"init_radius", "4"}, {"init_amplitude", "1"}, {"monitor_every", "10"}};
  } else if (name == "perp_decay") {
    c.flux = diagonal_square();
    c.nu = 0.1;
    c.noise = axis_pattern_noise(2, 1.0);
    c.cutoff = 4;
    c.dt = 5e-3;
    c.t_end = 10.0;
    c.seed = 7;
    s.params = {{"k_star", "1,-1"}, {"sample_every", "20"}};
  } else if (name == "ou_law") {
    c.flux = FluxPoly{1, {{ExactScalar(0), ExactScalar(1)}}};
    c.nu = 0.2;
    c.noise = noise_1d({1}, 0.5);
    c.cutoff = 1;
    c.dt = 5e-3;
    c.seed = 31337;
    s.ensemble_size = 200;
    s.params = {{"k", "1"}, {"samples_per_path", "150"}, {"spacing", "5"}};
  } else if (name == "uniqueness_probe") {
    c.flux = diagonal_square();
    c.nu = 0.5;
    c.noise = axis_pattern_noise(2, 1.0);
    c.cutoff = 4;
    c.dt = 1e-2;
    c.t_end = 200.0;
    c.seed = 4242;
    s.ensemble_size = 100;
    s.initial_b = SpectralField(2, 4);
    s.initial_b.set({1, 0}, 2.0);
    s.initial_b.set({0, -2}, -1.5);
    s.initial_b.set({1, -1}, 1.0);
    s.params = {{"observable_radius", "2"}, {"permutations", "500"}, {"snapshots", "10"}};
  } else if (name == "irreducibility") {
    c.flux = burgers();
    c.nu = 0.5;
    c.noise = noise_1d({1, 2}, 0.1);
    c.cutoff = 32;
    c.dt = 1e-3;
    c.t_end = 10.0;
    c.seed = 99;
    c.initial = SpectralField::single_mode(1, 32, {1}, 1.0);
    s.ensemble_size = 200;
    s.params = {{"gamma", "0.5"}, {"initial_norm", "10"}};
  } else if (name == "eproperty") {
    c.flux = burgers();
    c.nu = 0.1;
    c.noise = noise_1d({1, 2}, 0.5);
    c.cutoff = 16;
    c.dt = 2e-3;
    c.t_end = 50.0;
    c.seed = 1234;
    c.initial = sine(16);
    s.ensemble_size = 64;
    s.params = {{"deltas", "0.1,0.05,0.025"}, {"xi", "1"}, {"f_mode", "1"}, {"horizon_every", "5"}};
  } else if (name == "density_proxy") {
    c.flux = diagonal_square();
    c.nu = 0.1;
    c.noise = axis_pattern_noise(2, 0.3);
    c.cutoff = 4;
    c.dt = 5e-3;
    c.seed = 555;
    c.initial = SpectralField::single_mode(2, 4, {1, -1}, 1.0);
    s.ensemble_size = 20;
    s.params = {{"k_cont", "1,0"}, {"k_atom", "1,-1"}, {"samples_per_path", "50"}, {"spacing", "1"}};
  } else if (name == "malliavin_spectrum") {
    c.flux = burgers();
    c.nu = 0.1;
    c.noise = noise_1d({1}, 1.0);
    c.cutoff = 16;
    c.dt = 1e-3;
    c.t_end = 1.0;
    c.seed = 2718;
    c.initial = sine(16);
    s.ensemble_size = 20;
    s.params = {{"alpha", "0.5"}, {"n_low", "2"}, {"basis_radius", "4"}, {"control_paths", "2"}};
  } else if (name == "residual_decay") {
    c.flux = burgers();
    c.nu = 0.1;
    c.noise = noise_1d({1, 2}, 1.0);
    c.cutoff = 16;
    c.dt = 1e-3;
    c.seed = 8080;
    c.initial = sine(16);
    s.params = {{"betas", "0.1,0.01,0.001"},
                {"beta_relative", "1"},
                {"windows", "6"},
                {"window_length", "1"},
                {"xi", "1"},
                {"beta_infinity", "1e12"}};
  } else {
    throw PreconditionError("unknown experiment: " + name);
  }
  return s;
}

namespace {

double need(const std::map<std::string, double>& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw PreconditionError("verdict input missing: " + key);
  return it->second;
}

ExperimentVerdict pass_if(bool ok) { return ok ? ExperimentVerdict::Pass : ExperimentVerdict::Fail; }

bool within(double est, double ref, double scale, double se) {
  return std::abs(est - ref) <= std::max(0.05 * scale, 3.0 * se);
}

}  // namespace

ExperimentVerdict decide(const std::string& name, const std::map<std::string, double>& m) {
  if (name == "energy_identity") return pass_if(need(m, "max_defect") <= 10.0 * need(m, "dt"));
  if (name == "l1_contraction") return pass_if(need(m, "violations") == 0.0);
  if (name == "perp_decay") {
    return pass_if(need(m, "precondition_ok") == 1.0 && need(m, "rate_rel_error") <= 0.01 && need(m, "r2") > 0.999);
  }
  if (name == "ou_law") {
    const double s11 = need(m, "ref_11"), s22 = need(m, "ref_22");
    const double off_scale = std::sqrt(std::max(s11 * s22, 0.0));
    return pass_if(within(need(m, "est_11"), s11, std::abs(s11), need(m, "se_11")) &&
                   within(need(m, "est_12"), need(m, "ref_12"), off_scale, need(m, "se_12")) &&
                   within(need(m, "est_22"), s22, std::abs(s22), need(m, "se_22")));
  }
  if (name == "uniqueness_probe" || name == "eproperty") return ExperimentVerdict::ReportOnly;
  if (name == "irreducibility") return pass_if(need(m, "paths") >= 200.0 && need(m, "cp_low") > 0.0);
  if (name == "density_proxy") {
    return pass_if(need(m, "max_bin_fraction") <= 0.5 && need(m, "collapse_fraction") >= 0.99);
  }
  if (name == "malliavin_spectrum") {
    return pass_if(need(m, "holding_min") > 1e-8 && need(m, "control_max") <= 1e-12);
  }
  if (name == "residual_decay") {
    const auto n = static_cast<int>(need(m, "beta_count"));
    bool any = false;
    for (int i = 0; i < n; ++i) {
      const std::string s = std::to_string(i);
      if (need(m, "slope_" + s) < 0.0 && need(m, "r2_" + s) > 0.9) any = true;
    }
    return pass_if(any && need(m, "beta_inf_gap") <= 1e-8);
  }
  throw PreconditionError("unknown experiment: " + name);
}

std::string verdict_rule(const std::string& name) {
  if (name == "energy_identity") return "max_defect <= 10*dt";
  if (name == "l1_contraction") return "violations == 0 (D(t2) <= D(t1)(1+1e-6)+1e-8)";
  if (name == "perp_decay") return "precondition_ok && rate_rel_error <= 0.01 && r2 > 0.999";
  if (name == "ou_law") return "each covariance entry within max(5% of scale, 3 se)";
  if (name == "uniqueness_probe" || name == "eproperty") return "report only";
  if (name == "irreducibility") return "paths >= 200 && cp_low > 0";
  if (name == "density_proxy") return "max_bin_fraction <= 0.5 && collapse_fraction >= 0.99";
  if (name == "malliavin_spectrum") return "holding_min > 1e-8 && control_max <= 1e-12";
  if (name == "residual_decay") return "some beta: slope < 0 && r2 > 0.9; beta_inf_gap <= 1e-8";
  throw PreconditionError("unknown experiment: " + name);
}

ExperimentRecord run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const std::string& n = spec.name;
  if (n == "energy_identity") return exp_energy_identity(spec);
  if (n == "l1_contraction") return exp_l1_contraction(spec);
  if (n == "perp_decay") return exp_perp_decay(spec);
  if (n == "ou_law") return exp_ou_law(spec);
  if (n == "uniqueness_probe") return exp_uniqueness_probe(spec);
  if (n == "irreducibility") return exp_irreducibility(spec);
  if (n == "eproperty") return exp_eproperty(spec);
  if (n == "density_proxy") return exp_density_proxy(spec);
  if (n == "malliavin_spectrum") return exp_malliavin_spectrum(spec);
  return exp_residual_decay(spec);
}

}  // namespace svscl
