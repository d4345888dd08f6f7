#pragma once

#include "svscl/dynamics.hpp"
#include "svscl/stats.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace svscl {

enum class ExperimentVerdict { Pass, Fail, ReportOnly };
std::string to_string(ExperimentVerdict v);

/// A scalar functional of the state.
struct Observable {
  enum class Kind { Mode, Sobolev, L2 };
  Kind kind = Kind::Mode;
  Wavevector k;        // Mode
  double order = 0.0;  // Sobolev

  static Observable mode(const Wavevector& k) { return {Kind::Mode, k, 0.0}; }
  static Observable sobolev(double order) { return {Kind::Sobolev, {}, order}; }
  static Observable l2() { return {Kind::L2, {}, 0.0}; }

  std::string name() const;
  double evaluate(const SpectralField& u) const;
  friend bool operator==(const Observable&, const Observable&) = default;
};

struct ExperimentSpec {
  std::string name;
  SimConfig config;
  /// Experiment-specific parameters; see default_spec for the keys each uses.
  std::map<std::string, std::string> params;
  std::size_t ensemble_size = 1;
  double burn_in = 0.0;  // 0: experiment default
  std::vector<Observable> observables;
  /// Second initial field for paired experiments.
  SpectralField initial_b;

  double param(const std::string& key, double fallback) const;
  long long param_int(const std::string& key, long long fallback) const;
  Wavevector param_wavevector(const std::string& key, const Wavevector& fallback) const;
  std::vector<double> param_list(const std::string& key, const std::vector<double>& fallback) const;
  /// Throws PreconditionError on an unknown name or ensemble_size == 0.
  void validate() const;
};

struct ObservableStats {
  std::string name;
  BatchMeans summary;
};

struct ExperimentRecord {
  std::string name;
  std::map<std::string, std::string> params;
  std::size_t ensemble_size = 0;
  std::uint64_t seed = 0;
  std::vector<ObservableStats> statistics;
  /// Every quantity the verdict rule reads.
  std::map<std::string, double> metrics;
  ExperimentVerdict verdict = ExperimentVerdict::ReportOnly;
  std::string rule;
  std::string diagnostic;
  /// Raw series for optional export, keyed by observable name.
  std::map<std::string, std::vector<double>> series;
  std::string raw_series_ref;
};

/// Registered experiment names.
const std::vector<std::string>& experiment_names();
bool is_experiment(const std::string& name);

/// Default configuration of each registered experiment.
ExperimentSpec default_spec(const std::string& name);

/// Verdict rule of an experiment as a pure function of its metrics.
ExperimentVerdict decide(const std::string& name, const std::map<std::string, double>& metrics);
std::string verdict_rule(const std::string& name);

ExperimentRecord exp_energy_identity(const ExperimentSpec& spec);
ExperimentRecord exp_l1_contraction(const ExperimentSpec& spec);
ExperimentRecord exp_perp_decay(const ExperimentSpec& spec);
ExperimentRecord exp_ou_law(const ExperimentSpec& spec);
ExperimentRecord exp_uniqueness_probe(const ExperimentSpec& spec);
ExperimentRecord exp_irreducibility(const ExperimentSpec& spec);
ExperimentRecord exp_eproperty(const ExperimentSpec& spec);
ExperimentRecord exp_density_proxy(const ExperimentSpec& spec);
ExperimentRecord exp_malliavin_spectrum(const ExperimentSpec& spec);
ExperimentRecord exp_residual_decay(const ExperimentSpec& spec);

/// Dispatches on spec.name.
ExperimentRecord run_experiment(const ExperimentSpec& spec);

/// Stationary covariance S of dx = B x dt + diag(q) dW, i.e. B S + S B^T + diag(q^2) = 0.
std::array<double, 3> lyapunov_2x2(const std::array<double, 4>& drift, double q1, double q2);

/// Random smooth field with N(0, (amplitude/|k|)^2) coordinates on |k| <= radius.
SpectralField random_field(int dim, int cutoff, double radius, double amplitude, const NoiseStream& stream,
                           std::uint64_t step);

}  // namespace svscl
