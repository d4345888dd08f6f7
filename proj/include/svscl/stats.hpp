#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace svscl {

struct BatchMeans {
  double mean = 0.0;
  double variance = 0.0;    // sample variance of the series
  double std_error = 0.0;   // of the mean, from batch means
  double ci_low = 0.0;      // 95% Student-t interval
  double ci_high = 0.0;
  std::size_t samples = 0;
  std::size_t batches = 0;
};

inline constexpr std::size_t kMinBatches = 20;

/// Batch-means summary of a (possibly correlated) series split into
/// consecutive batches; throws PreconditionError below `batches` samples.
BatchMeans batch_means(std::span<const double> series, std::size_t batches = kMinBatches,
                       double confidence = 0.95);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

using Sample = std::vector<double>;

/// Energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| (V-statistic form).
double energy_distance(const std::vector<Sample>& x, const std::vector<Sample>& y);

struct PermutationTest {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t permutations = 0;
};
PermutationTest energy_permutation_test(const std::vector<Sample>& x, const std::vector<Sample>& y,
                                        std::size_t permutations, std::uint64_t seed);

/// Exact binomial interval for successes/n.
std::pair<double, double> clopper_pearson(std::size_t successes, std::size_t n, double confidence = 0.95);

/// Jarque-Bera moment test of normality; returns the asymptotic p-value.
double jarque_bera_p_value(std::span<const double> samples);

/// Sample covariance of paired series.
double covariance(std::span<const double> a, std::span<const double> b);

}  // namespace svscl
