#include "svscl/stats.hpp"

#include "svscl/error.hpp"
#include "svscl/rng.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace svscl {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

BatchMeans batch_means(std::span<const double> series, std::size_t batches, double confidence) {
  if (batches < 2 || series.size() < batches) {
    throw PreconditionError("batch means needs at least " + std::to_string(batches) + " samples");
  }
  BatchMeans out;
  out.samples = series.size();
  out.batches = batches;
  out.mean = mean_of(series);
  double ss = 0.0;
  for (double v : series) ss += (v - out.mean) * (v - out.mean);
  out.variance = ss / static_cast<double>(series.size() - 1);

  // Batches of equal size; the remainder is dropped from the front so the
  // most recent samples are always used.
  const std::size_t size = series.size() / batches;
  const std::size_t skip = series.size() - size * batches;
  std::vector<double> bm(batches);
  for (std::size_t b = 0; b < batches; ++b) bm[b] = mean_of(series.subspan(skip + b * size, size));
  const double grand = mean_of(bm);
  double bss = 0.0;
  for (double v : bm) bss += (v - grand) * (v - grand);
  const double var_batch = bss / static_cast<double>(batches - 1);
  out.std_error = std::sqrt(var_batch / static_cast<double>(batches));
  const boost::math::students_t t(static_cast<double>(batches - 1));
  const double q = boost::math::quantile(boost::math::complement(t, (1.0 - confidence) / 2.0));
  out.ci_low = out.mean - q * out.std_error;
  out.ci_high = out.mean + q * out.std_error;
  return out;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("linear fit needs >= 2 paired points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw PreconditionError("linear fit needs distinct abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    sse += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

namespace {

double euclid(const Sample& a, const Sample& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Energy statistic from a pooled distance matrix and a membership mask.
double pooled_statistic(const std::vector<double>& dist, std::size_t n, const std::vector<char>& in_x) {
  double xy = 0.0, xx = 0.0, yy = 0.0;
  std::size_t nx = 0;
  for (char c : in_x) nx += c ? 1 : 0;
  const std::size_t ny = n - nx;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dist[i * n + j];
      if (in_x[i] && in_x[j]) {
        xx += d;
      } else if (!in_x[i] && !in_x[j]) {
        yy += d;
      } else {
        xy += d;
      }
    }
  }
  const double fx = static_cast<double>(nx), fy = static_cast<double>(ny);
  return 2.0 * xy / (fx * fy) - 2.0 * xx / (fx * fx) - 2.0 * yy / (fy * fy);
}

}  // namespace

double energy_distance(const std::vector<Sample>& x, const std::vector<Sample>& y) {
  if (x.empty() || y.empty()) throw PreconditionError("energy distance needs non-empty samples");
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (const auto& a : x) {
    for (const auto& b : y) xy += euclid(a, b);
  }
  for (const auto& a : x) {
    for (const auto& b : x) xx += euclid(a, b);
  }
  for (const auto& a : y) {
    for (const auto& b : y) yy += euclid(a, b);
  }
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  return 2.0 * xy / (nx * ny) - xx / (nx * nx) - yy / (ny * ny);
}

PermutationTest energy_permutation_test(const std::vector<Sample>& x, const std::vector<Sample>& y,
                                        std::size_t permutations, std::uint64_t seed) {
  if (x.empty() || y.empty()) throw PreconditionError("energy distance needs non-empty samples");
  std::vector<const Sample*> pooled;
  for (const auto& s : x) pooled.push_back(&s);
  for (const auto& s : y) pooled.push_back(&s);
  const std::size_t n = pooled.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist[i * n + j] = euclid(*pooled[i], *pooled[j]);
  }
  std::vector<char> mask(n, 0);
  for (std::size_t i = 0; i < x.size(); ++i) mask[i] = 1;

  PermutationTest out;
  out.statistic = pooled_statistic(dist, n, mask);
  out.permutations = permutations;
  const NoiseStream stream(seed, 0x5045524d);  // independent lane for shuffles
  std::size_t at_least = 0;
  std::vector<char> perm = mask;
  for (std::size_t p = 0; p < permutations; ++p) {
    // Fisher-Yates driven by the counter-based stream
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(stream.uniform(p, static_cast<std::uint32_t>(i)) *
                                              static_cast<double>(i + 1));
      std::swap(perm[i], perm[std::min(j, i)]);
    }
    if (pooled_statistic(dist, n, perm) >= out.statistic - 1e-14 * std::abs(out.statistic)) ++at_least;
  }
  out.p_value = (1.0 + static_cast<double>(at_least)) / (1.0 + static_cast<double>(permutations));
  return out;
}

std::pair<double, double> clopper_pearson(std::size_t successes, std::size_t n, double confidence) {
  if (n == 0 || successes > n) throw PreconditionError("invalid binomial counts");
  const double a = (1.0 - confidence) / 2.0;
  const double k = static_cast<double>(successes), m = static_cast<double>(n);
  const double lo = successes == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<>(k, m - k + 1), a);
  const double hi =
      successes == n ? 1.0 : boost::math::quantile(boost::math::beta_distribution<>(k + 1, m - k), 1.0 - a);
  return {lo, hi};
}

double jarque_bera_p_value(std::span<const double> samples) {
  if (samples.size() < 8) throw PreconditionError("normality test needs at least 8 samples");
  const double m = mean_of(samples);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : samples) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(samples.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 == 0.0) return 0.0;
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2) - 3.0;
  const double jb = n / 6.0 * (skew * skew + kurt * kurt / 4.0);
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(2.0), jb));
}

double covariance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw PreconditionError("covariance needs >= 2 paired samples");
  const double ma = mean_of(a), mb = mean_of(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

}  // namespace svscl
