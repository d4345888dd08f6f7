#include "doctest.h"

#include "svscl/error.hpp"
#include "svscl/stats.hpp"

#include <cmath>
#include <random>

using namespace svscl;

namespace {

// P(X >= k) for X ~ Bin(n, p), summed directly.
double binomial_upper_tail(int k, int n, double p) {
  double s = 0.0;
  for (int i = k; i <= n; ++i) s += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                                              i * std::log(p) + (n - i) * std::log1p(-p));
  return s;
}

double bisect(double lo, double hi, auto f) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("batch means on a linear ramp") {
  std::vector<double> x(40);
  for (int i = 0; i < 40; ++i) x[i] = i;
  const BatchMeans b = batch_means(x);
  CHECK(b.batches == 20);
  CHECK(b.mean == doctest::Approx(19.5));
  // sample variance of 0..39 is 40*41/12
  CHECK(b.variance == doctest::Approx(40.0 * 41.0 / 12.0));
  // batch means 0.5, 2.5, ..., 38.5: variance 4 * 20*21/12 / ... computed directly
  double m = 0.0, v = 0.0;
  for (int i = 0; i < 20; ++i) m += 2.0 * i + 0.5;
  m /= 20.0;
  for (int i = 0; i < 20; ++i) v += (2.0 * i + 0.5 - m) * (2.0 * i + 0.5 - m);
  v /= 19.0;
  const double se = std::sqrt(v / 20.0);
  CHECK(b.std_error == doctest::Approx(se).epsilon(1e-12));
  // t quantile for 19 degrees of freedom at 0.975 (table value)
  CHECK(b.ci_high - b.mean == doctest::Approx(2.093024 * se).epsilon(1e-6));
  CHECK(b.mean - b.ci_low == doctest::Approx(2.093024 * se).epsilon(1e-6));
}

TEST_CASE("batch means rejects short series") {
  std::vector<double> x(19, 1.0);
  CHECK_THROWS_AS(batch_means(x), PreconditionError);
}

TEST_CASE("batch means interval covers the mean of iid draws") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(3.0, 2.0);
  int covered = 0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> x(400);
    for (auto& v : x) v = g(rng);
    const BatchMeans b = batch_means(x);
    covered += b.ci_low <= 3.0 && 3.0 <= b.ci_high;
  }
  // nominal 95%: 190 expected, binomial sd ~3
  CHECK(covered >= 178);
}

TEST_CASE("linear fit") {
  const std::vector<double> x = {0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2.5 - 0.75 * v);
  const LinearFit f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(-0.75));
  CHECK(f.intercept == doctest::Approx(2.5));
  CHECK(f.r2 == doctest::Approx(1.0));

  const std::vector<double> y2 = {1, 3, 2, 5, 4};
  const LinearFit g = linear_fit(x, y2);
  // slope = Sxy/Sxx = 8/10, r2 = Sxy^2/(Sxx Syy) = 64/(10*10)
  CHECK(g.slope == doctest::Approx(0.8));
  CHECK(g.r2 == doctest::Approx(0.64));
  CHECK_THROWS_AS(linear_fit(std::vector<double>{1, 1}, std::vector<double>{0, 1}), PreconditionError);
}

TEST_CASE("energy distance") {
  CHECK(energy_distance({{0.0}}, {{1.0}}) == doctest::Approx(2.0));
  // X = {0, 2}, Y = {1}: 2*1 - (0+2+2+0)/4 - 0 = 1
  CHECK(energy_distance({{0.0}, {2.0}}, {{1.0}}) == doctest::Approx(1.0));
  // 2D: X = {(0,0)}, Y = {(3,4)}
  CHECK(energy_distance({{0.0, 0.0}}, {{3.0, 4.0}}) == doctest::Approx(10.0));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<Sample> a(30), b(30);
  for (auto& s : a) s = {g(rng), g(rng)};
  for (auto& s : b) s = {g(rng), g(rng)};
  CHECK(energy_distance(a, b) >= 0.0);
  CHECK(energy_distance(a, a) == doctest::Approx(0.0));
}

TEST_CASE("energy permutation test") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::vector<Sample> a(40), b(40), c(40);
  for (auto& s : a) s = {g(rng), g(rng)};
  for (auto& s : b) s = {g(rng), g(rng)};
  for (auto& s : c) s = {g(rng) + 3.0, g(rng)};
  const auto same = energy_permutation_test(a, b, 199, 1);
  const auto shifted = energy_permutation_test(a, c, 199, 1);
  CHECK(same.p_value > 0.01);
  CHECK(shifted.p_value == doctest::Approx(1.0 / 200.0));
  CHECK(same.statistic == doctest::Approx(energy_distance(a, b)).epsilon(1e-12));
  const auto again = energy_permutation_test(a, b, 199, 1);
  CHECK(again.p_value == same.p_value);

  // p-values are uniform-ish under the null: never all tiny
  int small = 0;
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<Sample> x(20), y(20);
    for (auto& s : x) s = {g(rng)};
    for (auto& s : y) s = {g(rng)};
    small += energy_permutation_test(x, y, 99, rep).p_value < 0.05;
  }
  CHECK(small <= 8);
}

TEST_CASE("Clopper-Pearson bounds solve the binomial tail equations") {
  const auto [lo0, hi0] = clopper_pearson(0, 10);
  CHECK(lo0 == 0.0);
  CHECK(hi0 == doctest::Approx(1.0 - std::pow(0.025, 0.1)).epsilon(1e-10));
  const auto [lon, hin] = clopper_pearson(10, 10);
  CHECK(hin == 1.0);
  CHECK(lon == doctest::Approx(std::pow(0.025, 0.1)).epsilon(1e-10));
  for (auto [k, n] : {std::pair{3, 20}, std::pair{184, 200}, std::pair{1, 250}}) {
    const auto [lo, hi] = clopper_pearson(k, n);
    const double lo_ref = bisect(0.0, 1.0, [&](double p) { return binomial_upper_tail(k, n, p) - 0.025; });
    const double hi_ref = bisect(0.0, 1.0, [&](double p) { return binomial_upper_tail(k + 1, n, p) - 0.975; });
    CHECK(lo == doctest::Approx(lo_ref).epsilon(1e-8));
    CHECK(hi == doctest::Approx(hi_ref).epsilon(1e-8));
  }
  CHECK_THROWS_AS(clopper_pearson(3, 2), PreconditionError);
}

TEST_CASE("moment normality test") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  std::exponential_distribution<double> e;
  std::vector<double> gs(2000), us(2000), es(2000);
  for (auto& v : gs) v = g(rng);
  for (auto& v : us) v = u(rng);
  for (auto& v : es) v = e(rng);
  CHECK(jarque_bera_p_value(gs) > 0.01);
  CHECK(jarque_bera_p_value(us) < 1e-6);
  CHECK(jarque_bera_p_value(es) < 1e-6);
}

TEST_CASE("covariance") {
  const std::vector<double> a = {1, 2, 3, 4}, b = {2, 4, 6, 8};
  CHECK(covariance(a, b) == doctest::Approx(2.0 * 5.0 / 3.0));
}
