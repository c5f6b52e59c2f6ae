#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "driftbayes/errors.hpp"
#include "driftbayes/kernels.hpp"
#include "driftbayes/simulate.hpp"
#include "test_support.hpp"

using namespace driftbayes;
using driftbayes::testing::ou;

namespace {

double autocorrelation(const std::vector<double>& x, std::size_t lag) {
  const std::size_t n = x.size();
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double c0 = 0.0, ck = 0.0;
  for (std::size_t i = 0; i < n; ++i) c0 += (x[i] - m) * (x[i] - m);
  for (std::size_t i = 0; i + lag < n; ++i) ck += (x[i] - m) * (x[i + lag] - m);
  return ck / c0;
}

double variance(const std::vector<double>& x) {
  double m = 0.0, v = 0.0;
  for (double a : x) m += a;
  m /= x.size();
  for (double a : x) v += (a - m) * (a - m);
  return v / (x.size() - 1);
}

ObservationSeries simulate(double beta, double delta, std::size_t n, SchemeKind kind,
                           std::uint64_t seed, int substeps = 64) {
  const auto b = ou(beta);
  return simulate_series(b, stationary_law(b), delta, n, {kind, substeps}, seed);
}

}  // namespace

TEST(SimulateSeries, SingleObservationForZeroTransitions) {
  const auto s = simulate(1.0, 0.5, 0, SchemeKind::exact_ou, 3);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(s.transitions(), 0u);
}

TEST(SimulateSeries, LagOneAutocorrelation) {
  const auto s = simulate(1.0, 0.5, 100000, SchemeKind::exact_ou, 7);
  EXPECT_NEAR(autocorrelation(s.points, 1), std::exp(-0.5), 0.01);
}

TEST(SimulateSeries, AutocorrelationUpToLagFive) {
  const double beta = 1.0, delta = 0.5;
  const auto s = simulate(beta, delta, 200000, SchemeKind::exact_ou, 11);
  const double rho = std::exp(-beta * delta);
  const double n = static_cast<double>(s.size());
  for (int k = 1; k <= 5; ++k) {
    // Bartlett variance of the lag-k sample autocorrelation of an AR(1) series
    const double rk2 = std::pow(rho, 2 * k);
    const double var = ((1.0 + rho * rho) * (1.0 - rk2) / (1.0 - rho * rho) - 2.0 * k * rk2) / n;
    EXPECT_NEAR(autocorrelation(s.points, k), std::pow(rho, k), 3.0 * std::sqrt(var)) << "lag " << k;
  }
}

TEST(SimulateSeries, SecondHalfMatchesStationaryMoments) {
  const double beta = 1.5, delta = 0.5;
  const auto s = simulate(beta, delta, 100000, SchemeKind::exact_ou, 13);
  std::vector<double> half(s.points.begin() + s.points.size() / 2, s.points.end());
  const double rho = std::exp(-beta * delta);
  const double n = static_cast<double>(half.size());
  const double v0 = 1.0 / (2.0 * beta);
  double m = 0.0;
  for (double x : half) m += x;
  m /= n;
  // AR(1) long-run variance factors for the mean and for the squares
  const double se_mean = std::sqrt(v0 * (1.0 + rho) / (1.0 - rho) / n);
  const double se_var = std::sqrt(2.0 * v0 * v0 * (1.0 + rho * rho) / (1.0 - rho * rho) / n);
  EXPECT_NEAR(m, 0.0, 3.0 * se_mean);
  EXPECT_NEAR(variance(half), v0, 3.0 * se_var);
}

TEST(SimulateSeries, EulerMarginalVarianceCloseToExact) {
  // the exact scheme's marginal variance is 1 / (2 beta) without sampling noise
  const auto euler = simulate(1.0, 0.5, 2000000, SchemeKind::euler, 19, 64);
  EXPECT_LT(std::abs(variance(euler.points) - 0.5), 5e-3);
}

TEST(SimulateSeries, DeterministicAcrossRunsAndThreadCounts) {
  kernels::set_threads(1);
  const auto a = simulate(1.0, 0.5, 2000, SchemeKind::euler, 23);
  kernels::set_threads(4);
  const auto b = simulate(1.0, 0.5, 2000, SchemeKind::euler, 23);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, simulate(1.0, 0.5, 2000, SchemeKind::euler, 24).points);
}

TEST(SimulateSeries, ExactSchemeRequiresOu) {
  const auto b = DriftSpec::parametric("tanh_well", {1.0, 0.5}, 2.0, {0.5, 2.0, 1.0});
  EXPECT_THROW(simulate_series(b, stationary_law(b), 0.5, 10, {SchemeKind::exact_ou, 1}, 1),
               ValidationError);
}

TEST(SimulateSeries, EscapeFromGuardBoxIsExplosion) {
  // declared constants put the guard at 10 (M + 25 / r) = 0.26, far inside the bulk
  const auto b = DriftSpec::ou(1.0, 1000.0, {1000.0, 0.001, 1.0});
  const auto law = stationary_law(ou(1.0));
  EXPECT_THROW(simulate_series(b, law, 0.5, 1000, {SchemeKind::euler, 64}, 1), ExplosionError);
}

TEST(BrownianBundle, MomentsAndDeterminism) {
  const double delta = 0.5;
  const int substeps = 8;
  const auto bundle = simulate_brownian_bundle(1, delta, substeps, 125000, 29);
  ASSERT_EQ(bundle.increments.size(), 1000000u);
  double s = 0.0, s2 = 0.0;
  for (double z : bundle.increments) {
    s += z;
    s2 += z * z;
  }
  const double n = static_cast<double>(bundle.increments.size());
  const double h = delta / substeps;
  EXPECT_NEAR(s / n, 0.0, 3.0 * std::sqrt(h / n));
  EXPECT_NEAR(s2 / n, h, 0.01 * h);
  EXPECT_EQ(bundle.increments, simulate_brownian_bundle(1, delta, substeps, 125000, 29).increments);
}

TEST(SeriesCsv, RoundTripIsExact) {
  const auto s = simulate(1.0, 0.5, 50, SchemeKind::exact_ou, 31);
  std::stringstream buf;
  write_series_csv(s, buf);
  const auto back = read_series_csv(buf, 0.5);
  EXPECT_EQ(back.points, s.points);
  EXPECT_EQ(back.origin.kind, SeriesOrigin::Kind::ingested);
}

TEST(SeriesCsv, WellFormedThreeRows) {
  std::istringstream in("t,x1\n0,0.1\n0.5,0.2\n1.0,-0.3\n");
  EXPECT_EQ(read_series_csv(in, 0.5).size(), 3u);
}

TEST(SeriesCsv, TimestampDriftRejectedAtRow) {
  std::istringstream in("t,x1\n0,0.1\n0.5,0.2\n1.1,-0.3\n");
  try {
    read_series_csv(in, 0.5);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(SeriesCsv, NonNumericCellRejected) {
  std::istringstream in("t,x1\n0,0.1\n0.5,abc\n");
  EXPECT_THROW(read_series_csv(in, 0.5), ValidationError);
}

TEST(SeriesCsv, TwoDimensionalRoundTrip) {
  ObservationSeries s;
  s.delta = 0.25;
  s.dim = 2;
  s.points = {0.1, -0.2, 1.0 / 3.0, 2.0, -5e-7, 1e10};
  std::stringstream buf;
  write_series_csv(s, buf);
  const auto back = read_series_csv(buf, 0.25);
  EXPECT_EQ(back.dim, 2);
  EXPECT_EQ(back.points, s.points);
}
