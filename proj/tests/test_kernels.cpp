#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "driftbayes/kernels.hpp"
#include "test_support.hpp"

using namespace driftbayes;
using driftbayes::testing::ou;

namespace {

// bitwise, so NaN rows compare equal too
bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

class KernelThreads : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { kernels::set_threads(GetParam()); }
  void TearDown() override { kernels::set_threads(1); }
};

std::vector<DriftSpec> atoms() {
  return {ou(0.5), ou(1.0), ou(1.7),
          DriftSpec::parametric("tanh_well", {1.0, 0.5}, 2.0, {0.5, 2.0, 1.0})};
}

ObservationSeries series() {
  const auto b = ou(1.0);
  return simulate_series(b, stationary_law(b), 0.5, 40, {SchemeKind::exact_ou, 1}, 5);
}

}  // namespace

TEST_P(KernelThreads, EulerEndpointsMatchSerial) {
  const std::vector<double> x{0.3};
  std::vector<double> a(3000), b(3000);
  kernels::serial::euler_endpoints(ou(1.2), x, 0.5, 32, 11, a);
  kernels::parallel::euler_endpoints(ou(1.2), x, 0.5, 32, 11, b);
  EXPECT_TRUE(same_bits(a, b));
}

TEST_P(KernelThreads, GirsanovPathsMatchSerialAndBundle) {
  const std::vector<double> x{-0.4, 0.9};
  const auto drift = ou(1.1, 2);
  const std::size_t n = 1500;
  std::vector<double> lw_s(n), lw_p(n), lw_b(n), e_s(2 * n), e_p(2 * n), e_b(2 * n);
  kernels::serial::girsanov_paths(drift, x, 0.5, 16, 13, lw_s, e_s);
  kernels::parallel::girsanov_paths(drift, x, 0.5, 16, 13, lw_p, e_p);
  const auto bundle = simulate_brownian_bundle(2, 0.5, 16, n, 13);
  kernels::parallel::girsanov_paths(drift, x, bundle, lw_b, e_b);
  EXPECT_TRUE(same_bits(lw_s, lw_p));
  EXPECT_TRUE(same_bits(e_s, e_p));
  EXPECT_TRUE(same_bits(lw_s, lw_b));
  EXPECT_TRUE(same_bits(e_s, e_b));
}

TEST_P(KernelThreads, AtomTermsMatchSerialForMonteCarloModel) {
  const auto a = atoms();
  const auto s = series();
  TransitionModel m;
  m.method = TransitionMethod::mc_kde;
  m.n_paths = 500;
  m.substeps = 8;
  m.seed = 17;
  std::vector<StationaryLaw> laws;
  for (const auto& d : a) laws.push_back(stationary_law(d));
  std::vector<const StationaryLaw*> ptrs;
  for (const auto& l : laws) ptrs.push_back(&l);
  std::vector<double> ts(a.size() * s.size()), tp(ts.size()), ls(a.size()), lp(a.size());
  kernels::serial::atom_transition_terms(a, ptrs, s, m, true, ts);
  kernels::parallel::atom_transition_terms(a, ptrs, s, m, true, tp);
  kernels::serial::atom_log_likelihoods(a, ptrs, s, m, true, ls);
  kernels::parallel::atom_log_likelihoods(a, ptrs, s, m, true, lp);
  EXPECT_TRUE(same_bits(ts, tp));
  EXPECT_TRUE(same_bits(ls, lp));
  for (double v : ls) EXPECT_TRUE(std::isfinite(v));
}

TEST_P(KernelThreads, FailingAtomGetsNanRowInBoth) {
  // exact densities do not exist for the non-OU atom
  const auto a = atoms();
  const auto s = series();
  std::vector<double> ts(a.size() * s.size()), tp(ts.size());
  kernels::serial::atom_transition_terms(a, {}, s, TransitionModel{}, false, ts);
  kernels::parallel::atom_transition_terms(a, {}, s, TransitionModel{}, false, tp);
  EXPECT_TRUE(same_bits(ts, tp));
  EXPECT_TRUE(std::isnan(ts[3 * s.size() + 1]));
  EXPECT_EQ(ts[0], 0.0);  // no initial factor requested
  EXPECT_TRUE(std::isfinite(ts[1]));
}

INSTANTIATE_TEST_SUITE_P(Threads, KernelThreads, ::testing::Values(1, 2, 4));

TEST(Kernels, ThreadCountIsSettable) {
  kernels::set_threads(3);
  EXPECT_GE(kernels::max_threads(), 1);
  kernels::set_threads(1);
  EXPECT_EQ(kernels::max_threads(), 1);
}
