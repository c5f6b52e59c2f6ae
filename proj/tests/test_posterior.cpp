#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "driftbayes/errors.hpp"
#include "driftbayes/posterior.hpp"
#include "driftbayes/rng.hpp"
#include "test_support.hpp"

using namespace driftbayes;
using driftbayes::testing::manual_net;
using driftbayes::testing::mean_se;
using driftbayes::testing::normal_logpdf;
using driftbayes::testing::ou;
using driftbayes::testing::ou_step;

namespace {

ObservationSeries ou_series(double beta, double delta, std::size_t n, std::uint64_t seed) {
  const auto b = ou(beta);
  return simulate_series(b, stationary_law(b), delta, n, {SchemeKind::exact_ou, 1}, seed);
}

// straight-line sum of Gaussian transition log-densities
double ou_loglik(double beta, const ObservationSeries& s) {
  const auto st = ou_step(beta, s.delta);
  double acc = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i)
    acc += normal_logpdf(s.at(i)[0] - st.decay * s.at(i - 1)[0], st.var);
  return acc;
}

LikelihoodOptions exact_options() {
  LikelihoodOptions o;
  o.model.method = TransitionMethod::exact_ou;
  return o;
}

}  // namespace

TEST(LikelihoodRatio, IdenticalDriftsGiveZero) {
  const auto s = ou_series(1.0, 0.5, 50, 3);
  const auto law = stationary_law(ou(1.0));
  EXPECT_EQ(log_likelihood_ratio(ou(1.0), ou(1.0), s, TransitionModel{}, &law, &law), 0.0);
}

TEST(LikelihoodRatio, MatchesStraightLineRecomputation) {
  const auto s = ou_series(1.0, 0.5, 10, 7);
  ASSERT_EQ(s.transitions(), 10u);
  const double oracle = ou_loglik(1.2, s) - ou_loglik(1.0, s);
  EXPECT_NEAR(log_likelihood_ratio(ou(1.2), ou(1.0), s, TransitionModel{}, nullptr, nullptr), oracle,
              1e-12);
  const auto lb = stationary_law(ou(1.2)), l0 = stationary_law(ou(1.0));
  const double x0 = s.at(0)[0];
  const double init = normal_logpdf(x0, 1.0 / 2.4) - normal_logpdf(x0, 0.5);
  EXPECT_NEAR(log_likelihood_ratio(ou(1.2), ou(1.0), s, TransitionModel{}, &lb, &l0), oracle + init,
              1e-9);
}

TEST(LikelihoodRatio, MeanOneAtFirstStep) {
  const auto b = ou(1.2), b0 = ou(1.0);
  const auto lb = stationary_law(b), l0 = stationary_law(b0);
  const std::vector<std::size_t> ns{1};
  const auto paths = likelihood_ratio_paths(b, b0, lb, l0, TransitionModel{}, 0.5, ns, 100000,
                                            {SchemeKind::exact_ou, 1}, 41);
  std::vector<double> l1;
  for (const auto& r : paths.log_ratios) l1.push_back(std::exp(r[0]));
  const auto ms = mean_se(l1);
  EXPECT_NEAR(ms.mean, 1.0, 3.0 * ms.se);
}

TEST(LikelihoodRatio, SquareRootIsSupermartingale) {
  const auto b = ou(1.4), b0 = ou(1.0);
  const auto lb = stationary_law(b), l0 = stationary_law(b0);
  const std::vector<std::size_t> ns{1, 2, 4, 8};
  const auto paths = likelihood_ratio_paths(b, b0, lb, l0, TransitionModel{}, 0.5, ns, 200,
                                            {SchemeKind::exact_ou, 1}, 43);
  for (std::size_t k = 0; k + 1 < ns.size(); ++k) {
    std::vector<double> inc;
    for (const auto& r : paths.log_ratios) inc.push_back(std::exp(0.5 * r[k + 1]) - std::exp(0.5 * r[k]));
    const auto ms = mean_se(inc);
    EXPECT_LE(ms.mean, 3.0 * ms.se) << "n = " << ns[k + 1];
  }
}

TEST(LikelihoodRatio, DependsOnObservationOrder) {
  ObservationSeries a;
  a.delta = 0.5;
  a.points = {0.0, 1.0, 3.0};
  ObservationSeries b = a;
  b.points = {0.0, 3.0, 1.0};
  const double la = log_likelihood_ratio(ou(1.5), ou(1.0), a, TransitionModel{}, nullptr, nullptr);
  const double lb = log_likelihood_ratio(ou(1.5), ou(1.0), b, TransitionModel{}, nullptr, nullptr);
  EXPECT_NEAR(la, ou_loglik(1.5, a) - ou_loglik(1.0, a), 1e-12);
  EXPECT_NEAR(lb, ou_loglik(1.5, b) - ou_loglik(1.0, b), 1e-12);
  EXPECT_GT(std::abs(la - lb), 1e-3);
}

TEST(Posterior, SingleAtomGetsAllMass) {
  const auto net = manual_net({ou(1.3)}, {1.0});
  const auto post = compute_posterior(net, ou_series(1.0, 0.5, 100, 5), exact_options());
  ASSERT_EQ(post.weights.size(), 1u);
  EXPECT_DOUBLE_EQ(post.weights[0], 1.0);
}

TEST(Posterior, TwoAtomsConcentrateOnTruth) {
  const auto net = manual_net({ou(1.0), ou(2.0)}, {0.5, 0.5});
  const auto s = ou_series(1.0, 0.5, 500, 11);
  const auto post = compute_posterior(net, s, exact_options());
  EXPECT_GT(post.weights[0], 0.99);
  EXPECT_EQ(post.map_index, 0u);
  // two-hypothesis Bayes with the initial factor
  const double x0 = s.at(0)[0];
  const double llr = ou_loglik(2.0, s) - ou_loglik(1.0, s) + normal_logpdf(x0, 0.25) - normal_logpdf(x0, 0.5);
  EXPECT_NEAR(post.weights[1], 1.0 / (1.0 + std::exp(-llr)), 1e-10);
}

TEST(Posterior, ZeroTransitionsReturnsPrior) {
  const auto net = manual_net({ou(0.5), ou(1.0), ou(1.5)}, {0.2, 0.3, 0.5});
  const auto post = compute_posterior(net, ou_series(1.0, 0.5, 0, 1), exact_options());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(post.weights[i], net.weights[i]);
  EXPECT_EQ(post.n_used, 0u);
}

TEST(Posterior, InvariantToReferenceChoice) {
  const auto net = manual_net({ou(0.5), ou(1.0), ou(1.5), ou(2.0)}, {0.1, 0.2, 0.3, 0.4});
  const auto s = ou_series(1.2, 0.5, 300, 13);
  const auto self = compute_posterior(net, s, exact_options());
  const auto ref1 = compute_posterior(net, s, exact_options(), ou(1.0));
  const auto ref2 = compute_posterior(net, s, exact_options(), ou(0.7));
  for (std::size_t i = 0; i < net.size(); ++i) {
    EXPECT_NEAR(self.weights[i], ref1.weights[i], 1e-10);
    EXPECT_NEAR(self.weights[i], ref2.weights[i], 1e-10);
  }
  EXPECT_NEAR(ref1.log_likelihood_ratios[1], 0.0, 1e-9);
}

TEST(Posterior, ScaleInvariantInPrior) {
  auto net = manual_net({ou(0.5), ou(1.0), ou(1.5)}, {0.2, 0.3, 0.5});
  const auto s = ou_series(1.0, 0.5, 200, 17);
  const auto a = compute_posterior(net, s, exact_options());
  for (auto& w : net.weights) w *= 2.0;
  const auto b = compute_posterior(net, s, exact_options());
  for (std::size_t i = 0; i < net.size(); ++i) EXPECT_NEAR(a.weights[i], b.weights[i], 1e-14);
}

TEST(Posterior, StableForLongSeries) {
  const auto net = manual_net({ou(0.5), ou(1.0), ou(1.5), ou(2.0)}, {0.25, 0.25, 0.25, 0.25});
  const auto post = compute_posterior(net, ou_series(1.0, 0.5, 10000, 19), exact_options());
  double total = 0.0;
  for (double w : post.weights) {
    EXPECT_TRUE(std::isfinite(w));
    total += w;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(post.weights[1], 1.0, 1e-12);
}

TEST(Posterior, SerialAndParallelAgree) {
  const auto net = manual_net({ou(0.5), ou(1.0), ou(1.5)}, {0.2, 0.3, 0.5});
  const auto s = ou_series(1.0, 0.5, 200, 21);
  auto opt = exact_options();
  opt.parallel = false;
  const auto a = compute_posterior(net, s, opt);
  opt.parallel = true;
  const auto b = compute_posterior(net, s, opt);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(Posterior, NonFiniteAtomsDroppedWithWarning) {
  const auto net = manual_net({ou(0.5), ou(1.0), ou(1.5)}, {0.2, 0.3, 0.5});
  const std::vector<double> ll{-10.0, NAN, -11.0};
  const auto post = posterior_from_log_likelihoods(net, ll, 5);
  EXPECT_EQ(post.weights[1], 0.0);
  EXPECT_EQ(post.warnings.size(), 1u);
  EXPECT_NEAR(post.weights[0] + post.weights[2], 1.0, 1e-15);
  const std::vector<double> all_bad{NAN, INFINITY, NAN};
  EXPECT_THROW(posterior_from_log_likelihoods(net, all_bad, 5), EvaluationError);
}

TEST(Neighborhood, IsolatedTruthGivesOneMinusItsWeight) {
  const auto net = manual_net({ou(0.5), ou(1.0), ou(1.5)}, {0.2, 0.3, 0.5});
  const auto b0 = ou(1.0);
  const auto law0 = stationary_law(b0);
  const auto post = compute_posterior(net, ou_series(1.0, 0.5, 50, 23), exact_options());
  const auto cm = neighborhood_complement_mass(post, net, b0, law0, L2Neighborhood{0.01});
  EXPECT_NEAR(cm.mass, 1.0 - post.weights[1], 1e-14);
}

TEST(Neighborhood, WideWeakBallHasEmptyComplement) {
  const auto net = manual_net({ou(0.5), ou(1.0), ou(1.5)}, {0.2, 0.3, 0.5});
  const auto b0 = ou(1.0);
  const auto law0 = stationary_law(b0);
  const auto post = compute_posterior(net, ou_series(1.0, 0.5, 50, 23), exact_options());
  WeakNeighborhood hood{TopologyProbe::uniform_grid(TestFunction::make("cos"), 1, 3.0, 13, 1.0, 1.9),
                        TransitionModel{}, 0.5};
  const auto cm = neighborhood_complement_mass(post, net, b0, law0, hood);
  EXPECT_EQ(cm.mass, 0.0);
}

TEST(ConsistencyCurve, NoDataGivesPriorComplement) {
  const auto net = manual_net({ou(0.5), ou(1.0), ou(1.5)}, {0.2, 0.3, 0.5});
  const auto b0 = ou(1.0);
  const auto law0 = stationary_law(b0);
  CurveConfig cfg;
  cfg.sample_sizes = {0};
  cfg.replications = 3;
  cfg.delta = 0.5;
  cfg.scheme = {SchemeKind::exact_ou, 1};
  cfg.likelihood = exact_options();
  const auto curve = consistency_curve(b0, law0, net, L2Neighborhood{0.1}, cfg);
  const double prior_complement = net.weights[0] + net.weights[2];
  for (const auto& row : curve.masses) EXPECT_EQ(row[0], prior_complement);
  EXPECT_DOUBLE_EQ(curve.rows[0].mean, prior_complement);
  EXPECT_NEAR(curve.rows[0].std_error, 0.0, 1e-15);
}

TEST(ConsistencyCurve, TwoAtomCurveMatchesDirectBayes) {
  const auto net = manual_net({ou(1.0), ou(2.0)}, {0.5, 0.5});
  const auto b0 = ou(1.0);
  const auto law0 = stationary_law(b0);
  CurveConfig cfg;
  cfg.sample_sizes = {10, 40};
  cfg.replications = 4;
  cfg.seed = 99;
  cfg.delta = 0.5;
  cfg.scheme = {SchemeKind::exact_ou, 1};
  cfg.likelihood = exact_options();
  const auto curve = consistency_curve(b0, law0, net, L2Neighborhood{0.1}, cfg);
  for (std::size_t r = 0; r < 4; ++r) {
    const auto full = simulate_series(b0, law0, 0.5, 40, cfg.scheme, split_seed(99, r));
    for (std::size_t k = 0; k < 2; ++k) {
      const auto s = full.prefix(cfg.sample_sizes[k]);
      const double x0 = s.at(0)[0];
      const double llr = ou_loglik(2.0, s) - ou_loglik(1.0, s) + normal_logpdf(x0, 0.25) -
                         normal_logpdf(x0, 0.5);
      EXPECT_NEAR(curve.masses[r][k], 1.0 / (1.0 + std::exp(-llr)), 1e-10);
    }
  }
}

TEST(ConsistencyCurve, FirstReplicationIndependentOfCount) {
  const auto net = manual_net({ou(0.5), ou(1.0), ou(1.5)}, {0.2, 0.3, 0.5});
  const auto b0 = ou(1.0);
  const auto law0 = stationary_law(b0);
  CurveConfig cfg;
  cfg.sample_sizes = {20, 80};
  cfg.seed = 5;
  cfg.delta = 0.5;
  cfg.scheme = {SchemeKind::exact_ou, 1};
  cfg.likelihood = exact_options();
  cfg.replications = 1;
  const auto one = consistency_curve(b0, law0, net, L2Neighborhood{0.1}, cfg);
  cfg.replications = 2;
  const auto two = consistency_curve(b0, law0, net, L2Neighborhood{0.1}, cfg);
  EXPECT_EQ(one.masses[0], two.masses[0]);
}

TEST(ConsistencyCurve, OuNetMassDecreases) {
  NetConfig nc;
  nc.m_max = 2;
  nc.l_max = 3;
  nc.eps_schedule = {0.5, 0.2, 0.1};
  const auto net = build_net(ou_family(0.0, 2.0, 2.0), nc);
  const auto b0 = ou(1.0);
  const auto law0 = stationary_law(b0);
  CurveConfig cfg;
  cfg.sample_sizes = {0, 200, 2000};
  cfg.replications = 5;
  cfg.seed = 31;
  cfg.delta = 0.5;
  cfg.scheme = {SchemeKind::exact_ou, 1};
  cfg.likelihood = exact_options();
  const auto curve = consistency_curve(b0, law0, net, L2Neighborhood{0.141}, cfg);
  EXPECT_GT(curve.rows[0].mean, curve.rows[1].mean);
  EXPECT_GT(curve.rows[1].mean, curve.rows[2].mean);
}
