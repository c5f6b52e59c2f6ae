#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "driftbayes/errors.hpp"
#include "driftbayes/prior_net.hpp"
#include "driftbayes/rng.hpp"
#include "test_support.hpp"

using namespace driftbayes;
using driftbayes::testing::ou;

namespace {

NetConfig config(int m_max, int l_max, std::vector<double> eps) {
  NetConfig c;
  c.m_max = m_max;
  c.l_max = l_max;
  c.eps_schedule = std::move(eps);
  c.seed = 123;
  return c;
}

FunctionFamily soft_family() {
  FunctionFamily f;
  f.dim = 2;
  f.kind = ProfileKind::soft_quadratic;
  f.lower = {0.5, -0.5};
  f.upper = {1.5, 0.5};
  f.K1 = 2.0;
  f.K2 = 3.0;
  f.M_f = 3.0;
  return f;
}

}  // namespace

TEST(SupMetric, OuPairOnUnitBox) {
  EXPECT_NEAR(sup_metric(ou(1.0), ou(1.2), 1, 21), 0.2, 1e-12);
  EXPECT_NEAR(sup_metric(ou(1.0), ou(1.2), 3, 21), 0.6, 1e-12);
  EXPECT_EQ(sup_metric(ou(1.0), ou(1.0), 1, 21), 0.0);
}

TEST(SupMetric, TriangleInequalityOnRandomTriples) {
  const auto fam = soft_family();
  NormalStream rng(3);
  auto draw = [&] {
    std::vector<double> t{0.5 + rng.uniform(), -0.5 + rng.uniform()};
    return fam.drift(t);
  };
  for (int k = 0; k < 50; ++k) {
    const auto a = draw(), b = draw(), c = draw();
    EXPECT_LE(sup_metric(a, c, 1, 11), sup_metric(a, b, 1, 11) + sup_metric(b, c, 1, 11) + 1e-12);
  }
}

TEST(FunctionFamily, MembersSatisfyDeclaredClass) {
  const auto fam = soft_family();
  for (double a : {0.5, 1.0, 1.5})
    for (double c : {-0.5, 0.0, 0.5}) {
      const std::vector<double> t{a, c};
      const auto b = fam.drift(t);
      const auto r = validate_drift(b, 6.0, 25);
      EXPECT_TRUE(r.compliant()) << b.describe() << ": " << r.summary();
    }
  EXPECT_THROW(ou_family(0.0, 2.0, 2.0).drift(std::vector<double>{0.0}), ValidationError);
}

TEST(BuildNet, TwoOuAtomsCoverAtHalf) {
  const auto net = build_net(ou_family(0.0, 2.0, 2.0), config(1, 1, {0.5}));
  ASSERT_EQ(net.size(), 2u);
  EXPECT_NEAR(net.parameters[0][0], 0.5, 1e-9);
  EXPECT_NEAR(net.parameters[1][0], 1.5, 1e-9);
  // q_{1,1} q_{1,2} / n_{1,1} = 0.5 * 0.5 / 2
  EXPECT_DOUBLE_EQ(net.raw_weight(0), 0.125);
  EXPECT_NEAR(net.weights[0], 0.5, 1e-12);
}

TEST(BuildNet, WideBallsGiveOneAtomPerLevel) {
  const auto net = build_net(ou_family(0.0, 2.0, 2.0), config(2, 2, {10.0, 5.0}));
  for (const auto& row : net.level_counts)
    for (int n : row) EXPECT_EQ(n, 1);
  EXPECT_EQ(net.size(), 4u);
}

TEST(BuildNet, WeightBookkeeping) {
  const auto net = build_net(ou_family(0.0, 2.0, 2.0), config(2, 3, {0.5, 0.2, 0.1}));
  const double total = std::accumulate(net.weights.begin(), net.weights.end(), 0.0);
  EXPECT_NEAR(total, 1.0, 1e-12);
  double raw_total = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i) raw_total += net.raw_weight(i);
  for (std::size_t i = 0; i < net.size(); ++i) {
    EXPECT_GT(net.weights[i], 0.0);
    const auto& p = net.provenance[i];
    const int count = net.level_counts[p.m - 1][p.l - 1];
    const double expect = std::pow(2.0, -p.m) * std::pow(2.0, -p.l) / count;
    EXPECT_DOUBLE_EQ(net.raw_weight(i), expect);
    EXPECT_NEAR(net.weights[i], expect / raw_total, 1e-15);
    EXPECT_GE(p.n, 1);
    EXPECT_LE(p.n, count);
  }
  EXPECT_NEAR(net.truncation_mass, 1.0 - raw_total, 1e-12);
}

TEST(BuildNet, EveryMemberHasAnAtomWithinEpsAtEveryLevel) {
  const auto fam = ou_family(0.0, 2.0, 2.0);
  const auto net = build_net(fam, config(2, 3, {0.5, 0.2, 0.1}));
  EXPECT_TRUE(net.covering_certified);
  NormalStream rng(8);
  for (int k = 0; k < 200; ++k) {
    const double beta = 2.0 * (1.0 - rng.uniform());  // (0, 2]
    for (int m = 1; m <= 2; ++m)
      for (int l = 1; l <= 3; ++l) {
        double best = INFINITY;
        for (std::size_t i = 0; i < net.size(); ++i)
          if (net.provenance[i].m == m && net.provenance[i].l == l)
            best = std::min(best, sup_metric(net.atoms[i], ou(beta), m, 21));
        EXPECT_LE(best, net.eps_schedule[l - 1] * (1.0 + 1e-9)) << "beta " << beta << " m " << m << " l " << l;
      }
  }
}

TEST(BuildNet, TwoDimensionalGradientFamilyPassesAudit) {
  const auto fam = soft_family();
  const auto net = build_net(fam, config(1, 2, {0.5, 0.1}));
  EXPECT_TRUE(net.covering_certified);
  const auto audit = audit_covering(net, fam, 2000, 77);
  EXPECT_TRUE(audit.passed);
  EXPECT_LE(audit.worst_ratio, 1.0);
}

TEST(BuildNet, AtomCapNamesTheLevel) {
  auto c = config(1, 2, {0.5, 0.01});
  c.atom_cap = 20;
  try {
    build_net(ou_family(0.0, 2.0, 2.0), c);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("m=1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("l=2"), std::string::npos) << msg;
  }
}

TEST(BuildNet, RejectsMalformedSchedules) {
  EXPECT_THROW(build_net(ou_family(0.0, 2.0, 2.0), config(1, 2, {0.5})), ValidationError);
  EXPECT_THROW(build_net(ou_family(0.0, 2.0, 2.0), config(1, 2, {0.1, 0.5})), ValidationError);
}

TEST(PriorBallMass, AtomAtCentreAndWholeNet) {
  const auto net = build_net(ou_family(0.0, 2.0, 2.0), config(1, 1, {0.5}));
  const auto& b0 = net.atoms[0];
  const auto law0 = stationary_law(b0);
  const auto tiny = prior_ball_mass(net, b0, law0, 1e-9);
  EXPECT_GE(tiny.mass, net.weights[0]);
  EXPECT_GT(tiny.mass, 0.0);
  ASSERT_TRUE(tiny.minimal_level.has_value());
  EXPECT_EQ(prior_ball_mass(net, b0, law0, 1e6).mass, 1.0);
}

TEST(PriorBallMass, PrecomputedDistances) {
  const auto net = build_net(ou_family(0.0, 2.0, 2.0), config(1, 1, {0.5}));
  const std::vector<double> d{0.3, 0.05};
  const auto bm = prior_ball_mass(net, d, 0.1);
  EXPECT_DOUBLE_EQ(bm.mass, net.weights[1]);
  EXPECT_EQ(bm.atoms_inside, 1u);
  EXPECT_DOUBLE_EQ(bm.nearest_distance, 0.05);
}

TEST(TailBound, OuValuesAndMonotonicity) {
  const auto b0 = DriftSpec::ou(1.0, 1.0, {0.5, 1.0, 1.0});
  const auto law0 = stationary_law(b0);
  EXPECT_LT(tail_truncation_bound(b0, law0, 5, 1.0), 1e-8);
  // m = 0: 4 K^2 E(1 + |X|)^2 with X ~ N(0, 1/2), E|X| = 1/sqrt(pi), E X^2 = 1/2
  EXPECT_NEAR(tail_truncation_bound(b0, law0, 0, 1.0), 4.0 * (1.5 + 2.0 / std::sqrt(std::numbers::pi)),
              1e-6);
  double prev = INFINITY;
  for (int m = 0; m <= 6; ++m) {
    const double v = tail_truncation_bound(b0, law0, m, 1.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
}
