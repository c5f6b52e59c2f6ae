// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Thresholds and runtime limits are fixed here, never relaxed.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "driftbayes/divergence.hpp"
#include "driftbayes/drift.hpp"
#include "driftbayes/io.hpp"
#include "driftbayes/posterior.hpp"
#include "driftbayes/prior_net.hpp"
#include "driftbayes/rng.hpp"
#include "driftbayes/simulate.hpp"
#include "driftbayes/transition.hpp"

#ifndef DRIFTBAYES_SOURCE_DIR
#define DRIFTBAYES_SOURCE_DIR "."
#endif

using namespace driftbayes;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

DriftSpec ou(double beta) { return DriftSpec::ou(beta, 2.0 * std::max(beta, 1.0), {beta, 1.0, 1.0}); }

double normal_pdf(double x, double var) {
  return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

io::Json config(const std::string& name) {
  return io::read_json_file(std::string(DRIFTBAYES_SOURCE_DIR) + "/configs/" + name);
}

Outcome c1() {
  double worst = 0.0;
  for (double beta : {0.5, 1.0, 2.0}) {
    const DriftSpec b = ou(beta);
    const StationaryLaw law = stationary_density_1d(b);
    for (int i = 0; i <= 800; ++i) {
      const double x = -4.0 + 0.01 * i;
      worst = std::max(worst, std::abs(law.density(x) - normal_pdf(x, 1.0 / (2.0 * beta))));
    }
  }
  return {worst < 1e-4, fmt("max abs error %.3g (limit 1e-4)", worst)};
}

Outcome c2() {
  NormalStream rng(20260101);
  const char* names[] = {"cos", "sin", "tanh", "gauss-bump"};
  double worst_rel = 0.0, worst_z = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double beta = 0.5 + 1.5 * rng.uniform();
    const double delta = k % 2 == 0 ? 0.5 : 1.0;
    const double x = -2.0 + 4.0 * rng.uniform();
    const double mean = x * std::exp(-beta * delta);
    const double var = (1.0 - std::exp(-2.0 * beta * delta)) / (2.0 * beta);
    const double y = mean + (-1.0 + 2.0 * rng.uniform()) * std::sqrt(var);
    const DriftSpec b = ou(beta);

    TransitionModel exact;
    // 256 Euler steps keep the discretization bias well below the MC error
    TransitionModel kde{TransitionMethod::mc_kde, 100000, 256, 0.0, split_seed(1, k)};
    TransitionModel gir{TransitionMethod::girsanov_mc, 100000, 256, 0.0, split_seed(2, k)};

    const double p = normal_pdf(y - mean, var);
    const double p_kde = transition_density(b, kde, delta, x, y).value;
    worst_rel = std::max(worst_rel, std::abs(p_kde - p) / p);

    const TestFunction f = TestFunction::make(names[k % 4]);
    const double ref = transition_operator(b, exact, delta, f, x).value;
    for (const TransitionModel& m : {kde, gir}) {
      const OperatorEstimate e = transition_operator(b, m, delta, f, x);
      // exact reference carries no error, so the combined error is the MC one
      worst_z = std::max(worst_z, std::abs(e.value - ref) / e.std_error);
    }
  }
  return {worst_rel < 0.02 && worst_z < 3.0,
          fmt("density rel err %.4f (limit 0.02), operator max z %.2f (limit 3)", worst_rel, worst_z)};
}

struct C3Setup {
  DriftSpec b0;
  StationaryLaw law0;
  FunctionFamily family;
  PriorNet net;
  double radius;
  double delta;
  io::Json cfg;
};

C3Setup c3_setup() {
  io::Json cfg = config("ou_experiment.json");
  DriftSpec b0 = io::drift_from_json(cfg.at("true_drift"), "true_drift");
  StationaryLaw law0 = stationary_law(b0);
  FunctionFamily fam = io::family_from_json(cfg.at("family"));
  NetConfig nc = io::net_config_from_json(cfg.at("net"));
  nc.seed = split_seed(cfg.at("seed").get<std::uint64_t>(), 2);
  PriorNet net = build_net(fam, nc);
  return {std::move(b0), std::move(law0), std::move(fam), std::move(net),
          cfg.at("criterion").at("radius").get<double>(), cfg.at("delta").get<double>(), cfg};
}

Outcome c3(const C3Setup& s) {
  if (s.net.size() < 20) return {false, fmt("net has %.0f atoms (need >= 20)", double(s.net.size()))};
  CurveConfig cc;
  cc.sample_sizes = {0, 200, 2000};
  cc.replications = 20;
  cc.seed = split_seed(s.cfg.at("seed").get<std::uint64_t>(), 0);
  cc.delta = s.delta;
  cc.scheme.kind = SchemeKind::exact_ou;
  cc.likelihood.model.method = TransitionMethod::exact_ou;
  const ConsistencyCurve curve =
      consistency_curve(s.b0, s.law0, s.net, L2Neighborhood{s.radius}, cc);
  const double m200 = curve.rows[1].mean, m2000 = curve.rows[2].mean;
  return {m2000 < 0.05 && m2000 < m200,
          fmt("%.0f atoms; mass n=200 %.4f, n=2000 %.3g (limit 0.05)", double(s.net.size()), m200,
              m2000)};
}

Outcome c4() {
  const double pairs[10][2] = {{1.2, 1.0}, {0.8, 1.0}, {1.5, 1.0}, {2.0, 1.0}, {0.5, 1.0},
                               {1.0, 1.5}, {1.1, 0.7}, {0.6, 0.9}, {1.8, 1.3}, {1.0, 2.0}};
  const double delta = 0.5;
  TransitionModel exact;
  double worst_ineq = -1e300, worst_identity = 0.0, worst_z = 0.0;
  for (int k = 0; k < 10; ++k) {
    const DriftSpec b = ou(pairs[k][0]), b0 = ou(pairs[k][1]);
    const StationaryLaw lb = stationary_law(b), l0 = stationary_law(b0);
    const double l2 = l2_mu_distance(b, b0, l0).value;
    const KlInvariant ki = kl_invariant(lb, l0);
    const double kp = kl_path(ki.value, l2, delta);
    worst_identity = std::max(worst_identity, std::abs(kp - (ki.value + 0.5 * delta * l2 * l2)));

    const Estimate kt = kl_transition(b, b0, l0, delta, exact, 2000, 200, split_seed(3, k));
    worst_ineq = std::max(worst_ineq, kt.value - (0.5 * delta * l2 * l2 + 3.0 * kt.std_error));

    const Estimate mc = kl_path_monte_carlo(b, b0, lb, l0, delta, 64, 20000, split_seed(4, k));
    worst_z = std::max(worst_z, std::abs(mc.value - kp) / mc.std_error);
  }
  return {worst_ineq <= 0.0 && worst_identity < 1e-9 && worst_z < 3.0,
          fmt("max(kl_transition - bound) %.3g, identity err %.2g, path MC max z %.2f",
              worst_ineq, worst_identity, worst_z)};
}

Outcome c5(const C3Setup& s) {
  std::string detail;
  bool ok = true;
  const CoveringAudit a1 = audit_covering(s.net, s.family, 5000, 991);
  ok = ok && a1.passed && s.net.covering_certified;
  for (double rho : {0.5, 0.1, 0.02}) {
    const BallMass bm = prior_ball_mass(s.net, s.b0, s.law0, rho);
    ok = ok && bm.mass > 0.0;
    detail += fmt("1d rho=%.2f mass %.3g; ", rho, bm.mass);
  }

  const io::Json cfg = config("net_gradient_2d.json");
  const FunctionFamily fam = io::family_from_json(cfg.at("family"));
  NetConfig nc = io::net_config_from_json(cfg.at("net"));
  nc.seed = split_seed(cfg.at("seed").get<std::uint64_t>(), 2);
  const PriorNet net = build_net(fam, nc);
  const std::vector<double> theta0{1.0, 0.2};
  const DriftSpec b0 = fam.drift(theta0);
  const StationaryLaw law0 = stationary_law(b0);
  const CoveringAudit a2 = audit_covering(net, fam, 5000, 992);
  ok = ok && a2.passed && net.covering_certified;
  for (double rho : {0.5, 0.1, 0.02}) {
    const BallMass bm = prior_ball_mass(net, b0, law0, rho);
    ok = ok && bm.mass > 0.0;
    detail += fmt("2d rho=%.2f mass %.3g; ", rho, bm.mass);
  }
  detail += fmt("audits %.4f / %.4f (limit 1)", a1.worst_ratio, a2.worst_ratio);
  return {ok, detail};
}

Outcome c6() {
  TransitionModel mc{TransitionMethod::girsanov_mc, 20000, 32, 0.0, 0};
  const std::vector<TestFunction> family{TestFunction::make("cos"), TestFunction::make("tanh"),
                                         TestFunction::make("gauss-bump")};
  std::vector<std::vector<double>> grid;
  for (int i = 0; i < 5; ++i) grid.push_back({-2.0 + i});
  mc.seed = 31;
  const IdentifiabilityReport sep = identifiability_probe(ou(1.0), ou(1.5), mc, 0.5, family, grid);
  bool self_flagged = false;
  double self_z = 0.0;
  for (std::uint64_t seed : {41, 42, 43}) {
    mc.seed = seed;
    const IdentifiabilityReport r = identifiability_probe(ou(1.0), ou(1.0), mc, 0.5, family, grid);
    self_flagged = self_flagged || r.separated;
    self_z = std::max(self_z, r.max_z);
  }
  TransitionModel exact;
  const IdentifiabilityReport self_exact =
      identifiability_probe(ou(1.0), ou(1.0), exact, 0.5, family, grid);
  const double z = sep.max_gap / sep.std_error_at_max;
  return {sep.separated && z > 5.0 && !self_flagged && self_exact.max_gap == 0.0,
          fmt("ou(1) vs ou(1.5) gap/se %.1f; self max z %.2f, exact self gap %.1g", z, self_z,
              self_exact.max_gap)};
}

Outcome c7() {
  TransitionModel exact;
  const std::vector<double> deltas{0.2, 0.1, 0.05, 0.025};
  const SmallDeltaReport r =
      small_delta_check(ou(1.0), ou(1.2), exact, TestFunction::make("sin"), 1.0, deltas);
  const double slope = r.slope.value_or(0.0);
  return {r.slope.has_value() && slope >= 1.5, fmt("log-log slope %.3f (limit 1.5)", slope)};
}

Outcome c8() {
  const DriftSpec b = ou(1.3), b0 = ou(1.0);
  const StationaryLaw lb = stationary_law(b), l0 = stationary_law(b0);
  TransitionModel exact;
  SimScheme scheme{SchemeKind::exact_ou, 1};
  const std::vector<std::size_t> ns{1, 2, 4, 8};
  const std::size_t R = 200;
  const LikelihoodRatioPaths paths =
      likelihood_ratio_paths(b, b0, lb, l0, exact, 0.5, ns, R, scheme, 808);

  auto mean_se = [&](const std::function<double(std::size_t)>& v) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      const double x = v(r);
      s += x;
      s2 += x * x;
    }
    const double m = s / R;
    return std::pair{m, std::sqrt(std::max(0.0, s2 / R - m * m) / (R - 1))};
  };

  const auto [m1, se1] = mean_se([&](std::size_t r) { return std::exp(paths.log_ratios[r][0]); });
  bool ok = std::abs(m1 - 1.0) <= 3.0 * se1;
  double worst = -1e300;
  for (std::size_t k = 0; k + 1 < ns.size(); ++k) {
    // paired increments of sqrt(L_n) along the same replications
    const auto [d, se] = mean_se([&](std::size_t r) {
      return std::exp(0.5 * paths.log_ratios[r][k + 1]) - std::exp(0.5 * paths.log_ratios[r][k]);
    });
    worst = std::max(worst, d / std::max(se, 1e-300));
    ok = ok && d <= 3.0 * se;
  }
  return {ok, fmt("mean L_1 %.4f +- %.4f; max increment of sqrt(L_n) %.2f se (limit 3)", m1, se1,
                  worst)};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  int failures = 0;
  auto run = [&](const char* id, const char* title, double limit_s, const std::function<Outcome()>& fn) {
    const auto t0 = clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    const bool pass = o.pass && secs < limit_s;
    if (!pass) ++failures;
    std::printf("%s %s %s: %s [%.2f s, limit %.0f s]\n", id, pass ? "PASS" : "FAIL", title,
                o.detail.c_str(), secs, limit_s);
    std::fflush(stdout);
  };

  run("C1", "stationary law oracle", 5, c1);
  run("C2", "transition oracles", 120, c2);

  std::optional<C3Setup> setup;
  const auto t0 = clock::now();
  std::string setup_error;
  try {
    setup.emplace(c3_setup());
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  const double setup_s = std::chrono::duration<double>(clock::now() - t0).count();
  auto with_setup = [&](Outcome (*fn)(const C3Setup&)) {
    return [&, fn]() -> Outcome {
      if (!setup) return {false, "net construction failed: " + setup_error};
      return fn(*setup);
    };
  };
  // net construction is charged to both criteria that use it
  run("C3", "posterior consistency", 600 - setup_s, with_setup(c3));
  run("C4", "KL ledger", 120, c4);
  run("C5", "prior mass condition", 120 - setup_s, with_setup(c5));
  run("C6", "identifiability", 60, c6);
  run("C7", "small-delta topology", 60, c7);
  run("C8", "likelihood-ratio martingale checks", 180, c8);

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
