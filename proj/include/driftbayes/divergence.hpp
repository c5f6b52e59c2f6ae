#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "driftbayes/drift.hpp"
#include "driftbayes/transition.hpp"

namespace driftbayes {

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;  ///< 0 for deterministic quadrature
  std::vector<std::string> warnings;
};

/// int g dpi for a stationary law. d = 1 uses Simpson on the law's own grid,
/// d = 2, 3 a tensor Simpson rule on the law's box, d > 3 Metropolis samples.
Estimate integrate_stationary(const StationaryLaw& law,
                              const std::function<double(std::span<const double>)>& g,
                              std::size_t mc_samples = 20000, std::uint64_t seed = 7);

/// ||b - b0||_{2, mu_b0}.
Estimate l2_mu_distance(const DriftSpec& b, const DriftSpec& b0, const StationaryLaw& law0);

struct KlInvariant {
  double value = 0.0;
  double clamped = 0.0;  ///< magnitude of a negative quadrature result set to 0
  double std_error = 0.0;
};

/// K(mu_b0, mu_b) = int pi_b0 log(pi_b0 / pi_b).
KlInvariant kl_invariant(const StationaryLaw& law_b, const StationaryLaw& law_b0);

/// K(P_b0^(delta), P_b^(delta)) = K(mu_b0, mu_b) + (delta / 2) ||b - b0||^2.
double kl_path(double kl_inv, double l2_distance, double delta);

/// E_{x ~ pi_b0} KL(p_b0(delta, x, .) || p_b(delta, x, .)) by nested Monte
/// Carlo. The standard error is taken over outer draws.
Estimate kl_transition(const DriftSpec& b, const DriftSpec& b0, const StationaryLaw& law0,
                       double delta, const TransitionModel& model, std::size_t n_outer,
                       std::size_t n_inner, std::uint64_t seed);

/// Same quantity for two OU drifts from the closed-form Gaussian KL,
/// integrated against pi_b0 by quadrature.
double kl_transition_exact_ou(const DriftSpec& b, const DriftSpec& b0, const StationaryLaw& law0,
                              double delta);

/// Path-space KL by direct simulation under b0:
///   E[log pi_b0 / pi_b (X_0) - int (b - b0) dW + 0.5 int |b - b0|^2 ds].
Estimate kl_path_monte_carlo(const DriftSpec& b, const DriftSpec& b0, const StationaryLaw& law_b,
                             const StationaryLaw& law0, double delta, int substeps,
                             std::size_t n_paths, std::uint64_t seed);

struct DivergenceReport {
  double delta = 0.0;
  double l2_mu = 0.0;
  double kl_invariant = 0.0;
  double kl_invariant_clamped = 0.0;
  double kl_path = 0.0;
  double kl_transition = 0.0;
  double kl_transition_std_error = 0.0;
  std::vector<std::string> warnings;
};

struct DivergenceOptions {
  TransitionModel model;
  std::size_t n_outer = 2000;
  std::size_t n_inner = 200;
  std::uint64_t seed = 1;
};

DivergenceReport divergence_report(const DriftSpec& b, const DriftSpec& b0,
                                   const StationaryLaw& law_b, const StationaryLaw& law0,
                                   double delta, const DivergenceOptions& options);

}  // namespace driftbayes
