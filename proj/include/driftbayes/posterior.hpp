#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "driftbayes/prior_net.hpp"
#include "driftbayes/simulate.hpp"
#include "driftbayes/transition.hpp"

namespace driftbayes {

struct LikelihoodOptions {
  TransitionModel model;
  bool include_initial = true;  ///< include the log pi_b(X_0) factor
  bool parallel = true;
  QuadratureConfig quadrature;
};

/// log L_n(b) = log pi_b(X_0) - log pi_b0(X_0)
///              + sum_i [log p_b - log p_b0](delta, X_{i-1}, X_i).
/// The initial factor is skipped when either law is null. Monte-Carlo
/// models share streams between b and b0. Throws EvaluationError naming the
/// first transition index whose term is not finite.
double log_likelihood_ratio(const DriftSpec& b, const DriftSpec& b0,
                            const ObservationSeries& series, const TransitionModel& model,
                            const StationaryLaw* law_b, const StationaryLaw* law_b0);

struct PosteriorResult {
  std::vector<double> weights;
  std::vector<double> log_weights_unnormalized;  ///< log prior + log ratio; -inf if dropped
  std::vector<double> log_likelihood_ratios;     ///< against the reference; NaN if failed
  std::size_t n_used = 0;                        ///< transitions used
  std::string reference;                         ///< "self-normalizing" or the drift
  TransitionModel model;
  std::size_t map_index = 0;
  double effective_atoms = 0.0;  ///< 1 / sum w^2
  std::vector<std::string> warnings;
};

/// Posterior over the net atoms. Ratios are taken against `reference`, or
/// against the first atom with a finite likelihood when it is empty. With
/// zero transitions the prior is returned unchanged. Atoms with a non-finite
/// likelihood get weight 0 and a warning; if every atom fails,
/// EvaluationError is thrown.
PosteriorResult compute_posterior(const PriorNet& net, const ObservationSeries& series,
                                  const LikelihoodOptions& options,
                                  const std::optional<DriftSpec>& reference = std::nullopt);

/// Posterior from per-atom log-likelihoods (any common additive constant).
PosteriorResult posterior_from_log_likelihoods(const PriorNet& net,
                                               std::span<const double> log_likelihoods,
                                               std::size_t transitions);

/// Weak neighbourhood {b : sum_i w_i |P^b f - P^b0 f|(x_i) < eps}.
struct WeakNeighborhood {
  TopologyProbe probe;
  TransitionModel model;
  double delta = 1.0;
};

/// L2(mu_b0) ball of the given radius.
struct L2Neighborhood {
  double radius = 0.2;
};

using Neighborhood = std::variant<WeakNeighborhood, L2Neighborhood>;

struct ComplementMass {
  double mass = 0.0;
  std::vector<double> distances;  ///< per atom, in the criterion's metric
  std::vector<char> outside;
};

/// Per-atom distance to b0 under the criterion and whether it is outside.
ComplementMass neighborhood_distances(const PriorNet& net, const DriftSpec& b0,
                                      const StationaryLaw& law0, const Neighborhood& hood);

/// Posterior mass of the complement of the neighbourhood of b0.
ComplementMass neighborhood_complement_mass(const PosteriorResult& posterior, const PriorNet& net,
                                            const DriftSpec& b0, const StationaryLaw& law0,
                                            const Neighborhood& hood);

struct CurveConfig {
  std::vector<std::size_t> sample_sizes;
  std::size_t replications = 20;
  std::uint64_t seed = 1;
  double delta = 1.0;
  SimScheme scheme;
  LikelihoodOptions likelihood;
};

struct CurveRow {
  std::size_t n = 0;
  double mean = 0.0;
  double std_error = 0.0;
};

struct ConsistencyCurve {
  std::vector<CurveRow> rows;
  std::vector<std::vector<double>> masses;  ///< [replication][size index]
  std::vector<std::string> warnings;
};

/// Complement mass as a function of n. Replication r simulates one series
/// of max(n) transitions from b0 with seed split_seed(seed, r) and evaluates
/// nested prefixes of it.
ConsistencyCurve consistency_curve(const DriftSpec& b0, const StationaryLaw& law0,
                                   const PriorNet& net, const Neighborhood& hood,
                                   const CurveConfig& config);

/// log L_n(b) along nested prefixes of series simulated from b0:
/// log_ratios[r][k] is the value at n = ns[k] on replication r, whose series
/// uses seed split_seed(seed, r). Includes the initial factor.
struct LikelihoodRatioPaths {
  std::vector<std::size_t> ns;
  std::vector<std::vector<double>> log_ratios;
};

LikelihoodRatioPaths likelihood_ratio_paths(const DriftSpec& b, const DriftSpec& b0,
                                            const StationaryLaw& law_b, const StationaryLaw& law0,
                                            const TransitionModel& model, double delta,
                                            std::span<const std::size_t> ns,
                                            std::size_t replications, const SimScheme& scheme,
                                            std::uint64_t seed);

}  // namespace driftbayes
