#pragma once

#include <cstdint>
#include <span>

#include "driftbayes/drift.hpp"
#include "driftbayes/simulate.hpp"
#include "driftbayes/transition.hpp"

// Data-parallel inner loops. Each kernel exists twice: `serial` is the
// reference, `parallel` distributes the same per-item body over OpenMP
// threads. Per-item work is seeded by split_seed(seed, item) and results are
// written to per-item slots, so both produce bitwise identical output for
// any thread count.
namespace driftbayes::kernels {

namespace serial {

/// Euler-Maruyama endpoints X_delta started at x; path p consumes the same
/// increments as simulate_brownian_bundle(dim, delta, substeps, n, seed).
/// Non-finite endpoints are left as they are (callers decide).
void euler_endpoints(const DriftSpec& spec, std::span<const double> x, double delta, int substeps,
                     std::uint64_t seed, std::span<double> endpoints);

/// Per-path Girsanov log weight
///   l = sum_k b(x + W_k) . dW_k - 0.5 sum_k |b(x + W_k)|^2 h   (left point)
/// and endpoint x + W_delta.
void girsanov_paths(const DriftSpec& spec, std::span<const double> x, double delta, int substeps,
                    std::uint64_t seed, std::span<double> log_weights,
                    std::span<double> endpoints);

/// Same as above on a stored bundle.
void girsanov_paths(const DriftSpec& spec, std::span<const double> x,
                    const BrownianBundle& bundle, std::span<double> log_weights,
                    std::span<double> endpoints);

/// Per-atom log-likelihood terms, one row of series.size() entries per atom:
/// log pi_j(X_0) (0 when include_initial is false), then
/// log p_j(delta, X_{i-1}, X_i). Transition i of a Monte-Carlo model uses
/// stream split_seed(model.seed, i) for all atoms (common random numbers).
/// An atom whose evaluation throws gets a NaN row. `laws` may be empty when
/// include_initial is false.
void atom_transition_terms(std::span<const DriftSpec> atoms,
                           std::span<const StationaryLaw* const> laws,
                           const ObservationSeries& series, const TransitionModel& model,
                           bool include_initial, std::span<double> out);

/// Row sums of atom_transition_terms (pairwise summation).
void atom_log_likelihoods(std::span<const DriftSpec> atoms,
                          std::span<const StationaryLaw* const> laws,
                          const ObservationSeries& series, const TransitionModel& model,
                          bool include_initial, std::span<double> out);

}  // namespace serial

namespace parallel {

void euler_endpoints(const DriftSpec& spec, std::span<const double> x, double delta, int substeps,
                     std::uint64_t seed, std::span<double> endpoints);
void girsanov_paths(const DriftSpec& spec, std::span<const double> x, double delta, int substeps,
                    std::uint64_t seed, std::span<double> log_weights,
                    std::span<double> endpoints);
void girsanov_paths(const DriftSpec& spec, std::span<const double> x,
                    const BrownianBundle& bundle, std::span<double> log_weights,
                    std::span<double> endpoints);
void atom_transition_terms(std::span<const DriftSpec> atoms,
                           std::span<const StationaryLaw* const> laws,
                           const ObservationSeries& series, const TransitionModel& model,
                           bool include_initial, std::span<double> out);
void atom_log_likelihoods(std::span<const DriftSpec> atoms,
                          std::span<const StationaryLaw* const> laws,
                          const ObservationSeries& series, const TransitionModel& model,
                          bool include_initial, std::span<double> out);

}  // namespace parallel

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();
/// Sets the OpenMP thread count; ignored without OpenMP.
void set_threads(int n);

}  // namespace driftbayes::kernels
