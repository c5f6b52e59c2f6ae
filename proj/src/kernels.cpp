#include "driftbayes/kernels.hpp"

#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "driftbayes/errors.hpp"
#include "driftbayes/rng.hpp"

namespace driftbayes::kernels {

namespace {

// Small fixed buffers avoid heap traffic in the per-path loops.
constexpr int kMaxDim = 16;

void check_dim(int d) {
  if (d > kMaxDim) throw ValidationError("Monte-Carlo kernels support d <= 16");
}

inline void euler_path(const DriftSpec& spec, std::span<const double> x, double h, double sqrt_h,
                       int substeps, std::uint64_t stream, double* out) {
  const int d = spec.dim();
  double pos[kMaxDim], b[kMaxDim];
  for (int j = 0; j < d; ++j) pos[j] = x[j];
  NormalStream rng(stream);
  for (int k = 0; k < substeps; ++k) {
    spec.evaluate(std::span<const double>(pos, d), std::span<double>(b, d));
    for (int j = 0; j < d; ++j) pos[j] += b[j] * h + sqrt_h * rng.normal();
  }
  for (int j = 0; j < d; ++j) out[j] = pos[j];
}

// `next_increment(j)` yields the next Brownian increment for coordinate j.
template <class Increments>
inline double girsanov_path(const DriftSpec& spec, std::span<const double> x, double h,
                            int substeps, Increments&& next_increment, double* end) {
  const int d = spec.dim();
  double pos[kMaxDim], b[kMaxDim];
  for (int j = 0; j < d; ++j) pos[j] = x[j];
  double log_w = 0.0;
  for (int k = 0; k < substeps; ++k) {
    spec.evaluate(std::span<const double>(pos, d), std::span<double>(b, d));
    double b2 = 0.0;
    for (int j = 0; j < d; ++j) {
      const double dw = next_increment(j);
      log_w += b[j] * dw;
      b2 += b[j] * b[j];
      pos[j] += dw;
    }
    log_w -= 0.5 * b2 * h;
  }
  for (int j = 0; j < d; ++j) end[j] = pos[j];
  return log_w;
}

inline double girsanov_stream_path(const DriftSpec& spec, std::span<const double> x, double h,
                                   int substeps, std::uint64_t stream, double* end) {
  NormalStream rng(stream);
  const double sd = std::sqrt(h);
  return girsanov_path(spec, x, h, substeps, [&](int) { return sd * rng.normal(); }, end);
}

inline double girsanov_bundle_path(const DriftSpec& spec, std::span<const double> x,
                                   const BrownianBundle& bundle, std::size_t p, double* end) {
  const auto inc = bundle.path(p);
  std::size_t k = 0;
  return girsanov_path(spec, x, bundle.delta / bundle.substeps, bundle.substeps,
                       [&](int) { return inc[k++]; }, end);
}

// Row layout: [log pi(X_0) or 0, log p(X_0, X_1), ..., log p(X_{n-1}, X_n)].
void atom_terms(const DriftSpec& atom, const StationaryLaw* law, const ObservationSeries& series,
                const TransitionModel& model, bool include_initial, double* row) {
  try {
    row[0] = include_initial ? (law ? law->log_density(series.at(0)) : NAN) : 0.0;
    for (std::size_t i = 1; i < series.size(); ++i)
      row[i] = log_transition_density(atom, model, series.delta, series.at(i - 1), series.at(i),
                                      split_seed(model.seed, i));
  } catch (const std::exception&) {
    for (std::size_t i = 0; i < series.size(); ++i) row[i] = NAN;
  }
}

}  // namespace

namespace serial {

void euler_endpoints(const DriftSpec& spec, std::span<const double> x, double delta, int substeps,
                     std::uint64_t seed, std::span<double> endpoints) {
  const int d = spec.dim();
  check_dim(d);
  const std::size_t n = endpoints.size() / d;
  const double h = delta / substeps;
  const double sqrt_h = std::sqrt(h);
  for (std::size_t p = 0; p < n; ++p)
    euler_path(spec, x, h, sqrt_h, substeps, split_seed(seed, p), endpoints.data() + p * d);
}

void girsanov_paths(const DriftSpec& spec, std::span<const double> x, double delta, int substeps,
                    std::uint64_t seed, std::span<double> log_weights,
                    std::span<double> endpoints) {
  const int d = spec.dim();
  check_dim(d);
  const double h = delta / substeps;
  for (std::size_t p = 0; p < log_weights.size(); ++p)
    log_weights[p] =
        girsanov_stream_path(spec, x, h, substeps, split_seed(seed, p), endpoints.data() + p * d);
}

void girsanov_paths(const DriftSpec& spec, std::span<const double> x,
                    const BrownianBundle& bundle, std::span<double> log_weights,
                    std::span<double> endpoints) {
  const int d = spec.dim();
  check_dim(d);
  for (std::size_t p = 0; p < log_weights.size(); ++p)
    log_weights[p] = girsanov_bundle_path(spec, x, bundle, p, endpoints.data() + p * d);
}

void atom_transition_terms(std::span<const DriftSpec> atoms,
                           std::span<const StationaryLaw* const> laws,
                           const ObservationSeries& series, const TransitionModel& model,
                           bool include_initial, std::span<double> out) {
  const std::size_t width = series.size();
  const auto n = static_cast<std::ptrdiff_t>(atoms.size());
  // Failures become NaN rows in both versions; callers decide how to react.
  for (std::ptrdiff_t j = 0; j < n; ++j)
    atom_terms(atoms[j], laws.empty() ? nullptr : laws[j], series, model, include_initial,
               out.data() + j * width);
}

void atom_log_likelihoods(std::span<const DriftSpec> atoms,
                          std::span<const StationaryLaw* const> laws,
                          const ObservationSeries& series, const TransitionModel& model,
                          bool include_initial, std::span<double> out) {
  const std::size_t width = series.size();
  std::vector<double> terms(atoms.size() * width);
  atom_transition_terms(atoms, laws, series, model, include_initial, terms);
  for (std::size_t j = 0; j < atoms.size(); ++j)
    out[j] = quad::pairwise_sum(std::span<const double>(terms).subspan(j * width, width));
}

}  // namespace serial

namespace parallel {

void euler_endpoints(const DriftSpec& spec, std::span<const double> x, double delta, int substeps,
                     std::uint64_t seed, std::span<double> endpoints) {
  const int d = spec.dim();
  check_dim(d);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(endpoints.size() / d);
  const double h = delta / substeps;
  const double sqrt_h = std::sqrt(h);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p)
    euler_path(spec, x, h, sqrt_h, substeps, split_seed(seed, p), endpoints.data() + p * d);
}

void girsanov_paths(const DriftSpec& spec, std::span<const double> x, double delta, int substeps,
                    std::uint64_t seed, std::span<double> log_weights,
                    std::span<double> endpoints) {
  const int d = spec.dim();
  check_dim(d);
  const double h = delta / substeps;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(log_weights.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p)
    log_weights[p] =
        girsanov_stream_path(spec, x, h, substeps, split_seed(seed, p), endpoints.data() + p * d);
}

void girsanov_paths(const DriftSpec& spec, std::span<const double> x,
                    const BrownianBundle& bundle, std::span<double> log_weights,
                    std::span<double> endpoints) {
  const int d = spec.dim();
  check_dim(d);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(log_weights.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p)
    log_weights[p] = girsanov_bundle_path(spec, x, bundle, p, endpoints.data() + p * d);
}

void atom_transition_terms(std::span<const DriftSpec> atoms,
                           std::span<const StationaryLaw* const> laws,
                           const ObservationSeries& series, const TransitionModel& model,
                           bool include_initial, std::span<double> out) {
  const std::size_t width = series.size();
  const auto n = static_cast<std::ptrdiff_t>(atoms.size());
  // Failures become NaN rows in both versions; callers decide how to react.
  #pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < n; ++j)
    atom_terms(atoms[j], laws.empty() ? nullptr : laws[j], series, model, include_initial,
               out.data() + j * width);
}

void atom_log_likelihoods(std::span<const DriftSpec> atoms,
                          std::span<const StationaryLaw* const> laws,
                          const ObservationSeries& series, const TransitionModel& model,
                          bool include_initial, std::span<double> out) {
  const std::size_t width = series.size();
  std::vector<double> terms(atoms.size() * width);
  atom_transition_terms(atoms, laws, series, model, include_initial, terms);
  for (std::size_t j = 0; j < atoms.size(); ++j)
    out[j] = quad::pairwise_sum(std::span<const double>(terms).subspan(j * width, width));
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace driftbayes::kernels
