#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "driftbayes/drift.hpp"

namespace driftbayes {

enum class SchemeKind { exact_ou, euler };

struct SimScheme {
  SchemeKind kind = SchemeKind::euler;
  int substeps = 64;  ///< Euler steps per observation interval
};

std::string to_string(SchemeKind kind);
SchemeKind scheme_kind_from_string(const std::string& name);

struct SeriesOrigin {
  enum class Kind { simulated, ingested };
  Kind kind = Kind::simulated;
  std::uint64_t seed = 0;
  SimScheme scheme;
  std::string file_id;
};

/// X_0, X_delta, ..., X_{n delta}; points stored row-major.
struct ObservationSeries {
  double delta = 1.0;
  int dim = 1;
  std::vector<double> points;
  SeriesOrigin origin;

  std::size_t size() const { return points.size() / static_cast<std::size_t>(dim); }
  std::size_t transitions() const { return size() == 0 ? 0 : size() - 1; }
  std::span<const double> at(std::size_t i) const {
    return std::span<const double>(points).subspan(i * dim, dim);
  }
  /// First n + 1 observations.
  ObservationSeries prefix(std::size_t n) const;
  /// Throws ValidationError when delta, length or finiteness invariants fail.
  void check() const;
};

/// Simulates n transitions started from the stationary law. X_0 uses stream 0
/// of `seed`, the path noise stream 1 (see split_seed).
ObservationSeries simulate_series(const DriftSpec& spec, const StationaryLaw& law, double delta,
                                  std::size_t n, const SimScheme& scheme, std::uint64_t seed);

/// Brownian increments for Girsanov Monte Carlo. Path p draws its
/// substeps x dim N(0, delta / substeps) increments, step-major, from stream
/// split_seed(seed, p); the Monte-Carlo kernels regenerate exactly these.
struct BrownianBundle {
  int dim = 1;
  int substeps = 1;
  std::size_t n_paths = 0;
  double delta = 1.0;
  std::vector<double> increments;

  std::span<const double> path(std::size_t p) const {
    const std::size_t stride = static_cast<std::size_t>(substeps) * dim;
    return std::span<const double>(increments).subspan(p * stride, stride);
  }
};

BrownianBundle simulate_brownian_bundle(int dim, double delta, int substeps, std::size_t n_paths,
                                        std::uint64_t seed);

/// CSV with header "t,x1[,x2,...]", one row per observation, printed with
/// 17 significant digits.
void write_series_csv(const ObservationSeries& series, std::ostream& out);
void write_series_csv(const ObservationSeries& series, const std::string& path);

/// Reads the CSV contract above. Times must equal i * delta within 1e-9
/// relative tolerance; the offending row (1-based, header excluded) is named
/// on rejection.
ObservationSeries read_series_csv(std::istream& in, double delta_declared,
                                  const std::string& file_id = "<stream>");
ObservationSeries ingest_csv(const std::string& path, double delta_declared);

}  // namespace driftbayes
