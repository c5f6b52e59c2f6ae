#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "driftbayes/drift.hpp"

namespace driftbayes {

/// A parametric collection of radial profiles f_theta, theta in a box, with
/// shared class constants. Member drifts are b(x) = -2 f'(|x|^2) x, declared
/// with growth constant K1 and dissipativity r = 2 r_f sqrt(M_f),
/// M = sqrt(M_f).
struct FunctionFamily {
  int dim = 1;
  ProfileKind kind = ProfileKind::quadratic;
  std::vector<double> lower;  ///< parameter box
  std::vector<double> upper;
  bool lower_open = false;    ///< first parameter excludes its lower bound
  double K1 = 2.0;
  double K2 = 2.0;
  double envelope_G = 0.0;  ///< polynomial envelope degree; stored only
  double M_f = 1.0;

  std::size_t parameter_dim() const { return lower.size(); }
  /// r_f of a member: the infimum of f' over s >= M_f.
  double tail_rate(std::span<const double> theta) const;
  PotentialSpec profile(std::span<const double> theta) const;
  /// Throws ValidationError when theta gives r_f <= 0.
  DriftSpec drift(std::span<const double> theta) const;
  /// Throws ValidationError on a malformed box.
  void check() const;
};

/// The OU family f_beta(s) = beta s / 2, beta in (lo, hi].
FunctionFamily ou_family(double lo, double hi, double K1, int dim = 1);

struct Provenance {
  int m = 1;
  int l = 1;
  int n = 1;
};

struct NetConfig {
  int m_max = 1;
  int l_max = 1;
  std::vector<double> eps_schedule;  ///< eps_1 > eps_2 > ...
  std::vector<double> q1;            ///< empty: q_j = 2^-j
  std::vector<double> q2;
  std::uint64_t seed = 1;
  /// Covering sample budget: 1000 x parameter dimension points, laid out as
  /// a tensor grid over the box.
  int samples_per_parameter = 1000;
  /// Nodes per axis of the grid on [-m, m]^d used by the sup metric.
  int metric_grid_points = 21;
  std::size_t atom_cap = 20000;
};

/// Discrete prior: weight q_{m,1} q_{l,2} / n_{m,l} on each atom of the
/// (m, l) covering, renormalized after truncation at (m_max, l_max).
struct PriorNet {
  std::vector<DriftSpec> atoms;
  std::vector<std::vector<double>> parameters;
  std::vector<double> weights;
  std::vector<Provenance> provenance;
  std::vector<double> eps_schedule;
  std::vector<double> q1;
  std::vector<double> q2;
  std::vector<std::vector<int>> level_counts;  ///< n_{m,l}, [m-1][l-1]
  int metric_grid_points = 21;
  double truncation_mass = 0.0;
  bool truncated = false;
  bool covering_certified = true;  ///< every level passed its fresh-sample audit
  std::vector<std::string> warnings;

  std::size_t size() const { return atoms.size(); }
  /// Unnormalized weight q_{m,1} q_{l,2} / n_{m,l} of atom i.
  double raw_weight(std::size_t i) const;
};

/// max_i sup_{x in [-m, m]^d} |b_{a,i}(x) - b_{b,i}(x)| on a tensor grid
/// (d <= 3) or on boundary and pseudo-random interior points (d > 3).
double sup_metric(const DriftSpec& a, const DriftSpec& b, int m, int grid_points);

/// Greedy sweep covering of a dense parameter sample at every (m, l),
/// certified by an audit on a fresh random sample.
PriorNet build_net(const FunctionFamily& family, const NetConfig& config);

struct CoveringAudit {
  bool passed = true;
  double worst_ratio = 0.0;  ///< max over samples and levels of dist / eps_l
  Provenance worst_level;
  std::size_t samples = 0;
};

/// Checks every (m, l) covering against `samples` uniform draws from the box.
CoveringAudit audit_covering(const PriorNet& net, const FunctionFamily& family,
                             std::size_t samples, std::uint64_t seed);

struct BallMass {
  double mass = 0.0;
  double nearest_distance = 0.0;
  std::size_t atoms_inside = 0;
  std::optional<std::pair<int, int>> minimal_level;  ///< smallest (m, l) with an atom inside
};

/// Prior mass of {b : ||b - b0||_{2, mu_b0} < radius}.
BallMass prior_ball_mass(const PriorNet& net, const DriftSpec& b0, const StationaryLaw& law0,
                         double radius);
/// Same, with precomputed L2(mu_b0) distances per atom.
BallMass prior_ball_mass(const PriorNet& net, std::span<const double> distances, double radius);

/// 4 K^2 d int_{|x| > m} (1 + |x|)^2 pi_b0(x) dx.
double tail_truncation_bound(const DriftSpec& b0, const StationaryLaw& law0, int m, double K);

}  // namespace driftbayes
