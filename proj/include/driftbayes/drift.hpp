#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "driftbayes/quadrature.hpp"

namespace driftbayes {

/// Radial potential profiles f(s), s = |x|^2, with V(x) = f(|x|^2).
enum class ProfileKind {
  quadratic,       ///< f(s) = beta s / 2               params {beta}
  soft_quadratic,  ///< f(s) = a s / 2 + c sqrt(1 + s)  params {a, c}
};

std::string to_string(ProfileKind kind);
ProfileKind profile_kind_from_string(const std::string& name);

/// A C^3 radial profile together with its declared class constants.
struct PotentialSpec {
  ProfileKind kind = ProfileKind::quadratic;
  std::vector<double> params;
  double lipschitz_K2 = 1.0;  ///< bound on sup_s {4 s |f''| + 2 |f'|}
  double M_f = 1.0;           ///< f'(s) >= r_f for s >= M_f
  double r_f = 0.5;

  double f(double s) const;
  double f_prime(double s) const;
  double f_second(double s) const;
};

/// Dissipativity constants: b(x).x <= -r |x|^alpha for |x| >= M.
struct Dissipativity {
  double r = 1.0;
  double M = 1.0;
  double alpha = 1.0;
};

struct OuForm {
  double beta = 1.0;
};

/// Named one-dimensional drift families (see parametric_drift_ids()).
struct Parametric1dForm {
  std::string id;
  std::vector<double> params;
};

struct PotentialForm {
  PotentialSpec potential;
};

/// Piecewise-linear d = 1 drift; linear extrapolation with the boundary slope.
struct TabulatedForm {
  std::vector<double> grid;
  std::vector<double> values;
};

using DriftForm = std::variant<OuForm, Parametric1dForm, PotentialForm, TabulatedForm>;

/// Ids accepted by DriftSpec::parametric:
///   linear          b(x) = p0 - p1 x
///   tanh_well       b(x) = -p0 x + p1 tanh(x)
///   cubic_saturated b(x) = -p0 x - p1 x^3 / (1 + x^2)
std::vector<std::string> parametric_drift_ids();

/// A drift coefficient with its declared regularity class. Immutable.
class DriftSpec {
 public:
  static DriftSpec ou(double beta, double growth_K, Dissipativity diss, int dim = 1);
  static DriftSpec parametric(std::string id, std::vector<double> params, double growth_K,
                              Dissipativity diss);
  static DriftSpec potential(int dim, PotentialSpec potential, double growth_K,
                             Dissipativity diss);
  static DriftSpec tabulated(std::vector<double> grid, std::vector<double> values,
                             double growth_K, Dissipativity diss);

  int dim() const { return dim_; }
  double growth_K() const { return growth_K_; }
  const Dissipativity& dissipativity() const { return diss_; }
  const DriftForm& form() const { return form_; }

  /// b(x) into out; both spans have length dim().
  void evaluate(std::span<const double> x, std::span<double> out) const;
  /// Scalar evaluation for d = 1.
  double operator()(double x) const;

  /// beta when b(x) = -beta x (OU form, or quadratic potential profile).
  std::optional<double> ou_beta() const;
  const PotentialSpec* potential_spec() const;

  /// V(x) with b = -grad V, when the drift is of gradient form with a closed
  /// form potential (OU and potential forms).
  std::optional<double> potential_value(std::span<const double> x) const;

  /// Default truncation half-width M + 25 / r.
  double default_half_width() const { return diss_.M + 25.0 / diss_.r; }
  /// Explosion guard: 10 (M + 25 / r).
  double guard_radius() const { return 10.0 * default_half_width(); }

  std::string describe() const;

 private:
  DriftSpec(int dim, DriftForm form, double growth_K, Dissipativity diss);
  double scalar(double x) const;

  int dim_ = 1;
  DriftForm form_;
  double growth_K_ = 1.0;
  Dissipativity diss_;
};

/// Which class constraint a grid point violates.
enum class Constraint {
  growth,
  dissipativity,
  ou_beta_range,
  profile_slope,      ///< |f'(s)| <= K / 2
  profile_lipschitz,  ///< 4 s |f''| + 2 |f'| <= K_2
  profile_tail,       ///< f'(s) >= r_f for s >= M_f
};

std::string to_string(Constraint c);

struct Violation {
  Constraint constraint;
  std::vector<double> point;  ///< x (or {s} for profile constraints)
  double measured = 0.0;
  double bound = 0.0;
  double slack = 0.0;  ///< bound - measured (negative when violated)
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool compliant() const { return violations.empty(); }
  std::string summary(std::size_t max_items = 5) const;
};

/// Audit growth and dissipativity on a tensor grid over [-L, L]^d (d <= 3)
/// or on radial samples (d > 3). Profile constraints are audited for
/// potential forms on an s-grid over [0, L^2].
ValidationReport validate_drift(const DriftSpec& spec, double grid_halfwidth, int grid_points);

/// Stationary law pi_b. One-dimensional laws keep the quadrature table used
/// for normalization, which also backs inverse-CDF sampling.
class StationaryLaw {
 public:
  struct Quadrature {
    double half_width = 0.0;
    int nodes = 0;
    double std_error = 0.0;  ///< non-zero only for Monte-Carlo normalizers
    bool monte_carlo = false;
  };

  int dim() const { return spec_.dim(); }
  const DriftSpec& spec() const { return spec_; }
  double log_normalizer() const { return log_normalizer_; }
  const Quadrature& quadrature() const { return quadrature_; }

  double log_density(std::span<const double> x) const;
  double density(std::span<const double> x) const;
  double log_density(double x) const;
  double density(double x) const;

  /// d = 1 tables on the quadrature grid.
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> cdf() const { return cdf_; }

  /// 2 * int_0^x b for d = 1 (the unnormalized log density).
  double twice_cumulative_drift(double x) const;

 private:
  friend StationaryLaw stationary_density_1d(const DriftSpec&, const QuadratureConfig&);
  friend StationaryLaw stationary_density_potential(const DriftSpec&, const QuadratureConfig&);

  explicit StationaryLaw(DriftSpec spec) : spec_(std::move(spec)) {}
  void build_cdf(std::span<const double> log_unnormalized);

  DriftSpec spec_;
  double log_normalizer_ = 0.0;
  Quadrature quadrature_;
  bool gradient_path_ = false;
  std::vector<double> nodes_;
  std::vector<double> cumulative_;  ///< int_0^{x_k} b at nodes (integral path)
  std::vector<double> cdf_;
};

/// pi_b(x) = exp(2 int_0^x b) / m_b(R) by composite Simpson with node doubling.
StationaryLaw stationary_density_1d(const DriftSpec& spec, const QuadratureConfig& quadrature = {});

/// pi_b = exp(-2 V) / C_b for potential (and OU) forms: tensor Simpson for
/// d <= 3, Gaussian importance sampling for d > 3.
StationaryLaw stationary_density_potential(const DriftSpec& spec,
                                           const QuadratureConfig& quadrature = {});

/// Dispatches to the 1-d route for d = 1 and the potential route otherwise.
StationaryLaw stationary_law(const DriftSpec& spec, const QuadratureConfig& quadrature = {});

/// s_b(y) = int_0^y exp(-2 int_0^z b) dz, d = 1.
double scale_function(const DriftSpec& spec, double y);

struct StationarySample {
  int dim = 1;
  std::vector<double> points;  ///< row-major, n x dim
  double acceptance_rate = 1.0;
  std::vector<std::string> warnings;

  std::size_t size() const { return dim > 0 ? points.size() / dim : 0; }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(points).subspan(i * dim, dim);
  }
};

/// Draws from pi_b: inverse CDF for d = 1, random-walk Metropolis on
/// exp(-2 V) (step 0.5) for d >= 2.
StationarySample sample_stationary(const DriftSpec& spec, const StationaryLaw& law, std::size_t n,
                                   std::uint64_t seed);

}  // namespace driftbayes
