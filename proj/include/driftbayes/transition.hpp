#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftbayes/drift.hpp"

namespace driftbayes {

/// Bounded test functions f used by transition operators and the weak
/// topology. In d > 1 the function is the product of the scalar profile over
/// coordinates, so the sup bound carries over.
///
///   cos, sin, tanh             ; sup 1
///   gauss-bump(w = 1)          exp(-(x / w)^2)
///   indicator-smoothed(a, b, s = 0.1)
///                              logistic((x - a) / s) * logistic((b - x) / s)
///   const(c)                   c, |c| <= 1
class TestFunction {
 public:
  static TestFunction make(const std::string& name, std::vector<double> params = {});
  static std::vector<std::string> registry();

  const std::string& name() const { return name_; }
  const std::vector<double>& params() const { return params_; }
  double sup_bound() const { return sup_; }

  double operator()(std::span<const double> x) const;
  double scalar(double x) const;
  /// f'(x) of the scalar profile.
  double derivative(double x) const;
  /// E[g(mean + sd Z)] for the scalar profile, by composite Gauss-Legendre.
  double gaussian_expectation(double mean, double sd) const;

 private:
  TestFunction() = default;
  std::string name_;
  std::vector<double> params_;
  double sup_ = 1.0;
};

enum class TransitionMethod { exact_ou, euler_gaussian, mc_kde, girsanov_mc };

std::string to_string(TransitionMethod m);
TransitionMethod transition_method_from_string(const std::string& name);

/// How p_b(delta, x, y) and P_delta^b f(x) are evaluated.
struct TransitionModel {
  TransitionMethod method = TransitionMethod::exact_ou;
  std::size_t n_paths = 10000;  ///< Monte-Carlo methods only
  int substeps = 64;
  double bandwidth = 0.0;  ///< mc_kde; 0 selects Silverman's rule
  std::uint64_t seed = 0;

  bool is_monte_carlo() const {
    return method == TransitionMethod::mc_kde || method == TransitionMethod::girsanov_mc;
  }
  /// Throws ValidationError when the model cannot serve this drift.
  void check_compatible(const DriftSpec& spec) const;
};

struct DensityEstimate {
  double value = 0.0;
  double log_value = 0.0;
  std::vector<std::string> warnings;
};

struct OperatorEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double effective_sample_size = 0.0;
  std::vector<std::string> warnings;
};

/// Log densities are floored at log(1e-300).
inline constexpr double kLogDensityFloor = -690.7755278982137;

DensityEstimate transition_density(const DriftSpec& spec, const TransitionModel& model,
                                   double delta, std::span<const double> x,
                                   std::span<const double> y);
DensityEstimate transition_density(const DriftSpec& spec, const TransitionModel& model,
                                   double delta, double x, double y);

/// log p_b(delta, x, y). Monte-Carlo methods use `stream_seed` instead of
/// model.seed, which lets likelihood code share random numbers across drifts.
double log_transition_density(const DriftSpec& spec, const TransitionModel& model, double delta,
                              std::span<const double> x, std::span<const double> y,
                              std::uint64_t stream_seed);

OperatorEstimate transition_operator(const DriftSpec& spec, const TransitionModel& model,
                                     double delta, const TestFunction& f,
                                     std::span<const double> x);
OperatorEstimate transition_operator(const DriftSpec& spec, const TransitionModel& model,
                                     double delta, const TestFunction& f, double x);

/// Finite measure nu as positive-weight nodes, test function f and radius eps.
struct TopologyProbe {
  TestFunction f = TestFunction::make("cos");
  int dim = 1;
  std::vector<double> nodes;  ///< row-major
  std::vector<double> weights;
  double epsilon = 0.1;

  std::size_t size() const { return weights.size(); }
  std::span<const double> node(std::size_t i) const {
    return std::span<const double>(nodes).subspan(i * dim, dim);
  }
  double total_mass() const;
  /// Positive weights, finite positive mass, eps <= 2 nu(R).
  void validate() const;

  /// Tensor grid on [-L, L]^dim with equal weights summing to `total_mass`.
  static TopologyProbe uniform_grid(TestFunction f, int dim, double half_width,
                                    int points_per_axis, double total_mass, double epsilon);
  /// CSV "x1[,x2,...],weight" with a header row.
  static TopologyProbe from_csv(std::istream& in, TestFunction f, double epsilon);
};

struct WeakDistance {
  double value = 0.0;
  double std_error = 0.0;
  std::vector<std::string> warnings;
};

/// sum_i w_i |P^a f(x_i) - P^b f(x_i)|. Monte-Carlo methods reuse the same
/// random numbers for both drifts at each node.
WeakDistance weak_distance(const DriftSpec& a, const DriftSpec& b, const TransitionModel& model,
                           double delta, const TopologyProbe& probe);

struct IdentifiabilityReport {
  double max_gap = 0.0;
  std::vector<double> argmax_point;
  std::string argmax_function;
  double std_error_at_max = 0.0;
  double max_z = 0.0;  ///< largest gap / std.err. over all cases
  bool separated = false;
};

/// Largest operator gap over a function family and a grid of start points.
/// Monte-Carlo methods evaluate the two drifts on independent streams, so the
/// gap is compared against its own noise; "separated" means some case exceeds
/// five standard errors.
IdentifiabilityReport identifiability_probe(const DriftSpec& a, const DriftSpec& b,
                                            const TransitionModel& model, double delta,
                                            std::span<const TestFunction> family,
                                            std::span<const std::vector<double>> grid);

struct SmallDeltaRow {
  double delta = 0.0;
  double residual = 0.0;
};

struct SmallDeltaReport {
  std::vector<SmallDeltaRow> rows;
  std::optional<double> slope;  ///< least-squares log-log slope; empty if a residual is 0
};

/// R(delta) = |P^a f(x) - P^b f(x) - delta (a(x) - b(x)) f'(x)| for each
/// delta (d = 1, exact_ou or euler_gaussian).
SmallDeltaReport small_delta_check(const DriftSpec& a, const DriftSpec& b,
                                   const TransitionModel& model, const TestFunction& f, double x,
                                   std::span<const double> deltas);

/// For each h: max over the drift family and grid points x of
/// |P f(x + h) - P f(x)| (d = 1).
std::vector<double> equicontinuity_probe(std::span<const DriftSpec> family,
                                         const TransitionModel& model, double delta,
                                         const TestFunction& f, std::span<const double> points,
                                         std::span<const double> hs);

struct CellGap {
  double lo = 0.0;
  double hi = 0.0;
  double max_positive = 0.0;  ///< max of (P^a f - P^b f)^+ over the cell
  double max_negative = 0.0;  ///< max of (P^a f - P^b f)^- over the cell
};

/// Operator gaps on an interval partition of [-L, L] (d = 1). A diagnostic
/// of where two drifts differ weakly, evaluated on `points_per_cell` nodes.
std::vector<CellGap> partition_gap_diagnostic(const DriftSpec& a, const DriftSpec& b,
                                              const TransitionModel& model, double delta,
                                              const TestFunction& f, double half_width,
                                              int cells, int points_per_cell);

}  // namespace driftbayes
