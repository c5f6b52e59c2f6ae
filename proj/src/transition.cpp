#include "driftbayes/transition.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

#include "driftbayes/errors.hpp"
#include "driftbayes/kernels.hpp"
#include "driftbayes/rng.hpp"

namespace driftbayes {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double ou_variance(double beta, double delta) {
  return -std::expm1(-2.0 * beta * delta) / (2.0 * beta);
}

// Gaussian mean/variance of the one-step law for the closed-form methods.
struct GaussianStep {
  std::vector<double> mean;
  double variance = 0.0;
};

GaussianStep gaussian_step(const DriftSpec& spec, const TransitionModel& model, double delta,
                           std::span<const double> x) {
  const int d = spec.dim();
  GaussianStep g;
  g.mean.resize(d);
  if (model.method == TransitionMethod::exact_ou) {
    const auto ou_beta = spec.ou_beta();
    if (!ou_beta)
      throw ValidationError("exact_ou transition model requires an OU drift, got " + spec.describe());
    const double beta = *ou_beta;
    const double rho = std::exp(-beta * delta);
    for (int j = 0; j < d; ++j) g.mean[j] = x[j] * rho;
    g.variance = ou_variance(beta, delta);
  } else {
    std::vector<double> b(d);
    spec.evaluate(x, b);
    for (int j = 0; j < d; ++j) g.mean[j] = x[j] + b[j] * delta;
    g.variance = delta;
  }
  return g;
}

double gaussian_log_density(const GaussianStep& g, std::span<const double> y) {
  double q = 0.0;
  for (std::size_t j = 0; j < g.mean.size(); ++j) {
    const double z = y[j] - g.mean[j];
    q += z * z;
  }
  const double d = static_cast<double>(g.mean.size());
  return -0.5 * d * (kLog2Pi + std::log(g.variance)) - 0.5 * q / g.variance;
}

std::vector<double> silverman_bandwidths(std::span<const double> endpoints, int d,
                                         std::size_t n) {
  std::vector<double> h(d);
  const double factor = std::pow(4.0 / ((d + 2.0) * static_cast<double>(n)), 1.0 / (d + 4.0));
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean += endpoints[p * d + j];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double z = endpoints[p * d + j] - mean;
      ss += z * z;
    }
    h[j] = std::sqrt(ss / static_cast<double>(n - 1)) * factor;
    if (!(h[j] > 0.0)) h[j] = 1e-12;
  }
  return h;
}

DensityEstimate kde_density(const DriftSpec& spec, const TransitionModel& model, double delta,
                            std::span<const double> x, std::span<const double> y,
                            std::uint64_t seed) {
  const int d = spec.dim();
  const std::size_t n = model.n_paths;
  std::vector<double> ends(n * d);
  kernels::parallel::euler_endpoints(spec, x, delta, model.substeps, seed, ends);
  std::vector<double> h = model.bandwidth > 0.0 ? std::vector<double>(d, model.bandwidth)
                                                : silverman_bandwidths(ends, d, n);
  double log_norm = 0.0;
  for (double hj : h) log_norm += std::log(hj);
  std::vector<double> terms(n);
  std::size_t in_window = 0;
  for (std::size_t p = 0; p < n; ++p) {
    double q = 0.0;
    bool inside = true;
    for (int j = 0; j < d; ++j) {
      const double z = (y[j] - ends[p * d + j]) / h[j];
      q += z * z;
      inside = inside && std::abs(z) <= 6.0;
    }
    in_window += inside ? 1 : 0;
    terms[p] = -0.5 * q;
  }
  DensityEstimate est;
  const double lse = quad::log_sum_exp(terms);
  est.log_value =
      std::max(kLogDensityFloor, lse - std::log(static_cast<double>(n)) - 0.5 * d * kLog2Pi - log_norm);
  est.value = std::exp(est.log_value);
  if (in_window == 0)
    est.warnings.push_back("mc_kde: no simulated endpoint within 6 bandwidths of y");
  return est;
}

struct PathStats {
  double value = 0.0;
  double std_error = 0.0;
  double ess = 0.0;
};

// Plain (not self-normalized) average of f(end) exp(l), max-shifted.
PathStats weighted_average(std::span<const double> log_w, std::span<const double> fvals) {
  PathStats s;
  const double lmax = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> prod(log_w.size());
  double sw = 0.0, sw2 = 0.0;
  for (std::size_t p = 0; p < log_w.size(); ++p) {
    const double w = std::exp(log_w[p] - lmax);
    prod[p] = fvals[p] * w;
    sw += w;
    sw2 += w * w;
  }
  const auto me = quad::mean_and_error(prod);
  const double scale = std::exp(lmax);
  s.value = me.mean * scale;
  s.std_error = me.std_error * scale;
  s.ess = sw * sw / sw2;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// TestFunction

std::vector<std::string> TestFunction::registry() {
  return {"cos", "sin", "tanh", "gauss-bump", "indicator-smoothed", "const"};
}

TestFunction TestFunction::make(const std::string& name, std::vector<double> params) {
  TestFunction f;
  f.name_ = name;
  if (name == "cos" || name == "sin" || name == "tanh") {
    if (!params.empty()) throw ValidationError(name + " takes no parameters");
  } else if (name == "gauss-bump") {
    if (params.empty()) params = {1.0};
    if (params.size() != 1 || !(params[0] > 0.0))
      throw ValidationError("gauss-bump takes one positive width");
  } else if (name == "indicator-smoothed") {
    if (params.size() == 2) params.push_back(0.1);
    if (params.size() != 3 || !(params[0] < params[1]) || !(params[2] > 0.0))
      throw ValidationError("indicator-smoothed takes (a, b[, sharpness]) with a < b");
  } else if (name == "const") {
    if (params.size() != 1 || !(std::abs(params[0]) <= 1.0))
      throw ValidationError("const takes one value c with |c| <= 1");
    f.sup_ = std::abs(params[0]);
  } else {
    throw ValidationError("unknown test function '" + name + "'");
  }
  f.params_ = std::move(params);
  return f;
}

double TestFunction::scalar(double x) const {
  if (name_ == "cos") return std::cos(x);
  if (name_ == "sin") return std::sin(x);
  if (name_ == "tanh") return std::tanh(x);
  if (name_ == "gauss-bump") {
    const double z = x / params_[0];
    return std::exp(-z * z);
  }
  if (name_ == "indicator-smoothed")
    return logistic((x - params_[0]) / params_[2]) * logistic((params_[1] - x) / params_[2]);
  return params_[0];
}

double TestFunction::derivative(double x) const {
  if (name_ == "cos") return -std::sin(x);
  if (name_ == "sin") return std::cos(x);
  if (name_ == "tanh") {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  }
  if (name_ == "gauss-bump") {
    const double w = params_[0];
    return -2.0 * x / (w * w) * std::exp(-(x / w) * (x / w));
  }
  if (name_ == "indicator-smoothed") {
    const double s = params_[2];
    const double l = logistic((x - params_[0]) / s);
    const double r = logistic((params_[1] - x) / s);
    return (l * (1.0 - l) * r - l * r * (1.0 - r)) / s;
  }
  return 0.0;
}

double TestFunction::operator()(std::span<const double> x) const {
  double v = 1.0;
  for (double xi : x) v *= scalar(xi);
  return v;
}

double TestFunction::gaussian_expectation(double mean, double sd) const {
  if (name_ == "const") return params_[0];
  if (sd == 0.0) return scalar(mean);
  const double inv = 1.0 / (sd * std::sqrt(2.0 * M_PI));
  auto integrand = [&](double y) {
    const double z = (y - mean) / sd;
    return scalar(y) * inv * std::exp(-0.5 * z * z);
  };
  return quad::gauss_legendre(integrand, mean - 12.0 * sd, mean + 12.0 * sd, 48);
}

// ---------------------------------------------------------------------------
// TransitionModel

std::string to_string(TransitionMethod m) {
  switch (m) {
    case TransitionMethod::exact_ou:
      return "exact_ou";
    case TransitionMethod::euler_gaussian:
      return "euler_gaussian";
    case TransitionMethod::mc_kde:
      return "mc_kde";
    case TransitionMethod::girsanov_mc:
      return "girsanov_mc";
  }
  return "unknown";
}

TransitionMethod transition_method_from_string(const std::string& name) {
  if (name == "exact_ou") return TransitionMethod::exact_ou;
  if (name == "euler_gaussian") return TransitionMethod::euler_gaussian;
  if (name == "mc_kde") return TransitionMethod::mc_kde;
  if (name == "girsanov_mc") return TransitionMethod::girsanov_mc;
  throw ValidationError("unknown transition method '" + name + "'");
}

void TransitionModel::check_compatible(const DriftSpec& spec) const {
  if (method == TransitionMethod::exact_ou && !spec.ou_beta())
    throw ValidationError("exact_ou transition model requires an OU drift, got " +
                          spec.describe());
  if (is_monte_carlo()) {
    if (n_paths < 100) throw ValidationError("Monte-Carlo transition models need n_paths >= 100");
    if (substeps < 1) throw ValidationError("substeps must be >= 1");
  }
  if (bandwidth < 0.0) throw ValidationError("bandwidth must be positive when fixed");
}

// ---------------------------------------------------------------------------
// Densities

double log_transition_density(const DriftSpec& spec, const TransitionModel& model, double delta,
                              std::span<const double> x, std::span<const double> y,
                              std::uint64_t stream_seed) {
  switch (model.method) {
    case TransitionMethod::exact_ou:
    case TransitionMethod::euler_gaussian:
      return std::max(kLogDensityFloor, gaussian_log_density(gaussian_step(spec, model, delta, x), y));
    case TransitionMethod::mc_kde:
      return kde_density(spec, model, delta, x, y, stream_seed).log_value;
    case TransitionMethod::girsanov_mc:
      break;
  }
  throw ValidationError("girsanov_mc evaluates operators, not densities");
}

DensityEstimate transition_density(const DriftSpec& spec, const TransitionModel& model,
                                   double delta, std::span<const double> x,
                                   std::span<const double> y) {
  model.check_compatible(spec);
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  if (model.method == TransitionMethod::mc_kde)
    return kde_density(spec, model, delta, x, y, model.seed);
  DensityEstimate est;
  est.log_value = log_transition_density(spec, model, delta, x, y, model.seed);
  est.value = std::exp(est.log_value);
  return est;
}

DensityEstimate transition_density(const DriftSpec& spec, const TransitionModel& model,
                                   double delta, double x, double y) {
  return transition_density(spec, model, delta, std::span<const double>(&x, 1),
                            std::span<const double>(&y, 1));
}

// ---------------------------------------------------------------------------
// Operators

namespace {

OperatorEstimate operator_with_seed(const DriftSpec& spec, const TransitionModel& model,
                                    double delta, const TestFunction& f,
                                    std::span<const double> x, std::uint64_t seed) {
  const int d = spec.dim();
  OperatorEstimate est;
  if (model.method == TransitionMethod::exact_ou ||
      model.method == TransitionMethod::euler_gaussian) {
    const auto g = gaussian_step(spec, model, delta, x);
    const double sd = std::sqrt(g.variance);
    est.value = 1.0;
    for (int j = 0; j < d; ++j) est.value *= f.gaussian_expectation(g.mean[j], sd);
    est.effective_sample_size = INFINITY;
    return est;
  }
  const std::size_t n = model.n_paths;
  std::vector<double> ends(n * d), fvals(n);
  if (model.method == TransitionMethod::mc_kde) {
    kernels::parallel::euler_endpoints(spec, x, delta, model.substeps, seed, ends);
    for (std::size_t p = 0; p < n; ++p) fvals[p] = f(std::span<const double>(ends).subspan(p * d, d));
    const auto me = quad::mean_and_error(fvals);
    est.value = me.mean;
    est.std_error = me.std_error;
    est.effective_sample_size = static_cast<double>(n);
    return est;
  }
  std::vector<double> log_w(n);
  kernels::parallel::girsanov_paths(spec, x, delta, model.substeps, seed, log_w, ends);
  for (std::size_t p = 0; p < n; ++p) fvals[p] = f(std::span<const double>(ends).subspan(p * d, d));
  const auto s = weighted_average(log_w, fvals);
  est.value = s.value;
  est.std_error = s.std_error;
  est.effective_sample_size = s.ess;
  if (!std::isfinite(est.value)) throw RangeError("Girsanov estimate overflowed");
  if (s.ess < 10.0)
    est.warnings.push_back("girsanov_mc: effective sample size " + std::to_string(s.ess) + " < 10");
  return est;
}

// Paired Monte-Carlo difference P^a f(x) - P^b f(x) on shared random numbers.
PathStats paired_difference(const DriftSpec& a, const DriftSpec& b, const TransitionModel& model,
                            double delta, const TestFunction& f, std::span<const double> x,
                            std::uint64_t seed) {
  const int d = a.dim();
  const std::size_t n = model.n_paths;
  std::vector<double> ends_a(n * d), ends_b(n * d), diff(n);
  PathStats s;
  if (model.method == TransitionMethod::mc_kde) {
    kernels::parallel::euler_endpoints(a, x, delta, model.substeps, seed, ends_a);
    kernels::parallel::euler_endpoints(b, x, delta, model.substeps, seed, ends_b);
    for (std::size_t p = 0; p < n; ++p)
      diff[p] = f(std::span<const double>(ends_a).subspan(p * d, d)) -
                f(std::span<const double>(ends_b).subspan(p * d, d));
    const auto me = quad::mean_and_error(diff);
    s.value = me.mean;
    s.std_error = me.std_error;
    s.ess = static_cast<double>(n);
    return s;
  }
  std::vector<double> lw_a(n), lw_b(n);
  kernels::parallel::girsanov_paths(a, x, delta, model.substeps, seed, lw_a, ends_a);
  kernels::parallel::girsanov_paths(b, x, delta, model.substeps, seed, lw_b, ends_b);
  // Both drifts see the same Brownian paths, hence the same endpoints.
  const double lmax = std::max(*std::max_element(lw_a.begin(), lw_a.end()),
                               *std::max_element(lw_b.begin(), lw_b.end()));
  for (std::size_t p = 0; p < n; ++p)
    diff[p] = f(std::span<const double>(ends_a).subspan(p * d, d)) *
              (std::exp(lw_a[p] - lmax) - std::exp(lw_b[p] - lmax));
  const auto me = quad::mean_and_error(diff);
  s.value = me.mean * std::exp(lmax);
  s.std_error = me.std_error * std::exp(lmax);
  s.ess = static_cast<double>(n);
  return s;
}

}  // namespace

OperatorEstimate transition_operator(const DriftSpec& spec, const TransitionModel& model,
                                     double delta, const TestFunction& f,
                                     std::span<const double> x) {
  model.check_compatible(spec);
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  return operator_with_seed(spec, model, delta, f, x, model.seed);
}

OperatorEstimate transition_operator(const DriftSpec& spec, const TransitionModel& model,
                                     double delta, const TestFunction& f, double x) {
  return transition_operator(spec, model, delta, f, std::span<const double>(&x, 1));
}

// ---------------------------------------------------------------------------
// TopologyProbe and weak distance

double TopologyProbe::total_mass() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

void TopologyProbe::validate() const {
  if (dim < 1 || weights.empty() || nodes.size() != weights.size() * static_cast<std::size_t>(dim))
    throw ValidationError("probe needs one node per weight");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("probe weights must be positive");
  const double mass = total_mass();
  if (!std::isfinite(mass) || !(mass > 0.0)) throw ValidationError("probe mass must be finite");
  if (!(epsilon > 0.0)) throw ValidationError("probe epsilon must be positive");
  if (epsilon > 2.0 * mass) throw ValidationError("probe epsilon exceeds 2 nu(R)");
  if (f.sup_bound() > 1.0) throw ValidationError("probe test function must satisfy |f| <= 1");
}

TopologyProbe TopologyProbe::uniform_grid(TestFunction f, int dim, double half_width,
                                          int points_per_axis, double total_mass,
                                          double epsilon) {
  if (dim < 1 || points_per_axis < 1) throw ValidationError("probe grid must be non-empty");
  TopologyProbe probe;
  probe.f = std::move(f);
  probe.dim = dim;
  probe.epsilon = epsilon;
  const auto axis = quad::linspace(-half_width, half_width, static_cast<std::size_t>(points_per_axis));
  std::size_t count = 1;
  for (int j = 0; j < dim; ++j) count *= static_cast<std::size_t>(points_per_axis);
  probe.weights.assign(count, total_mass / static_cast<double>(count));
  probe.nodes.resize(count * dim);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t rest = i;
    for (int j = 0; j < dim; ++j) {
      probe.nodes[i * dim + j] = axis[rest % points_per_axis];
      rest /= points_per_axis;
    }
  }
  probe.validate();
  return probe;
}

TopologyProbe TopologyProbe::from_csv(std::istream& in, TestFunction f, double epsilon) {
  TopologyProbe probe;
  probe.f = std::move(f);
  probe.epsilon = epsilon;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("probe CSV is empty");
  std::size_t cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols < 2) throw ValidationError("probe CSV needs x1[,x2,...],weight columns");
  probe.dim = static_cast<int>(cols - 1);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    std::istringstream is(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(is, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw ValidationError("probe CSV row " + std::to_string(row) + ": non-numeric cell '" +
                              cell + "'");
      }
    }
    if (vals.size() != cols)
      throw ValidationError("probe CSV row " + std::to_string(row) + " has wrong column count");
    probe.nodes.insert(probe.nodes.end(), vals.begin(), vals.end() - 1);
    probe.weights.push_back(vals.back());
  }
  probe.validate();
  return probe;
}

WeakDistance weak_distance(const DriftSpec& a, const DriftSpec& b, const TransitionModel& model,
                           double delta, const TopologyProbe& probe) {
  probe.validate();
  model.check_compatible(a);
  model.check_compatible(b);
  if (a.dim() != b.dim() || a.dim() != probe.dim)
    throw ValidationError("weak_distance: dimensions of drifts and probe differ");
  WeakDistance out;
  double var = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const auto x = probe.node(i);
    double gap, se = 0.0;
    if (!model.is_monte_carlo()) {
      gap = operator_with_seed(a, model, delta, probe.f, x, 0).value -
            operator_with_seed(b, model, delta, probe.f, x, 0).value;
    } else {
      const auto s = paired_difference(a, b, model, delta, probe.f, x, split_seed(model.seed, i));
      gap = s.value;
      se = s.std_error;
    }
    out.value += probe.weights[i] * std::abs(gap);
    var += probe.weights[i] * probe.weights[i] * se * se;
  }
  out.std_error = std::sqrt(var);
  return out;
}

IdentifiabilityReport identifiability_probe(const DriftSpec& a, const DriftSpec& b,
                                            const TransitionModel& model, double delta,
                                            std::span<const TestFunction> family,
                                            std::span<const std::vector<double>> grid) {
  model.check_compatible(a);
  model.check_compatible(b);
  IdentifiabilityReport rep;
  std::uint64_t k = 0;
  for (const auto& f : family) {
    for (const auto& x : grid) {
      const auto pa = operator_with_seed(a, model, delta, f, x, split_seed(model.seed, 2 * k));
      const auto pb = operator_with_seed(b, model, delta, f, x, split_seed(model.seed, 2 * k + 1));
      ++k;
      const double gap = std::abs(pa.value - pb.value);
      const double se = std::hypot(pa.std_error, pb.std_error);
      if (gap > rep.max_gap || rep.argmax_point.empty()) {
        rep.max_gap = gap;
        rep.argmax_point = x;
        rep.argmax_function = f.name();
        rep.std_error_at_max = se;
      }
      const double z = se > 0.0 ? gap / se : (gap > 0.0 ? INFINITY : 0.0);
      rep.max_z = std::max(rep.max_z, z);
      if (gap > 0.0 && gap > 5.0 * se) rep.separated = true;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Small-delta heuristic, equicontinuity, partition diagnostic

SmallDeltaReport small_delta_check(const DriftSpec& a, const DriftSpec& b,
                                   const TransitionModel& model, const TestFunction& f, double x,
                                   std::span<const double> deltas) {
  if (model.is_monte_carlo())
    throw ValidationError("small_delta_check needs exact_ou or euler_gaussian");
  if (a.dim() != 1 || b.dim() != 1) throw ValidationError("small_delta_check needs d = 1");
  model.check_compatible(a);
  model.check_compatible(b);
  SmallDeltaReport rep;
  bool any_zero = false;
  for (double delta : deltas) {
    const double pa = transition_operator(a, model, delta, f, x).value;
    const double pb = transition_operator(b, model, delta, f, x).value;
    const double r = std::abs(pa - pb - delta * (a(x) - b(x)) * f.derivative(x));
    rep.rows.push_back({delta, r});
    any_zero = any_zero || !(r > 0.0);
  }
  if (!any_zero && rep.rows.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(rep.rows.size());
    for (const auto& row : rep.rows) {
      const double lx = std::log(row.delta), ly = std::log(row.residual);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return rep;
}

std::vector<double> equicontinuity_probe(std::span<const DriftSpec> family,
                                         const TransitionModel& model, double delta,
                                         const TestFunction& f, std::span<const double> points,
                                         std::span<const double> hs) {
  std::vector<double> out;
  for (double h : hs) {
    double worst = 0.0;
    for (const auto& spec : family) {
      for (double x : points) {
        // Same seed at x and x + h: the Monte-Carlo noise is shared.
        const auto p0 = operator_with_seed(spec, model, delta, f, std::span<const double>(&x, 1),
                                           model.seed);
        const double xh = x + h;
        const auto p1 = operator_with_seed(spec, model, delta, f, std::span<const double>(&xh, 1),
                                           model.seed);
        worst = std::max(worst, std::abs(p1.value - p0.value));
      }
    }
    out.push_back(worst);
  }
  return out;
}

std::vector<CellGap> partition_gap_diagnostic(const DriftSpec& a, const DriftSpec& b,
                                              const TransitionModel& model, double delta,
                                              const TestFunction& f, double half_width,
                                              int cells, int points_per_cell) {
  if (cells < 1 || points_per_cell < 1) throw ValidationError("partition must be non-empty");
  if (a.dim() != 1 || b.dim() != 1) throw ValidationError("partition diagnostic needs d = 1");
  std::vector<CellGap> out;
  const double width = 2.0 * half_width / cells;
  for (int c = 0; c < cells; ++c) {
    CellGap cell{-half_width + c * width, -half_width + (c + 1) * width, 0.0, 0.0};
    for (double x : quad::linspace(cell.lo, cell.hi, static_cast<std::size_t>(points_per_cell))) {
      const std::span<const double> xs(&x, 1);
      const double gap = operator_with_seed(a, model, delta, f, xs, model.seed).value -
                         operator_with_seed(b, model, delta, f, xs, model.seed).value;
      cell.max_positive = std::max(cell.max_positive, gap);
      cell.max_negative = std::max(cell.max_negative, -gap);
    }
    out.push_back(cell);
  }
  return out;
}

}  // namespace driftbayes
