#include "driftbayes/divergence.hpp"

#include <cmath>
#include <sstream>

#include "driftbayes/errors.hpp"
#include "driftbayes/rng.hpp"

namespace driftbayes {

namespace {

constexpr int kMaxDim = 16;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

double squared_gap(const DriftSpec& a, const DriftSpec& b, std::span<const double> x) {
  double ba[kMaxDim], bb[kMaxDim];
  const int d = a.dim();
  a.evaluate(x, std::span<double>(ba, d));
  b.evaluate(x, std::span<double>(bb, d));
  double s = 0.0;
  for (int j = 0; j < d; ++j) s += (ba[j] - bb[j]) * (ba[j] - bb[j]);
  return s;
}

// Throws the first recorded failure of a parallel loop, if any.
void rethrow_first(const std::vector<std::string>& errors) {
  for (const auto& e : errors)
    if (!e.empty()) throw EvaluationError(e);
}

}  // namespace

Estimate integrate_stationary(const StationaryLaw& law,
                              const std::function<double(std::span<const double>)>& g,
                              std::size_t mc_samples, std::uint64_t seed) {
  const int d = law.dim();
  require(d <= kMaxDim, "integrate_stationary supports d <= 16");
  Estimate est;
  if (d == 1) {
    const auto x = law.nodes();
    const auto w = quad::simpson_weights(x.size(), x[1] - x[0]);
    std::vector<double> terms(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double p = law.density(x[k]);
      terms[k] = p > 0.0 ? w[k] * g(x.subspan(k, 1)) * p : 0.0;
    }
    est.value = quad::pairwise_sum(terms);
    return est;
  }
  if (d <= 3 && !law.quadrature().monte_carlo) {
    const double L = law.quadrature().half_width;
    const auto n = static_cast<std::size_t>(law.quadrature().nodes);
    const auto axis = quad::linspace(-L, L, n);
    const auto w = quad::simpson_weights(n, axis[1] - axis[0]);
    std::vector<double> slices(n, 0.0);
    std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i0 = 0; i0 < static_cast<std::ptrdiff_t>(n); ++i0) {
      try {
        double x[3];
        x[0] = axis[i0];
        double sum = 0.0;
        const std::size_t inner = d == 2 ? n : n * n;
        for (std::size_t k = 0; k < inner; ++k) {
          const std::size_t i1 = k % n;
          double wt = w[i0] * w[i1];
          x[1] = axis[i1];
          if (d == 3) {
            const std::size_t i2 = k / n;
            x[2] = axis[i2];
            wt *= w[i2];
          }
          const std::span<const double> xs(x, d);
          const double p = law.density(xs);
          if (p > 0.0) sum += wt * g(xs) * p;
        }
        slices[i0] = sum;
      } catch (const std::exception& e) {
        errors[i0] = e.what();
      }
    }
    rethrow_first(errors);
    est.value = quad::pairwise_sum(slices);
    return est;
  }
  const auto sample = sample_stationary(law.spec(), law, mc_samples, seed);
  std::vector<double> vals(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) vals[i] = g(sample.point(i));
  const auto me = quad::mean_and_error(vals);
  est.value = me.mean;
  est.std_error = me.std_error;
  est.warnings = sample.warnings;
  return est;
}

Estimate l2_mu_distance(const DriftSpec& b, const DriftSpec& b0, const StationaryLaw& law0) {
  require(b.dim() == b0.dim() && b0.dim() == law0.dim(), "l2_mu_distance: dimension mismatch");
  Estimate sq =
      integrate_stationary(law0, [&](std::span<const double> x) { return squared_gap(b, b0, x); });
  Estimate out;
  out.value = std::sqrt(std::max(0.0, sq.value));
  out.std_error = out.value > 0.0 ? 0.5 * sq.std_error / out.value : std::sqrt(sq.std_error);
  out.warnings = std::move(sq.warnings);
  return out;
}

KlInvariant kl_invariant(const StationaryLaw& law_b, const StationaryLaw& law_b0) {
  require(law_b.dim() == law_b0.dim(), "kl_invariant: dimension mismatch");
  const Estimate raw = integrate_stationary(law_b0, [&](std::span<const double> x) {
    return law_b0.log_density(x) - law_b.log_density(x);
  });
  KlInvariant out;
  out.std_error = raw.std_error;
  if (raw.value < 0.0) {
    out.clamped = -raw.value;
    out.value = 0.0;
  } else {
    out.value = raw.value;
  }
  return out;
}

double kl_path(double kl_inv, double l2_distance, double delta) {
  require(delta > 0.0, "kl_path needs delta > 0");
  return kl_inv + 0.5 * delta * l2_distance * l2_distance;
}

double kl_transition_exact_ou(const DriftSpec& b, const DriftSpec& b0, const StationaryLaw& law0,
                              double delta) {
  const auto beta = b.ou_beta();
  const auto beta0 = b0.ou_beta();
  require(beta && beta0, "kl_transition_exact_ou needs two OU drifts");
  require(delta > 0.0, "kl_transition_exact_ou needs delta > 0");
  const double e1 = std::exp(-*beta * delta), e0 = std::exp(-*beta0 * delta);
  const double v1 = -std::expm1(-2.0 * *beta * delta) / (2.0 * *beta);
  const double v0 = -std::expm1(-2.0 * *beta0 * delta) / (2.0 * *beta0);
  const double per_coord = 0.5 * (v0 / v1 - 1.0 - std::log(v0 / v1));
  const int d = b.dim();
  return integrate_stationary(law0, [&](std::span<const double> x) {
           double s = d * per_coord;
           for (double xi : x) s += 0.5 * (e0 - e1) * (e0 - e1) * xi * xi / v1;
           return s;
         }).value;
}

Estimate kl_transition(const DriftSpec& b, const DriftSpec& b0, const StationaryLaw& law0,
                       double delta, const TransitionModel& model, std::size_t n_outer,
                       std::size_t n_inner, std::uint64_t seed) {
  require(delta > 0.0 && n_outer >= 2 && n_inner >= 1, "kl_transition: bad sample sizes");
  require(model.method != TransitionMethod::girsanov_mc,
          "kl_transition needs transition densities; girsanov_mc only provides operators");
  model.check_compatible(b);
  model.check_compatible(b0);
  const int d = b0.dim();
  require(d <= kMaxDim, "kl_transition supports d <= 16");
  const auto xs = sample_stationary(b0, law0, n_outer, split_seed(seed, 0));
  const auto beta0 = b0.ou_beta();

  std::vector<double> outer(n_outer, 0.0);
  std::vector<std::string> errors(n_outer);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n_outer); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      const auto x = xs.point(i);
      NormalStream rng(split_seed(seed, 1 + n_outer + i));
      const std::uint64_t stream = split_seed(seed, 1 + i);
      double y[kMaxDim], pos[kMaxDim], drift[kMaxDim];
      std::vector<double> terms(n_inner);
      for (std::size_t k = 0; k < n_inner; ++k) {
        switch (model.method) {
          case TransitionMethod::exact_ou: {
            const double e = std::exp(-*beta0 * delta);
            const double sd = std::sqrt(-std::expm1(-2.0 * *beta0 * delta) / (2.0 * *beta0));
            for (int j = 0; j < d; ++j) y[j] = x[j] * e + sd * rng.normal();
            break;
          }
          case TransitionMethod::euler_gaussian: {
            b0.evaluate(x, std::span<double>(drift, d));
            for (int j = 0; j < d; ++j) y[j] = x[j] + drift[j] * delta + std::sqrt(delta) * rng.normal();
            break;
          }
          default: {
            const double h = delta / model.substeps;
            for (int j = 0; j < d; ++j) pos[j] = x[j];
            for (int s = 0; s < model.substeps; ++s) {
              b0.evaluate(std::span<const double>(pos, d), std::span<double>(drift, d));
              for (int j = 0; j < d; ++j) pos[j] += drift[j] * h + std::sqrt(h) * rng.normal();
            }
            for (int j = 0; j < d; ++j) y[j] = pos[j];
          }
        }
        const std::span<const double> ys(y, d);
        terms[k] = log_transition_density(b0, model, delta, x, ys, stream) -
                   log_transition_density(b, model, delta, x, ys, stream);
      }
      outer[i] = quad::pairwise_sum(terms) / static_cast<double>(n_inner);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  rethrow_first(errors);
  const auto me = quad::mean_and_error(outer);
  Estimate est;
  est.value = me.mean;
  est.std_error = me.std_error;
  est.warnings = xs.warnings;
  if (me.mean < -3.0 * me.std_error)
    est.warnings.push_back("transition KL estimate is significantly negative");
  return est;
}

Estimate kl_path_monte_carlo(const DriftSpec& b, const DriftSpec& b0, const StationaryLaw& law_b,
                             const StationaryLaw& law0, double delta, int substeps,
                             std::size_t n_paths, std::uint64_t seed) {
  require(delta > 0.0 && substeps >= 1 && n_paths >= 2, "kl_path_monte_carlo: bad arguments");
  const int d = b0.dim();
  require(d <= kMaxDim && b.dim() == d, "kl_path_monte_carlo: dimension mismatch");
  const auto starts = sample_stationary(b0, law0, n_paths, split_seed(seed, 0));
  const double h = delta / substeps;
  const double sqrt_h = std::sqrt(h);
  std::vector<double> terms(n_paths);
  std::vector<std::string> errors(n_paths);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pp = 0; pp < static_cast<std::ptrdiff_t>(n_paths); ++pp) {
    const auto p = static_cast<std::size_t>(pp);
    try {
      const auto x0 = starts.point(p);
      double pos[kMaxDim], a0[kMaxDim], a1[kMaxDim];
      for (int j = 0; j < d; ++j) pos[j] = x0[j];
      NormalStream rng(split_seed(seed, 1 + p));
      double stoch = 0.0, quad_var = 0.0;
      for (int k = 0; k < substeps; ++k) {
        const std::span<const double> xs(pos, d);
        b0.evaluate(xs, std::span<double>(a0, d));
        b.evaluate(xs, std::span<double>(a1, d));
        for (int j = 0; j < d; ++j) {
          const double dw = sqrt_h * rng.normal();
          const double diff = a1[j] - a0[j];
          stoch -= diff * dw;
          quad_var += 0.5 * diff * diff * h;
          pos[j] += a0[j] * h + dw;
        }
      }
      terms[p] = law0.log_density(x0) - law_b.log_density(x0) + stoch + quad_var;
    } catch (const std::exception& e) {
      errors[p] = e.what();
    }
  }
  rethrow_first(errors);
  const auto me = quad::mean_and_error(terms);
  Estimate est;
  est.value = me.mean;
  est.std_error = me.std_error;
  est.warnings = starts.warnings;
  return est;
}

DivergenceReport divergence_report(const DriftSpec& b, const DriftSpec& b0,
                                   const StationaryLaw& law_b, const StationaryLaw& law0,
                                   double delta, const DivergenceOptions& options) {
  DivergenceReport rep;
  rep.delta = delta;
  const Estimate l2 = l2_mu_distance(b, b0, law0);
  rep.l2_mu = l2.value;
  const KlInvariant inv = kl_invariant(law_b, law0);
  rep.kl_invariant = inv.value;
  rep.kl_invariant_clamped = inv.clamped;
  if (inv.clamped > 0.0) {
    std::ostringstream msg;
    msg << "invariant KL quadrature gave " << -inv.clamped << "; clamped to 0";
    rep.warnings.push_back(msg.str());
  }
  rep.kl_path = kl_path(inv.value, l2.value, delta);
  if (options.model.method == TransitionMethod::exact_ou && b.ou_beta() && b0.ou_beta()) {
    rep.kl_transition = kl_transition_exact_ou(b, b0, law0, delta);
  } else {
    const Estimate kt = kl_transition(b, b0, law0, delta, options.model, options.n_outer,
                                      options.n_inner, options.seed);
    rep.kl_transition = kt.value;
    rep.kl_transition_std_error = kt.std_error;
    rep.warnings.insert(rep.warnings.end(), kt.warnings.begin(), kt.warnings.end());
  }
  rep.warnings.insert(rep.warnings.end(), l2.warnings.begin(), l2.warnings.end());
  return rep;
}

}  // namespace driftbayes
