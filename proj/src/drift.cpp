#include "driftbayes/drift.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "driftbayes/errors.hpp"
#include "driftbayes/rng.hpp"

namespace driftbayes {

namespace {

constexpr double kLogFloorNats = 80.0;  // tensor domain trimmed where exp(-2V) < e^-80 of its peak

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void check_class(double growth_K, const Dissipativity& diss) {
  require(std::isfinite(growth_K) && growth_K > 0.0, "growth_K must be positive");
  require(std::isfinite(diss.r) && diss.r > 0.0, "dissipativity r must be positive");
  require(std::isfinite(diss.M) && diss.M > 0.0, "dissipativity M must be positive");
  require(std::isfinite(diss.alpha) && diss.alpha >= 1.0, "dissipativity alpha must be >= 1");
}

double parametric_value(const Parametric1dForm& p, double x) {
  const auto& q = p.params;
  if (p.id == "linear") return q[0] - q[1] * x;
  if (p.id == "tanh_well") return -q[0] * x + q[1] * std::tanh(x);
  if (p.id == "cubic_saturated") return -q[0] * x - q[1] * x * x * x / (1.0 + x * x);
  throw ValidationError("unknown parametric drift id '" + p.id + "'");
}

double tabulated_value(const TabulatedForm& t, double x) {
  const auto& g = t.grid;
  const auto& v = t.values;
  if (g.size() == 1) return v[0];
  std::size_t k;
  if (x <= g.front()) {
    k = 0;
  } else if (x >= g.back()) {
    k = g.size() - 2;
  } else {
    k = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), x) - g.begin()) - 1;
  }
  const double slope = (v[k + 1] - v[k]) / (g[k + 1] - g[k]);
  return v[k] + slope * (x - g[k]);
}

// Twice the cumulative drift integral from `from` to `to` by composite
// Gauss-Legendre; panels no wider than `width`.
double twice_integral(const DriftSpec& spec, double from, double to, double width) {
  if (from == to) return 0.0;
  const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(to - from) / width)));
  return 2.0 * quad::gauss_legendre([&](double y) { return spec(y); }, from, to, panels);
}

}  // namespace

// ---------------------------------------------------------------------------
// PotentialSpec

std::string to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::quadratic:
      return "quadratic";
    case ProfileKind::soft_quadratic:
      return "soft_quadratic";
  }
  return "unknown";
}

ProfileKind profile_kind_from_string(const std::string& name) {
  if (name == "quadratic") return ProfileKind::quadratic;
  if (name == "soft_quadratic") return ProfileKind::soft_quadratic;
  throw ValidationError("unknown potential profile '" + name + "'");
}

double PotentialSpec::f(double s) const {
  switch (kind) {
    case ProfileKind::quadratic:
      return 0.5 * params[0] * s;
    case ProfileKind::soft_quadratic:
      return 0.5 * params[0] * s + params[1] * std::sqrt(1.0 + s);
  }
  return NAN;
}

double PotentialSpec::f_prime(double s) const {
  switch (kind) {
    case ProfileKind::quadratic:
      return 0.5 * params[0];
    case ProfileKind::soft_quadratic:
      return 0.5 * params[0] + 0.5 * params[1] / std::sqrt(1.0 + s);
  }
  return NAN;
}

double PotentialSpec::f_second(double s) const {
  switch (kind) {
    case ProfileKind::quadratic:
      return 0.0;
    case ProfileKind::soft_quadratic:
      return -0.25 * params[1] / std::pow(1.0 + s, 1.5);
  }
  return NAN;
}

// ---------------------------------------------------------------------------
// DriftSpec

std::vector<std::string> parametric_drift_ids() {
  return {"linear", "tanh_well", "cubic_saturated"};
}

DriftSpec::DriftSpec(int dim, DriftForm form, double growth_K, Dissipativity diss)
    : dim_(dim), form_(std::move(form)), growth_K_(growth_K), diss_(diss) {
  require(dim_ >= 1, "drift dimension must be positive");
  check_class(growth_K_, diss_);
  if (dim_ == 1) diss_.alpha = 1.0;
}

DriftSpec DriftSpec::ou(double beta, double growth_K, Dissipativity diss, int dim) {
  require(std::isfinite(beta) && beta > 0.0, "ou beta must be positive");
  return DriftSpec(dim, OuForm{beta}, growth_K, diss);
}

DriftSpec DriftSpec::parametric(std::string id, std::vector<double> params, double growth_K,
                                Dissipativity diss) {
  const auto ids = parametric_drift_ids();
  require(std::find(ids.begin(), ids.end(), id) != ids.end(),
          "unknown parametric drift id '" + id + "'");
  const std::size_t need = (id == "linear" || id == "tanh_well" || id == "cubic_saturated") ? 2 : 0;
  require(params.size() == need, "parametric drift '" + id + "' expects " +
                                      std::to_string(need) + " parameters");
  for (double p : params) require(std::isfinite(p), "parametric drift parameters must be finite");
  return DriftSpec(1, Parametric1dForm{std::move(id), std::move(params)}, growth_K, diss);
}

DriftSpec DriftSpec::potential(int dim, PotentialSpec potential, double growth_K,
                               Dissipativity diss) {
  const std::size_t need = potential.kind == ProfileKind::quadratic ? 1 : 2;
  require(potential.params.size() == need,
          "profile '" + to_string(potential.kind) + "' expects " + std::to_string(need) +
              " parameters");
  for (double p : potential.params) require(std::isfinite(p), "profile parameters must be finite");
  require(potential.lipschitz_K2 > 0.0, "lipschitz_K2 must be positive");
  require(potential.M_f > 0.0 && potential.r_f > 0.0, "profile tail constants must be positive");
  return DriftSpec(dim, PotentialForm{std::move(potential)}, growth_K, diss);
}

DriftSpec DriftSpec::tabulated(std::vector<double> grid, std::vector<double> values,
                               double growth_K, Dissipativity diss) {
  require(!grid.empty() && grid.size() == values.size(),
          "tabulated drift needs equally long, non-empty grid and values");
  for (std::size_t i = 1; i < grid.size(); ++i)
    require(grid[i] > grid[i - 1], "tabulated grid must be strictly ascending");
  for (std::size_t i = 0; i < grid.size(); ++i)
    require(std::isfinite(grid[i]) && std::isfinite(values[i]), "tabulated entries must be finite");
  return DriftSpec(1, TabulatedForm{std::move(grid), std::move(values)}, growth_K, diss);
}

double DriftSpec::scalar(double x) const {
  return std::visit(overloaded{
                        [&](const OuForm& f) { return -f.beta * x; },
                        [&](const Parametric1dForm& f) { return parametric_value(f, x); },
                        [&](const PotentialForm& f) { return -2.0 * f.potential.f_prime(x * x) * x; },
                        [&](const TabulatedForm& f) { return tabulated_value(f, x); },
                    },
                    form_);
}

double DriftSpec::operator()(double x) const { return scalar(x); }

void DriftSpec::evaluate(std::span<const double> x, std::span<double> out) const {
  if (dim_ == 1) {
    out[0] = scalar(x[0]);
    return;
  }
  if (const auto* ou = std::get_if<OuForm>(&form_)) {
    for (int i = 0; i < dim_; ++i) out[i] = -ou->beta * x[i];
    return;
  }
  const auto& pot = std::get<PotentialForm>(form_).potential;
  double s = 0.0;
  for (int i = 0; i < dim_; ++i) s += x[i] * x[i];
  const double scale = -2.0 * pot.f_prime(s);
  for (int i = 0; i < dim_; ++i) out[i] = scale * x[i];
}

std::optional<double> DriftSpec::ou_beta() const {
  if (const auto* ou = std::get_if<OuForm>(&form_)) return ou->beta;
  if (const auto* pot = std::get_if<PotentialForm>(&form_)) {
    if (pot->potential.kind == ProfileKind::quadratic) return pot->potential.params[0];
  }
  return std::nullopt;
}

const PotentialSpec* DriftSpec::potential_spec() const {
  if (const auto* pot = std::get_if<PotentialForm>(&form_)) return &pot->potential;
  return nullptr;
}

std::optional<double> DriftSpec::potential_value(std::span<const double> x) const {
  double s = 0.0;
  for (double v : x) s += v * v;
  if (const auto* ou = std::get_if<OuForm>(&form_)) return 0.5 * ou->beta * s;
  if (const auto* pot = std::get_if<PotentialForm>(&form_)) return pot->potential.f(s);
  return std::nullopt;
}

std::string DriftSpec::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const OuForm& f) { os << "ou(beta=" << f.beta << ")"; },
                 [&](const Parametric1dForm& f) {
                   os << f.id << '(';
                   for (std::size_t i = 0; i < f.params.size(); ++i)
                     os << (i ? ", " : "") << f.params[i];
                   os << ')';
                 },
                 [&](const PotentialForm& f) {
                   os << "potential:" << to_string(f.potential.kind) << '(';
                   for (std::size_t i = 0; i < f.potential.params.size(); ++i)
                     os << (i ? ", " : "") << f.potential.params[i];
                   os << ')';
                 },
                 [&](const TabulatedForm& f) { os << "tabulated[" << f.grid.size() << " nodes]"; },
             },
             form_);
  if (dim_ > 1) os << " d=" << dim_;
  return os.str();
}

// ---------------------------------------------------------------------------
// validate_drift

std::string to_string(Constraint c) {
  switch (c) {
    case Constraint::growth:
      return "growth";
    case Constraint::dissipativity:
      return "dissipativity";
    case Constraint::ou_beta_range:
      return "ou_beta_range";
    case Constraint::profile_slope:
      return "profile_slope";
    case Constraint::profile_lipschitz:
      return "profile_lipschitz";
    case Constraint::profile_tail:
      return "profile_tail";
  }
  return "unknown";
}

std::string ValidationReport::summary(std::size_t max_items) const {
  if (violations.empty()) return "compliant";
  std::ostringstream os;
  os << violations.size() << " violation(s)";
  for (std::size_t i = 0; i < violations.size() && i < max_items; ++i) {
    const auto& v = violations[i];
    os << "; " << to_string(v.constraint) << " at " << format_point(v.point) << ": measured "
       << v.measured << " vs bound " << v.bound;
  }
  return os.str();
}

ValidationReport validate_drift(const DriftSpec& spec, double grid_halfwidth, int grid_points) {
  require(grid_points >= 2, "validate_drift needs grid_points >= 2");
  require(grid_halfwidth > 0.0, "validate_drift needs a positive half-width");
  const int d = spec.dim();
  const double K = spec.growth_K();
  const auto& diss = spec.dissipativity();
  ValidationReport report;

  if (auto beta = spec.ou_beta(); beta && std::holds_alternative<OuForm>(spec.form())) {
    if (*beta > K)
      report.violations.push_back({Constraint::ou_beta_range, {*beta}, *beta, K, K - *beta});
  }

  std::vector<double> b(d);
  auto check_point = [&](std::span<const double> x) {
    spec.evaluate(x, b);
    for (double v : b)
      if (!std::isfinite(v))
        throw EvaluationError("drift " + spec.describe() + " is not finite at " + format_point(x));
    const double r = norm(x);
    const double growth_bound = K * (1.0 + r);
    const double bnorm = norm(b);
    const double tol = 1e-12 * std::max(1.0, growth_bound);
    if (bnorm > growth_bound + tol)
      report.violations.push_back({Constraint::growth, std::vector<double>(x.begin(), x.end()),
                                   bnorm, growth_bound, growth_bound - bnorm});
    if (r >= diss.M) {
      double inner = 0.0;
      for (int i = 0; i < d; ++i) inner += b[i] * x[i];
      const double bound = -diss.r * std::pow(r, diss.alpha);
      if (inner > bound + 1e-12 * std::max(1.0, std::abs(bound)))
        report.violations.push_back({Constraint::dissipativity,
                                     std::vector<double>(x.begin(), x.end()), inner, bound,
                                     bound - inner});
    }
  };

  const auto axis = quad::linspace(-grid_halfwidth, grid_halfwidth, grid_points);
  if (d <= 3) {
    std::vector<int> idx(d, 0);
    std::vector<double> x(d);
    while (true) {
      for (int i = 0; i < d; ++i) x[i] = axis[idx[i]];
      check_point(x);
      int k = 0;
      while (k < d && ++idx[k] == grid_points) idx[k++] = 0;
      if (k == d) break;
    }
  } else {
    // Radial sampling: fixed pseudo-random directions times a radius grid.
    NormalStream rng(split_seed(0x5eedULL, static_cast<std::uint64_t>(d)));
    const auto radii = quad::linspace(0.0, grid_halfwidth, grid_points);
    std::vector<double> dir(d), x(d);
    for (int j = 0; j < 64 * d; ++j) {
      for (auto& v : dir) v = rng.normal();
      const double n = norm(dir);
      for (double r : radii) {
        for (int i = 0; i < d; ++i) x[i] = r * dir[i] / n;
        check_point(x);
      }
    }
  }

  if (const auto* pot = spec.potential_spec()) {
    const int s_points = 4 * grid_points;
    const double s_max = std::max(grid_halfwidth * grid_halfwidth * d, pot->M_f * 2.0);
    for (double s : quad::linspace(0.0, s_max, s_points)) {
      const double fp = pot->f_prime(s);
      const double fs = pot->f_second(s);
      if (std::abs(fp) > 0.5 * K * (1.0 + 1e-12))
        report.violations.push_back(
            {Constraint::profile_slope, {s}, std::abs(fp), 0.5 * K, 0.5 * K - std::abs(fp)});
      const double lip = 4.0 * s * std::abs(fs) + 2.0 * std::abs(fp);
      if (lip > pot->lipschitz_K2 * (1.0 + 1e-12))
        report.violations.push_back({Constraint::profile_lipschitz, {s}, lip, pot->lipschitz_K2,
                                     pot->lipschitz_K2 - lip});
      if (s >= pot->M_f && fp < pot->r_f * (1.0 - 1e-12))
        report.violations.push_back({Constraint::profile_tail, {s}, fp, pot->r_f, fp - pot->r_f});
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// StationaryLaw

double StationaryLaw::twice_cumulative_drift(double x) const {
  if (gradient_path_) {
    const double zero = 0.0;
    return -2.0 * (*spec_.potential_value(std::span<const double>(&x, 1)) -
                   *spec_.potential_value(std::span<const double>(&zero, 1)));
  }
  const std::size_t n = nodes_.size();
  const double L = quadrature_.half_width;
  const double h = nodes_[1] - nodes_[0];
  std::size_t k;
  if (x <= -L) {
    k = 0;
  } else if (x >= L) {
    k = n - 1;
  } else {
    k = std::min(n - 2, static_cast<std::size_t>((x + L) / h));
  }
  return 2.0 * cumulative_[k] + twice_integral(spec_, nodes_[k], x, std::max(h, 0.5));
}

double StationaryLaw::log_density(std::span<const double> x) const {
  if (spec_.dim() == 1 && !gradient_path_) return twice_cumulative_drift(x[0]) - log_normalizer_;
  return -2.0 * *spec_.potential_value(x) - log_normalizer_;
}

double StationaryLaw::density(std::span<const double> x) const { return std::exp(log_density(x)); }

double StationaryLaw::log_density(double x) const {
  return log_density(std::span<const double>(&x, 1));
}

double StationaryLaw::density(double x) const { return std::exp(log_density(x)); }

void StationaryLaw::build_cdf(std::span<const double> log_unnormalized) {
  const std::size_t n = nodes_.size();
  cdf_.assign(n, 0.0);
  std::vector<double> dens(n);
  for (std::size_t i = 0; i < n; ++i) dens[i] = std::exp(log_unnormalized[i] - log_normalizer_);
  for (std::size_t i = 1; i < n; ++i)
    cdf_[i] = cdf_[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (nodes_[i] - nodes_[i - 1]);
  const double total = cdf_.back();
  for (auto& c : cdf_) c /= total;
}

namespace {

struct OneDimTable {
  std::vector<double> nodes;
  std::vector<double> log_values;  // unnormalized log density at nodes
  std::vector<double> cumulative;  // int_0^x b at nodes (empty on the gradient path)
  double log_integral = 0.0;
};

// Simpson with node doubling; `build` fills the table for a node count.
template <class Build>
OneDimTable converge_1d(const QuadratureConfig& cfg, double L, Build&& build) {
  int nodes = cfg.initial_nodes | 1;
  OneDimTable prev = build(nodes);
  while (true) {
    const long long next_ll = 2LL * (nodes - 1) + 1;
    if (next_ll > cfg.max_nodes)
      throw AccuracyError("stationary normalizer did not converge on [-" + std::to_string(L) +
                              ", " + std::to_string(L) + "] within " +
                              std::to_string(cfg.max_nodes) + " nodes",
                          std::exp(prev.log_integral));
    nodes = static_cast<int>(next_ll);
    OneDimTable cur = build(nodes);
    const double change = std::abs(std::expm1(cur.log_integral - prev.log_integral));
    if (!std::isfinite(cur.log_integral))
      throw DomainError("stationary normalizer is not finite");
    if (change < cfg.rel_tol) return cur;
    prev = std::move(cur);
  }
}

double simpson_log_integral(std::span<const double> log_values, double h) {
  const auto w = quad::simpson_weights(log_values.size(), h);
  std::vector<double> terms(log_values.size());
  for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = log_values[i] + std::log(w[i]);
  return quad::log_sum_exp(terms);
}

}  // namespace

StationaryLaw stationary_density_1d(const DriftSpec& spec, const QuadratureConfig& cfg) {
  require(spec.dim() == 1, "stationary_density_1d needs d = 1");
  const double L = cfg.half_width > 0.0 ? cfg.half_width : spec.default_half_width();
  auto build = [&](int n) {
    OneDimTable t;
    t.nodes = quad::linspace(-L, L, static_cast<std::size_t>(n));
    const std::size_t c = static_cast<std::size_t>(n - 1) / 2;
    t.nodes[c] = 0.0;
    t.cumulative.assign(n, 0.0);
    auto b = [&](double y) { return spec(y); };
    for (std::size_t k = c + 1; k < t.nodes.size(); ++k)
      t.cumulative[k] = t.cumulative[k - 1] + quad::gauss_legendre(b, t.nodes[k - 1], t.nodes[k]);
    for (std::size_t k = c; k-- > 0;)
      t.cumulative[k] = t.cumulative[k + 1] - quad::gauss_legendre(b, t.nodes[k], t.nodes[k + 1]);
    t.log_values.resize(n);
    for (int k = 0; k < n; ++k) {
      t.log_values[k] = 2.0 * t.cumulative[k];
      if (!std::isfinite(t.log_values[k]))
        throw EvaluationError("cumulative drift not finite at x = " +
                              std::to_string(t.nodes[k]));
    }
    t.log_integral = simpson_log_integral(t.log_values, t.nodes[1] - t.nodes[0]);
    return t;
  };
  OneDimTable t = converge_1d(cfg, L, build);
  StationaryLaw law(spec);
  law.log_normalizer_ = t.log_integral;
  law.quadrature_ = {L, static_cast<int>(t.nodes.size()), 0.0, false};
  law.nodes_ = std::move(t.nodes);
  law.cumulative_ = std::move(t.cumulative);
  law.build_cdf(t.log_values);
  return law;
}

StationaryLaw stationary_density_potential(const DriftSpec& spec, const QuadratureConfig& cfg) {
  const int d = spec.dim();
  std::vector<double> origin(d, 0.0);
  require(spec.potential_value(origin).has_value(),
          "stationary_density_potential needs a potential (or OU) drift");
  auto V = [&](std::span<const double> x) { return *spec.potential_value(x); };
  const double L_default = cfg.half_width > 0.0 ? cfg.half_width : spec.default_half_width();

  StationaryLaw law(spec);
  law.gradient_path_ = true;

  if (d == 1) {
    auto build = [&](int n) {
      OneDimTable t;
      t.nodes = quad::linspace(-L_default, L_default, static_cast<std::size_t>(n));
      t.log_values.resize(n);
      for (int k = 0; k < n; ++k) t.log_values[k] = -2.0 * V(std::span<const double>(&t.nodes[k], 1));
      t.log_integral = simpson_log_integral(t.log_values, t.nodes[1] - t.nodes[0]);
      return t;
    };
    OneDimTable t = converge_1d(cfg, L_default, build);
    law.log_normalizer_ = t.log_integral;
    law.quadrature_ = {L_default, static_cast<int>(t.nodes.size()), 0.0, false};
    law.nodes_ = std::move(t.nodes);
    law.build_cdf(t.log_values);
    return law;
  }

  if (d <= 3) {
    // Radial potentials: trim the box where exp(-2V) has fallen kLogFloorNats
    // below its peak along the radius.
    const auto s_grid = quad::linspace(0.0, L_default * L_default, 4001);
    double vmin = INFINITY;
    std::vector<double> probe(d, 0.0);
    for (double s : s_grid) {
      probe[0] = std::sqrt(s);
      vmin = std::min(vmin, V(probe));
    }
    double L = L_default;
    for (double s : s_grid) {
      probe[0] = std::sqrt(s);
      if (probe[0] > spec.dissipativity().M && 2.0 * (V(probe) - vmin) > kLogFloorNats) {
        L = std::min(L_default, probe[0]);
        break;
      }
    }
    auto tensor = [&](int n) {
      const auto axis = quad::linspace(-L, L, static_cast<std::size_t>(n));
      const auto w = quad::simpson_weights(static_cast<std::size_t>(n), axis[1] - axis[0]);
      std::vector<double> x(d);
      std::vector<int> idx(d, 0);
      // Accumulate exp(-2(V - vmin)) so nothing overflows.
      double sum = 0.0;
      while (true) {
        double wt = 1.0;
        for (int i = 0; i < d; ++i) {
          x[i] = axis[idx[i]];
          wt *= w[idx[i]];
        }
        sum += wt * std::exp(-2.0 * (V(x) - vmin));
        int k = 0;
        while (k < d && ++idx[k] == n) idx[k++] = 0;
        if (k == d) break;
      }
      return std::log(sum) - 2.0 * vmin;
    };
    int n = 65;
    double prev = tensor(n);
    while (true) {
      const int next = 2 * (n - 1) + 1;
      if (next > cfg.max_nodes_tensor)
        throw AccuracyError("tensor normalizer did not converge", std::exp(prev));
      n = next;
      const double cur = tensor(n);
      if (!std::isfinite(cur)) throw DomainError("normalizer C_b is not finite");
      if (std::abs(std::expm1(cur - prev)) < cfg.rel_tol_tensor) {
        law.log_normalizer_ = cur;
        law.quadrature_ = {L, n, 0.0, false};
        return law;
      }
      prev = cur;
    }
  }

  // d > 3: importance sampling with an isotropic Gaussian proposal whose
  // variance 1/r follows the declared dissipativity rate.
  const double sigma2 = 1.0 / spec.dissipativity().r;
  const double log_q_norm = -0.5 * d * std::log(2.0 * M_PI * sigma2);
  NormalStream rng(cfg.mc_seed);
  std::vector<double> x(d), log_w(cfg.mc_samples);
  for (std::size_t j = 0; j < cfg.mc_samples; ++j) {
    double r2 = 0.0;
    for (auto& v : x) {
      v = std::sqrt(sigma2) * rng.normal();
      r2 += v * v;
    }
    log_w[j] = -2.0 * V(x) - (log_q_norm - 0.5 * r2 / sigma2);
  }
  const double lmax = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(log_w.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = std::exp(log_w[j] - lmax);
  const auto me = quad::mean_and_error(w);
  if (!(me.mean > 0.0) || !std::isfinite(lmax))
    throw DomainError("importance-sampling estimate of C_b is not finite");
  law.log_normalizer_ = lmax + std::log(me.mean);
  law.quadrature_ = {L_default, 0, std::exp(lmax) * me.std_error, true};
  return law;
}

StationaryLaw stationary_law(const DriftSpec& spec, const QuadratureConfig& cfg) {
  if (spec.dim() == 1) return stationary_density_1d(spec, cfg);
  return stationary_density_potential(spec, cfg);
}

// ---------------------------------------------------------------------------
// scale_function

double scale_function(const DriftSpec& spec, double y) {
  require(spec.dim() == 1, "scale_function needs d = 1");
  if (y == 0.0) return 0.0;
  const double width = 0.1;
  const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(y) / width)));
  const double step = y / panels;
  auto b = [&](double z) { return spec(z); };
  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(panels) * 10);
  double H0 = 0.0;  // int_0^{z0} b
  for (int p = 0; p < panels; ++p) {
    const double z0 = step * p;
    const double z1 = (p + 1 == panels) ? y : z0 + step;
    const auto rule = quad::gauss_legendre_nodes(z0, z1);
    for (std::size_t j = 0; j < rule.x.size(); ++j) {
      const double H = H0 + quad::gauss_legendre(b, z0, rule.x[j]);
      log_terms.push_back(-2.0 * H + std::log(std::abs(rule.w[j])));
    }
    H0 += quad::gauss_legendre(b, z0, z1);
  }
  const double log_abs = quad::log_sum_exp(log_terms);
  const double value = std::exp(log_abs);
  if (!std::isfinite(value))
    throw RangeError("scale function overflows at y = " + std::to_string(y) +
                     " (log|s_b(y)| = " + std::to_string(log_abs) + ")");
  return y > 0 ? value : -value;
}

// ---------------------------------------------------------------------------
// sample_stationary

StationarySample sample_stationary(const DriftSpec& spec, const StationaryLaw& law, std::size_t n,
                                   std::uint64_t seed) {
  require(law.dim() == spec.dim(), "stationary law dimension does not match the drift");
  StationarySample out;
  out.dim = spec.dim();
  if (n == 0) return out;
  out.points.resize(n * static_cast<std::size_t>(out.dim));
  NormalStream rng(seed);

  if (out.dim == 1) {
    const auto nodes = law.nodes();
    const auto cdf = law.cdf();
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform();
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      std::size_t k = static_cast<std::size_t>(it - cdf.begin());
      k = std::clamp<std::size_t>(k, 1, cdf.size() - 1);
      const double c0 = cdf[k - 1], c1 = cdf[k];
      const double t = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
      out.points[i] = nodes[k - 1] + t * (nodes[k] - nodes[k - 1]);
    }
    return out;
  }

  const int d = out.dim;
  require(spec.potential_value(std::vector<double>(d, 0.0)).has_value(),
          "Metropolis sampling needs a potential (or OU) drift");
  constexpr double step = 0.5;
  const std::size_t burn_in =
      std::max<std::size_t>(1000, static_cast<std::size_t>(std::ceil(10.0 * std::sqrt(double(n)))));
  std::vector<double> x(d, 0.0), prop(d);
  double log_target = -2.0 * *spec.potential_value(x);
  std::size_t accepted = 0, proposals = 0;
  for (std::size_t it = 0; it < burn_in + n; ++it) {
    for (int i = 0; i < d; ++i) prop[i] = x[i] + step * rng.normal();
    const double lp = -2.0 * *spec.potential_value(prop);
    const double u = rng.uniform();
    ++proposals;
    if (std::log(u) < lp - log_target) {
      x = prop;
      log_target = lp;
      ++accepted;
    }
    if (it >= burn_in) std::copy(x.begin(), x.end(), out.points.begin() + (it - burn_in) * d);
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposals);
  if (out.acceptance_rate < 0.05 || out.acceptance_rate > 0.95)
    out.warnings.push_back("Metropolis acceptance rate " + std::to_string(out.acceptance_rate) +
                           " outside [0.05, 0.95]");
  return out;
}

}  // namespace driftbayes
