#include "driftbayes/prior_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "driftbayes/divergence.hpp"
#include "driftbayes/errors.hpp"
#include "driftbayes/rng.hpp"

namespace driftbayes {

namespace {

// Relative slack on ball membership so that exact grid arithmetic (a sample
// sitting exactly eps away) is not lost to rounding.
constexpr double kBallTolerance = 1e-9;
// Grid slack allowed relative to the finest eps, and the sample ceiling.
constexpr double kSlackFraction = 0.25;
constexpr double kMaxSamples = 4e6;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

// Evaluation points on [-m, m]^d shared by the metric and the net builder.
std::vector<double> metric_points(int d, int m, int grid_points) {
  std::vector<double> pts;
  if (d <= 3) {
    const auto axis = quad::linspace(-m, m, static_cast<std::size_t>(grid_points));
    std::vector<int> idx(d, 0);
    while (true) {
      for (int i = 0; i < d; ++i) pts.push_back(axis[idx[i]]);
      int k = 0;
      while (k < d && ++idx[k] == grid_points) idx[k++] = 0;
      if (k == d) break;
    }
    return pts;
  }
  // Face centres, the points +-m along each axis and uniform interior draws.
  for (int i = 0; i < d; ++i)
    for (double sgn : {-1.0, 1.0}) {
      for (int j = 0; j < d; ++j) pts.push_back(j == i ? sgn * m : 0.0);
    }
  NormalStream rng(0x5eedULL + static_cast<std::uint64_t>(m));
  const int interior = 64 * grid_points;
  for (int k = 0; k < interior; ++k)
    for (int j = 0; j < d; ++j) pts.push_back(m * (2.0 * rng.uniform() - 1.0));
  return pts;
}

// Family members are radial, b(x) = g(|x|^2) x with g = -2 f', so
//   max_i sup_x |b_a,i - b_b,i| = max_s |g_a(s) - g_b(s)| w(s),
// where s runs over the distinct squared radii of the metric points and w(s)
// is the largest |x_i| among points of that radius. Signatures store g(s) w(s)
// per distinct s, which gives the grid sup metric exactly at a fraction of
// the size.
struct RadialPoints {
  std::vector<double> s;
  std::vector<double> w;
};

RadialPoints radial_points(int d, int m, int grid_points) {
  const auto pts = metric_points(d, m, grid_points);
  std::map<double, double> by_radius;
  for (std::size_t k = 0; k < pts.size(); k += d) {
    double s2 = 0.0, w = 0.0;
    for (int j = 0; j < d; ++j) {
      s2 += pts[k + j] * pts[k + j];
      w = std::max(w, std::abs(pts[k + j]));
    }
    auto& slot = by_radius[s2];
    slot = std::max(slot, w);
  }
  RadialPoints out;
  for (const auto& [s2, w] : by_radius) {
    out.s.push_back(s2);
    out.w.push_back(w);
  }
  return out;
}

// Computed from the profile alone so that boundary parameters without a
// valid class (r_f = 0) can still be measured.
std::vector<double> profile_signature(const PotentialSpec& ps, const RadialPoints& pts) {
  std::vector<double> sig(pts.s.size());
  for (std::size_t k = 0; k < sig.size(); ++k) sig[k] = -2.0 * ps.f_prime(pts.s[k]) * pts.w[k];
  return sig;
}

double sup_distance(const double* a, const double* b, std::size_t len) {
  double m = 0.0;
  for (std::size_t k = 0; k < len; ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

bool inside(double dist, double eps) { return dist <= eps * (1.0 + kBallTolerance); }

struct SampleSet {
  std::size_t p = 1;
  std::vector<double> theta;  // row-major
  std::size_t size() const { return theta.size() / p; }
  std::span<const double> at(std::size_t i) const {
    return std::span<const double>(theta).subspan(i * p, p);
  }
};

SampleSet grid_sample(const FunctionFamily& fam, std::size_t per_axis) {
  SampleSet s;
  s.p = fam.parameter_dim();
  std::vector<std::size_t> idx(s.p, 0);
  while (true) {
    for (std::size_t j = 0; j < s.p; ++j) {
      // (hi - lo) * k / (g - 1) keeps round parameter values exact.
      const double span = fam.upper[j] - fam.lower[j];
      s.theta.push_back(fam.lower[j] + span * static_cast<double>(idx[j]) /
                                           static_cast<double>(per_axis - 1));
    }
    std::size_t k = s.p;
    while (k > 0) {
      --k;
      if (++idx[k] < per_axis) break;
      idx[k] = 0;
      if (k == 0) return s;
    }
  }
}

SampleSet random_sample(const FunctionFamily& fam, std::size_t n, std::uint64_t seed) {
  SampleSet s;
  s.p = fam.parameter_dim();
  NormalStream rng(seed);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < s.p; ++j) {
      const double u = rng.uniform();
      const double span = fam.upper[j] - fam.lower[j];
      // Draw from (lo, hi] when the lower end is open, [lo, hi) otherwise.
      const bool open = j == 0 && fam.lower_open;
      s.theta.push_back(open ? fam.upper[j] - span * u : fam.lower[j] + span * u);
    }
  return s;
}

struct Signatures {
  std::size_t len = 0;
  std::vector<double> values;
  const double* row(std::size_t i) const { return values.data() + i * len; }
  double dist(std::size_t i, std::size_t j) const { return sup_distance(row(i), row(j), len); }
};

Signatures signatures(const FunctionFamily& fam, const SampleSet& s, const RadialPoints& pts) {
  Signatures sig;
  sig.len = pts.s.size();
  sig.values.resize(sig.len * s.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(s.size()); ++i) {
    const auto row = profile_signature(fam.profile(s.at(i)), pts);
    std::copy(row.begin(), row.end(), sig.values.begin() + i * sig.len);
  }
  return sig;
}

// Sweep covering. The first uncovered sample u is covered by the valid
// candidate reachable from both u and the last covered sample before it that
// lies farthest along the sweep, so that consecutive balls overlap.
std::vector<std::size_t> sweep_cover(const Signatures& sig, const std::vector<char>& valid,
                                     double eps, std::size_t cap, int m, int l) {
  const std::size_t n = valid.size();
  std::vector<char> covered(n, 0);
  std::vector<std::size_t> centres;
  std::size_t u = 0;
  while (true) {
    while (u < n && covered[u]) ++u;
    if (u == n) break;
    const std::size_t anchor = (u > 0 && covered[u - 1]) ? u - 1 : u;
    std::size_t best = n;
    double best_reach = -1.0;
    for (std::size_t j = anchor; j < n; ++j) {
      if (!valid[j]) continue;
      if (!inside(sig.dist(u, j), eps)) continue;
      const double reach = sig.dist(anchor, j);
      if (!inside(reach, eps)) continue;
      if (reach >= best_reach) {
        best_reach = reach;
        best = j;
      }
    }
    if (best == n) {
      // Fall back to any valid sample that covers u.
      for (std::size_t j = 0; j < n && best == n; ++j)
        if (valid[j] && inside(sig.dist(u, j), eps)) best = j;
    }
    if (best == n) {
      std::ostringstream msg;
      msg << "no admissible atom covers sample " << u << " at level (m=" << m << ", l=" << l
          << ")";
      throw CapacityError(msg.str());
    }
    centres.push_back(best);
    if (centres.size() > cap) {
      std::ostringstream msg;
      msg << "covering at level (m=" << m << ", l=" << l << ") exceeds the atom cap of " << cap;
      throw CapacityError(msg.str());
    }
    for (std::size_t k = 0; k < n; ++k)
      if (!covered[k] && inside(sig.dist(best, k), eps)) covered[k] = 1;
  }
  return centres;
}

// Half the summed per-axis maximum distance between grid neighbours: a bound
// (for locally linear maps) on how far a point inside a grid cell can be
// from its nearest corner.
double grid_slack(const Signatures& sig, std::size_t p, std::size_t per_axis) {
  const std::size_t n = sig.values.size() / sig.len;
  double slack = 0.0;
  std::size_t stride = 1;
  for (std::size_t j = p; j-- > 0;) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t coord = (i / stride) % per_axis;
      if (coord + 1 < per_axis) worst = std::max(worst, sig.dist(i, i + stride));
    }
    slack += 0.5 * worst;
    stride *= per_axis;
  }
  return slack;
}

double worst_ratio(const Signatures& fresh, const Signatures& atoms, double eps) {
  const std::size_t nf = fresh.values.size() / std::max<std::size_t>(fresh.len, 1);
  const std::size_t na = atoms.values.size() / std::max<std::size_t>(atoms.len, 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < nf; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < na && best > 0.0; ++j)
      best = std::min(best, sup_distance(fresh.row(i), atoms.row(j), fresh.len));
    worst = std::max(worst, best / eps);
  }
  return worst;
}

std::vector<double> default_weights(std::vector<double> q, int n, const char* name) {
  if (q.empty()) {
    for (int j = 1; j <= n; ++j) q.push_back(std::ldexp(1.0, -j));
    return q;
  }
  require(static_cast<int>(q.size()) >= n,
          std::string(name) + " needs at least as many entries as levels used");
  double sum = 0.0;
  for (double v : q) {
    require(std::isfinite(v) && v > 0.0, std::string(name) + " entries must be positive");
    sum += v;
  }
  require(sum <= 1.0 + 1e-12, std::string(name) + " must sum to at most 1");
  return q;
}

std::uint64_t level_seed(std::uint64_t seed, int m, int l) {
  return split_seed(seed, 1000003ULL * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(l));
}

}  // namespace

// ---------------------------------------------------------------------------
// FunctionFamily

void FunctionFamily::check() const {
  require(dim >= 1, "family dimension must be positive");
  const std::size_t need = kind == ProfileKind::quadratic ? 1 : 2;
  require(lower.size() == need && upper.size() == need,
          "family box has the wrong number of parameters for " + to_string(kind));
  for (std::size_t j = 0; j < need; ++j)
    require(std::isfinite(lower[j]) && std::isfinite(upper[j]) && lower[j] < upper[j],
            "family box needs finite lower < upper");
  require(K1 > 0.0 && K2 > 0.0 && M_f > 0.0, "family constants must be positive");
}

double FunctionFamily::tail_rate(std::span<const double> theta) const {
  if (kind == ProfileKind::quadratic) return 0.5 * theta[0];
  return 0.5 * theta[0] + std::min(0.0, theta[1]) / (2.0 * std::sqrt(1.0 + M_f));
}

PotentialSpec FunctionFamily::profile(std::span<const double> theta) const {
  PotentialSpec ps;
  ps.kind = kind;
  ps.params.assign(theta.begin(), theta.end());
  ps.lipschitz_K2 = K2;
  ps.M_f = M_f;
  ps.r_f = tail_rate(theta);
  return ps;
}

DriftSpec FunctionFamily::drift(std::span<const double> theta) const {
  const PotentialSpec ps = profile(theta);
  if (!(ps.r_f > 0.0)) {
    std::ostringstream msg;
    msg << "family member has tail rate r_f = " << ps.r_f << " <= 0";
    throw ValidationError(msg.str());
  }
  const Dissipativity diss{2.0 * ps.r_f * std::sqrt(M_f), std::sqrt(M_f), 1.0};
  return DriftSpec::potential(dim, ps, K1, diss);
}

FunctionFamily ou_family(double lo, double hi, double K1, int dim) {
  FunctionFamily f;
  f.dim = dim;
  f.kind = ProfileKind::quadratic;
  f.lower = {lo};
  f.upper = {hi};
  f.lower_open = true;
  f.K1 = K1;
  f.K2 = K1;
  f.M_f = 1.0;
  return f;
}

double PriorNet::raw_weight(std::size_t i) const {
  const auto& pv = provenance.at(i);
  return q1[pv.m - 1] * q2[pv.l - 1] / level_counts[pv.m - 1][pv.l - 1];
}

// ---------------------------------------------------------------------------

double sup_metric(const DriftSpec& a, const DriftSpec& b, int m, int grid_points) {
  require(a.dim() == b.dim(), "sup_metric needs drifts of equal dimension");
  require(m >= 1 && grid_points >= 2, "sup_metric needs m >= 1 and at least 2 grid points");
  const int d = a.dim();
  const auto pts = metric_points(d, m, grid_points);
  std::vector<double> ba(d), bb(d);
  double worst = 0.0;
  for (std::size_t k = 0; k < pts.size(); k += d) {
    const std::span<const double> x(pts.data() + k, d);
    a.evaluate(x, ba);
    b.evaluate(x, bb);
    for (int j = 0; j < d; ++j) worst = std::max(worst, std::abs(ba[j] - bb[j]));
  }
  return worst;
}

PriorNet build_net(const FunctionFamily& family, const NetConfig& cfg) {
  family.check();
  require(cfg.m_max >= 1 && cfg.l_max >= 1, "m_max and l_max must be >= 1");
  require(static_cast<int>(cfg.eps_schedule.size()) >= cfg.l_max,
          "eps schedule needs at least l_max entries");
  for (std::size_t l = 0; l < cfg.eps_schedule.size(); ++l) {
    require(cfg.eps_schedule[l] > 0.0, "eps schedule entries must be positive");
    if (l > 0)
      require(cfg.eps_schedule[l] < cfg.eps_schedule[l - 1], "eps schedule must be decreasing");
  }
  require(cfg.samples_per_parameter >= 2 && cfg.metric_grid_points >= 2,
          "net sampling parameters are too small");

  PriorNet net;
  net.eps_schedule.assign(cfg.eps_schedule.begin(), cfg.eps_schedule.begin() + cfg.l_max);
  net.q1 = default_weights(cfg.q1, cfg.m_max, "q1");
  net.q2 = default_weights(cfg.q2, cfg.l_max, "q2");
  net.metric_grid_points = cfg.metric_grid_points;
  net.level_counts.assign(cfg.m_max, std::vector<int>(cfg.l_max, 0));

  const std::size_t p = family.parameter_dim();
  const std::size_t budget = static_cast<std::size_t>(cfg.samples_per_parameter) * p;
  const auto base_axis = static_cast<std::size_t>(
      std::ceil(std::pow(static_cast<double>(budget), 1.0 / static_cast<double>(p)))) + 1;
  const double eps_min = net.eps_schedule.back();

  for (int m = 1; m <= cfg.m_max; ++m) {
    const auto pts = radial_points(family.dim, m, cfg.metric_grid_points);
    // One parameter dimension: the overlapping sweep needs no slack. More
    // dimensions: refine the grid until its slack is at most a quarter of
    // the finest eps, then shrink the ball radius by the slack.
    std::size_t per_axis = base_axis;
    SampleSet sample = grid_sample(family, per_axis);
    Signatures sig = signatures(family, sample, pts);
    double slack = p == 1 ? 0.0 : grid_slack(sig, p, per_axis);
    for (int refine = 0; refine < 6 && slack > kSlackFraction * eps_min; ++refine) {
      per_axis = static_cast<std::size_t>(
                     std::ceil(1.05 * (per_axis - 1) * slack / (kSlackFraction * eps_min))) + 1;
      if (std::pow(static_cast<double>(per_axis), static_cast<double>(p)) > kMaxSamples) {
        std::ostringstream msg;
        msg << "covering sample for eps = " << eps_min << " at m = " << m << " would need "
            << per_axis << " points per parameter axis";
        throw CapacityError(msg.str());
      }
      sample = grid_sample(family, per_axis);
      sig = signatures(family, sample, pts);
      slack = grid_slack(sig, p, per_axis);
    }
    std::vector<char> valid(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i)
      valid[i] = family.tail_rate(sample.at(i)) > 0.0;
    for (int l = 1; l <= cfg.l_max; ++l) {
      const double eps = net.eps_schedule[l - 1];
      if (slack >= eps) {
        std::ostringstream msg;
        msg << "covering sample too coarse for eps = " << eps << " at level (m=" << m
            << ", l=" << l << "); grid slack " << slack;
        throw CapacityError(msg.str());
      }
      const SampleSet fresh = random_sample(family, budget, level_seed(cfg.seed, m, l));
      const Signatures fresh_sig = signatures(family, fresh, pts);

      double eps_eff = eps - slack;
      std::vector<std::size_t> centres;
      bool passed = false;
      double ratio = 0.0;
      for (int attempt = 0; attempt < 8 && !passed; ++attempt) {
        centres = sweep_cover(sig, valid, eps_eff, cfg.atom_cap, m, l);
        Signatures atom_sig;
        atom_sig.len = sig.len;
        for (std::size_t c : centres)
          atom_sig.values.insert(atom_sig.values.end(), sig.row(c), sig.row(c) + sig.len);
        ratio = worst_ratio(fresh_sig, atom_sig, eps);
        passed = ratio <= 1.0 + kBallTolerance;
        eps_eff *= 0.85;
      }
      if (!passed) {
        net.covering_certified = false;
        std::ostringstream msg;
        msg << "covering at level (m=" << m << ", l=" << l
            << ") failed its audit: worst distance / eps = " << ratio;
        net.warnings.push_back(msg.str());
      }
      net.level_counts[m - 1][l - 1] = static_cast<int>(centres.size());
      int n = 0;
      for (std::size_t c : centres) {
        const auto theta = sample.at(c);
        net.atoms.push_back(family.drift(theta));
        net.parameters.emplace_back(theta.begin(), theta.end());
        net.provenance.push_back({m, l, ++n});
      }
      if (net.atoms.size() > cfg.atom_cap)
        throw CapacityError("net exceeds the atom cap of " + std::to_string(cfg.atom_cap) +
                            " at level (m=" + std::to_string(m) + ", l=" + std::to_string(l) +
                            ")");
    }
  }

  double total = 0.0;
  for (int m = 1; m <= cfg.m_max; ++m)
    for (int l = 1; l <= cfg.l_max; ++l) total += net.q1[m - 1] * net.q2[l - 1];
  net.truncation_mass = std::max(0.0, 1.0 - total);
  net.truncated = net.truncation_mass > 0.0;
  net.weights.resize(net.atoms.size());
  for (std::size_t i = 0; i < net.atoms.size(); ++i) net.weights[i] = net.raw_weight(i) / total;
  return net;
}

CoveringAudit audit_covering(const PriorNet& net, const FunctionFamily& family,
                             std::size_t samples, std::uint64_t seed) {
  family.check();
  CoveringAudit audit;
  audit.samples = samples;
  const SampleSet fresh = random_sample(family, samples, seed);
  const int m_max = static_cast<int>(net.level_counts.size());
  for (int m = 1; m <= m_max; ++m) {
    const auto pts = radial_points(family.dim, m, net.metric_grid_points);
    const Signatures fresh_sig = signatures(family, fresh, pts);
    const int l_max = static_cast<int>(net.level_counts[m - 1].size());
    for (int l = 1; l <= l_max; ++l) {
      Signatures atom_sig;
      atom_sig.len = fresh_sig.len;
      for (std::size_t i = 0; i < net.size(); ++i) {
        if (net.provenance[i].m != m || net.provenance[i].l != l) continue;
        const auto row = profile_signature(family.profile(net.parameters[i]), pts);
        atom_sig.values.insert(atom_sig.values.end(), row.begin(), row.end());
      }
      const double ratio = worst_ratio(fresh_sig, atom_sig, net.eps_schedule[l - 1]);
      if (ratio > audit.worst_ratio) {
        audit.worst_ratio = ratio;
        audit.worst_level = {m, l, 0};
      }
    }
  }
  audit.passed = audit.worst_ratio <= 1.0 + kBallTolerance;
  return audit;
}

BallMass prior_ball_mass(const PriorNet& net, std::span<const double> distances, double radius) {
  require(distances.size() == net.size(), "one distance per atom is required");
  require(radius > 0.0, "ball radius must be positive");
  BallMass out;
  out.nearest_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < net.size(); ++i) {
    out.nearest_distance = std::min(out.nearest_distance, distances[i]);
    if (!(distances[i] < radius)) continue;
    out.mass += net.weights[i];
    ++out.atoms_inside;
    const std::pair<int, int> lvl{net.provenance[i].m, net.provenance[i].l};
    if (!out.minimal_level || lvl < *out.minimal_level) out.minimal_level = lvl;
  }
  return out;
}

BallMass prior_ball_mass(const PriorNet& net, const DriftSpec& b0, const StationaryLaw& law0,
                         double radius) {
  std::vector<double> dist(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) dist[i] = l2_mu_distance(net.atoms[i], b0, law0).value;
  return prior_ball_mass(net, dist, radius);
}

double tail_truncation_bound(const DriftSpec& b0, const StationaryLaw& law0, int m, double K) {
  require(m >= 0 && K > 0.0, "tail bound needs m >= 0 and K > 0");
  const int d = b0.dim();
  double tail = 0.0;
  if (d == 1) {
    const double L = law0.quadrature().half_width;
    if (m < L) {
      auto g = [&](double x) { return (1.0 + std::abs(x)) * (1.0 + std::abs(x)) * law0.density(x); };
      const int panels = std::max(1, static_cast<int>(std::ceil((L - m) / 0.05)));
      tail = quad::gauss_legendre(g, m, L, panels) + quad::gauss_legendre(g, -L, -m, panels);
    }
  } else {
    tail = integrate_stationary(law0, [&](std::span<const double> x) {
             double r2 = 0.0;
             for (double v : x) r2 += v * v;
             const double r = std::sqrt(r2);
             return r > m ? (1.0 + r) * (1.0 + r) : 0.0;
           }).value;
  }
  return 4.0 * K * K * d * std::max(0.0, tail);
}

}  // namespace driftbayes
