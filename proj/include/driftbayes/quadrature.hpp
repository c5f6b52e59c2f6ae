#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace driftbayes {

/// Settings for the composite-Simpson integrals behind stationary laws and
/// divergences. A half-width of 0 means "use the drift's default M + 25/r".
struct QuadratureConfig {
  double half_width = 0.0;
  int initial_nodes = 513;       // odd; doubled as 2(n-1)+1
  int max_nodes = (1 << 21) + 1;
  double rel_tol = 1e-8;
  /// Node cap per axis for tensor rules (d = 2, 3).
  int max_nodes_tensor = 1025;
  double rel_tol_tensor = 1e-7;
  /// Sample budget for the importance-sampling path (d > 3).
  std::size_t mc_samples = 200000;
  unsigned long long mc_seed = 12345;
};

namespace quad {

/// Simpson weights for an odd number of equally spaced nodes with spacing h.
inline std::vector<double> simpson_weights(std::size_t nodes, double h) {
  std::vector<double> w(nodes, 0.0);
  if (nodes == 1) return w;
  for (std::size_t i = 0; i < nodes; ++i) {
    if (i == 0 || i + 1 == nodes)
      w[i] = h / 3.0;
    else
      w[i] = (i % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
  }
  return w;
}

/// Equally spaced grid on [a, b] with the given number of nodes.
inline std::vector<double> linspace(double a, double b, std::size_t nodes) {
  std::vector<double> x(nodes);
  if (nodes == 1) {
    x[0] = 0.5 * (a + b);
    return x;
  }
  const double h = (b - a) / static_cast<double>(nodes - 1);
  for (std::size_t i = 0; i < nodes; ++i) x[i] = a + h * static_cast<double>(i);
  x.back() = b;
  return x;
}

/// 10-point Gauss-Legendre on [a, b].
template <class F>
double gauss_legendre(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
}

/// Composite 10-point Gauss-Legendre with the given number of equal panels.
template <class F>
double gauss_legendre(F&& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + h * p;
    const double hi = (p + 1 == panels) ? b : lo + h;
    sum += boost::math::quadrature::gauss<double, 10>::integrate(f, lo, hi);
  }
  return sum;
}

/// Nodes and weights of the 10-point Gauss-Legendre rule mapped to [a, b].
struct RuleNodes {
  std::array<double, 10> x;
  std::array<double, 10> w;
};

inline RuleNodes gauss_legendre_nodes(double a, double b) {
  using rule = boost::math::quadrature::gauss<double, 10>;
  const auto& abscissa = rule::abscissa();
  const auto& weights = rule::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  RuleNodes r{};
  for (std::size_t i = 0; i < abscissa.size(); ++i) {
    r.x[2 * i] = mid - half * abscissa[i];
    r.x[2 * i + 1] = mid + half * abscissa[i];
    r.w[2 * i] = half * weights[i];
    r.w[2 * i + 1] = half * weights[i];
  }
  return r;
}

/// Pairwise summation; fixed evaluation order so serial and parallel
/// reductions over the same array agree bitwise.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// log(sum_i exp(v_i)) with max shift. Returns -inf for an empty range or
/// all -inf entries.
inline double log_sum_exp(std::span<const double> v) {
  double m = -INFINITY;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Mean and standard error of the mean.
struct MeanError {
  double mean = 0.0;
  double std_error = 0.0;
};

inline MeanError mean_and_error(std::span<const double> v) {
  MeanError r;
  if (v.empty()) return r;
  const double n = static_cast<double>(v.size());
  r.mean = pairwise_sum(v) / n;
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.std_error = std::sqrt(ss / (n - 1.0) / n);
  return r;
}

}  // namespace quad
}  // namespace driftbayes
