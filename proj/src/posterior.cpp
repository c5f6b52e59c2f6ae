#include "driftbayes/posterior.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "driftbayes/divergence.hpp"
#include "driftbayes/errors.hpp"
#include "driftbayes/kernels.hpp"
#include "driftbayes/rng.hpp"

namespace driftbayes {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

// Stationary laws of the atoms; an atom whose law cannot be built is left
// empty and later receives a NaN likelihood.
std::vector<std::optional<StationaryLaw>> atom_laws(const PriorNet& net,
                                                    const QuadratureConfig& cfg) {
  std::vector<std::optional<StationaryLaw>> laws(net.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(net.size()); ++j) {
    try {
      laws[j].emplace(stationary_law(net.atoms[j], cfg));
    } catch (const std::exception&) {
    }
  }
  return laws;
}

std::vector<const StationaryLaw*> pointers(const std::vector<std::optional<StationaryLaw>>& laws) {
  std::vector<const StationaryLaw*> out(laws.size(), nullptr);
  for (std::size_t j = 0; j < laws.size(); ++j)
    if (laws[j]) out[j] = &*laws[j];
  return out;
}

std::vector<double> transition_terms(const PriorNet& net, const ObservationSeries& series,
                                     const LikelihoodOptions& opt) {
  std::vector<std::optional<StationaryLaw>> laws;
  if (opt.include_initial) laws = atom_laws(net, opt.quadrature);
  const auto ptrs = pointers(laws);
  std::vector<double> terms(net.size() * series.size());
  if (opt.parallel)
    kernels::parallel::atom_transition_terms(net.atoms, ptrs, series, opt.model,
                                             opt.include_initial, terms);
  else
    kernels::serial::atom_transition_terms(net.atoms, ptrs, series, opt.model,
                                           opt.include_initial, terms);
  return terms;
}

}  // namespace

double log_likelihood_ratio(const DriftSpec& b, const DriftSpec& b0,
                            const ObservationSeries& series, const TransitionModel& model,
                            const StationaryLaw* law_b, const StationaryLaw* law_b0) {
  series.check();
  require(series.size() > 0, "log_likelihood_ratio needs a non-empty series");
  require(b.dim() == series.dim && b0.dim() == series.dim,
          "log_likelihood_ratio: drift and series dimensions differ");
  model.check_compatible(b);
  model.check_compatible(b0);
  std::vector<double> terms;
  terms.reserve(series.size());
  if (law_b && law_b0) {
    const double t = law_b->log_density(series.at(0)) - law_b0->log_density(series.at(0));
    if (!std::isfinite(t))
      throw EvaluationError("log-likelihood ratio: initial factor log pi(X_0) is not finite");
    terms.push_back(t);
  }
  for (std::size_t i = 1; i < series.size(); ++i) {
    const std::uint64_t stream = split_seed(model.seed, i);
    const double t =
        log_transition_density(b, model, series.delta, series.at(i - 1), series.at(i), stream) -
        log_transition_density(b0, model, series.delta, series.at(i - 1), series.at(i), stream);
    if (!std::isfinite(t)) {
      std::ostringstream msg;
      msg << "log-likelihood ratio is not finite at transition " << i << " (X_" << i - 1
          << " -> X_" << i << ")";
      throw EvaluationError(msg.str());
    }
    terms.push_back(t);
  }
  return quad::pairwise_sum(terms);
}

namespace {

PosteriorResult posterior_from_ratios(const PriorNet& net, std::vector<double> llr,
                                      std::size_t transitions, std::string reference) {
  PosteriorResult post;
  post.n_used = transitions;
  post.reference = std::move(reference);
  post.log_likelihood_ratios = std::move(llr);
  post.log_weights_unnormalized.resize(net.size());
  std::size_t dropped = 0;
  for (std::size_t j = 0; j < net.size(); ++j) {
    const double r = post.log_likelihood_ratios[j];
    if (!std::isfinite(r)) {
      post.log_weights_unnormalized[j] = -INFINITY;
      ++dropped;
      std::ostringstream msg;
      msg << "atom " << j << " (m=" << net.provenance[j].m << ", l=" << net.provenance[j].l
          << ", n=" << net.provenance[j].n << ") has a non-finite likelihood; weight set to 0";
      post.warnings.push_back(msg.str());
      continue;
    }
    post.log_weights_unnormalized[j] = std::log(net.weights[j]) + r;
  }
  if (dropped == net.size()) throw EvaluationError("every atom has a non-finite likelihood");
  const auto& lw = post.log_weights_unnormalized;
  const double top = *std::max_element(lw.begin(), lw.end());
  post.weights.resize(net.size());
  for (std::size_t j = 0; j < net.size(); ++j) post.weights[j] = std::exp(lw[j] - top);
  const double total = quad::pairwise_sum(post.weights);
  double sum_sq = 0.0;
  for (std::size_t j = 0; j < net.size(); ++j) {
    post.weights[j] /= total;
    sum_sq += post.weights[j] * post.weights[j];
    if (post.weights[j] > post.weights[post.map_index]) post.map_index = j;
  }
  post.effective_atoms = 1.0 / sum_sq;
  return post;
}

std::vector<double> row_sums(std::span<const double> terms, std::size_t atoms, std::size_t width,
                             std::size_t used) {
  std::vector<double> out(atoms);
  for (std::size_t j = 0; j < atoms; ++j) out[j] = quad::pairwise_sum(terms.subspan(j * width, used));
  return out;
}

}  // namespace

PosteriorResult posterior_from_log_likelihoods(const PriorNet& net,
                                               std::span<const double> loglik,
                                               std::size_t transitions) {
  require(loglik.size() == net.size(), "one log-likelihood per atom is required");
  require(net.size() > 0, "the prior net is empty");
  std::vector<double> llr(net.size(), 0.0);
  if (transitions > 0) {
    double ref = NAN;
    for (double v : loglik)
      if (std::isfinite(v)) {
        ref = v;
        break;
      }
    for (std::size_t j = 0; j < net.size(); ++j) llr[j] = loglik[j] - ref;
  }
  return posterior_from_ratios(net, std::move(llr), transitions, "self-normalizing");
}

PosteriorResult compute_posterior(const PriorNet& net, const ObservationSeries& series,
                                  const LikelihoodOptions& opt,
                                  const std::optional<DriftSpec>& reference) {
  series.check();
  require(net.size() > 0, "the prior net is empty");
  require(net.atoms.front().dim() == series.dim, "net and series dimensions differ");
  PosteriorResult post;
  if (series.transitions() == 0) {
    std::vector<double> zeros(net.size(), 0.0);
    post = posterior_from_log_likelihoods(net, zeros, 0);
  } else {
    for (const auto& a : net.atoms) opt.model.check_compatible(a);
    const auto terms = transition_terms(net, series, opt);
    const std::size_t width = series.size();
    const auto loglik = row_sums(terms, net.size(), width, width);
    if (!reference) {
      post = posterior_from_log_likelihoods(net, loglik, series.transitions());
    } else {
      opt.model.check_compatible(*reference);
      std::optional<StationaryLaw> law;
      if (opt.include_initial) law.emplace(stationary_law(*reference, opt.quadrature));
      const StationaryLaw* ptr = law ? &*law : nullptr;
      std::vector<double> ref_terms(width);
      kernels::serial::atom_transition_terms(std::span<const DriftSpec>(&*reference, 1),
                                             std::span<const StationaryLaw* const>(&ptr, 1),
                                             series, opt.model, opt.include_initial, ref_terms);
      const double ref = quad::pairwise_sum(ref_terms);
      if (!std::isfinite(ref))
        throw EvaluationError("reference drift has a non-finite likelihood");
      std::vector<double> llr(net.size());
      for (std::size_t j = 0; j < net.size(); ++j) llr[j] = loglik[j] - ref;
      post = posterior_from_ratios(net, std::move(llr), series.transitions(),
                                   reference->describe());
    }
  }
  post.model = opt.model;
  return post;
}

ComplementMass neighborhood_distances(const PriorNet& net, const DriftSpec& b0,
                                      const StationaryLaw& law0, const Neighborhood& hood) {
  ComplementMass out;
  out.distances.resize(net.size());
  out.outside.resize(net.size());
  if (const auto* weak = std::get_if<WeakNeighborhood>(&hood)) {
    weak->probe.validate();
    for (std::size_t j = 0; j < net.size(); ++j) {
      out.distances[j] = weak_distance(net.atoms[j], b0, weak->model, weak->delta, weak->probe).value;
      out.outside[j] = out.distances[j] >= weak->probe.epsilon;
    }
  } else {
    const double radius = std::get<L2Neighborhood>(hood).radius;
    require(radius > 0.0, "L2 neighbourhood radius must be positive");
    for (std::size_t j = 0; j < net.size(); ++j) {
      out.distances[j] = l2_mu_distance(net.atoms[j], b0, law0).value;
      out.outside[j] = out.distances[j] >= radius;
    }
  }
  return out;
}

ComplementMass neighborhood_complement_mass(const PosteriorResult& posterior, const PriorNet& net,
                                            const DriftSpec& b0, const StationaryLaw& law0,
                                            const Neighborhood& hood) {
  require(posterior.weights.size() == net.size(), "posterior does not match the net");
  ComplementMass out = neighborhood_distances(net, b0, law0, hood);
  for (std::size_t j = 0; j < net.size(); ++j)
    if (out.outside[j]) out.mass += posterior.weights[j];
  return out;
}

ConsistencyCurve consistency_curve(const DriftSpec& b0, const StationaryLaw& law0,
                                   const PriorNet& net, const Neighborhood& hood,
                                   const CurveConfig& cfg) {
  require(!cfg.sample_sizes.empty(), "consistency curve needs at least one sample size");
  require(cfg.replications >= 1, "consistency curve needs at least one replication");
  const std::size_t n_max = *std::max_element(cfg.sample_sizes.begin(), cfg.sample_sizes.end());
  for (const auto& a : net.atoms) cfg.likelihood.model.check_compatible(a);

  const ComplementMass hood_info = neighborhood_distances(net, b0, law0, hood);
  std::vector<std::optional<StationaryLaw>> laws;
  if (cfg.likelihood.include_initial) laws = atom_laws(net, cfg.likelihood.quadrature);
  const auto ptrs = pointers(laws);

  ConsistencyCurve curve;
  curve.masses.assign(cfg.replications, std::vector<double>(cfg.sample_sizes.size(), 0.0));
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    const auto series =
        simulate_series(b0, law0, cfg.delta, n_max, cfg.scheme, split_seed(cfg.seed, r));
    std::vector<double> terms(net.size() * series.size());
    if (cfg.likelihood.parallel)
      kernels::parallel::atom_transition_terms(net.atoms, ptrs, series, cfg.likelihood.model,
                                               cfg.likelihood.include_initial, terms);
    else
      kernels::serial::atom_transition_terms(net.atoms, ptrs, series, cfg.likelihood.model,
                                             cfg.likelihood.include_initial, terms);
    const std::size_t width = series.size();
    for (std::size_t k = 0; k < cfg.sample_sizes.size(); ++k) {
      const std::size_t n = cfg.sample_sizes[k];
      const auto loglik = row_sums(terms, net.size(), width, n + 1);
      const auto post = posterior_from_log_likelihoods(net, loglik, n);
      if (r == 0 && !post.warnings.empty())
        curve.warnings.insert(curve.warnings.end(), post.warnings.begin(), post.warnings.end());
      double mass = 0.0;
      for (std::size_t j = 0; j < net.size(); ++j)
        if (hood_info.outside[j]) mass += post.weights[j];
      curve.masses[r][k] = mass;
    }
  }
  for (std::size_t k = 0; k < cfg.sample_sizes.size(); ++k) {
    std::vector<double> col(cfg.replications);
    for (std::size_t r = 0; r < cfg.replications; ++r) col[r] = curve.masses[r][k];
    const auto me = quad::mean_and_error(col);
    curve.rows.push_back({cfg.sample_sizes[k], me.mean, me.std_error});
  }
  return curve;
}

LikelihoodRatioPaths likelihood_ratio_paths(const DriftSpec& b, const DriftSpec& b0,
                                            const StationaryLaw& law_b, const StationaryLaw& law0,
                                            const TransitionModel& model, double delta,
                                            std::span<const std::size_t> ns,
                                            std::size_t replications, const SimScheme& scheme,
                                            std::uint64_t seed) {
  require(!ns.empty() && replications >= 1, "likelihood_ratio_paths needs sizes and replications");
  model.check_compatible(b);
  model.check_compatible(b0);
  const std::size_t n_max = *std::max_element(ns.begin(), ns.end());
  LikelihoodRatioPaths out;
  out.ns.assign(ns.begin(), ns.end());
  out.log_ratios.assign(replications, std::vector<double>(ns.size(), 0.0));
  const std::array<DriftSpec, 2> pair{b, b0};
  const std::array<const StationaryLaw*, 2> laws{&law_b, &law0};
  std::vector<std::string> errors(replications);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t rr = 0; rr < static_cast<std::ptrdiff_t>(replications); ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    try {
      const auto series = simulate_series(b0, law0, delta, n_max, scheme, split_seed(seed, r));
      const std::size_t width = series.size();
      std::vector<double> terms(2 * width);
      kernels::serial::atom_transition_terms(pair, laws, series, model, true, terms);
      for (std::size_t k = 0; k < ns.size(); ++k) {
        const auto sums = row_sums(terms, 2, width, ns[k] + 1);
        out.log_ratios[r][k] = sums[0] - sums[1];
      }
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw EvaluationError(e);
  return out;
}

}  // namespace driftbayes
