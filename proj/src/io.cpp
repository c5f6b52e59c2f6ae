#include "driftbayes/io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "driftbayes/errors.hpp"

namespace driftbayes::io {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError("config field '" + where + "': " + what);
}

const Json& field(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) fail(where + "." + key, "missing");
  return *it;
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

double number_or(const Json& j, const std::string& key, double def, const std::string& where) {
  if (!j.contains(key)) return def;
  return number(j.at(key), where + "." + key);
}

long long integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<long long>();
}

long long integer_or(const Json& j, const std::string& key, long long def,
                     const std::string& where) {
  if (!j.contains(key)) return def;
  return integer(j.at(key), where + "." + key);
}

std::string text(const Json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<double> numbers_or(const Json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) return {};
  return numbers(j.at(key), where + "." + key);
}

// Library errors raised while constructing a value are reported against the
// config field that produced them.
template <class F>
auto at_field(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.rfind("config field", 0) == 0) throw;
    fail(where, msg);
  }
}

Json dissipativity_json(const Dissipativity& d) {
  return Json{{"r", d.r}, {"M", d.M}, {"alpha", d.alpha}};
}

Dissipativity dissipativity_from_json(const Json& j, const std::string& where) {
  Dissipativity d;
  d.r = number(field(j, "r", where), where + ".r");
  d.M = number(field(j, "M", where), where + ".M");
  d.alpha = number_or(j, "alpha", 1.0, where);
  return d;
}

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Drifts

Json to_json(const DriftSpec& spec) {
  Json form;
  std::visit(overloaded{
                 [&](const OuForm& f) { form = Json{{"kind", "ou"}, {"beta", f.beta}}; },
                 [&](const Parametric1dForm& f) {
                   form = Json{{"kind", "parametric"}, {"id", f.id}, {"params", f.params}};
                 },
                 [&](const PotentialForm& f) {
                   form = Json{{"kind", "potential"},
                               {"profile", to_string(f.potential.kind)},
                               {"params", f.potential.params},
                               {"K2", f.potential.lipschitz_K2},
                               {"M_f", f.potential.M_f},
                               {"r_f", f.potential.r_f}};
                 },
                 [&](const TabulatedForm& f) {
                   form = Json{{"kind", "tabulated"}, {"grid", f.grid}, {"values", f.values}};
                 },
             },
             spec.form());
  return Json{{"dim", spec.dim()},
              {"form", form},
              {"growth_K", spec.growth_K()},
              {"dissipativity", dissipativity_json(spec.dissipativity())}};
}

DriftSpec drift_from_json(const Json& j, const std::string& where) {
  const int dim = static_cast<int>(integer_or(j, "dim", 1, where));
  const std::string fw = where + ".form";
  const Json& f = field(j, "form", where);
  const std::string kind = text(field(f, "kind", fw), fw + ".kind");
  const double K = number(field(j, "growth_K", where), where + ".growth_K");
  const Dissipativity diss =
      dissipativity_from_json(field(j, "dissipativity", where), where + ".dissipativity");
  return at_field(where, [&] {
    if (kind == "ou") return DriftSpec::ou(number(field(f, "beta", fw), fw + ".beta"), K, diss, dim);
    if (kind == "parametric") {
      if (dim != 1) fail(where + ".dim", "parametric drifts are one-dimensional");
      return DriftSpec::parametric(text(field(f, "id", fw), fw + ".id"),
                                   numbers(field(f, "params", fw), fw + ".params"), K, diss);
    }
    if (kind == "potential") {
      PotentialSpec ps;
      ps.kind = at_field(fw + ".profile", [&] {
        return profile_kind_from_string(text(field(f, "profile", fw), fw + ".profile"));
      });
      ps.params = numbers(field(f, "params", fw), fw + ".params");
      ps.lipschitz_K2 = number(field(f, "K2", fw), fw + ".K2");
      ps.M_f = number(field(f, "M_f", fw), fw + ".M_f");
      ps.r_f = number(field(f, "r_f", fw), fw + ".r_f");
      return DriftSpec::potential(dim, ps, K, diss);
    }
    if (kind == "tabulated") {
      if (dim != 1) fail(where + ".dim", "tabulated drifts are one-dimensional");
      return DriftSpec::tabulated(numbers(field(f, "grid", fw), fw + ".grid"),
                                  numbers(field(f, "values", fw), fw + ".values"), K, diss);
    }
    fail(fw + ".kind", "unknown kind '" + kind + "' (ou, parametric, potential, tabulated)");
  });
}

// ---------------------------------------------------------------------------
// Families and nets

Json to_json(const FunctionFamily& f) {
  return Json{{"kind", to_string(f.kind)}, {"dim", f.dim},       {"lower", f.lower},
              {"upper", f.upper},          {"lower_open", f.lower_open},
              {"K1", f.K1},                {"K2", f.K2},         {"G", f.envelope_G},
              {"M_f", f.M_f}};
}

FunctionFamily family_from_json(const Json& j, const std::string& where) {
  FunctionFamily f;
  f.kind = at_field(where + ".kind", [&] {
    return profile_kind_from_string(text(field(j, "kind", where), where + ".kind"));
  });
  f.dim = static_cast<int>(integer_or(j, "dim", 1, where));
  f.lower = numbers(field(j, "lower", where), where + ".lower");
  f.upper = numbers(field(j, "upper", where), where + ".upper");
  if (j.contains("lower_open")) {
    if (!j.at("lower_open").is_boolean()) fail(where + ".lower_open", "expected a boolean");
    f.lower_open = j.at("lower_open").get<bool>();
  }
  f.K1 = number(field(j, "K1", where), where + ".K1");
  f.K2 = number_or(j, "K2", f.K1, where);
  f.envelope_G = number_or(j, "G", 0.0, where);
  f.M_f = number_or(j, "M_f", 1.0, where);
  at_field(where, [&] { f.check(); });
  return f;
}

NetConfig net_config_from_json(const Json& j, const std::string& where) {
  NetConfig c;
  c.m_max = static_cast<int>(integer(field(j, "m_max", where), where + ".m_max"));
  c.l_max = static_cast<int>(integer(field(j, "l_max", where), where + ".l_max"));
  c.eps_schedule = numbers(field(j, "eps", where), where + ".eps");
  c.q1 = numbers_or(j, "q1", where);
  c.q2 = numbers_or(j, "q2", where);
  c.samples_per_parameter =
      static_cast<int>(integer_or(j, "samples_per_parameter", c.samples_per_parameter, where));
  c.metric_grid_points =
      static_cast<int>(integer_or(j, "metric_grid_points", c.metric_grid_points, where));
  c.seed = static_cast<std::uint64_t>(integer_or(j, "seed", 1, where));
  c.atom_cap = static_cast<std::size_t>(integer_or(j, "atom_cap", static_cast<long long>(c.atom_cap), where));
  return c;
}

Json to_json(const PriorNet& net) {
  Json atoms = Json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    atoms.push_back(Json{{"id", i},
                         {"m", net.provenance[i].m},
                         {"l", net.provenance[i].l},
                         {"n", net.provenance[i].n},
                         {"weight", net.weights[i]},
                         {"theta", i < net.parameters.size() ? net.parameters[i] : std::vector<double>{}},
                         {"drift", to_json(net.atoms[i])}});
  }
  return Json{{"eps", net.eps_schedule},
              {"q1", net.q1},
              {"q2", net.q2},
              {"level_counts", net.level_counts},
              {"metric_grid_points", net.metric_grid_points},
              {"truncation_mass", net.truncation_mass},
              {"truncated", net.truncated},
              {"covering_certified", net.covering_certified},
              {"warnings", net.warnings},
              {"atoms", atoms}};
}

PriorNet net_from_json(const Json& j, const std::string& where) {
  PriorNet net;
  const Json& atoms = field(j, "atoms", where);
  if (!atoms.is_array() || atoms.empty()) fail(where + ".atoms", "expected a non-empty array");
  double total = 0.0;
  int max_m = 1, max_l = 1;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const std::string w = where + ".atoms[" + std::to_string(i) + "]";
    const Json& a = atoms[i];
    net.atoms.push_back(drift_from_json(field(a, "drift", w), w + ".drift"));
    const double weight = number(field(a, "weight", w), w + ".weight");
    if (!(weight > 0.0)) fail(w + ".weight", "must be positive");
    net.weights.push_back(weight);
    total += weight;
    Provenance p;
    p.m = static_cast<int>(integer_or(a, "m", 1, w));
    p.l = static_cast<int>(integer_or(a, "l", 1, w));
    p.n = static_cast<int>(integer_or(a, "n", static_cast<long long>(i + 1), w));
    max_m = std::max(max_m, p.m);
    max_l = std::max(max_l, p.l);
    net.provenance.push_back(p);
    net.parameters.push_back(numbers_or(a, "theta", w));
  }
  for (auto& w : net.weights) w /= total;
  net.eps_schedule = numbers_or(j, "eps", where);
  net.q1 = numbers_or(j, "q1", where);
  net.q2 = numbers_or(j, "q2", where);
  net.level_counts.assign(max_m, std::vector<int>(max_l, 0));
  for (const auto& p : net.provenance) ++net.level_counts[p.m - 1][p.l - 1];
  net.metric_grid_points = static_cast<int>(integer_or(j, "metric_grid_points", 21, where));
  net.truncation_mass = number_or(j, "truncation_mass", 0.0, where);
  net.truncated = net.truncation_mass > 0.0;
  return net;
}

std::string net_csv(const PriorNet& net) {
  std::ostringstream os;
  std::size_t p = 0;
  for (const auto& t : net.parameters) p = std::max(p, t.size());
  os << "atom_id,m,l,n";
  for (std::size_t k = 0; k < p; ++k) os << ",theta" << k + 1;
  os << ",weight\n";
  for (std::size_t i = 0; i < net.size(); ++i) {
    os << i << ',' << net.provenance[i].m << ',' << net.provenance[i].l << ','
       << net.provenance[i].n;
    for (std::size_t k = 0; k < p; ++k)
      os << ',' << (k < net.parameters[i].size() ? csv_number(net.parameters[i][k]) : "");
    os << ',' << csv_number(net.weights[i]) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Transition models and probes

Json to_json(const TransitionModel& m) {
  return Json{{"method", to_string(m.method)},
              {"n_paths", m.n_paths},
              {"substeps", m.substeps},
              {"bandwidth", m.bandwidth},
              {"seed", m.seed}};
}

TransitionModel model_from_json(const Json& j, const std::string& where) {
  TransitionModel m;
  m.method = at_field(where + ".method", [&] {
    return transition_method_from_string(text(field(j, "method", where), where + ".method"));
  });
  m.n_paths = static_cast<std::size_t>(integer_or(j, "n_paths", static_cast<long long>(m.n_paths), where));
  m.substeps = static_cast<int>(integer_or(j, "substeps", m.substeps, where));
  m.bandwidth = number_or(j, "bandwidth", 0.0, where);
  m.seed = static_cast<std::uint64_t>(integer_or(j, "seed", 0, where));
  if (m.n_paths < 2) fail(where + ".n_paths", "must be at least 2");
  if (m.substeps < 1) fail(where + ".substeps", "must be at least 1");
  return m;
}

TestFunction test_function_from_json(const Json& j, const std::string& where) {
  if (j.is_string()) return at_field(where, [&] { return TestFunction::make(j.get<std::string>()); });
  const std::string name = text(field(j, "name", where), where + ".name");
  const auto params = numbers_or(j, "params", where);
  return at_field(where, [&] { return TestFunction::make(name, params); });
}

TopologyProbe probe_from_json(const Json& j, int dim, const std::string& where) {
  const TestFunction f = j.contains("function")
                             ? test_function_from_json(j.at("function"), where + ".function")
                             : TestFunction::make("cos");
  const double eps = number(field(j, "epsilon", where), where + ".epsilon");
  return at_field(where, [&] {
    TopologyProbe probe;
    if (j.contains("grid")) {
      const std::string gw = where + ".grid";
      const Json& g = j.at("grid");
      probe = TopologyProbe::uniform_grid(
          f, dim, number(field(g, "half_width", gw), gw + ".half_width"),
          static_cast<int>(integer(field(g, "points", gw), gw + ".points")),
          number_or(g, "total_mass", 1.0, gw), eps);
    } else {
      probe.f = f;
      probe.dim = dim;
      probe.nodes = numbers(field(j, "nodes", where), where + ".nodes");
      probe.weights = numbers(field(j, "weights", where), where + ".weights");
      probe.epsilon = eps;
      if (probe.nodes.size() != probe.weights.size() * static_cast<std::size_t>(dim))
        fail(where + ".nodes", "expected dim x len(weights) coordinates");
    }
    probe.validate();
    return probe;
  });
}

// ---------------------------------------------------------------------------
// Results

Json to_json(const PosteriorResult& post) {
  auto finite_or_null = [](const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? Json(x) : Json(nullptr));
    return a;
  };
  return Json{{"n_used", post.n_used},
              {"reference", post.reference},
              {"model", to_json(post.model)},
              {"map_index", post.map_index},
              {"effective_atoms", post.effective_atoms},
              {"weights", post.weights},
              {"log_weights_unnormalized", finite_or_null(post.log_weights_unnormalized)},
              {"log_likelihood_ratios", finite_or_null(post.log_likelihood_ratios)},
              {"warnings", post.warnings}};
}

std::string posterior_csv(const PriorNet& net, const PosteriorResult& post) {
  std::ostringstream os;
  os << "atom_id,prior,log_lik_ratio,posterior\n";
  for (std::size_t i = 0; i < net.size(); ++i)
    os << i << ',' << csv_number(net.weights[i]) << ','
       << csv_number(post.log_likelihood_ratios[i]) << ',' << csv_number(post.weights[i]) << '\n';
  return os.str();
}

Json to_json(const DivergenceReport& r) {
  return Json{{"delta", r.delta},
              {"l2_mu", r.l2_mu},
              {"kl_invariant", r.kl_invariant},
              {"kl_invariant_clamped", r.kl_invariant_clamped},
              {"kl_path", r.kl_path},
              {"kl_transition", r.kl_transition},
              {"kl_transition_std_error", r.kl_transition_std_error},
              {"warnings", r.warnings}};
}

Json to_json(const ValidationReport& r) {
  Json v = Json::array();
  for (const auto& x : r.violations)
    v.push_back(Json{{"constraint", to_string(x.constraint)},
                     {"point", x.point},
                     {"measured", x.measured},
                     {"bound", x.bound},
                     {"slack", x.slack}});
  return Json{{"compliant", r.compliant()}, {"violations", v}};
}

Json to_json(const IdentifiabilityReport& r) {
  return Json{{"max_gap", r.max_gap},
              {"argmax_point", r.argmax_point},
              {"argmax_function", r.argmax_function},
              {"std_error_at_max", r.std_error_at_max},
              {"max_z", r.max_z},
              {"separated", r.separated}};
}

std::string curve_csv(const ConsistencyCurve& curve) {
  std::ostringstream os;
  os << "n,mass,stderr\n";
  for (const auto& row : curve.rows)
    os << row.n << ',' << csv_number(row.mean) << ',' << csv_number(row.std_error) << '\n';
  return os.str();
}

std::string curve_replications_csv(const ConsistencyCurve& curve) {
  std::ostringstream os;
  os << "replication,n,mass\n";
  for (std::size_t r = 0; r < curve.masses.size(); ++r)
    for (std::size_t k = 0; k < curve.rows.size(); ++k)
      os << r << ',' << curve.rows[k].n << ',' << csv_number(curve.masses[r][k]) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Files

Json parse_json(const std::string& content, const std::string& source) {
  try {
    return Json::parse(content);
  } catch (const Json::parse_error& e) {
    // Translate the byte offset into a line and column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < content.size(); ++i) {
      if (content[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream msg;
    msg << source << ":" << line << ":" << col << ": malformed JSON (" << e.what() << ")";
    throw ValidationError(msg.str());
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path.string());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ValidationError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw EvaluationError("SHA-256 digest failed");
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace driftbayes::io
