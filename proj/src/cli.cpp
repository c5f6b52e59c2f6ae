#include "driftbayes/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "driftbayes/divergence.hpp"
#include "driftbayes/errors.hpp"
#include "driftbayes/io.hpp"
#include "driftbayes/kernels.hpp"
#include "driftbayes/posterior.hpp"
#include "driftbayes/prior_net.hpp"
#include "driftbayes/rng.hpp"
#include "driftbayes/simulate.hpp"
#include "driftbayes/transition.hpp"

namespace driftbayes::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kThreadsEnv = "DRIFTBAYES_THREADS";

struct Options {
  std::string command;
  std::string config_path;
  std::optional<long long> seed;
  std::optional<int> threads;
  std::string out_dir;
};

// State of one run: parsed config, resolved seed and output directory, and
// the artifacts written so far (for the manifest).
class Run {
 public:
  Run(const Options& opt, std::ostream& out, std::ostream& err)
      : out_(out), err_(err), command_(opt.command) {
    config_path_ = opt.config_path;
    std::ifstream in(config_path_, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file " + config_path_.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    config_text_ = ss.str();
    config_ = io::parse_json(config_text_, config_path_.string());
    if (!config_.is_object()) throw ValidationError("config root must be a JSON object");

    if (opt.seed) {
      seed_ = static_cast<std::uint64_t>(*opt.seed);
    } else if (config_.contains("seed") && config_.at("seed").is_number_integer()) {
      seed_ = config_.at("seed").get<std::uint64_t>();
    } else {
      throw ValidationError("config field 'seed': missing (or pass --seed); runs are never seeded "
                            "from the clock");
    }
    if (!opt.out_dir.empty()) {
      out_dir_ = opt.out_dir;
    } else if (config_.contains("output_dir") && config_.at("output_dir").is_string()) {
      out_dir_ = resolve(config_.at("output_dir").get<std::string>());
    } else {
      throw ValidationError("config field 'output_dir': missing (or pass --out)");
    }
    fs::create_directories(out_dir_);
  }

  const Json& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }

  bool has(const std::string& key) const { return config_.contains(key); }
  const Json& at(const std::string& key) const {
    if (!config_.contains(key)) throw ValidationError("config field '" + key + "': missing");
    return config_.at(key);
  }

  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    if (path.is_absolute()) return path;
    return config_path_.parent_path() / path;
  }

  double delta() const {
    const Json& d = at("delta");
    if (!d.is_number() || !(d.get<double>() > 0.0))
      throw ValidationError("config field 'delta': expected a positive number");
    return d.get<double>();
  }

  void emit(const std::string& name, const std::string& content) {
    io::write_file_atomic(out_dir_ / name, content);
    files_.push_back({name, io::sha256_hex(content), content.size()});
    out_ << "wrote " << (out_dir_ / name).string() << '\n';
  }

  void write_manifest() {
    Json files = Json::array();
    for (const auto& f : files_)
      files.push_back(Json{{"path", f.name}, {"sha256", f.hash}, {"bytes", f.bytes}});
    Json manifest{{"command", command_},
                  {"config", config_path_.filename().string()},
                  {"config_sha256", io::sha256_hex(config_text_)},
                  {"seed", seed_},
                  {"versions",
                   Json{{"driftbayes", kVersion},
                        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                        {"cli11", CLI11_VERSION}}},
                  {"files", files}};
    io::write_file_atomic(out_dir_ / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  struct File {
    std::string name;
    std::string hash;
    std::size_t bytes;
  };
  std::ostream& out_;
  std::ostream& err_;
  std::string command_;
  fs::path config_path_;
  std::string config_text_;
  Json config_;
  std::uint64_t seed_ = 0;
  fs::path out_dir_;
  std::vector<File> files_;
};

// Sub-seeds used by the pipeline, derived from the master seed.
enum Stream : std::uint64_t { kSeriesStream = 0, kModelStream = 1, kNetStream = 2, kMcStream = 3 };

ValidationReport check_drift(const DriftSpec& spec, const Json& cfg) {
  double L = spec.default_half_width();
  int points = 201;
  if (cfg.contains("validation")) {
    const Json& v = cfg.at("validation");
    if (v.contains("half_width")) L = v.at("half_width").get<double>();
    if (v.contains("grid_points")) points = v.at("grid_points").get<int>();
  }
  if (spec.dim() >= 2) points = std::min(points, spec.dim() == 2 ? 101 : 31);
  return validate_drift(spec, L, points);
}

DriftSpec true_drift(Run& run) {
  DriftSpec spec = io::drift_from_json(run.at("true_drift"), "true_drift");
  const auto report = check_drift(spec, run.config());
  if (!report.compliant())
    throw ValidationError("true_drift violates its class: " + report.summary());
  return spec;
}

TransitionModel transition_model(const Run& run) {
  TransitionModel m;
  if (run.has("transition")) m = io::model_from_json(run.at("transition"), "transition");
  if (!run.has("transition") || !run.at("transition").contains("seed"))
    m.seed = split_seed(run.seed(), kModelStream);
  return m;
}

SimScheme scheme(const Run& run) {
  SimScheme s;
  if (!run.has("simulation")) return s;
  const Json& sim = run.at("simulation");
  if (sim.contains("scheme")) s.kind = scheme_kind_from_string(sim.at("scheme").get<std::string>());
  if (sim.contains("substeps")) s.substeps = sim.at("substeps").get<int>();
  return s;
}

bool include_initial(const Run& run, const char* block) {
  if (!run.has(block)) return true;
  const Json& b = run.at(block);
  return b.contains("include_initial") ? b.at("include_initial").get<bool>() : true;
}

PriorNet prior_net(Run& run) {
  const Json& cfg = run.at("net");
  if (cfg.contains("atoms")) return io::net_from_json(cfg, "net");
  const FunctionFamily fam = io::family_from_json(run.at("family"), "family");
  NetConfig nc = io::net_config_from_json(cfg, "net");
  if (!cfg.contains("seed")) nc.seed = split_seed(run.seed(), kNetStream);
  PriorNet net = build_net(fam, nc);
  for (const auto& w : net.warnings) run.err() << "warning: " << w << '\n';
  return net;
}

Neighborhood criterion(const Run& run, int dim) {
  const Json& c = run.at("criterion");
  const std::string type = c.contains("type") ? c.at("type").get<std::string>() : "";
  if (type == "l2ball") {
    L2Neighborhood n;
    if (!c.contains("radius") || !c.at("radius").is_number())
      throw ValidationError("config field 'criterion.radius': expected a number");
    n.radius = c.at("radius").get<double>();
    return n;
  }
  if (type == "weak") {
    WeakNeighborhood w;
    w.probe = io::probe_from_json(c, dim, "criterion");
    w.model = transition_model(run);
    w.delta = run.delta();
    return w;
  }
  throw ValidationError("config field 'criterion.type': expected 'l2ball' or 'weak'");
}

ObservationSeries observed_series(Run& run, const DriftSpec* truth) {
  if (run.has("series_csv"))
    return ingest_csv(run.resolve(run.at("series_csv").get<std::string>()).string(), run.delta());
  if (!truth) throw ValidationError("config needs 'series_csv' or 'true_drift' with 'simulation'");
  const Json& sim = run.at("simulation");
  if (!sim.contains("n")) throw ValidationError("config field 'simulation.n': missing");
  const auto law = stationary_law(*truth);
  return simulate_series(*truth, law, run.delta(), sim.at("n").get<std::size_t>(), scheme(run),
                         split_seed(run.seed(), kSeriesStream));
}

std::string series_text(const ObservationSeries& s) {
  std::ostringstream os;
  write_series_csv(s, os);
  return os.str();
}

// --- subcommands -----------------------------------------------------------

int cmd_validate(Run& run) {
  std::vector<Json> docs;
  if (run.has("drifts")) {
    for (const auto& d : run.at("drifts")) docs.push_back(d);
  } else {
    docs.push_back(run.at("true_drift"));
  }
  Json results = Json::array();
  bool ok = true;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::string where = run.has("drifts") ? "drifts[" + std::to_string(i) + "]" : "true_drift";
    const DriftSpec spec = io::drift_from_json(docs[i], where);
    const auto report = check_drift(spec, run.config());
    Json r = io::to_json(report);
    r["drift"] = spec.describe();
    results.push_back(r);
    if (!report.compliant()) {
      ok = false;
      run.err() << where << ": " << report.summary() << '\n';
    } else {
      run.out() << where << ": compliant\n";
    }
  }
  run.emit("validation.json", Json{{"results", results}}.dump(2) + "\n");
  return ok ? kOk : kValidation;
}

int cmd_simulate(Run& run) {
  const DriftSpec spec = true_drift(run);
  const auto series = observed_series(run, &spec);
  run.emit("series.csv", series_text(series));
  return kOk;
}

int cmd_ingest(Run& run) {
  const auto path = run.resolve(run.at("series_csv").get<std::string>());
  const auto series = ingest_csv(path.string(), run.delta());
  run.emit("series.csv", series_text(series));
  run.emit("ingest.json", Json{{"source", path.filename().string()},
                               {"observations", series.size()},
                               {"transitions", series.transitions()},
                               {"delta", series.delta},
                               {"dim", series.dim}}
                                  .dump(2) +
                              "\n");
  return kOk;
}

int cmd_net(Run& run) {
  const PriorNet net = prior_net(run);
  Json doc = io::to_json(net);
  if (run.has("family")) {
    const FunctionFamily fam = io::family_from_json(run.at("family"), "family");
    const auto audit = audit_covering(net, fam, 2000, split_seed(run.seed(), kMcStream));
    doc["audit"] = Json{{"passed", audit.passed},
                        {"worst_ratio", audit.worst_ratio},
                        {"worst_level", {audit.worst_level.m, audit.worst_level.l}},
                        {"samples", audit.samples}};
  }
  run.emit("net.json", doc.dump(2) + "\n");
  run.emit("net.csv", io::net_csv(net));
  run.out() << net.size() << " atoms, truncation mass " << net.truncation_mass << '\n';
  return kOk;
}

int cmd_posterior(Run& run) {
  std::optional<DriftSpec> truth;
  if (run.has("true_drift")) truth = true_drift(run);
  const PriorNet net = prior_net(run);
  const auto series = observed_series(run, truth ? &*truth : nullptr);
  LikelihoodOptions opt;
  opt.model = transition_model(run);
  opt.include_initial = include_initial(run, "posterior");
  std::optional<DriftSpec> reference;
  if (run.has("posterior") && run.at("posterior").contains("reference") &&
      !run.at("posterior").at("reference").is_null())
    reference = io::drift_from_json(run.at("posterior").at("reference"), "posterior.reference");
  const auto post = compute_posterior(net, series, opt, reference);
  for (const auto& w : post.warnings) run.err() << "warning: " << w << '\n';
  run.emit("posterior.csv", io::posterior_csv(net, post));
  run.emit("posterior.json", io::to_json(post).dump(2) + "\n");
  run.out() << "top weight " << post.weights[post.map_index] << " on atom " << post.map_index
            << " (" << net.atoms[post.map_index].describe() << ")\n";
  return kOk;
}

int cmd_consistency(Run& run) {
  const DriftSpec truth = true_drift(run);
  const auto law0 = stationary_law(truth);
  const PriorNet net = prior_net(run);
  const Json& c = run.at("consistency");
  CurveConfig cfg;
  if (!c.contains("n") || !c.at("n").is_array())
    throw ValidationError("config field 'consistency.n': expected an array of sample sizes");
  for (const auto& v : c.at("n")) cfg.sample_sizes.push_back(v.get<std::size_t>());
  cfg.replications = c.contains("replications") ? c.at("replications").get<std::size_t>() : 20;
  cfg.seed = split_seed(run.seed(), kSeriesStream);
  cfg.delta = run.delta();
  cfg.scheme = scheme(run);
  cfg.likelihood.model = transition_model(run);
  cfg.likelihood.include_initial = include_initial(run, "consistency");
  const auto curve = consistency_curve(truth, law0, net, criterion(run, truth.dim()), cfg);
  for (const auto& w : curve.warnings) run.err() << "warning: " << w << '\n';
  run.emit("curve.csv", io::curve_csv(curve));
  run.emit("curve_replications.csv", io::curve_replications_csv(curve));
  run.emit("net.json", io::to_json(net).dump(2) + "\n");
  for (const auto& row : curve.rows)
    run.out() << "n=" << row.n << " mass=" << row.mean << " stderr=" << row.std_error << '\n';
  return kOk;
}

int cmd_divergence(Run& run) {
  const Json& d = run.at("divergence");
  Json pairs;
  if (d.contains("pairs_file"))
    pairs = io::read_json_file(run.resolve(d.at("pairs_file").get<std::string>()));
  else if (d.contains("pairs"))
    pairs = d.at("pairs");
  else
    throw ValidationError("config field 'divergence': needs 'pairs' or 'pairs_file'");
  if (!pairs.is_array()) throw ValidationError("divergence pairs must be a JSON array");
  DivergenceOptions opt;
  opt.model = transition_model(run);
  if (d.contains("n_outer")) opt.n_outer = d.at("n_outer").get<std::size_t>();
  if (d.contains("n_inner")) opt.n_inner = d.at("n_inner").get<std::size_t>();
  opt.seed = split_seed(run.seed(), kMcStream);
  Json reports = Json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string w = "divergence.pairs[" + std::to_string(i) + "]";
    const DriftSpec b = io::drift_from_json(pairs[i].at("b"), w + ".b");
    const DriftSpec b0 = io::drift_from_json(pairs[i].at("b0"), w + ".b0");
    const auto law_b = stationary_law(b);
    const auto law0 = stationary_law(b0);
    DivergenceOptions o = opt;
    o.seed = split_seed(opt.seed, i);
    Json r = io::to_json(divergence_report(b, b0, law_b, law0, run.delta(), o));
    r["b"] = b.describe();
    r["b0"] = b0.describe();
    reports.push_back(r);
  }
  run.emit("divergence.json", Json{{"reports", reports}}.dump(2) + "\n");
  return kOk;
}

int cmd_identifiability(Run& run) {
  const Json& c = run.at("identifiability");
  const DriftSpec a = io::drift_from_json(c.at("a"), "identifiability.a");
  const DriftSpec b = io::drift_from_json(c.at("b"), "identifiability.b");
  std::vector<TestFunction> family;
  if (c.contains("functions")) {
    for (std::size_t i = 0; i < c.at("functions").size(); ++i)
      family.push_back(io::test_function_from_json(
          c.at("functions")[i], "identifiability.functions[" + std::to_string(i) + "]"));
  } else {
    for (const char* name : {"cos", "sin", "tanh", "gauss-bump"}) family.push_back(TestFunction::make(name));
  }
  std::vector<std::vector<double>> grid;
  const Json& g = c.at("grid");
  if (g.is_array()) {
    for (const auto& p : g) grid.push_back(p.is_array() ? p.get<std::vector<double>>()
                                                        : std::vector<double>{p.get<double>()});
  } else {
    const auto xs = quad::linspace(g.at("lo").get<double>(), g.at("hi").get<double>(),
                                   g.at("points").get<std::size_t>());
    for (double x : xs) grid.push_back({x});
  }
  const auto rep = identifiability_probe(a, b, transition_model(run), run.delta(), family, grid);
  run.emit("identifiability.json", io::to_json(rep).dump(2) + "\n");
  run.out() << (rep.separated ? "separated" : "not separated") << " (max z " << rep.max_z << ")\n";
  return kOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian drift estimation for ergodic diffusions", "driftbayes"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"validate", "audit drift specs against their declared class"},
      {"simulate", "simulate an observation series"},
      {"ingest", "read and audit an observation CSV"},
      {"net", "build the epsilon-net prior"},
      {"posterior", "posterior weights over the net"},
      {"consistency", "complement-mass curve over n"},
      {"divergence", "L2 and KL quantities for drift pairs"},
      {"identifiability", "operator-gap identifiability probe"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", opt.seed, "master seed; overrides the config");
    sub->add_option("--threads", opt.threads, "OpenMP threads (default: $DRIFTBAYES_THREADS)");
    sub->add_option("--out", opt.out_dir, "output directory; overrides the config");
    sub->callback([&opt, name = name] { opt.command = name; });
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }

  if (opt.threads) {
    kernels::set_threads(*opt.threads);
  } else if (const char* env = std::getenv(kThreadsEnv)) {
    try {
      kernels::set_threads(std::stoi(env));
    } catch (const std::exception&) {
      err << "error: " << kThreadsEnv << " must be an integer\n";
      return kValidation;
    }
  }

  try {
    Run run(opt, out, err);
    int code = kOk;
    if (opt.command == "validate") code = cmd_validate(run);
    else if (opt.command == "simulate") code = cmd_simulate(run);
    else if (opt.command == "ingest") code = cmd_ingest(run);
    else if (opt.command == "net") code = cmd_net(run);
    else if (opt.command == "posterior") code = cmd_posterior(run);
    else if (opt.command == "consistency") code = cmd_consistency(run);
    else if (opt.command == "divergence") code = cmd_divergence(run);
    else if (opt.command == "identifiability") code = cmd_identifiability(run);
    run.write_manifest();
    return code;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const Json::exception& e) {
    err << "validation error: malformed config value (" << e.what() << ")\n";
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const Error& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  }
}

int run_command(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_command(args, std::cout, std::cerr);
}

}  // namespace driftbayes::cli
