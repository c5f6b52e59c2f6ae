#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "driftbayes/divergence.hpp"
#include "driftbayes/drift.hpp"
#include "driftbayes/posterior.hpp"
#include "driftbayes/prior_net.hpp"
#include "driftbayes/transition.hpp"

// JSON and CSV forms of the library types. Readers throw ValidationError
// with the dotted path of the offending field.
namespace driftbayes::io {

using Json = nlohmann::ordered_json;

Json to_json(const DriftSpec& spec);
DriftSpec drift_from_json(const Json& j, const std::string& where = "drift");

Json to_json(const FunctionFamily& family);
FunctionFamily family_from_json(const Json& j, const std::string& where = "family");

NetConfig net_config_from_json(const Json& j, const std::string& where = "net");

Json to_json(const TransitionModel& model);
TransitionModel model_from_json(const Json& j, const std::string& where = "transition");

TestFunction test_function_from_json(const Json& j, const std::string& where = "function");

/// {"function": ..., "epsilon": e, and either "nodes"/"weights" or
///  "grid": {"half_width", "points", "total_mass"}}.
TopologyProbe probe_from_json(const Json& j, int dim, const std::string& where = "probe");

Json to_json(const PriorNet& net);
PriorNet net_from_json(const Json& j, const std::string& where = "net");
/// Columns: atom_id,m,l,n,theta...,weight
std::string net_csv(const PriorNet& net);

Json to_json(const PosteriorResult& post);
/// Columns: atom_id,prior,log_lik_ratio,posterior
std::string posterior_csv(const PriorNet& net, const PosteriorResult& post);

Json to_json(const DivergenceReport& report);
Json to_json(const ValidationReport& report);
Json to_json(const IdentifiabilityReport& report);

/// Header "n,mass,stderr".
std::string curve_csv(const ConsistencyCurve& curve);
/// Header "replication,n,mass".
std::string curve_replications_csv(const ConsistencyCurve& curve);

/// Parses a JSON document; parse errors become ValidationError with the
/// line and column.
Json parse_json(const std::string& text, const std::string& source);
Json read_json_file(const std::filesystem::path& path);

/// Writes via a temporary file in the same directory and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace driftbayes::io
