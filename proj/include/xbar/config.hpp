#pragma once

// Layered run configuration for the command-line front end: built-in
// defaults, then a JSON file (comments allowed), then dotted-key overrides.
// Every key has a fixed unit; see FORMATS.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "xbar/dse.hpp"
#include "xbar/inference.hpp"
#include "xbar/metrics.hpp"
#include "xbar/solver.hpp"
#include "xbar/surrogate.hpp"
#include "xbar/topology.hpp"

namespace xbar::config {

using Json = nlohmann::ordered_json;

Json default_config();

// Merges `layer` into `base`. Keys must already exist in `base`; a value
// must have the type of the default (any number for numeric keys, integral
// for integer keys, number or null for optional numbers).
void merge_layer(Json& base, const Json& layer, const std::string& origin);

// Sets one dotted key under the same checks as a file layer.
void set_value(Json& cfg, const std::string& dotted, Json value);

// "a.b=value"; the value is read as JSON when it parses, else as a string.
void apply_override(Json& cfg, std::string_view assignment);

// Defaults <- file <- overrides. A run manifest is accepted as the file; its
// "config" member is used. An empty path skips the file layer.
Json load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides);

std::size_t edit_distance(std::string_view a, std::string_view b);
// Dotted names of all leaves.
std::vector<std::string> leaf_keys(const Json& cfg);
std::string nearest_key(std::string_view key, const Json& cfg);

// Typed views of a resolved config.
topology::CrossbarConfig array_config(const Json& cfg);
solver::SolverOptions solver_options(const Json& cfg);
metrics::WorkloadSampler workload_sampler(const Json& cfg);
metrics::NFOptions nf_options(const Json& cfg, int workers);
metrics::SMOptions sm_options(const Json& cfg, int workers);
surrogate::DatasetOptions dataset_options(const Json& cfg, int workers);
surrogate::Hyper hyper(const Json& cfg);
std::optional<std::uint64_t> seed(const Json& cfg);
std::vector<double> number_list(const Json& cfg, const std::string& dotted);

// Bit string for `solve`: "1011" (one bit per row/column) or a single digit
// broadcast to every position.
topology::BitVector parse_bits(const std::string& text, int length, const std::string& what);

}  // namespace xbar::config
