#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fapd/federation.hpp"

namespace fapd {

struct RunConfig {
    FederationConfig federation;
    Strategy strategy;
    DataSource data;
    std::filesystem::path output_dir;
    nlohmann::ordered_json resolved;   // every key with its effective value
    std::set<std::string> explicit_keys;  // keys set by file, environment or override
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Default value of every recognised key, in documentation order.
const nlohmann::ordered_json& config_defaults();

// Flat JSON object from `path` (an empty file means all defaults), then
// FAPD_SEED from the environment (when `env_seed` is given), then `--key value`
// overrides. Unknown keys, type mismatches and constraint violations throw
// ErrorKind::Config naming the key.
RunConfig parse_config(const std::optional<std::filesystem::path>& path, const Overrides& overrides,
                       const std::optional<std::string>& env_seed = std::nullopt);

// Reads FAPD_SEED from the process environment.
std::optional<std::string> seed_from_environment();

}  // namespace fapd
