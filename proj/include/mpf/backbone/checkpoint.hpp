#pragma once

#include <filesystem>

#include "mpf/backbone/network.hpp"

namespace mpf::backbone {

// Checkpoint archive: <dir>/meta.json (config, provenance, seed, creation
// time, training metadata) plus <dir>/params/<name>.mef, one container per
// named parameter. Parameter payloads are deterministic for fixed
// (seed, config, data); meta.json carries the wall-clock timestamp.
void save_checkpoint(const Backbone<float>& net, const std::filesystem::path& dir);
Backbone<float> load_checkpoint(const std::filesystem::path& dir);

// JSON (de)serialization of the architecture config, shared with the CLI.
std::string config_to_json(const BackboneConfig& cfg);
BackboneConfig config_from_json(const std::string& text);

}  // namespace mpf::backbone
