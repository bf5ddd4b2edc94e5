#pragma once

#include <filesystem>

#include <json.hpp>

#include "edgegfl/hetgraph.hpp"
#include "edgegfl/model.hpp"

namespace edgegfl {

/// Self-describing JSON snapshot of a trained model. Doubles are written in
/// shortest round-trip form, so values reload bit-exactly.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  /// Free-form run metadata (split settings, dataset fingerprint, ...).
  nlohmann::json run = nlohmann::json::object();
};

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws DataError when the file is missing, unparsable or inconsistent.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ContractError listing every dimension that differs between the
/// checkpoint's parameters and what `graph` requires.
void check_compatible(const Checkpoint& checkpoint, const HeteroGraph& graph);

}  // namespace edgegfl
