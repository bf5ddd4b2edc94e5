#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgegfl/checkpoint.hpp"
#include "edgegfl/hetgraph.hpp"
#include "edgegfl/model.hpp"
#include "edgegfl/train.hpp"

namespace edgegfl::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsage = 2 };

/// How the labeled nodes are split when the dataset ships no split.tsv.
struct SplitSettings {
  std::string mode = "standard";  ///< standard (24/6/70) | cluster (3/6/91) | file
  SplitSpec spec;
};

struct TrainOptions {
  std::filesystem::path data;
  std::filesystem::path out = "run";
  ModelConfig model;
  TrainConfig train;
  SplitSettings split;
  /// "auto" picks sigmoid-bce for multi-label data, softmax-ce otherwise.
  std::string loss = "auto";
};

struct EvalOptions {
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> out;
  bool paper_literal_f1 = false;
};

struct ClusterOptions {
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::optional<std::uint64_t> kmeans_seed;
  std::optional<std::size_t> k;
  bool pre_norm = false;
  std::optional<std::filesystem::path> assignments;
  std::optional<std::filesystem::path> out;
};

struct ExportOptions {
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::filesystem::path out;
  bool pre_norm = false;
};

/// Resolves the split a run trains and evaluates on.
HeteroGraph apply_split(const HeteroGraph& graph, SplitSettings& settings, std::uint64_t master_seed);

nlohmann::json cmd_train(TrainOptions options, std::ostream& out);
nlohmann::json cmd_eval(const EvalOptions& options, std::ostream& out);
nlohmann::json cmd_cluster(const ClusterOptions& options, std::ostream& out);
/// Returns the number of rows written.
std::size_t cmd_export_embeddings(const ExportOptions& options);

/// Parses argv and dispatches; returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Sets the global log level from HETGFL_LOG (error|info|debug).
void configure_logging();

}  // namespace edgegfl::cli
