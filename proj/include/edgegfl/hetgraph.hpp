#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace edgegfl {

/// One undirected edge as it appears in edge.tsv.
struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::size_t type = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

enum class SplitRole : std::uint8_t { None, Train, Val, Test };

const char* to_string(SplitRole role);

struct SplitSpec {
  double train_frac = 0.24;
  double val_frac = 0.06;
  double test_frac = 0.70;
  std::uint64_t seed = 0;

  /// Throws ContractError unless all fractions are positive and sum to 1.
  void validate() const;
};

/// Raw contents of a dataset, before validation.
struct GraphData {
  std::vector<std::size_t> node_type;
  /// Per-node attribute vector; empty means "featureless".
  std::vector<std::vector<double>> features;
  std::vector<Edge> edges;
  /// Per-node class ids; empty means unlabeled.
  std::vector<std::vector<std::size_t>> labels;
  /// Per-node split assignment; empty vector means "no split given".
  std::vector<SplitRole> split;
};

/// Typed, attributed, undirected graph with labels and split masks.
///
/// Each undirected edge becomes two arcs (one per direction) sharing its type;
/// a self-loop becomes a single arc. Arc `a` carries a message from
/// `arc_src()[a]` to `arc_dst()[a]`, and neighbors(i) lists the sources of the
/// arcs entering i. Immutable after construction.
class HeteroGraph {
 public:
  explicit HeteroGraph(GraphData data);

  std::size_t num_nodes() const { return node_type_.size(); }
  std::size_t num_node_types() const { return num_node_types_; }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_edge_types() const { return num_edge_types_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_arcs() const { return arc_src_.size(); }

  std::span<const std::size_t> node_types() const { return node_type_; }
  std::span<const Edge> edges() const { return edges_; }

  std::span<const std::size_t> arc_src() const { return arc_src_; }
  std::span<const std::size_t> arc_dst() const { return arc_dst_; }
  std::span<const std::size_t> arc_type() const { return arc_type_; }
  /// Index into edges() of the undirected edge each arc came from.
  std::span<const std::size_t> arc_edge() const { return arc_edge_; }

  std::span<const std::size_t> neighbors(std::size_t node) const { return adjacency_[node]; }
  std::size_t degree(std::size_t node) const { return adjacency_[node].size(); }

  /// Input dimension of a node type's feature matrix.
  std::size_t feature_dim(std::size_t node_type) const { return feature_dim_[node_type]; }
  /// Whether the type's features were given in the data (as opposed to the
  /// one-hot-of-type default).
  bool has_given_features(std::size_t node_type) const { return given_features_[node_type]; }
  /// Nodes of a type, in increasing id order.
  std::span<const std::size_t> nodes_of_type(std::size_t node_type) const { return type_nodes_[node_type]; }
  /// Row-major |nodes_of_type| × feature_dim matrix.
  std::span<const double> feature_matrix(std::size_t node_type) const { return type_features_[node_type]; }

  const std::vector<std::size_t>& labels(std::size_t node) const { return labels_[node]; }
  bool is_labeled(std::size_t node) const { return !labels_[node].empty(); }
  bool is_multi_label() const { return multi_label_; }
  /// n × c indicator matrix, row-major.
  std::vector<double> label_matrix() const;
  std::vector<std::size_t> labeled_nodes() const;

  bool has_split() const { return !split_.empty(); }
  SplitRole role(std::size_t node) const { return split_.empty() ? SplitRole::None : split_[node]; }
  std::span<const SplitRole> split() const { return split_; }
  std::vector<std::size_t> nodes_in(SplitRole role) const;

  /// Copy of this graph with a different split assignment.
  HeteroGraph with_split(std::vector<SplitRole> split) const;

  /// 1/sqrt(|N_i|·|N_j|); throws ContractError for an isolated node.
  double gcn_norm(std::size_t i, std::size_t j) const;

  /// The data this graph was built from (round-trips through save/load).
  const GraphData& data() const { return data_; }

 private:
  GraphData data_;
  std::vector<std::size_t> node_type_;
  std::size_t num_node_types_ = 0;
  std::size_t num_edge_types_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> arc_src_, arc_dst_, arc_type_, arc_edge_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<std::size_t> feature_dim_;
  std::vector<bool> given_features_;
  std::vector<std::vector<std::size_t>> type_nodes_;
  std::vector<std::vector<double>> type_features_;
  std::vector<std::vector<std::size_t>> labels_;
  bool multi_label_ = false;
  std::vector<SplitRole> split_;
};

// ---- on-disk format ----------------------------------------------------------

/// Reads node.tsv, edge.tsv, label.tsv and the optional split.tsv.
HeteroGraph load_dataset(const std::filesystem::path& dir);
void save_dataset(const HeteroGraph& graph, const std::filesystem::path& dir);

/// FNV-1a 64-bit digest over the dataset files, as 16 hex digits.
std::string dataset_fingerprint(const std::filesystem::path& dir);

// ---- splits ------------------------------------------------------------------

/// Stratified (by first label) random split of the labeled nodes.
///
/// Global sizes are floor(train·N) and floor(val·N) with the remainder going
/// to test; per-class quotas are apportioned by largest remainder.
std::vector<SplitRole> make_split(const HeteroGraph& graph, const SplitSpec& spec);

// ---- synthetic fixtures ------------------------------------------------------

struct PlantedSpec {
  std::size_t n = 300;
  std::size_t n_node_types = 2;
  std::size_t n_edge_types = 4;
  std::size_t n_classes = 3;
  double homophily = 0.9;
  std::uint64_t seed = 1;
  double avg_degree = 10.0;
};

/// Planted-partition heterogeneous graph.
///
/// Classes are balanced and node types are drawn independently of class, and
/// nodes are featureless (one-hot of type). Each edge is intra-class with
/// probability `homophily`; an intra-class edge of class k carries edge type
/// k mod n_edge_types with probability `homophily` and a uniform type
/// otherwise; inter-class edges carry a uniform type. Class identity is
/// therefore visible only through edge types.
HeteroGraph synth_planted(const PlantedSpec& spec);

}  // namespace edgegfl
