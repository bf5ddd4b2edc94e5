#include "edgegfl/hetgraph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "edgegfl/errors.hpp"

namespace edgegfl {

const char* to_string(SplitRole role) {
  switch (role) {
    case SplitRole::Train: return "train";
    case SplitRole::Val: return "val";
    case SplitRole::Test: return "test";
    case SplitRole::None: break;
  }
  return "none";
}

void SplitSpec::validate() const {
  if (!(train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0)) {
    throw ContractError(fmt::format("split fractions must be positive, got ({}, {}, {})", train_frac, val_frac, test_frac));
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw ContractError(fmt::format("split fractions ({}, {}, {}) do not sum to 1", train_frac, val_frac, test_frac));
  }
}

// ---- HeteroGraph -------------------------------------------------------------

HeteroGraph::HeteroGraph(GraphData data) : data_(std::move(data)) {
  const std::size_t n = data_.node_type.size();
  if (data_.features.empty()) data_.features.resize(n);
  if (data_.labels.empty()) data_.labels.resize(n);
  if (data_.features.size() != n) throw DataError(fmt::format("{} feature rows for {} nodes", data_.features.size(), n));
  if (data_.labels.size() != n) throw DataError(fmt::format("{} label rows for {} nodes", data_.labels.size(), n));
  if (!data_.split.empty() && data_.split.size() != n) {
    throw DataError(fmt::format("{} split entries for {} nodes", data_.split.size(), n));
  }

  node_type_ = data_.node_type;
  for (std::size_t t : node_type_) num_node_types_ = std::max(num_node_types_, t + 1);

  // per-type feature blocks
  type_nodes_.assign(num_node_types_, {});
  for (std::size_t i = 0; i < n; ++i) type_nodes_[node_type_[i]].push_back(i);
  feature_dim_.assign(num_node_types_, 0);
  given_features_.assign(num_node_types_, false);
  type_features_.assign(num_node_types_, {});
  for (std::size_t t = 0; t < num_node_types_; ++t) {
    const auto& members = type_nodes_[t];
    const auto given = std::count_if(members.begin(), members.end(),
                                     [&](std::size_t i) { return !data_.features[i].empty(); });
    if (given != 0 && static_cast<std::size_t>(given) != members.size()) {
      throw DataError(fmt::format("node type {} mixes featured and featureless nodes", t));
    }
    given_features_[t] = given != 0;
    if (given_features_[t]) {
      feature_dim_[t] = data_.features[members.front()].size();
      for (std::size_t i : members) {
        if (data_.features[i].size() != feature_dim_[t]) {
          throw DataError(fmt::format("node {} of type {} has {} features, expected {}", i, t,
                                      data_.features[i].size(), feature_dim_[t]));
        }
        type_features_[t].insert(type_features_[t].end(), data_.features[i].begin(), data_.features[i].end());
      }
    } else {
      feature_dim_[t] = num_node_types_;
      type_features_[t].assign(members.size() * num_node_types_, 0.0);
      for (std::size_t r = 0; r < members.size(); ++r) type_features_[t][r * num_node_types_ + t] = 1.0;
    }
  }

  // edges → arcs and adjacency
  edges_ = data_.edges;
  adjacency_.assign(n, {});
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& edge = edges_[e];
    if (edge.src >= n || edge.dst >= n) {
      throw DataError(fmt::format("edge {} ({} -> {}) references a node outside [0, {})", e, edge.src, edge.dst, n));
    }
    num_edge_types_ = std::max(num_edge_types_, edge.type + 1);
    auto push_arc = [&](std::size_t from, std::size_t to) {
      arc_src_.push_back(from);
      arc_dst_.push_back(to);
      arc_type_.push_back(edge.type);
      arc_edge_.push_back(e);
      adjacency_[to].push_back(from);
    };
    push_arc(edge.src, edge.dst);
    if (edge.src != edge.dst) push_arc(edge.dst, edge.src);
  }

  // labels
  labels_ = data_.labels;
  for (std::size_t i = 0; i < n; ++i) {
    auto sorted = labels_[i];
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw DataError(fmt::format("node {} lists a class twice", i));
    }
    if (labels_[i].size() > 1) multi_label_ = true;
    for (std::size_t c : labels_[i]) num_classes_ = std::max(num_classes_, c + 1);
  }

  // split masks must partition the labeled nodes
  split_ = data_.split;
  for (std::size_t i = 0; i < split_.size(); ++i) {
    if (is_labeled(i) && split_[i] == SplitRole::None) {
      throw DataError(fmt::format("labeled node {} is in no split", i));
    }
    if (!is_labeled(i) && split_[i] != SplitRole::None) {
      throw DataError(fmt::format("unlabeled node {} is assigned to {}", i, to_string(split_[i])));
    }
  }
}

std::vector<double> HeteroGraph::label_matrix() const {
  std::vector<double> y(num_nodes() * num_classes_, 0.0);
  for (std::size_t i = 0; i < num_nodes(); ++i) {
    for (std::size_t c : labels_[i]) y[i * num_classes_ + c] = 1.0;
  }
  return y;
}

std::vector<std::size_t> HeteroGraph::labeled_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < num_nodes(); ++i) {
    if (is_labeled(i)) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> HeteroGraph::nodes_in(SplitRole role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split_.size(); ++i) {
    if (split_[i] == role) out.push_back(i);
  }
  return out;
}

HeteroGraph HeteroGraph::with_split(std::vector<SplitRole> split) const {
  GraphData copy = data_;
  copy.split = std::move(split);
  return HeteroGraph(std::move(copy));
}

double HeteroGraph::gcn_norm(std::size_t i, std::size_t j) const {
  const std::size_t di = degree(i), dj = degree(j);
  if (di == 0 || dj == 0) {
    throw ContractError(fmt::format("gcn_norm: node {} has degree zero", di == 0 ? i : j));
  }
  return 1.0 / std::sqrt(static_cast<double>(di) * static_cast<double>(dj));
}

// ---- TSV I/O -----------------------------------------------------------------

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw DataError(fmt::format("cannot open {}", path.string()));
  }

  /// Next non-empty line; false at end of file.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(fmt::format("{}:{}: {}", path_.filename().string(), line_no_, what));
  }

  std::size_t parse_index(std::string_view field, const char* what) const {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
      fail(fmt::format("malformed {} '{}'", what, field));
    }
    return v;
  }

  double parse_real(std::string_view field) const {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
      fail(fmt::format("malformed feature value '{}'", field));
    }
    return v;
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

void require_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError(fmt::format("missing dataset file {}", path.string()));
}

}  // namespace

HeteroGraph load_dataset(const std::filesystem::path& dir) {
  const auto node_path = dir / "node.tsv";
  const auto edge_path = dir / "edge.tsv";
  const auto label_path = dir / "label.tsv";
  const auto split_path = dir / "split.tsv";
  require_file(node_path);
  require_file(edge_path);
  require_file(label_path);

  GraphData data;
  std::string line;

  // node.tsv: node_id, node_type, optional comma-separated features
  {
    struct Row {
      std::size_t id, type;
      std::vector<double> features;
    };
    std::vector<Row> rows;
    LineReader reader(node_path);
    std::vector<bool> seen;
    while (reader.next(line)) {
      auto fields = split_fields(line, '\t');
      if (fields.size() < 2 || fields.size() > 3) reader.fail("expected 2 or 3 tab-separated fields");
      Row row{reader.parse_index(fields[0], "node id"), reader.parse_index(fields[1], "node type"), {}};
      if (fields.size() == 3 && !fields[2].empty()) {
        for (auto f : split_fields(fields[2], ',')) row.features.push_back(reader.parse_real(f));
      }
      if (row.id >= seen.size()) seen.resize(row.id + 1, false);
      if (seen[row.id]) reader.fail(fmt::format("duplicate node id {}", row.id));
      seen[row.id] = true;
      rows.push_back(std::move(row));
    }
    const std::size_t n = rows.size();
    for (const auto& row : rows) {
      if (row.id >= n) throw DataError(fmt::format("node.tsv: node ids must be 0..{}, found {}", n - 1, row.id));
    }
    data.node_type.resize(n);
    data.features.resize(n);
    for (auto& row : rows) {
      data.node_type[row.id] = row.type;
      data.features[row.id] = std::move(row.features);
    }
  }
  const std::size_t n = data.node_type.size();

  // edge.tsv: src, dst, edge_type
  {
    LineReader reader(edge_path);
    while (reader.next(line)) {
      auto fields = split_fields(line, '\t');
      if (fields.size() != 3) reader.fail("expected 3 tab-separated fields");
      Edge e{reader.parse_index(fields[0], "source id"), reader.parse_index(fields[1], "target id"),
             reader.parse_index(fields[2], "edge type")};
      if (e.src >= n || e.dst >= n) {
        reader.fail(fmt::format("dangling node id {} (graph has {} nodes)", e.src >= n ? e.src : e.dst, n));
      }
      data.edges.push_back(e);
    }
  }

  // label.tsv: node_id, comma-separated class ids
  data.labels.assign(n, {});
  {
    LineReader reader(label_path);
    std::vector<bool> seen(n, false);
    while (reader.next(line)) {
      auto fields = split_fields(line, '\t');
      if (fields.size() != 2) reader.fail("expected 2 tab-separated fields");
      const std::size_t id = reader.parse_index(fields[0], "node id");
      if (id >= n) reader.fail(fmt::format("dangling node id {} (graph has {} nodes)", id, n));
      if (seen[id]) reader.fail(fmt::format("duplicate label row for node {}", id));
      seen[id] = true;
      for (auto f : split_fields(fields[1], ',')) data.labels[id].push_back(reader.parse_index(f, "class id"));
    }
  }

  // split.tsv (optional): node_id, train|val|test
  if (std::filesystem::exists(split_path)) {
    data.split.assign(n, SplitRole::None);
    LineReader reader(split_path);
    while (reader.next(line)) {
      auto fields = split_fields(line, '\t');
      if (fields.size() != 2) reader.fail("expected 2 tab-separated fields");
      const std::size_t id = reader.parse_index(fields[0], "node id");
      if (id >= n) reader.fail(fmt::format("dangling node id {} (graph has {} nodes)", id, n));
      if (data.split[id] != SplitRole::None) reader.fail(fmt::format("node {} assigned twice", id));
      if (fields[1] == "train") data.split[id] = SplitRole::Train;
      else if (fields[1] == "val") data.split[id] = SplitRole::Val;
      else if (fields[1] == "test") data.split[id] = SplitRole::Test;
      else reader.fail(fmt::format("unknown split '{}'", fields[1]));
    }
  }

  return HeteroGraph(std::move(data));
}

void save_dataset(const HeteroGraph& graph, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const GraphData& data = graph.data();
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", (dir / name).string()));
    return out;
  };
  {
    auto out = open("node.tsv");
    for (std::size_t i = 0; i < data.node_type.size(); ++i) {
      out << i << '\t' << data.node_type[i];
      if (!data.features[i].empty()) out << '\t' << fmt::format("{}", fmt::join(data.features[i], ","));
      out << '\n';
    }
  }
  {
    auto out = open("edge.tsv");
    for (const Edge& e : data.edges) out << e.src << '\t' << e.dst << '\t' << e.type << '\n';
  }
  {
    auto out = open("label.tsv");
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
      if (!data.labels[i].empty()) out << i << '\t' << fmt::format("{}", fmt::join(data.labels[i], ",")) << '\n';
    }
  }
  const auto split_path = dir / "split.tsv";
  if (!data.split.empty()) {
    auto out = open("split.tsv");
    for (std::size_t i = 0; i < data.split.size(); ++i) {
      if (data.split[i] != SplitRole::None) out << i << '\t' << to_string(data.split[i]) << '\n';
    }
  } else if (std::filesystem::exists(split_path)) {
    std::filesystem::remove(split_path);
  }
}

std::string dataset_fingerprint(const std::filesystem::path& dir) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&](unsigned char byte) {
    h ^= byte;
    h *= 1099511628211ull;
  };
  for (const char* name : {"node.tsv", "edge.tsv", "label.tsv", "split.tsv"}) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) continue;
    for (const char* p = name; *p; ++p) mix(static_cast<unsigned char>(*p));
    std::ifstream in(path, std::ios::binary);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
      for (std::streamsize k = 0; k < in.gcount(); ++k) mix(static_cast<unsigned char>(buf[k]));
    }
  }
  return fmt::format("{:016x}", h);
}

// ---- splits ------------------------------------------------------------------

namespace {

// Largest-remainder apportionment of `total` proportional to `weights`, with
// each share capped by `caps`. Ties go to the lower index.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights,
                                   const std::vector<std::size_t>& caps) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> share(weights.size(), 0);
  std::vector<double> remainder(weights.size(), 0.0);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double quota = static_cast<double>(total) * static_cast<double>(weights[k]) / wsum;
    share[k] = std::min<std::size_t>(static_cast<std::size_t>(std::floor(quota + 1e-9)), caps[k]);
    remainder[k] = quota - static_cast<double>(share[k]);
    assigned += share[k];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  while (assigned < total) {
    bool progressed = false;
    for (std::size_t k : order) {
      if (assigned == total) break;
      if (share[k] < caps[k]) {
        ++share[k];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) throw ContractError("make_split: split quotas exceed available nodes");
  }
  return share;
}

}  // namespace

std::vector<SplitRole> make_split(const HeteroGraph& graph, const SplitSpec& spec) {
  spec.validate();
  const auto labeled = graph.labeled_nodes();
  const std::size_t total = labeled.size();
  if (total == 0) throw ContractError("make_split: no labeled nodes");

  std::vector<std::vector<std::size_t>> groups(graph.num_classes());
  for (std::size_t i : labeled) groups[graph.labels(i).front()].push_back(i);
  std::vector<std::size_t> sizes;
  std::vector<std::vector<std::size_t>> nonempty;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].empty()) continue;
    if (groups[c].size() < 3) {
      throw ContractError(fmt::format("make_split: class {} has {} labeled nodes, fewer than the 3 splits",
                                      c, groups[c].size()));
    }
    sizes.push_back(groups[c].size());
    nonempty.push_back(std::move(groups[c]));
  }

  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_frac * static_cast<double>(total) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(spec.val_frac * static_cast<double>(total) + 1e-9));
  const auto train_share = apportion(n_train, sizes, sizes);
  std::vector<std::size_t> left(sizes.size());
  for (std::size_t k = 0; k < sizes.size(); ++k) left[k] = sizes[k] - train_share[k];
  const auto val_share = apportion(n_val, sizes, left);

  std::mt19937_64 rng(spec.seed);
  std::vector<SplitRole> split(graph.num_nodes(), SplitRole::None);
  for (std::size_t k = 0; k < nonempty.size(); ++k) {
    auto& members = nonempty[k];
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t r = 0; r < members.size(); ++r) {
      split[members[r]] = r < train_share[k]                 ? SplitRole::Train
                          : r < train_share[k] + val_share[k] ? SplitRole::Val
                                                              : SplitRole::Test;
    }
  }
  return split;
}

// ---- synthetic fixtures ------------------------------------------------------

HeteroGraph synth_planted(const PlantedSpec& spec) {
  if (spec.n_classes == 0 || spec.n < spec.n_classes) {
    throw ContractError(fmt::format("synth_planted: need n >= n_classes >= 1, got n={} classes={}", spec.n, spec.n_classes));
  }
  if (!(spec.homophily > 0.0 && spec.homophily <= 1.0)) {
    throw ContractError(fmt::format("synth_planted: homophily {} outside (0, 1]", spec.homophily));
  }
  if (spec.n_node_types == 0 || spec.n_edge_types < spec.n_classes) {
    throw ContractError(fmt::format("synth_planted: need >= 1 node type and >= n_classes edge types, got {} and {}",
                                    spec.n_node_types, spec.n_edge_types));
  }
  if (!(spec.avg_degree >= 0.0) || spec.n < 2) {
    throw ContractError("synth_planted: need n >= 2 and a nonnegative average degree");
  }

  std::mt19937_64 rng(spec.seed);
  const std::size_t n = spec.n;

  std::vector<std::size_t> cls(n);
  for (std::size_t i = 0; i < n; ++i) cls[i] = i % spec.n_classes;
  std::shuffle(cls.begin(), cls.end(), rng);
  std::vector<std::vector<std::size_t>> members(spec.n_classes);
  for (std::size_t i = 0; i < n; ++i) members[cls[i]].push_back(i);

  GraphData data;
  data.node_type.resize(n);
  std::uniform_int_distribution<std::size_t> pick_node_type(0, spec.n_node_types - 1);
  for (auto& t : data.node_type) t = pick_node_type(rng);
  data.features.assign(n, {});
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.labels[i] = {cls[i]};

  const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.avg_degree / 2.0));
  std::uniform_int_distribution<std::size_t> pick_node(0, n - 1);
  std::uniform_int_distribution<std::size_t> pick_edge_type(0, spec.n_edge_types - 1);
  std::bernoulli_distribution coin(spec.homophily);
  data.edges.reserve(m);
  for (std::size_t e = 0; e < m; ++e) {
    const std::size_t src = pick_node(rng);
    const auto& own = members[cls[src]];
    const bool want_intra = coin(rng);
    const bool intra = (want_intra && own.size() > 1) || spec.n_classes == 1;
    std::size_t dst = src;
    if (intra) {
      std::uniform_int_distribution<std::size_t> pick(0, own.size() - 1);
      while (dst == src) dst = own[pick(rng)];
    } else {
      while (dst == src || cls[dst] == cls[src]) dst = pick_node(rng);
    }
    std::size_t type = 0;
    if (intra) {
      type = coin(rng) ? cls[src] : pick_edge_type(rng);
    } else {
      type = pick_edge_type(rng);
    }
    data.edges.push_back(Edge{src, dst, type});
  }
  return HeteroGraph(std::move(data));
}

}  // namespace edgegfl
