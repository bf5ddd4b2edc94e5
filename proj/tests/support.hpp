#pragma once
// Fixtures and independent reference implementations shared by the tests.
// Oracles deliberately avoid the library's own data structures: they work from
// dense matrices, explicit pair enumeration and plain loops.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "edgegfl/hetgraph.hpp"

namespace testsupport {

using Matrix = std::vector<std::vector<double>>;

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = std::filesystem::temp_directory_path() /
             ("edgegfl_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// 6 nodes, 2 node types (given features of dims 3 and 2), 3 edge types,
/// 2 classes.
inline edgegfl::GraphData tiny_data() {
  edgegfl::GraphData d;
  d.node_type = {0, 0, 0, 1, 1, 1};
  d.features = {{0.5, -0.2, 0.1}, {0.3, 0.8, -0.4}, {-0.6, 0.1, 0.9}, {0.7, -0.3}, {-0.2, 0.4}, {0.1, 0.6}};
  d.edges = {{0, 1, 0}, {1, 2, 1}, {2, 3, 2}, {3, 4, 0}, {4, 5, 1}, {5, 0, 2}, {0, 3, 1}};
  d.labels = {{0}, {1}, {0}, {1}, {0}, {1}};
  return d;
}

/// Random connected-ish graph with one node type and no isolated node.
inline edgegfl::GraphData random_graph_data(std::mt19937_64& rng, std::size_t n, std::size_t extra_edges,
                                            std::size_t dim, bool self_loops) {
  edgegfl::GraphData d;
  d.node_type.assign(n, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> f(dim);
    for (auto& v : f) v = gauss(rng);
    d.features.push_back(f);
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  auto add = [&](std::size_t a, std::size_t b) {
    if (seen.insert({std::min(a, b), std::max(a, b)}).second) d.edges.push_back({a, b, 0});
  };
  for (std::size_t i = 1; i < n; ++i) add(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng), i);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t e = 0; e < extra_edges; ++e) {
    const auto a = pick(rng), b = pick(rng);
    if (a != b) add(a, b);
  }
  if (self_loops) {
    for (std::size_t i = 0; i < n; ++i) add(i, i);
  }
  return d;
}

// ---- GCN layer oracle --------------------------------------------------------

/// σ(Σ_{j∈N_i∪{i}} h_j W / sqrt(deg_i·deg_j)) with deg counting the self loop,
/// computed from a dense adjacency matrix built from the raw edge list.
template <class Act>
Matrix gcn_layer_oracle(std::size_t n, const std::vector<edgegfl::Edge>& edges, const Matrix& h, const Matrix& w,
                        Act act) {
  Matrix adj(n, std::vector<double>(n, 0.0));
  for (const auto& e : edges) {
    adj[e.src][e.dst] = 1.0;
    adj[e.dst][e.src] = 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) adj[i][i] = 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += adj[i][j];

  const std::size_t din = w.size(), dout = w.front().size();
  Matrix out(n, std::vector<double>(dout, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> agg(din, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (adj[i][j] == 0.0) continue;
      const double a = 1.0 / std::sqrt(deg[i] * deg[j]);
      for (std::size_t k = 0; k < din; ++k) agg[k] += a * h[j][k];
    }
    for (std::size_t c = 0; c < dout; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < din; ++k) s += agg[k] * w[k][c];
      out[i][c] = act(s);
    }
  }
  return out;
}

// ---- metric oracles ------------------------------------------------------------

/// Micro-F1 from pooled per-class counts, looping over classes explicitly.
inline double oracle_micro_f1(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p, std::size_t k) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      tp += (t[i] == c && p[i] == c);
      fp += (t[i] != c && p[i] == c);
      fn += (t[i] == c && p[i] != c);
    }
  }
  const double prec = tp + fp == 0 ? 0 : tp / (tp + fp);
  const double rec = tp + fn == 0 ? 0 : tp / (tp + fn);
  return prec + rec == 0 ? 0 : 2 * prec * rec / (prec + rec);
}

inline double oracle_macro_f1(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p, std::size_t k) {
  double total = 0;
  for (std::size_t c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      tp += (t[i] == c && p[i] == c);
      fp += (t[i] != c && p[i] == c);
      fn += (t[i] == c && p[i] != c);
    }
    const double prec = tp + fp == 0 ? 0 : tp / (tp + fp);
    const double rec = tp + fn == 0 ? 0 : tp / (tp + fn);
    total += prec + rec == 0 ? 0 : 2 * prec * rec / (prec + rec);
  }
  return total / static_cast<double>(k);
}

struct PairCounts {
  double both_same = 0, truth_only = 0, pred_only = 0, both_apart = 0;
};

inline PairCounts enumerate_pairs(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p) {
  PairCounts c;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const bool st = t[i] == t[j], sp = p[i] == p[j];
      if (st && sp) ++c.both_same;
      else if (st) ++c.truth_only;
      else if (sp) ++c.pred_only;
      else ++c.both_apart;
    }
  }
  return c;
}

inline double oracle_rand_index(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p) {
  const auto c = enumerate_pairs(t, p);
  return (c.both_same + c.both_apart) / (c.both_same + c.truth_only + c.pred_only + c.both_apart);
}

/// Pair-counting form of ARI: 2(ad − bc) / ((a+b)(b+d) + (a+c)(c+d)).
inline double oracle_ari(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p) {
  const auto c = enumerate_pairs(t, p);
  const double a = c.both_same, b = c.truth_only, cc = c.pred_only, d = c.both_apart;
  return 2.0 * (a * d - b * cc) / ((a + b) * (b + d) + (a + cc) * (cc + d));
}

/// NMI from empirical joint probabilities, base-2 logs (the ratio is
/// base-independent).
inline double oracle_nmi(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p) {
  const std::size_t kt = *std::max_element(t.begin(), t.end()) + 1;
  const std::size_t kp = *std::max_element(p.begin(), p.end()) + 1;
  const double n = static_cast<double>(t.size());
  std::vector<std::vector<std::size_t>> counts(kt, std::vector<std::size_t>(kp, 0));
  std::vector<std::size_t> ct(kt, 0), cp(kp, 0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    ++counts[t[i]][p[i]];
    ++ct[t[i]];
    ++cp[p[i]];
  }
  Matrix joint(kt, std::vector<double>(kp, 0.0));
  std::vector<double> pt(kt), pp(kp);
  for (std::size_t a = 0; a < kt; ++a)
    for (std::size_t b = 0; b < kp; ++b) joint[a][b] = static_cast<double>(counts[a][b]) / n;
  for (std::size_t a = 0; a < kt; ++a) pt[a] = static_cast<double>(ct[a]) / n;
  for (std::size_t b = 0; b < kp; ++b) pp[b] = static_cast<double>(cp[b]) / n;
  double mi = 0, ht = 0, hp = 0;
  for (std::size_t a = 0; a < kt; ++a)
    for (std::size_t b = 0; b < kp; ++b)
      if (joint[a][b] > 0) mi += joint[a][b] * std::log2(joint[a][b] / (pt[a] * pp[b]));
  for (double v : pt)
    if (v > 0) ht -= v * std::log2(v);
  for (double v : pp)
    if (v > 0) hp -= v * std::log2(v);
  if (ht + hp == 0) return 1.0;
  return mi / ((ht + hp) / 2.0);
}

}  // namespace testsupport
