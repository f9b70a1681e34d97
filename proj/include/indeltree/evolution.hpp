#pragma once

// Ground-truth broadcast process on a complete d-ary tree: a uniform root
// sequence is copied down every edge under independent per-site
// substitution, deletion and right-insertion coins. Every surviving or
// inserted site carries a lineage id, and every edge stores the map from
// parent positions to child positions, so homology is known exactly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "indeltree/rng.hpp"

namespace indeltree {

using Bits = std::vector<std::uint8_t>;
using LineageId = std::uint64_t;

/// Raised for invalid or infeasible parameter sets. `code()` is a stable
/// machine-readable tag such as "invalid-configuration".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string code, const std::string& what)
      : std::invalid_argument(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct ModelParams {
  int d = 3;             // arity, odd and >= 3
  int H = 0;             // number of levels below the root
  std::size_t k = 1;     // root length
  double p_s = 0.0;      // substitution, in [0, 1/2)
  double p_d = 0.0;      // deletion, in [0, 1)
  double p_i = 0.0;      // insertion to the right, in [0, 1)

  double p_id() const noexcept { return p_i + p_d; }
  double theta_s() const noexcept { return 1.0 - 2.0 * p_s; }
  std::size_t n() const;  // number of leaves, d^H

  void validate() const;
};

/// Node ids follow breadth-first order: root 0, children of v are
/// d*v+1 .. d*v+d. Leaves are the last d^H ids, in planar order.
struct TreeShape {
  int d = 3;
  int H = 0;

  std::size_t level_start(int level) const {
    std::size_t start = 0, width = 1;
    for (int l = 0; l < level; ++l) {
      start += width;
      width *= static_cast<std::size_t>(d);
    }
    return start;
  }
  std::size_t node_count() const { return level_start(H + 1); }
  std::size_t leaf_count() const { return node_count() - level_start(H); }
  std::size_t first_leaf() const { return level_start(H); }
  bool is_leaf(std::size_t v) const { return v >= first_leaf(); }

  std::size_t parent(std::size_t v) const { return (v - 1) / static_cast<std::size_t>(d); }
  std::size_t first_child(std::size_t v) const { return static_cast<std::size_t>(d) * v + 1; }
  std::size_t child_index(std::size_t v) const { return (v - 1) % static_cast<std::size_t>(d); }

  bool operator==(const TreeShape&) const = default;

  int level(std::size_t v) const {
    int l = 0;
    while (v >= level_start(l + 1)) ++l;
    return l;
  }
};

inline std::size_t ModelParams::n() const {
  std::size_t leaves = 1;
  for (int h = 0; h < H; ++h) leaves *= static_cast<std::size_t>(d);
  return leaves;
}

inline void ModelParams::validate() const {
  if (d < 3 || d % 2 == 0)
    throw ConfigError("invalid-configuration", "arity d must be odd and >= 3, got " + std::to_string(d));
  if (H < 0) throw ConfigError("invalid-configuration", "height H must be >= 0");
  if (k == 0) throw ConfigError("invalid-configuration", "root length k must be >= 1");
  if (!(p_s >= 0.0 && p_s < 0.5))
    throw ConfigError("invalid-configuration", "p_s must lie in [0, 1/2)");
  if (!(p_d >= 0.0 && p_d <= 1.0) || !(p_i >= 0.0 && p_i < 1.0))
    throw ConfigError("invalid-configuration", "p_d must lie in [0, 1] and p_i in [0, 1)");
}

/// A sequence with per-site lineage ids. Reconstructed sequences leave
/// `lineage` empty.
struct Sequence {
  Bits bits;
  std::vector<LineageId> lineage;

  std::size_t size() const noexcept { return bits.size(); }
  bool operator==(const Sequence&) const = default;
};

inline constexpr std::int64_t kDeleted = -1;

/// Parent position -> child position, or kDeleted.
struct SiteMap {
  std::vector<std::int64_t> to_child;

  std::size_t size() const noexcept { return to_child.size(); }
  std::int64_t operator[](std::size_t t) const { return to_child[t]; }
  bool operator==(const SiteMap&) const = default;

  bool is_monotone() const {
    std::int64_t last = -1;
    for (auto c : to_child) {
      if (c == kDeleted) continue;
      if (c <= last) return false;
      last = c;
    }
    return true;
  }
};

/// Everything that happened on one edge.
struct EdgeRecord {
  SiteMap map;
  /// Parent position each inserted site was created after, in child order.
  std::vector<std::int64_t> insert_after;
  std::size_t substitutions = 0;

  std::size_t deletions() const {
    std::size_t n = 0;
    for (auto c : map.to_child) n += (c == kDeleted);
    return n;
  }
  bool operator==(const EdgeRecord&) const = default;
};

struct EvolvedTree {
  ModelParams params;
  std::uint64_t seed = 0;
  TreeShape shape;
  std::vector<Sequence> nodes;     // by node id
  std::vector<EdgeRecord> edges;   // by child node id; edges[0] unused

  const Sequence& root() const { return nodes.front(); }
  std::span<const Sequence> leaves() const {
    return std::span<const Sequence>(nodes).subspan(shape.first_leaf());
  }
};

/// Uniform root of length k. Lineage ids are 1..k.
inline Sequence sample_root(std::size_t k, Stream& rng) {
  if (k == 0) throw ConfigError("invalid-configuration", "root length k must be >= 1");
  Sequence s;
  s.bits.resize(k);
  s.lineage.resize(k);
  for (std::size_t t = 0; t < k; ++t) {
    s.bits[t] = rng.bit();
    s.lineage[t] = t + 1;
  }
  return s;
}

/// One edge of the process. Per parent site three independent coins are
/// drawn in the order (delete, substitute, insert). A deleted site ignores
/// its substitution coin; its insertion coin still applies. Inserted sites
/// get uniform bits and ids `next_lineage`, `next_lineage + 1`, ...
inline std::pair<Sequence, EdgeRecord> mutate_edge(const Sequence& parent, const ModelParams& params,
                                                   Stream& rng, LineageId& next_lineage) {
  Sequence child;
  EdgeRecord edge;
  const std::size_t k = parent.size();
  child.bits.reserve(k + k / 16 + 4);
  child.lineage.reserve(k + k / 16 + 4);
  edge.map.to_child.assign(k, kDeleted);
  const bool has_lineage = parent.lineage.size() == k;

  for (std::size_t t = 0; t < k; ++t) {
    const bool del = rng.bernoulli(params.p_d);
    const bool sub = rng.bernoulli(params.p_s);
    const bool ins = rng.bernoulli(params.p_i);
    if (!del) {
      edge.map.to_child[t] = static_cast<std::int64_t>(child.bits.size());
      child.bits.push_back(static_cast<std::uint8_t>(parent.bits[t] ^ (sub ? 1 : 0)));
      child.lineage.push_back(has_lineage ? parent.lineage[t] : 0);
      edge.substitutions += sub;
    }
    if (ins) {
      edge.insert_after.push_back(static_cast<std::int64_t>(t));
      child.bits.push_back(rng.bit());
      child.lineage.push_back(next_lineage++);
    }
  }
  return {std::move(child), std::move(edge)};
}

inline constexpr std::size_t kDefaultNodeBudget = std::size_t{1} << 21;

inline EvolvedTree evolve_tree(const ModelParams& params, std::uint64_t seed,
                               std::size_t node_budget = kDefaultNodeBudget) {
  params.validate();
  EvolvedTree tree;
  tree.params = params;
  tree.seed = seed;
  tree.shape = TreeShape{params.d, params.H};

  // Overflow-safe node count check.
  double approx = 0, width = 1;
  for (int l = 0; l <= params.H; ++l, width *= params.d) approx += width;
  if (approx > static_cast<double>(node_budget))
    throw ConfigError("resource-limit", "tree with " + std::to_string(approx) +
                                            " nodes exceeds node budget " + std::to_string(node_budget));

  const std::size_t count = tree.shape.node_count();
  tree.nodes.resize(count);
  tree.edges.resize(count);

  Stream root_rng(seed, StreamTag::kRoot);
  tree.nodes[0] = sample_root(params.k, root_rng);
  LineageId next = params.k + 1;
  for (std::size_t v = 1; v < count; ++v) {
    Stream edge_rng(seed, StreamTag::kEdge, v);
    auto [child, edge] = mutate_edge(tree.nodes[tree.shape.parent(v)], params, edge_rng, next);
    tree.nodes[v] = std::move(child);
    tree.edges[v] = std::move(edge);
  }
  return tree;
}

/// Reassigns lineage ids from the recorded structure: root sites get 1..k
/// and inserted sites continue the counter in node order. This reproduces
/// the ids evolve_tree assigned, so trees loaded without ids match exactly.
inline void assign_lineage(EvolvedTree& tree) {
  const std::size_t count = tree.nodes.size();
  if (count == 0) return;
  auto& root = tree.nodes[0];
  root.lineage.resize(root.bits.size());
  for (std::size_t t = 0; t < root.lineage.size(); ++t) root.lineage[t] = t + 1;
  LineageId next = root.bits.size() + 1;
  for (std::size_t v = 1; v < count; ++v) {
    const auto& parent = tree.nodes[tree.shape.parent(v)];
    auto& child = tree.nodes[v];
    const auto& edge = tree.edges[v];
    child.lineage.assign(child.bits.size(), 0);
    for (std::size_t t = 0; t < edge.map.size(); ++t)
      if (edge.map[t] != kDeleted) child.lineage[static_cast<std::size_t>(edge.map[t])] = parent.lineage[t];
    for (std::size_t j = 0; j < child.lineage.size(); ++j)
      if (child.lineage[j] == 0) child.lineage[j] = next++;
  }
}

/// Map from positions of `ancestor` to positions of `node`, composed along
/// the path. `ancestor` must lie on the root path of `node`.
inline SiteMap compose_maps(const EvolvedTree& tree, std::size_t ancestor, std::size_t node) {
  std::vector<std::size_t> path;
  for (std::size_t v = node; v != ancestor; v = tree.shape.parent(v)) {
    if (v == 0) throw std::invalid_argument("compose_maps: ancestor is not on the root path");
    path.push_back(v);
  }
  SiteMap out;
  out.to_child.resize(tree.nodes.at(ancestor).size());
  for (std::size_t t = 0; t < out.size(); ++t) out.to_child[t] = static_cast<std::int64_t>(t);
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    const auto& step = tree.edges[*it].map;
    for (auto& pos : out.to_child)
      if (pos != kDeleted) pos = step[static_cast<std::size_t>(pos)];
  }
  return out;
}

inline SiteMap compose_maps(const EvolvedTree& tree, std::size_t node) {
  return compose_maps(tree, 0, node);
}

struct LengthStats {
  bool holds = true;  // event L
  std::size_t min_length = 0;
  std::size_t max_length = 0;
  double lower = 0, upper = 0;
};

inline LengthStats length_stats(const EvolvedTree& tree, double zeta) {
  if (!(zeta > 0.0 && zeta < 1.0)) throw std::invalid_argument("length_stats: zeta must lie in (0, 1)");
  LengthStats s;
  const double k = static_cast<double>(tree.params.k);
  s.lower = (1.0 - zeta) * k;
  s.upper = (1.0 + zeta) * k;
  s.min_length = tree.nodes.front().size();
  s.max_length = s.min_length;
  for (const auto& node : tree.nodes) {
    s.min_length = std::min(s.min_length, node.size());
    s.max_length = std::max(s.max_length, node.size());
  }
  s.holds = static_cast<double>(s.min_length) >= s.lower && static_cast<double>(s.max_length) <= s.upper;
  return s;
}

inline std::vector<Bits> leaf_bits(const EvolvedTree& tree) {
  std::vector<Bits> out;
  out.reserve(tree.shape.leaf_count());
  for (const auto& leaf : tree.leaves()) out.push_back(leaf.bits);
  return out;
}

}  // namespace indeltree
