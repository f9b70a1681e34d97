#pragma once

// Text formats for evolved trees and leaf sets.
//
// Node file: one line per node, `node_id<TAB>level<TAB>bits`, bits as ASCII
// 0/1 (an empty sequence is an empty field).
//
// Map file: one line per parent site of every edge,
// `child_id<TAB>parent_pos<TAB>child_pos` with `DAGGER` for a deleted site.
// Inserted sites follow the parent site they were created after as
// `child_id<TAB>parent_pos<TAB>+child_pos`. Positions are 0-based.
//
// The JSON variant holds the same content in one document.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "indeltree/evolution.hpp"

namespace indeltree::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string to_text(const Bits& bits) {
  std::string s(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i) s[i] = bits[i] ? '1' : '0';
  return s;
}

inline Bits from_text(std::string_view s) {
  Bits b(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw IoError(std::string("invalid bit character '") + s[i] + "'");
    b[i] = s[i] == '1';
  }
  return b;
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

/// Integer field; a malformed value becomes an IoError naming the line.
inline long long to_int(const std::string& field, const char* file, std::size_t lineno) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(field, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (field.empty() || used != field.size())
    throw IoError(std::string(file) + " line " + std::to_string(lineno) + ": malformed integer '" + field + "'");
  return v;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  return f;
}

}  // namespace detail

inline void write_nodes(std::ostream& os, const EvolvedTree& tree) {
  for (std::size_t v = 0; v < tree.nodes.size(); ++v)
    os << v << '\t' << tree.shape.level(v) << '\t' << to_text(tree.nodes[v].bits) << '\n';
}

inline void write_maps(std::ostream& os, const EvolvedTree& tree) {
  for (std::size_t c = 1; c < tree.edges.size(); ++c) {
    const auto& e = tree.edges[c];
    std::size_t next_ins = 0;
    std::int64_t child_pos = 0;
    for (std::size_t t = 0; t < e.map.size(); ++t) {
      if (e.map[t] == kDeleted) {
        os << c << '\t' << t << "\tDAGGER\n";
      } else {
        os << c << '\t' << t << '\t' << e.map[t] << '\n';
        child_pos = e.map[t] + 1;
      }
      while (next_ins < e.insert_after.size() && e.insert_after[next_ins] == static_cast<std::int64_t>(t)) {
        os << c << '\t' << t << "\t+" << child_pos << '\n';
        ++child_pos;
        ++next_ins;
      }
    }
  }
}

/// Parses the node and map files. The shape is inferred from the node
/// count and the given arity; lineage ids are rebuilt from the maps.
inline EvolvedTree read_tree(std::istream& nodes_in, std::istream& maps_in, const ModelParams& params) {
  EvolvedTree tree;
  tree.params = params;
  tree.shape = TreeShape{params.d, params.H};
  const std::size_t count = tree.shape.node_count();
  tree.nodes.resize(count);
  tree.edges.resize(count);
  std::vector<std::uint8_t> seen(count, 0);

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(nodes_in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 3) throw IoError("node file line " + std::to_string(lineno) + ": expected 3 fields");
    const auto v = static_cast<std::size_t>(detail::to_int(f[0], "node file", lineno));
    if (v >= count) throw IoError("node file line " + std::to_string(lineno) + ": node id out of range");
    if (detail::to_int(f[1], "node file", lineno) != tree.shape.level(v))
      throw IoError("node file line " + std::to_string(lineno) + ": level does not match node id");
    tree.nodes[v].bits = from_text(f[2]);
    seen[v] = 1;
  }
  for (std::size_t v = 0; v < count; ++v)
    if (!seen[v]) throw IoError("node file: missing node " + std::to_string(v));

  lineno = 0;
  while (std::getline(maps_in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 3) throw IoError("map file line " + std::to_string(lineno) + ": expected 3 fields");
    const auto c = static_cast<std::size_t>(detail::to_int(f[0], "map file", lineno));
    if (c == 0 || c >= count) throw IoError("map file line " + std::to_string(lineno) + ": child id out of range");
    const auto t = static_cast<std::int64_t>(detail::to_int(f[1], "map file", lineno));
    auto& e = tree.edges[c];
    if (!f[2].empty() && f[2][0] == '+') {
      detail::to_int(f[2].substr(1), "map file", lineno);
      e.insert_after.push_back(t);
      continue;
    }
    if (t != static_cast<std::int64_t>(e.map.size()))
      throw IoError("map file line " + std::to_string(lineno) + ": parent positions must be consecutive");
    e.map.to_child.push_back(f[2] == "DAGGER" ? kDeleted : detail::to_int(f[2], "map file", lineno));
  }
  for (std::size_t c = 1; c < count; ++c) {
    const auto& e = tree.edges[c];
    if (e.map.size() != tree.nodes[tree.shape.parent(c)].size())
      throw IoError("map file: edge " + std::to_string(c) + " does not cover its parent");
    if (e.map.size() - e.deletions() + e.insert_after.size() != tree.nodes[c].size())
      throw IoError("map file: edge " + std::to_string(c) + " disagrees with the child length");
  }
  assign_lineage(tree);
  return tree;
}

inline nlohmann::json to_json(const EvolvedTree& tree) {
  nlohmann::json j;
  j["params"] = {{"d", tree.params.d},     {"H", tree.params.H},     {"k", tree.params.k},
                 {"p_s", tree.params.p_s}, {"p_d", tree.params.p_d}, {"p_i", tree.params.p_i}};
  j["seed"] = tree.seed;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (std::size_t v = 0; v < tree.nodes.size(); ++v)
    nodes.push_back({{"id", v}, {"level", tree.shape.level(v)}, {"bits", to_text(tree.nodes[v].bits)}});
  auto& edges = j["edges"] = nlohmann::json::array();
  for (std::size_t c = 1; c < tree.edges.size(); ++c)
    edges.push_back({{"child", c}, {"map", tree.edges[c].map.to_child}, {"insert_after", tree.edges[c].insert_after}});
  return j;
}

inline EvolvedTree tree_from_json(const nlohmann::json& j) {
  EvolvedTree tree;
  const auto& p = j.at("params");
  tree.params.d = p.at("d");
  tree.params.H = p.at("H");
  tree.params.k = p.at("k");
  tree.params.p_s = p.at("p_s");
  tree.params.p_d = p.at("p_d");
  tree.params.p_i = p.at("p_i");
  tree.params.validate();
  tree.seed = j.value("seed", std::uint64_t{0});
  tree.shape = TreeShape{tree.params.d, tree.params.H};
  const std::size_t count = tree.shape.node_count();
  tree.nodes.resize(count);
  tree.edges.resize(count);
  for (const auto& n : j.at("nodes")) {
    const std::size_t v = n.at("id");
    if (v >= count) throw IoError("json: node id out of range");
    tree.nodes[v].bits = from_text(n.at("bits").get<std::string>());
  }
  for (const auto& e : j.at("edges")) {
    const std::size_t c = e.at("child");
    if (c == 0 || c >= count) throw IoError("json: edge child id out of range");
    tree.edges[c].map.to_child = e.at("map").get<std::vector<std::int64_t>>();
    tree.edges[c].insert_after = e.at("insert_after").get<std::vector<std::int64_t>>();
  }
  assign_lineage(tree);
  return tree;
}

/// Leaves file: the node-file format restricted to leaves, in planar order.
inline void write_leaves(std::ostream& os, const EvolvedTree& tree) {
  for (std::size_t v = tree.shape.first_leaf(); v < tree.nodes.size(); ++v)
    os << v << '\t' << tree.shape.H << '\t' << to_text(tree.nodes[v].bits) << '\n';
}

/// Reads sequences from a node or leaves file, keeping the last d^H records
/// by node id. Plain one-sequence-per-line input is accepted as well.
inline std::vector<Bits> read_leaves(std::istream& in, const TreeShape& shape) {
  std::vector<std::pair<std::size_t, Bits>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() == 1) {
      rows.emplace_back(shape.first_leaf() + rows.size(), from_text(f[0]));
    } else if (f.size() == 3) {
      rows.emplace_back(static_cast<std::size_t>(detail::to_int(f[0], "leaves file", lineno)), from_text(f[2]));
    } else {
      throw IoError("leaves file line " + std::to_string(lineno) + ": expected 1 or 3 fields");
    }
  }
  std::vector<Bits> leaves(shape.leaf_count());
  std::vector<std::uint8_t> seen(leaves.size(), 0);
  for (auto& [v, bits] : rows) {
    if (v < shape.first_leaf()) continue;
    const std::size_t i = v - shape.first_leaf();
    if (i >= leaves.size()) throw IoError("leaves file: node id " + std::to_string(v) + " is not a leaf");
    leaves[i] = std::move(bits);
    seen[i] = 1;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw IoError("leaves file: missing leaf " + std::to_string(shape.first_leaf() + i));
  return leaves;
}

}  // namespace indeltree::io
