#include <gtest/gtest.h>

#include <sstream>

#include "indeltree/tree_io.hpp"

using namespace indeltree;

namespace {

ModelParams params() {
  ModelParams p;
  p.d = 3;
  p.H = 3;
  p.k = 300;
  p.p_s = 0.1;
  p.p_d = 0.02;
  p.p_i = 0.02;
  return p;
}

}  // namespace

TEST(BitText, RoundTripAndRejectsJunk) {
  const Bits b{1, 0, 0, 1, 1};
  EXPECT_EQ(io::to_text(b), "10011");
  EXPECT_EQ(io::from_text("10011"), b);
  EXPECT_THROW(io::from_text("1021"), io::IoError);
}

TEST(TreeText, NodesAndMapsRoundTrip) {
  const auto tree = evolve_tree(params(), 5);
  std::stringstream nodes, maps;
  io::write_nodes(nodes, tree);
  io::write_maps(maps, tree);
  EXPECT_NE(maps.str().find("DAGGER"), std::string::npos);
  EXPECT_NE(maps.str().find("\t+"), std::string::npos);
  const auto back = io::read_tree(nodes, maps, params());
  EXPECT_EQ(back.nodes, tree.nodes);
  EXPECT_EQ(back.edges.size(), tree.edges.size());
  for (std::size_t c = 1; c < tree.edges.size(); ++c) {
    EXPECT_EQ(back.edges[c].map, tree.edges[c].map);
    EXPECT_EQ(back.edges[c].insert_after, tree.edges[c].insert_after);
  }
}

TEST(TreeText, MalformedInputIsReported) {
  const auto tree = evolve_tree(params(), 6);
  std::stringstream nodes, maps;
  io::write_nodes(nodes, tree);
  io::write_maps(maps, tree);
  const std::string n = nodes.str(), m = maps.str();

  std::stringstream missing_node(n.substr(0, n.rfind('\n', n.size() - 2) + 1)), m1(m);
  EXPECT_THROW(io::read_tree(missing_node, m1, params()), io::IoError);

  std::stringstream n2(n), truncated_maps(m.substr(0, m.size() / 2));
  EXPECT_THROW(io::read_tree(n2, truncated_maps, params()), io::IoError);

  std::stringstream bad_fields("0\t0\n"), m3(m);
  EXPECT_THROW(io::read_tree(bad_fields, m3, params()), io::IoError);

  std::stringstream bad_id("x\t0\t101\n"), m4(m);
  try {
    io::read_tree(bad_id, m4, params());
    FAIL();
  } catch (const io::IoError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(TreeJson, RoundTrip) {
  const auto tree = evolve_tree(params(), 7);
  const auto back = io::tree_from_json(nlohmann::json::parse(io::to_json(tree).dump()));
  EXPECT_EQ(back.nodes, tree.nodes);
  EXPECT_EQ(back.seed, tree.seed);
  for (std::size_t c = 1; c < tree.edges.size(); ++c) EXPECT_EQ(back.edges[c].map, tree.edges[c].map);
}

TEST(Leaves, WrittenLeavesReadBackInPlanarOrder) {
  const auto tree = evolve_tree(params(), 8);
  std::stringstream ss;
  io::write_leaves(ss, tree);
  EXPECT_EQ(io::read_leaves(ss, tree.shape), leaf_bits(tree));

  std::stringstream all_nodes;
  io::write_nodes(all_nodes, tree);
  EXPECT_EQ(io::read_leaves(all_nodes, tree.shape), leaf_bits(tree));
}

TEST(Leaves, PlainLinesAndErrors) {
  const TreeShape shape{3, 1};
  std::stringstream plain("101\n11\n0\n");
  const auto leaves = io::read_leaves(plain, shape);
  ASSERT_EQ(leaves.size(), 3u);
  EXPECT_EQ(leaves[1], (Bits{1, 1}));
  std::stringstream too_few("101\n11\n");
  EXPECT_THROW(io::read_leaves(too_few, shape), io::IoError);
  std::stringstream bad("1\t2\n");
  EXPECT_THROW(io::read_leaves(bad, shape), io::IoError);
}
