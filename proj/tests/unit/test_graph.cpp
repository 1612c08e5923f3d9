#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "biossl/graph.hpp"
#include "oracles.hpp"

using namespace biossl;

namespace {

HetGraph from_text(const std::string& text, LoadReport* report = nullptr) {
  std::istringstream in(text);
  return load_edge_list(in, {}, report);
}

HetGraph drug_graph(std::size_t n, std::initializer_list<std::pair<NodeIndex, NodeIndex>> edges) {
  std::vector<NodeRef> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back({static_cast<NodeIndex>(i), NodeType::Drug, "D" + std::to_string(i)});
  std::vector<EdgeRec> es;
  for (auto [u, v] : edges) es.push_back({u, v, EdgeType::DrugDrug});
  return HetGraph::from_parts(nodes, es);
}

HetGraph path_graph(std::size_t n) {
  std::vector<NodeRef> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back({static_cast<NodeIndex>(i), NodeType::Drug, "D" + std::to_string(i)});
  std::vector<EdgeRec> es;
  for (std::size_t i = 0; i + 1 < n; ++i) es.push_back({static_cast<NodeIndex>(i), static_cast<NodeIndex>(i + 1), EdgeType::DrugDrug});
  return HetGraph::from_parts(nodes, es);
}

}  // namespace

TEST(EdgeList, EmptyStreamGivesEmptyGraph) {
  const HetGraph g = from_text("");
  EXPECT_EQ(g.num_nodes(), 0u);
  EXPECT_EQ(g.num_edges(), 0u);
  EXPECT_EQ(g.counts(), TypeCounts{});
}

TEST(EdgeList, DuplicateRowsCollapse) {
  LoadReport rep;
  const HetGraph g = from_text(
      "A\tDrug\tB\tDrug\tDrugDrug\n"
      "B\tDrug\tC\tDrug\tDrugDrug\n"
      "B\tDrug\tA\tDrug\tDrugDrug\n",
      &rep);
  EXPECT_EQ(g.num_nodes(), 3u);
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(rep.duplicates_collapsed, 1u);
}

TEST(EdgeList, CommentsAndTypeAliases) {
  const HetGraph g = from_text("# header\n\nDB1\tdrug\tP1\ttarget\tdrug-protein\n");
  ASSERT_EQ(g.num_edges(), 1u);
  EXPECT_EQ(g.counts().of(EdgeType::DrugProtein), 1u);
  EXPECT_TRUE(g.find(NodeType::Protein, "P1").has_value());
}

TEST(EdgeList, MalformedRowReportsLine) {
  try {
    from_text("A\tDrug\tB\tDrug\tDrugDrug\nA\tDrug\tB\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(EdgeList, TypeMismatchIsSchemaError) {
  EXPECT_THROW(from_text("A\tDrug\tB\tProtein\tDrugDrug\n"), SchemaError);
  EXPECT_THROW(from_text("A\tDisease\tB\tDisease\tDrugDisease\n"), SchemaError);
}

TEST(EdgeList, SelfLoopRejectedButLoadContinues) {
  LoadReport rep;
  const HetGraph g = from_text("A\tDrug\tA\tDrug\tDrugDrug\nA\tDrug\tB\tDrug\tDrugDrug\n", &rep);
  EXPECT_EQ(g.num_edges(), 1u);
  ASSERT_EQ(rep.rejected.size(), 1u);
  EXPECT_EQ(rep.rejected[0].line, 1u);
}

TEST(EdgeList, ReloadingSerializedOutputKeepsCounts) {
  Rng rng(3);
  const HetGraph g = oracle::random_drug_graph(40, 0.1, rng);
  std::ostringstream out;
  write_edge_list(out, g);
  const HetGraph back = from_text(out.str());
  EXPECT_EQ(back.counts().edges, g.counts().edges);
  EXPECT_EQ(back.num_edges(), g.num_edges());
}

TEST(GraphFile, RoundTripPreservesFingerprint) {
  Rng rng(4);
  const HetGraph g = oracle::random_drug_graph(30, 0.2, rng);
  std::stringstream buf;
  save_graph(buf, g);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "BHNG");
  const HetGraph back = load_graph(buf);
  EXPECT_EQ(graph_fingerprint(back), graph_fingerprint(g));
  std::stringstream again;
  save_graph(again, back);
  EXPECT_EQ(again.str(), bytes);
}

TEST(GraphFile, RejectsBadMagic) {
  std::stringstream buf("XXXX0000");
  EXPECT_THROW(load_graph(buf), InputError);
}

TEST(Graph, AdjacencyIsSymmetricAndCountsAddUp) {
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const HetGraph g = oracle::random_drug_graph(50, 0.1, rng);
    std::size_t sum = 0;
    for (std::size_t c : g.counts().edges) sum += c;
    EXPECT_EQ(sum, g.num_edges());
    for (NodeIndex u = 0; u < g.num_nodes(); ++u) {
      for (NodeIndex v : g.neighbors(u)) EXPECT_TRUE(g.has_edge(v, u));
    }
  }
}

TEST(Graph, OutOfRangeIndexThrows) {
  const HetGraph g = drug_graph(2, {{0, 1}});
  EXPECT_THROW(g.node(5), IndexError);
  EXPECT_THROW(clustering_coefficient(g, 9), IndexError);
}

TEST(Clustering, TriangleStarAndPartial) {
  const HetGraph tri = drug_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  for (NodeIndex v = 0; v < 3; ++v) EXPECT_DOUBLE_EQ(clustering_coefficient(tri, v), 1.0);
  const HetGraph star = drug_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  EXPECT_DOUBLE_EQ(clustering_coefficient(star, 0), 0.0);
  EXPECT_DOUBLE_EQ(clustering_coefficient(star, 1), 0.0);  // degree 1
  const HetGraph part = drug_graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}});
  EXPECT_DOUBLE_EQ(clustering_coefficient(part, 0), 1.0 / 3.0);
}

TEST(Clustering, MatchesBruteForceOnRandomGraphs) {
  Rng rng(6);
  for (int k = 0; k < 30; ++k) {
    const HetGraph g = oracle::random_drug_graph(2 + rng.index(120), rng.uniform(0.01, 0.3), rng);
    const auto cc = clustering_coefficients(g);
    for (NodeIndex v = 0; v < g.num_nodes(); ++v) EXPECT_EQ(cc[v], oracle::brute_clustering(g, v));
  }
}

TEST(PairDistance, ClassesOnPathGraph) {
  const HetGraph g = path_graph(6);
  EXPECT_EQ(pair_distance_class(g, 0, 1), DistanceClass::D1);
  EXPECT_EQ(pair_distance_class(g, 0, 2), DistanceClass::D2);
  EXPECT_EQ(pair_distance_class(g, 0, 3), DistanceClass::D3);
  EXPECT_EQ(pair_distance_class(g, 0, 5), DistanceClass::D4Plus);
  EXPECT_THROW(pair_distance_class(g, 2, 2), InputError);
}

TEST(PairDistance, DisconnectedIsUnreachable) {
  const HetGraph g = drug_graph(4, {{0, 1}, {2, 3}});
  EXPECT_EQ(pair_distance_class(g, 0, 3), DistanceClass::Unreachable);
}

TEST(PairDistance, MatchesFloydWarshall) {
  Rng rng(7);
  for (int k = 0; k < 10; ++k) {
    const HetGraph g = oracle::random_drug_graph(2 + rng.index(100), rng.uniform(0.01, 0.1), rng);
    const auto d = oracle::floyd_warshall(g);
    for (NodeIndex i = 0; i < g.num_nodes(); ++i) {
      for (NodeIndex j = 0; j < g.num_nodes(); ++j) {
        if (i != j) EXPECT_EQ(pair_distance_class(g, i, j), oracle::distance_class(d[i][j]));
      }
    }
  }
}

TEST(Subnet, ShortestPathRespectsFilter) {
  // P1 - P2 - P3 chain of PPI edges, plus a drug bridging P1 and P3.
  const std::vector<NodeRef> nodes = {{0, NodeType::Protein, "P1"},
                                      {1, NodeType::Protein, "P2"},
                                      {2, NodeType::Protein, "P3"},
                                      {3, NodeType::Drug, "D"}};
  const EdgeTypeSet ppi = edge_type_set({EdgeType::ProteinProtein});
  const HetGraph chain = HetGraph::from_parts(
      nodes, {{0, 1, EdgeType::ProteinProtein}, {1, 2, EdgeType::ProteinProtein}});
  EXPECT_EQ(shortest_path_len_in_subnet(chain, ppi, 0, 0), 0u);
  EXPECT_EQ(shortest_path_len_in_subnet(chain, ppi, 0, 2), 2u);
  const HetGraph bridged =
      HetGraph::from_parts(nodes, {{0, 3, EdgeType::DrugProtein}, {2, 3, EdgeType::DrugProtein}});
  EXPECT_FALSE(shortest_path_len_in_subnet(bridged, ppi, 0, 2).has_value());
  const EdgeTypeSet any = edge_type_set({EdgeType::DrugProtein});
  EXPECT_EQ(shortest_path_len_in_subnet(bridged, any, 0, 2), 2u);
}

TEST(MetaPath, TemplatesAreWellFormed) {
  const auto& ts = metapath_templates();
  std::set<std::array<NodeType, kMetaPathLength>> distinct;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    EXPECT_EQ(ts[k].template_id, k);
    distinct.insert(ts[k].sequence);
    for (std::size_t s = 0; s + 1 < kMetaPathLength; ++s) {
      EXPECT_TRUE(edge_type_between(ts[k].sequence[s], ts[k].sequence[s + 1]).has_value());
    }
  }
  EXPECT_EQ(distinct.size(), kNumMetaPathTemplates);
}

TEST(MetaPath, SingleChainIsFound) {
  // D0 - D1 - D2 - P3 is the only drug-drug-drug-protein chain; D4 and P5 hang off it.
  const std::vector<NodeRef> nodes = {{0, NodeType::Drug, "D0"},    {1, NodeType::Drug, "D1"},
                                      {2, NodeType::Drug, "D2"},    {3, NodeType::Protein, "P3"},
                                      {4, NodeType::Drug, "D4"},    {5, NodeType::Protein, "P5"}};
  const HetGraph g = HetGraph::from_parts(nodes, {{0, 1, EdgeType::DrugDrug},
                                                   {1, 2, EdgeType::DrugDrug},
                                                   {2, 3, EdgeType::DrugProtein},
                                                   {3, 5, EdgeType::ProteinProtein},
                                                   {4, 5, EdgeType::DrugProtein}});
  const MetaPathTemplate* ddd_p = nullptr;
  for (const auto& t : metapath_templates()) {
    if (t.sequence == std::array{NodeType::Drug, NodeType::Drug, NodeType::Drug, NodeType::Protein}) ddd_p = &t;
  }
  ASSERT_NE(ddd_p, nullptr);
  const auto support = oracle::enumerate_metapaths(g, *ddd_p);
  ASSERT_EQ(support.size(), 1u);
  EXPECT_EQ(support[0], (MetaPath{0, 1, 2, 3}));
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    const auto p = walk_metapath(g, *ddd_p, rng);
    if (p) EXPECT_EQ(*p, support[0]);
  }
}

TEST(MetaPath, DiseaseStartOnDiseaseFreeGraph) {
  const HetGraph g = drug_graph(3, {{0, 1}});
  for (const auto& t : metapath_templates()) {
    if (t.sequence[0] != NodeType::Drug) {
      Rng rng(1);
      EXPECT_THROW(walk_metapath(g, t, rng), UnsatisfiableTemplate);
    }
  }
}

TEST(MetaPath, WalksSatisfyTemplates) {
  Rng rng(9);
  std::vector<NodeRef> nodes;
  for (NodeIndex i = 0; i < 60; ++i) nodes.push_back({i, static_cast<NodeType>(i % 3), "N" + std::to_string(i)});
  std::vector<EdgeRec> edges;
  for (NodeIndex i = 0; i < 60; ++i) {
    for (NodeIndex j = i + 1; j < 60; ++j) {
      const auto et = edge_type_between(nodes[i].ntype, nodes[j].ntype);
      if (et && rng.coin(0.15)) edges.push_back({i, j, *et});
    }
  }
  const HetGraph g = HetGraph::from_parts(nodes, edges);
  std::size_t walks = 0;
  for (int round = 0; round < 625; ++round) {
    for (const auto& t : metapath_templates()) {
      const auto p = walk_metapath(g, t, rng);
      if (!p) continue;
      ++walks;
      ASSERT_TRUE(path_matches_template(g, t, *p));
      const auto support = oracle::enumerate_metapaths(g, t);
      if (round == 0) EXPECT_TRUE(std::binary_search(support.begin(), support.end(), *p));
    }
  }
  EXPECT_GT(walks, 5000u);
}
