#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "biossl/similarity.hpp"
#include "oracles.hpp"

using namespace biossl;

namespace {

Fingerprint bits(std::initializer_list<std::size_t> on, std::size_t width = kMaccsWidth) {
  Fingerprint f(width);
  for (std::size_t b : on) f.set(b);
  return f;
}

ProteinSequence random_sequence(Rng& rng, std::size_t len) {
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += kResidueAlphabet[rng.index(20)];
  return ProteinSequence(s);
}

HetGraph ppi_pair(bool adjacent) {
  std::vector<NodeRef> nodes = {{0, NodeType::Protein, "p"}, {1, NodeType::Protein, "q"}};
  std::vector<EdgeRec> edges;
  if (adjacent) edges.push_back({0, 1, EdgeType::ProteinProtein});
  return HetGraph::from_parts(nodes, edges);
}

}  // namespace

TEST(Tanimoto, Examples) {
  EXPECT_DOUBLE_EQ(tanimoto(bits({1, 5, 9}), bits({1, 5, 9})), 1.0);
  EXPECT_DOUBLE_EQ(tanimoto(bits({1, 2}), bits({3, 4})), 0.0);
  EXPECT_DOUBLE_EQ(tanimoto(bits({1, 2, 3}), bits({2, 3, 4})), 0.5);
  EXPECT_DOUBLE_EQ(tanimoto(bits({}), bits({})), 0.0);
}

TEST(Tanimoto, WidthMismatchThrows) {
  EXPECT_THROW(tanimoto(Fingerprint(166), Fingerprint(64)), ShapeError);
}

TEST(Tanimoto, MatchesPopcountOracleAndIsSymmetric) {
  Rng rng(11);
  for (int k = 0; k < 300; ++k) {
    Fingerprint a(kMaccsWidth), b(kMaccsWidth);
    std::vector<bool> va(kMaccsWidth), vb(kMaccsWidth);
    const double density = rng.uniform(0.0, 0.5);
    for (std::size_t i = 0; i < kMaccsWidth; ++i) {
      if (rng.coin(density)) { a.set(i); va[i] = true; }
      if (rng.coin(density)) { b.set(i); vb[i] = true; }
    }
    EXPECT_DOUBLE_EQ(tanimoto(a, b), oracle::popcount_tanimoto(va, vb));
    EXPECT_EQ(tanimoto(a, b), tanimoto(b, a));
    if (a.popcount() > 0) EXPECT_EQ(tanimoto(a, a), 1.0);
  }
}

TEST(Fingerprint, HexRoundTrip) {
  const Fingerprint f = bits({0, 3, 64, 165});
  EXPECT_EQ(Fingerprint::from_hex(f.to_hex(), kMaccsWidth), f);
  EXPECT_TRUE(Fingerprint::from_hex("9", 8).test(0));
  EXPECT_TRUE(Fingerprint::from_hex("9", 8).test(3));
  EXPECT_FALSE(Fingerprint::from_hex("9", 8).test(1));
}

TEST(Fingerprint, HashedIsDeterministic) {
  EXPECT_EQ(hashed_fingerprint("CC(=O)O"), hashed_fingerprint("CC(=O)O"));
  EXPECT_NE(hashed_fingerprint("CC(=O)O"), hashed_fingerprint("c1ccccc1"));
}

TEST(SmithWaterman, SelfScoreIsDiagonalSum) {
  const ScoringScheme s = ScoringScheme::blosum62();
  const ProteinSequence a("HEAGAWGHEE");
  std::int64_t expected = 0;
  for (auto c : a.codes()) expected += s.score(c, c);
  EXPECT_EQ(smith_waterman(a, a, s), expected);
}

TEST(SmithWaterman, NoPositiveCellScoresZero) {
  const ScoringScheme s = ScoringScheme::match_mismatch(2, -1, 10, 1);
  EXPECT_EQ(smith_waterman(ProteinSequence("AAAA"), ProteinSequence("CCCC"), s), 0);
  EXPECT_EQ(normalized_sw(ProteinSequence("AAAA"), ProteinSequence("CCCC"), s), 0.0);
}

TEST(SmithWaterman, ClassicPairMatchesEnumeration) {
  const ScoringScheme s = ScoringScheme::blosum62(10, 1);
  const ProteinSequence a("HEAGAWGHEE"), b("PAWHEAE");
  EXPECT_EQ(smith_waterman(a, b, s), oracle::exhaustive_local_alignment(a, b, s));
}

TEST(SmithWaterman, RandomPairsMatchEnumeration) {
  Rng rng(12);
  const std::vector<ScoringScheme> schemes = {ScoringScheme::blosum62(), ScoringScheme::blosum62(3, 1),
                                              ScoringScheme::match_mismatch(3, -2, 2, 1)};
  for (int k = 0; k < 200; ++k) {
    const ProteinSequence a = random_sequence(rng, 1 + rng.index(7));
    const ProteinSequence b = random_sequence(rng, 1 + rng.index(7));
    const ScoringScheme& s = schemes[k % schemes.size()];
    ASSERT_EQ(smith_waterman(a, b, s), oracle::exhaustive_local_alignment(a, b, s)) << a.str() << " " << b.str();
  }
}

TEST(SmithWaterman, RejectsUnknownResidue) {
  EXPECT_THROW(ProteinSequence("ACDZ"), InputError);
  EXPECT_EQ(ProteinSequence("acdx").str(), "ACDX");
}

TEST(NormalizedSw, BoundedSymmetricAndOneOnSelf) {
  Rng rng(13);
  const ScoringScheme s = ScoringScheme::blosum62();
  for (int k = 0; k < 200; ++k) {
    const ProteinSequence a = random_sequence(rng, 3 + rng.index(40));
    const ProteinSequence b = random_sequence(rng, 3 + rng.index(40));
    const double v = normalized_sw(a, b, s);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_EQ(v, normalized_sw(b, a, s));
    EXPECT_DOUBLE_EQ(normalized_sw(a, a, s), 1.0);
  }
}

TEST(NormalizedSw, ZeroSelfScoreThrows) {
  EXPECT_THROW(normalized_sw(5, 0, 10), InputError);
}

TEST(ModuleSim, AdjacentSingletonsGiveInverseE) {
  const HetGraph g = ppi_pair(true);
  EXPECT_NEAR(modulesim(DiseaseModule{{0}}, DiseaseModule{{1}}, g), std::exp(-1.0), 1e-15);
}

TEST(ModuleSim, UnreachableSingletonsGiveZero) {
  const HetGraph g = ppi_pair(false);
  EXPECT_EQ(modulesim(DiseaseModule{{0}}, DiseaseModule{{1}}, g), 0.0);
}

TEST(ModuleSim, IdenticalModulesGiveOne) {
  Rng rng(14);
  std::vector<NodeRef> nodes;
  for (NodeIndex i = 0; i < 30; ++i) nodes.push_back({i, NodeType::Protein, "P" + std::to_string(i)});
  std::vector<EdgeRec> edges;
  for (NodeIndex i = 0; i < 30; ++i)
    for (NodeIndex j = i + 1; j < 30; ++j)
      if (rng.coin(0.1)) edges.push_back({i, j, EdgeType::ProteinProtein});
  const HetGraph g = HetGraph::from_parts(nodes, edges);
  const DiseaseModule m{{2, 7, 11, 20}};
  EXPECT_DOUBLE_EQ(modulesim(m, m, g), 1.0);
}

TEST(ModuleSim, MatchesDirectTranscription) {
  Rng rng(15);
  for (int k = 0; k < 30; ++k) {
    const std::size_t n = 5 + rng.index(95);
    std::vector<NodeRef> nodes;
    for (NodeIndex i = 0; i < n; ++i) nodes.push_back({i, NodeType::Protein, "P" + std::to_string(i)});
    std::vector<EdgeRec> edges;
    const double p = rng.uniform(0.01, 0.1);
    for (NodeIndex i = 0; i < n; ++i)
      for (NodeIndex j = i + 1; j < n; ++j)
        if (rng.coin(p)) edges.push_back({i, j, EdgeType::ProteinProtein});
    const HetGraph g = HetGraph::from_parts(nodes, edges);
    auto pick = [&] {
      std::vector<NodeIndex> genes;
      const std::size_t size = 1 + rng.index(std::min<std::size_t>(n, 6));
      while (genes.size() < size) {
        const auto v = static_cast<NodeIndex>(rng.index(n));
        if (std::find(genes.begin(), genes.end(), v) == genes.end()) genes.push_back(v);
      }
      std::sort(genes.begin(), genes.end());
      return genes;
    };
    const auto g1 = pick(), g2 = pick();
    const double got = modulesim(DiseaseModule{g1}, DiseaseModule{g2}, g);
    EXPECT_NEAR(got, oracle::direct_modulesim(g1, g2, g), 1e-12);
    EXPECT_NEAR(got, modulesim(DiseaseModule{g2}, DiseaseModule{g1}, g), 1e-15);
  }
}

TEST(ModuleSim, NonProteinGeneThrows) {
  const HetGraph g = HetGraph::from_parts({{0, NodeType::Protein, "p"}, {1, NodeType::Drug, "d"}}, {});
  EXPECT_THROW(modulesim(DiseaseModule{{0}}, DiseaseModule{{1}}, g), InputError);
}

TEST(SimTable, SymmetricLookupAndPerTypeKeying) {
  SimTable t;
  t.set(NodeType::Drug, 3, 1, 0.25);
  EXPECT_EQ(t.get(1, 3), 0.25);
  EXPECT_EQ(t.get(3, 1), 0.25);
  EXPECT_FALSE(t.get(1, 2).has_value());
  t.set(NodeType::Drug, 1, 2, 1.5);
  EXPECT_EQ(t.get(2, 1), 1.0);
  EXPECT_THROW(t.set(NodeType::Drug, 2, 2, 0.5), InputError);
}

TEST(SimTable, ThreeDrugsGiveThreeEntriesAndRoundTrip) {
  const std::vector<NodeRef> nodes = {{0, NodeType::Drug, "A"}, {1, NodeType::Drug, "B"},
                                      {2, NodeType::Drug, "C"}, {3, NodeType::Protein, "P"}};
  const HetGraph g = HetGraph::from_parts(nodes, {{0, 3, EdgeType::DrugProtein}});
  FeatureSet fs;
  fs.fingerprints["A"] = bits({1, 2, 3});
  fs.fingerprints["B"] = bits({2, 3, 4});
  fs.fingerprints["C"] = bits({7, 8});
  const SimTable t = build_sim_table(g, fs, SimConfig{});
  EXPECT_EQ(t.count(NodeType::Drug), 3u);
  EXPECT_EQ(t.get(1, 0), 0.5);
  EXPECT_FALSE(t.get(0, 3).has_value());
  EXPECT_EQ(t.provenance(NodeType::Drug), SimProvenance::Tanimoto);

  std::stringstream buf;
  write_sim_table(buf, t, g);
  const SimTable back = read_sim_table(buf, g);
  EXPECT_EQ(back, t);
}

TEST(SimTable, RandomValuesRoundTripBitExactly) {
  Rng rng(16);
  std::vector<NodeRef> nodes;
  for (NodeIndex i = 0; i < 20; ++i) nodes.push_back({i, NodeType::Disease, "X" + std::to_string(i)});
  const HetGraph g = HetGraph::from_parts(nodes, {});
  SimTable t;
  t.set_provenance(NodeType::Disease, SimProvenance::ModuleSim);
  for (NodeIndex i = 0; i < 20; ++i)
    for (NodeIndex j = i + 1; j < 20; ++j)
      if (rng.coin(0.4)) t.set(NodeType::Disease, i, j, rng.uniform());
  std::stringstream buf;
  write_sim_table(buf, t, g);
  const SimTable back = read_sim_table(buf, g);
  ASSERT_EQ(back.size(), t.size());
  const auto a = t.entries(), b = back.entries();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].sim, b[k].sim);
}

TEST(SimTable, MissingFeatureIsWarningNotError) {
  const HetGraph g = HetGraph::from_parts({{0, NodeType::Drug, "A"}, {1, NodeType::Drug, "B"}, {2, NodeType::Drug, "C"}}, {});
  FeatureSet fs;
  fs.fingerprints["A"] = bits({1});
  fs.fingerprints["B"] = bits({1, 2});
  SimBuildReport rep;
  const SimTable t = build_sim_table(g, fs, SimConfig{}, &rep);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_FALSE(rep.coverage_warnings.empty());
}

TEST(FeatureFiles, FastaAndModulesRoundTrip) {
  std::map<std::string, ProteinSequence> seqs = {{"P1", ProteinSequence("ACDEFGHIK")}, {"P2", ProteinSequence("WYV")}};
  std::stringstream fa;
  write_fasta(fa, seqs);
  const auto back = read_fasta(fa);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at("P1").str(), "ACDEFGHIK");

  std::map<std::string, std::vector<std::string>> mods = {{"X", {"P1", "P2"}}};
  std::stringstream mf;
  write_modules(mf, mods);
  EXPECT_EQ(read_modules(mf), mods);
}
