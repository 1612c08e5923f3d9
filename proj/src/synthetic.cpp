#include "biossl/synthetic.hpp"

#include <cstdio>
#include <fstream>

namespace biossl {

namespace {

std::string make_id(const char* prefix, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, k + 1);
  return buf;
}

double edge_prob(const SyntheticConfig& c, EdgeType t, bool same) {
  switch (t) {
    case EdgeType::DrugDrug: return same ? c.drug_drug_in : c.drug_drug_out;
    case EdgeType::DrugProtein: return same ? c.drug_protein_in : c.drug_protein_out;
    case EdgeType::DrugDisease: return same ? c.drug_disease_in : c.drug_disease_out;
    case EdgeType::ProteinProtein: return same ? c.protein_protein_in : c.protein_protein_out;
    case EdgeType::ProteinDisease: return same ? c.protein_disease_in : c.protein_disease_out;
  }
  return 0.0;
}

}  // namespace

SyntheticData make_synthetic_biohn(const SyntheticConfig& c) {
  if (c.communities == 0) throw InputError("synthetic network needs at least one community");
  Rng rng(c.seed);
  Rng edge_rng = rng.fork(1);
  Rng attr_rng = rng.fork(2);

  SyntheticData out;
  std::vector<NodeRef> nodes;
  const auto add_nodes = [&](NodeType t, std::size_t n, const char* prefix) {
    for (std::size_t k = 0; k < n; ++k) {
      nodes.push_back({static_cast<NodeIndex>(nodes.size()), t, make_id(prefix, k)});
      out.community.push_back(static_cast<std::uint32_t>(k % c.communities));
    }
  };
  add_nodes(NodeType::Drug, c.drugs, "DRUG");
  add_nodes(NodeType::Protein, c.proteins, "PROT");
  add_nodes(NodeType::Disease, c.diseases, "DIS");

  std::vector<EdgeRec> edges;
  std::vector<std::size_t> degree(nodes.size(), 0);
  for (NodeIndex u = 0; u < nodes.size(); ++u) {
    for (NodeIndex v = u + 1; v < nodes.size(); ++v) {
      const auto t = edge_type_between(nodes[u].ntype, nodes[v].ntype);
      if (!t) continue;
      if (edge_rng.uniform() < edge_prob(c, *t, out.community[u] == out.community[v])) {
        edges.push_back({u, v, *t});
        ++degree[u];
        ++degree[v];
      }
    }
  }
  // Attach isolated nodes to a protein of their own community.
  std::vector<NodeIndex> proteins;
  for (const auto& n : nodes) {
    if (n.ntype == NodeType::Protein) proteins.push_back(n.index);
  }
  for (NodeIndex u = 0; u < nodes.size(); ++u) {
    if (degree[u] > 0 || proteins.empty()) continue;
    std::vector<NodeIndex> pool;
    for (NodeIndex p : proteins) {
      if (p != u && out.community[p] == out.community[u]) pool.push_back(p);
    }
    if (pool.empty()) continue;
    const NodeIndex v = pool[edge_rng.index(pool.size())];
    edges.push_back({std::min(u, v), std::max(u, v), *edge_type_between(nodes[u].ntype, nodes[v].ntype)});
    ++degree[u];
    ++degree[v];
  }
  out.graph = HetGraph::from_parts(nodes, edges);

  // Fingerprints: community prototype with independent bit flips.
  std::vector<Fingerprint> fp_proto;
  for (std::size_t k = 0; k < c.communities; ++k) {
    Fingerprint f(kMaccsWidth);
    for (std::size_t b = 0; b < kMaccsWidth; ++b) {
      if (attr_rng.uniform() < c.fingerprint_density) f.set(b);
    }
    fp_proto.push_back(f);
  }
  // Sequences: community prototype with point substitutions.
  const std::string_view aa = kResidueAlphabet.substr(0, 20);
  std::vector<std::string> seq_proto;
  for (std::size_t k = 0; k < c.communities; ++k) {
    std::string s;
    for (std::size_t p = 0; p < c.sequence_length; ++p) s.push_back(aa[attr_rng.index(aa.size())]);
    seq_proto.push_back(s);
  }
  for (const auto& n : out.graph.nodes()) {
    const std::uint32_t comm = out.community[n.index];
    if (n.ntype == NodeType::Drug) {
      Fingerprint f(kMaccsWidth);
      for (std::size_t b = 0; b < kMaccsWidth; ++b) {
        const bool bit = fp_proto[comm].test(b) != (attr_rng.uniform() < c.fingerprint_flip);
        if (bit) f.set(b);
      }
      out.features.fingerprints[n.external_id] = f;
    } else if (n.ntype == NodeType::Protein) {
      std::string s = seq_proto[comm];
      for (char& r : s) {
        if (attr_rng.uniform() < c.sequence_mutation) r = aa[attr_rng.index(aa.size())];
      }
      out.features.sequences[n.external_id] = ProteinSequence(s);
    } else {
      std::vector<std::string> genes;
      const auto nb = out.graph.neighbors(n.index);
      for (NodeIndex w : nb) {
        if (out.graph.ntype(w) == NodeType::Protein) genes.push_back(out.graph.node(w).external_id);
      }
      if (!genes.empty()) out.features.modules[n.external_id] = genes;
    }
  }
  return out;
}

SyntheticFiles write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SyntheticFiles f{dir / "edges.tsv", dir / "fingerprints.tsv", dir / "proteins.fasta", dir / "modules.tsv"};
  const auto open = [](const std::filesystem::path& p) {
    std::ofstream o(p, std::ios::binary);
    if (!o) throw Error("cannot write " + p.string());
    return o;
  };
  {
    auto o = open(f.edges);
    write_edge_list(o, data.graph);
  }
  {
    auto o = open(f.fingerprints);
    write_fingerprints(o, data.features.fingerprints);
  }
  {
    auto o = open(f.sequences);
    write_fasta(o, data.features.sequences);
  }
  {
    auto o = open(f.modules);
    write_modules(o, data.features.modules);
  }
  return f;
}

}  // namespace biossl
