#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "biossl/graph.hpp"
#include "biossl/similarity.hpp"

namespace biossl {

// Seeded toy BioHN with planted communities. Edges are denser inside a
// community; fingerprints, sequences and disease modules are derived from
// per-community prototypes so attribute similarity tracks community.
struct SyntheticConfig {
  std::size_t drugs = 80;
  std::size_t proteins = 160;
  std::size_t diseases = 60;
  std::size_t communities = 4;
  std::uint64_t seed = 2024;

  // (within, across) community edge probabilities per edge type
  double drug_drug_in = 0.25, drug_drug_out = 0.015;
  double drug_protein_in = 0.05, drug_protein_out = 0.003;
  double drug_disease_in = 0.06, drug_disease_out = 0.004;
  double protein_protein_in = 0.08, protein_protein_out = 0.004;
  double protein_disease_in = 0.06, protein_disease_out = 0.003;

  double fingerprint_density = 0.3;
  double fingerprint_flip = 0.08;
  std::size_t sequence_length = 40;
  double sequence_mutation = 0.25;
};

struct SyntheticData {
  HetGraph graph;
  FeatureSet features;
  std::vector<std::uint32_t> community;  // per node index
};

SyntheticData make_synthetic_biohn(const SyntheticConfig& config = {});

struct SyntheticFiles {
  std::filesystem::path edges;
  std::filesystem::path fingerprints;
  std::filesystem::path sequences;
  std::filesystem::path modules;
};

// edges.tsv, fingerprints.tsv, proteins.fasta and modules.tsv under dir.
SyntheticFiles write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace biossl
