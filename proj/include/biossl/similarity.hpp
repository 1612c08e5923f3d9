#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biossl/graph.hpp"

namespace biossl {

// ---- fingerprints -------------------------------------------------------------

inline constexpr std::size_t kMaccsWidth = 166;

class Fingerprint {
 public:
  Fingerprint() = default;
  explicit Fingerprint(std::size_t width) : width_(width), words_((width + 63) / 64, 0) {}

  std::size_t width() const { return width_; }
  void set(std::size_t bit);
  bool test(std::size_t bit) const;
  std::size_t popcount() const;
  std::span<const std::uint64_t> words() const { return words_; }

  // Hex text with the most significant digit first; bit k has value 2^k.
  static Fingerprint from_hex(std::string_view hex, std::size_t width);
  std::string to_hex() const;

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;

 private:
  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

// |a & b| / |a | b|; 0 when both are empty. Throws ShapeError on width mismatch.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

// Deterministic hashed fingerprint of a SMILES string (character 1..3-grams).
// Not a chemical fingerprint; for synthetic runs only.
Fingerprint hashed_fingerprint(std::string_view smiles, std::size_t width = kMaccsWidth);

// ---- protein sequences -----------------------------------------------------------

inline constexpr std::string_view kResidueAlphabet = "ARNDCQEGHILKMFPSTWYVX";
inline constexpr std::size_t kNumResidues = 21;

// Residues stored as alphabet codes. Input is uppercase-normalized; anything
// outside the 20 amino acids plus X throws InputError.
class ProteinSequence {
 public:
  ProteinSequence() = default;
  explicit ProteinSequence(std::string_view residues);

  std::size_t size() const { return codes_.size(); }
  std::span<const std::uint8_t> codes() const { return codes_; }
  std::string str() const;

 private:
  std::vector<std::uint8_t> codes_;
};

// Substitution matrix plus affine gap costs. A gap of length k costs
// gap_open + (k - 1) * gap_extend.
struct ScoringScheme {
  std::array<std::array<int, kNumResidues>, kNumResidues> matrix{};
  int gap_open = 10;
  int gap_extend = 1;

  int score(std::uint8_t a, std::uint8_t b) const { return matrix[a][b]; }

  static ScoringScheme blosum62(int gap_open = 10, int gap_extend = 1);
  static ScoringScheme match_mismatch(int match, int mismatch, int gap_open, int gap_extend);
};

// Gotoh affine-gap local alignment score (three-matrix DP, floored at 0).
std::int64_t smith_waterman(const ProteinSequence& a, const ProteinSequence& b,
                            const ScoringScheme& scoring);

// SW(a,b) / sqrt(SW(a,a) SW(b,b)), clamped to [0, 1].
double normalized_sw(const ProteinSequence& a, const ProteinSequence& b, const ScoringScheme& scoring);
double normalized_sw(std::int64_t raw, std::int64_t self_a, std::int64_t self_b);

// ---- disease modules ------------------------------------------------------------

struct DiseaseModule {
  std::vector<NodeIndex> genes;  // sorted, unique protein node indices
};

// Shortest-path lookups over the protein-protein subnetwork with per-source
// caching. sp(g, g') = 1 if equal, exp(-d) if reachable, 0 otherwise.
class PpiProximity {
 public:
  explicit PpiProximity(const HetGraph& g) : graph_(&g) {}
  double sp(NodeIndex a, NodeIndex b);
  const std::vector<int>& distances_from(NodeIndex a);

 private:
  const HetGraph* graph_;
  std::map<NodeIndex, std::vector<int>> cache_;
};

double modulesim(const DiseaseModule& d1, const DiseaseModule& d2, PpiProximity& ppi);
double modulesim(const DiseaseModule& d1, const DiseaseModule& d2, const HetGraph& ppi);

// ---- similarity table ----------------------------------------------------------

enum class SimProvenance : std::uint8_t { Tanimoto, TanimotoHashed, SW, ModuleSim };
std::string_view to_string(SimProvenance p);
std::optional<SimProvenance> parse_provenance(std::string_view s);

struct SimEntry {
  NodeIndex i = 0;  // i < j
  NodeIndex j = 0;
  NodeType ntype = NodeType::Drug;
  double sim = 0.0;
  friend bool operator==(const SimEntry&, const SimEntry&) = default;
};

// Symmetric sparse map (i, j) -> sim in [0, 1], keyed within a node type.
class SimTable {
 public:
  void set(NodeType t, NodeIndex i, NodeIndex j, double sim);
  std::optional<double> get(NodeIndex i, NodeIndex j) const;

  void set_provenance(NodeType t, SimProvenance p) { provenance_[static_cast<std::size_t>(t)] = p; }
  std::optional<SimProvenance> provenance(NodeType t) const {
    return provenance_[static_cast<std::size_t>(t)];
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t count(NodeType t) const;

  // Entries in (i, j) order.
  std::vector<SimEntry> entries() const;
  // Scored partners of node i in ascending partner order.
  std::vector<std::pair<NodeIndex, double>> partners(NodeIndex i) const;
  // Nodes with at least min_partners scored partners, ascending.
  std::vector<NodeIndex> anchors(std::size_t min_partners) const;

  friend bool operator==(const SimTable&, const SimTable&) = default;

 private:
  std::map<std::pair<NodeIndex, NodeIndex>, SimEntry> entries_;
  std::map<NodeIndex, std::map<NodeIndex, double>> adjacency_;
  std::array<std::optional<SimProvenance>, kNumNodeTypes> provenance_{};
};

// `ntype<TAB>id_i<TAB>id_j<TAB>sim<TAB>provenance`, sims with 17 significant digits.
void write_sim_table(std::ostream& out, const SimTable& table, const HetGraph& g);
SimTable read_sim_table(std::istream& in, const HetGraph& g);

// ---- feature files --------------------------------------------------------------

struct FeatureSet {
  std::map<std::string, Fingerprint> fingerprints;  // drug id -> bits
  bool fingerprints_hashed = false;
  std::map<std::string, ProteinSequence> sequences;       // protein id -> sequence
  std::map<std::string, std::vector<std::string>> modules;  // disease id -> protein ids
};

std::map<std::string, Fingerprint> read_fingerprints(std::istream& in);
void write_fingerprints(std::ostream& out, const std::map<std::string, Fingerprint>& fps);
std::map<std::string, ProteinSequence> read_fasta(std::istream& in);
void write_fasta(std::ostream& out, const std::map<std::string, ProteinSequence>& seqs);
std::map<std::string, std::vector<std::string>> read_modules(std::istream& in);
void write_modules(std::ostream& out, const std::map<std::string, std::vector<std::string>>& mods);

struct SimConfig {
  ScoringScheme scoring = ScoringScheme::blosum62();
  std::size_t max_all_pairs_nodes = 2000;  // all pairs at or below this per-type size
  std::size_t sampled_pairs_per_node = 20;  // budget above the threshold
  std::uint64_t seed = 7;
  std::size_t jobs = 1;
};

struct SimBuildReport {
  std::vector<std::string> coverage_warnings;
  std::array<std::size_t, kNumNodeTypes> pairs_scored{};
};

SimTable build_sim_table(const HetGraph& g, const FeatureSet& features, const SimConfig& config,
                         SimBuildReport* report = nullptr);

}  // namespace biossl
