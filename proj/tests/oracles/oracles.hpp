#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "biossl/graph.hpp"
#include "biossl/nn.hpp"
#include "biossl/similarity.hpp"

// Slow, transparent reference implementations used to check the library.
namespace biossl::oracle {

// Erdős–Rényi graph on n drug nodes.
HetGraph random_drug_graph(std::size_t n, double p, Rng& rng);

// All-pairs hop distances, -1 when unreachable; only edges passing the filter
// count when one is given.
std::vector<std::vector<int>> floyd_warshall(const HetGraph& g, const EdgeTypeSet* filter = nullptr);

// Triangles through v by checking every neighbor pair.
double brute_clustering(const HetGraph& g, NodeIndex v);

DistanceClass distance_class(int hops);

// Best score over every local alignment, enumerated explicitly as sequences
// of match, insert and delete columns.
std::int64_t exhaustive_local_alignment(const ProteinSequence& a, const ProteinSequence& b,
                                        const ScoringScheme& scoring);

// ModuleSim written straight from its definition with Floyd–Warshall PPI
// distances.
double direct_modulesim(const std::vector<NodeIndex>& g1, const std::vector<NodeIndex>& g2, const HetGraph& g);

double popcount_tanimoto(const std::vector<bool>& a, const std::vector<bool>& b);

// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
double pairwise_auroc(std::span<const double> scores, std::span<const double> labels);

// Mean over positives of the precision at that positive's score threshold.
double step_aupr(std::span<const double> scores, std::span<const double> labels);

// Every simple path matching the template, by depth-first search.
std::vector<MetaPath> enumerate_metapaths(const HetGraph& g, const MetaPathTemplate& t);

struct GradReport {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t refined = 0;  // coordinates re-measured with a smaller step
};

// Central differences of loss() against the analytic gradient of every
// parameter. Coordinates that disagree are measured again with a step 100x
// smaller, which only helps where the step crossed a kink. `sign` scales the
// finite difference for parameters listed in `reversed` (gradient reversal
// below the loss).
GradReport check_gradients(const std::function<Tensor()>& loss, const std::vector<NamedTensor>& params,
                           double eps = 1e-4, const std::vector<std::string>& reversed = {}, double sign = -1.0);

struct SuiteResult {
  bool ok = true;
  std::string detail;
  double seconds = 0.0;
};

// Clustering coefficients and distance classes against brute force.
SuiteResult structural_suite(std::size_t graphs, std::size_t max_nodes, std::uint64_t seed);
// Smith-Waterman, ModuleSim and Tanimoto against their oracles.
SuiteResult similarity_suite(std::size_t pairs, std::size_t max_len, std::uint64_t seed);
// Every loss and the encoder against finite differences.
SuiteResult gradient_suite(std::size_t nodes, std::uint64_t seed, double tolerance);
// AUROC and AUPR against the pairwise and step oracles.
SuiteResult metric_suite(std::size_t inputs, std::size_t max_points, std::uint64_t seed);

// Runs every suite at a reduced size, printing one line each. True if all pass.
bool run_oracle_selftest(std::ostream& out);

}  // namespace biossl::oracle
