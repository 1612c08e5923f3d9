#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "biossl/common.hpp"

namespace biossl {

enum class NodeType : std::uint8_t { Drug = 0, Protein = 1, Disease = 2 };
enum class EdgeType : std::uint8_t {
  DrugDrug = 0,
  DrugProtein = 1,
  DrugDisease = 2,
  ProteinProtein = 3,
  ProteinDisease = 4,
};

inline constexpr std::size_t kNumNodeTypes = 3;
inline constexpr std::size_t kNumEdgeTypes = 5;
inline constexpr std::array<NodeType, kNumNodeTypes> kAllNodeTypes = {
    NodeType::Drug, NodeType::Protein, NodeType::Disease};
inline constexpr std::array<EdgeType, kNumEdgeTypes> kAllEdgeTypes = {
    EdgeType::DrugDrug, EdgeType::DrugProtein, EdgeType::DrugDisease,
    EdgeType::ProteinProtein, EdgeType::ProteinDisease};

std::string_view to_string(NodeType t);
std::string_view to_string(EdgeType t);
std::optional<NodeType> parse_node_type(std::string_view s);
std::optional<EdgeType> parse_edge_type(std::string_view s);

// The edge type implied by a pair of endpoint types (order-insensitive), or
// none when the network has no relation between those types.
std::optional<EdgeType> edge_type_between(NodeType a, NodeType b);
std::pair<NodeType, NodeType> endpoint_types(EdgeType t);

using NodeIndex = std::uint32_t;

struct NodeRef {
  NodeIndex index = 0;
  NodeType ntype = NodeType::Drug;
  std::string external_id;
};

// Undirected edge stored canonically with u < v.
struct EdgeRec {
  NodeIndex u = 0;
  NodeIndex v = 0;
  EdgeType etype = EdgeType::DrugDrug;

  friend bool operator==(const EdgeRec&, const EdgeRec&) = default;
};

struct TypeCounts {
  std::array<std::size_t, kNumNodeTypes> nodes{};
  std::array<std::size_t, kNumEdgeTypes> edges{};
  std::size_t total_nodes = 0;
  std::size_t total_edges = 0;

  std::size_t of(NodeType t) const { return nodes[static_cast<std::size_t>(t)]; }
  std::size_t of(EdgeType t) const { return edges[static_cast<std::size_t>(t)]; }
  friend bool operator==(const TypeCounts&, const TypeCounts&) = default;
};

// Typed undirected simple graph with CSR adjacency. Immutable once built.
class HetGraph {
 public:
  HetGraph() = default;

  // Validates endpoint types, rejects self-loops, collapses duplicates.
  // Throws SchemaError/IndexError on invalid input.
  static HetGraph from_parts(std::vector<NodeRef> nodes, std::vector<EdgeRec> edges);

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const NodeRef& node(NodeIndex v) const;
  NodeType ntype(NodeIndex v) const { return node(v).ntype; }
  std::span<const NodeRef> nodes() const { return nodes_; }
  std::span<const EdgeRec> edges() const { return edges_; }
  std::span<const NodeIndex> nodes_of_type(NodeType t) const {
    return by_type_[static_cast<std::size_t>(t)];
  }

  // Sorted neighbor list and the parallel edge-type array.
  std::span<const NodeIndex> neighbors(NodeIndex v) const;
  std::span<const EdgeType> neighbor_etypes(NodeIndex v) const;
  std::size_t degree(NodeIndex v) const { return neighbors(v).size(); }

  bool has_edge(NodeIndex u, NodeIndex v) const;
  std::optional<EdgeType> edge_type(NodeIndex u, NodeIndex v) const;

  // Connected-component label of v (components numbered from 0).
  std::uint32_t component(NodeIndex v) const { return component_[check(v)]; }

  const TypeCounts& counts() const { return counts_; }

  std::optional<NodeIndex> find(NodeType t, std::string_view external_id) const;

  // Same node set, with the listed undirected pairs removed (missing pairs are
  // ignored).
  HetGraph without_edges(std::span<const std::pair<NodeIndex, NodeIndex>> pairs) const;

 private:
  NodeIndex check(NodeIndex v) const {
    if (v >= nodes_.size()) {
      throw IndexError("node index " + std::to_string(v) + " out of range (" +
                       std::to_string(nodes_.size()) + " nodes)");
    }
    return v;
  }
  void build_index();

  std::vector<NodeRef> nodes_;
  std::vector<EdgeRec> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<NodeIndex> adjacency_;
  std::vector<EdgeType> adjacency_etypes_;
  std::vector<std::uint32_t> component_;
  std::array<std::vector<NodeIndex>, kNumNodeTypes> by_type_;
  std::unordered_map<std::string, NodeIndex> id_index_;
  TypeCounts counts_;
};

// ---- ingestion -------------------------------------------------------------

struct EdgeListSchema {
  std::size_t src_id = 0;
  std::size_t src_type = 1;
  std::size_t dst_id = 2;
  std::size_t dst_type = 3;
  std::size_t etype = 4;
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct LoadReport {
  std::vector<RejectedRow> rejected;
  std::size_t duplicates_collapsed = 0;
};

// Reads a TSV edge list. '#' lines and blank lines are skipped. Malformed rows
// throw ParseError, type mismatches throw SchemaError (both carry the line
// number); self-loops are rejected and reported but do not abort the load.
HetGraph load_edge_list(std::istream& in, const EdgeListSchema& schema = {},
                        LoadReport* report = nullptr);

void write_edge_list(std::ostream& out, const HetGraph& g);

// Canonical binary graph file: magic "BHNG", u32 version, u64 header length,
// JSON header (counts and type tables), then the adjacency blob.
void save_graph(std::ostream& out, const HetGraph& g);
HetGraph load_graph(std::istream& in);
std::uint64_t graph_fingerprint(const HetGraph& g);

// ---- structural primitives -------------------------------------------------

// 2 l_v / (deg_v (deg_v - 1)), with 0 for deg_v < 2.
double clustering_coefficient(const HetGraph& g, NodeIndex v);
std::vector<double> clustering_coefficients(const HetGraph& g);

enum class DistanceClass : std::uint8_t { D1 = 0, D2 = 1, D3 = 2, D4Plus = 3, Unreachable = 4 };
inline constexpr std::size_t kNumDistanceClasses = 4;

DistanceClass pair_distance_class(const HetGraph& g, NodeIndex i, NodeIndex j);

using EdgeTypeSet = std::array<bool, kNumEdgeTypes>;
EdgeTypeSet edge_type_set(std::initializer_list<EdgeType> types);

std::optional<std::size_t> shortest_path_len_in_subnet(const HetGraph& g,
                                                       const EdgeTypeSet& filter,
                                                       NodeIndex a, NodeIndex b);

// BFS distances from a source over edges in the filter; -1 marks unreachable.
std::vector<int> bfs_distances(const HetGraph& g, const EdgeTypeSet& filter, NodeIndex source);

// ---- meta-paths --------------------------------------------------------------

inline constexpr std::size_t kMetaPathLength = 4;
inline constexpr std::size_t kNumMetaPathTemplates = 16;

struct MetaPathTemplate {
  std::size_t template_id = 0;
  std::array<NodeType, kMetaPathLength> sequence{};
};

const std::array<MetaPathTemplate, kNumMetaPathTemplates>& metapath_templates();
std::string metapath_name(const MetaPathTemplate& t);

using MetaPath = std::array<NodeIndex, kMetaPathLength>;

class UnsatisfiableTemplate : public Error {
 public:
  using Error::Error;
};

inline constexpr int kMetaPathRestarts = 50;

// Random walk following the template's node types. Paths are simple (no
// repeated node). Returns none after kMetaPathRestarts dead-end restarts.
std::optional<MetaPath> walk_metapath(const HetGraph& g, const MetaPathTemplate& t, Rng& rng);

// True if consecutive nodes are adjacent and match the template's types.
bool path_matches_template(const HetGraph& g, const MetaPathTemplate& t, const MetaPath& p);

}  // namespace biossl
