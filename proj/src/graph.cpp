#include "biossl/graph.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <queue>

namespace biossl {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string id_key(NodeType t, std::string_view id) {
  std::string key;
  key.reserve(id.size() + 2);
  key.push_back(static_cast<char>('0' + static_cast<int>(t)));
  key.push_back(':');
  key.append(id);
  return key;
}

}  // namespace

std::string_view to_string(NodeType t) {
  switch (t) {
    case NodeType::Drug: return "Drug";
    case NodeType::Protein: return "Protein";
    case NodeType::Disease: return "Disease";
  }
  return "?";
}

std::string_view to_string(EdgeType t) {
  switch (t) {
    case EdgeType::DrugDrug: return "DrugDrug";
    case EdgeType::DrugProtein: return "DrugProtein";
    case EdgeType::DrugDisease: return "DrugDisease";
    case EdgeType::ProteinProtein: return "ProteinProtein";
    case EdgeType::ProteinDisease: return "ProteinDisease";
  }
  return "?";
}

std::optional<NodeType> parse_node_type(std::string_view s) {
  const std::string l = lower(s);
  if (l == "drug") return NodeType::Drug;
  if (l == "protein" || l == "target" || l == "gene") return NodeType::Protein;
  if (l == "disease") return NodeType::Disease;
  return std::nullopt;
}

std::optional<EdgeType> parse_edge_type(std::string_view s) {
  std::string l;
  for (char c : lower(s)) {
    if (c != '-' && c != '_' && c != ' ') l.push_back(c);
  }
  if (l == "drugdrug") return EdgeType::DrugDrug;
  if (l == "drugprotein" || l == "proteindrug") return EdgeType::DrugProtein;
  if (l == "drugdisease" || l == "diseasedrug") return EdgeType::DrugDisease;
  if (l == "proteinprotein") return EdgeType::ProteinProtein;
  if (l == "proteindisease" || l == "diseaseprotein") return EdgeType::ProteinDisease;
  return std::nullopt;
}

std::optional<EdgeType> edge_type_between(NodeType a, NodeType b) {
  if (a > b) std::swap(a, b);
  if (a == NodeType::Drug && b == NodeType::Drug) return EdgeType::DrugDrug;
  if (a == NodeType::Drug && b == NodeType::Protein) return EdgeType::DrugProtein;
  if (a == NodeType::Drug && b == NodeType::Disease) return EdgeType::DrugDisease;
  if (a == NodeType::Protein && b == NodeType::Protein) return EdgeType::ProteinProtein;
  if (a == NodeType::Protein && b == NodeType::Disease) return EdgeType::ProteinDisease;
  return std::nullopt;
}

std::pair<NodeType, NodeType> endpoint_types(EdgeType t) {
  switch (t) {
    case EdgeType::DrugDrug: return {NodeType::Drug, NodeType::Drug};
    case EdgeType::DrugProtein: return {NodeType::Drug, NodeType::Protein};
    case EdgeType::DrugDisease: return {NodeType::Drug, NodeType::Disease};
    case EdgeType::ProteinProtein: return {NodeType::Protein, NodeType::Protein};
    case EdgeType::ProteinDisease: return {NodeType::Protein, NodeType::Disease};
  }
  return {NodeType::Drug, NodeType::Drug};
}

// ---- HetGraph ----------------------------------------------------------------

HetGraph HetGraph::from_parts(std::vector<NodeRef> nodes, std::vector<EdgeRec> edges) {
  HetGraph g;
  g.nodes_ = std::move(nodes);
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    if (g.nodes_[i].index != i) {
      throw SchemaError("node indices must be dense and ordered; node '" +
                        g.nodes_[i].external_id + "' has index " +
                        std::to_string(g.nodes_[i].index) + " at position " + std::to_string(i));
    }
    auto [it, inserted] = g.id_index_.emplace(id_key(g.nodes_[i].ntype, g.nodes_[i].external_id),
                                              static_cast<NodeIndex>(i));
    if (!inserted) {
      throw SchemaError("duplicate node id '" + g.nodes_[i].external_id + "'");
    }
  }
  for (EdgeRec& e : edges) {
    g.check(e.u);
    g.check(e.v);
    if (e.u == e.v) throw SchemaError("self-loop on node " + std::to_string(e.u));
    const auto implied = edge_type_between(g.nodes_[e.u].ntype, g.nodes_[e.v].ntype);
    if (!implied || *implied != e.etype) {
      throw SchemaError("edge type " + std::string(to_string(e.etype)) +
                        " inconsistent with endpoint types " +
                        std::string(to_string(g.nodes_[e.u].ntype)) + "/" +
                        std::string(to_string(g.nodes_[e.v].ntype)));
    }
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges.begin(), edges.end(), [](const EdgeRec& a, const EdgeRec& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const EdgeRec& a, const EdgeRec& b) { return a.u == b.u && a.v == b.v; }),
              edges.end());
  g.edges_ = std::move(edges);
  g.build_index();
  return g;
}

void HetGraph::build_index() {
  const std::size_t n = nodes_.size();
  std::vector<std::size_t> deg(n, 0);
  for (const EdgeRec& e : edges_) {
    ++deg[e.u];
    ++deg[e.v];
  }
  offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + deg[i];
  adjacency_.assign(offsets_[n], 0);
  adjacency_etypes_.assign(offsets_[n], EdgeType::DrugDrug);
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const EdgeRec& e : edges_) {
    adjacency_[fill[e.u]] = e.v;
    adjacency_etypes_[fill[e.u]++] = e.etype;
    adjacency_[fill[e.v]] = e.u;
    adjacency_etypes_[fill[e.v]++] = e.etype;
  }
  // Sort each neighbor list, carrying the parallel etype array along.
  std::vector<std::pair<NodeIndex, EdgeType>> scratch;
  for (std::size_t v = 0; v < n; ++v) {
    scratch.clear();
    for (std::size_t k = offsets_[v]; k < offsets_[v + 1]; ++k) {
      scratch.emplace_back(adjacency_[k], adjacency_etypes_[k]);
    }
    std::sort(scratch.begin(), scratch.end());
    for (std::size_t k = 0; k < scratch.size(); ++k) {
      adjacency_[offsets_[v] + k] = scratch[k].first;
      adjacency_etypes_[offsets_[v] + k] = scratch[k].second;
    }
  }

  counts_ = TypeCounts{};
  for (auto& bucket : by_type_) bucket.clear();
  for (const NodeRef& node : nodes_) {
    ++counts_.nodes[static_cast<std::size_t>(node.ntype)];
    by_type_[static_cast<std::size_t>(node.ntype)].push_back(node.index);
  }
  for (const EdgeRec& e : edges_) ++counts_.edges[static_cast<std::size_t>(e.etype)];
  counts_.total_nodes = n;
  counts_.total_edges = edges_.size();

  constexpr std::uint32_t kUnset = ~std::uint32_t{0};
  component_.assign(n, kUnset);
  std::uint32_t next = 0;
  std::vector<NodeIndex> stack;
  for (NodeIndex s = 0; s < n; ++s) {
    if (component_[s] != kUnset) continue;
    component_[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const NodeIndex v = stack.back();
      stack.pop_back();
      for (std::size_t k = offsets_[v]; k < offsets_[v + 1]; ++k) {
        const NodeIndex w = adjacency_[k];
        if (component_[w] == kUnset) {
          component_[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
}

const NodeRef& HetGraph::node(NodeIndex v) const { return nodes_[check(v)]; }

std::span<const NodeIndex> HetGraph::neighbors(NodeIndex v) const {
  check(v);
  return std::span<const NodeIndex>(adjacency_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]);
}

std::span<const EdgeType> HetGraph::neighbor_etypes(NodeIndex v) const {
  check(v);
  return std::span<const EdgeType>(adjacency_etypes_.data() + offsets_[v],
                                   offsets_[v + 1] - offsets_[v]);
}

bool HetGraph::has_edge(NodeIndex u, NodeIndex v) const { return edge_type(u, v).has_value(); }

std::optional<EdgeType> HetGraph::edge_type(NodeIndex u, NodeIndex v) const {
  const auto nb = neighbors(u);
  check(v);
  const auto it = std::lower_bound(nb.begin(), nb.end(), v);
  if (it == nb.end() || *it != v) return std::nullopt;
  return adjacency_etypes_[offsets_[u] + static_cast<std::size_t>(it - nb.begin())];
}

std::optional<NodeIndex> HetGraph::find(NodeType t, std::string_view external_id) const {
  const auto it = id_index_.find(id_key(t, external_id));
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

HetGraph HetGraph::without_edges(std::span<const std::pair<NodeIndex, NodeIndex>> pairs) const {
  std::vector<std::pair<NodeIndex, NodeIndex>> drop(pairs.begin(), pairs.end());
  for (auto& p : drop) {
    if (p.first > p.second) std::swap(p.first, p.second);
  }
  std::sort(drop.begin(), drop.end());
  std::vector<EdgeRec> kept;
  kept.reserve(edges_.size());
  for (const EdgeRec& e : edges_) {
    if (!std::binary_search(drop.begin(), drop.end(), std::make_pair(e.u, e.v))) kept.push_back(e);
  }
  return from_parts(nodes_, std::move(kept));
}

// ---- structural primitives ---------------------------------------------------

double clustering_coefficient(const HetGraph& g, NodeIndex v) {
  const auto nb = g.neighbors(v);
  const std::size_t deg = nb.size();
  if (deg < 2) return 0.0;
  // Count links among neighbors by merging sorted neighbor lists.
  std::size_t links = 0;
  for (const NodeIndex a : nb) {
    const auto na = g.neighbors(a);
    auto p = nb.begin();
    auto q = na.begin();
    while (p != nb.end() && q != na.end()) {
      if (*p < *q) {
        ++p;
      } else if (*q < *p) {
        ++q;
      } else {
        if (*p > a) ++links;
        ++p;
        ++q;
      }
    }
  }
  return 2.0 * static_cast<double>(links) /
         (static_cast<double>(deg) * static_cast<double>(deg - 1));
}

std::vector<double> clustering_coefficients(const HetGraph& g) {
  std::vector<double> out(g.num_nodes());
  for (NodeIndex v = 0; v < g.num_nodes(); ++v) out[v] = clustering_coefficient(g, v);
  return out;
}

DistanceClass pair_distance_class(const HetGraph& g, NodeIndex i, NodeIndex j) {
  if (i == j) throw InputError("pair_distance_class requires distinct nodes (got " +
                               std::to_string(i) + " twice)");
  if (g.component(i) != g.component(j)) return DistanceClass::Unreachable;
  if (g.has_edge(i, j)) return DistanceClass::D1;

  // Bidirectional BFS, each side grown at most to depth 2 which decides d <= 3.
  std::vector<NodeIndex> fwd1(g.neighbors(i).begin(), g.neighbors(i).end());
  std::vector<NodeIndex> bwd1(g.neighbors(j).begin(), g.neighbors(j).end());
  // d = 2: a common neighbor.
  {
    auto p = fwd1.begin();
    auto q = bwd1.begin();
    while (p != fwd1.end() && q != bwd1.end()) {
      if (*p < *q) ++p;
      else if (*q < *p) ++q;
      else return DistanceClass::D2;
    }
  }
  // d = 3: an edge between N(i) and N(j).
  const auto& small = fwd1.size() <= bwd1.size() ? fwd1 : bwd1;
  const auto& large = fwd1.size() <= bwd1.size() ? bwd1 : fwd1;
  for (const NodeIndex a : small) {
    const auto na = g.neighbors(a);
    auto p = na.begin();
    auto q = large.begin();
    while (p != na.end() && q != large.end()) {
      if (*p < *q) ++p;
      else if (*q < *p) ++q;
      else return DistanceClass::D3;
    }
  }
  return DistanceClass::D4Plus;
}

EdgeTypeSet edge_type_set(std::initializer_list<EdgeType> types) {
  EdgeTypeSet s{};
  for (EdgeType t : types) s[static_cast<std::size_t>(t)] = true;
  return s;
}

std::vector<int> bfs_distances(const HetGraph& g, const EdgeTypeSet& filter, NodeIndex source) {
  std::vector<int> dist(g.num_nodes(), -1);
  g.node(source);
  std::deque<NodeIndex> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const NodeIndex v = queue.front();
    queue.pop_front();
    const auto nb = g.neighbors(v);
    const auto et = g.neighbor_etypes(v);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (!filter[static_cast<std::size_t>(et[k])] || dist[nb[k]] >= 0) continue;
      dist[nb[k]] = dist[v] + 1;
      queue.push_back(nb[k]);
    }
  }
  return dist;
}

std::optional<std::size_t> shortest_path_len_in_subnet(const HetGraph& g,
                                                       const EdgeTypeSet& filter,
                                                       NodeIndex a, NodeIndex b) {
  g.node(a);
  g.node(b);
  if (a == b) return 0;
  std::vector<int> dist(g.num_nodes(), -1);
  std::deque<NodeIndex> queue{a};
  dist[a] = 0;
  while (!queue.empty()) {
    const NodeIndex v = queue.front();
    queue.pop_front();
    const auto nb = g.neighbors(v);
    const auto et = g.neighbor_etypes(v);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (!filter[static_cast<std::size_t>(et[k])] || dist[nb[k]] >= 0) continue;
      dist[nb[k]] = dist[v] + 1;
      if (nb[k] == b) return static_cast<std::size_t>(dist[nb[k]]);
      queue.push_back(nb[k]);
    }
  }
  return std::nullopt;
}

// ---- meta-paths ----------------------------------------------------------------

const std::array<MetaPathTemplate, kNumMetaPathTemplates>& metapath_templates() {
  using enum NodeType;
  static const std::array<MetaPathTemplate, kNumMetaPathTemplates> kTemplates = {{
      {0, {Drug, Drug, Drug, Protein}},
      {1, {Drug, Drug, Protein, Protein}},
      {2, {Drug, Drug, Disease, Protein}},
      {3, {Drug, Protein, Drug, Protein}},
      {4, {Drug, Protein, Protein, Protein}},
      {5, {Drug, Protein, Disease, Protein}},
      {6, {Drug, Disease, Drug, Protein}},
      {7, {Drug, Disease, Protein, Protein}},
      {8, {Protein, Drug, Drug, Drug}},
      {9, {Protein, Protein, Drug, Drug}},
      {10, {Protein, Disease, Drug, Drug}},
      {11, {Protein, Drug, Protein, Drug}},
      {12, {Protein, Protein, Protein, Drug}},
      {13, {Protein, Disease, Protein, Drug}},
      {14, {Protein, Drug, Disease, Drug}},
      {15, {Protein, Protein, Disease, Drug}},
  }};
  return kTemplates;
}

std::string metapath_name(const MetaPathTemplate& t) {
  std::string out;
  for (std::size_t k = 0; k < kMetaPathLength; ++k) {
    if (k) out += '-';
    out += lower(to_string(t.sequence[k]));
  }
  return out;
}

std::optional<MetaPath> walk_metapath(const HetGraph& g, const MetaPathTemplate& t, Rng& rng) {
  const auto starts = g.nodes_of_type(t.sequence[0]);
  if (starts.empty()) {
    throw UnsatisfiableTemplate("meta-path " + metapath_name(t) + ": no node of type " +
                                std::string(to_string(t.sequence[0])));
  }
  std::vector<NodeIndex> candidates;
  for (int attempt = 0; attempt <= kMetaPathRestarts; ++attempt) {
    MetaPath path{};
    path[0] = starts[rng.index(starts.size())];
    bool ok = true;
    for (std::size_t hop = 1; hop < kMetaPathLength && ok; ++hop) {
      candidates.clear();
      const auto nb = g.neighbors(path[hop - 1]);
      for (const NodeIndex w : nb) {
        if (g.ntype(w) != t.sequence[hop]) continue;
        if (std::find(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(hop), w) !=
            path.begin() + static_cast<std::ptrdiff_t>(hop)) {
          continue;
        }
        candidates.push_back(w);
      }
      if (candidates.empty()) {
        ok = false;
      } else {
        path[hop] = candidates[rng.index(candidates.size())];
      }
    }
    if (ok) return path;
  }
  return std::nullopt;
}

bool path_matches_template(const HetGraph& g, const MetaPathTemplate& t, const MetaPath& p) {
  for (std::size_t k = 0; k < kMetaPathLength; ++k) {
    if (p[k] >= g.num_nodes() || g.ntype(p[k]) != t.sequence[k]) return false;
    if (k > 0 && !g.has_edge(p[k - 1], p[k])) return false;
  }
  return true;
}

}  // namespace biossl
