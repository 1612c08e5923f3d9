#include <algorithm>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "biossl/graph.hpp"
#include "json.hpp"

namespace biossl {

namespace {

constexpr char kGraphMagic[4] = {'B', 'H', 'N', 'G'};
constexpr std::uint32_t kGraphVersion = 1;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t k = 0; k < sizeof(T); ++k) {
    bytes[k] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * k)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw InputError("graph file truncated");
  }
  std::uint64_t v = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
  return static_cast<T>(v);
}

nlohmann::json counts_json(const TypeCounts& c) {
  nlohmann::json j;
  j["total_nodes"] = c.total_nodes;
  j["total_edges"] = c.total_edges;
  for (NodeType t : kAllNodeTypes) j["nodes"][std::string(to_string(t))] = c.of(t);
  for (EdgeType t : kAllEdgeTypes) j["edges"][std::string(to_string(t))] = c.of(t);
  return j;
}

}  // namespace

HetGraph load_edge_list(std::istream& in, const EdgeListSchema& schema, LoadReport* report) {
  const std::size_t needed =
      1 + std::max({schema.src_id, schema.src_type, schema.dst_id, schema.dst_type, schema.etype});
  std::vector<NodeRef> nodes;
  std::vector<EdgeRec> edges;
  std::unordered_map<std::string, NodeIndex> index;
  LoadReport local;

  auto intern = [&](NodeType t, std::string_view id) {
    std::string key = std::to_string(static_cast<int>(t)) + ":" + std::string(id);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    const auto v = static_cast<NodeIndex>(nodes.size());
    nodes.push_back(NodeRef{v, t, std::string(id)});
    index.emplace(std::move(key), v);
    return v;
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split_tabs(line);
    if (cols.size() < needed) {
      throw ParseError(lineno, "expected " + std::to_string(needed) + " tab-separated columns, got " +
                                   std::to_string(cols.size()));
    }
    const std::string_view src = cols[schema.src_id];
    const std::string_view dst = cols[schema.dst_id];
    if (src.empty() || dst.empty()) throw ParseError(lineno, "empty node id");
    const auto st = parse_node_type(cols[schema.src_type]);
    const auto dt = parse_node_type(cols[schema.dst_type]);
    const auto et = parse_edge_type(cols[schema.etype]);
    if (!st) throw ParseError(lineno, "unknown node type '" + std::string(cols[schema.src_type]) + "'");
    if (!dt) throw ParseError(lineno, "unknown node type '" + std::string(cols[schema.dst_type]) + "'");
    if (!et) throw ParseError(lineno, "unknown edge type '" + std::string(cols[schema.etype]) + "'");
    const auto implied = edge_type_between(*st, *dt);
    if (!implied || *implied != *et) {
      throw SchemaError("line " + std::to_string(lineno) + ": edge type " +
                        std::string(to_string(*et)) + " does not connect " +
                        std::string(to_string(*st)) + " and " + std::string(to_string(*dt)));
    }
    if (*st == *dt && src == dst) {
      local.rejected.push_back({lineno, "self-loop on " + std::string(src)});
      continue;
    }
    const NodeIndex u = intern(*st, src);
    const NodeIndex v = intern(*dt, dst);
    edges.push_back(EdgeRec{std::min(u, v), std::max(u, v), *et});
  }
  const std::size_t raw = edges.size();
  HetGraph g = HetGraph::from_parts(std::move(nodes), std::move(edges));
  local.duplicates_collapsed = raw - g.num_edges();
  if (report) *report = std::move(local);
  return g;
}

void write_edge_list(std::ostream& out, const HetGraph& g) {
  out << "# src_id\tsrc_type\tdst_id\tdst_type\tetype\n";
  for (const EdgeRec& e : g.edges()) {
    const NodeRef& a = g.node(e.u);
    const NodeRef& b = g.node(e.v);
    out << a.external_id << '\t' << to_string(a.ntype) << '\t' << b.external_id << '\t'
        << to_string(b.ntype) << '\t' << to_string(e.etype) << '\n';
  }
}

void save_graph(std::ostream& out, const HetGraph& g) {
  nlohmann::json header;
  header["format"] = "biossl-graph";
  header["counts"] = counts_json(g.counts());
  nlohmann::json node_types = nlohmann::json::array();
  for (NodeType t : kAllNodeTypes) node_types.push_back(std::string(to_string(t)));
  nlohmann::json edge_types = nlohmann::json::array();
  for (EdgeType t : kAllEdgeTypes) edge_types.push_back(std::string(to_string(t)));
  header["node_types"] = node_types;
  header["edge_types"] = edge_types;
  nlohmann::json ids = nlohmann::json::array();
  nlohmann::json types = nlohmann::json::array();
  for (const NodeRef& n : g.nodes()) {
    ids.push_back(n.external_id);
    types.push_back(static_cast<int>(n.ntype));
  }
  header["node_ids"] = std::move(ids);
  header["node_ntypes"] = std::move(types);
  const std::string text = header.dump();

  out.write(kGraphMagic, 4);
  put_le<std::uint32_t>(out, kGraphVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_le<std::uint64_t>(out, g.num_edges());
  for (const EdgeRec& e : g.edges()) {
    put_le<std::uint32_t>(out, e.u);
    put_le<std::uint32_t>(out, e.v);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.etype));
  }
}

HetGraph load_graph(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kGraphMagic, 4) != 0) {
    throw InputError("not a graph file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kGraphVersion) {
    throw InputError("unsupported graph file version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(in);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw InputError("graph file truncated in header");
  }
  const auto header = nlohmann::json::parse(text);
  const auto& ids = header.at("node_ids");
  const auto& types = header.at("node_ntypes");
  std::vector<NodeRef> nodes;
  nodes.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int t = types.at(i).get<int>();
    if (t < 0 || t >= static_cast<int>(kNumNodeTypes)) throw InputError("bad node type in graph file");
    nodes.push_back(NodeRef{static_cast<NodeIndex>(i), static_cast<NodeType>(t), ids[i].get<std::string>()});
  }
  const auto m = get_le<std::uint64_t>(in);
  std::vector<EdgeRec> edges;
  edges.reserve(m);
  for (std::uint64_t k = 0; k < m; ++k) {
    EdgeRec e;
    e.u = get_le<std::uint32_t>(in);
    e.v = get_le<std::uint32_t>(in);
    const auto et = get_le<std::uint8_t>(in);
    if (et >= kNumEdgeTypes) throw InputError("bad edge type in graph file");
    e.etype = static_cast<EdgeType>(et);
    edges.push_back(e);
  }
  HetGraph g = HetGraph::from_parts(std::move(nodes), std::move(edges));
  if (counts_json(g.counts()) != header.at("counts")) {
    throw InputError("graph file counts do not match its adjacency blob");
  }
  return g;
}

std::uint64_t graph_fingerprint(const HetGraph& g) {
  std::ostringstream buf;
  save_graph(buf, g);
  return fnv1a64(buf.str());
}

}  // namespace biossl
