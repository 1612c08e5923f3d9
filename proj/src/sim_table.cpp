#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "biossl/similarity.hpp"

namespace biossl {

std::string_view to_string(SimProvenance p) {
  switch (p) {
    case SimProvenance::Tanimoto: return "Tanimoto";
    case SimProvenance::TanimotoHashed: return "TanimotoHashed";
    case SimProvenance::SW: return "SW";
    case SimProvenance::ModuleSim: return "ModuleSim";
  }
  return "?";
}

std::optional<SimProvenance> parse_provenance(std::string_view s) {
  if (s == "Tanimoto") return SimProvenance::Tanimoto;
  if (s == "TanimotoHashed") return SimProvenance::TanimotoHashed;
  if (s == "SW") return SimProvenance::SW;
  if (s == "ModuleSim") return SimProvenance::ModuleSim;
  return std::nullopt;
}

void SimTable::set(NodeType t, NodeIndex i, NodeIndex j, double sim) {
  if (i == j) throw InputError("SimTable: diagonal entries are not stored");
  if (!std::isfinite(sim)) throw NumericFault("SimTable: non-finite similarity");
  if (i > j) std::swap(i, j);
  sim = std::clamp(sim, 0.0, 1.0);
  entries_[{i, j}] = SimEntry{i, j, t, sim};
  adjacency_[i][j] = sim;
  adjacency_[j][i] = sim;
}

std::optional<double> SimTable::get(NodeIndex i, NodeIndex j) const {
  if (i > j) std::swap(i, j);
  const auto it = entries_.find({i, j});
  if (it == entries_.end()) return std::nullopt;
  return it->second.sim;
}

std::size_t SimTable::count(NodeType t) const {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                [t](const auto& kv) { return kv.second.ntype == t; }));
}

std::vector<SimEntry> SimTable::entries() const {
  std::vector<SimEntry> out;
  out.reserve(entries_.size());
  for (const auto& kv : entries_) out.push_back(kv.second);
  return out;
}

std::vector<std::pair<NodeIndex, double>> SimTable::partners(NodeIndex i) const {
  const auto it = adjacency_.find(i);
  if (it == adjacency_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::vector<NodeIndex> SimTable::anchors(std::size_t min_partners) const {
  std::vector<NodeIndex> out;
  for (const auto& [node, row] : adjacency_) {
    if (row.size() >= min_partners) out.push_back(node);
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string format_sim(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool content_line(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return !line.empty() && line[0] != '#';
}

}  // namespace

void write_sim_table(std::ostream& out, const SimTable& table, const HetGraph& g) {
  for (const SimEntry& e : table.entries()) {
    const auto prov = table.provenance(e.ntype);
    out << to_string(e.ntype) << '\t' << g.node(e.i).external_id << '\t' << g.node(e.j).external_id
        << '\t' << format_sim(e.sim) << '\t' << (prov ? to_string(*prov) : "unknown") << '\n';
  }
}

SimTable read_sim_table(std::istream& in, const HetGraph& g) {
  SimTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!content_line(line)) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 5) throw ParseError(lineno, "expected 5 columns in similarity table");
    const auto t = parse_node_type(cols[0]);
    if (!t) throw ParseError(lineno, "unknown node type '" + cols[0] + "'");
    const auto i = g.find(*t, cols[1]);
    const auto j = g.find(*t, cols[2]);
    if (!i || !j) throw ParseError(lineno, "similarity pair references a node absent from the graph");
    char* end = nullptr;
    const double sim = std::strtod(cols[3].c_str(), &end);
    if (end == cols[3].c_str() || *end != '\0') throw ParseError(lineno, "bad similarity value");
    const auto prov = parse_provenance(cols[4]);
    if (!prov) throw ParseError(lineno, "unknown provenance '" + cols[4] + "'");
    table.set(*t, *i, *j, sim);
    table.set_provenance(*t, *prov);
  }
  return table;
}

// ---- feature files ----------------------------------------------------------------

std::map<std::string, Fingerprint> read_fingerprints(std::istream& in) {
  std::map<std::string, Fingerprint> out;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> width;
  while (std::getline(in, line)) {
    ++lineno;
    if (!content_line(line)) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 3) throw ParseError(lineno, "expected node_id, hex_bits, width");
    std::size_t w = 0;
    try {
      w = static_cast<std::size_t>(std::stoul(cols[2]));
    } catch (const std::exception&) {
      throw ParseError(lineno, "bad fingerprint width '" + cols[2] + "'");
    }
    if (width && *width != w) throw ParseError(lineno, "fingerprint widths differ within one file");
    width = w;
    try {
      out[cols[0]] = Fingerprint::from_hex(cols[1], w);
    } catch (const InputError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

void write_fingerprints(std::ostream& out, const std::map<std::string, Fingerprint>& fps) {
  for (const auto& [id, fp] : fps) out << id << '\t' << fp.to_hex() << '\t' << fp.width() << '\n';
}

std::map<std::string, ProteinSequence> read_fasta(std::istream& in) {
  std::map<std::string, ProteinSequence> out;
  std::string line;
  std::string id;
  std::string residues;
  std::size_t lineno = 0;
  std::size_t header_line = 0;
  auto flush = [&] {
    if (id.empty()) return;
    try {
      out[id] = ProteinSequence(residues);
    } catch (const InputError& e) {
      throw ParseError(header_line, "sequence '" + id + "': " + e.what());
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == ';') continue;
    if (line[0] == '>') {
      flush();
      id = line.substr(1);
      const auto ws = id.find_first_of(" \t");
      if (ws != std::string::npos) id.resize(ws);
      if (id.empty()) throw ParseError(lineno, "FASTA header without id");
      residues.clear();
      header_line = lineno;
    } else {
      if (id.empty()) throw ParseError(lineno, "sequence data before the first FASTA header");
      residues += line;
    }
  }
  flush();
  return out;
}

void write_fasta(std::ostream& out, const std::map<std::string, ProteinSequence>& seqs) {
  for (const auto& [id, seq] : seqs) {
    out << '>' << id << '\n';
    const std::string s = seq.str();
    for (std::size_t k = 0; k < s.size(); k += 60) out << s.substr(k, 60) << '\n';
  }
}

std::map<std::string, std::vector<std::string>> read_modules(std::istream& in) {
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!content_line(line)) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 2) throw ParseError(lineno, "expected disease_id and comma-separated protein ids");
    std::vector<std::string> genes;
    for (auto& gene : split(cols[1], ',')) {
      if (!gene.empty()) genes.push_back(gene);
    }
    if (genes.empty()) throw ParseError(lineno, "empty disease module");
    out[cols[0]] = std::move(genes);
  }
  return out;
}

void write_modules(std::ostream& out, const std::map<std::string, std::vector<std::string>>& mods) {
  for (const auto& [id, genes] : mods) {
    out << id << '\t';
    for (std::size_t k = 0; k < genes.size(); ++k) out << (k ? "," : "") << genes[k];
    out << '\n';
  }
}

// ---- table assembly ----------------------------------------------------------------

namespace {

using PairList = std::vector<std::pair<std::size_t, std::size_t>>;

// Positions into the covered-node list. All pairs when small, else a sampled
// budget of distinct pairs.
PairList choose_pairs(std::size_t n, const SimConfig& config, Rng rng) {
  PairList pairs;
  if (n < 2) return pairs;
  if (n <= config.max_all_pairs_nodes) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
    }
    return pairs;
  }
  const std::size_t total = n * (n - 1) / 2;
  const std::size_t budget = std::min(total, n * config.sampled_pairs_per_node);
  std::set<std::pair<std::size_t, std::size_t>> chosen;
  while (chosen.size() < budget) {
    std::size_t a = rng.index(n);
    std::size_t b = rng.index(n);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    chosen.emplace(a, b);
  }
  return {chosen.begin(), chosen.end()};
}

// Evaluates fn over pairs on `jobs` workers; results land by position so the
// merge order never depends on scheduling.
template <typename Fn>
std::vector<double> score_pairs(const PairList& pairs, std::size_t jobs, Fn fn) {
  std::vector<double> out(pairs.size());
  jobs = std::max<std::size_t>(1, std::min(jobs, pairs.size()));
  if (jobs == 1) {
    for (std::size_t k = 0; k < pairs.size(); ++k) out[k] = fn(pairs[k].first, pairs[k].second);
    return out;
  }
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t k = w; k < pairs.size(); k += jobs) out[k] = fn(pairs[k].first, pairs[k].second);
    });
  }
  for (auto& t : workers) t.join();
  return out;
}

}  // namespace

SimTable build_sim_table(const HetGraph& g, const FeatureSet& features, const SimConfig& config,
                         SimBuildReport* report) {
  SimTable table;
  SimBuildReport local;
  const Rng base(config.seed);

  // Drugs.
  {
    std::vector<NodeIndex> nodes;
    std::vector<const Fingerprint*> fps;
    for (NodeIndex v : g.nodes_of_type(NodeType::Drug)) {
      const auto it = features.fingerprints.find(g.node(v).external_id);
      if (it == features.fingerprints.end()) {
        local.coverage_warnings.push_back("no fingerprint for drug " + g.node(v).external_id);
        continue;
      }
      nodes.push_back(v);
      fps.push_back(&it->second);
    }
    const auto pairs = choose_pairs(nodes.size(), config, base.fork(0));
    const auto sims = score_pairs(pairs, config.jobs,
                                  [&](std::size_t a, std::size_t b) { return tanimoto(*fps[a], *fps[b]); });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      table.set(NodeType::Drug, nodes[pairs[k].first], nodes[pairs[k].second], sims[k]);
    }
    if (!nodes.empty()) {
      table.set_provenance(NodeType::Drug,
                           features.fingerprints_hashed ? SimProvenance::TanimotoHashed : SimProvenance::Tanimoto);
    }
    local.pairs_scored[0] = pairs.size();
  }

  // Proteins.
  {
    std::vector<NodeIndex> nodes;
    std::vector<const ProteinSequence*> seqs;
    for (NodeIndex v : g.nodes_of_type(NodeType::Protein)) {
      const auto it = features.sequences.find(g.node(v).external_id);
      if (it == features.sequences.end()) {
        local.coverage_warnings.push_back("no sequence for protein " + g.node(v).external_id);
        continue;
      }
      nodes.push_back(v);
      seqs.push_back(&it->second);
    }
    std::vector<std::int64_t> self(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) self[k] = smith_waterman(*seqs[k], *seqs[k], config.scoring);
    std::vector<NodeIndex> kept_nodes;
    std::vector<const ProteinSequence*> kept_seqs;
    std::vector<std::int64_t> kept_self;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (self[k] <= 0) {
        local.coverage_warnings.push_back("degenerate sequence (self-score <= 0) for protein " +
                                          g.node(nodes[k]).external_id);
        continue;
      }
      kept_nodes.push_back(nodes[k]);
      kept_seqs.push_back(seqs[k]);
      kept_self.push_back(self[k]);
    }
    const auto pairs = choose_pairs(kept_nodes.size(), config, base.fork(1));
    const auto sims = score_pairs(pairs, config.jobs, [&](std::size_t a, std::size_t b) {
      return normalized_sw(smith_waterman(*kept_seqs[a], *kept_seqs[b], config.scoring), kept_self[a],
                           kept_self[b]);
    });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      table.set(NodeType::Protein, kept_nodes[pairs[k].first], kept_nodes[pairs[k].second], sims[k]);
    }
    if (!kept_nodes.empty()) table.set_provenance(NodeType::Protein, SimProvenance::SW);
    local.pairs_scored[1] = pairs.size();
  }

  // Diseases.
  {
    std::vector<NodeIndex> nodes;
    std::vector<DiseaseModule> modules;
    for (NodeIndex v : g.nodes_of_type(NodeType::Disease)) {
      const auto it = features.modules.find(g.node(v).external_id);
      if (it == features.modules.end()) {
        local.coverage_warnings.push_back("no module for disease " + g.node(v).external_id);
        continue;
      }
      DiseaseModule mod;
      for (const auto& gene : it->second) {
        const auto idx = g.find(NodeType::Protein, gene);
        if (!idx) {
          local.coverage_warnings.push_back("module gene " + gene + " of disease " +
                                            g.node(v).external_id + " is not in the network");
          continue;
        }
        mod.genes.push_back(*idx);
      }
      std::sort(mod.genes.begin(), mod.genes.end());
      mod.genes.erase(std::unique(mod.genes.begin(), mod.genes.end()), mod.genes.end());
      if (mod.genes.empty()) {
        local.coverage_warnings.push_back("empty module for disease " + g.node(v).external_id);
        continue;
      }
      nodes.push_back(v);
      modules.push_back(std::move(mod));
    }
    const auto pairs = choose_pairs(nodes.size(), config, base.fork(2));
    // Warm the BFS cache up front so workers only read it.
    PpiProximity prox(g);
    for (const auto& mod : modules) {
      for (NodeIndex gene : mod.genes) prox.distances_from(gene);
    }
    const auto sims = score_pairs(pairs, config.jobs, [&](std::size_t a, std::size_t b) {
      return modulesim(modules[a], modules[b], prox);
    });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      table.set(NodeType::Disease, nodes[pairs[k].first], nodes[pairs[k].second], sims[k]);
    }
    if (!nodes.empty()) table.set_provenance(NodeType::Disease, SimProvenance::ModuleSim);
    local.pairs_scored[2] = pairs.size();
  }

  if (report) *report = std::move(local);
  return table;
}

}  // namespace biossl
