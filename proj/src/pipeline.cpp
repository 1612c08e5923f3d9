#include "biossl/pipeline.hpp"
#include "biossl/report.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace biossl {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- config ------------------------------------------------------------------------

namespace {

std::string ortho_name(OrthoMode m) { return m == OrthoMode::PerNode ? "per_node" : "batch_matrix"; }
std::string export_name(ExportMode m) { return m == ExportMode::Shared ? "shared" : "concat"; }

// Reads j[key] into out when present, rejecting keys not in `known`.
void check_keys(const json& j, std::string_view section, std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw SchemaError("config section '" + std::string(section) + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw SchemaError("unknown config key '" + std::string(section) + "." + it.key() + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config key '") + key + "': " + e.what());
  }
}

json read_json_file(const fs::path& p, const std::string& missing_hint) {
  std::ifstream in(p);
  if (!in) throw InputError("missing " + p.string() + (missing_hint.empty() ? "" : "; " + missing_hint));
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw InputError(p.string() + " is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("write failed: " + p.string());
}

void write_json_file(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::string chain(std::string_view upstream, std::string_view section) {
  std::string s(upstream);
  s += "|";
  s += section;
  return hex64(fnv1a64(s));
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["sampling"] = {
      {"cluster_count", sampling.cluster_count ? json(*sampling.cluster_count) : json(nullptr)},
      {"pair_factor", sampling.pair_factor},
      {"edge_mask_ratio", sampling.edge_mask_ratio},
      {"edge_mask_remove_edges", sampling.edge_mask_remove_edges},
      {"per_template", sampling.per_template},
      {"simreg_factor", sampling.simreg_factor},
      {"simcon_factor", sampling.simcon_factor},
  };
  const EncoderConfig& e = mtl.encoder;
  j["encoder"] = {{"layers", e.layers},           {"hidden_heads", e.hidden_heads}, {"hidden_dim", e.hidden_dim},
                  {"output_heads", e.output_heads}, {"embed_dim", e.embed_dim},     {"leaky_slope", e.leaky_slope}};
  j["mtl"] = {{"lambda_adv", mtl.lambda_adv},
              {"gamma_oc", mtl.gamma_oc},
              {"epochs", mtl.epochs},
              {"lr", mtl.lr},
              {"l2", mtl.l2},
              {"grl_scale", mtl.grl_scale},
              {"grl_warmup_steps", mtl.grl_warmup_steps},
              {"batch_size", mtl.batch_size},
              {"discriminator_hidden", mtl.discriminator_hidden},
              {"ortho_mode", ortho_name(mtl.ortho_mode)},
              {"export", export_name(export_mode)}};
  j["similarity"] = {{"gap_open", sim.scoring.gap_open},
                     {"gap_extend", sim.scoring.gap_extend},
                     {"max_all_pairs_nodes", sim.max_all_pairs_nodes},
                     {"sampled_pairs_per_node", sim.sampled_pairs_per_node},
                     {"seed", sim.seed}};
  const DecoderConfig& d = experiment.decoder;
  const double lr_min = d.lr_grid.empty() ? 0.0 : d.lr_grid.front();
  const double lr_max = d.lr_grid.empty() ? 0.0 : d.lr_grid.back();
  j["evaluation"] = {{"repeats", experiment.repeats},
                     {"seed", experiment.seed},
                     {"train_frac", experiment.scenario.train_frac},
                     {"holdout_drug_frac", experiment.scenario.holdout_drug_frac},
                     {"exclude_test_edges", experiment.exclude_test_edges},
                     {"repretrain_per_repeat", experiment.repretrain_per_repeat},
                     {"decoder",
                      {{"hidden", d.hidden},
                       {"epochs", d.epochs},
                       {"batch_size", d.batch_size},
                       {"lr_min", lr_min},
                       {"lr_max", lr_max},
                       {"lr_points", d.lr_grid.size()},
                       {"validation_frac", d.validation_frac},
                       {"weight_decay", d.weight_decay},
                       {"standardize", d.standardize}}}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  check_keys(j, "config", {"seed", "sampling", "encoder", "mtl", "similarity", "evaluation"});
  read(j, "seed", c.seed);
  if (j.contains("sampling")) {
    const json& s = j["sampling"];
    check_keys(s, "sampling",
               {"cluster_count", "pair_factor", "edge_mask_ratio", "edge_mask_remove_edges", "per_template",
                "simreg_factor", "simcon_factor"});
    if (s.contains("cluster_count") && !s["cluster_count"].is_null()) {
      std::size_t n = 0;
      read(s, "cluster_count", n);
      c.sampling.cluster_count = n;
    }
    read(s, "pair_factor", c.sampling.pair_factor);
    read(s, "edge_mask_ratio", c.sampling.edge_mask_ratio);
    read(s, "edge_mask_remove_edges", c.sampling.edge_mask_remove_edges);
    read(s, "per_template", c.sampling.per_template);
    read(s, "simreg_factor", c.sampling.simreg_factor);
    read(s, "simcon_factor", c.sampling.simcon_factor);
  }
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    check_keys(e, "encoder", {"layers", "hidden_heads", "hidden_dim", "output_heads", "embed_dim", "leaky_slope"});
    read(e, "layers", c.mtl.encoder.layers);
    read(e, "hidden_heads", c.mtl.encoder.hidden_heads);
    read(e, "hidden_dim", c.mtl.encoder.hidden_dim);
    read(e, "output_heads", c.mtl.encoder.output_heads);
    read(e, "embed_dim", c.mtl.encoder.embed_dim);
    read(e, "leaky_slope", c.mtl.encoder.leaky_slope);
  }
  if (j.contains("mtl")) {
    const json& m = j["mtl"];
    check_keys(m, "mtl",
               {"lambda_adv", "gamma_oc", "epochs", "lr", "l2", "grl_scale", "grl_warmup_steps", "batch_size",
                "discriminator_hidden", "ortho_mode", "export"});
    read(m, "lambda_adv", c.mtl.lambda_adv);
    read(m, "gamma_oc", c.mtl.gamma_oc);
    read(m, "epochs", c.mtl.epochs);
    read(m, "lr", c.mtl.lr);
    read(m, "l2", c.mtl.l2);
    read(m, "grl_scale", c.mtl.grl_scale);
    read(m, "grl_warmup_steps", c.mtl.grl_warmup_steps);
    read(m, "batch_size", c.mtl.batch_size);
    read(m, "discriminator_hidden", c.mtl.discriminator_hidden);
    std::string ortho = ortho_name(c.mtl.ortho_mode);
    read(m, "ortho_mode", ortho);
    if (ortho == "per_node") {
      c.mtl.ortho_mode = OrthoMode::PerNode;
    } else if (ortho == "batch_matrix") {
      c.mtl.ortho_mode = OrthoMode::BatchMatrix;
    } else {
      throw SchemaError("mtl.ortho_mode must be per_node or batch_matrix");
    }
    std::string exp = export_name(c.export_mode);
    read(m, "export", exp);
    if (exp == "shared") {
      c.export_mode = ExportMode::Shared;
    } else if (exp == "concat") {
      c.export_mode = ExportMode::Concat;
    } else {
      throw SchemaError("mtl.export must be shared or concat");
    }
  }
  if (j.contains("similarity")) {
    const json& s = j["similarity"];
    check_keys(s, "similarity", {"gap_open", "gap_extend", "max_all_pairs_nodes", "sampled_pairs_per_node", "seed"});
    int open = c.sim.scoring.gap_open, extend = c.sim.scoring.gap_extend;
    read(s, "gap_open", open);
    read(s, "gap_extend", extend);
    c.sim.scoring = ScoringScheme::blosum62(open, extend);
    read(s, "max_all_pairs_nodes", c.sim.max_all_pairs_nodes);
    read(s, "sampled_pairs_per_node", c.sim.sampled_pairs_per_node);
    read(s, "seed", c.sim.seed);
  }
  if (j.contains("evaluation")) {
    const json& e = j["evaluation"];
    check_keys(e, "evaluation",
               {"repeats", "seed", "train_frac", "holdout_drug_frac", "exclude_test_edges", "repretrain_per_repeat",
                "decoder"});
    read(e, "repeats", c.experiment.repeats);
    read(e, "seed", c.experiment.seed);
    read(e, "train_frac", c.experiment.scenario.train_frac);
    read(e, "holdout_drug_frac", c.experiment.scenario.holdout_drug_frac);
    read(e, "exclude_test_edges", c.experiment.exclude_test_edges);
    read(e, "repretrain_per_repeat", c.experiment.repretrain_per_repeat);
    if (e.contains("decoder")) {
      const json& d = e["decoder"];
      check_keys(d, "evaluation.decoder",
                 {"hidden", "epochs", "batch_size", "lr_min", "lr_max", "lr_points", "validation_frac",
                  "weight_decay", "standardize"});
      DecoderConfig& dc = c.experiment.decoder;
      read(d, "hidden", dc.hidden);
      read(d, "epochs", dc.epochs);
      read(d, "batch_size", dc.batch_size);
      double lo = dc.lr_grid.front(), hi = dc.lr_grid.back();
      std::size_t points = dc.lr_grid.size();
      read(d, "lr_min", lo);
      read(d, "lr_max", hi);
      read(d, "lr_points", points);
      dc.lr_grid = lr_grid(lo, hi, points);
      read(d, "validation_frac", dc.validation_frac);
      read(d, "weight_decay", dc.weight_decay);
      read(d, "standardize", dc.standardize);
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::demo_preset() {
  RunConfig c;
  c.sampling.per_template = 100;
  c.sampling.pair_factor = 5.0;
  c.sampling.simreg_factor = 5.0;
  c.sampling.simcon_factor = 5.0;
  c.experiment.repeats = 3;
  c.experiment.decoder.lr_grid = lr_grid(5e-4, 0.05, 10);
  return c;
}

void RunConfig::validate() const {
  mtl.validate();
  if (!(sampling.edge_mask_ratio > 0.0 && sampling.edge_mask_ratio <= 1.0)) {
    throw SchemaError("sampling.edge_mask_ratio must lie in (0, 1]");
  }
  if (sampling.per_template < 1) throw SchemaError("sampling.per_template must be at least 1");
  if (sampling.pair_factor < 0 || sampling.simreg_factor < 0 || sampling.simcon_factor < 0) {
    throw SchemaError("sampling factors must be nonnegative");
  }
  if (experiment.repeats < 1) throw SchemaError("evaluation.repeats must be at least 1");
  if (experiment.decoder.lr_grid.empty()) throw SchemaError("evaluation.decoder.lr_points must be at least 1");
  if (!(experiment.decoder.validation_frac > 0.0 && experiment.decoder.validation_frac < 1.0)) {
    throw SchemaError("evaluation.decoder.validation_frac must lie in (0, 1)");
  }
  if (sim.scoring.gap_open < 0 || sim.scoring.gap_extend < 0) throw SchemaError("gap penalties must be nonnegative");
}

std::string RunConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

std::string RunConfig::section_hash(std::string_view stage) const {
  const json j = to_json();
  json part;
  if (stage == "graph") {
    part = "graph";
  } else if (stage == "sims") {
    part = j["similarity"];
  } else if (stage == "pretrain") {
    part = {{"seed", j["seed"]}, {"sampling", j["sampling"]}, {"encoder", j["encoder"]}, {"mtl", j["mtl"]}};
  } else if (stage == "evaluate") {
    part = {{"seed", j["seed"]},
            {"sampling", j["sampling"]},
            {"encoder", j["encoder"]},
            {"mtl", j["mtl"]},
            {"evaluation", j["evaluation"]}};
  } else {
    throw InputError("unknown stage " + std::string(stage));
  }
  return hex64(fnv1a64(std::string(stage) + ":" + part.dump()));
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j);
}

fs::path output_root(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("BIOSSL_OUT"); env && *env) return env;
  return "biossl_out";
}

fs::path Workspace::eval_file(const ComboEntry& c, ScenarioKind s) const {
  return root / "eval" / std::string(to_string(s)) / (c.id + ".json");
}

// ---- graph stage --------------------------------------------------------------------

CountCheck check_counts(const TypeCounts& counts, const json& expected) {
  CountCheck r;
  const auto cmp = [&](const std::string& what, std::size_t have, const json& want) {
    const auto w = want.get<std::size_t>();
    if (w != have) {
      r.ok = false;
      r.diffs.push_back(what + ": expected " + std::to_string(w) + ", found " + std::to_string(have));
    }
  };
  try {
    if (expected.contains("total_nodes")) cmp("nodes", counts.total_nodes, expected["total_nodes"]);
    if (expected.contains("total_edges")) cmp("edges", counts.total_edges, expected["total_edges"]);
    if (expected.contains("nodes")) {
      for (auto it = expected["nodes"].begin(); it != expected["nodes"].end(); ++it) {
        const auto t = parse_node_type(it.key());
        if (!t) throw SchemaError("expected counts: unknown node type '" + it.key() + "'");
        cmp(std::string(to_string(*t)) + " nodes", counts.of(*t), it.value());
      }
    }
    if (expected.contains("edges")) {
      for (auto it = expected["edges"].begin(); it != expected["edges"].end(); ++it) {
        const auto t = parse_edge_type(it.key());
        if (!t) throw SchemaError("expected counts: unknown edge type '" + it.key() + "'");
        cmp(std::string(to_string(*t)) + " edges", counts.of(*t), it.value());
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("expected counts file: ") + e.what());
  }
  return r;
}

namespace {

json counts_json(const TypeCounts& c) {
  json n, e;
  for (NodeType t : kAllNodeTypes) n[std::string(to_string(t))] = c.of(t);
  for (EdgeType t : kAllEdgeTypes) e[std::string(to_string(t))] = c.of(t);
  return {{"total_nodes", c.total_nodes}, {"total_edges", c.total_edges}, {"nodes", n}, {"edges", e}};
}

void print_counts(std::ostream& log, const TypeCounts& c) {
  log << c.total_nodes << " nodes / " << c.total_edges << " edges\n";
  for (NodeType t : kAllNodeTypes) log << "  " << to_string(t) << "\t" << c.of(t) << "\n";
  for (EdgeType t : kAllEdgeTypes) log << "  " << to_string(t) << "\t" << c.of(t) << "\n";
}

[[noreturn]] void stale(const std::string& artifact, const std::string& rerun) {
  throw InputError(artifact + " was produced under a different configuration or from different inputs; rerun `" +
                   rerun + "` with the current config before continuing");
}

std::string graph_chain(const Workspace& ws) {
  const json m = read_json_file(ws.graph_manifest(), "run `biossl build-graph` first");
  return m.at("chain_hash").get<std::string>();
}

std::string sims_expected_chain(const Workspace& ws, const RunConfig& cfg) {
  return chain(graph_chain(ws), cfg.section_hash("sims"));
}

bool needs_sims(const std::vector<TaskKind>& tasks) {
  return std::any_of(tasks.begin(), tasks.end(),
                     [](TaskKind t) { return t == TaskKind::SimReg || t == TaskKind::SimCon; });
}

// Chain hash of the artifacts a combination reads.
std::string upstream_chain(const Workspace& ws, const RunConfig& cfg, const ComboEntry& combo) {
  if (!needs_sims(combo.tasks)) return graph_chain(ws);
  const json m = read_json_file(ws.sims_manifest(), "run `biossl precompute-sims` first");
  return m.at("chain_hash").get<std::string>() == sims_expected_chain(ws, cfg) ? m.at("chain_hash").get<std::string>()
                                                                               : (stale("similarity table",
                                                                                        "biossl precompute-sims"),
                                                                                  std::string());
}

}  // namespace

GraphStageResult stage_build_graph(const Workspace& ws, const RunConfig& cfg, const fs::path& edges,
                                   const std::optional<fs::path>& expect_counts, std::ostream& log) {
  std::ifstream in(edges);
  if (!in) throw InputError("cannot open edge list " + edges.string());
  GraphStageResult r;
  r.graph = load_edge_list(in, {}, &r.load);
  for (const auto& rej : r.load.rejected) log << "rejected line " << rej.line << ": " << rej.reason << "\n";
  if (r.load.duplicates_collapsed > 0) log << r.load.duplicates_collapsed << " duplicate edges collapsed\n";
  print_counts(log, r.graph.counts());
  if (expect_counts) {
    const json want = read_json_file(*expect_counts, "");
    const CountCheck check = check_counts(r.graph.counts(), want);
    if (!check.ok) {
      std::string msg = "graph counts differ from " + expect_counts->string() + ":";
      for (const auto& d : check.diffs) msg += "\n  " + d;
      throw SchemaError(msg);
    }
    log << "counts match " << expect_counts->string() << "\n";
  }
  r.fingerprint = hex64(graph_fingerprint(r.graph));
  fs::create_directories(ws.graph_file().parent_path());
  {
    std::ofstream out(ws.graph_file(), std::ios::binary);
    if (!out) throw Error("cannot write " + ws.graph_file().string());
    save_graph(out, r.graph);
  }
  json m;
  m["stage"] = "build-graph";
  m["config_hash"] = cfg.hash();
  m["graph_fingerprint"] = r.fingerprint;
  m["chain_hash"] = chain(r.fingerprint, cfg.section_hash("graph"));
  m["source"] = edges.string();
  m["counts"] = counts_json(r.graph.counts());
  m["rejected_rows"] = r.load.rejected.size();
  write_json_file(ws.graph_manifest(), m);
  log << "graph " << r.fingerprint << " -> " << ws.graph_file().string() << "\n";
  return r;
}

HetGraph load_graph_artifact(const Workspace& ws, const RunConfig& cfg) {
  const json m = read_json_file(ws.graph_manifest(), "run `biossl build-graph` first");
  std::ifstream in(ws.graph_file(), std::ios::binary);
  if (!in) throw InputError("missing " + ws.graph_file().string() + "; run `biossl build-graph` first");
  HetGraph g = load_graph(in);
  const std::string fp = hex64(graph_fingerprint(g));
  if (fp != m.at("graph_fingerprint").get<std::string>() ||
      m.at("chain_hash").get<std::string>() != chain(fp, cfg.section_hash("graph"))) {
    stale("graph artifact", "biossl build-graph");
  }
  return g;
}

// ---- similarity stage -----------------------------------------------------------------

SimTable stage_precompute_sims(const Workspace& ws, const RunConfig& cfg, const FeatureInputs& inputs,
                               std::ostream& log) {
  const HetGraph g = load_graph_artifact(ws, cfg);
  FeatureSet fs_;
  const auto open = [](const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw InputError("cannot open " + p.string());
    return in;
  };
  if (inputs.fingerprints) {
    auto in = open(*inputs.fingerprints);
    fs_.fingerprints = read_fingerprints(in);
  } else if (inputs.smiles) {
    auto in = open(*inputs.smiles);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw ParseError(lineno, "expected id<TAB>SMILES");
      fs_.fingerprints[line.substr(0, tab)] = hashed_fingerprint(line.substr(tab + 1));
    }
    fs_.fingerprints_hashed = true;
    log << "warning: drug fingerprints hashed from SMILES text; not chemical fingerprints\n";
  }
  if (inputs.sequences) {
    auto in = open(*inputs.sequences);
    fs_.sequences = read_fasta(in);
  }
  if (inputs.modules) {
    auto in = open(*inputs.modules);
    fs_.modules = read_modules(in);
  }
  SimConfig sc = cfg.sim;
  sc.jobs = cfg.jobs;
  SimBuildReport report;
  SimTable table = build_sim_table(g, fs_, sc, &report);
  for (const auto& w : report.coverage_warnings) log << "warning: " << w << "\n";
  for (NodeType t : kAllNodeTypes) {
    log << "  " << to_string(t) << " pairs scored\t" << report.pairs_scored[static_cast<std::size_t>(t)] << "\n";
  }
  fs::create_directories(ws.sims_file().parent_path());
  {
    std::ofstream out(ws.sims_file(), std::ios::binary);
    if (!out) throw Error("cannot write " + ws.sims_file().string());
    write_sim_table(out, table, g);
  }
  json m;
  m["stage"] = "precompute-sims";
  m["config_hash"] = cfg.hash();
  m["chain_hash"] = sims_expected_chain(ws, cfg);
  m["entries"] = table.size();
  m["warnings"] = report.coverage_warnings;
  write_json_file(ws.sims_manifest(), m);
  log << table.size() << " similarity entries -> " << ws.sims_file().string() << "\n";
  return table;
}

SimTable load_sims_artifact(const Workspace& ws, const RunConfig& cfg, const HetGraph& g) {
  const json m = read_json_file(ws.sims_manifest(), "run `biossl precompute-sims` first");
  if (m.at("chain_hash").get<std::string>() != sims_expected_chain(ws, cfg)) {
    stale("similarity table", "biossl precompute-sims");
  }
  std::ifstream in(ws.sims_file());
  if (!in) throw InputError("missing " + ws.sims_file().string() + "; run `biossl precompute-sims` first");
  return read_sim_table(in, g);
}

// ---- pretraining ----------------------------------------------------------------------

std::uint64_t pretrain_seed(const RunConfig& cfg, std::size_t repeat) {
  return Rng(cfg.seed).fork(5000 + repeat).seed();
}

TrainResult pretrain_model(const HetGraph& g, const SimTable* sims, const std::vector<TaskKind>& tasks,
                           const RunConfig& cfg, std::uint64_t seed, std::vector<std::string>* warnings) {
  const Rng sampler = Rng(seed).fork(77);
  std::vector<PretextBatch> batches;
  for (TaskKind t : tasks) {
    Rng trng = sampler.fork(static_cast<std::uint64_t>(t));
    batches.push_back(sample_task(t, g, sims, cfg.sampling, trng));
    if (warnings) {
      for (const auto& w : batches.back().warnings) warnings->push_back(std::string(to_string(t)) + ": " + w);
    }
  }
  MTLConfig mc = cfg.mtl;
  mc.edge_mask_remove_edges = cfg.sampling.edge_mask_remove_edges;
  return train_multitask(tasks, g, batches, mc, seed);
}

void stage_pretrain(const Workspace& ws, const RunConfig& cfg, const ComboEntry& combo, std::ostream& log) {
  const HetGraph g = load_graph_artifact(ws, cfg);
  const std::string upstream = upstream_chain(ws, cfg, combo);
  std::optional<SimTable> sims;
  if (needs_sims(combo.tasks)) sims = load_sims_artifact(ws, cfg, g);
  const std::uint64_t seed = pretrain_seed(cfg, 0);
  std::vector<std::string> warnings;
  const TrainResult r = pretrain_model(g, sims ? &*sims : nullptr, combo.tasks, cfg, seed, &warnings);
  for (const auto& w : warnings) log << "warning: " << w << "\n";

  const fs::path dir = ws.pretrain_dir(combo);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "checkpoint.bsck", std::ios::binary);
    if (!out) throw Error("cannot write checkpoint in " + dir.string());
    save_model(out, r.model, seed, r.history.steps);
  }
  {
    std::ofstream out(dir / "embeddings.tsv", std::ios::binary);
    write_embeddings(out, export_embeddings(r.model, g, cfg.export_mode), g);
  }
  json m;
  m["stage"] = "pretrain";
  m["combo_id"] = combo.id;
  m["combo"] = combo.name;
  m["category"] = combo.tag;
  m["modal_size"] = combo.modal_size;
  std::vector<std::string> names;
  for (TaskKind t : combo.tasks) names.push_back(std::string(to_string(t)));
  m["tasks"] = names;
  m["seed"] = seed;
  m["config_hash"] = cfg.hash();
  m["chain_hash"] = chain(upstream, cfg.section_hash("pretrain") + combo.id);
  m["arch_hash"] = hex64(r.model.arch_hash());
  m["steps"] = r.history.steps;
  json curves;
  for (std::size_t t = 0; t < combo.tasks.size(); ++t) curves[names[t]] = r.history.task_loss[t];
  m["loss_curves"] = curves;
  m["total_loss"] = r.history.total_loss;
  m["wall_seconds"] = r.history.wall_seconds;
  m["warnings"] = warnings;
  write_json_file(dir / "manifest.json", m);
  log << combo.name << " (" << combo.tag << "): " << r.history.steps << " steps, final total loss "
      << (r.history.total_loss.empty() ? 0.0 : r.history.total_loss.back()) << " -> " << dir.string() << "\n";
}

// ---- evaluation -----------------------------------------------------------------------

EvalReport evaluate_combo(const HetGraph& g, const SimTable* sims, const RunConfig& cfg, const ComboEntry& combo,
                          ScenarioKind scenario) {
  ExperimentConfig ec = cfg.experiment;
  ec.scenario.kind = scenario;
  ec.jobs = cfg.jobs;
  const bool per_repeat = ec.exclude_test_edges || ec.repretrain_per_repeat;
  const EmbeddingProvider provider = [&](const HetGraph& pg, std::size_t repeat) {
    const TrainResult r = pretrain_model(pg, sims, combo.tasks, cfg, pretrain_seed(cfg, per_repeat ? repeat : 0));
    return export_embeddings(r.model, pg, cfg.export_mode);
  };
  EvalReport rep = run_experiment(g, ec, provider);
  rep.combo_id = combo.id;
  rep.combo = combo.name;
  rep.tag = combo.tag;
  rep.modal_size = combo.modal_size;
  rep.config_hash = cfg.hash();
  return rep;
}

EvalReport stage_evaluate(const Workspace& ws, const RunConfig& cfg, const ComboEntry& combo, ScenarioKind scenario,
                          std::ostream& log) {
  const HetGraph g = load_graph_artifact(ws, cfg);
  upstream_chain(ws, cfg, combo);
  std::optional<SimTable> sims;
  if (needs_sims(combo.tasks)) sims = load_sims_artifact(ws, cfg, g);
  const EvalReport rep = evaluate_combo(g, sims ? &*sims : nullptr, cfg, combo, scenario);
  std::ostringstream text;
  write_report_json(text, rep);
  write_text(ws.eval_file(combo, scenario), text.str());
  log << combo.name << " [" << to_string(scenario) << "]";
  for (const CellResult& c : rep.cells) {
    log << "  " << to_string(c.kind) << " AUROC " << mean_of(c.auroc) << " +/- " << std_of(c.auroc) << ", AUPR "
        << mean_of(c.aupr) << " +/- " << std_of(c.aupr);
  }
  log << "\n";
  return rep;
}

// ---- report ----------------------------------------------------------------------------

void stage_report(const Workspace& ws, std::ostream& log) {
  const fs::path eval_root = ws.root / "eval";
  if (!fs::exists(eval_root)) throw InputError("no evaluation results under " + eval_root.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(eval_root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no evaluation results under " + eval_root.string());
  std::vector<EvalReport> reports;
  std::set<std::string> hashes;
  for (const auto& f : files) {
    std::ifstream in(f);
    reports.push_back(read_report_json(in));
    hashes.insert(reports.back().config_hash);
  }
  if (hashes.size() > 1) {
    std::string msg = "evaluation results come from " + std::to_string(hashes.size()) + " different configs:";
    for (const auto& h : hashes) msg += " " + h;
    throw InputError(msg + "; re-evaluate under one config");
  }
  write_text(ws.report_dir() / "table.csv", report_table_csv(reports));
  json all = json::array();
  std::set<ScenarioKind> scenarios;
  for (const auto& r : reports) {
    std::ostringstream s;
    write_report_json(s, r);
    all.push_back(json::parse(s.str()));
    scenarios.insert(r.scenario);
  }
  write_text(ws.report_dir() / "reports.json", all.dump(2) + "\n");
  for (ScenarioKind s : scenarios) {
    write_text(ws.report_dir() / ("heatmap_" + std::string(to_string(s)) + ".csv"), report_heatmap_csv(reports, s));
  }
  log << reports.size() << " evaluation results -> " << ws.report_dir().string() << "\n";
}

}  // namespace biossl
