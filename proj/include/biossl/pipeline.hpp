#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "biossl/combo.hpp"
#include "biossl/eval.hpp"
#include "biossl/mtl.hpp"
#include "biossl/pretext.hpp"
#include "biossl/similarity.hpp"
#include "json.hpp"

namespace biossl {

// Every knob of a run. Serializes to canonical JSON; the hash of that text
// stamps every artifact. jobs only affects scheduling and is not hashed.
struct RunConfig {
  std::uint64_t seed = 42;
  SamplingConfig sampling;
  MTLConfig mtl;
  ExportMode export_mode = ExportMode::Shared;
  SimConfig sim;
  ExperimentConfig experiment;
  std::size_t jobs = 1;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys throw SchemaError.
  static RunConfig from_json(const nlohmann::json& j);
  // Smaller sample budgets and fewer repeats for the synthetic demo.
  static RunConfig demo_preset();

  void validate() const;
  std::string hash() const;
  // Hash of only the sections a stage reads.
  std::string section_hash(std::string_view stage) const;
};

RunConfig load_run_config(const std::filesystem::path& path);

// Output root: explicit flag, else $BIOSSL_OUT, else ./biossl_out.
std::filesystem::path output_root(const std::optional<std::string>& flag);

struct Workspace {
  std::filesystem::path root;

  std::filesystem::path graph_file() const { return root / "graph" / "graph.bhng"; }
  std::filesystem::path graph_manifest() const { return root / "graph" / "manifest.json"; }
  std::filesystem::path sims_file() const { return root / "sims" / "similarities.tsv"; }
  std::filesystem::path sims_manifest() const { return root / "sims" / "manifest.json"; }
  std::filesystem::path pretrain_dir(const ComboEntry& c) const { return root / "pretrain" / c.id; }
  std::filesystem::path eval_file(const ComboEntry& c, ScenarioKind s) const;
  std::filesystem::path report_dir() const { return root / "report"; }
};

// Expected counts file: {"nodes": {...}, "edges": {...}, "total_nodes": n,
// "total_edges": m}; any subset of keys may be given.
struct CountCheck {
  bool ok = true;
  std::vector<std::string> diffs;
};
CountCheck check_counts(const TypeCounts& counts, const nlohmann::json& expected);

struct GraphStageResult {
  HetGraph graph;
  LoadReport load;
  std::string fingerprint;
};

GraphStageResult stage_build_graph(const Workspace& ws, const RunConfig& cfg, const std::filesystem::path& edges,
                                   const std::optional<std::filesystem::path>& expect_counts, std::ostream& log);

struct FeatureInputs {
  std::optional<std::filesystem::path> fingerprints;
  std::optional<std::filesystem::path> smiles;  // id<TAB>SMILES, hashed when no fingerprints are given
  std::optional<std::filesystem::path> sequences;
  std::optional<std::filesystem::path> modules;
};

SimTable stage_precompute_sims(const Workspace& ws, const RunConfig& cfg, const FeatureInputs& inputs,
                               std::ostream& log);

// Loads the graph and similarity artifacts, refusing a stale chain.
HetGraph load_graph_artifact(const Workspace& ws, const RunConfig& cfg);
SimTable load_sims_artifact(const Workspace& ws, const RunConfig& cfg, const HetGraph& g);

// Samples every task of the combination and trains one model.
TrainResult pretrain_model(const HetGraph& g, const SimTable* sims, const std::vector<TaskKind>& tasks,
                           const RunConfig& cfg, std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

void stage_pretrain(const Workspace& ws, const RunConfig& cfg, const ComboEntry& combo, std::ostream& log);

EvalReport evaluate_combo(const HetGraph& g, const SimTable* sims, const RunConfig& cfg, const ComboEntry& combo,
                          ScenarioKind scenario);
EvalReport stage_evaluate(const Workspace& ws, const RunConfig& cfg, const ComboEntry& combo, ScenarioKind scenario,
                          std::ostream& log);

// Aggregates every evaluation report under the workspace.
void stage_report(const Workspace& ws, std::ostream& log);

// Seed of the pretraining run used for a given repeat.
std::uint64_t pretrain_seed(const RunConfig& cfg, std::size_t repeat);

}  // namespace biossl
