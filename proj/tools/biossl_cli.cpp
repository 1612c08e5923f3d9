#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "biossl/combo.hpp"
#include "biossl/pipeline.hpp"
#include "biossl/synthetic.hpp"
#include "oracles.hpp"

namespace {

using namespace biossl;
namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> repeats;
  std::optional<std::size_t> epochs;
};

RunConfig resolve_config(const GlobalOptions& g, RunConfig base = {}) {
  RunConfig cfg = g.config.empty() ? base : load_run_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.jobs) cfg.jobs = *g.jobs;
  if (g.repeats) cfg.experiment.repeats = *g.repeats;
  if (g.epochs) cfg.mtl.epochs = *g.epochs;
  cfg.validate();
  return cfg;
}

std::vector<ComboEntry> select_combos(const std::vector<std::string>& names, bool all) {
  if (all) return combo_catalogue();
  if (names.empty()) throw InputError("name a combination with --combo or pass --all-combos");
  std::vector<ComboEntry> out;
  for (const auto& n : names) {
    auto c = find_combo(n);
    if (!c) throw InputError("unknown task or combination '" + n + "'");
    out.push_back(*c);
  }
  return out;
}

std::vector<ScenarioKind> select_scenarios(const std::string& s) {
  if (s == "both") return {ScenarioKind::Warm, ScenarioKind::ColdDrug};
  const auto k = parse_scenario(s);
  if (!k) throw InputError("scenario must be warm, cold or both");
  return {*k};
}

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

int run(int argc, char** argv) {
  CLI::App app{"Self-supervised pretraining and link prediction on biomedical heterogeneous networks", "biossl"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--out", g.out, "Output root (default $BIOSSL_OUT or ./biossl_out)");
  app.add_option("--seed", g.seed, "Master seed override");
  app.add_option("--jobs", g.jobs, "Worker threads for independent repeats and similarity pairs");
  app.add_option("--repeats", g.repeats, "Evaluation repeats override");
  app.add_option("--epochs", g.epochs, "Pretraining epochs override");

  auto* build = app.add_subcommand("build-graph", "Load and validate an edge list");
  std::string edges, expect;
  build->add_option("--edges", edges, "Edge list TSV")->required();
  build->add_option("--expect-counts", expect, "JSON file of expected node and edge counts");

  auto* sims = app.add_subcommand("precompute-sims", "Score attribute similarities per node type");
  std::string fingerprints, smiles, sequences, modules;
  sims->add_option("--fingerprints", fingerprints, "Drug fingerprints: id, hex bits, width");
  sims->add_option("--smiles", smiles, "Drug SMILES (hashed fingerprints; synthetic use only)");
  sims->add_option("--sequences", sequences, "Protein FASTA");
  sims->add_option("--modules", modules, "Disease modules: id, comma-separated protein ids");

  auto* pretrain = app.add_subcommand("pretrain", "Pretrain a task or combination");
  std::vector<std::string> pre_combos;
  bool pre_all = false;
  pretrain->add_option("--combo", pre_combos, "Catalogue id or task names joined with '-'");
  pretrain->add_flag("--all-combos", pre_all, "Every catalogue entry");

  auto* evaluate = app.add_subcommand("evaluate", "Downstream DDI and DTI link prediction");
  std::vector<std::string> eval_combos;
  bool eval_all = false;
  std::string scenario = "warm";
  std::optional<bool> repretrain, exclude;
  evaluate->add_option("--combo", eval_combos, "Catalogue id or task names joined with '-'");
  evaluate->add_flag("--all-combos", eval_all, "Every catalogue entry");
  evaluate->add_option("--scenario", scenario, "warm, cold or both")->check(CLI::IsMember({"warm", "cold", "both"}));
  evaluate->add_flag("--repretrain-per-repeat{true}", repretrain, "Pretrain again for every repeat");
  evaluate->add_option("--exclude-test-edges", exclude, "Drop test positives from the pretraining graph");

  auto* report = app.add_subcommand("report", "Aggregate evaluation results into tables");

  auto* demo = app.add_subcommand("demo", "Run the whole pipeline on a seeded synthetic network");
  bool demo_all = false;
  std::string demo_scenario = "warm";
  demo->add_flag("--all-combos", demo_all, "Evaluate every catalogue entry instead of the singles and one triple");
  demo->add_option("--scenario", demo_scenario, "warm, cold or both")->check(CLI::IsMember({"warm", "cold", "both"}));

  auto* selftest = app.add_subcommand("selftest", "Check the library against its reference oracles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const Workspace ws{output_root(g.out.empty() ? std::nullopt : std::optional<std::string>(g.out))};
  std::ostream& log = std::cout;

  if (*build) {
    const RunConfig cfg = resolve_config(g);
    stage_build_graph(ws, cfg, edges, opt_path(expect), log);
  } else if (*sims) {
    const RunConfig cfg = resolve_config(g);
    stage_precompute_sims(ws, cfg, {opt_path(fingerprints), opt_path(smiles), opt_path(sequences), opt_path(modules)},
                          log);
  } else if (*pretrain) {
    const RunConfig cfg = resolve_config(g);
    for (const auto& c : select_combos(pre_combos, pre_all)) stage_pretrain(ws, cfg, c, log);
  } else if (*evaluate) {
    RunConfig cfg = resolve_config(g);
    if (repretrain) cfg.experiment.repretrain_per_repeat = *repretrain;
    if (exclude) cfg.experiment.exclude_test_edges = *exclude;
    for (ScenarioKind s : select_scenarios(scenario)) {
      for (const auto& c : select_combos(eval_combos, eval_all)) stage_evaluate(ws, cfg, c, s, log);
    }
  } else if (*report) {
    stage_report(ws, log);
  } else if (*demo) {
    const RunConfig cfg = resolve_config(g, RunConfig::demo_preset());
    const SyntheticData data = make_synthetic_biohn();
    const SyntheticFiles files = write_synthetic(data, ws.root / "demo_data");
    log << "synthetic network written to " << (ws.root / "demo_data").string() << "\n";
    stage_build_graph(ws, cfg, files.edges, std::nullopt, log);
    stage_precompute_sims(ws, cfg, {files.fingerprints, std::nullopt, files.sequences, files.modules}, log);
    std::vector<ComboEntry> combos;
    if (demo_all) {
      combos = combo_catalogue();
    } else {
      for (const auto& c : combo_catalogue()) {
        if (c.single()) combos.push_back(c);
      }
      combos.push_back(*find_combo("ClusterPre-PathClass-SimReg"));
    }
    if (fs::exists(ws.root / "eval")) fs::remove_all(ws.root / "eval");
    for (ScenarioKind s : select_scenarios(demo_scenario)) {
      for (const auto& c : combos) stage_evaluate(ws, cfg, c, s, log);
    }
    stage_report(ws, log);
  } else if (*selftest) {
    return oracle::run_oracle_selftest(log) ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const biossl::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
