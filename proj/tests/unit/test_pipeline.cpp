#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "biossl/combo.hpp"
#include "biossl/pipeline.hpp"
#include "biossl/report.hpp"
#include "biossl/synthetic.hpp"

using namespace biossl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("biossl_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SyntheticData tiny_data(std::uint64_t seed) {
  SyntheticConfig sc;
  sc.drugs = 16;
  sc.proteins = 16;
  sc.diseases = 8;
  sc.communities = 2;
  sc.sequence_length = 20;
  sc.seed = seed;
  return make_synthetic_biohn(sc);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + BIOSSL_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

EvalReport synthetic_report(const std::string& key, ScenarioKind s, double ddi, double dti) {
  const auto c = find_combo(key);
  EvalReport r;
  r.combo_id = c->id;
  r.combo = c->name;
  r.tag = c->tag;
  r.modal_size = c->modal_size;
  r.scenario = s;
  r.repeats = 2;
  r.config_hash = "h";
  r.cells.push_back({LinkKind::DDI, {ddi - 0.01, ddi + 0.01}, {ddi, ddi}, {0.01, 0.01}});
  r.cells.push_back({LinkKind::DTI, {dti, dti}, {dti, dti}, {0.01, 0.01}});
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(RunConfig, JsonRoundTripPreservesHash) {
  RunConfig c = RunConfig::demo_preset();
  c.seed = 9;
  c.mtl.lambda_adv = 0.125;
  c.sampling.edge_mask_ratio = 0.3;
  const RunConfig back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
  EXPECT_EQ(back.hash(), c.hash());
}

TEST(RunConfig, UnknownKeyIsSchemaError) {
  nlohmann::json j = RunConfig().to_json();
  j["mtl"]["lamda_adv"] = 0.1;
  EXPECT_THROW(RunConfig::from_json(j), SchemaError);
  nlohmann::json top = {{"sed", 3}};
  EXPECT_THROW(RunConfig::from_json(top), SchemaError);
}

TEST(RunConfig, MissingKeysKeepDefaults) {
  const RunConfig c = RunConfig::from_json(nlohmann::json::object());
  EXPECT_EQ(c.to_json().dump(), RunConfig().to_json().dump());
}

TEST(RunConfig, JobsDoNotChangeHash) {
  RunConfig a, b;
  b.jobs = 8;
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = a.seed + 1;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(RunConfig, SectionHashesTrackOnlyTheirSections) {
  RunConfig a, b;
  b.experiment.repeats = a.experiment.repeats + 1;
  EXPECT_EQ(a.section_hash("pretrain"), b.section_hash("pretrain"));
  EXPECT_EQ(a.section_hash("sims"), b.section_hash("sims"));
  EXPECT_NE(a.section_hash("evaluate"), b.section_hash("evaluate"));
  RunConfig s;
  s.sim.scoring.gap_open = a.sim.scoring.gap_open + 1;
  EXPECT_NE(a.section_hash("sims"), s.section_hash("sims"));
  EXPECT_EQ(a.section_hash("pretrain"), s.section_hash("pretrain"));
  EXPECT_THROW(a.section_hash("bogus"), InputError);
}

TEST(RunConfig, ValidateRejectsBadValues) {
  RunConfig c;
  c.sampling.edge_mask_ratio = 0.0;
  EXPECT_THROW(c.validate(), SchemaError);
  c = RunConfig();
  c.experiment.repeats = 0;
  EXPECT_THROW(c.validate(), SchemaError);
  EXPECT_NO_THROW(RunConfig().validate());
}

TEST(RunConfig, PretrainSeedsDifferPerRepeat) {
  RunConfig c;
  EXPECT_NE(pretrain_seed(c, 0), pretrain_seed(c, 1));
  EXPECT_EQ(pretrain_seed(c, 3), pretrain_seed(c, 3));
}

TEST(Catalogue, CombinationTagsAndModalSizes) {
  const auto& cat = combo_catalogue();
  ASSERT_EQ(cat.size(), 21u);
  struct Row {
    const char* id;
    const char* name;
    const char* tag;
    int modal;
  };
  const Row rows[] = {
      {"C1", "EdgeMask-PairDistance", "L-G", 2},
      {"C2", "ClusterPre-PathClass", "L-G", 2},
      {"C3", "ClusterPre-PairDistance", "L-G", 1},
      {"C4", "EdgeMask-PathClass", "L-G", 1},
      {"C5", "PairDistance-PathClass", "G-G", 2},
      {"C6", "PathClass-SimCon", "G-W", 2},
      {"C7", "PairDistance-SimCon", "G-W", 2},
      {"C8", "EdgeMask-SimReg", "L-S", 2},
      {"C9", "PairDistance-SimReg", "L-S", 2},
      {"C10", "ClusterPre-EdgeMask", "L-L", 2},
      {"C11", "SimReg-SimCon", "S-W", 1},
      {"C12", "ClusterPre-PairDistance-PathClass", "L-G-G", 2},
      {"C13", "ClusterPre-PathClass-SimReg", "L-G-S", 3},
      {"C14", "PairDistance-SimReg-SimCon", "G-S-W", 2},
      {"C15", "PairDistance-EdgeMask-SimCon", "G-L-W", 3},
  };
  for (const Row& r : rows) {
    const auto c = find_combo(r.id);
    ASSERT_TRUE(c) << r.id;
    EXPECT_EQ(c->name, r.name);
    EXPECT_EQ(c->tag, r.tag) << r.id;
    EXPECT_EQ(c->modal_size, r.modal) << r.id;
    EXPECT_EQ(modality_count(c->tasks), r.modal) << r.id;
  }
  std::set<std::string> ids;
  int singles = 0;
  for (const auto& c : cat) {
    ids.insert(c.id);
    if (c.single()) ++singles;
    EXPECT_EQ(combo_name(c.tasks), c.name);
  }
  EXPECT_EQ(ids.size(), 21u);
  EXPECT_EQ(singles, 6);
}

TEST(Catalogue, LookupByNameIgnoresCaseAndOrder) {
  const auto a = find_combo("EdgeMask-PairDistance");
  ASSERT_TRUE(a);
  EXPECT_EQ(a->tag, "L-G");
  const auto b = find_combo("pairdistance-edgemask");
  ASSERT_TRUE(b);
  EXPECT_EQ(b->id, a->id);
  EXPECT_EQ(find_combo("c1")->id, "C1");
  EXPECT_EQ(find_combo("SimCon")->tasks.size(), 1u);
  EXPECT_FALSE(find_combo("EdgeMask-Nothing"));
  EXPECT_FALSE(find_combo("C16"));
}

TEST(CountCheck, ReportsDifferences) {
  const HetGraph g = tiny_data(1).graph;
  const TypeCounts c = g.counts();
  EXPECT_TRUE(check_counts(c, {{"total_nodes", g.num_nodes()}}).ok);
  const CountCheck bad = check_counts(c, {{"total_nodes", g.num_nodes() + 1}, {"nodes", {{"drug", 1}}}});
  EXPECT_FALSE(bad.ok);
  EXPECT_EQ(bad.diffs.size(), 2u);
  EXPECT_THROW(check_counts(c, {{"nodes", {{"enzyme", 1}}}}), SchemaError);
}

TEST(Stages, StaleChainIsRefused) {
  const fs::path root = fresh_dir("stale");
  const SyntheticFiles files = write_synthetic(tiny_data(3), root / "input");
  const Workspace ws{root / "out"};
  RunConfig cfg;
  std::ostringstream log;

  EXPECT_THROW(load_graph_artifact(ws, cfg), InputError);
  const GraphStageResult built = stage_build_graph(ws, cfg, files.edges, std::nullopt, log);
  EXPECT_EQ(load_graph_artifact(ws, cfg).num_nodes(), built.graph.num_nodes());

  FeatureInputs in;
  in.fingerprints = files.fingerprints;
  in.sequences = files.sequences;
  in.modules = files.modules;
  stage_precompute_sims(ws, cfg, in, log);
  EXPECT_NO_THROW(load_sims_artifact(ws, cfg, built.graph));

  RunConfig changed = cfg;
  changed.sim.scoring.gap_open += 1;
  EXPECT_THROW(load_sims_artifact(ws, changed, built.graph), InputError);

  const SyntheticFiles other = write_synthetic(tiny_data(4), root / "other");
  const Workspace ws2{root / "out2"};
  stage_build_graph(ws2, cfg, other.edges, std::nullopt, log);
  fs::copy_file(ws2.graph_file(), ws.graph_file(), fs::copy_options::overwrite_existing);
  EXPECT_THROW(load_graph_artifact(ws, cfg), InputError);
  fs::remove_all(root);
}

TEST(Stages, ExpectedCountMismatchIsSchemaError) {
  const fs::path root = fresh_dir("counts");
  const SyntheticFiles files = write_synthetic(tiny_data(5), root / "input");
  {
    std::ofstream out(root / "expect.json");
    out << R"({"total_nodes": 1})";
  }
  std::ostringstream log;
  EXPECT_THROW(stage_build_graph(Workspace{root / "out"}, RunConfig(), files.edges, root / "expect.json", log),
               SchemaError);
  fs::remove_all(root);
}

TEST(Report, TableOrdersByCatalogueAndScenario) {
  std::vector<EvalReport> reps{synthetic_report("C2", ScenarioKind::ColdDrug, 0.7, 0.6),
                               synthetic_report("T1", ScenarioKind::Warm, 0.8, 0.7),
                               synthetic_report("C2", ScenarioKind::Warm, 0.9, 0.8)};
  const auto lines = lines_of(report_table_csv(reps));
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[1].rfind("T1,", 0), 0u);
  EXPECT_NE(lines[2].find("C2,ClusterPre-PathClass,L-G,2,warm,2,0.900000,0.010000,0.900000,0.000000"),
            std::string::npos);
  EXPECT_NE(lines[3].find(",cold,"), std::string::npos);
}

TEST(Report, HeatmapRowsAreMinMaxNormalized) {
  std::vector<EvalReport> reps{synthetic_report("C1", ScenarioKind::Warm, 0.6, 0.7),
                               synthetic_report("C5", ScenarioKind::Warm, 0.8, 0.7),
                               synthetic_report("C3", ScenarioKind::Warm, 0.7, 0.7),
                               synthetic_report("C4", ScenarioKind::ColdDrug, 0.1, 0.1)};
  const auto lines = lines_of(report_heatmap_csv(reps, ScenarioKind::Warm));
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "metric,EdgeMask-PairDistance,ClusterPre-PairDistance,PairDistance-PathClass");
  EXPECT_EQ(lines[1], "DDI-AUROC,0.000000,0.500000,1.000000");
  EXPECT_EQ(lines[3], "DTI-AUROC,0.000000,0.000000,0.000000");
}

TEST(Report, JsonRoundTrip) {
  const EvalReport r = synthetic_report("C9", ScenarioKind::ColdDrug, 0.75, 0.65);
  std::stringstream s;
  write_report_json(s, r);
  const EvalReport back = read_report_json(s);
  EXPECT_EQ(back.combo_id, "C9");
  EXPECT_EQ(back.scenario, ScenarioKind::ColdDrug);
  ASSERT_EQ(back.cells.size(), 2u);
  EXPECT_EQ(back.cells[0].auroc, r.cells[0].auroc);
  std::istringstream junk("{\"combo_id\": 3");
  EXPECT_THROW(read_report_json(junk), InputError);
}

TEST(Cli, ExitCodes) {
  const fs::path root = fresh_dir("cli");
  const std::string out = "--out \"" + (root / "out").string() + "\" ";
  {
    std::ofstream bad(root / "bad.tsv");
    bad << "drug\tD1\tprotein\tP1\tdrug-protein\nthis row is broken\n";
  }
  EXPECT_EQ(run_cli(out + "build-graph --edges \"" + (root / "bad.tsv").string() + "\""), 2);
  EXPECT_EQ(run_cli(out + "build-graph --edges \"" + (root / "absent.tsv").string() + "\""), 2);
  EXPECT_EQ(run_cli(out + "pretrain --combo C1"), 2);
  EXPECT_EQ(run_cli(out + "evaluate --combo C1 --scenario warm"), 2);
  EXPECT_EQ(run_cli(out + "report"), 2);
  EXPECT_EQ(run_cli(out + "frobnicate"), 2);

  const SyntheticFiles files = write_synthetic(tiny_data(6), root / "input");
  EXPECT_EQ(run_cli(out + "build-graph --edges \"" + files.edges.string() + "\""), 0);
  EXPECT_EQ(run_cli(out + "pretrain --combo EdgeMask-Nothing"), 2);
  EXPECT_EQ(run_cli(out + "pretrain --combo SimReg"), 2);
  fs::remove_all(root);
}
