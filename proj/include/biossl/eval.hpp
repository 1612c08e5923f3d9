#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biossl/graph.hpp"
#include "biossl/nn.hpp"

namespace biossl {

enum class LinkKind : std::uint8_t { DDI = 0, DTI = 1 };
enum class ScenarioKind : std::uint8_t { Warm = 0, ColdDrug = 1 };

std::string_view to_string(LinkKind k);
std::string_view to_string(ScenarioKind s);
std::optional<LinkKind> parse_link_kind(std::string_view s);
// Accepts "warm" and "cold" as well as the full names.
std::optional<ScenarioKind> parse_scenario(std::string_view s);
EdgeType link_edge_type(LinkKind k);

// i is always a drug; j is a drug (DDI) or a protein (DTI).
struct LinkPair {
  NodeIndex i = 0;
  NodeIndex j = 0;
  double label = 0.0;
  friend bool operator==(const LinkPair&, const LinkPair&) = default;
};

struct LinkDataset {
  LinkKind kind = LinkKind::DDI;
  std::vector<LinkPair> pairs;  // positives first, then negatives
  std::size_t positives() const;
};

// Every edge of the kind's type as a positive and as many negatives drawn
// uniformly from same-typed non-edges.
LinkDataset build_link_dataset(const HetGraph& g, LinkKind kind, Rng& rng);

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Warm;
  double train_frac = 0.9;
  double holdout_drug_frac = 0.05;
};

struct LinkSplit {
  std::vector<LinkPair> train;
  std::vector<LinkPair> test;
  std::vector<NodeIndex> held_out_drugs;  // cold start only, sorted
};

// Warm: stratified pair-level split. Cold: a fraction of the dataset's drugs is
// held out; every positive touching them goes to test, and negatives are
// redrawn so train negatives avoid held-out drugs and test negatives touch
// them, each matching its positive count.
LinkSplit split_dataset(const HetGraph& g, const LinkDataset& dataset, const ScenarioConfig& scenario, Rng& rng);

// `points` equidistant values spanning [lo, hi].
std::vector<double> lr_grid(double lo = 5e-4, double hi = 1.0, std::size_t points = 10);

struct DecoderConfig {
  std::size_t hidden = 64;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  std::vector<double> lr_grid = biossl::lr_grid();
  double validation_frac = 0.1;
  double weight_decay = 0.0;
  bool standardize = true;  // z-score embedding columns before the MLP
};

struct Decoder {
  Mlp mlp;
  double lr = 0.0;
  bool symmetric = false;
  std::vector<double> validation_auroc;  // per grid point; NaN marks a diverged run
  std::vector<double> column_mean;       // empty when inputs are used as given
  std::vector<double> column_scale;
};

// Pair feature = [emb_i, emb_j]; symmetric kinds also train on [emb_j, emb_i].
// With more than one grid point the learning rate is picked by validation
// AUROC on a stratified carve-out, then the decoder is refit on all of train.
Decoder train_decoder(const Matrix& embeddings, std::span<const LinkPair> train, bool symmetric,
                      const DecoderConfig& config, Rng& rng);

// Probabilities; symmetric decoders average both endpoint orders.
std::vector<double> score_pairs(const Decoder& decoder, const Matrix& embeddings, std::span<const LinkPair> pairs);

// Midrank AUROC. Throws MetricError unless both classes are present.
double auroc(std::span<const double> scores, std::span<const double> labels);
// Average precision with tied scores grouped into one threshold.
double aupr(std::span<const double> scores, std::span<const double> labels);

double mean_of(std::span<const double> v);
// Population standard deviation.
double std_of(std::span<const double> v);

struct CellResult {
  LinkKind kind = LinkKind::DDI;
  std::vector<double> auroc;
  std::vector<double> aupr;
  std::vector<double> chosen_lr;
};

struct EvalReport {
  std::string combo_id;
  std::string combo;
  std::string tag;
  int modal_size = 1;
  ScenarioKind scenario = ScenarioKind::Warm;
  std::size_t repeats = 0;
  std::string config_hash;
  std::vector<CellResult> cells;

  const CellResult* cell(LinkKind k) const;
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  DecoderConfig decoder;
  std::size_t repeats = 10;
  std::uint64_t seed = 1;
  bool exclude_test_edges = true;
  bool repretrain_per_repeat = false;
  std::vector<LinkKind> kinds{LinkKind::DDI, LinkKind::DTI};
  std::size_t jobs = 1;
};

// Returns node embeddings pretrained on the given graph for a repeat. Called
// concurrently when jobs > 1.
using EmbeddingProvider = std::function<Matrix(const HetGraph& pretrain_graph, std::size_t repeat)>;

// Each repeat draws fresh datasets and splits, obtains embeddings (pretrained
// per repeat when test edges are excluded or re-pretraining is requested,
// otherwise once on the full graph), then trains and scores a decoder per kind.
EvalReport run_experiment(const HetGraph& g, const ExperimentConfig& config, const EmbeddingProvider& provider);

}  // namespace biossl
