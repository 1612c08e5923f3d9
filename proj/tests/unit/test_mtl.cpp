#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "biossl/eval.hpp"
#include "biossl/mtl.hpp"
#include "biossl/synthetic.hpp"
#include "oracles.hpp"

using namespace biossl;

namespace {

MTLConfig small_config() {
  MTLConfig c;
  c.encoder.hidden_heads = 2;
  c.encoder.hidden_dim = 4;
  c.encoder.output_heads = 2;
  c.encoder.embed_dim = 8;
  c.discriminator_hidden = 16;
  return c;
}

SyntheticData two_community_graph(std::uint64_t seed) {
  SyntheticConfig sc;
  sc.drugs = 40;
  sc.proteins = 40;
  sc.diseases = 20;
  sc.communities = 2;
  sc.seed = seed;
  return make_synthetic_biohn(sc);
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.data) best = std::max(best, std::abs(v));
  return best;
}

double param_distance(const Encoder& a, const Encoder& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  double total = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t k = 0; k < pa[i].value().size(); ++k)
      total += std::pow(pa[i].value().data[k] - pb[i].value().data[k], 2);
  return std::sqrt(total);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Discriminator, ZeroedTwoTaskIsUniform) {
  Rng rng(1);
  const HetGraph g = oracle::random_drug_graph(10, 0.3, rng);
  SharedPrivateModel model({TaskKind::EdgeMask, TaskKind::PairDistance}, g.num_nodes(), true, small_config(), rng);
  Mlp disc = model.discriminator();
  disc.zero();
  Matrix x(4, 8);
  for (double& v : x.data) v = rng.normal();
  const Matrix p = discriminator_forward(model, x);
  for (double v : p.data) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Discriminator, RowsSumToOne) {
  Rng rng(2);
  const HetGraph g = oracle::random_drug_graph(10, 0.3, rng);
  SharedPrivateModel model({TaskKind::ClusterPre, TaskKind::SimReg, TaskKind::PathClass}, g.num_nodes(), true,
                           small_config(), rng);
  Matrix x(6, 8);
  for (double& v : x.data) v = 3.0 * rng.normal();
  const Matrix p = discriminator_forward(model, x);
  ASSERT_EQ(p.cols, 3u);
  for (std::size_t r = 0; r < p.rows; ++r) {
    double s = 0.0;
    for (double v : p.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  EXPECT_THROW(discriminator_forward(model, Matrix(2, 5)), ShapeError);
}

TEST(Adversarial, ChanceDiscriminatorGivesLogTwo) {
  Rng rng(3);
  const std::vector<std::size_t> dims = {4, 6, 2};
  Mlp disc(dims, rng);
  disc.zero();
  const Tensor shared = Tensor::constant(Matrix(6, 4, 0.7));
  const std::vector<NodeIndex> nodes = {0, 1, 2, 3};
  const std::vector<std::uint32_t> labels = {0, 1, 0, 1};
  EXPECT_NEAR(adversarial_loss(disc, shared, nodes, labels, 1.0).item(), std::log(2.0), 1e-12);
  const std::vector<std::uint32_t> bad = {0, 1, 2, 1};
  EXPECT_THROW(adversarial_loss(disc, shared, nodes, bad, 1.0), InputError);
}

TEST(Adversarial, ZeroReversalScaleBlocksEncoderGradient) {
  Rng rng(4);
  const std::vector<std::size_t> dims = {4, 6, 2};
  const Mlp disc(dims, rng);
  Matrix m(5, 4);
  for (double& v : m.data) v = rng.normal();
  const Tensor shared = Tensor::parameter(m);
  const std::vector<NodeIndex> nodes = {0, 2, 4};
  const std::vector<std::uint32_t> labels = {0, 1, 1};
  adversarial_loss(disc, shared, nodes, labels, 0.0).backward();
  EXPECT_EQ(max_abs(shared.grad()), 0.0);
  EXPECT_GT(max_abs(disc.parameters().front().grad()), 0.0);
}

TEST(Orthogonality, Examples) {
  const std::vector<NodeIndex> nodes = {0, 1};
  const Tensor s = Tensor::constant(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}));
  const Tensor p_orth = Tensor::constant(Matrix::from_rows({{0.0, 2.0}, {-3.0, 0.0}}));
  EXPECT_EQ(orthogonality_loss(p_orth, s, nodes).item(), 0.0);
  EXPECT_DOUBLE_EQ(orthogonality_loss(s, s, nodes).item(), 1.0);
  EXPECT_THROW(orthogonality_loss(Tensor::constant(Matrix(2, 3)), s, nodes), ShapeError);
}

TEST(Orthogonality, MatchesHandComputedMean) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.index(10), w = 1 + rng.index(6);
    Matrix a(n, w), b(n, w);
    for (double& v : a.data) v = rng.normal();
    for (double& v : b.data) v = rng.normal();
    std::vector<NodeIndex> nodes;
    for (NodeIndex i = 0; i < n; i += 2) nodes.push_back(i);
    double expected = 0.0;
    for (NodeIndex i : nodes) {
      double dot = 0.0;
      for (std::size_t c = 0; c < w; ++c) dot += a(i, c) * b(i, c);
      expected += dot * dot;
    }
    expected /= static_cast<double>(nodes.size());
    EXPECT_NEAR(orthogonality_loss(Tensor::constant(a), Tensor::constant(b), nodes).item(), expected, 1e-12);

    double frob = 0.0;
    for (std::size_t c1 = 0; c1 < w; ++c1)
      for (std::size_t c2 = 0; c2 < w; ++c2) {
        double e = 0.0;
        for (NodeIndex i : nodes) e += a(i, c1) * b(i, c2);
        frob += e * e;
      }
    frob /= static_cast<double>(nodes.size());
    EXPECT_NEAR(orthogonality_loss(Tensor::constant(a), Tensor::constant(b), nodes, OrthoMode::BatchMatrix).item(),
                frob, 1e-12);
  }
}

TEST(TotalLoss, WeightedSum) {
  MTLConfig c;
  c.lambda_adv = 0.05;
  c.gamma_oc = 0.01;
  EXPECT_NEAR(total_step_loss(1.0, 2.0, 3.0, c), 1.13, 1e-15);
  c.lambda_adv = 0.0;
  c.gamma_oc = 0.0;
  EXPECT_EQ(total_step_loss(1.0, 2.0, 3.0, c), 1.0);
}

TEST(TotalLoss, SingleTaskHasNoAdversarialTerms) {
  Rng rng(6);
  const HetGraph g = oracle::random_drug_graph(12, 0.3, rng);
  const SharedPrivateModel model({TaskKind::ClusterPre}, g.num_nodes(), true, small_config(), rng);
  EXPECT_FALSE(model.adversarial());
  const AttentionGraph ag = attention_graph(g);
  const PretextBatch b = sample_cluster(g, 12, rng);
  const StepLosses l = step_losses(model, 0, b, ag, nullptr, small_config(), 1.0);
  EXPECT_FALSE(l.adversarial.defined());
  EXPECT_EQ(l.total.item(), l.task.item());
}

TEST(Config, ValidateRejectsNegativeWeights) {
  MTLConfig c;
  c.lambda_adv = -0.1;
  EXPECT_THROW(c.validate(), InputError);
  c = MTLConfig{};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(Export, WidthsAndPurity) {
  Rng rng(7);
  const HetGraph g = oracle::random_drug_graph(15, 0.3, rng);
  const MTLConfig c = small_config();
  const SharedPrivateModel three({TaskKind::ClusterPre, TaskKind::EdgeMask, TaskKind::SimCon}, g.num_nodes(), true,
                                 c, rng);
  const Matrix shared = export_embeddings(three, g);
  EXPECT_EQ(shared.rows, 15u);
  EXPECT_EQ(shared.cols, c.encoder.embed_dim);
  EXPECT_EQ(export_embeddings(three, g, ExportMode::Concat).cols, 4 * c.encoder.embed_dim);
  EXPECT_EQ(export_embeddings(three, g), shared);
}

TEST(Training, PrivateEncodersDriftFromShared) {
  const SyntheticData data = two_community_graph(8);
  Rng rng(8);
  MTLConfig c = small_config();
  c.epochs = 3;
  const std::vector<TaskKind> tasks = {TaskKind::EdgeMask, TaskKind::PairDistance};
  const std::vector<PretextBatch> batches = {sample_edge_mask(data.graph, 0.2, rng),
                                             sample_pair_distance(data.graph, 300, rng)};
  const TrainResult r = train_multitask(tasks, data.graph, batches, c, 8);
  EXPECT_GT(param_distance(r.model.shared(), r.model.private_encoder(0)), 0.0);
  EXPECT_GT(param_distance(r.model.shared(), r.model.private_encoder(1)), 0.0);
  EXPECT_GT(param_distance(r.model.private_encoder(0), r.model.private_encoder(1)), 0.0);
}

TEST(Training, SingleTaskReductionIsBitIdentical) {
  const SyntheticData data = two_community_graph(9);
  Rng rng(9);
  MTLConfig c = small_config();
  c.epochs = 4;
  const PretextBatch batch = sample_cluster(data.graph, data.graph.num_nodes(), rng);
  const TrainResult multi = train_multitask({TaskKind::ClusterPre}, data.graph, {batch}, c, 31);
  const SingleTaskResult single = train_single_task(TaskKind::ClusterPre, data.graph, batch, c, 31);
  std::stringstream a, b;
  save_model(a, multi.model, 31, multi.history.steps);
  save_checkpoint(b, {single.arch_hash, 31, single.history.steps}, single.named_parameters());
  EXPECT_EQ(a.str(), b.str());
}

TEST(Training, SameSeedSameCheckpoint) {
  const SyntheticData data = two_community_graph(10);
  Rng rng(10);
  MTLConfig c = small_config();
  c.epochs = 2;
  const std::vector<TaskKind> tasks = {TaskKind::ClusterPre, TaskKind::PairDistance};
  const std::vector<PretextBatch> batches = {sample_cluster(data.graph, 50, rng),
                                             sample_pair_distance(data.graph, 200, rng)};
  auto bytes = [&] {
    const TrainResult r = train_multitask(tasks, data.graph, batches, c, 77);
    std::stringstream s;
    save_model(s, r.model, 77, r.history.steps);
    return s.str();
  };
  EXPECT_EQ(bytes(), bytes());
}

TEST(Training, LossDecreasesOnToyGraph) {
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticData data = two_community_graph(100 + seed);
    Rng rng(seed);
    MTLConfig c = small_config();
    c.epochs = 30;
    c.lr = 5e-3;
    const std::vector<TaskKind> tasks = {TaskKind::EdgeMask, TaskKind::PairDistance};
    const std::vector<PretextBatch> batches = {sample_edge_mask(data.graph, 0.5, rng),
                                               sample_pair_distance(data.graph, 500, rng)};
    const TrainResult r = train_multitask(tasks, data.graph, batches, c, seed);
    ASSERT_EQ(r.history.total_loss.size(), c.epochs);
    ratios.push_back(r.history.total_loss.back() / r.history.total_loss.front());
  }
  EXPECT_LT(median(ratios), 0.8);
}

namespace {

// Task 0 sees only community-0 nodes and task 1 only community-1 nodes, so the
// discriminator can tell the tasks apart exactly when the shared embedding
// encodes the community. Separability is the discriminator's AUROC folded
// around 0.5.
double discriminator_separability(double grl_scale, std::uint64_t seed) {
  const SyntheticData data = two_community_graph(200 + seed);
  const HetGraph& g = data.graph;
  std::vector<ClusterSample> c0;
  std::vector<EdgeMaskSample> c1;
  for (NodeIndex v = 0; v < g.num_nodes(); ++v) {
    if (data.community[v] == 0) c0.push_back({v, clustering_coefficient(g, v)});
  }
  for (const auto& e : g.edges()) {
    if (data.community[e.u] == 1 && data.community[e.v] == 1) c1.push_back({e.u, e.v, static_cast<std::uint32_t>(e.etype)});
  }
  PretextBatch b0 = make_empty_batch(TaskKind::ClusterPre);
  b0.samples = c0;
  PretextBatch b1 = make_empty_batch(TaskKind::EdgeMask);
  b1.samples = c1;

  MTLConfig c = small_config();
  c.epochs = 300;  // two steps per epoch
  c.lr = 5e-3;
  c.discriminator_hidden = 64;
  c.lambda_adv = 1.0;
  c.grl_scale = grl_scale;
  const TrainResult r = train_multitask({TaskKind::ClusterPre, TaskKind::EdgeMask}, g, {b0, b1}, c, seed);

  const Matrix shared = export_embeddings(r.model, g);
  const std::vector<NodeIndex> n0 = b0.nodes(), n1 = b1.nodes();
  Matrix x(n0.size() + n1.size(), shared.cols);
  std::vector<double> labels;
  std::size_t row = 0;
  for (const auto* set : {&n0, &n1}) {
    for (NodeIndex v : *set) {
      std::copy(shared.row(v).begin(), shared.row(v).end(), x.row(row++).begin());
      labels.push_back(set == &n0 ? 0.0 : 1.0);
    }
  }
  const Matrix p = discriminator_forward(r.model, x);
  std::vector<double> scores;
  for (std::size_t i = 0; i < p.rows; ++i) scores.push_back(p(i, 1));
  const double a = auroc(scores, labels);
  return std::max(a, 1.0 - a);
}

}  // namespace

TEST(Training, ReversalPushesDiscriminatorTowardChance) {
  std::vector<double> without, with;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    without.push_back(discriminator_separability(0.0, seed));
    with.push_back(discriminator_separability(1.0, seed));
  }
  EXPECT_GE(median(without), 0.9);
  EXPECT_LE(median(with), median(without) - 0.2);
}
