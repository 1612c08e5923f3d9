#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "biossl/nn.hpp"
#include "oracles.hpp"

using namespace biossl;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& x : m.data) x = rng.uniform(-scale, scale);
  return m;
}

// Reduces any tensor to a scalar with fixed random weights so every output
// coordinate reaches the check.
Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
  Rng rng(seed);
  return ops::sum(ops::mul(t, Tensor::constant(random_matrix(t.rows(), t.cols(), rng))));
}

constexpr double kTol = 1e-4;

}  // namespace

TEST(Ops, SoftmaxOfZerosIsUniform) {
  const Tensor s = ops::softmax_rows(Tensor::constant(Matrix(1, 4, 0.0)));
  for (double v : s.value().data) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Ops, SoftmaxStaysFiniteForLargeInputs) {
  const Tensor s = ops::softmax_rows(Tensor::constant(Matrix::from_rows({{1000.0, -1000.0, 999.0}})));
  for (double v : s.value().data) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(s.value().data[0] + s.value().data[2], 1.0, 1e-12);
}

TEST(Ops, CosineOfSelfIsOne) {
  Rng rng(1);
  const Tensor u = Tensor::constant(random_matrix(5, 7, rng));
  const Matrix cos = ops::row_cosine(u, u).value();
  for (double v : cos.data) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Ops, MseGradientVanishesAtPerfectFit) {
  const Matrix target = Matrix::from_rows({{0.3, -1.0}, {2.0, 0.5}});
  const Tensor p = Tensor::parameter(target);
  ops::mse(p, target).backward();
  for (double g : p.grad().data) EXPECT_EQ(g, 0.0);
}

TEST(Ops, ShapeMismatchThrows) {
  const Tensor a = Tensor::constant(Matrix(2, 3));
  const Tensor b = Tensor::constant(Matrix(2, 2));
  EXPECT_THROW(ops::matmul(a, a), ShapeError);
  EXPECT_THROW(ops::add(a, b), ShapeError);
}

TEST(Ops, NanTripsNumericFault) {
  Matrix m(1, 2, 0.0);
  m.data[0] = std::nan("");
  EXPECT_THROW(ops::sigmoid(Tensor::constant(m)), NumericFault);
}

TEST(Ops, PrimitivesMatchFiniteDifferencesOnRandomShapes) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(5), k = 1 + rng.index(5), m = 1 + rng.index(5);
    const Tensor a = Tensor::parameter(random_matrix(n, k, rng));
    const Tensor b = Tensor::parameter(random_matrix(k, m, rng));
    const Tensor c = Tensor::parameter(random_matrix(n, k, rng));
    const Tensor bias = Tensor::parameter(random_matrix(1, k, rng));
    const Tensor n_by_m = Tensor::parameter(random_matrix(n, m, rng));
    std::vector<std::uint32_t> labels(n), rows(n);
    std::vector<double> binary(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<std::uint32_t>(rng.index(k));
      rows[i] = static_cast<std::uint32_t>(rng.index(n));
      binary[i] = rng.coin() ? 1.0 : 0.0;
    }
    const Matrix target = random_matrix(n, k, rng);
    const std::uint64_t w = 100 + trial;
    auto loss = [&]() {
      Tensor acc = weighted_sum(ops::matmul(a, b), w);
      acc = ops::add(acc, weighted_sum(ops::matmul_tn(a, n_by_m), w + 1));
      acc = ops::add(acc, weighted_sum(ops::sub(ops::mul(a, c), ops::scale(c, 0.7)), w + 2));
      acc = ops::add(acc, weighted_sum(ops::add_row(a, bias), w + 3));
      acc = ops::add(acc, weighted_sum(ops::concat_cols({a, c}), w + 4));
      acc = ops::add(acc, weighted_sum(ops::gather_rows(c, rows), w + 5));
      acc = ops::add(acc, weighted_sum(ops::leaky_relu(a, 0.2), w + 6));
      acc = ops::add(acc, weighted_sum(ops::relu(c), w + 7));
      acc = ops::add(acc, weighted_sum(ops::elu(a), w + 8));
      acc = ops::add(acc, weighted_sum(ops::sigmoid(c), w + 9));
      acc = ops::add(acc, weighted_sum(ops::softmax_rows(a), w + 10));
      acc = ops::add(acc, weighted_sum(ops::row_dot(a, c), w + 11));
      acc = ops::add(acc, weighted_sum(ops::row_cosine(a, c), w + 12));
      acc = ops::add(acc, ops::mean(ops::squared_norm(c)));
      acc = ops::add(acc, ops::mse(a, target));
      acc = ops::add(acc, ops::cross_entropy(c, labels));
      acc = ops::add(acc, ops::bce_with_logits(ops::row_dot(a, c), binary));
      return acc;
    };
    const auto rep = oracle::check_gradients(loss, {{"a", a}, {"b", b}, {"c", c}, {"bias", bias}, {"nm", n_by_m}});
    ASSERT_LT(rep.max_rel_error, kTol) << "trial " << trial << " worst " << rep.worst;
  }
}

TEST(Ops, SegmentSoftmaxMatchesFiniteDifferences) {
  Rng rng(3);
  const std::vector<std::size_t> offsets = {0, 2, 3, 7};
  const Tensor a = Tensor::parameter(random_matrix(7, 3, rng));
  const auto rep = oracle::check_gradients([&] { return weighted_sum(ops::segment_softmax(a, offsets), 9); }, {{"a", a}});
  EXPECT_LT(rep.max_rel_error, kTol);
  const Matrix s = ops::segment_softmax(a, offsets).value();
  for (std::size_t seg = 0; seg + 1 < offsets.size(); ++seg) {
    for (std::size_t c = 0; c < 3; ++c) {
      double total = 0.0;
      for (std::size_t r = offsets[seg]; r < offsets[seg + 1]; ++r) total += s(r, c);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Ops, GradientReversalFlipsSign) {
  const Tensor x = Tensor::parameter(Matrix::from_rows({{1.0, 2.0}}));
  ops::sum(ops::gradient_reversal(x, 0.5)).backward();
  EXPECT_EQ(x.grad().data, (std::vector<double>{-0.5, -0.5}));
  x.zero_grad();
  ops::sum(ops::gradient_reversal(x, 0.0)).backward();
  EXPECT_EQ(x.grad().data, (std::vector<double>{0.0, 0.0}));
}

TEST(Gat, SingleNodeIsProjection) {
  Rng rng(4);
  const HetGraph g = HetGraph::from_parts({{0, NodeType::Drug, "A"}}, {});
  const AttentionGraph ag = attention_graph(g);
  GatLayer layer(3, 2, 4, true, 0.2, rng);
  const Tensor x = Tensor::constant(random_matrix(1, 3, rng));
  const Matrix h = layer.forward(ag, &x).value();
  const Matrix wx = ops::add_row(ops::matmul(x, layer.weight()), layer.bias()).value();
  ASSERT_TRUE(h.same_shape(wx));
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(h.data[i], wx.data[i], 1e-14);
}

TEST(Gat, AttentionRowsAreDistributions) {
  Rng rng(5);
  const HetGraph g = oracle::random_drug_graph(40, 0.1, rng);
  const AttentionGraph ag = attention_graph(g);
  const Matrix wh = random_matrix(40, 3 * 4, rng, 3.0);
  const Matrix attn = random_matrix(3, 8, rng, 3.0);
  const Matrix alpha = ops::gat_attention_weights(wh, attn, ag, 3, 0.2);
  for (std::size_t v = 0; v < ag.num_nodes(); ++v) {
    for (std::size_t h = 0; h < 3; ++h) {
      double total = 0.0;
      for (std::size_t e = ag.offsets[v]; e < ag.offsets[v + 1]; ++e) {
        EXPECT_GE(alpha(e, h), 0.0);
        total += alpha(e, h);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Gat, LayerGradientsMatchFiniteDifferences) {
  Rng rng(6);
  const HetGraph g = oracle::random_drug_graph(5, 0.5, rng);
  const AttentionGraph ag = attention_graph(g);
  GatLayer layer(3, 2, 3, true, 0.2, rng);
  const Tensor x = Tensor::parameter(random_matrix(5, 3, rng));
  std::vector<NamedTensor> params = {{"x", x}};
  layer.append_parameters("gat", params);
  const auto rep = oracle::check_gradients([&] { return ops::sum(layer.forward(ag, &x)); }, params);
  EXPECT_LT(rep.max_rel_error, kTol) << rep.worst;
}

TEST(Encoder, ThirtyNodeGradientCheck) {
  Rng rng(7);
  const HetGraph g = oracle::random_drug_graph(30, 0.1, rng);
  const AttentionGraph ag = attention_graph(g);
  EncoderConfig cfg;
  cfg.hidden_heads = 2;
  cfg.hidden_dim = 3;
  cfg.output_heads = 2;
  cfg.embed_dim = 4;
  const Encoder enc(30, true, cfg, rng);
  std::vector<NamedTensor> params;
  enc.append_parameters("enc", params);
  const auto rep = oracle::check_gradients([&] { return weighted_sum(enc.forward(ag), 3); }, params);
  EXPECT_LT(rep.max_rel_error, kTol) << rep.worst;
}

TEST(Encoder, ZeroInputAndZeroBiasGiveZeroEmbeddings) {
  Rng rng(8);
  const HetGraph g = oracle::random_drug_graph(10, 0.3, rng);
  const AttentionGraph ag = attention_graph(g);
  const Encoder enc(5, false, EncoderConfig{}, rng);
  const Tensor x = Tensor::constant(Matrix(10, 5, 0.0));
  const Tensor out = enc.forward(ag, &x);
  for (double v : out.value().data) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, SameSeedSameEmbeddings) {
  Rng g_rng(9);
  const HetGraph g = oracle::random_drug_graph(25, 0.2, g_rng);
  const AttentionGraph ag = attention_graph(g);
  Rng r1(42), r2(42);
  const Encoder a(25, true, EncoderConfig{}, r1), b(25, true, EncoderConfig{}, r2);
  EXPECT_EQ(a.forward(ag).value(), b.forward(ag).value());
}

TEST(Encoder, PermutationEquivariant) {
  Rng rng(10);
  const std::size_t n = 20;
  const HetGraph g = oracle::random_drug_graph(n, 0.2, rng);
  std::vector<NodeIndex> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span(perm));
  // perm[old] = new index
  std::vector<NodeRef> nodes(n);
  for (NodeIndex v = 0; v < n; ++v) nodes[perm[v]] = {perm[v], NodeType::Drug, g.node(v).external_id};
  std::vector<EdgeRec> edges;
  for (const auto& e : g.edges()) edges.push_back({perm[e.u], perm[e.v], e.etype});
  const HetGraph pg = HetGraph::from_parts(nodes, edges);

  const Matrix x = random_matrix(n, 6, rng);
  Matrix px(n, 6);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t c = 0; c < 6; ++c) px(perm[v], c) = x(v, c);

  const Encoder enc(6, false, EncoderConfig{}, rng);
  const AttentionGraph ag = attention_graph(g), pag = attention_graph(pg);
  const Tensor tx = Tensor::constant(x), tpx = Tensor::constant(px);
  const Matrix out = enc.forward(ag, &tx).value();
  const Matrix pout = enc.forward(pag, &tpx).value();
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t c = 0; c < out.cols; ++c) EXPECT_NEAR(pout(perm[v], c), out(v, c), 1e-12);
  }
}

TEST(Encoder, SymmetricNodesGetIdenticalOutputs) {
  const HetGraph g = HetGraph::from_parts({{0, NodeType::Drug, "A"}, {1, NodeType::Drug, "B"}},
                                          {{0, 1, EdgeType::DrugDrug}});
  Rng rng(11);
  const Encoder enc(3, false, EncoderConfig{}, rng);
  const Tensor x = Tensor::constant(Matrix::from_rows({{0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}}));
  const Matrix out = enc.forward(attention_graph(g), &x).value();
  for (std::size_t c = 0; c < out.cols; ++c) EXPECT_EQ(out(0, c), out(1, c));
}

TEST(Adam, FirstStepOnSquareMovesByLearningRate) {
  const Tensor theta = Tensor::parameter(Matrix(1, 1, 1.0));
  Adam opt(AdamConfig{.lr = 0.1, .weight_decay = 0.0});
  ops::sum(ops::mul(theta, theta)).backward();
  opt.step({theta});
  EXPECT_NEAR(theta.value().data[0], 0.9, 1e-6);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  const Tensor theta = Tensor::parameter(Matrix::from_rows({{0.5, -2.0}}));
  Adam opt(AdamConfig{.lr = 0.1, .weight_decay = 0.0});
  opt.step({theta});
  EXPECT_EQ(theta.value(), Matrix::from_rows({{0.5, -2.0}}));
}

TEST(Adam, NonFiniteGradientThrows) {
  Tensor theta = Tensor::parameter(Matrix(1, 1, 1.0));
  theta.mutable_grad().data[0] = std::numeric_limits<double>::infinity();
  Adam opt;
  EXPECT_THROW(opt.step({theta}), NumericFault);
}

TEST(Adam, IdenticalSeedsGiveIdenticalTrajectories) {
  auto run = [] {
    Rng rng(3);
    const Tensor p = Tensor::parameter(random_matrix(3, 3, rng));
    const Matrix target = random_matrix(3, 3, rng);
    Adam opt(AdamConfig{.lr = 0.05});
    for (int s = 0; s < 20; ++s) {
      zero_grads({p});
      ops::mse(p, target).backward();
      opt.step({p});
    }
    return p.value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripAndArchMismatch) {
  Rng rng(12);
  const Encoder enc(10, true, EncoderConfig{}, rng);
  std::vector<NamedTensor> params;
  enc.append_parameters("enc", params);
  const std::uint64_t arch = arch_hash("encoder", params);
  std::stringstream buf;
  save_checkpoint(buf, {arch, 12, 34}, params);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "BSCK");

  Rng other(99);
  const Encoder fresh(10, true, EncoderConfig{}, other);
  std::vector<NamedTensor> target;
  fresh.append_parameters("enc", target);
  std::stringstream in(bytes);
  const CheckpointHeader h = load_checkpoint(in, arch, target);
  EXPECT_EQ(h.seed, 12u);
  EXPECT_EQ(h.step, 34u);
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(target[i].tensor.value(), params[i].tensor.value());

  std::stringstream again(bytes);
  EXPECT_THROW(load_checkpoint(again, arch + 1, target), InputError);
}
