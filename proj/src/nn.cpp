#include "biossl/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace biossl {

AttentionGraph attention_graph(const HetGraph& g) {
  AttentionGraph ag;
  ag.offsets.reserve(g.num_nodes() + 1);
  ag.offsets.push_back(0);
  for (NodeIndex v = 0; v < g.num_nodes(); ++v) {
    ag.targets.push_back(v);
    for (NodeIndex w : g.neighbors(v)) ag.targets.push_back(w);
    ag.offsets.push_back(ag.targets.size());
  }
  return ag;
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-limit, limit);
  return m;
}

// ---- GAT ------------------------------------------------------------------------

GatLayer::GatLayer(std::size_t in_dim, std::size_t heads, std::size_t head_dim, bool concat, double slope, Rng& rng)
    : heads_(heads), head_dim_(head_dim), concat_(concat), slope_(slope) {
  weight_ = Tensor::parameter(glorot_uniform(in_dim, heads * head_dim, in_dim, heads * head_dim, rng));
  attention_ = Tensor::parameter(glorot_uniform(heads, 2 * head_dim, 2 * head_dim, 1, rng));
  bias_ = Tensor::parameter(Matrix(1, out_dim(), 0.0));
}

Tensor GatLayer::forward(const AttentionGraph& graph, const Tensor* input) const {
  const Tensor projected = input ? ops::matmul(*input, weight_) : weight_;
  return ops::add_row(ops::gat_attention(projected, attention_, graph, heads_, concat_, slope_), bias_);
}

void GatLayer::append_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".attention", attention_});
  out.push_back({prefix + ".bias", bias_});
}

Encoder::Encoder(std::size_t input_dim, bool identity_input, const EncoderConfig& config, Rng& rng)
    : identity_input_(identity_input) {
  if (config.layers == 0) throw InputError("encoder needs at least one layer");
  std::size_t in = input_dim;
  for (std::size_t l = 0; l + 1 < config.layers; ++l) {
    layers_.emplace_back(in, config.hidden_heads, config.hidden_dim, true, config.leaky_slope, rng);
    in = layers_.back().out_dim();
  }
  layers_.emplace_back(in, config.output_heads, config.embed_dim, false, config.leaky_slope, rng);
}

Tensor Encoder::forward(const AttentionGraph& graph, const Tensor* features) const {
  if (identity_input_ && features) throw ShapeError("encoder built for identity input was given features");
  if (!identity_input_ && !features) throw ShapeError("encoder requires node features");
  Tensor h = layers_.front().forward(graph, features);
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    const Tensor act = ops::elu(h);
    h = layers_[l].forward(graph, &act);
  }
  return h;
}

std::vector<Tensor> Encoder::parameters() const {
  std::vector<NamedTensor> named;
  append_parameters("", named);
  std::vector<Tensor> out;
  for (auto& n : named) out.push_back(n.tensor);
  return out;
}

void Encoder::append_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].append_parameters(prefix + ".gat" + std::to_string(l), out);
  }
}

// ---- MLP ------------------------------------------------------------------------

Linear::Linear(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  weight_ = Tensor::parameter(glorot_uniform(in_dim, out_dim, in_dim, out_dim, rng));
  bias_ = Tensor::parameter(Matrix(1, out_dim, 0.0));
}

void Linear::zero() {
  std::fill(weight_.mutable_value().data.begin(), weight_.mutable_value().data.end(), 0.0);
  std::fill(bias_.mutable_value().data.begin(), bias_.mutable_value().data.end(), 0.0);
}

Mlp::Mlp(std::span<const std::size_t> dims, Rng& rng) {
  if (dims.size() < 2) throw InputError("MLP needs at least input and output widths");
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) layers_.emplace_back(dims[k], dims[k + 1], rng);
}

Tensor Mlp::forward(const Tensor& x) const {
  if (x.cols() != in_dim()) {
    throw ShapeError("MLP input width " + std::to_string(x.cols()) + ", expected " + std::to_string(in_dim()));
  }
  Tensor h = layers_.front().forward(x);
  for (std::size_t k = 1; k < layers_.size(); ++k) h = layers_[k].forward(ops::relu(h));
  return h;
}

std::size_t Mlp::in_dim() const { return layers_.front().weight().rows(); }
std::size_t Mlp::out_dim() const { return layers_.back().weight().cols(); }

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight());
    out.push_back(l.bias());
  }
  return out;
}

void Mlp::append_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    out.push_back({prefix + ".fc" + std::to_string(k) + ".weight", layers_[k].weight()});
    out.push_back({prefix + ".fc" + std::to_string(k) + ".bias", layers_[k].bias()});
  }
}

void Mlp::zero() {
  for (auto& l : layers_) l.zero();
}

// ---- Adam -----------------------------------------------------------------------

void Adam::step(const std::vector<Tensor>& params) {
  ++steps_;
  for (Tensor p : params) {
    const Matrix& g = p.grad();
    for (double v : g.data) {
      if (!std::isfinite(v)) throw NumericFault("Adam: non-finite gradient");
    }
    Slot& slot = slots_[p.id()];
    Matrix& theta = p.mutable_value();
    if (slot.m.size() != theta.size()) {
      slot.m = Matrix(theta.rows, theta.cols);
      slot.v = Matrix(theta.rows, theta.cols);
    }
    ++slot.t;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(slot.t));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(slot.t));
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double grad = g.data[k] + config_.weight_decay * theta.data[k];
      slot.m.data[k] = config_.beta1 * slot.m.data[k] + (1.0 - config_.beta1) * grad;
      slot.v.data[k] = config_.beta2 * slot.v.data[k] + (1.0 - config_.beta2) * grad * grad;
      const double mhat = slot.m.data[k] / bc1;
      const double vhat = slot.v.data[k] / bc2;
      theta.data[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void zero_grads(const std::vector<Tensor>& params) {
  for (const Tensor& p : params) p.zero_grad();
}

// ---- checkpoints ----------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'B', 'S', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw InputError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw InputError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
  return v;
}

}  // namespace

std::uint64_t arch_hash(std::string_view descriptor, const std::vector<NamedTensor>& params) {
  std::string text(descriptor);
  for (const auto& p : params) {
    text += "|" + p.name + ":" + std::to_string(p.tensor.rows()) + "x" + std::to_string(p.tensor.cols());
  }
  return fnv1a64(text);
}

void save_checkpoint(std::ostream& out, const CheckpointHeader& header, const std::vector<NamedTensor>& params) {
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, header.arch_hash);
  put_u64(out, header.seed);
  put_u64(out, header.step);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const Matrix& m = p.tensor.value();
    put_u32(out, static_cast<std::uint32_t>(m.rows));
    put_u32(out, static_cast<std::uint32_t>(m.cols));
    for (double v : m.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

CheckpointHeader load_checkpoint(std::istream& in, std::uint64_t expected_arch_hash,
                                 std::vector<NamedTensor>& params) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw InputError("not a checkpoint (bad magic)");
  }
  if (get_u32(in) != kCheckpointVersion) throw InputError("unsupported checkpoint version");
  CheckpointHeader header;
  header.arch_hash = get_u64(in);
  header.seed = get_u64(in);
  header.step = get_u64(in);
  if (header.arch_hash != expected_arch_hash) {
    throw InputError("checkpoint architecture hash " + hex64(header.arch_hash) + " does not match model " +
                     hex64(expected_arch_hash));
  }
  const std::uint32_t count = get_u32(in);
  if (count != params.size()) throw InputError("checkpoint parameter count mismatch");
  for (auto& p : params) {
    std::string name(get_u32(in), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw InputError("checkpoint truncated");
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    Matrix& m = p.tensor.mutable_value();
    if (name != p.name || rows != m.rows || cols != m.cols) {
      throw InputError("checkpoint tensor '" + name + "' does not match model tensor '" + p.name + "'");
    }
    for (double& v : m.data) v = std::bit_cast<double>(get_u64(in));
  }
  return header;
}

}  // namespace biossl
