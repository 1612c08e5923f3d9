#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "biossl/graph.hpp"
#include "biossl/tensor.hpp"

namespace biossl {

// Neighbor lists of g with a self-loop prepended for every node. The result
// must outlive any tape built from gat_attention over it.
AttentionGraph attention_graph(const HetGraph& g);

Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

class GatLayer {
 public:
  GatLayer() = default;
  // in_dim is the feature width, or the node count for identity input.
  GatLayer(std::size_t in_dim, std::size_t heads, std::size_t head_dim, bool concat, double slope, Rng& rng);

  // input == nullptr means identity (one-hot) node features: the projection
  // is then the weight matrix itself.
  Tensor forward(const AttentionGraph& graph, const Tensor* input) const;

  std::size_t heads() const { return heads_; }
  std::size_t head_dim() const { return head_dim_; }
  std::size_t out_dim() const { return concat_ ? heads_ * head_dim_ : head_dim_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& attention() const { return attention_; }
  const Tensor& bias() const { return bias_; }
  double slope() const { return slope_; }
  void append_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;

 private:
  Tensor weight_;     // in_dim x heads*head_dim
  Tensor attention_;  // heads x 2*head_dim
  Tensor bias_;       // 1 x out_dim
  std::size_t heads_ = 0;
  std::size_t head_dim_ = 0;
  bool concat_ = true;
  double slope_ = 0.2;
};

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t hidden_heads = 8;
  std::size_t hidden_dim = 8;
  std::size_t output_heads = 8;
  std::size_t embed_dim = 32;
  double leaky_slope = 0.2;
};

// Stack of GAT layers: concatenated heads with ELU between layers, head mean
// on the last layer.
class Encoder {
 public:
  Encoder() = default;
  Encoder(std::size_t input_dim, bool identity_input, const EncoderConfig& config, Rng& rng);

  Tensor forward(const AttentionGraph& graph, const Tensor* features = nullptr) const;
  std::size_t embed_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  const std::vector<GatLayer>& layers() const { return layers_; }
  std::vector<Tensor> parameters() const;
  void append_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;
  bool identity_input() const { return identity_input_; }

 private:
  std::vector<GatLayer> layers_;
  bool identity_input_ = true;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_dim, std::size_t out_dim, Rng& rng);
  Tensor forward(const Tensor& x) const { return ops::add_row(ops::matmul(x, weight_), bias_); }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  void zero();

 private:
  Tensor weight_;
  Tensor bias_;
};

// Fully connected stack with ReLU between layers; the output is raw logits.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::span<const std::size_t> dims, Rng& rng);

  Tensor forward(const Tensor& x) const;
  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::vector<Tensor> parameters() const;
  void append_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;
  void zero();

 private:
  std::vector<Linear> layers_;
};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;  // coupled L2: added to the gradient
};

// Adam with per-parameter moment buffers and step counters, so parameters
// that sit out a step keep their own bias correction.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  void step(const std::vector<Tensor>& params);
  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }

 private:
  struct Slot {
    Matrix m;
    Matrix v;
    std::uint64_t t = 0;
  };
  AdamConfig config_;
  std::unordered_map<const void*, Slot> slots_;
  std::uint64_t steps_ = 0;
};

void zero_grads(const std::vector<Tensor>& params);

// ---- checkpoints ------------------------------------------------------------------

struct CheckpointHeader {
  std::uint64_t arch_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

// Hash of an architecture descriptor plus every parameter's name and shape.
std::uint64_t arch_hash(std::string_view descriptor, const std::vector<NamedTensor>& params);

// "BSCK", u32 version, u64 arch hash, u64 seed, u64 step, u32 count, then per
// tensor: u32 name length, name, u32 rows, u32 cols, little-endian doubles.
void save_checkpoint(std::ostream& out, const CheckpointHeader& header, const std::vector<NamedTensor>& params);
// Loads values into params in place. Throws InputError on an arch-hash or
// shape mismatch.
CheckpointHeader load_checkpoint(std::istream& in, std::uint64_t expected_arch_hash,
                                 std::vector<NamedTensor>& params);

}  // namespace biossl
