#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "biossl/common.hpp"

namespace biossl {

// Dense row-major matrix of 64-bit reals.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(std::span<const double> values);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

std::string shape_str(const Matrix& m);

namespace detail {
struct Node;
}

// Handle to a value on the autodiff tape. Parameters are leaves that keep
// accumulating gradient until zero_grad(); every op result is an interior node
// that records how to push its gradient back to its inputs.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const;
  Matrix& mutable_value();
  // Zero-filled when no gradient has reached this node.
  const Matrix& grad() const;
  Matrix& mutable_grad();
  bool requires_grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double item() const;

  // Reverse sweep from a 1x1 tensor.
  void backward() const;
  void zero_grad() const;

  const void* id() const { return node_.get(); }

 private:
  friend Tensor make_result(Matrix value, std::vector<Tensor> parents,
                            std::function<void(const Matrix& out_grad, std::span<Tensor> parents)> backward,
                            const char* op);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Registers an op result on the tape. The backward callback receives the
// output gradient and the parent handles; it accumulates into mutable_grad()
// of parents that require grad.
Tensor make_result(Matrix value, std::vector<Tensor> parents,
                   std::function<void(const Matrix& out_grad, std::span<Tensor> parents)> backward,
                   const char* op);

// Compressed neighbor lists with self-loops, consumed by graph attention.
struct AttentionGraph {
  std::vector<std::size_t> offsets;  // size n + 1
  std::vector<std::uint32_t> targets;
  std::size_t num_nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b);
// Transpose of a times b.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// a (n x c) plus a 1 x c bias broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& bias);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& a, std::span<const std::uint32_t> rows);

Tensor leaky_relu(const Tensor& a, double slope);
Tensor relu(const Tensor& a);
Tensor elu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
// Column-wise softmax within each row segment [offsets[s], offsets[s+1]).
Tensor segment_softmax(const Tensor& a, std::span<const std::size_t> offsets);

// Per-row dot product and cosine similarity, n x 1.
Tensor row_dot(const Tensor& a, const Tensor& b);
Tensor row_cosine(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor squared_norm(const Tensor& a);
// Mean squared error against a constant target of the same shape.
Tensor mse(const Tensor& pred, const Matrix& target);
// Mean softmax cross-entropy of row logits against integer labels.
Tensor cross_entropy(const Tensor& logits, std::span<const std::uint32_t> labels);
// Mean binary cross-entropy of n x 1 logits against {0,1} labels.
Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels);

// Identity forward; backward multiplies the gradient by -scale.
Tensor gradient_reversal(const Tensor& a, double scale);

// Multi-head graph attention over projected features wh (n x heads*head_dim)
// with attention parameters attn (heads x 2*head_dim: source half then
// neighbor half). Output n x heads*head_dim when concat, else the head mean
// (n x head_dim).
Tensor gat_attention(const Tensor& wh, const Tensor& attn, const AttentionGraph& graph,
                     std::size_t heads, bool concat, double slope);

// Attention coefficients (num_targets x heads) for inspection.
Matrix gat_attention_weights(const Matrix& wh, const Matrix& attn, const AttentionGraph& graph,
                             std::size_t heads, double slope);

}  // namespace ops

}  // namespace biossl
