#include "biossl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace biossl {

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<Tensor> parents;
  std::function<void(const Matrix&, std::span<Tensor>)> backward;
  const char* op = "leaf";
};

}  // namespace detail

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m;
  m.rows = rows.size();
  m.cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != m.cols) throw ShapeError("Matrix::from_rows: ragged rows");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  Matrix m(values.size(), 1);
  std::copy(values.begin(), values.end(), m.data.begin());
  return m;
}

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")";
}

namespace {

void ensure_grad(detail::Node& n) {
  if (n.grad.size() != n.value.size() || !n.grad.same_shape(n.value)) {
    n.grad = Matrix(n.value.rows, n.value.cols, 0.0);
  }
}

void check_finite(const Matrix& m, const char* op) {
  for (double v : m.data) {
    if (!std::isfinite(v)) throw NumericFault(std::string(op) + " produced a non-finite value");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                     shape_str(b.value()));
  }
}

}  // namespace

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->op = "parameter";
  return Tensor(std::move(node));
}

const Matrix& Tensor::value() const { return node_->value; }
Matrix& Tensor::mutable_value() { return node_->value; }

const Matrix& Tensor::grad() const {
  ensure_grad(*node_);
  return node_->grad;
}

Matrix& Tensor::mutable_grad() {
  ensure_grad(*node_);
  return node_->grad;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

double Tensor::item() const {
  if (value().size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(value()));
  return value().data[0];
}

void Tensor::zero_grad() const {
  if (node_->grad.size()) std::fill(node_->grad.data.begin(), node_->grad.data.end(), 0.0);
}

void Tensor::backward() const {
  if (value().size() != 1) throw ShapeError("backward() requires a scalar root");
  if (!node_->requires_grad) return;

  // Post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].node_.get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (detail::Node* n : order) {
    if (n->backward) n->grad = Matrix();
  }
  ensure_grad(*node_);
  node_->grad.data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->backward || n->grad.size() == 0) continue;
    n->backward(n->grad, n->parents);
  }
}

Tensor make_result(Matrix value, std::vector<Tensor> parents,
                   std::function<void(const Matrix&, std::span<Tensor>)> backward, const char* op) {
  check_finite(value, op);
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = op;
  const bool needs = std::any_of(parents.begin(), parents.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

namespace ops {

namespace {

// Accumulate helper: only touches parents that take gradient.
template <typename Fn>
void accumulate(Tensor& p, Fn fn) {
  if (p.requires_grad()) fn(p.mutable_grad());
}

void gemm_acc(const Matrix& a, bool ta, const Matrix& b, bool tb, Matrix& out) {
  // out += op(a) * op(b)
  const std::size_t n = ta ? a.cols : a.rows;
  const std::size_t k = ta ? a.rows : a.cols;
  const std::size_t m = tb ? b.rows : b.cols;
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.data.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ta ? a(p, i) : a(i, p);
      if (av == 0.0) continue;
      if (!tb) {
        const double* brow = b.data.data() + p * b.cols;
        for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < m; ++j) orow[j] += av * b(j, p);
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.rows) {
    throw ShapeError("matmul: " + shape_str(av) + " x " + shape_str(bv));
  }
  Matrix out(av.rows, bv.cols);
  gemm_acc(av, false, bv, false, out);
  return make_result(std::move(out), {a, b}, [](const Matrix& g, std::span<Tensor> p) {
    const Matrix& A = p[0].value();
    const Matrix& B = p[1].value();
    accumulate(p[0], [&](Matrix& ga) { gemm_acc(g, false, B, true, ga); });
    accumulate(p[1], [&](Matrix& gb) { gemm_acc(A, true, g, false, gb); });
  }, "matmul");
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows != bv.rows) {
    throw ShapeError("matmul_tn: " + shape_str(av) + "^T x " + shape_str(bv));
  }
  Matrix out(av.cols, bv.cols);
  gemm_acc(av, true, bv, false, out);
  return make_result(std::move(out), {a, b}, [](const Matrix& g, std::span<Tensor> p) {
    const Matrix& A = p[0].value();
    const Matrix& B = p[1].value();
    accumulate(p[0], [&](Matrix& ga) { gemm_acc(B, false, g, true, ga); });
    accumulate(p[1], [&](Matrix& gb) { gemm_acc(A, false, g, false, gb); });
  }, "matmul_tn");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += b.value().data[k];
  return make_result(std::move(out), {a, b}, [](const Matrix& g, std::span<Tensor> p) {
    for (auto& t : p) {
      accumulate(t, [&](Matrix& gt) {
        for (std::size_t k = 0; k < g.size(); ++k) gt.data[k] += g.data[k];
      });
    }
  }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] -= b.value().data[k];
  return make_result(std::move(out), {a, b}, [](const Matrix& g, std::span<Tensor> p) {
    accumulate(p[0], [&](Matrix& ga) {
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k];
    });
    accumulate(p[1], [&](Matrix& gb) {
      for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] -= g.data[k];
    });
  }, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= b.value().data[k];
  return make_result(std::move(out), {a, b}, [](const Matrix& g, std::span<Tensor> p) {
    const Matrix& A = p[0].value();
    const Matrix& B = p[1].value();
    accumulate(p[0], [&](Matrix& ga) {
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * B.data[k];
    });
    accumulate(p[1], [&](Matrix& gb) {
      for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] += g.data[k] * A.data[k];
    });
  }, "mul");
}

Tensor scale(const Tensor& a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v *= s;
  return make_result(std::move(out), {a}, [s](const Matrix& g, std::span<Tensor> p) {
    accumulate(p[0], [&](Matrix& ga) {
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += s * g.data[k];
    });
  }, "scale");
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.rows != 1 || bv.cols != av.cols) {
    throw ShapeError("add_row: bias " + shape_str(bv) + " for input " + shape_str(av));
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += bv.data[c];
  }
  return make_result(std::move(out), {a, bias}, [](const Matrix& g, std::span<Tensor> p) {
    accumulate(p[0], [&](Matrix& ga) {
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k];
    });
    accumulate(p[1], [&](Matrix& gb) {
      for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) gb.data[c] += g(r, c);
      }
    });
  }, "add_row");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& t : parts) {
    if (t.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += t.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& t : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(t.value().row(r).begin(), t.value().row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += t.cols();
  }
  return make_result(std::move(out), parts, [](const Matrix& g, std::span<Tensor> p) {
    std::size_t off = 0;
    for (auto& t : p) {
      const std::size_t c = t.cols();
      accumulate(t, [&](Matrix& gt) {
        for (std::size_t r = 0; r < g.rows; ++r) {
          for (std::size_t k = 0; k < c; ++k) gt(r, k) += g(r, off + k);
        }
      });
      off += c;
    }
  }, "concat_cols");
}

Tensor gather_rows(const Tensor& a, std::span<const std::uint32_t> rows) {
  const Matrix& av = a.value();
  Matrix out(rows.size(), av.cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= av.rows) throw IndexError("gather_rows: row " + std::to_string(rows[r]) + " of " + shape_str(av));
    std::copy(av.row(rows[r]).begin(), av.row(rows[r]).end(), out.row(r).begin());
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return make_result(std::move(out), {a}, [idx = std::move(idx)](const Matrix& g, std::span<Tensor> p) {
    accumulate(p[0], [&](Matrix& ga) {
      for (std::size_t r = 0; r < idx.size(); ++r) {
        auto dst = ga.row(idx[r]);
        auto src = g.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
    });
  }, "gather_rows");
}

namespace {

template <typename F, typename D>
Tensor elementwise(const Tensor& a, F f, D df, const char* op) {
  Matrix out = a.value();
  for (double& v : out.data) v = f(v);
  return make_result(std::move(out), {a}, [df](const Matrix& g, std::span<Tensor> p) {
    const Matrix& x = p[0].value();
    accumulate(p[0], [&](Matrix& ga) {
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * df(x.data[k]);
    });
  }, op);
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor leaky_relu(const Tensor& a, double slope) {
  return elementwise(
      a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x) { return x > 0 ? 1.0 : slope; }, "leaky_relu");
}

Tensor relu(const Tensor& a) {
  return elementwise(
      a, [](double x) { return x > 0 ? x : 0.0; }, [](double x) { return x > 0 ? 1.0 : 0.0; }, "relu");
}

Tensor elu(const Tensor& a) {
  return elementwise(
      a, [](double x) { return x > 0 ? x : std::expm1(x); },
      [](double x) { return x > 0 ? 1.0 : std::exp(x); }, "elu");
}

Tensor sigmoid(const Tensor& a) {
  return elementwise(
      a, [](double x) { return stable_sigmoid(x); },
      [](double x) {
        const double s = stable_sigmoid(x);
        return s * (1.0 - s);
      },
      "sigmoid");
}

Tensor softmax_rows(const Tensor& a) {
  Matrix out = a.value();
  for (std::size_t r = 0; r < out.rows; ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(v - mx));
    for (double& v : row) v /= z;
  }
  Matrix probs = out;
  return make_result(std::move(out), {a}, [probs = std::move(probs)](const Matrix& g, std::span<Tensor> p) {
    accumulate(p[0], [&](Matrix& ga) {
      for (std::size_t r = 0; r < g.rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < g.cols; ++c) dot += g(r, c) * probs(r, c);
        for (std::size_t c = 0; c < g.cols; ++c) ga(r, c) += probs(r, c) * (g(r, c) - dot);
      }
    });
  }, "softmax_rows");
}

Tensor segment_softmax(const Tensor& a, std::span<const std::size_t> offsets) {
  const Matrix& av = a.value();
  if (offsets.empty() || offsets.back() != av.rows) {
    throw IndexError("segment_softmax: offsets do not cover " + std::to_string(av.rows) + " rows");
  }
  Matrix out = av;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t lo = offsets[s];
    const std::size_t hi = offsets[s + 1];
    if (lo > hi || hi > av.rows) throw IndexError("segment_softmax: segment out of range");
    if (lo == hi) continue;
    for (std::size_t c = 0; c < av.cols; ++c) {
      double mx = out(lo, c);
      for (std::size_t r = lo; r < hi; ++r) mx = std::max(mx, out(r, c));
      double z = 0.0;
      for (std::size_t r = lo; r < hi; ++r) z += (out(r, c) = std::exp(out(r, c) - mx));
      for (std::size_t r = lo; r < hi; ++r) out(r, c) /= z;
    }
  }
  Matrix probs = out;
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  return make_result(std::move(out), {a},
                     [probs = std::move(probs), offs = std::move(offs)](const Matrix& g, std::span<Tensor> p) {
                       accumulate(p[0], [&](Matrix& ga) {
                         for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
                           for (std::size_t c = 0; c < g.cols; ++c) {
                             double dot = 0.0;
                             for (std::size_t r = offs[s]; r < offs[s + 1]; ++r) dot += g(r, c) * probs(r, c);
                             for (std::size_t r = offs[s]; r < offs[s + 1]; ++r) {
                               ga(r, c) += probs(r, c) * (g(r, c) - dot);
                             }
                           }
                         }
                       });
                     },
                     "segment_softmax");
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "row_dot");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows, 1);
  for (std::size_t r = 0; r < av.rows; ++r) {
    double d = 0.0;
    for (std::size_t c = 0; c < av.cols; ++c) d += av(r, c) * bv(r, c);
    out(r, 0) = d;
  }
  return make_result(std::move(out), {a, b}, [](const Matrix& g, std::span<Tensor> p) {
    const Matrix& A = p[0].value();
    const Matrix& B = p[1].value();
    accumulate(p[0], [&](Matrix& ga) {
      for (std::size_t r = 0; r < A.rows; ++r) {
        for (std::size_t c = 0; c < A.cols; ++c) ga(r, c) += g(r, 0) * B(r, c);
      }
    });
    accumulate(p[1], [&](Matrix& gb) {
      for (std::size_t r = 0; r < A.rows; ++r) {
        for (std::size_t c = 0; c < A.cols; ++c) gb(r, c) += g(r, 0) * A(r, c);
      }
    });
  }, "row_dot");
}

Tensor row_cosine(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "row_cosine");
  constexpr double kEps = 1e-12;
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows, 1);
  std::vector<double> na(av.rows), nb(av.rows);
  for (std::size_t r = 0; r < av.rows; ++r) {
    double d = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t c = 0; c < av.cols; ++c) {
      d += av(r, c) * bv(r, c);
      sa += av(r, c) * av(r, c);
      sb += bv(r, c) * bv(r, c);
    }
    na[r] = std::max(std::sqrt(sa), kEps);
    nb[r] = std::max(std::sqrt(sb), kEps);
    out(r, 0) = d / (na[r] * nb[r]);
  }
  Matrix cos = out;
  return make_result(
      std::move(out), {a, b},
      [na = std::move(na), nb = std::move(nb), cos = std::move(cos)](const Matrix& g, std::span<Tensor> p) {
        const Matrix& A = p[0].value();
        const Matrix& B = p[1].value();
        // d cos / d a = b / (|a||b|) - cos * a / |a|^2
        accumulate(p[0], [&](Matrix& ga) {
          for (std::size_t r = 0; r < A.rows; ++r) {
            for (std::size_t c = 0; c < A.cols; ++c) {
              ga(r, c) += g(r, 0) * (B(r, c) / (na[r] * nb[r]) - cos(r, 0) * A(r, c) / (na[r] * na[r]));
            }
          }
        });
        accumulate(p[1], [&](Matrix& gb) {
          for (std::size_t r = 0; r < A.rows; ++r) {
            for (std::size_t c = 0; c < A.cols; ++c) {
              gb(r, c) += g(r, 0) * (A(r, c) / (na[r] * nb[r]) - cos(r, 0) * B(r, c) / (nb[r] * nb[r]));
            }
          }
        });
      },
      "row_cosine");
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  return make_result(Matrix(1, 1, s), {a}, [](const Matrix& g, std::span<Tensor> p) {
    accumulate(p[0], [&](Matrix& ga) {
      for (double& v : ga.data) v += g.data[0];
    });
  }, "sum");
}

Tensor mean(const Tensor& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Tensor squared_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value().data) s += v * v;
  return make_result(Matrix(1, 1, s), {a}, [](const Matrix& g, std::span<Tensor> p) {
    const Matrix& A = p[0].value();
    accumulate(p[0], [&](Matrix& ga) {
      for (std::size_t k = 0; k < A.size(); ++k) ga.data[k] += 2.0 * g.data[0] * A.data[k];
    });
  }, "squared_norm");
}

Tensor mse(const Tensor& pred, const Matrix& target) {
  if (!pred.value().same_shape(target)) {
    throw ShapeError("mse: prediction " + shape_str(pred.value()) + " vs target " + shape_str(target));
  }
  const std::size_t n = target.size();
  if (n == 0) throw ShapeError("mse of empty tensor");
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = pred.value().data[k] - target.data[k];
    s += d * d;
  }
  return make_result(Matrix(1, 1, s / static_cast<double>(n)), {pred},
                     [target](const Matrix& g, std::span<Tensor> p) {
                       const Matrix& P = p[0].value();
                       const double f = 2.0 * g.data[0] / static_cast<double>(P.size());
                       accumulate(p[0], [&](Matrix& gp) {
                         for (std::size_t k = 0; k < P.size(); ++k) gp.data[k] += f * (P.data[k] - target.data[k]);
                       });
                     },
                     "mse");
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::uint32_t> labels) {
  const Matrix& z = logits.value();
  if (labels.size() != z.rows) throw ShapeError("cross_entropy: labels do not match logit rows");
  if (z.rows == 0) throw ShapeError("cross_entropy of empty batch");
  Matrix probs(z.rows, z.cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < z.rows; ++r) {
    if (labels[r] >= z.cols) throw IndexError("cross_entropy: label " + std::to_string(labels[r]) + " >= classes");
    const auto row = z.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double zsum = 0.0;
    for (std::size_t c = 0; c < z.cols; ++c) zsum += (probs(r, c) = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < z.cols; ++c) probs(r, c) /= zsum;
    loss -= row[labels[r]] - mx - std::log(zsum);
  }
  const double n = static_cast<double>(z.rows);
  std::vector<std::uint32_t> lab(labels.begin(), labels.end());
  return make_result(Matrix(1, 1, loss / n), {logits},
                     [probs = std::move(probs), lab = std::move(lab), n](const Matrix& g, std::span<Tensor> p) {
                       accumulate(p[0], [&](Matrix& gz) {
                         const double f = g.data[0] / n;
                         for (std::size_t r = 0; r < probs.rows; ++r) {
                           for (std::size_t c = 0; c < probs.cols; ++c) {
                             gz(r, c) += f * (probs(r, c) - (c == lab[r] ? 1.0 : 0.0));
                           }
                         }
                       });
                     },
                     "cross_entropy");
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels) {
  const Matrix& z = logits.value();
  if (z.cols != 1 || labels.size() != z.rows) throw ShapeError("bce_with_logits: expects n x 1 logits and n labels");
  if (z.rows == 0) throw ShapeError("bce_with_logits of empty batch");
  double loss = 0.0;
  for (std::size_t r = 0; r < z.rows; ++r) {
    const double x = z.data[r];
    // max(x,0) - x*y + log(1 + exp(-|x|))
    loss += std::max(x, 0.0) - x * labels[r] + std::log1p(std::exp(-std::abs(x)));
  }
  const double n = static_cast<double>(z.rows);
  std::vector<double> lab(labels.begin(), labels.end());
  return make_result(Matrix(1, 1, loss / n), {logits},
                     [lab = std::move(lab), n](const Matrix& g, std::span<Tensor> p) {
                       const Matrix& Z = p[0].value();
                       accumulate(p[0], [&](Matrix& gz) {
                         for (std::size_t r = 0; r < Z.rows; ++r) {
                           gz.data[r] += g.data[0] / n * (stable_sigmoid(Z.data[r]) - lab[r]);
                         }
                       });
                     },
                     "bce_with_logits");
}

Tensor gradient_reversal(const Tensor& a, double scale_factor) {
  return make_result(a.value(), {a}, [scale_factor](const Matrix& g, std::span<Tensor> p) {
    accumulate(p[0], [&](Matrix& ga) {
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] -= scale_factor * g.data[k];
    });
  }, "gradient_reversal");
}

// ---- graph attention -------------------------------------------------------------

namespace {

struct AttentionScores {
  Matrix src;    // n x heads: a_src . Wh_i
  Matrix dst;    // n x heads: a_dst . Wh_j
  Matrix pre;    // targets x heads: src_i + dst_j
  Matrix alpha;  // targets x heads
};

AttentionScores attention_scores(const Matrix& wh, const Matrix& attn, const AttentionGraph& graph,
                                 std::size_t heads, double slope) {
  const std::size_t n = graph.num_nodes();
  if (heads == 0 || wh.cols % heads != 0) throw ShapeError("gat_attention: width not divisible by heads");
  const std::size_t dim = wh.cols / heads;
  if (wh.rows != n) throw ShapeError("gat_attention: features have " + std::to_string(wh.rows) + " rows for " + std::to_string(n) + " nodes");
  if (attn.rows != heads || attn.cols != 2 * dim) throw ShapeError("gat_attention: attention params " + shape_str(attn));
  AttentionScores s{Matrix(n, heads), Matrix(n, heads), Matrix(graph.targets.size(), heads),
                    Matrix(graph.targets.size(), heads)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      double a = 0.0, b = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        a += attn(h, d) * wh(i, h * dim + d);
        b += attn(h, dim + d) * wh(i, h * dim + d);
      }
      s.src(i, h) = a;
      s.dst(i, h) = b;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = graph.offsets[i];
    const std::size_t hi = graph.offsets[i + 1];
    for (std::size_t h = 0; h < heads; ++h) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = lo; k < hi; ++k) {
        const std::uint32_t j = graph.targets[k];
        if (j >= n) throw IndexError("gat_attention: neighbor index out of range");
        const double e = s.src(i, h) + s.dst(j, h);
        s.pre(k, h) = e;
        const double l = e > 0 ? e : slope * e;
        s.alpha(k, h) = l;
        mx = std::max(mx, l);
      }
      double z = 0.0;
      for (std::size_t k = lo; k < hi; ++k) z += (s.alpha(k, h) = std::exp(s.alpha(k, h) - mx));
      for (std::size_t k = lo; k < hi; ++k) s.alpha(k, h) /= z;
    }
  }
  return s;
}

}  // namespace

Matrix gat_attention_weights(const Matrix& wh, const Matrix& attn, const AttentionGraph& graph,
                             std::size_t heads, double slope) {
  return attention_scores(wh, attn, graph, heads, slope).alpha;
}

Tensor gat_attention(const Tensor& wh, const Tensor& attn, const AttentionGraph& graph,
                     std::size_t heads, bool concat, double slope) {
  const Matrix& x = wh.value();
  AttentionScores s = attention_scores(x, attn.value(), graph, heads, slope);
  const std::size_t n = graph.num_nodes();
  const std::size_t dim = x.cols / heads;
  const double inv_heads = 1.0 / static_cast<double>(heads);
  Matrix out(n, concat ? heads * dim : dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = graph.offsets[i]; k < graph.offsets[i + 1]; ++k) {
      const std::uint32_t j = graph.targets[k];
      for (std::size_t h = 0; h < heads; ++h) {
        const double w = concat ? s.alpha(k, h) : s.alpha(k, h) * inv_heads;
        const std::size_t base = concat ? h * dim : 0;
        for (std::size_t d = 0; d < dim; ++d) out(i, base + d) += w * x(j, h * dim + d);
      }
    }
  }
  return make_result(
      std::move(out), {wh, attn},
      [s = std::move(s), &graph, heads, dim, concat, slope, inv_heads](const Matrix& g, std::span<Tensor> p) {
        const Matrix& X = p[0].value();
        const Matrix& A = p[1].value();
        const std::size_t n = graph.num_nodes();
        Matrix gx(X.rows, X.cols);
        Matrix ga(A.rows, A.cols);
        std::vector<double> dalpha;
        std::vector<double> ds(n * heads, 0.0), dt(n * heads, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t lo = graph.offsets[i];
          const std::size_t hi = graph.offsets[i + 1];
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t gbase = concat ? h * dim : 0;
            const double gscale = concat ? 1.0 : inv_heads;
            dalpha.assign(hi - lo, 0.0);
            double weighted = 0.0;
            for (std::size_t k = lo; k < hi; ++k) {
              const std::uint32_t j = graph.targets[k];
              double da = 0.0;
              for (std::size_t d = 0; d < dim; ++d) {
                const double gi = gscale * g(i, gbase + d);
                gx(j, h * dim + d) += s.alpha(k, h) * gi;
                da += gi * X(j, h * dim + d);
              }
              dalpha[k - lo] = da;
              weighted += s.alpha(k, h) * da;
            }
            for (std::size_t k = lo; k < hi; ++k) {
              const double dl = s.alpha(k, h) * (dalpha[k - lo] - weighted);
              const double de = dl * (s.pre(k, h) > 0 ? 1.0 : slope);
              ds[i * heads + h] += de;
              dt[graph.targets[k] * heads + h] += de;
            }
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t h = 0; h < heads; ++h) {
            const double a = ds[i * heads + h];
            const double b = dt[i * heads + h];
            if (a == 0.0 && b == 0.0) continue;
            for (std::size_t d = 0; d < dim; ++d) {
              const double xv = X(i, h * dim + d);
              ga(h, d) += a * xv;
              ga(h, dim + d) += b * xv;
              gx(i, h * dim + d) += a * A(h, d) + b * A(h, dim + d);
            }
          }
        }
        accumulate(p[0], [&](Matrix& dst) {
          for (std::size_t k = 0; k < gx.size(); ++k) dst.data[k] += gx.data[k];
        });
        accumulate(p[1], [&](Matrix& dst) {
          for (std::size_t k = 0; k < ga.size(); ++k) dst.data[k] += ga.data[k];
        });
      },
      "gat_attention");
}

}  // namespace ops

}  // namespace biossl
