#include "biossl/mtl.hpp"

#include <chrono>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace biossl {

void MTLConfig::validate() const {
  if (!(lambda_adv >= 0.0) || !(gamma_oc >= 0.0)) throw InputError("lambda and gamma must be nonnegative");
  if (epochs < 1) throw InputError("epochs must be at least 1");
  if (batch_size < 1) throw InputError("batch size must be at least 1");
  if (!(lr > 0.0)) throw InputError("learning rate must be positive");
  if (!(l2 >= 0.0)) throw InputError("L2 weight must be nonnegative");
  if (!(grl_scale >= 0.0)) throw InputError("gradient reversal scale must be nonnegative");
  if (encoder.layers < 1 || encoder.embed_dim < 1) throw InputError("encoder needs a layer and a positive width");
}

std::string model_descriptor(const std::vector<TaskKind>& tasks, std::size_t input_dim, bool identity_input,
                             const MTLConfig& config) {
  std::ostringstream d;
  d << "biossl-mtl/1 tasks=";
  for (std::size_t t = 0; t < tasks.size(); ++t) d << (t ? "," : "") << to_string(tasks[t]);
  const EncoderConfig& e = config.encoder;
  d << " input=" << input_dim << (identity_input ? "/identity" : "/features") << " layers=" << e.layers
    << " hidden=" << e.hidden_heads << "x" << e.hidden_dim << " out=" << e.output_heads << "x" << e.embed_dim
    << " slope=" << e.leaky_slope;
  if (tasks.size() >= 2) d << " disc=" << config.discriminator_hidden;
  return d.str();
}

SharedPrivateModel::SharedPrivateModel(std::vector<TaskKind> tasks, std::size_t input_dim, bool identity_input,
                                       const MTLConfig& config, Rng& rng)
    : tasks_(std::move(tasks)), input_dim_(input_dim), identity_input_(identity_input), config_(config) {
  if (tasks_.empty()) throw InputError("a model needs at least one task");
  for (std::size_t a = 0; a < tasks_.size(); ++a) {
    for (std::size_t b = a + 1; b < tasks_.size(); ++b) {
      if (tasks_[a] == tasks_[b]) throw InputError("duplicate task " + std::string(to_string(tasks_[a])));
    }
  }
  shared_ = Encoder(input_dim, identity_input, config.encoder, rng);
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    if (adversarial()) private_.emplace_back(input_dim, identity_input, config.encoder, rng);
    heads_.emplace_back(tasks_[t], shared_.embed_dim(), rng);
  }
  if (adversarial()) {
    const std::size_t dims[] = {shared_.embed_dim(), config.discriminator_hidden, tasks_.size()};
    discriminator_ = Mlp(dims, rng);
  }
}

const Encoder& SharedPrivateModel::private_encoder(std::size_t t) const {
  if (!adversarial()) throw IndexError("single-task model has no private encoder");
  return private_.at(t);
}

std::vector<NamedTensor> SharedPrivateModel::named_parameters() const {
  std::vector<NamedTensor> out;
  shared_.append_parameters("shared", out);
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    if (adversarial()) private_[t].append_parameters("private" + std::to_string(t), out);
    heads_[t].append_parameters("head" + std::to_string(t), out);
  }
  if (adversarial()) discriminator_.append_parameters("discriminator", out);
  return out;
}

std::vector<Tensor> SharedPrivateModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& n : named_parameters()) out.push_back(n.tensor);
  return out;
}

std::vector<Tensor> SharedPrivateModel::step_parameters(std::size_t t) const {
  if (t >= tasks_.size()) throw IndexError("task slot out of range");
  std::vector<Tensor> out = shared_.parameters();
  if (adversarial()) {
    for (auto& p : private_[t].parameters()) out.push_back(p);
  }
  for (auto& p : heads_[t].parameters()) out.push_back(p);
  if (adversarial()) {
    for (auto& p : discriminator_.parameters()) out.push_back(p);
  }
  return out;
}

std::uint64_t SharedPrivateModel::arch_hash() const {
  return biossl::arch_hash(model_descriptor(tasks_, input_dim_, identity_input_, config_), named_parameters());
}

// ---- loss terms ------------------------------------------------------------------

Matrix discriminator_forward(const SharedPrivateModel& model, const Matrix& x) {
  if (!model.adversarial()) throw ShapeError("single-task model has no discriminator");
  return ops::softmax_rows(model.discriminator().forward(Tensor::constant(x))).value();
}

Tensor adversarial_loss(const Mlp& discriminator, const Tensor& shared, std::span<const NodeIndex> nodes,
                        std::span<const std::uint32_t> task_labels, double grl_scale) {
  if (nodes.size() != task_labels.size()) throw ShapeError("adversarial loss: one task label per node");
  for (std::uint32_t l : task_labels) {
    if (l >= discriminator.out_dim()) {
      throw InputError("task label " + std::to_string(l) + " outside a " + std::to_string(discriminator.out_dim()) +
                       "-task combo");
    }
  }
  const Tensor x = ops::gradient_reversal(ops::gather_rows(shared, nodes), grl_scale);
  return ops::cross_entropy(discriminator.forward(x), task_labels);
}

Tensor orthogonality_loss(const Tensor& private_emb, const Tensor& shared, std::span<const NodeIndex> nodes,
                          OrthoMode mode) {
  if (private_emb.cols() != shared.cols()) throw ShapeError("orthogonality: private and shared widths differ");
  if (nodes.empty()) throw ShapeError("orthogonality: no nodes");
  const Tensor p = ops::gather_rows(private_emb, nodes);
  const Tensor s = ops::gather_rows(shared, nodes);
  if (mode == OrthoMode::BatchMatrix) {
    return ops::scale(ops::squared_norm(ops::matmul_tn(p, s)), 1.0 / static_cast<double>(nodes.size()));
  }
  const Tensor d = ops::row_dot(p, s);
  return ops::mean(ops::mul(d, d));
}

double total_step_loss(double task, double adversarial, double orthogonality, const MTLConfig& config) {
  return task + config.lambda_adv * adversarial + config.gamma_oc * orthogonality;
}

StepLosses step_losses(const SharedPrivateModel& model, std::size_t t, const PretextBatch& batch,
                       const AttentionGraph& graph, const Tensor* features, const MTLConfig& config,
                       double grl_scale) {
  if (t >= model.num_tasks()) throw IndexError("task slot out of range");
  if (batch.kind != model.tasks()[t]) throw ShapeError("batch does not belong to task slot");
  StepLosses out;
  const Tensor hs = model.shared().forward(graph, features);
  if (!model.adversarial()) {
    out.task = task_loss(batch, hs, model.head(t));
    out.total = out.task;
    return out;
  }
  const Tensor hp = model.private_encoder(t).forward(graph, features);
  out.task = task_loss(batch, ops::add(hs, hp), model.head(t));
  const std::vector<NodeIndex> nodes = batch.nodes();
  const std::vector<std::uint32_t> labels(nodes.size(), static_cast<std::uint32_t>(t));
  out.adversarial = adversarial_loss(model.discriminator(), hs, nodes, labels, grl_scale);
  out.orthogonality = orthogonality_loss(hp, hs, nodes, config.ortho_mode);
  out.total = ops::add(ops::add(out.task, ops::scale(out.adversarial, config.lambda_adv)),
                       ops::scale(out.orthogonality, config.gamma_oc));
  return out;
}

// ---- training --------------------------------------------------------------------

namespace {

struct Inputs {
  std::size_t input_dim = 0;
  Tensor features;
  const Tensor* ptr = nullptr;
};

Inputs prepare_inputs(const HetGraph& g, const Matrix* features) {
  Inputs in;
  if (!features) {
    in.input_dim = g.num_nodes();
    return in;
  }
  if (features->rows != g.num_nodes()) {
    throw ShapeError("feature matrix has " + std::to_string(features->rows) + " rows for " +
                     std::to_string(g.num_nodes()) + " nodes");
  }
  in.input_dim = features->cols;
  in.features = Tensor::constant(*features);
  in.ptr = &in.features;
  return in;
}

double grl_at(const MTLConfig& c, std::size_t step) {
  if (c.grl_warmup_steps == 0) return c.grl_scale;
  const double ramp = std::min(1.0, static_cast<double>(step) / static_cast<double>(c.grl_warmup_steps));
  return c.grl_scale * ramp;
}

AdamConfig adam_config(const MTLConfig& c) {
  AdamConfig a;
  a.lr = c.lr;
  a.weight_decay = c.l2;
  return a;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  }
  return out;
}

[[noreturn]] void rethrow_fault(const NumericFault& e, std::size_t step, TaskKind task) {
  throw NumericFault("step " + std::to_string(step) + ", task " + std::string(to_string(task)) + ": " + e.what());
}

}  // namespace

TrainResult train_multitask(const std::vector<TaskKind>& tasks, const HetGraph& g,
                            const std::vector<PretextBatch>& batches, const MTLConfig& config, std::uint64_t seed,
                            const Matrix* features) {
  config.validate();
  if (tasks.size() != batches.size()) throw InputError("one sample batch per task is required");
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (batches[t].kind != tasks[t]) throw InputError("batch order does not match task order");
    if (batches[t].empty()) {
      throw SamplingError(std::string(to_string(tasks[t])) + " produced no samples on this graph");
    }
  }
  const auto started = std::chrono::steady_clock::now();
  const Rng root(seed);
  Rng init = root.fork(1);
  Rng order = root.fork(2);
  const Inputs in = prepare_inputs(g, features);

  TrainResult result;
  result.seed = seed;
  result.model = SharedPrivateModel(tasks, in.input_dim, features == nullptr, config, init);
  const SharedPrivateModel& model = result.model;

  const AttentionGraph full = attention_graph(g);
  std::vector<AttentionGraph> own(tasks.size());
  std::vector<const AttentionGraph*> graphs(tasks.size(), &full);
  if (config.edge_mask_remove_edges) {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (tasks[t] == TaskKind::EdgeMask && !batches[t].masked_edges.empty()) {
        own[t] = attention_graph(g.without_edges(batches[t].masked_edges));
        graphs[t] = &own[t];
      }
    }
  }

  Adam adam(adam_config(config));
  const std::vector<Tensor> all = model.parameters();
  TrainHistory& h = result.history;
  h.task_loss.assign(tasks.size(), {});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_total = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      double visit = 0.0;
      const auto chunks = minibatches(batches[t].size(), config.batch_size, order);
      const std::vector<Tensor> params = model.step_parameters(t);
      for (const auto& chunk : chunks) {
        const PretextBatch mb = batches[t].subset(chunk);
        try {
          const StepLosses l = step_losses(model, t, mb, *graphs[t], in.ptr, config, grl_at(config, h.steps));
          l.total.backward();
          adam.step(params);
          zero_grads(all);
          visit += l.task.item();
          epoch_total += l.total.item();
        } catch (const NumericFault& e) {
          rethrow_fault(e, h.steps, tasks[t]);
        }
        ++epoch_steps;
        ++h.steps;
      }
      h.task_loss[t].push_back(visit / static_cast<double>(chunks.size()));
    }
    h.total_loss.push_back(epoch_total / static_cast<double>(epoch_steps));
  }
  h.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::vector<NamedTensor> SingleTaskResult::named_parameters() const {
  std::vector<NamedTensor> out;
  encoder.append_parameters("shared", out);
  head.append_parameters("head0", out);
  return out;
}

SingleTaskResult train_single_task(TaskKind task, const HetGraph& g, const PretextBatch& batch,
                                   const MTLConfig& config, std::uint64_t seed, const Matrix* features) {
  config.validate();
  if (batch.kind != task) throw InputError("batch does not match task");
  if (batch.empty()) throw SamplingError(std::string(to_string(task)) + " produced no samples on this graph");
  const auto started = std::chrono::steady_clock::now();
  const Rng root(seed);
  Rng init = root.fork(1);
  Rng order = root.fork(2);
  const Inputs in = prepare_inputs(g, features);

  SingleTaskResult r;
  r.seed = seed;
  r.encoder = Encoder(in.input_dim, features == nullptr, config.encoder, init);
  r.head = TaskHead(task, r.encoder.embed_dim(), init);

  const AttentionGraph graph = (config.edge_mask_remove_edges && task == TaskKind::EdgeMask)
                                   ? attention_graph(g.without_edges(batch.masked_edges))
                                   : attention_graph(g);
  std::vector<Tensor> params = r.encoder.parameters();
  for (auto& p : r.head.parameters()) params.push_back(p);
  Adam adam(adam_config(config));
  r.history.task_loss.assign(1, {});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double sum = 0.0;
    const auto chunks = minibatches(batch.size(), config.batch_size, order);
    for (const auto& chunk : chunks) {
      try {
        const Tensor loss = task_loss(batch.subset(chunk), r.encoder.forward(graph, in.ptr), r.head);
        loss.backward();
        adam.step(params);
        zero_grads(params);
        sum += loss.item();
      } catch (const NumericFault& e) {
        rethrow_fault(e, r.history.steps, task);
      }
      ++r.history.steps;
    }
    r.history.task_loss[0].push_back(sum / static_cast<double>(chunks.size()));
    r.history.total_loss.push_back(r.history.task_loss[0].back());
  }
  r.history.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  r.arch_hash = biossl::arch_hash(model_descriptor({task}, in.input_dim, features == nullptr, config),
                                  r.named_parameters());
  return r;
}

Matrix export_embeddings(const SharedPrivateModel& model, const HetGraph& g, ExportMode mode,
                         const Matrix* features) {
  const Inputs in = prepare_inputs(g, features);
  if (in.input_dim != model.input_dim()) throw ShapeError("model was built for a different input width");
  const AttentionGraph graph = attention_graph(g);
  const Tensor hs = model.shared().forward(graph, in.ptr);
  if (mode == ExportMode::Shared || !model.adversarial()) return hs.value();
  std::vector<Tensor> parts{hs};
  for (std::size_t t = 0; t < model.num_tasks(); ++t) parts.push_back(model.private_encoder(t).forward(graph, in.ptr));
  return ops::concat_cols(parts).value();
}

void save_model(std::ostream& out, const SharedPrivateModel& model, std::uint64_t seed, std::uint64_t step) {
  save_checkpoint(out, CheckpointHeader{model.arch_hash(), seed, step}, model.named_parameters());
}

CheckpointHeader load_model(std::istream& in, SharedPrivateModel& model) {
  std::vector<NamedTensor> named = model.named_parameters();
  return load_checkpoint(in, model.arch_hash(), named);
}

void write_embeddings(std::ostream& out, const Matrix& embeddings, const HetGraph& g) {
  if (embeddings.rows != g.num_nodes()) throw ShapeError("embedding rows do not match node count");
  char buf[32];
  for (NodeIndex v = 0; v < g.num_nodes(); ++v) {
    out << to_string(g.ntype(v)) << '\t' << g.node(v).external_id;
    for (double x : embeddings.row(v)) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << '\t' << buf;
    }
    out << '\n';
  }
}

Matrix read_embeddings(std::istream& in, const HetGraph& g) {
  Matrix out;
  std::vector<bool> seen(g.num_nodes(), false);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string type, id, cell;
    std::getline(row, type, '\t');
    std::getline(row, id, '\t');
    const auto nt = parse_node_type(type);
    if (!nt) throw ParseError(lineno, "unknown node type '" + type + "'");
    const auto v = g.find(*nt, id);
    if (!v) throw SchemaError("line " + std::to_string(lineno) + ": node " + id + " is not in the graph");
    std::vector<double> values;
    while (std::getline(row, cell, '\t')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(lineno, "bad number '" + cell + "'");
      }
    }
    if (out.rows == 0) out = Matrix(g.num_nodes(), values.size());
    if (values.size() != out.cols) throw ParseError(lineno, "embedding width differs from earlier rows");
    std::copy(values.begin(), values.end(), out.row(*v).begin());
    seen[*v] = true;
  }
  for (NodeIndex v = 0; v < g.num_nodes(); ++v) {
    if (!seen[v]) throw InputError("embedding file has no row for node " + g.node(v).external_id);
  }
  return out;
}

}  // namespace biossl
