#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "biossl/nn.hpp"
#include "biossl/pretext.hpp"

namespace biossl {

enum class ExportMode : std::uint8_t { Shared, Concat };
enum class OrthoMode : std::uint8_t { PerNode, BatchMatrix };

struct MTLConfig {
  EncoderConfig encoder;
  double lambda_adv = 0.05;
  double gamma_oc = 0.01;
  std::size_t epochs = 10;
  double lr = 5e-4;
  double l2 = 5e-4;
  double grl_scale = 1.0;
  std::size_t grl_warmup_steps = 0;  // linear ramp of the reversal scale; 0 disables
  std::size_t batch_size = 256;
  std::size_t discriminator_hidden = 64;
  OrthoMode ortho_mode = OrthoMode::PerNode;
  bool edge_mask_remove_edges = false;

  void validate() const;
};

// Shared GAT plus, for two or more tasks, one private GAT per task and a task
// discriminator over shared embeddings. A single-task model is the shared
// encoder and its head.
class SharedPrivateModel {
 public:
  SharedPrivateModel() = default;
  SharedPrivateModel(std::vector<TaskKind> tasks, std::size_t input_dim, bool identity_input,
                     const MTLConfig& config, Rng& rng);

  const std::vector<TaskKind>& tasks() const { return tasks_; }
  std::size_t num_tasks() const { return tasks_.size(); }
  bool adversarial() const { return tasks_.size() >= 2; }
  std::size_t embed_dim() const { return shared_.embed_dim(); }
  std::size_t input_dim() const { return input_dim_; }
  bool identity_input() const { return identity_input_; }

  const Encoder& shared() const { return shared_; }
  const Encoder& private_encoder(std::size_t t) const;
  const TaskHead& head(std::size_t t) const { return heads_.at(t); }
  const Mlp& discriminator() const { return discriminator_; }

  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  // Parameters updated on a step of task t: shared, private t, head t and the
  // discriminator.
  std::vector<Tensor> step_parameters(std::size_t t) const;
  std::uint64_t arch_hash() const;

 private:
  std::vector<TaskKind> tasks_;
  std::size_t input_dim_ = 0;
  bool identity_input_ = true;
  MTLConfig config_;
  Encoder shared_;
  std::vector<Encoder> private_;
  std::vector<TaskHead> heads_;
  Mlp discriminator_;
};

// Text that, with parameter names and shapes, fixes the checkpoint layout.
std::string model_descriptor(const std::vector<TaskKind>& tasks, std::size_t input_dim, bool identity_input,
                             const MTLConfig& config);

// ---- loss terms ----------------------------------------------------------------

// Softmax over tasks for each row of x.
Matrix discriminator_forward(const SharedPrivateModel& model, const Matrix& x);

// Mean cross-entropy of the discriminator on shared-embedding rows. The shared
// embedding passes a gradient reversal layer first, so the discriminator
// descends this loss while the encoder below ascends it, scaled by grl_scale.
Tensor adversarial_loss(const Mlp& discriminator, const Tensor& shared, std::span<const NodeIndex> nodes,
                        std::span<const std::uint32_t> task_labels, double grl_scale);

// Per node: mean over nodes of (private_i . shared_i)^2. Batch variant:
// ||P^T S||_F^2 / N over the gathered rows.
Tensor orthogonality_loss(const Tensor& private_emb, const Tensor& shared, std::span<const NodeIndex> nodes,
                          OrthoMode mode = OrthoMode::PerNode);

double total_step_loss(double task, double adversarial, double orthogonality, const MTLConfig& config);

struct StepLosses {
  Tensor task;
  Tensor adversarial;    // undefined for single-task models
  Tensor orthogonality;  // undefined for single-task models
  Tensor total;
};

// Forward pass for task t on one minibatch. Leaves the tape ready for
// total.backward().
StepLosses step_losses(const SharedPrivateModel& model, std::size_t t, const PretextBatch& batch,
                       const AttentionGraph& graph, const Tensor* features, const MTLConfig& config,
                       double grl_scale);

// ---- training ------------------------------------------------------------------

struct TrainHistory {
  std::vector<std::vector<double>> task_loss;  // [task][epoch], mean over the visit
  std::vector<double> total_loss;              // [epoch], mean over all steps
  std::size_t steps = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  SharedPrivateModel model;
  TrainHistory history;
  std::uint64_t seed = 0;
};

// Round-robin task loop: each epoch visits every task once and makes one
// shuffled minibatch pass over its samples. batches[t] belongs to tasks[t].
TrainResult train_multitask(const std::vector<TaskKind>& tasks, const HetGraph& g,
                            const std::vector<PretextBatch>& batches, const MTLConfig& config, std::uint64_t seed,
                            const Matrix* features = nullptr);

struct SingleTaskResult {
  Encoder encoder;
  TaskHead head;
  TrainHistory history;
  std::uint64_t arch_hash = 0;
  std::uint64_t seed = 0;
  std::vector<NamedTensor> named_parameters() const;
};

// Plain trainer for one task: encoder, head and Adam.
SingleTaskResult train_single_task(TaskKind task, const HetGraph& g, const PretextBatch& batch,
                                   const MTLConfig& config, std::uint64_t seed, const Matrix* features = nullptr);

// |V| x w for Shared; concat appends each private embedding in task order.
Matrix export_embeddings(const SharedPrivateModel& model, const HetGraph& g, ExportMode mode = ExportMode::Shared,
                         const Matrix* features = nullptr);

void save_model(std::ostream& out, const SharedPrivateModel& model, std::uint64_t seed, std::uint64_t step);
CheckpointHeader load_model(std::istream& in, SharedPrivateModel& model);

void write_embeddings(std::ostream& out, const Matrix& embeddings, const HetGraph& g);
Matrix read_embeddings(std::istream& in, const HetGraph& g);

}  // namespace biossl
