#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "biossl/graph.hpp"
#include "biossl/nn.hpp"
#include "biossl/similarity.hpp"

namespace biossl {

enum class TaskKind : std::uint8_t { ClusterPre, PairDistance, EdgeMask, PathClass, SimReg, SimCon };
enum class Modality : std::uint8_t { Structure, Semantic, Attribute };
enum class Locality : std::uint8_t { Local, Global, Strong, Weak };

inline constexpr std::size_t kNumTasks = 6;
inline constexpr std::array<TaskKind, kNumTasks> kAllTasks = {
    TaskKind::ClusterPre, TaskKind::PairDistance, TaskKind::EdgeMask,
    TaskKind::PathClass,  TaskKind::SimReg,       TaskKind::SimCon};

std::string_view to_string(TaskKind k);
std::optional<TaskKind> parse_task_kind(std::string_view s);
Modality modality_of(TaskKind k);
Locality locality_of(TaskKind k);
std::string_view to_string(Modality m);
std::string_view to_string(Locality l);
// "L", "G", "S" or "W".
char locality_letter(Locality l);

// PathClass label for corrupted paths; true paths use their template id.
inline constexpr std::uint32_t kCorruptedPathClass = 16;
inline constexpr std::size_t kNumPathClasses = 17;

struct ClusterSample {
  NodeIndex node = 0;
  double y = 0.0;
};

struct DistSample {
  NodeIndex i = 0;
  NodeIndex j = 0;
  std::uint32_t label = 0;  // DistanceClass D1..D4Plus
};

struct EdgeMaskSample {
  NodeIndex i = 0;
  NodeIndex j = 0;
  std::uint32_t label = 0;  // EdgeType index
};

struct PathSample {
  MetaPath nodes{};
  std::uint32_t label = 0;
};

struct SimRegSample {
  NodeIndex i = 0;
  NodeIndex j = 0;
  double y = 0.0;
};

// sim_ij >= sim_ik; i, j, k share a node type.
struct SimConSample {
  NodeIndex i = 0;
  NodeIndex j = 0;
  NodeIndex k = 0;
  double sim_ij = 0.0;
  double sim_ik = 0.0;
};

using SampleList = std::variant<std::vector<ClusterSample>, std::vector<DistSample>, std::vector<EdgeMaskSample>,
                                std::vector<PathSample>, std::vector<SimRegSample>, std::vector<SimConSample>>;

struct PretextBatch {
  TaskKind kind = TaskKind::ClusterPre;
  SampleList samples;
  std::vector<std::string> warnings;
  // EdgeMask only: the sampled edges, for runs that drop them from the
  // encoding graph.
  std::vector<std::pair<NodeIndex, NodeIndex>> masked_edges;

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  // Samples at the given positions, in that order.
  PretextBatch subset(std::span<const std::size_t> positions) const;
  // Sorted unique node indices touched by the samples.
  std::vector<NodeIndex> nodes() const;
};

PretextBatch make_empty_batch(TaskKind kind);

// ---- samplers ----------------------------------------------------------------

// Without replacement, count must not exceed the node count.
PretextBatch sample_cluster(const HetGraph& g, std::size_t count, Rng& rng, bool with_replacement = false);

inline constexpr int kPairRejectionLimit = 200;
PretextBatch sample_pair_distance(const HetGraph& g, std::size_t count, Rng& rng);

// ceil(mask_ratio * |E|) distinct edges, each in a random orientation.
PretextBatch sample_edge_mask(const HetGraph& g, double mask_ratio, Rng& rng);

inline constexpr int kTemplateFailureLimit = 3;
inline constexpr int kCorruptionTries = 20;
PretextBatch sample_paths(const HetGraph& g, std::size_t per_template, Rng& rng);

PretextBatch sample_simreg(const SimTable& table, std::size_t count, Rng& rng);
PretextBatch sample_simcon(const SimTable& table, std::size_t count, Rng& rng);

struct SamplingConfig {
  std::optional<std::size_t> cluster_count;  // all nodes when unset
  double pair_factor = 10.0;
  double edge_mask_ratio = 0.2;
  bool edge_mask_remove_edges = false;
  std::size_t per_template = 500;
  double simreg_factor = 10.0;
  double simcon_factor = 10.0;
};

PretextBatch sample_task(TaskKind kind, const HetGraph& g, const SimTable* sims, const SamplingConfig& config,
                         Rng& rng);

// ---- heads and losses ----------------------------------------------------------

// Number of embeddings concatenated per sample.
std::size_t task_arity(TaskKind k);
// Head output width; 0 for the cosine tasks, which have no head.
std::size_t task_output_width(TaskKind k);

class TaskHead {
 public:
  TaskHead() = default;
  TaskHead(TaskKind kind, std::size_t embed_dim, Rng& rng);

  TaskKind kind() const { return kind_; }
  std::size_t embed_dim() const { return embed_dim_; }
  std::size_t input_width() const { return embed_dim_ * task_arity(kind_); }
  bool has_parameters() const { return task_output_width(kind_) > 0; }
  // Raw head output (logits, or the pre-sigmoid score for ClusterPre).
  Tensor forward(const Tensor& features) const;
  const Linear& linear() const { return linear_; }
  void append_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;
  std::vector<Tensor> parameters() const;

 private:
  TaskKind kind_ = TaskKind::ClusterPre;
  std::size_t embed_dim_ = 0;
  Linear linear_;
};

// Per-sample head input: endpoint embeddings concatenated in sample order.
Tensor task_features(const PretextBatch& batch, const Tensor& embeddings);

// Mean loss of the batch as a 1x1 tensor on the tape.
Tensor task_loss(const PretextBatch& batch, const Tensor& embeddings, const TaskHead& head);

// Softmax class distribution per sample for the classification tasks.
Matrix class_probabilities(const PretextBatch& batch, const Matrix& embeddings, const TaskHead& head);

// One line per sample: task name, then tab-separated fields.
void write_batch(std::ostream& out, const PretextBatch& batch);

}  // namespace biossl
