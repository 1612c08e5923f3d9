#include "biossl/pretext.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <type_traits>

namespace biossl {

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::ClusterPre: return "ClusterPre";
    case TaskKind::PairDistance: return "PairDistance";
    case TaskKind::EdgeMask: return "EdgeMask";
    case TaskKind::PathClass: return "PathClass";
    case TaskKind::SimReg: return "SimReg";
    case TaskKind::SimCon: return "SimCon";
  }
  return "?";
}

std::optional<TaskKind> parse_task_kind(std::string_view s) {
  std::string l;
  for (char c : s) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (TaskKind k : kAllTasks) {
    std::string name;
    for (char c : to_string(k)) name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (l == name) return k;
  }
  return std::nullopt;
}

Modality modality_of(TaskKind k) {
  switch (k) {
    case TaskKind::ClusterPre:
    case TaskKind::PairDistance: return Modality::Structure;
    case TaskKind::EdgeMask:
    case TaskKind::PathClass: return Modality::Semantic;
    case TaskKind::SimReg:
    case TaskKind::SimCon: return Modality::Attribute;
  }
  return Modality::Structure;
}

Locality locality_of(TaskKind k) {
  switch (k) {
    case TaskKind::ClusterPre:
    case TaskKind::EdgeMask: return Locality::Local;
    case TaskKind::PairDistance:
    case TaskKind::PathClass: return Locality::Global;
    case TaskKind::SimReg: return Locality::Strong;
    case TaskKind::SimCon: return Locality::Weak;
  }
  return Locality::Local;
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::Structure: return "Structure";
    case Modality::Semantic: return "Semantic";
    case Modality::Attribute: return "Attribute";
  }
  return "?";
}

std::string_view to_string(Locality l) {
  switch (l) {
    case Locality::Local: return "Local";
    case Locality::Global: return "Global";
    case Locality::Strong: return "Strong";
    case Locality::Weak: return "Weak";
  }
  return "?";
}

char locality_letter(Locality l) {
  switch (l) {
    case Locality::Local: return 'L';
    case Locality::Global: return 'G';
    case Locality::Strong: return 'S';
    case Locality::Weak: return 'W';
  }
  return '?';
}

// ---- batch ---------------------------------------------------------------------

std::size_t PretextBatch::size() const {
  return std::visit([](const auto& v) { return v.size(); }, samples);
}

PretextBatch PretextBatch::subset(std::span<const std::size_t> positions) const {
  PretextBatch out;
  out.kind = kind;
  out.samples = std::visit(
      [&](const auto& v) -> SampleList {
        std::remove_cvref_t<decltype(v)> picked;
        picked.reserve(positions.size());
        for (std::size_t p : positions) {
          if (p >= v.size()) throw IndexError("batch position out of range");
          picked.push_back(v[p]);
        }
        return picked;
      },
      samples);
  return out;
}

std::vector<NodeIndex> PretextBatch::nodes() const {
  std::vector<NodeIndex> out;
  std::visit(
      [&](const auto& v) {
        for (const auto& s : v) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, ClusterSample>) {
            out.push_back(s.node);
          } else if constexpr (std::is_same_v<S, PathSample>) {
            out.insert(out.end(), s.nodes.begin(), s.nodes.end());
          } else if constexpr (std::is_same_v<S, SimConSample>) {
            out.insert(out.end(), {s.i, s.j, s.k});
          } else {
            out.insert(out.end(), {s.i, s.j});
          }
        }
      },
      samples);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PretextBatch make_empty_batch(TaskKind kind) {
  PretextBatch b;
  b.kind = kind;
  switch (kind) {
    case TaskKind::ClusterPre: b.samples = std::vector<ClusterSample>{}; break;
    case TaskKind::PairDistance: b.samples = std::vector<DistSample>{}; break;
    case TaskKind::EdgeMask: b.samples = std::vector<EdgeMaskSample>{}; break;
    case TaskKind::PathClass: b.samples = std::vector<PathSample>{}; break;
    case TaskKind::SimReg: b.samples = std::vector<SimRegSample>{}; break;
    case TaskKind::SimCon: b.samples = std::vector<SimConSample>{}; break;
  }
  return b;
}

// ---- samplers --------------------------------------------------------------------

PretextBatch sample_cluster(const HetGraph& g, std::size_t count, Rng& rng, bool with_replacement) {
  PretextBatch b = make_empty_batch(TaskKind::ClusterPre);
  const std::size_t n = g.num_nodes();
  if (count == 0) return b;
  if (n == 0) throw SamplingError("ClusterPre: graph has no nodes");
  if (!with_replacement && count > n) {
    throw InputError("ClusterPre: " + std::to_string(count) + " samples requested without replacement from " +
                     std::to_string(n) + " nodes");
  }
  const std::vector<double> cc = clustering_coefficients(g);
  auto& out = std::get<std::vector<ClusterSample>>(b.samples);
  out.reserve(count);
  if (with_replacement) {
    for (std::size_t s = 0; s < count; ++s) {
      const auto v = static_cast<NodeIndex>(rng.index(n));
      out.push_back({v, cc[v]});
    }
    return b;
  }
  std::vector<NodeIndex> order(n);
  for (std::size_t v = 0; v < n; ++v) order[v] = static_cast<NodeIndex>(v);
  for (std::size_t s = 0; s < count; ++s) {
    std::swap(order[s], order[s + rng.index(n - s)]);
    out.push_back({order[s], cc[order[s]]});
  }
  return b;
}

PretextBatch sample_pair_distance(const HetGraph& g, std::size_t count, Rng& rng) {
  PretextBatch b = make_empty_batch(TaskKind::PairDistance);
  if (count == 0) return b;
  const std::size_t n = g.num_nodes();
  if (n < 2) throw SamplingError("PairDistance: graph needs at least two nodes");
  auto& out = std::get<std::vector<DistSample>>(b.samples);
  out.reserve(count);
  int rejections = 0;
  while (out.size() < count) {
    const auto i = static_cast<NodeIndex>(rng.index(n));
    auto j = static_cast<NodeIndex>(rng.index(n - 1));
    if (j >= i) ++j;
    const DistanceClass c = pair_distance_class(g, i, j);
    if (c == DistanceClass::Unreachable) {
      if (++rejections >= kPairRejectionLimit) {
        throw SamplingError("PairDistance: " + std::to_string(kPairRejectionLimit) +
                            " consecutive unreachable pairs; graph too fragmented");
      }
      continue;
    }
    rejections = 0;
    out.push_back({i, j, static_cast<std::uint32_t>(c)});
  }
  return b;
}

PretextBatch sample_edge_mask(const HetGraph& g, double mask_ratio, Rng& rng) {
  if (!(mask_ratio > 0.0 && mask_ratio <= 1.0)) throw InputError("EdgeMask: mask ratio must lie in (0, 1]");
  PretextBatch b = make_empty_batch(TaskKind::EdgeMask);
  const auto edges = g.edges();
  const std::size_t m = edges.size();
  const auto count = std::min(m, static_cast<std::size_t>(std::ceil(mask_ratio * static_cast<double>(m) - 1e-9)));
  std::vector<std::size_t> order(m);
  for (std::size_t e = 0; e < m; ++e) order[e] = e;
  auto& out = std::get<std::vector<EdgeMaskSample>>(b.samples);
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::swap(order[s], order[s + rng.index(m - s)]);
    const EdgeRec& e = edges[order[s]];
    const bool flip = rng.coin();
    out.push_back({flip ? e.v : e.u, flip ? e.u : e.v, static_cast<std::uint32_t>(e.etype)});
    b.masked_edges.emplace_back(e.u, e.v);
  }
  return b;
}

PretextBatch sample_paths(const HetGraph& g, std::size_t per_template, Rng& rng) {
  if (per_template == 0) throw InputError("PathClass: per_template must be at least 1");
  PretextBatch b = make_empty_batch(TaskKind::PathClass);
  auto& out = std::get<std::vector<PathSample>>(b.samples);
  for (const MetaPathTemplate& t : metapath_templates()) {
    std::size_t made = 0;
    int failures = 0;
    try {
      while (made < per_template) {
        const auto path = walk_metapath(g, t, rng);
        if (!path) {
          if (++failures >= kTemplateFailureLimit) {
            b.warnings.push_back("template " + metapath_name(t) + " skipped after " + std::to_string(made) +
                                 " walks: repeated dead ends");
            break;
          }
          continue;
        }
        failures = 0;
        out.push_back({*path, static_cast<std::uint32_t>(t.template_id)});
        ++made;
      }
    } catch (const UnsatisfiableTemplate& e) {
      b.warnings.push_back(std::string("template skipped: ") + e.what());
    }
  }

  const std::size_t true_count = out.size();
  std::size_t dropped = 0;
  for (std::size_t s = 0; s < true_count; ++s) {
    const PathSample& base = out[rng.index(true_count)];
    bool placed = false;
    for (int attempt = 0; attempt < kCorruptionTries && !placed; ++attempt) {
      const std::size_t pos = rng.index(kMetaPathLength);
      const auto pool = g.nodes_of_type(g.ntype(base.nodes[pos]));
      MetaPath p = base.nodes;
      p[pos] = pool[rng.index(pool.size())];
      bool broken = false;
      for (std::size_t k = 1; k < kMetaPathLength; ++k) {
        if (!g.has_edge(p[k - 1], p[k])) broken = true;
      }
      if (broken) {
        out.push_back({p, kCorruptedPathClass});
        placed = true;
      }
    }
    if (!placed) ++dropped;
  }
  if (dropped > 0) {
    b.warnings.push_back(std::to_string(dropped) + " corrupted paths dropped after " +
                         std::to_string(kCorruptionTries) + " tries");
  }
  return b;
}

PretextBatch sample_simreg(const SimTable& table, std::size_t count, Rng& rng) {
  if (table.empty()) throw SamplingError("SimReg: similarity table is empty");
  PretextBatch b = make_empty_batch(TaskKind::SimReg);
  const std::vector<SimEntry> entries = table.entries();
  auto& out = std::get<std::vector<SimRegSample>>(b.samples);
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const SimEntry& e = entries[rng.index(entries.size())];
    out.push_back({e.i, e.j, e.sim});
  }
  return b;
}

PretextBatch sample_simcon(const SimTable& table, std::size_t count, Rng& rng) {
  const std::vector<NodeIndex> anchors = table.anchors(2);
  if (anchors.empty()) throw SamplingError("SimCon: no node has two scored partners");
  PretextBatch b = make_empty_batch(TaskKind::SimCon);
  auto& out = std::get<std::vector<SimConSample>>(b.samples);
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const NodeIndex i = anchors[rng.index(anchors.size())];
    const auto partners = table.partners(i);
    const std::size_t a = rng.index(partners.size());
    std::size_t c = rng.index(partners.size() - 1);
    if (c >= a) ++c;
    auto j = partners[a];
    auto k = partners[c];
    if (j.second < k.second) std::swap(j, k);
    out.push_back({i, j.first, k.first, j.second, k.second});
  }
  return b;
}

PretextBatch sample_task(TaskKind kind, const HetGraph& g, const SimTable* sims, const SamplingConfig& config,
                         Rng& rng) {
  const auto scaled = [&](double factor) {
    return static_cast<std::size_t>(std::llround(factor * static_cast<double>(g.num_nodes())));
  };
  const auto need_sims = [&]() -> const SimTable& {
    if (!sims) throw InputError(std::string(to_string(kind)) + " needs a similarity table");
    return *sims;
  };
  switch (kind) {
    case TaskKind::ClusterPre: return sample_cluster(g, config.cluster_count.value_or(g.num_nodes()), rng);
    case TaskKind::PairDistance: return sample_pair_distance(g, scaled(config.pair_factor), rng);
    case TaskKind::EdgeMask: return sample_edge_mask(g, config.edge_mask_ratio, rng);
    case TaskKind::PathClass: return sample_paths(g, config.per_template, rng);
    case TaskKind::SimReg: return sample_simreg(need_sims(), scaled(config.simreg_factor), rng);
    case TaskKind::SimCon: return sample_simcon(need_sims(), scaled(config.simcon_factor), rng);
  }
  throw InputError("unknown task");
}

// ---- heads and losses -------------------------------------------------------------

std::size_t task_arity(TaskKind k) {
  switch (k) {
    case TaskKind::ClusterPre: return 1;
    case TaskKind::PathClass: return kMetaPathLength;
    default: return 2;
  }
}

std::size_t task_output_width(TaskKind k) {
  switch (k) {
    case TaskKind::ClusterPre: return 1;
    case TaskKind::PairDistance: return kNumDistanceClasses;
    case TaskKind::EdgeMask: return kNumEdgeTypes;
    case TaskKind::PathClass: return kNumPathClasses;
    default: return 0;
  }
}

TaskHead::TaskHead(TaskKind kind, std::size_t embed_dim, Rng& rng) : kind_(kind), embed_dim_(embed_dim) {
  if (has_parameters()) linear_ = Linear(input_width(), task_output_width(kind), rng);
}

Tensor TaskHead::forward(const Tensor& features) const {
  if (!has_parameters()) throw ShapeError(std::string(to_string(kind_)) + " has no head");
  if (features.cols() != input_width()) {
    throw ShapeError(std::string(to_string(kind_)) + " head expects width " + std::to_string(input_width()) +
                     ", got " + std::to_string(features.cols()));
  }
  return linear_.forward(features);
}

void TaskHead::append_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const {
  if (!has_parameters()) return;
  out.push_back({prefix + ".weight", linear_.weight()});
  out.push_back({prefix + ".bias", linear_.bias()});
}

std::vector<Tensor> TaskHead::parameters() const {
  if (!has_parameters()) return {};
  return {linear_.weight(), linear_.bias()};
}

namespace {

struct Columns {
  std::vector<std::vector<std::uint32_t>> cols;
};

// Node index columns of a batch, one vector per sample position.
Columns node_columns(const PretextBatch& batch) {
  Columns c;
  c.cols.resize(task_arity(batch.kind));
  std::visit(
      [&](const auto& v) {
        for (auto& col : c.cols) col.reserve(v.size());
        for (const auto& s : v) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, ClusterSample>) {
            c.cols[0].push_back(s.node);
          } else if constexpr (std::is_same_v<S, PathSample>) {
            for (std::size_t k = 0; k < kMetaPathLength; ++k) c.cols[k].push_back(s.nodes[k]);
          } else if constexpr (std::is_same_v<S, SimConSample>) {
            c.cols[0].push_back(s.i);
            c.cols[1].push_back(s.j);
          } else {
            c.cols[0].push_back(s.i);
            c.cols[1].push_back(s.j);
          }
        }
      },
      batch.samples);
  return c;
}

void check_batch(const PretextBatch& batch) {
  const std::size_t expected = static_cast<std::size_t>(batch.kind);
  if (batch.samples.index() != expected) {
    throw ShapeError("batch samples do not match task " + std::string(to_string(batch.kind)));
  }
  if (batch.empty()) throw ShapeError("empty " + std::string(to_string(batch.kind)) + " batch");
}

template <typename S, typename F>
std::vector<std::uint32_t> labels_of(const PretextBatch& batch, F get) {
  std::vector<std::uint32_t> out;
  for (const S& s : std::get<std::vector<S>>(batch.samples)) out.push_back(get(s));
  return out;
}

}  // namespace

Tensor task_features(const PretextBatch& batch, const Tensor& embeddings) {
  check_batch(batch);
  const Columns c = node_columns(batch);
  if (c.cols.size() == 1) return ops::gather_rows(embeddings, c.cols[0]);
  std::vector<Tensor> parts;
  for (const auto& col : c.cols) parts.push_back(ops::gather_rows(embeddings, col));
  return ops::concat_cols(parts);
}

Tensor task_loss(const PretextBatch& batch, const Tensor& embeddings, const TaskHead& head) {
  check_batch(batch);
  if (head.kind() != batch.kind) throw ShapeError("head and batch belong to different tasks");
  if (embeddings.cols() != head.embed_dim()) {
    throw ShapeError("embedding width " + std::to_string(embeddings.cols()) + " does not match head width " +
                     std::to_string(head.embed_dim()));
  }
  switch (batch.kind) {
    case TaskKind::ClusterPre: {
      const auto& v = std::get<std::vector<ClusterSample>>(batch.samples);
      Matrix target(v.size(), 1);
      for (std::size_t s = 0; s < v.size(); ++s) target(s, 0) = v[s].y;
      return ops::mse(ops::sigmoid(head.forward(task_features(batch, embeddings))), target);
    }
    case TaskKind::PairDistance: {
      const auto labels = labels_of<DistSample>(batch, [](const DistSample& s) { return s.label; });
      return ops::cross_entropy(head.forward(task_features(batch, embeddings)), labels);
    }
    case TaskKind::EdgeMask: {
      const auto labels = labels_of<EdgeMaskSample>(batch, [](const EdgeMaskSample& s) { return s.label; });
      return ops::cross_entropy(head.forward(task_features(batch, embeddings)), labels);
    }
    case TaskKind::PathClass: {
      const auto labels = labels_of<PathSample>(batch, [](const PathSample& s) { return s.label; });
      return ops::cross_entropy(head.forward(task_features(batch, embeddings)), labels);
    }
    case TaskKind::SimReg: {
      const auto& v = std::get<std::vector<SimRegSample>>(batch.samples);
      const Columns c = node_columns(batch);
      Matrix target(v.size(), 1);
      for (std::size_t s = 0; s < v.size(); ++s) target(s, 0) = v[s].y;
      const Tensor cos = ops::row_cosine(ops::gather_rows(embeddings, c.cols[0]), ops::gather_rows(embeddings, c.cols[1]));
      return ops::mse(cos, target);
    }
    case TaskKind::SimCon: {
      const auto& v = std::get<std::vector<SimConSample>>(batch.samples);
      std::vector<std::uint32_t> is, js, ks;
      Matrix margin(v.size(), 1);
      for (std::size_t s = 0; s < v.size(); ++s) {
        is.push_back(v[s].i);
        js.push_back(v[s].j);
        ks.push_back(v[s].k);
        margin(s, 0) = v[s].sim_ij - v[s].sim_ik;
      }
      const Tensor fi = ops::gather_rows(embeddings, is);
      const Tensor gap = ops::sub(ops::row_cosine(fi, ops::gather_rows(embeddings, js)),
                                  ops::row_cosine(fi, ops::gather_rows(embeddings, ks)));
      // g = (cos_ij - cos_ik) - (sim_ij - sim_ik); loss = max(0, -g)
      const Tensor g = ops::sub(gap, Tensor::constant(std::move(margin)));
      return ops::mean(ops::relu(ops::scale(g, -1.0)));
    }
  }
  throw ShapeError("unknown task");
}

Matrix class_probabilities(const PretextBatch& batch, const Matrix& embeddings, const TaskHead& head) {
  if (task_output_width(batch.kind) < 2) {
    throw ShapeError(std::string(to_string(batch.kind)) + " is not a classification task");
  }
  const Tensor emb = Tensor::constant(embeddings);
  return ops::softmax_rows(head.forward(task_features(batch, emb))).value();
}

void write_batch(std::ostream& out, const PretextBatch& batch) {
  const std::string name(to_string(batch.kind));
  char buf[64];
  const auto real = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  std::visit(
      [&](const auto& v) {
        for (const auto& s : v) {
          using S = std::decay_t<decltype(s)>;
          out << name;
          if constexpr (std::is_same_v<S, ClusterSample>) {
            out << '\t' << s.node << '\t' << real(s.y);
          } else if constexpr (std::is_same_v<S, DistSample> || std::is_same_v<S, EdgeMaskSample>) {
            out << '\t' << s.i << '\t' << s.j << '\t' << s.label;
          } else if constexpr (std::is_same_v<S, PathSample>) {
            for (NodeIndex n : s.nodes) out << '\t' << n;
            out << '\t' << s.label;
          } else if constexpr (std::is_same_v<S, SimRegSample>) {
            out << '\t' << s.i << '\t' << s.j << '\t' << real(s.y);
          } else {
            out << '\t' << s.i << '\t' << s.j << '\t' << s.k << '\t' << real(s.sim_ij) << '\t' << real(s.sim_ik);
          }
          out << '\n';
        }
      },
      batch.samples);
}

}  // namespace biossl
