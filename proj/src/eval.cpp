#include "biossl/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_set>

namespace biossl {

std::string_view to_string(LinkKind k) { return k == LinkKind::DDI ? "DDI" : "DTI"; }

std::string_view to_string(ScenarioKind s) { return s == ScenarioKind::Warm ? "warm" : "cold"; }

namespace {

std::string lower(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

std::uint64_t pair_key(NodeIndex a, NodeIndex b) { return (static_cast<std::uint64_t>(a) << 32) | b; }

}  // namespace

std::optional<LinkKind> parse_link_kind(std::string_view s) {
  const std::string l = lower(s);
  if (l == "ddi") return LinkKind::DDI;
  if (l == "dti") return LinkKind::DTI;
  return std::nullopt;
}

std::optional<ScenarioKind> parse_scenario(std::string_view s) {
  const std::string l = lower(s);
  if (l == "warm" || l == "warmstart" || l == "warm-start") return ScenarioKind::Warm;
  if (l == "cold" || l == "colddrug" || l == "cold-drug" || l == "coldstartdrug") return ScenarioKind::ColdDrug;
  return std::nullopt;
}

EdgeType link_edge_type(LinkKind k) { return k == LinkKind::DDI ? EdgeType::DrugDrug : EdgeType::DrugProtein; }

std::size_t LinkDataset::positives() const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const LinkPair& p) {
    return p.label > 0.5;
  }));
}

// ---- datasets --------------------------------------------------------------------

namespace {

// Draws `count` distinct non-edges (a, b) with a from `firsts` and b from
// `seconds`. Symmetric kinds key pairs without order and skip a == b.
std::vector<LinkPair> draw_negatives(const HetGraph& g, std::span<const NodeIndex> firsts,
                                     std::span<const NodeIndex> seconds, bool symmetric, std::size_t count,
                                     Rng& rng) {
  std::vector<LinkPair> out;
  if (count == 0) return out;
  if (firsts.empty() || seconds.empty()) throw SamplingError("no candidate pairs for negative sampling");
  const auto key = [&](NodeIndex a, NodeIndex b) {
    return symmetric ? pair_key(std::min(a, b), std::max(a, b)) : pair_key(a, b);
  };
  const auto valid = [&](NodeIndex a, NodeIndex b) { return a != b && !g.has_edge(a, b); };
  const std::size_t region = firsts.size() * seconds.size();
  std::unordered_set<std::uint64_t> chosen;
  if (region <= 200000 || region < 4 * count) {
    std::vector<LinkPair> pool;
    for (NodeIndex a : firsts) {
      for (NodeIndex b : seconds) {
        if (!valid(a, b)) continue;
        if (!chosen.insert(key(a, b)).second) continue;
        pool.push_back({a, b, 0.0});
      }
    }
    if (pool.size() < count) {
      throw SamplingError("only " + std::to_string(pool.size()) + " non-edges available for " +
                          std::to_string(count) + " negatives");
    }
    for (std::size_t s = 0; s < count; ++s) std::swap(pool[s], pool[s + rng.index(pool.size() - s)]);
    pool.resize(count);
    return pool;
  }
  while (out.size() < count) {
    const NodeIndex a = firsts[rng.index(firsts.size())];
    const NodeIndex b = seconds[rng.index(seconds.size())];
    if (!valid(a, b) || !chosen.insert(key(a, b)).second) continue;
    out.push_back({a, b, 0.0});
  }
  return out;
}

std::span<const NodeIndex> partner_pool(const HetGraph& g, LinkKind kind) {
  return g.nodes_of_type(kind == LinkKind::DDI ? NodeType::Drug : NodeType::Protein);
}

}  // namespace

LinkDataset build_link_dataset(const HetGraph& g, LinkKind kind, Rng& rng) {
  LinkDataset ds;
  ds.kind = kind;
  const EdgeType et = link_edge_type(kind);
  for (const EdgeRec& e : g.edges()) {
    if (e.etype != et) continue;
    NodeIndex a = e.u, b = e.v;
    if (g.ntype(a) != NodeType::Drug) std::swap(a, b);
    ds.pairs.push_back({a, b, 1.0});
  }
  if (ds.pairs.empty()) throw SamplingError("graph has no " + std::string(to_string(et)) + " edges");
  const std::size_t p = ds.pairs.size();
  auto neg = draw_negatives(g, g.nodes_of_type(NodeType::Drug), partner_pool(g, kind), kind == LinkKind::DDI, p, rng);
  ds.pairs.insert(ds.pairs.end(), neg.begin(), neg.end());
  return ds;
}

LinkSplit split_dataset(const HetGraph& g, const LinkDataset& dataset, const ScenarioConfig& scenario, Rng& rng) {
  LinkSplit s;
  std::vector<LinkPair> pos, neg;
  for (const LinkPair& p : dataset.pairs) (p.label > 0.5 ? pos : neg).push_back(p);

  if (scenario.kind == ScenarioKind::Warm) {
    if (!(scenario.train_frac > 0.0 && scenario.train_frac < 1.0)) throw InputError("train fraction must lie in (0, 1)");
    for (auto* part : {&pos, &neg}) {
      rng.shuffle(std::span<LinkPair>(*part));
      const auto n_train = static_cast<std::size_t>(
          std::floor(scenario.train_frac * static_cast<double>(part->size()) + 1e-9));
      s.train.insert(s.train.end(), part->begin(), part->begin() + static_cast<std::ptrdiff_t>(n_train));
      s.test.insert(s.test.end(), part->begin() + static_cast<std::ptrdiff_t>(n_train), part->end());
    }
    if (s.test.empty()) throw SamplingError("warm split left the test set empty");
    return s;
  }

  if (!(scenario.holdout_drug_frac > 0.0 && scenario.holdout_drug_frac < 1.0)) {
    throw InputError("held-out drug fraction must lie in (0, 1)");
  }
  const bool ddi = dataset.kind == LinkKind::DDI;
  std::vector<NodeIndex> drugs;
  for (const LinkPair& p : pos) {
    drugs.push_back(p.i);
    if (ddi) drugs.push_back(p.j);
  }
  std::sort(drugs.begin(), drugs.end());
  drugs.erase(std::unique(drugs.begin(), drugs.end()), drugs.end());
  const auto n_hold = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(scenario.holdout_drug_frac * static_cast<double>(drugs.size()))));
  if (n_hold >= drugs.size()) throw SamplingError("cold split would hold out every drug");
  for (std::size_t k = 0; k < n_hold; ++k) std::swap(drugs[k], drugs[k + rng.index(drugs.size() - k)]);
  s.held_out_drugs.assign(drugs.begin(), drugs.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::sort(s.held_out_drugs.begin(), s.held_out_drugs.end());
  const auto held = [&](NodeIndex v) {
    return std::binary_search(s.held_out_drugs.begin(), s.held_out_drugs.end(), v);
  };

  for (const LinkPair& p : pos) {
    const bool touches = held(p.i) || (ddi && held(p.j));
    (touches ? s.test : s.train).push_back(p);
  }
  const std::size_t train_pos = s.train.size();
  const std::size_t test_pos = s.test.size();
  if (test_pos == 0) throw SamplingError("cold split left the test set empty; reseed");

  std::vector<NodeIndex> kept;
  for (NodeIndex d : g.nodes_of_type(NodeType::Drug)) {
    if (!held(d)) kept.push_back(d);
  }
  const auto partners = partner_pool(g, dataset.kind);
  auto train_neg = draw_negatives(g, kept, ddi ? std::span<const NodeIndex>(kept) : partners, ddi, train_pos, rng);
  auto test_neg = draw_negatives(g, s.held_out_drugs, partners, ddi, test_pos, rng);
  s.train.insert(s.train.end(), train_neg.begin(), train_neg.end());
  s.test.insert(s.test.end(), test_neg.begin(), test_neg.end());
  return s;
}

// ---- decoder ---------------------------------------------------------------------

std::vector<double> lr_grid(double lo, double hi, std::size_t points) {
  if (points == 0) return {};
  if (points == 1) return {lo};
  std::vector<double> out;
  for (std::size_t k = 0; k < points; ++k) {
    out.push_back(lo + static_cast<double>(k) * (hi - lo) / static_cast<double>(points - 1));
  }
  out.back() = hi;
  return out;
}

namespace {

Matrix pair_features(const Matrix& emb, std::span<const LinkPair> pairs, bool reversed) {
  const std::size_t w = emb.cols;
  Matrix x(pairs.size(), 2 * w);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const NodeIndex a = reversed ? pairs[r].j : pairs[r].i;
    const NodeIndex b = reversed ? pairs[r].i : pairs[r].j;
    if (a >= emb.rows || b >= emb.rows) throw IndexError("pair endpoint has no embedding row");
    auto row = x.row(r);
    std::copy(emb.row(a).begin(), emb.row(a).end(), row.begin());
    std::copy(emb.row(b).begin(), emb.row(b).end(), row.begin() + static_cast<std::ptrdiff_t>(w));
  }
  return x;
}

std::vector<double> raw_scores(const Mlp& mlp, const Matrix& emb, std::span<const LinkPair> pairs, bool symmetric) {
  const auto probs = [&](bool reversed) {
    return ops::sigmoid(mlp.forward(Tensor::constant(pair_features(emb, pairs, reversed)))).value().data;
  };
  std::vector<double> s = probs(false);
  if (symmetric) {
    const std::vector<double> r = probs(true);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = 0.5 * (s[k] + r[k]);
  }
  return s;
}

Matrix apply_standardization(const Matrix& emb, const Decoder& d) {
  if (d.column_mean.empty()) return emb;
  if (d.column_mean.size() != emb.cols) throw ShapeError("embedding width differs from the decoder's");
  Matrix out = emb;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) = (out(r, c) - d.column_mean[c]) / d.column_scale[c];
  }
  return out;
}

// Fits a fresh MLP at a fixed learning rate; none when training diverges.
std::optional<Mlp> fit(const Matrix& emb, std::span<const LinkPair> pairs, bool symmetric, double lr,
                       const DecoderConfig& cfg, Rng rng) {
  std::vector<LinkPair> rows(pairs.begin(), pairs.end());
  if (symmetric) {
    for (const LinkPair& p : pairs) rows.push_back({p.j, p.i, p.label});
  }
  const Matrix x = pair_features(emb, rows, false);
  const std::size_t dims[] = {x.cols, cfg.hidden, 1};
  Mlp mlp(dims, rng);
  AdamConfig ac;
  ac.lr = lr;
  ac.weight_decay = cfg.weight_decay;
  Adam adam(ac);
  const std::vector<Tensor> params = mlp.parameters();
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  try {
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        Matrix xb(end - start, x.cols);
        std::vector<double> yb;
        for (std::size_t r = start; r < end; ++r) {
          std::copy(x.row(order[r]).begin(), x.row(order[r]).end(), xb.row(r - start).begin());
          yb.push_back(rows[order[r]].label);
        }
        const Tensor loss = ops::bce_with_logits(mlp.forward(Tensor::constant(std::move(xb))), yb);
        loss.backward();
        adam.step(params);
        zero_grads(params);
      }
    }
  } catch (const NumericFault&) {
    return std::nullopt;
  }
  return mlp;
}

}  // namespace

Decoder train_decoder(const Matrix& embeddings, std::span<const LinkPair> train, bool symmetric,
                      const DecoderConfig& config, Rng& rng) {
  if (config.lr_grid.empty()) throw InputError("decoder learning-rate grid is empty");
  if (train.empty()) throw InputError("decoder has no training pairs");
  for (const LinkPair& p : train) {
    if (p.i >= embeddings.rows || p.j >= embeddings.rows) {
      throw IndexError("embeddings do not cover pair (" + std::to_string(p.i) + ", " + std::to_string(p.j) + ")");
    }
  }
  Decoder d;
  d.symmetric = symmetric;
  d.lr = config.lr_grid.front();
  if (config.standardize) {
    d.column_mean.assign(embeddings.cols, 0.0);
    d.column_scale.assign(embeddings.cols, 1.0);
    for (std::size_t c = 0; c < embeddings.cols; ++c) {
      std::vector<double> col(embeddings.rows);
      for (std::size_t r = 0; r < embeddings.rows; ++r) col[r] = embeddings(r, c);
      d.column_mean[c] = mean_of(col);
      const double sd = std_of(col);
      if (sd > 1e-12) d.column_scale[c] = sd;
    }
  }
  const Matrix emb = apply_standardization(embeddings, d);
  const Rng base = rng.fork(0x5eed);

  if (config.lr_grid.size() > 1) {
    std::vector<LinkPair> pos, neg, fit_part, val_part;
    for (const LinkPair& p : train) (p.label > 0.5 ? pos : neg).push_back(p);
    Rng carve = base.fork(1);
    for (auto* part : {&pos, &neg}) {
      carve.shuffle(std::span<LinkPair>(*part));
      const auto n_val = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(config.validation_frac * static_cast<double>(part->size()))));
      if (n_val >= part->size()) throw SamplingError("training set too small for a validation carve-out");
      val_part.insert(val_part.end(), part->begin(), part->begin() + static_cast<std::ptrdiff_t>(n_val));
      fit_part.insert(fit_part.end(), part->begin() + static_cast<std::ptrdiff_t>(n_val), part->end());
    }
    std::vector<double> val_labels;
    for (const LinkPair& p : val_part) val_labels.push_back(p.label);
    double best = -1.0;
    for (std::size_t k = 0; k < config.lr_grid.size(); ++k) {
      const auto mlp = fit(emb, fit_part, symmetric, config.lr_grid[k], config, base.fork(10 + k));
      double a = std::numeric_limits<double>::quiet_NaN();
      if (mlp) {
        const auto s = raw_scores(*mlp, emb, val_part, symmetric);
        if (std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); })) a = auroc(s, val_labels);
      }
      d.validation_auroc.push_back(a);
      if (!std::isnan(a) && a > best) {
        best = a;
        d.lr = config.lr_grid[k];
      }
    }
    if (best < 0.0) throw NumericFault("decoder diverged at every learning rate");
  }
  auto mlp = fit(emb, train, symmetric, d.lr, config, base.fork(2));
  if (!mlp) throw NumericFault("decoder diverged at the selected learning rate " + std::to_string(d.lr));
  d.mlp = std::move(*mlp);
  return d;
}

std::vector<double> score_pairs(const Decoder& decoder, const Matrix& embeddings, std::span<const LinkPair> pairs) {
  if (pairs.empty()) return {};
  return raw_scores(decoder.mlp, apply_standardization(embeddings, decoder), pairs, decoder.symmetric);
}

// ---- metrics ---------------------------------------------------------------------

namespace {

void check_metric_input(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
  bool pos = false, neg = false;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == 1.0) {
      pos = true;
    } else if (labels[k] == 0.0) {
      neg = true;
    } else {
      throw MetricError("labels must be 0 or 1");
    }
    if (std::isnan(scores[k])) throw MetricError("NaN score");
  }
  if (!pos || !neg) throw MetricError("metric undefined: labels contain a single class");
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const double> labels) {
  check_metric_input(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double p = 0.0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    const double midrank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) {
      if (labels[order[k]] == 1.0) {
        rank_sum += midrank;
        p += 1.0;
      }
    }
    start = end;
  }
  const double q = static_cast<double>(n) - p;
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double aupr(std::span<const double> scores, std::span<const double> labels) {
  check_metric_input(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double total_pos = 0.0;
  for (double l : labels) total_pos += l;
  double tp = 0.0, seen = 0.0, ap = 0.0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    double group_tp = 0.0;
    while (end < n && scores[order[end]] == scores[order[start]]) {
      group_tp += labels[order[end]];
      ++end;
    }
    tp += group_tp;
    seen += static_cast<double>(end - start);
    ap += (group_tp / total_pos) * (tp / seen);
    start = end;
  }
  return ap;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// ---- experiment ------------------------------------------------------------------

const CellResult* EvalReport::cell(LinkKind k) const {
  for (const auto& c : cells) {
    if (c.kind == k) return &c;
  }
  return nullptr;
}

namespace {

struct RepeatOutcome {
  std::vector<double> auroc, aupr, lr;  // per kind
};

struct RepeatPlan {
  std::vector<LinkSplit> splits;  // per kind
  HetGraph pretrain_graph;
};

RepeatPlan plan_repeat(const HetGraph& g, const ExperimentConfig& cfg, std::size_t r) {
  RepeatPlan plan;
  const Rng rep = Rng(cfg.seed).fork(1000 + r);
  std::vector<std::pair<NodeIndex, NodeIndex>> removed;
  for (LinkKind k : cfg.kinds) {
    Rng krng = rep.fork(static_cast<std::uint64_t>(k));
    const LinkDataset ds = build_link_dataset(g, k, krng);
    plan.splits.push_back(split_dataset(g, ds, cfg.scenario, krng));
    for (const LinkPair& p : plan.splits.back().test) {
      if (p.label > 0.5) removed.emplace_back(p.i, p.j);
    }
  }
  if (cfg.exclude_test_edges) plan.pretrain_graph = g.without_edges(removed);
  return plan;
}

RepeatOutcome score_repeat(const ExperimentConfig& cfg, std::size_t r, const RepeatPlan& plan, const Matrix& emb) {
  RepeatOutcome out;
  const Rng rep = Rng(cfg.seed).fork(1000 + r);
  for (std::size_t k = 0; k < cfg.kinds.size(); ++k) {
    const LinkSplit& s = plan.splits[k];
    Rng drng = rep.fork(10 + static_cast<std::uint64_t>(cfg.kinds[k]));
    const Decoder d = train_decoder(emb, s.train, cfg.kinds[k] == LinkKind::DDI, cfg.decoder, drng);
    const std::vector<double> scores = score_pairs(d, emb, s.test);
    std::vector<double> labels;
    for (const LinkPair& p : s.test) labels.push_back(p.label);
    out.auroc.push_back(auroc(scores, labels));
    out.aupr.push_back(aupr(scores, labels));
    out.lr.push_back(d.lr);
  }
  return out;
}

}  // namespace

EvalReport run_experiment(const HetGraph& g, const ExperimentConfig& cfg, const EmbeddingProvider& provider) {
  if (cfg.repeats == 0) throw InputError("at least one repeat is required");
  if (cfg.kinds.empty()) throw InputError("no prediction kinds selected");
  const bool per_repeat = cfg.exclude_test_edges || cfg.repretrain_per_repeat;
  Matrix reused;
  if (!per_repeat) reused = provider(g, 0);

  std::vector<RepeatOutcome> outcomes(cfg.repeats);
  std::vector<std::exception_ptr> errors(cfg.repeats);
  const auto work = [&](std::size_t r) {
    try {
      const RepeatPlan plan = plan_repeat(g, cfg, r);
      if (!per_repeat) {
        outcomes[r] = score_repeat(cfg, r, plan, reused);
      } else {
        const Matrix emb = provider(cfg.exclude_test_edges ? plan.pretrain_graph : g, r);
        outcomes[r] = score_repeat(cfg, r, plan, emb);
      }
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg.jobs, cfg.repeats));
  if (jobs == 1) {
    for (std::size_t r = 0; r < cfg.repeats; ++r) work(r);
  } else {
    std::mutex m;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t r;
          {
            std::lock_guard<std::mutex> lock(m);
            if (next >= cfg.repeats) return;
            r = next++;
          }
          work(r);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const InputError& e) {
      throw InputError("repeat " + std::to_string(r) + " failed: " + e.what());
    } catch (const std::exception& e) {
      throw Error("repeat " + std::to_string(r) + " failed: " + e.what());
    }
  }

  EvalReport rep;
  rep.scenario = cfg.scenario.kind;
  rep.repeats = cfg.repeats;
  for (std::size_t k = 0; k < cfg.kinds.size(); ++k) {
    CellResult c;
    c.kind = cfg.kinds[k];
    for (const auto& o : outcomes) {
      c.auroc.push_back(o.auroc[k]);
      c.aupr.push_back(o.aupr[k]);
      c.chosen_lr.push_back(o.lr[k]);
    }
    rep.cells.push_back(std::move(c));
  }
  return rep;
}

}  // namespace biossl
