#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "hgdre/autodiff.hpp"
#include "hgdre/hetgraph.hpp"
#include "hgdre/nn.hpp"

namespace hgdre {

// One directed update step between node families.
enum class MetaStep {
  kUtteranceToBasic,  // A
  kBasicToType,       // B
  kTypeToBasic,       // C
  kBasicToUtterance,  // D
};

struct MetaPathSchedule {
  std::vector<MetaStep> steps;

  static MetaPathSchedule parse(const std::string& text) {
    if (text.empty()) throw ConfigError("meta-path schedule must be non-empty");
    MetaPathSchedule s;
    for (char c : text) {
      switch (c) {
        case 'A': s.steps.push_back(MetaStep::kUtteranceToBasic); break;
        case 'B': s.steps.push_back(MetaStep::kBasicToType); break;
        case 'C': s.steps.push_back(MetaStep::kTypeToBasic); break;
        case 'D': s.steps.push_back(MetaStep::kBasicToUtterance); break;
        default:
          throw ConfigError(std::string("meta-path schedule: invalid step '") + c +
                            "' (expected A, B, C or D)");
      }
    }
    return s;
  }

  std::string to_string() const {
    std::string out;
    for (MetaStep s : steps) {
      switch (s) {
        case MetaStep::kUtteranceToBasic: out += 'A'; break;
        case MetaStep::kBasicToType: out += 'B'; break;
        case MetaStep::kTypeToBasic: out += 'C'; break;
        case MetaStep::kBasicToUtterance: out += 'D'; break;
      }
    }
    return out;
  }

  size_t size() const { return steps.size(); }
};

// Parameters of one edge-featured multi-head graph attention layer. The raw
// attention score for edge (i <- j) is
//   LeakyReLU(a_k . [W_i h_i ; W_j h_j ; E_ij])      per head k,
// normalized by softmax over i's neighbors; per-head values W_q^k h_j are
// aggregated and concatenated, followed by a residual add and a two-layer
// feed-forward network. Score projections are shared across heads; the
// attention vector and the value projections are per-head.
template <class Real>
struct GatLayerParams {
  nn::Tensor<Real>* W_i = nullptr;    // node_dim x score_dim (target)
  nn::Tensor<Real>* W_j = nullptr;    // node_dim x score_dim (source)
  nn::Tensor<Real>* a = nullptr;      // (2*score_dim + edge_dim) x heads
  nn::Tensor<Real>* W_q = nullptr;    // node_dim x node_dim, head-major blocks
  nn::Tensor<Real>* E = nullptr;      // n_edge_features x edge_dim
  nn::Tensor<Real>* ffn_w1 = nullptr; // node_dim x ffn_inner
  nn::Tensor<Real>* ffn_b1 = nullptr;
  nn::Tensor<Real>* ffn_w2 = nullptr; // ffn_inner x node_dim
  nn::Tensor<Real>* ffn_b2 = nullptr;
  int node_dim = 0;
  int heads = 0;
  int head_dim = 0;
  int score_dim = 0;
  int edge_dim = 0;
  Real leaky_slope = Real(0.2);

  static GatLayerParams create(nn::ParameterStore<Real>& store, const std::string& prefix,
                               int node_dim, int heads, int score_dim, int edge_dim,
                               int n_edge_features, int ffn_inner,
                               Real leaky_slope = Real(0.2)) {
    if (heads <= 0 || node_dim % heads != 0)
      throw ConfigError("gat layer: node width " + std::to_string(node_dim) +
                        " is not divisible by head count " + std::to_string(heads));
    GatLayerParams p;
    p.node_dim = node_dim;
    p.heads = heads;
    p.head_dim = node_dim / heads;
    p.score_dim = score_dim;
    p.edge_dim = edge_dim;
    p.leaky_slope = leaky_slope;
    p.W_i = &store.glorot(prefix + ".W_i", node_dim, score_dim);
    p.W_j = &store.glorot(prefix + ".W_j", node_dim, score_dim);
    p.a = &store.glorot(prefix + ".a", 2 * score_dim + edge_dim, heads);
    p.W_q = &store.glorot(prefix + ".W_q", node_dim, node_dim);
    p.E = &store.uniform(prefix + ".E", n_edge_features, edge_dim, Real(-0.05), Real(0.05));
    p.ffn_w1 = &store.glorot(prefix + ".ffn.w1", node_dim, ffn_inner);
    p.ffn_b1 = &store.zeros(prefix + ".ffn.b1", 1, ffn_inner);
    p.ffn_w2 = &store.glorot(prefix + ".ffn.w2", ffn_inner, node_dim);
    p.ffn_b2 = &store.zeros(prefix + ".ffn.b2", 1, node_dim);
    return p;
  }
};

// A directed edge list for one update step: target rows, source rows and
// edge-feature ids, sorted by (target, source) so softmax segments are
// contiguous and summation order is fixed.
struct StepEdges {
  std::vector<int> target;
  std::vector<int> source;
  std::vector<int> feature;

  size_t size() const { return target.size(); }
  bool empty() const { return target.empty(); }

  void add(int tgt, int src, int feat) {
    target.push_back(tgt);
    source.push_back(src);
    feature.push_back(feat);
  }

  void sort() {
    std::vector<size_t> order(target.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t x, size_t y) {
      if (target[x] != target[y]) return target[x] < target[y];
      if (source[x] != source[y]) return source[x] < source[y];
      return feature[x] < feature[y];
    });
    StepEdges sorted;
    for (size_t i : order) sorted.add(target[i], source[i], feature[i]);
    *this = std::move(sorted);
  }
};

// Materializes the edges of a schedule step. A/D use the three utterance-*
// families (basic side mapped into basic-row space); B/C use type-word and
// type-argument.
inline StepEdges step_edges(const HeteroGraph& g, MetaStep step) {
  StepEdges edges;
  auto basic_of_word = [&](int w) { return g.basic_row_of_word(w); };
  auto basic_of_speaker = [&](int s) { return g.basic_row_of_speaker(s); };
  auto basic_of_arg = [&](int slot) { return g.basic_row_of_argument(slot); };
  switch (step) {
    case MetaStep::kUtteranceToBasic:
      for (const auto& e : g.utterance_word) edges.add(basic_of_word(e.b), e.a, e.feature);
      for (const auto& e : g.utterance_speaker) edges.add(basic_of_speaker(e.b), e.a, e.feature);
      for (const auto& e : g.utterance_argument) edges.add(basic_of_arg(e.b), e.a, e.feature);
      break;
    case MetaStep::kBasicToUtterance:
      for (const auto& e : g.utterance_word) edges.add(e.a, basic_of_word(e.b), e.feature);
      for (const auto& e : g.utterance_speaker) edges.add(e.a, basic_of_speaker(e.b), e.feature);
      for (const auto& e : g.utterance_argument) edges.add(e.a, basic_of_arg(e.b), e.feature);
      break;
    case MetaStep::kBasicToType:
      for (const auto& e : g.type_word) edges.add(e.a, basic_of_word(e.b), e.feature);
      for (const auto& e : g.type_argument) edges.add(e.a, basic_of_arg(e.b), e.feature);
      break;
    case MetaStep::kTypeToBasic:
      for (const auto& e : g.type_word) edges.add(basic_of_word(e.b), e.a, e.feature);
      for (const auto& e : g.type_argument) edges.add(basic_of_arg(e.b), e.a, e.feature);
      break;
  }
  edges.sort();
  return edges;
}

// Node-state matrices carried through the meta-path layers.
template <class Real>
struct NodeStates {
  typename ad::Tape<Real>::Var utterance;  // H_u
  typename ad::Tape<Real>::Var basic;      // H_b
  typename ad::Tape<Real>::Var type;       // H_t
  int utterance_version = 0;
  int basic_version = 0;
  int type_version = 0;
};

// Normalized multi-head attention weights for the given edges: an E x heads
// matrix whose columns sum to one within each target's contiguous edge run.
template <class Real>
typename ad::Tape<Real>::Var attention_scores(ad::Tape<Real>& tape,
                                              typename ad::Tape<Real>::Var target_states,
                                              typename ad::Tape<Real>::Var source_states,
                                              const StepEdges& edges,
                                              const GatLayerParams<Real>& params) {
  using Var = typename ad::Tape<Real>::Var;
  const int ds = params.score_dim;
  const int de = params.edge_dim;
  Var s_tgt = tape.matmul(target_states, tape.leaf(*params.W_i));  // T x ds
  Var s_src = tape.matmul(source_states, tape.leaf(*params.W_j));  // S x ds
  Var a_leaf = tape.leaf(*params.a);
  auto row_range = [](int begin, int n) {
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = begin + i;
    return idx;
  };
  Var a_tgt = tape.gather_rows(a_leaf, row_range(0, ds));        // ds x heads
  Var a_src = tape.gather_rows(a_leaf, row_range(ds, ds));       // ds x heads
  Var a_edge = tape.gather_rows(a_leaf, row_range(2 * ds, de));  // de x heads

  // Per-target, per-source and per-feature score pieces, then gathered per
  // edge; equivalent to a_k . [W_i h_i; W_j h_j; E_ij] edge by edge.
  Var p_tgt = tape.matmul(s_tgt, a_tgt);                   // T x heads
  Var p_src = tape.matmul(s_src, a_src);                   // S x heads
  Var p_edge = tape.matmul(tape.leaf(*params.E), a_edge);  // F x heads

  Var raw = tape.add(tape.add(tape.gather_rows(p_tgt, edges.target),
                              tape.gather_rows(p_src, edges.source)),
                     tape.gather_rows(p_edge, edges.feature));
  raw = tape.leaky_relu(raw, params.leaky_slope);
  return tape.segment_softmax(raw, edges.target);
}

// One GAT update of the target family: multi-head attention over the step's
// edges, per-head aggregation with W_q, ELU, residual add, feed-forward.
// Targets without any edge keep their input rows bit-identically.
template <class Real>
typename ad::Tape<Real>::Var gat_update(ad::Tape<Real>& tape,
                                        typename ad::Tape<Real>::Var target_states,
                                        typename ad::Tape<Real>::Var source_states,
                                        const StepEdges& edges,
                                        const GatLayerParams<Real>& params) {
  using Var = typename ad::Tape<Real>::Var;
  if (tape.cols(target_states) != params.node_dim || tape.cols(source_states) != params.node_dim)
    throw ConfigError("gat_update: node state width does not match layer width");
  if (edges.empty()) return target_states;

  const int n_targets = tape.rows(target_states);
  Var alpha = attention_scores(tape, target_states, source_states, edges, params);
  Var values = tape.matmul(source_states, tape.leaf(*params.W_q));  // S x node_dim
  Var aggregated = tape.gat_aggregate(alpha, values, edges.source, edges.target, n_targets,
                                      params.head_dim);
  Var activated = tape.elu(aggregated);
  Var residual = tape.add(activated, target_states);
  Var inner = tape.relu(tape.add_rowvec(tape.matmul(residual, tape.leaf(*params.ffn_w1)),
                                        tape.leaf(*params.ffn_b1)));
  Var updated = tape.add_rowvec(tape.matmul(inner, tape.leaf(*params.ffn_w2)),
                                tape.leaf(*params.ffn_b2));

  // Rows with no incoming edge pass through unchanged.
  ad::ColVec<Real> touched = ad::ColVec<Real>::Zero(n_targets);
  for (int t : edges.target) touched(t) = Real(1);
  if ((touched.array() == Real(1)).all()) return updated;
  ad::ColVec<Real> untouched = ad::ColVec<Real>::Ones(n_targets) - touched;
  return tape.add(tape.row_scale(updated, touched), tape.row_scale(target_states, untouched));
}

// Applies the schedule in order; each step has its own parameter set. Steps
// whose edge set is empty leave all states unchanged and are reported in
// `no_op_steps` (the caller decides whether to log).
template <class Real>
NodeStates<Real> run_schedule(ad::Tape<Real>& tape, const HeteroGraph& graph,
                              NodeStates<Real> states, const MetaPathSchedule& schedule,
                              const std::vector<GatLayerParams<Real>>& layer_params,
                              std::vector<int>* no_op_steps = nullptr) {
  if (layer_params.size() != schedule.size())
    throw ConfigError("run_schedule: expected one parameter set per schedule step");
  for (size_t i = 0; i < schedule.steps.size(); ++i) {
    MetaStep step = schedule.steps[i];
    StepEdges edges = step_edges(graph, step);
    if (edges.empty()) {
      if (no_op_steps) no_op_steps->push_back(static_cast<int>(i));
      continue;
    }
    const GatLayerParams<Real>& p = layer_params[i];
    switch (step) {
      case MetaStep::kUtteranceToBasic:
        states.basic = gat_update(tape, states.basic, states.utterance, edges, p);
        states.basic_version += 1;
        break;
      case MetaStep::kBasicToType:
        states.type = gat_update(tape, states.type, states.basic, edges, p);
        states.type_version += 1;
        break;
      case MetaStep::kTypeToBasic:
        states.basic = gat_update(tape, states.basic, states.type, edges, p);
        states.basic_version += 1;
        break;
      case MetaStep::kBasicToUtterance:
        states.utterance = gat_update(tape, states.utterance, states.basic, edges, p);
        states.utterance_version += 1;
        break;
    }
  }
  return states;
}

}  // namespace hgdre
