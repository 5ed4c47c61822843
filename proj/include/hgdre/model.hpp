#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hgdre/corpus.hpp"
#include "hgdre/encoder.hpp"
#include "hgdre/gat.hpp"
#include "hgdre/hetgraph.hpp"

namespace hgdre {

struct ModelConfig {
  EmbeddingConfig embed;        // dims; use_pos/use_ner ablate e_p/e_t
  int local_hidden = 200;
  int local_layers = 2;
  int global_hidden = 128;
  int global_layers = 2;
  double dropout = 0.3;         // between stacked BiLSTM layers only
  int heads = 10;
  int score_dim = 50;
  int edge_dim = 50;
  int ffn_inner = 300;
  double leaky_slope = 0.2;
  std::string schedule = "ABCDA";
  bool use_local_lstm = true;       // ablation: w/o local BiLSTM
  bool use_global_lstm = true;      // ablation: w/o global BiLSTM
  bool use_argument_nodes = true;   // ablation: w/o argument nodes
  bool use_pos_edge_features = true;

  GraphOptions graph_options() const {
    return GraphOptions{use_pos_edge_features, use_argument_nodes};
  }
};

struct Prediction {
  std::vector<double> probabilities;  // per relation label, in [0, 1]
  std::set<int> predicted_labels;     // never empty (argmax fallback)
};

// Thresholds sigmoid probabilities at 0.5; if nothing clears the threshold
// the single argmax label is predicted so every pair gets >= 1 label.
inline std::set<int> threshold_labels(const std::vector<double>& probabilities) {
  std::set<int> labels;
  for (size_t i = 0; i < probabilities.size(); ++i)
    if (probabilities[i] >= 0.5) labels.insert(static_cast<int>(i));
  if (labels.empty() && !probabilities.empty()) {
    size_t best = 0;
    for (size_t i = 1; i < probabilities.size(); ++i)
      if (probabilities[i] > probabilities[best]) best = i;
    labels.insert(static_cast<int>(best));
  }
  return labels;
}

// Mean per-label binary cross-entropy of probabilities against a gold label
// set. Probabilities are clamped away from 0/1 so reports stay finite.
inline double loss_from_probabilities(const std::vector<double>& probabilities,
                                      const std::set<int>& gold) {
  if (probabilities.empty()) throw ConfigError("loss: empty probability vector");
  double total = 0.0;
  constexpr double kEps = 1e-12;
  for (size_t i = 0; i < probabilities.size(); ++i) {
    double p = probabilities[i];
    bool y = gold.count(static_cast<int>(i)) != 0;
    total += y ? -std::log(std::max(p, kEps)) : -std::log(std::max(1.0 - p, kEps));
  }
  return total / static_cast<double>(probabilities.size());
}

// End-to-end model: encoder -> heterogeneous graph -> scheduled GAT ->
// argument pooling -> sigmoid multi-label classifier.
template <class Real>
class DrModel {
 public:
  using Var = typename ad::Tape<Real>::Var;

  DrModel(ModelConfig config, WordVocab vocab, const std::string& vectors_path, uint64_t seed)
      : config_(std::move(config)), store_(seed) {
    tables_ = EmbeddingTables<Real>::create(store_, config_.embed, std::move(vocab), vectors_path);
    encoder_ = UtteranceEncoder<Real>::create(
        store_, config_.embed, config_.local_hidden, config_.local_layers, config_.global_hidden,
        config_.global_layers, static_cast<Real>(config_.dropout), config_.use_local_lstm,
        config_.use_global_lstm);
    utterance_proj_ = nn::Linear<Real>::create(store_, "proj.utterance",
                                               encoder_.utterance_dim(config_.embed),
                                               config_.embed.node_dim);
    schedule_ = MetaPathSchedule::parse(config_.schedule);
    for (size_t i = 0; i < schedule_.size(); ++i)
      gat_layers_.push_back(GatLayerParams<Real>::create(
          store_, "gat.step" + std::to_string(i), config_.embed.node_dim, config_.heads,
          config_.score_dim, config_.edge_dim, EdgeFeatureSpace::count(), config_.ffn_inner,
          static_cast<Real>(config_.leaky_slope)));
    const int pair_width = pair_feature_width();
    classifier_ = nn::Linear<Real>::create(store_, "classifier", pair_width,
                                           RelationVocabulary::instance().size());
  }

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore<Real>& store() { return store_; }
  const nn::ParameterStore<Real>& store() const { return store_; }
  const EmbeddingTables<Real>& tables() const { return tables_; }
  EmbeddingTables<Real>& tables() { return tables_; }
  const MetaPathSchedule& schedule() const { return schedule_; }

  // Width of e' = [maxpool(tau_x); maxpool(e_x); maxpool(tau_y); maxpool(e_y)]
  // (the tau blocks drop out with argument nodes ablated).
  int pair_feature_width() const {
    return config_.use_argument_nodes ? 4 * config_.embed.node_dim : 2 * config_.embed.node_dim;
  }

  // Utterance-node initializations for a dialogue: the global BiLSTM states
  // projected to the common node width.
  Var encode_utterances(ad::Tape<Real>& tape, const std::vector<AnnotatedUtterance>& annotated,
                        bool train, std::mt19937_64* dropout_rng) const {
    DialogueEncoding<Real> enc =
        encode_dialogue(tape, annotated, tables_, encoder_, train, dropout_rng);
    return utterance_proj_.apply(tape, enc.utterance_states);
  }

  // Initial node states for the graph families.
  NodeStates<Real> initial_states(ad::Tape<Real>& tape, Var utterance_states,
                                  const HeteroGraph& graph) const {
    NodeStates<Real> states;
    states.utterance = utterance_states;

    ad::Matrix<Real> words(std::max(graph.word_count(), 1), config_.embed.node_dim);
    for (int w = 0; w < graph.word_count(); ++w)
      words.row(w) = tables_.word_row(graph.word_forms[static_cast<size_t>(w)]);
    std::vector<Var> basic_parts;
    if (graph.word_count() > 0)
      basic_parts.push_back(tape.constant(words.topRows(graph.word_count())));
    if (graph.speaker_count() > 0) {
      std::vector<int> slots;
      slots.reserve(static_cast<size_t>(graph.speaker_count()));
      for (int sid : graph.speaker_ids) slots.push_back(tables_.speaker_slot(sid));
      basic_parts.push_back(tape.gather_rows(tape.leaf(*tables_.speaker), std::move(slots)));
    }
    if (graph.has_argument_nodes)
      basic_parts.push_back(tape.gather_rows(tape.leaf(*tables_.argument), {0, 1}));
    states.basic = tape.vcat(std::span<const Var>(basic_parts));

    std::vector<int> type_rows(graph.type_ids.begin(), graph.type_ids.end());
    states.type = tape.gather_rows(tape.leaf(*tables_.type_node), std::move(type_rows));
    return states;
  }

  // Pair feature e' after message propagation: per argument, max pool of its
  // argument node and of its matched word nodes (the speaker node for
  // speaker-valued arguments; a zero block when unlocated).
  Var pool_pair_features(ad::Tape<Real>& tape, const NodeStates<Real>& final_states,
                         const HeteroGraph& graph, const std::vector<AnnotatedUtterance>& annotated,
                         const ArgumentMentions& mentions) const {
    std::vector<Var> parts;
    auto pool_slot = [&](int slot, const std::vector<MentionSpan>& spans, bool is_speaker,
                         int speaker_id) {
      if (graph.has_argument_nodes)
        parts.push_back(tape.gather_rows(final_states.basic, {graph.basic_row_of_argument(slot)}));
      std::set<int> rows;
      if (is_speaker) {
        int row = graph.speaker_row(speaker_id);
        if (row >= 0) rows.insert(graph.basic_row_of_speaker(row));
      } else {
        for (const auto& span : spans)
          for (int i = span.begin; i < span.end; ++i) {
            int row = graph.word_row(
                annotated[static_cast<size_t>(span.utterance_index)].tokens[static_cast<size_t>(i)].norm);
            if (row >= 0) rows.insert(graph.basic_row_of_word(row));
          }
      }
      if (rows.empty()) {
        parts.push_back(tape.constant(ad::Matrix<Real>::Zero(1, config_.embed.node_dim)));
      } else {
        std::vector<int> idx(rows.begin(), rows.end());
        parts.push_back(tape.colwise_max(tape.gather_rows(final_states.basic, std::move(idx))));
      }
    };
    pool_slot(0, mentions.subject, mentions.subject_is_speaker, mentions.subject_speaker_id);
    pool_slot(1, mentions.object, mentions.object_is_speaker, mentions.object_speaker_id);
    return tape.hcat(std::span<const Var>(parts));
  }

  // Full forward for one (dialogue, argument pair): logits over the label set.
  Var pair_logits(ad::Tape<Real>& tape, Var utterance_nodes,
                  const std::vector<AnnotatedUtterance>& annotated,
                  const HeteroGraph& graph, const ArgumentMentions& mentions,
                  std::vector<int>* no_op_steps = nullptr) const {
    NodeStates<Real> states = initial_states(tape, utterance_nodes, graph);
    NodeStates<Real> final_states =
        run_schedule(tape, graph, states, schedule_, gat_layers_, no_op_steps);
    Var pair = pool_pair_features(tape, final_states, graph, annotated, mentions);
    return classifier_.apply(tape, pair);
  }

  // Numerically stable mean binary cross-entropy from logits:
  // mean_l [softplus(z_l) - y_l * z_l], identical to BCE on sigmoid(z).
  Var bce_loss(ad::Tape<Real>& tape, Var logits, const std::set<int>& gold) const {
    ad::Matrix<Real> y = ad::Matrix<Real>::Zero(1, tape.cols(logits));
    for (int id : gold) y(0, id) = Real(1);
    Var pos = tape.softplus(logits);
    Var neg = tape.scale(tape.cmul_const(logits, std::move(y)), Real(-1));
    return tape.mean_all(tape.add(pos, neg));
  }

  Prediction prediction_from_logits(const ad::Matrix<Real>& logits) const {
    Prediction pred;
    pred.probabilities.resize(static_cast<size_t>(logits.cols()));
    for (long i = 0; i < logits.cols(); ++i) {
      double z = static_cast<double>(logits(0, i));
      if (!std::isfinite(z)) throw NumericError("non-finite classifier logit");
      pred.probabilities[static_cast<size_t>(i)] =
          z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
    pred.predicted_labels = threshold_labels(pred.probabilities);
    return pred;
  }

  // Inference entry point for one pair (no gradient recording).
  Prediction predict(const std::vector<AnnotatedUtterance>& annotated,
                     const SpeakerMap& speakers, const RelationInstance& instance,
                     const Annotator& backend) const {
    ad::Tape<Real> tape(/*record_gradients=*/false);
    ArgumentMentions mentions = locate_arguments(annotated, instance, speakers, backend);
    HeteroGraph graph =
        build_graph(annotated, mentions, speakers, instance, config_.graph_options());
    Var utt = encode_utterances(tape, annotated, /*train=*/false, nullptr);
    Var logits = pair_logits(tape, utt, annotated, graph, mentions);
    return prediction_from_logits(tape.val(logits));
  }

  long trainable_parameters() const { return store_.trainable_count(); }
  long frozen_parameters() const { return store_.frozen_count(); }

  // Trainable sizes grouped by top-level module path.
  std::map<std::string, long> parameter_breakdown() const {
    std::map<std::string, long> by_group;
    for (const auto* t : store_.all()) {
      if (!t->trainable) continue;
      std::string group = t->name.substr(0, t->name.find('.'));
      by_group[group] += t->size();
    }
    return by_group;
  }

 private:
  ModelConfig config_;
  nn::ParameterStore<Real> store_;
  EmbeddingTables<Real> tables_;
  UtteranceEncoder<Real> encoder_;
  nn::Linear<Real> utterance_proj_;
  MetaPathSchedule schedule_;
  std::vector<GatLayerParams<Real>> gat_layers_;
  nn::Linear<Real> classifier_;
};

}  // namespace hgdre
