#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hgdre/metrics.hpp"
#include "hgdre/model.hpp"
#include "json.hpp"

namespace hgdre {

// Training defaults: learning rate 0.0005, batch size 16, 10 attention heads,
// hidden sizes 200/128 with 2 layers each, embedding dims 300/30/30, edge
// embedding dim 50.
struct TrainConfig {
  double learning_rate = 0.0005;
  int batch_size = 16;
  int head_count = 10;
  int epoch_budget = 50;
  int patience = 10;
  uint64_t seed = 1;
  std::string schedule = "ABCDA";
  bool no_local_lstm = false;
  bool no_global_lstm = false;
  bool no_argument_nodes = false;
  bool no_pos_embedding = false;
  bool no_ner_embedding = false;
  bool no_pos_edge_features = false;
  bool log_f1c = false;  // per-epoch dev F1_c is expensive; off by default

  ModelConfig model_config() const {
    ModelConfig m;
    m.heads = head_count;
    m.schedule = schedule;
    m.use_local_lstm = !no_local_lstm;
    m.use_global_lstm = !no_global_lstm;
    m.use_argument_nodes = !no_argument_nodes;
    m.use_pos_edge_features = !no_pos_edge_features;
    m.embed.use_pos = !no_pos_embedding;
    m.embed.use_ner = !no_ner_embedding;
    return m;
  }
};

// A dialogue with everything the model consumes precomputed: annotation,
// speaker resolution, located mentions and the per-pair graph.
struct PreparedDialogue {
  const Dialogue* dialogue = nullptr;
  std::vector<AnnotatedUtterance> annotated;
  SpeakerMap speakers;
  std::vector<ArgumentMentions> mentions;  // per relation instance
  std::vector<HeteroGraph> graphs;         // per relation instance
};

struct PreparedCorpus {
  std::vector<PreparedDialogue> dialogues;

  long pair_count() const {
    long n = 0;
    for (const auto& d : dialogues) n += static_cast<long>(d.graphs.size());
    return n;
  }
};

inline PreparedCorpus prepare_corpus(const std::vector<Dialogue>& dialogues,
                                     const Annotator& backend, const GraphOptions& options,
                                     const std::vector<std::vector<AnnotatedUtterance>>* cached =
                                         nullptr) {
  PreparedCorpus corpus;
  corpus.dialogues.reserve(dialogues.size());
  for (size_t i = 0; i < dialogues.size(); ++i) {
    PreparedDialogue prep;
    prep.dialogue = &dialogues[i];
    prep.annotated = cached ? (*cached)[i] : annotate_dialogue(dialogues[i], backend);
    prep.speakers = resolve_speakers(dialogues[i]);
    for (const auto& instance : dialogues[i].relation_instances) {
      ArgumentMentions mentions =
          locate_arguments(prep.annotated, instance, prep.speakers, backend);
      prep.graphs.push_back(
          build_graph(prep.annotated, mentions, prep.speakers, instance, options));
      prep.mentions.push_back(std::move(mentions));
    }
    corpus.dialogues.push_back(std::move(prep));
  }
  return corpus;
}

struct EvalReport {
  double f1_standard = 0.0;
  double f1_conversational = 0.0;
  std::map<int, double> per_label_f1;
  long instances = 0;
  std::string split;
};

namespace detail {

template <class Real>
std::vector<PairScore> score_dialogue(const DrModel<Real>& model, const PreparedDialogue& prep) {
  ad::Tape<Real> tape(/*record_gradients=*/false);
  std::vector<PairScore> scores;
  if (prep.graphs.empty()) return scores;
  auto utt = model.encode_utterances(tape, prep.annotated, /*train=*/false, nullptr);
  for (size_t pi = 0; pi < prep.graphs.size(); ++pi) {
    auto logits =
        model.pair_logits(tape, utt, prep.annotated, prep.graphs[pi], prep.mentions[pi]);
    Prediction pred = model.prediction_from_logits(tape.val(logits));
    scores.push_back({pred.predicted_labels,
                      prep.dialogue->relation_instances[pi].relation_labels});
  }
  return scores;
}

inline int first_appearance(const std::vector<MentionSpan>& spans, int fallback) {
  int first = fallback;
  for (const auto& s : spans) first = std::min(first, s.utterance_index);
  return spans.empty() ? fallback : first;
}

// Prefix view of a prepared dialogue truncated to the first `len` turns.
// Speaker ids are assigned by first appearance, so the prefix keeps the same
// ids and they stay contiguous.
inline void make_prefix(const PreparedDialogue& prep, int len,
                        std::vector<AnnotatedUtterance>& annotated, SpeakerMap& speakers) {
  annotated.assign(prep.annotated.begin(), prep.annotated.begin() + len);
  speakers.names.clear();
  speakers.index.clear();
  speakers.turn_speakers.assign(prep.speakers.turn_speakers.begin(),
                                prep.speakers.turn_speakers.begin() + len);
  int max_id = -1;
  for (const auto& turn : speakers.turn_speakers)
    for (int id : turn) max_id = std::max(max_id, id);
  for (int id = 0; id <= max_id; ++id) {
    speakers.names.push_back(prep.speakers.names[static_cast<size_t>(id)]);
    speakers.index.emplace(lowercase(speakers.names.back()), id);
  }
}

inline ArgumentMentions prefix_mentions(const ArgumentMentions& full, int len) {
  ArgumentMentions out = full;
  auto filter = [len](std::vector<MentionSpan>& spans) {
    std::erase_if(spans, [len](const MentionSpan& s) { return s.utterance_index >= len; });
  };
  filter(out.subject);
  filter(out.object);
  out.subject_located = !out.subject.empty();
  out.object_located = !out.object.empty();
  return out;
}

// Conversational protocol: for each argument pair, every dialogue prefix
// (first i turns) in which both arguments have already appeared is scored as
// an independent instance against the pair's full gold set, from the earliest
// such prefix through the complete dialogue. An argument "appears" at its
// first located mention (its speaker's first turn when speaker-valued); pairs
// with an argument that never appears are scored on the full dialogue only.
template <class Real>
std::vector<PairScore> score_dialogue_conversational(const DrModel<Real>& model,
                                                     const PreparedDialogue& prep,
                                                     const Annotator& backend) {
  std::vector<PairScore> scores;
  const int n = static_cast<int>(prep.annotated.size());
  for (size_t pi = 0; pi < prep.graphs.size(); ++pi) {
    const ArgumentMentions& mention = prep.mentions[pi];
    const RelationInstance& instance = prep.dialogue->relation_instances[pi];
    int first_subject = first_appearance(mention.subject, n - 1);
    int first_object = first_appearance(mention.object, n - 1);
    int start = std::max(first_subject, first_object);
    for (int last = start; last < n; ++last) {
      const int len = last + 1;
      ad::Tape<Real> tape(/*record_gradients=*/false);
      std::vector<AnnotatedUtterance> annotated;
      SpeakerMap speakers;
      make_prefix(prep, len, annotated, speakers);
      ArgumentMentions mentions = prefix_mentions(mention, len);
      HeteroGraph graph = build_graph(annotated, mentions, speakers, instance,
                                      model.config().graph_options());
      auto utt = model.encode_utterances(tape, annotated, /*train=*/false, nullptr);
      auto logits = model.pair_logits(tape, utt, annotated, graph, mentions);
      Prediction pred = model.prediction_from_logits(tape.val(logits));
      scores.push_back({pred.predicted_labels, instance.relation_labels});
    }
  }
  (void)backend;
  return scores;
}

}  // namespace detail

// Standard setting: one scored instance per argument pair over the complete
// dialogue. `workers` may fan dialogues out across threads; results are
// merged in dialogue order, so reports are identical for any worker count.
template <class Real>
EvalReport evaluate_standard(const DrModel<Real>& model, const PreparedCorpus& corpus,
                             const std::string& split, int workers = 1) {
  std::vector<std::vector<PairScore>> per_dialogue(corpus.dialogues.size());
  if (workers <= 1) {
    for (size_t i = 0; i < corpus.dialogues.size(); ++i)
      per_dialogue[i] = detail::score_dialogue(model, corpus.dialogues[i]);
  } else {
    std::vector<std::future<void>> tasks;
    std::atomic<size_t> next{0};
    for (int w = 0; w < workers; ++w)
      tasks.push_back(std::async(std::launch::async, [&]() {
        for (size_t i = next.fetch_add(1); i < corpus.dialogues.size(); i = next.fetch_add(1))
          per_dialogue[i] = detail::score_dialogue(model, corpus.dialogues[i]);
      }));
    for (auto& t : tasks) t.get();
  }
  std::vector<PairScore> scores;
  for (auto& d : per_dialogue) scores.insert(scores.end(), d.begin(), d.end());
  F1Report f1 = macro_f1(scores, RelationVocabulary::instance().size());
  EvalReport report;
  report.f1_standard = f1.macro_f1;
  report.per_label_f1 = f1.per_label;
  report.instances = f1.instances;
  report.split = split;
  return report;
}

template <class Real>
EvalReport evaluate_conversational(const DrModel<Real>& model, const PreparedCorpus& corpus,
                                   const Annotator& backend, const std::string& split,
                                   int workers = 1) {
  std::vector<std::vector<PairScore>> per_dialogue(corpus.dialogues.size());
  if (workers <= 1) {
    for (size_t i = 0; i < corpus.dialogues.size(); ++i)
      per_dialogue[i] =
          detail::score_dialogue_conversational(model, corpus.dialogues[i], backend);
  } else {
    std::vector<std::future<void>> tasks;
    std::atomic<size_t> next{0};
    for (int w = 0; w < workers; ++w)
      tasks.push_back(std::async(std::launch::async, [&]() {
        for (size_t i = next.fetch_add(1); i < corpus.dialogues.size(); i = next.fetch_add(1))
          per_dialogue[i] =
              detail::score_dialogue_conversational(model, corpus.dialogues[i], backend);
      }));
    for (auto& t : tasks) t.get();
  }
  std::vector<PairScore> scores;
  for (auto& d : per_dialogue) scores.insert(scores.end(), d.begin(), d.end());
  F1Report f1 = macro_f1(scores, RelationVocabulary::instance().size());
  EvalReport report;
  report.f1_conversational = f1.macro_f1;
  report.per_label_f1 = f1.per_label;
  report.instances = f1.instances;
  report.split = split;
  return report;
}

struct TrainOutcome {
  double best_dev_f1 = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
  double first_epoch_loss = 0.0;
  std::vector<nlohmann::json> log;  // one record per epoch
};

// Gradient-based training with per-epoch dev evaluation and best-checkpoint
// keeping. Deterministic for a fixed seed: dialogue order, dropout masks and
// summation order are all derived from it.
template <class Real>
TrainOutcome train_model(DrModel<Real>& model, const PreparedCorpus& train_corpus,
                         const PreparedCorpus& dev_corpus, const TrainConfig& config,
                         std::ostream* log_stream = nullptr,
                         const Annotator* backend_for_f1c = nullptr) {
  if (train_corpus.dialogues.empty()) throw DataError("train: empty training corpus");
  nn::Adam<Real> optimizer(static_cast<Real>(config.learning_rate));
  std::mt19937_64 order_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x5bf0f3c4d2a61e9bull);

  TrainOutcome outcome;
  std::map<std::string, ad::Matrix<Real>> best_values;
  int since_best = 0;

  for (int epoch = 0; epoch < config.epoch_budget; ++epoch) {
    auto epoch_start = std::chrono::steady_clock::now();
    std::vector<size_t> dialogue_order(train_corpus.dialogues.size());
    std::iota(dialogue_order.begin(), dialogue_order.end(), size_t{0});
    std::shuffle(dialogue_order.begin(), dialogue_order.end(), order_rng);

    // Pairs in shuffled-dialogue order, chunked into batches; consecutive
    // pairs usually share a dialogue so its encoding is computed once.
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t di : dialogue_order)
      for (size_t pi = 0; pi < train_corpus.dialogues[di].graphs.size(); ++pi)
        pairs.emplace_back(di, pi);

    double loss_sum = 0.0;
    long batches = 0;
    for (size_t at = 0; at < pairs.size(); at += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(pairs.size(), at + static_cast<size_t>(config.batch_size));
      ad::Tape<Real> tape;
      std::vector<typename ad::Tape<Real>::Var> losses;
      size_t current_dialogue = SIZE_MAX;
      typename ad::Tape<Real>::Var utt{};
      for (size_t k = at; k < end; ++k) {
        auto [di, pi] = pairs[k];
        const PreparedDialogue& prep = train_corpus.dialogues[di];
        if (di != current_dialogue) {
          utt = model.encode_utterances(tape, prep.annotated, /*train=*/true, &dropout_rng);
          current_dialogue = di;
        }
        auto logits = model.pair_logits(tape, utt, prep.annotated, prep.graphs[pi],
                                        prep.mentions[pi]);
        losses.push_back(model.bce_loss(tape, logits,
                                        prep.dialogue->relation_instances[pi].relation_labels));
      }
      auto batch_loss = tape.mean_all(tape.vcat(std::span<const typename ad::Tape<Real>::Var>(losses)));
      const double loss_value = static_cast<double>(tape.val(batch_loss)(0, 0));
      if (!std::isfinite(loss_value))
        throw NumericError("non-finite training loss in batch " + std::to_string(batches) +
                           " of epoch " + std::to_string(epoch));
      model.store().zero_grads();
      tape.backward(batch_loss);
      optimizer.step(model.store());
      loss_sum += loss_value;
      ++batches;
    }
    const double train_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    if (epoch == 0) outcome.first_epoch_loss = train_loss;

    EvalReport dev = evaluate_standard(model, dev_corpus, "dev");
    std::optional<double> dev_f1c;
    if (config.log_f1c && backend_for_f1c)
      dev_f1c =
          evaluate_conversational(model, dev_corpus, *backend_for_f1c, "dev").f1_conversational;

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    nlohmann::json record{{"epoch", epoch},
                          {"train_loss", train_loss},
                          {"dev_f1", dev.f1_standard},
                          {"dev_f1c", dev_f1c ? nlohmann::json(*dev_f1c) : nlohmann::json()},
                          {"lr", config.learning_rate},
                          {"wall_seconds", wall}};
    if (log_stream) (*log_stream) << record.dump() << "\n" << std::flush;
    outcome.log.push_back(std::move(record));
    outcome.epochs_run = epoch + 1;

    if (dev.f1_standard > outcome.best_dev_f1 || outcome.best_epoch < 0) {
      outcome.best_dev_f1 = dev.f1_standard;
      outcome.best_epoch = epoch;
      since_best = 0;
      best_values.clear();
      for (const auto* t : model.store().all()) best_values[t->name] = t->value;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  // Restore the best-dev parameters so the caller holds the kept checkpoint.
  if (!best_values.empty())
    for (auto* t : model.store().all()) t->value = best_values.at(t->name);
  return outcome;
}

// One experiment row: a label plus configuration overrides.
struct ExperimentRow {
  std::string name;
  TrainConfig config;
};

struct ExperimentResult {
  std::string name;
  bool ok = false;
  std::string error;
  double dev_f1 = 0.0;
  double dev_f1c = 0.0;
  double test_f1 = 0.0;
  double test_f1c = 0.0;
};

}  // namespace hgdre
