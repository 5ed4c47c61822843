#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hgdre/annotate.hpp"
#include "json.hpp"

namespace hgdre {

// Edge-feature id layout: POS ids first (used by utterance-word edges), then
// one learned id per remaining family, plus a generic utterance-word id used
// when POS edge features are ablated.
struct EdgeFeatureSpace {
  static int pos_count() { return static_cast<int>(pos_tag_names().size()); }
  static int utterance_word_generic() { return pos_count(); }
  static int utterance_argument() { return pos_count() + 1; }
  static int utterance_speaker() { return pos_count() + 2; }
  static int type_word() { return pos_count() + 3; }
  static int type_argument() { return pos_count() + 4; }
  static int count() { return pos_count() + 5; }
};

// Per-dialogue heterogeneous graph: five node families and five edge
// families. Purely structural; node states are materialized by the model.
// All keys are sorted, so construction is deterministic.
struct HeteroGraph {
  struct Edge {
    int a = 0;        // row in the first-named family of the edge's name
    int b = 0;        // row in the second-named family
    int feature = 0;  // edge-feature id
    auto operator<=>(const Edge&) const = default;
  };

  int n_utterances = 0;
  std::vector<std::string> word_forms;  // word-node keys (sorted norm forms)
  std::vector<int> speaker_ids;         // speaker-node keys
  std::vector<int> type_ids;            // type-node keys (entity-type ids)
  bool has_argument_nodes = true;

  std::vector<Edge> utterance_word;      // a: utterance, b: word
  std::vector<Edge> utterance_argument;  // a: utterance, b: argument slot (0/1)
  std::vector<Edge> utterance_speaker;   // a: utterance, b: speaker row
  std::vector<Edge> type_word;           // a: type row,  b: word
  std::vector<Edge> type_argument;       // a: type row,  b: argument slot

  int word_count() const { return static_cast<int>(word_forms.size()); }
  int speaker_count() const { return static_cast<int>(speaker_ids.size()); }
  int type_count() const { return static_cast<int>(type_ids.size()); }
  int argument_count() const { return has_argument_nodes ? 2 : 0; }

  // Basic nodes: the ordered union word + speaker + argument.
  int basic_count() const { return word_count() + speaker_count() + argument_count(); }
  int basic_row_of_word(int w) const { return w; }
  int basic_row_of_speaker(int s) const { return word_count() + s; }
  int basic_row_of_argument(int slot) const { return word_count() + speaker_count() + slot; }

  int word_row(const std::string& norm) const {
    auto it = std::lower_bound(word_forms.begin(), word_forms.end(), norm);
    if (it == word_forms.end() || *it != norm) return -1;
    return static_cast<int>(it - word_forms.begin());
  }
  int speaker_row(int speaker_id) const {
    auto it = std::lower_bound(speaker_ids.begin(), speaker_ids.end(), speaker_id);
    if (it == speaker_ids.end() || *it != speaker_id) return -1;
    return static_cast<int>(it - speaker_ids.begin());
  }
  int type_row(int type_id) const {
    auto it = std::lower_bound(type_ids.begin(), type_ids.end(), type_id);
    if (it == type_ids.end() || *it != type_id) return -1;
    return static_cast<int>(it - type_ids.begin());
  }
};

struct GraphOptions {
  bool use_pos_edge_features = true;
  bool use_argument_nodes = true;
};

// Builds the graph from annotation, located argument mentions, and the
// speaker map. Connectivity rules: a word node per distinct norm form of the
// conversation; utterance-word edges exactly where the word occurs (feature =
// POS of the first occurrence in that utterance); utterance-speaker edges for
// every speaker of the turn; type-word edges where the word carries the type
// anywhere in the conversation; argument nodes connect to every utterance
// holding one of their mentions (or the speaker's turns for speaker-valued
// arguments) and to the types of their mention tokens, falling back to the
// corpus-provided coarse type when unlocated.
inline HeteroGraph build_graph(const std::vector<AnnotatedUtterance>& annotated,
                               const ArgumentMentions& mentions,
                               const SpeakerMap& speakers,
                               const RelationInstance& instance,
                               const GraphOptions& options = {}) {
  HeteroGraph g;
  g.n_utterances = static_cast<int>(annotated.size());
  g.has_argument_nodes = options.use_argument_nodes;

  std::set<std::string> forms;
  std::set<int> types;
  for (const auto& utt : annotated)
    for (const auto& tok : utt.tokens) {
      forms.insert(tok.norm);
      types.insert(tok.ner);
    }
  g.word_forms.assign(forms.begin(), forms.end());
  for (int sid = 0; sid < speakers.speaker_count(); ++sid) g.speaker_ids.push_back(sid);

  // Argument-to-type attachments may pull in a type with no token occurrence.
  std::vector<std::set<int>> arg_types(2);
  if (options.use_argument_nodes) {
    auto collect = [&](const std::vector<MentionSpan>& spans, bool located,
                       const std::string& corpus_type, std::set<int>& out) {
      for (const auto& span : spans)
        for (int i = span.begin; i < span.end; ++i)
          out.insert(annotated[static_cast<size_t>(span.utterance_index)]
                         .tokens[static_cast<size_t>(i)]
                         .ner);
      if (out.empty()) out.insert(coarse_type_id(corpus_type));
      (void)located;
    };
    collect(mentions.subject, mentions.subject_located, instance.subject_type, arg_types[0]);
    collect(mentions.object, mentions.object_located, instance.object_type, arg_types[1]);
    for (int t : arg_types[0]) types.insert(t);
    for (int t : arg_types[1]) types.insert(t);
  }
  g.type_ids.assign(types.begin(), types.end());

  // utterance-word: one edge per (utterance, distinct form), feature from the
  // first occurrence's POS tag.
  std::set<HeteroGraph::Edge> uw;
  for (const auto& utt : annotated) {
    std::set<std::string> seen;
    for (const auto& tok : utt.tokens) {
      if (!seen.insert(tok.norm).second) continue;
      int feature = options.use_pos_edge_features ? tok.pos
                                                  : EdgeFeatureSpace::utterance_word_generic();
      uw.insert({utt.utterance_index, g.word_row(tok.norm), feature});
    }
  }
  g.utterance_word.assign(uw.begin(), uw.end());

  std::set<HeteroGraph::Edge> us;
  for (const auto& utt : annotated)
    for (int sid : utt.speaker_ids)
      us.insert({utt.utterance_index, g.speaker_row(sid), EdgeFeatureSpace::utterance_speaker()});
  g.utterance_speaker.assign(us.begin(), us.end());

  std::set<HeteroGraph::Edge> tw;
  for (const auto& utt : annotated)
    for (const auto& tok : utt.tokens)
      tw.insert({g.type_row(tok.ner), g.word_row(tok.norm), EdgeFeatureSpace::type_word()});
  g.type_word.assign(tw.begin(), tw.end());

  if (options.use_argument_nodes) {
    std::set<HeteroGraph::Edge> ua, ta;
    auto connect = [&](const std::vector<MentionSpan>& spans, int slot) {
      for (const auto& span : spans)
        ua.insert({span.utterance_index, slot, EdgeFeatureSpace::utterance_argument()});
      for (int t : arg_types[static_cast<size_t>(slot)])
        ta.insert({g.type_row(t), slot, EdgeFeatureSpace::type_argument()});
    };
    connect(mentions.subject, 0);
    connect(mentions.object, 1);
    g.utterance_argument.assign(ua.begin(), ua.end());
    g.type_argument.assign(ta.begin(), ta.end());
  }
  return g;
}

// JSON dump with node keys spelled out, for golden tests and debugging.
inline nlohmann::json graph_to_json(const HeteroGraph& g) {
  nlohmann::json j;
  j["utterances"] = g.n_utterances;
  j["words"] = g.word_forms;
  j["speakers"] = g.speaker_ids;
  nlohmann::json type_names = nlohmann::json::array();
  for (int t : g.type_ids) type_names.push_back(ner_type_names()[static_cast<size_t>(t)]);
  j["types"] = std::move(type_names);
  j["argument_nodes"] = g.has_argument_nodes ? 2 : 0;
  auto edges = [&](const std::vector<HeteroGraph::Edge>& list, auto a_key, auto b_key) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : list)
      out.push_back({{"a", a_key(e.a)}, {"b", b_key(e.b)}, {"feature", e.feature}});
    return out;
  };
  auto utt = [](int i) { return nlohmann::json(i); };
  auto word = [&](int i) { return nlohmann::json(g.word_forms[static_cast<size_t>(i)]); };
  auto speaker = [&](int i) { return nlohmann::json(g.speaker_ids[static_cast<size_t>(i)]); };
  auto type = [&](int i) {
    return nlohmann::json(ner_type_names()[static_cast<size_t>(g.type_ids[static_cast<size_t>(i)])]);
  };
  auto arg = [](int i) { return nlohmann::json(i == 0 ? "subject" : "object"); };
  j["utterance_word"] = edges(g.utterance_word, utt, word);
  j["utterance_argument"] = edges(g.utterance_argument, utt, arg);
  j["utterance_speaker"] = edges(g.utterance_speaker, utt, speaker);
  j["type_word"] = edges(g.type_word, type, word);
  j["type_argument"] = edges(g.type_argument, type, arg);
  return j;
}

}  // namespace hgdre
