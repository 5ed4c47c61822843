#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hgdre/errors.hpp"
#include "hgdre/tokenize.hpp"
#include "json.hpp"

namespace hgdre {

enum class Split { kTrain, kDev, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    default: return "test";
  }
}

inline Split split_from_name(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw UsageError("unknown split: " + std::string(name));
}

// Closed relation label set: the union over all three splits (37 labels; two
// of them occur only in the dev split). Frozen at build time so labels absent
// from train still get classifier outputs.
class RelationVocabulary {
 public:
  static const RelationVocabulary& instance() {
    static RelationVocabulary vocab;
    return vocab;
  }

  const std::vector<std::string>& labels() const { return labels_; }
  int size() const { return static_cast<int>(labels_.size()); }

  int id(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown relation label: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::string& name(int id) const { return labels_.at(static_cast<size_t>(id)); }

 private:
  RelationVocabulary() {
    labels_ = {
        "per:alternate_names",
        "unanswerable",
        "per:girl/boyfriend",
        "per:positive_impression",
        "per:friends",
        "per:title",
        "per:spouse",
        "per:siblings",
        "per:children",
        "per:parents",
        "per:negative_impression",
        "per:roommate",
        "per:alumni",
        "per:other_family",
        "per:works",
        "per:age",
        "per:client",
        "per:place_of_residence",
        "gpe:residents_of_place",
        "per:boss",
        "per:subordinate",
        "per:visited_place",
        "gpe:visitors_of_place",
        "per:employee_or_member_of",
        "org:employees_or_members",
        "per:neighbor",
        "per:place_of_work",
        "per:pet",
        "per:acquaintance",
        "per:origin",
        "per:dates",
        "per:schools_attended",
        "org:students",
        "per:major",
        "per:date_of_birth",
        "gpe:birth_in_place",
        "per:place_of_birth",
    };
    for (size_t i = 0; i < labels_.size(); ++i) index_[labels_[i]] = static_cast<int>(i);
  }

  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

struct Utterance {
  int index = 0;               // 0-based turn position
  std::string speaker_label;   // verbatim text before the first ':'
  std::string text_raw;        // verbatim text after the first ':' (round-trips byte-exact)

  // Utterance text with surrounding whitespace stripped.
  std::string text() const {
    size_t b = text_raw.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    size_t e = text_raw.find_last_not_of(" \t");
    return text_raw.substr(b, e - b + 1);
  }
  std::string raw_turn() const { return speaker_label + ":" + text_raw; }
};

struct RelationInstance {
  std::string subject_text;                 // x
  std::string object_text;                  // y
  std::vector<std::string> relation_names;  // r, file order preserved
  std::vector<int> relation_rids;           // rid, as stored in the file
  std::vector<std::string> trigger_texts;   // t, aligned with r
  std::string subject_type;                 // x_type
  std::string object_type;                  // y_type
  std::set<int> relation_labels;            // vocabulary ids, derived from r

  bool has_label(int id) const { return relation_labels.count(id) != 0; }
};

struct Dialogue {
  std::vector<Utterance> utterances;
  std::vector<RelationInstance> relation_instances;
  Split split = Split::kTrain;
};

// Splits a raw speaker label into individual speaker names. Labels may name
// several speakers ("Speaker 1 and Speaker 2"); parsing must not lose them.
inline std::vector<std::string> parse_speaker_names(const std::string& label) {
  std::vector<std::string> parts;
  size_t start = 0;
  auto flush = [&](size_t end) {
    std::string_view part(label.data() + start, end - start);
    size_t b = part.find_first_not_of(" \t");
    if (b == std::string_view::npos) return;
    size_t e = part.find_last_not_of(" \t");
    parts.emplace_back(part.substr(b, e - b + 1));
  };
  for (size_t i = 0; i < label.size();) {
    if (label.compare(i, 5, " and ") == 0) {
      flush(i);
      i += 5;
      start = i;
    } else if (label[i] == ',') {
      flush(i);
      ++i;
      start = i;
    } else {
      ++i;
    }
  }
  flush(label.size());
  return parts;
}

namespace detail {

inline Utterance parse_turn(const std::string& raw, int index, const std::string& where) {
  Utterance u;
  u.index = index;
  size_t colon = raw.find(':');
  if (colon == std::string::npos || colon == 0)
    throw DataError(where + ": turn " + std::to_string(index) +
                    " has no speaker prefix: \"" + raw + "\"");
  u.speaker_label = raw.substr(0, colon);
  u.text_raw = raw.substr(colon + 1);
  return u;
}

inline RelationInstance parse_relation(const nlohmann::json& j, const std::string& where) {
  const auto& vocab = RelationVocabulary::instance();
  RelationInstance inst;
  try {
    inst.subject_text = j.at("x").get<std::string>();
    inst.object_text = j.at("y").get<std::string>();
    inst.relation_names = j.at("r").get<std::vector<std::string>>();
    if (j.contains("rid")) inst.relation_rids = j.at("rid").get<std::vector<int>>();
    if (j.contains("t")) inst.trigger_texts = j.at("t").get<std::vector<std::string>>();
    inst.subject_type = j.value("x_type", "");
    inst.object_type = j.value("y_type", "");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": malformed relation record: " + e.what());
  }
  if (inst.relation_names.empty())
    throw DataError(where + ": relation record has an empty label list");
  for (const auto& name : inst.relation_names) {
    if (!vocab.contains(name))
      throw DataError(where + ": unknown relation label: " + name);
    inst.relation_labels.insert(vocab.id(name));
  }
  return inst;
}

}  // namespace detail

// Parses a corpus from the DialogRE JSON shape: a top-level list of
// [turns, relations] pairs, where turns are "Speaker k: ..." strings.
inline std::vector<Dialogue> parse_corpus_json(const nlohmann::json& root, Split split,
                                               const std::string& origin) {
  if (!root.is_array()) throw DataError(origin + ": top level is not a list");
  std::vector<Dialogue> dialogues;
  dialogues.reserve(root.size());
  for (size_t di = 0; di < root.size(); ++di) {
    const std::string where = origin + ": dialogue " + std::to_string(di);
    const auto& entry = root[di];
    if (!entry.is_array() || entry.size() != 2)
      throw DataError(where + ": expected a [turns, relations] pair");
    Dialogue d;
    d.split = split;
    const auto& turns = entry[0];
    const auto& relations = entry[1];
    if (!turns.is_array() || turns.empty())
      throw DataError(where + ": needs at least one utterance");
    if (!relations.is_array() || relations.empty())
      throw DataError(where + ": needs at least one relation instance");
    int index = 0;
    for (const auto& t : turns) {
      if (!t.is_string()) throw DataError(where + ": turn is not a string");
      d.utterances.push_back(detail::parse_turn(t.get<std::string>(), index++, where));
    }
    for (const auto& r : relations) d.relation_instances.push_back(detail::parse_relation(r, where));
    dialogues.push_back(std::move(d));
  }
  return dialogues;
}

inline std::vector<Dialogue> load_corpus(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": JSON parse failure: " + e.what());
  }
  return parse_corpus_json(root, split, path);
}

// Inverse of parsing; load(serialize(load(x))) is a fixed point.
inline nlohmann::json serialize_corpus(const std::vector<Dialogue>& dialogues) {
  nlohmann::json root = nlohmann::json::array();
  for (const auto& d : dialogues) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& u : d.utterances) turns.push_back(u.raw_turn());
    nlohmann::json relations = nlohmann::json::array();
    for (const auto& inst : d.relation_instances) {
      nlohmann::json r;
      r["x"] = inst.subject_text;
      r["y"] = inst.object_text;
      r["r"] = inst.relation_names;
      r["rid"] = inst.relation_rids;
      r["t"] = inst.trigger_texts;
      r["x_type"] = inst.subject_type;
      r["y_type"] = inst.object_type;
      relations.push_back(std::move(r));
    }
    root.push_back(nlohmann::json::array({std::move(turns), std::move(relations)}));
  }
  return root;
}

struct StatsReport {
  long conversations = 0;
  long argument_pairs = 0;
  double mean_tokens = 0.0;    // rule-tokenizer tokens per dialogue
  double mean_turns = 0.0;
  double mean_speakers = 0.0;  // distinct speakers after multi-speaker label splitting
};

inline StatsReport corpus_stats(const std::vector<Dialogue>& dialogues) {
  if (dialogues.empty()) throw DataError("corpus_stats: empty dialogue list");
  StatsReport rep;
  rep.conversations = static_cast<long>(dialogues.size());
  long tokens = 0, turns = 0, speakers = 0;
  for (const auto& d : dialogues) {
    rep.argument_pairs += static_cast<long>(d.relation_instances.size());
    turns += static_cast<long>(d.utterances.size());
    std::set<std::string> names;
    for (const auto& u : d.utterances) {
      tokens += static_cast<long>(rule_tokenize(u.text()).size());
      for (const auto& name : parse_speaker_names(u.speaker_label)) names.insert(lowercase(name));
    }
    speakers += static_cast<long>(names.size());
  }
  const double n = static_cast<double>(dialogues.size());
  rep.mean_tokens = static_cast<double>(tokens) / n;
  rep.mean_turns = static_cast<double>(turns) / n;
  rep.mean_speakers = static_cast<double>(speakers) / n;
  return rep;
}

struct LabelDistribution {
  std::vector<long> counts;  // indexed by relation vocabulary id
  long pair_total = 0;

  double percentage(int label) const {
    if (pair_total == 0) return 0.0;
    return 100.0 * static_cast<double>(counts.at(static_cast<size_t>(label))) /
           static_cast<double>(pair_total);
  }
};

// Per-label instance counts. Percentages use the split's argument-pair count
// as denominator, so multi-label pairs can push the column sum above 100%.
inline LabelDistribution label_distribution(const std::vector<Dialogue>& dialogues) {
  LabelDistribution dist;
  dist.counts.assign(static_cast<size_t>(RelationVocabulary::instance().size()), 0);
  for (const auto& d : dialogues) {
    for (const auto& inst : d.relation_instances) {
      dist.pair_total += 1;
      for (int id : inst.relation_labels) dist.counts[static_cast<size_t>(id)] += 1;
    }
  }
  return dist;
}

}  // namespace hgdre
