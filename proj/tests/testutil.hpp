#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hgdre/annotate.hpp"
#include "hgdre/corpus.hpp"

namespace hgdre::testing {

inline std::string data_path(const std::string& file) {
  return std::string(HGDRE_TEST_DATA_DIR) + "/" + file;
}

inline std::string mini_corpus_path() { return data_path("mini.json"); }

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("hgdre_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Annotator whose output is injected by the test, keyed by exact text.
// Lets graph tests control POS/NER assignments precisely.
class FakeAnnotator : public Annotator {
 public:
  std::string name() const override { return "fake"; }
  std::string version() const override { return "test"; }
  bool shareable() const override { return true; }

  void set(const std::string& text, std::vector<TokenAnnotation> tokens) {
    table_[text] = std::move(tokens);
  }

  std::vector<TokenAnnotation> annotate(const std::string& text) const override {
    auto it = table_.find(text);
    if (it != table_.end()) return it->second;
    // Fall back to bare tokenization with NOUN/NONE tags.
    std::vector<TokenAnnotation> out;
    for (const auto& surface : rule_tokenize(text)) {
      TokenAnnotation t;
      t.surface = surface;
      t.norm = lowercase(surface);
      t.pos = pos_tag_id("NOUN");
      t.ner = ner_none_id();
      out.push_back(std::move(t));
    }
    return out;
  }

 private:
  std::map<std::string, std::vector<TokenAnnotation>> table_;
};

inline TokenAnnotation tok(const std::string& surface, const std::string& pos,
                           const std::string& ner) {
  TokenAnnotation t;
  t.surface = surface;
  t.norm = lowercase(surface);
  t.pos = pos_tag_id(pos);
  t.ner = ner_type_id(ner);
  return t;
}

// Builds a dialogue from raw "Speaker k: ..." turn strings plus instances.
inline Dialogue make_dialogue(const std::vector<std::string>& turns,
                              std::vector<RelationInstance> instances,
                              Split split = Split::kTrain) {
  nlohmann::json root = nlohmann::json::array();
  nlohmann::json jturns(turns);
  nlohmann::json jrel = nlohmann::json::array();
  for (const auto& inst : instances) {
    nlohmann::json r;
    r["x"] = inst.subject_text;
    r["y"] = inst.object_text;
    r["r"] = inst.relation_names;
    r["rid"] = inst.relation_rids;
    r["t"] = inst.trigger_texts;
    r["x_type"] = inst.subject_type.empty() ? "PER" : inst.subject_type;
    r["y_type"] = inst.object_type.empty() ? "PER" : inst.object_type;
    jrel.push_back(std::move(r));
  }
  root.push_back(nlohmann::json::array({std::move(jturns), std::move(jrel)}));
  return parse_corpus_json(root, split, "test")[0];
}

inline RelationInstance make_instance(const std::string& subject, const std::string& object,
                                      const std::vector<std::string>& relations,
                                      const std::string& x_type = "PER",
                                      const std::string& y_type = "PER") {
  RelationInstance inst;
  inst.subject_text = subject;
  inst.object_text = object;
  inst.relation_names = relations;
  for (const auto& r : relations) {
    inst.relation_rids.push_back(RelationVocabulary::instance().id(r) + 1);
    inst.trigger_texts.emplace_back();
    inst.relation_labels.insert(RelationVocabulary::instance().id(r));
  }
  inst.subject_type = x_type;
  inst.object_type = y_type;
  return inst;
}

// A synthetic, easily learnable corpus: the relation is fully determined by a
// cue word in the first turn. Used by capacity and determinism tests.
inline std::vector<Dialogue> synthetic_corpus(int count, uint64_t seed) {
  static const std::vector<std::pair<std::string, std::string>> kCues = {
      {"boss", "per:boss"},
      {"friend", "per:friends"},
      {"sister", "per:siblings"},
      {"daughter", "per:children"},
  };
  static const std::vector<std::string> kNames = {"Emma", "Ross",  "Monica", "Frank",
                                                  "Rachel", "Joey", "Phoebe", "Mindy"};
  static const std::vector<std::string> kFillers = {
      "Speaker 2: Oh wow really?",
      "Speaker 2: I did not know that.",
      "Speaker 2: That is so great!",
      "Speaker 2: Tell me more about it.",
  };
  std::mt19937_64 rng(seed);
  std::vector<Dialogue> out;
  for (int i = 0; i < count; ++i) {
    const auto& cue = kCues[rng() % kCues.size()];
    const auto& name = kNames[rng() % kNames.size()];
    std::vector<std::string> turns = {
        "Speaker 1: " + name + " is my " + cue.first + " .",
        kFillers[rng() % kFillers.size()],
        "Speaker 1: I saw " + name + " yesterday .",
    };
    out.push_back(make_dialogue(
        turns, {make_instance("Speaker 1", name, {cue.second})}, Split::kTrain));
  }
  return out;
}

}  // namespace hgdre::testing
