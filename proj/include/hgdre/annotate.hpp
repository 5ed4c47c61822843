#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hgdre/corpus.hpp"
#include "hgdre/errors.hpp"
#include "hgdre/tokenize.hpp"
#include "json.hpp"

namespace hgdre {

// Universal POS tags plus SPACE (what an industrial pipeline emits).
inline const std::vector<std::string>& pos_tag_names() {
  static const std::vector<std::string> kTags = {
      "ADJ",  "ADP",   "ADV",  "AUX",  "CCONJ", "DET",  "INTJ", "NOUN", "NUM",
      "PART", "PRON",  "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",   "SPACE"};
  return kTags;
}

// OntoNotes entity types plus the corpus' coarse STRING/VALUE and a NONE
// bucket for untyped tokens. NONE is last so typed ids are contiguous.
inline const std::vector<std::string>& ner_type_names() {
  static const std::vector<std::string> kTypes = {
      "PERSON",   "NORP",    "FAC",     "ORG",      "GPE",     "LOC",
      "PRODUCT",  "EVENT",   "WORK_OF_ART", "LAW",  "LANGUAGE", "DATE",
      "TIME",     "PERCENT", "MONEY",   "QUANTITY", "ORDINAL", "CARDINAL",
      "STRING",   "VALUE",   "NONE"};
  return kTypes;
}

inline int pos_tag_id(const std::string& name) {
  const auto& tags = pos_tag_names();
  for (size_t i = 0; i < tags.size(); ++i)
    if (tags[i] == name) return static_cast<int>(i);
  throw DataError("unknown POS tag: " + name);
}

inline int ner_type_id(const std::string& name) {
  const auto& types = ner_type_names();
  for (size_t i = 0; i < types.size(); ++i)
    if (types[i] == name) return static_cast<int>(i);
  throw DataError("unknown entity type: " + name);
}

inline int ner_none_id() { return static_cast<int>(ner_type_names().size()) - 1; }

// Maps the corpus' coarse argument types (PER/GPE/ORG/STRING/VALUE) into the
// entity-type vocabulary.
inline int coarse_type_id(const std::string& corpus_type) {
  if (corpus_type == "PER") return ner_type_id("PERSON");
  if (corpus_type == "GPE") return ner_type_id("GPE");
  if (corpus_type == "ORG") return ner_type_id("ORG");
  if (corpus_type == "STRING") return ner_type_id("STRING");
  if (corpus_type == "VALUE") return ner_type_id("VALUE");
  return ner_none_id();
}

struct TokenAnnotation {
  std::string surface;
  std::string norm;  // case-folded surface
  int pos = 0;
  int ner = 0;

  bool operator==(const TokenAnnotation&) const = default;
};

struct SpeakerTextMention {
  int begin = 0;  // half-open token interval
  int end = 0;
  int speaker_id = 0;
};

struct AnnotatedUtterance {
  int utterance_index = 0;
  std::vector<TokenAnnotation> tokens;
  std::set<int> speaker_ids;                        // resolved speakers of this turn
  std::vector<SpeakerTextMention> speaker_mentions; // "Speaker 1" etc. inside the text
};

enum class ArgumentSlot { kSubject, kObject };

struct MentionSpan {
  int utterance_index = 0;
  int begin = 0;  // half-open token interval; empty for speaker-valued arguments
  int end = 0;
  ArgumentSlot slot = ArgumentSlot::kSubject;
};

// Pluggable tokenize+POS+NER backend. Implementations must be deterministic
// for a fixed (text, version); `shareable` declares whether one handle may be
// used from several workers at once.
class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual std::string name() const = 0;
  virtual std::string version() const = 0;
  virtual bool shareable() const = 0;
  virtual std::vector<TokenAnnotation> annotate(const std::string& text) const = 0;

  virtual std::vector<std::vector<TokenAnnotation>> annotate_batch(
      const std::vector<std::string>& texts) const {
    std::vector<std::vector<TokenAnnotation>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(annotate(t));
    return out;
  }
};

namespace detail {

inline const std::unordered_set<std::string>& person_gazetteer() {
  // First names that dominate the corpus domain plus a few common ones.
  static const std::unordered_set<std::string> kNames = {
      "emma",    "ross",    "rachel", "monica", "chandler", "joey",   "phoebe",
      "ben",     "carol",   "susan",  "emily",  "richard",  "janice", "gunther",
      "mike",    "david",   "frank",  "alice",  "mindy",    "barry",  "kathy",
      "julie",   "charlie", "mark",   "tag",    "paul",     "pete",   "erica",
      "jack",    "judy",    "estelle", "ursula", "eddie",    "tom",    "anna",
      "mary",    "john",    "james",  "robert", "michael",  "linda",  "sarah",
      "laura",   "kevin",   "brian",  "amy",    "jill",     "bob",    "joe",
      "dan",     "dina",    "gary",   "tim",    "jane",     "peter",  "lily",
      "sandra",  "steve",   "nora",   "bonnie", "angela",   "donna",  "elizabeth"};
  return kNames;
}

inline const std::unordered_set<std::string>& gpe_gazetteer() {
  static const std::unordered_set<std::string> kPlaces = {
      "york",   "london", "paris",   "rome",    "boston", "chicago", "tulsa",
      "vegas",  "atlantic", "china",  "france",  "italy",  "england", "america",
      "canada", "japan",  "montauk", "yemen",   "minsk",  "texas",   "jersey"};
  return kPlaces;
}

inline const std::unordered_set<std::string>& org_gazetteer() {
  static const std::unordered_set<std::string> kOrgs = {
      "nbc", "cbs", "fbi", "cia", "nasa", "ucla", "nyu", "ibm", "bloomingdale"};
  return kOrgs;
}

inline bool in_ci(const std::unordered_set<std::string>& set, const std::string& norm) {
  return set.count(norm) != 0;
}

inline bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

inline bool numeric_like(const std::string& s) {
  if (s.empty()) return false;
  bool digit = false;
  for (char c : s) {
    if (std::isdigit(static_cast<unsigned char>(c))) digit = true;
    else if (c != '.' && c != ',' && c != '-' && c != '/') return false;
  }
  return digit;
}

inline bool word_in(const char* const* list, size_t n, const std::string& norm) {
  for (size_t i = 0; i < n; ++i)
    if (norm == list[i]) return true;
  return false;
}

}  // namespace detail

// Deterministic rule-based fallback backend: the rule_tokenize tokenizer,
// closed-class word lists and suffix heuristics for POS, and a gazetteer NER.
// The golden-file tests pin this backend's exact output.
class RuleAnnotator : public Annotator {
 public:
  std::string name() const override { return "rule"; }
  std::string version() const override { return "1"; }
  bool shareable() const override { return true; }

  std::vector<TokenAnnotation> annotate(const std::string& text) const override {
    std::vector<std::string> surfaces = rule_tokenize(text);
    std::vector<TokenAnnotation> tokens;
    tokens.reserve(surfaces.size());
    for (size_t i = 0; i < surfaces.size(); ++i) {
      TokenAnnotation t;
      t.surface = surfaces[i];
      t.norm = lowercase(t.surface);
      t.pos = pos_of(t.surface, t.norm);
      t.ner = ner_of(surfaces, i, t.norm);
      tokens.push_back(std::move(t));
    }
    return tokens;
  }

 private:
  static int pos_of(const std::string& surface, const std::string& norm) {
    using namespace detail;
    static const char* kPron[] = {"i",  "you", "he",  "she", "it",  "we",  "they",
                                  "me", "him", "her", "us",  "them", "my",  "your",
                                  "his", "its", "our", "their", "mine", "yours",
                                  "this", "that", "these", "those", "who", "what",
                                  "someone", "something", "anyone", "anything",
                                  "everyone", "everybody", "nobody", "himself",
                                  "herself", "myself", "yourself", "'s"};
    static const char* kDet[] = {"a", "an", "the", "some", "any", "no", "every", "each"};
    static const char* kAux[] = {"is",  "am",  "are", "was", "were", "be",  "been",
                                 "being", "have", "has", "had", "do",  "does", "did",
                                 "will", "would", "can", "could", "should", "shall",
                                 "may", "might", "must", "'m", "'re", "'ve", "'ll", "'d"};
    static const char* kAdp[] = {"in", "on", "at", "by", "for", "with", "about",
                                 "against", "between", "into", "through", "during",
                                 "before", "after", "above", "below", "to", "from",
                                 "up", "down", "of", "off", "over", "under"};
    static const char* kCconj[] = {"and", "or", "but", "nor", "yet"};
    static const char* kSconj[] = {"if", "because", "while", "although", "though",
                                   "since", "unless", "until", "when", "where",
                                   "whether"};
    static const char* kIntj[] = {"oh", "hey", "wow", "hi", "hello", "yeah", "yes",
                                  "no", "ugh", "uh", "um", "hmm", "ah", "ooh", "okay",
                                  "ok", "whoa", "gosh", "god", "please", "thanks",
                                  "bye", "huh", "wha", "y'know"};
    static const char* kPart[] = {"not", "n't", "'s"};

    if (norm.size() == 1 && is_punct_char(norm[0])) {
      if (norm[0] == '$' || norm[0] == '+' || norm[0] == '=') return pos_tag_id("SYM");
      return pos_tag_id("PUNCT");
    }
    bool punct_only = !norm.empty();
    for (char c : norm)
      if (!is_punct_char(c)) punct_only = false;
    if (punct_only) return pos_tag_id("PUNCT");
    if (detail::numeric_like(norm)) return pos_tag_id("NUM");
    if (norm == "n't" || norm == "not") return pos_tag_id("PART");
    if (word_in(kAux, std::size(kAux), norm)) return pos_tag_id("AUX");
    if (word_in(kPron, std::size(kPron), norm)) return pos_tag_id("PRON");
    if (word_in(kDet, std::size(kDet), norm)) return pos_tag_id("DET");
    if (word_in(kAdp, std::size(kAdp), norm)) return pos_tag_id("ADP");
    if (word_in(kCconj, std::size(kCconj), norm)) return pos_tag_id("CCONJ");
    if (word_in(kSconj, std::size(kSconj), norm)) return pos_tag_id("SCONJ");
    if (word_in(kIntj, std::size(kIntj), norm)) return pos_tag_id("INTJ");
    if (word_in(kPart, std::size(kPart), norm)) return pos_tag_id("PART");
    if (std::isupper(static_cast<unsigned char>(surface[0])) &&
        (in_ci(person_gazetteer(), norm) || in_ci(gpe_gazetteer(), norm) ||
         in_ci(org_gazetteer(), norm) || norm == "speaker"))
      return pos_tag_id("PROPN");
    if (norm.size() > 3 && norm.ends_with("ly")) return pos_tag_id("ADV");
    if (norm.size() > 4 && (norm.ends_with("ing") || norm.ends_with("ed")))
      return pos_tag_id("VERB");
    static const char* kVerb[] = {"go", "get", "know", "think", "see", "want",
                                  "come", "take", "look", "make", "say", "tell",
                                  "said", "told", "got", "went", "guess", "mean",
                                  "let", "like", "love", "hate", "live", "work",
                                  "move", "marry", "meet", "met", "call", "need"};
    if (word_in(kVerb, std::size(kVerb), norm)) return pos_tag_id("VERB");
    if (norm.size() > 4 && (norm.ends_with("ous") || norm.ends_with("ful") ||
                            norm.ends_with("able") || norm.ends_with("ible") ||
                            norm.ends_with("ive")))
      return pos_tag_id("ADJ");
    static const char* kAdj[] = {"good", "bad", "great", "new", "old", "big",
                                 "little", "best", "nice", "happy", "sorry",
                                 "right", "wrong", "sure", "fine", "cute"};
    if (word_in(kAdj, std::size(kAdj), norm)) return pos_tag_id("ADJ");
    if (std::isupper(static_cast<unsigned char>(surface[0]))) return pos_tag_id("PROPN");
    return pos_tag_id("NOUN");
  }

  static int ner_of(const std::vector<std::string>& surfaces, size_t i,
                    const std::string& norm) {
    using namespace detail;
    // "Speaker 7" token pairs are person mentions.
    if (norm == "speaker" && i + 1 < surfaces.size() && all_digits(surfaces[i + 1]))
      return ner_type_id("PERSON");
    if (all_digits(norm) && i > 0 && lowercase(surfaces[i - 1]) == "speaker")
      return ner_type_id("PERSON");
    if (in_ci(person_gazetteer(), norm) &&
        std::isupper(static_cast<unsigned char>(surfaces[i][0])))
      return ner_type_id("PERSON");
    if (in_ci(gpe_gazetteer(), norm) &&
        std::isupper(static_cast<unsigned char>(surfaces[i][0])))
      return ner_type_id("GPE");
    if (in_ci(org_gazetteer(), norm)) return ner_type_id("ORG");
    static const char* kDays[] = {"monday", "tuesday", "wednesday", "thursday",
                                  "friday", "saturday", "sunday", "january",
                                  "february", "march", "april", "june", "july",
                                  "august", "september", "october", "november",
                                  "december", "today", "tomorrow", "yesterday"};
    if (word_in(kDays, std::size(kDays), norm)) return ner_type_id("DATE");
    if (numeric_like(norm)) return ner_type_id("CARDINAL");
    return ner_none_id();
  }
};

// Adapter to an external pipeline run as a subprocess. The command is invoked
// once per batch as: <command> <input.json> <output.json>, where input is a
// JSON list of utterance strings and output a JSON list of token lists, each
// token an object {"t": surface, "pos": tag name, "ner": type name or ""}.
class SubprocessAnnotator : public Annotator {
 public:
  SubprocessAnnotator(std::string command, std::string backend_name, std::string version,
                      std::string scratch_dir)
      : command_(std::move(command)),
        name_(std::move(backend_name)),
        version_(std::move(version)),
        scratch_dir_(std::move(scratch_dir)) {}

  std::string name() const override { return name_; }
  std::string version() const override { return version_; }
  bool shareable() const override { return false; }  // one handle per worker

  std::vector<TokenAnnotation> annotate(const std::string& text) const override {
    return annotate_batch({text}).at(0);
  }

  std::vector<std::vector<TokenAnnotation>> annotate_batch(
      const std::vector<std::string>& texts) const override {
    namespace fs = std::filesystem;
    fs::create_directories(scratch_dir_);
    const std::string in_path = scratch_dir_ + "/annotate_in.json";
    const std::string out_path = scratch_dir_ + "/annotate_out.json";
    {
      std::ofstream out(in_path);
      out << nlohmann::json(texts).dump();
    }
    const std::string cmd = command_ + " " + in_path + " " + out_path;
    int rc = std::system(cmd.c_str());
    if (rc != 0)
      throw DataError("annotation backend '" + name_ + "' failed (exit " +
                      std::to_string(rc) + "): " + cmd);
    std::ifstream in(out_path);
    if (!in) throw DataError("annotation backend produced no output: " + out_path);
    nlohmann::json root;
    in >> root;
    std::vector<std::vector<TokenAnnotation>> result;
    result.reserve(root.size());
    for (const auto& sent : root) {
      std::vector<TokenAnnotation> tokens;
      for (const auto& tok : sent) {
        TokenAnnotation t;
        t.surface = tok.at("t").get<std::string>();
        t.norm = lowercase(t.surface);
        t.pos = pos_tag_id(tok.at("pos").get<std::string>());
        std::string ner = tok.value("ner", "");
        t.ner = ner.empty() ? ner_none_id() : ner_type_id(ner);
        tokens.push_back(std::move(t));
      }
      result.push_back(std::move(tokens));
    }
    if (result.size() != texts.size())
      throw DataError("annotation backend returned " + std::to_string(result.size()) +
                      " records for " + std::to_string(texts.size()) + " inputs");
    return result;
  }

 private:
  std::string command_;
  std::string name_;
  std::string version_;
  std::string scratch_dir_;
};

inline std::unique_ptr<Annotator> make_annotator(const std::string& backend,
                                                 const std::string& scratch_dir = "/tmp") {
  if (backend == "rule") return std::make_unique<RuleAnnotator>();
  if (backend == "spacy")
    return std::make_unique<SubprocessAnnotator>("python3 tools/spacy_backend.py", "spacy",
                                                 "external", scratch_dir);
  throw ConfigError("unknown annotation backend: " + backend);
}

// Canonical per-dialogue speaker identities, assigned in order of first
// appearance. Independent of any other dialogue by construction.
struct SpeakerMap {
  std::vector<std::string> names;              // id -> verbatim name of first appearance
  std::unordered_map<std::string, int> index;  // case-folded name -> id
  std::vector<std::set<int>> turn_speakers;    // per turn

  int id_of(const std::string& name) const {
    auto it = index.find(lowercase(name));
    return it == index.end() ? -1 : it->second;
  }
  int speaker_count() const { return static_cast<int>(names.size()); }
};

inline SpeakerMap resolve_speakers(const Dialogue& dialogue) {
  SpeakerMap map;
  map.turn_speakers.resize(dialogue.utterances.size());
  for (const auto& u : dialogue.utterances) {
    for (const auto& name : parse_speaker_names(u.speaker_label)) {
      std::string key = lowercase(name);
      auto it = map.index.find(key);
      int id;
      if (it == map.index.end()) {
        id = static_cast<int>(map.names.size());
        map.names.push_back(name);
        map.index.emplace(std::move(key), id);
      } else {
        id = it->second;
      }
      map.turn_speakers[static_cast<size_t>(u.index)].insert(id);
    }
  }
  return map;
}

namespace detail {

// Tags token subsequences that spell out a known speaker name.
inline std::vector<SpeakerTextMention> find_speaker_text_mentions(
    const std::vector<TokenAnnotation>& tokens, const SpeakerMap& speakers,
    const Annotator& backend) {
  std::vector<SpeakerTextMention> mentions;
  for (int sid = 0; sid < speakers.speaker_count(); ++sid) {
    std::vector<TokenAnnotation> name_tokens = backend.annotate(speakers.names[sid]);
    if (name_tokens.empty()) continue;
    const size_t m = name_tokens.size();
    for (size_t i = 0; i + m <= tokens.size(); ++i) {
      bool match = true;
      for (size_t k = 0; k < m; ++k) {
        if (tokens[i + k].norm != name_tokens[k].norm) {
          match = false;
          break;
        }
      }
      if (match)
        mentions.push_back({static_cast<int>(i), static_cast<int>(i + m), sid});
    }
  }
  return mentions;
}

}  // namespace detail

inline std::vector<AnnotatedUtterance> annotate_dialogue(const Dialogue& dialogue,
                                                         const Annotator& backend) {
  SpeakerMap speakers = resolve_speakers(dialogue);
  std::vector<std::string> texts;
  texts.reserve(dialogue.utterances.size());
  for (const auto& u : dialogue.utterances) texts.push_back(u.text());

  std::vector<std::vector<TokenAnnotation>> token_lists;
  try {
    token_lists = backend.annotate_batch(texts);
  } catch (const DataError& e) {
    // Re-annotate one by one to name the failing turn.
    token_lists.clear();
    for (size_t i = 0; i < texts.size(); ++i) {
      try {
        token_lists.push_back(backend.annotate(texts[i]));
      } catch (const std::exception& inner) {
        throw AnnotationError(static_cast<int>(i), inner.what());
      }
    }
  }

  std::vector<AnnotatedUtterance> out;
  out.reserve(dialogue.utterances.size());
  for (size_t i = 0; i < dialogue.utterances.size(); ++i) {
    AnnotatedUtterance a;
    a.utterance_index = static_cast<int>(i);
    a.tokens = std::move(token_lists[i]);
    a.speaker_ids = speakers.turn_speakers[i];
    a.speaker_mentions = detail::find_speaker_text_mentions(a.tokens, speakers, backend);
    out.push_back(std::move(a));
  }
  return out;
}

struct ArgumentMentions {
  std::vector<MentionSpan> subject;
  std::vector<MentionSpan> object;
  bool subject_located = false;
  bool object_located = false;
  bool subject_is_speaker = false;
  bool object_is_speaker = false;
  int subject_speaker_id = -1;
  int object_speaker_id = -1;

  const std::vector<MentionSpan>& spans(ArgumentSlot slot) const {
    return slot == ArgumentSlot::kSubject ? subject : object;
  }
};

namespace detail {

inline std::vector<MentionSpan> match_token_sequence(
    const std::vector<AnnotatedUtterance>& annotated,
    const std::vector<TokenAnnotation>& needle, ArgumentSlot slot) {
  std::vector<MentionSpan> spans;
  if (needle.empty()) return spans;
  const size_t m = needle.size();
  for (const auto& utt : annotated) {
    for (size_t i = 0; i + m <= utt.tokens.size(); ++i) {
      bool match = true;
      for (size_t k = 0; k < m; ++k) {
        if (utt.tokens[i + k].norm != needle[k].norm) {
          match = false;
          break;
        }
      }
      if (match)
        spans.push_back({utt.utterance_index, static_cast<int>(i),
                         static_cast<int>(i + m), slot});
    }
  }
  return spans;
}

}  // namespace detail

// Case-insensitive token-sequence match of each argument against every
// utterance. An argument equal to a speaker label instead claims every turn
// by that speaker, with an empty token range. Zero matches set the
// "unlocated" flag rather than raising.
inline ArgumentMentions locate_arguments(const std::vector<AnnotatedUtterance>& annotated,
                                         const RelationInstance& instance,
                                         const SpeakerMap& speakers,
                                         const Annotator& backend) {
  ArgumentMentions result;
  auto locate = [&](const std::string& text, ArgumentSlot slot, std::vector<MentionSpan>& spans,
                    bool& located, bool& is_speaker, int& speaker_id) {
    speaker_id = speakers.id_of(text);
    if (speaker_id >= 0) {
      is_speaker = true;
      for (const auto& utt : annotated) {
        if (utt.speaker_ids.count(speaker_id))
          spans.push_back({utt.utterance_index, 0, 0, slot});
      }
      located = !spans.empty();
      return;
    }
    std::vector<TokenAnnotation> needle = backend.annotate(text);
    spans = detail::match_token_sequence(annotated, needle, slot);
    located = !spans.empty();
  };
  locate(instance.subject_text, ArgumentSlot::kSubject, result.subject,
         result.subject_located, result.subject_is_speaker, result.subject_speaker_id);
  locate(instance.object_text, ArgumentSlot::kObject, result.object,
         result.object_located, result.object_is_speaker, result.object_speaker_id);
  return result;
}

// ---------------------------------------------------------------------------
// Annotation cache: length-prefixed JSON records, one per dialogue, preceded
// by a header record. Each record is "<decimal byte count>\n<json>\n".

inline nlohmann::json annotated_to_json(const std::vector<AnnotatedUtterance>& annotated) {
  nlohmann::json dialogue = nlohmann::json::array();
  for (const auto& utt : annotated) {
    nlohmann::json turn;
    turn["index"] = utt.utterance_index;
    turn["speakers"] = utt.speaker_ids;
    nlohmann::json toks = nlohmann::json::array();
    for (const auto& t : utt.tokens)
      toks.push_back({{"s", t.surface}, {"pos", t.pos}, {"ner", t.ner}});
    turn["tokens"] = std::move(toks);
    nlohmann::json mentions = nlohmann::json::array();
    for (const auto& m : utt.speaker_mentions)
      mentions.push_back({{"b", m.begin}, {"e", m.end}, {"id", m.speaker_id}});
    turn["speaker_mentions"] = std::move(mentions);
    dialogue.push_back(std::move(turn));
  }
  return dialogue;
}

inline std::vector<AnnotatedUtterance> annotated_from_json(const nlohmann::json& dialogue) {
  std::vector<AnnotatedUtterance> out;
  for (const auto& turn : dialogue) {
    AnnotatedUtterance utt;
    utt.utterance_index = turn.at("index").get<int>();
    for (int sid : turn.at("speakers")) utt.speaker_ids.insert(sid);
    for (const auto& tok : turn.at("tokens")) {
      TokenAnnotation t;
      t.surface = tok.at("s").get<std::string>();
      t.norm = lowercase(t.surface);
      t.pos = tok.at("pos").get<int>();
      t.ner = tok.at("ner").get<int>();
      utt.tokens.push_back(std::move(t));
    }
    for (const auto& m : turn.at("speaker_mentions"))
      utt.speaker_mentions.push_back(
          {m.at("b").get<int>(), m.at("e").get<int>(), m.at("id").get<int>()});
    out.push_back(std::move(utt));
  }
  return out;
}

namespace detail {

inline void write_record(std::ostream& out, const nlohmann::json& j) {
  std::string body = j.dump();
  out << body.size() << "\n" << body << "\n";
}

inline std::optional<nlohmann::json> read_record(std::istream& in) {
  std::string len_line;
  if (!std::getline(in, len_line)) return std::nullopt;
  size_t len = 0;
  try {
    len = std::stoul(len_line);
  } catch (const std::exception&) {
    throw DataError("annotation cache: bad record length line: " + len_line);
  }
  std::string body(len, '\0');
  in.read(body.data(), static_cast<std::streamsize>(len));
  if (in.gcount() != static_cast<std::streamsize>(len))
    throw DataError("annotation cache: truncated record");
  in.ignore(1);  // trailing newline
  return nlohmann::json::parse(body);
}

}  // namespace detail

inline void write_annotation_cache(const std::string& path, const Annotator& backend,
                                   const std::vector<std::vector<AnnotatedUtterance>>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write annotation cache: " + path);
  nlohmann::json header{{"magic", "hgdre-annotations"},
                        {"format", 1},
                        {"backend", backend.name()},
                        {"backend_version", backend.version()},
                        {"count", records.size()}};
  detail::write_record(out, header);
  for (const auto& rec : records) detail::write_record(out, annotated_to_json(rec));
}

inline std::vector<std::vector<AnnotatedUtterance>> read_annotation_cache(
    const std::string& path, const Annotator& expected_backend) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open annotation cache: " + path);
  auto header = detail::read_record(in);
  if (!header || header->value("magic", "") != "hgdre-annotations")
    throw DataError("not an annotation cache: " + path);
  if (header->value("backend", "") != expected_backend.name() ||
      header->value("backend_version", "") != expected_backend.version())
    throw DataError("annotation cache " + path + " was produced by backend " +
                    header->value("backend", "?") + "/" +
                    header->value("backend_version", "?") + ", expected " +
                    expected_backend.name() + "/" + expected_backend.version());
  size_t count = header->at("count").get<size_t>();
  std::vector<std::vector<AnnotatedUtterance>> records;
  records.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    auto rec = detail::read_record(in);
    if (!rec) throw DataError("annotation cache ended early: " + path);
    records.push_back(annotated_from_json(*rec));
  }
  return records;
}

}  // namespace hgdre
