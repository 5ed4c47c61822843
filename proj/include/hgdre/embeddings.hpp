#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hgdre/annotate.hpp"
#include "hgdre/errors.hpp"
#include "hgdre/nn.hpp"

namespace hgdre {

// Case-folded token forms with dense ids, sorted so ids are reproducible.
class WordVocab {
 public:
  WordVocab() = default;
  explicit WordVocab(std::vector<std::string> sorted_tokens) : tokens_(std::move(sorted_tokens)) {
    for (size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
  }

  static WordVocab build(const std::vector<std::vector<AnnotatedUtterance>>& corpus) {
    std::set<std::string> forms;
    for (const auto& dialogue : corpus)
      for (const auto& utt : dialogue)
        for (const auto& tok : utt.tokens) forms.insert(tok.norm);
    return WordVocab(std::vector<std::string>(forms.begin(), forms.end()));
  }

  int id(const std::string& norm) const {
    auto it = index_.find(norm);
    return it == index_.end() ? -1 : it->second;
  }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Deterministic row for tokens absent from the pretrained file: a fixed-seed
// uniform(-0.05, 0.05) draw keyed by the token string hash, so the same token
// always maps to the same vector, in training and at prediction time.
template <class Real>
ad::Matrix<Real> hashed_embedding_row(const std::string& token, long dim) {
  std::mt19937_64 rng(nn::fnv1a64(token) ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  ad::Matrix<Real> row(1, dim);
  for (long j = 0; j < dim; ++j) row(0, j) = static_cast<Real>(dist(rng));
  return row;
}

// Streams a pretrained vector file (one token per line, token followed by
// `dim` decimals) and fills rows for tokens present in `vocab`. Returns the
// number of vocabulary tokens found. Rows for missing tokens must already
// hold their fallback values.
template <class Real>
long fill_pretrained_rows(ad::Matrix<Real>& table, const WordVocab& vocab,
                          const std::string& path, long dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pretrained vector file: " + path);
  std::string line;
  long found = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t sp = line.find(' ');
    if (sp == std::string::npos) continue;
    // Tolerate a word2vec-style "count dim" header on the first line.
    if (first) {
      first = false;
      std::istringstream probe(line);
      double a, b;
      std::string rest;
      if (probe >> a >> b && !(probe >> rest)) continue;
    }
    std::string token = line.substr(0, sp);
    int id = vocab.id(lowercase(token));
    if (id < 0) continue;
    std::istringstream values(line.substr(sp + 1));
    ad::Matrix<Real> row(1, dim);
    long j = 0;
    double x;
    while (j < dim && (values >> x)) row(0, j++) = static_cast<Real>(x);
    if (j != dim) continue;  // multi-word tokens or short lines
    table.row(id) = row;
    ++found;
  }
  return found;
}

struct EmbeddingConfig {
  int word_dim = 300;
  int pos_dim = 30;
  int ner_dim = 30;
  int node_dim = 300;        // common model width for graph node states
  int max_speaker_slots = 30;
  bool use_pos = true;       // token-level POS embedding e_p
  bool use_ner = true;       // token-level entity-type embedding e_t

  int token_dim() const {
    return word_dim + (use_pos ? pos_dim : 0) + (use_ner ? ner_dim : 0);
  }
};

// All embedding tables. The word table is frozen (pretrained vectors are not
// fine-tuned); everything else trains.
template <class Real>
struct EmbeddingTables {
  EmbeddingConfig config;
  WordVocab vocab;
  nn::Tensor<Real>* word = nullptr;       // |V| x word_dim, frozen
  nn::Tensor<Real>* pos = nullptr;        // |POS| x pos_dim
  nn::Tensor<Real>* ner = nullptr;        // |T| x ner_dim
  nn::Tensor<Real>* pad = nullptr;        // 1 x token_dim, for empty utterances
  nn::Tensor<Real>* speaker = nullptr;    // slots x node_dim
  nn::Tensor<Real>* argument = nullptr;   // 2 x node_dim (subject, object)
  nn::Tensor<Real>* type_node = nullptr;  // |T| x node_dim

  static EmbeddingTables create(nn::ParameterStore<Real>& store, EmbeddingConfig cfg,
                                WordVocab vocab, const std::string& vectors_path) {
    EmbeddingTables t;
    t.config = cfg;
    t.vocab = std::move(vocab);
    t.word = &store.zeros("embed.word", std::max(1, t.vocab.size()), cfg.word_dim,
                          /*trainable=*/false);
    for (int i = 0; i < t.vocab.size(); ++i)
      t.word->value.row(i) = hashed_embedding_row<Real>(t.vocab.tokens()[i], cfg.word_dim);
    if (!vectors_path.empty())
      fill_pretrained_rows(t.word->value, t.vocab, vectors_path, cfg.word_dim);
    if (cfg.use_pos)
      t.pos = &store.uniform("embed.pos", static_cast<long>(pos_tag_names().size()),
                             cfg.pos_dim, Real(-0.05), Real(0.05));
    if (cfg.use_ner)
      t.ner = &store.uniform("embed.ner", static_cast<long>(ner_type_names().size()),
                             cfg.ner_dim, Real(-0.05), Real(0.05));
    t.pad = &store.uniform("embed.pad", 1, cfg.token_dim(), Real(-0.05), Real(0.05));
    t.speaker = &store.uniform("embed.speaker", cfg.max_speaker_slots, cfg.node_dim,
                               Real(-0.05), Real(0.05));
    t.argument = &store.uniform("embed.argument", 2, cfg.node_dim, Real(-0.05), Real(0.05));
    t.type_node = &store.uniform("embed.type_node", static_cast<long>(ner_type_names().size()),
                                 cfg.node_dim, Real(-0.05), Real(0.05));
    return t;
  }

  // Word vector by case-folded form; falls back to the hash rule for tokens
  // outside the build-time vocabulary (unseen dialogues at prediction time).
  ad::Matrix<Real> word_row(const std::string& norm) const {
    int id = vocab.id(norm);
    if (id >= 0) return word->value.row(id);
    return hashed_embedding_row<Real>(norm, config.word_dim);
  }

  int speaker_slot(int speaker_id) const {
    return std::min(speaker_id, config.max_speaker_slots - 1);
  }
};

}  // namespace hgdre
