#pragma once

#include <random>
#include <vector>

#include "hgdre/annotate.hpp"
#include "hgdre/embeddings.hpp"
#include "hgdre/nn.hpp"

namespace hgdre {

// Two-level utterance encoder: token embeddings -> per-utterance BiLSTM ->
// max pool -> conversation-level BiLSTM. Either level can be ablated.
template <class Real>
struct UtteranceEncoder {
  nn::BiLstm<Real> local;
  nn::BiLstm<Real> global;
  bool use_local = true;
  bool use_global = true;

  static UtteranceEncoder create(nn::ParameterStore<Real>& store, const EmbeddingConfig& embed,
                                 int local_hidden, int local_layers, int global_hidden,
                                 int global_layers, Real dropout, bool use_local,
                                 bool use_global) {
    UtteranceEncoder enc;
    enc.use_local = use_local;
    enc.use_global = use_global;
    int token_dim = embed.token_dim();
    int pooled_dim = use_local ? 2 * local_hidden : token_dim;
    if (use_local)
      enc.local = nn::BiLstm<Real>::create(store, "encoder.local", token_dim, local_hidden,
                                           local_layers, dropout);
    if (use_global)
      enc.global = nn::BiLstm<Real>::create(store, "encoder.global", pooled_dim, global_hidden,
                                            global_layers, dropout);
    return enc;
  }

  int pooled_dim(const EmbeddingConfig& embed) const {
    return use_local ? local.output_dim() : embed.token_dim();
  }
  int utterance_dim(const EmbeddingConfig& embed) const {
    return use_global ? global.output_dim() : pooled_dim(embed);
  }
};

// Token embedding sequence [e_w; e_p; e_t] for one utterance, T x token_dim.
// Empty utterances produce the single learned padding row.
template <class Real>
typename ad::Tape<Real>::Var embed_tokens(ad::Tape<Real>& tape, const AnnotatedUtterance& utt,
                                          const EmbeddingTables<Real>& tables) {
  using Var = typename ad::Tape<Real>::Var;
  const EmbeddingConfig& cfg = tables.config;
  if (utt.tokens.empty()) return tape.gather_rows(tape.leaf(*tables.pad), {0});

  const long T = static_cast<long>(utt.tokens.size());
  ad::Matrix<Real> words(T, cfg.word_dim);
  std::vector<int> pos_ids, ner_ids;
  pos_ids.reserve(utt.tokens.size());
  ner_ids.reserve(utt.tokens.size());
  for (long i = 0; i < T; ++i) {
    const TokenAnnotation& tok = utt.tokens[static_cast<size_t>(i)];
    if (cfg.use_pos) {
      if (tok.pos < 0 || tok.pos >= static_cast<int>(pos_tag_names().size()))
        throw DataError("token has an out-of-vocabulary POS id");
      pos_ids.push_back(tok.pos);
    }
    if (cfg.use_ner) {
      if (tok.ner < 0 || tok.ner >= static_cast<int>(ner_type_names().size()))
        throw DataError("token has an out-of-vocabulary entity-type id");
      ner_ids.push_back(tok.ner);
    }
    words.row(i) = tables.word_row(tok.norm);
  }
  std::vector<Var> parts;
  parts.push_back(tape.constant(std::move(words)));  // frozen pretrained rows
  if (cfg.use_pos) parts.push_back(tape.gather_rows(tape.leaf(*tables.pos), std::move(pos_ids)));
  if (cfg.use_ner) parts.push_back(tape.gather_rows(tape.leaf(*tables.ner), std::move(ner_ids)));
  return parts.size() == 1 ? parts[0] : tape.hcat(std::span<const Var>(parts));
}

template <class Real>
struct LocalEncoding {
  typename ad::Tape<Real>::Var token_states;  // T x 2*local_hidden
  typename ad::Tape<Real>::Var pooled;        // 1 x 2*local_hidden
};

// Bidirectional recurrence over one utterance plus coordinatewise max pool.
template <class Real>
LocalEncoding<Real> encode_local(ad::Tape<Real>& tape, typename ad::Tape<Real>::Var embeddings,
                                 const UtteranceEncoder<Real>& enc, bool train,
                                 std::mt19937_64* dropout_rng) {
  LocalEncoding<Real> out;
  out.token_states =
      enc.use_local ? enc.local.run(tape, embeddings, train, dropout_rng) : embeddings;
  out.pooled = tape.colwise_max(out.token_states);
  return out;
}

// Conversation-level recurrence over the stacked pooled vectors c_1..c_N;
// the output rows initialize the utterance nodes.
template <class Real>
typename ad::Tape<Real>::Var encode_global(ad::Tape<Real>& tape,
                                           typename ad::Tape<Real>::Var pooled_stack,
                                           const UtteranceEncoder<Real>& enc, bool train,
                                           std::mt19937_64* dropout_rng) {
  if (!enc.use_global) return pooled_stack;
  return enc.global.run(tape, pooled_stack, train, dropout_rng);
}

template <class Real>
struct DialogueEncoding {
  std::vector<typename ad::Tape<Real>::Var> token_states;  // per utterance
  typename ad::Tape<Real>::Var pooled_stack;               // N x pooled_dim
  typename ad::Tape<Real>::Var utterance_states;           // N x utterance_dim
};

template <class Real>
DialogueEncoding<Real> encode_dialogue(ad::Tape<Real>& tape,
                                       const std::vector<AnnotatedUtterance>& annotated,
                                       const EmbeddingTables<Real>& tables,
                                       const UtteranceEncoder<Real>& enc, bool train,
                                       std::mt19937_64* dropout_rng) {
  using Var = typename ad::Tape<Real>::Var;
  DialogueEncoding<Real> out;
  std::vector<Var> pooled;
  pooled.reserve(annotated.size());
  for (const auto& utt : annotated) {
    Var emb = embed_tokens(tape, utt, tables);
    LocalEncoding<Real> local = encode_local(tape, emb, enc, train, dropout_rng);
    out.token_states.push_back(local.token_states);
    pooled.push_back(local.pooled);
  }
  out.pooled_stack = tape.vcat(std::span<const Var>(pooled));
  out.utterance_states = encode_global(tape, out.pooled_stack, enc, train, dropout_rng);
  return out;
}

}  // namespace hgdre
