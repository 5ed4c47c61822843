#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "hgdre/config.hpp"
#include "hgdre/errors.hpp"
#include "hgdre/model.hpp"

namespace hgdre {

// Checkpoint archive: a magic line, a JSON header (config snapshot, label /
// tag / word vocabularies, tensor index), then raw little-endian float32 data
// for every tensor in index order. Loading validates shapes against the
// freshly constructed model.
namespace checkpoint {

constexpr const char* kMagic = "HGDRECKPT1";

template <class Real>
void save(const std::string& path, const DrModel<Real>& model,
          const std::map<std::string, std::string>& config_echo,
          const std::string& backend_name, const std::string& backend_version) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);

  nlohmann::json header;
  header["magic"] = kMagic;
  header["config"] = config_echo;
  header["backend"] = backend_name;
  header["backend_version"] = backend_version;
  header["relation_labels"] = RelationVocabulary::instance().labels();
  header["pos_tags"] = pos_tag_names();
  header["ner_types"] = ner_type_names();
  header["word_vocab"] = model.tables().vocab.tokens();
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto* t : model.store().all())
    tensors.push_back({{"name", t->name},
                       {"rows", t->value.rows()},
                       {"cols", t->value.cols()},
                       {"trainable", t->trainable}});
  header["tensors"] = std::move(tensors);

  std::string head = header.dump();
  uint64_t head_len = head.size();
  out.write(kMagic, static_cast<std::streamsize>(std::string(kMagic).size()));
  out.put('\n');
  out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto* t : model.store().all()) {
    for (long i = 0; i < t->value.rows(); ++i)
      for (long j = 0; j < t->value.cols(); ++j) {
        float x = static_cast<float>(t->value(i, j));
        out.write(reinterpret_cast<const char*>(&x), sizeof(x));
      }
  }
  if (!out) throw DataError("failed while writing checkpoint: " + path);
}

struct Header {
  nlohmann::json json;
  std::map<std::string, std::string> config;
  std::vector<std::string> word_vocab;
};

inline Header read_header(std::istream& in, const std::string& path) {
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw DataError(path + ": not a checkpoint file");
  uint64_t head_len = 0;
  in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!in) throw DataError(path + ": truncated checkpoint header");
  Header h;
  h.json = nlohmann::json::parse(head);
  for (auto it = h.json.at("config").begin(); it != h.json.at("config").end(); ++it)
    h.config[it.key()] = it.value().get<std::string>();
  h.word_vocab = h.json.at("word_vocab").get<std::vector<std::string>>();
  return h;
}

inline Header peek(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return read_header(in, path);
}

template <class Real>
void load_into(const std::string& path, DrModel<Real>& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  Header h = read_header(in, path);
  if (h.json.at("relation_labels").get<std::vector<std::string>>() !=
      RelationVocabulary::instance().labels())
    throw DataError(path + ": relation label space does not match this build");
  for (const auto& entry : h.json.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const long rows = entry.at("rows").get<long>();
    const long cols = entry.at("cols").get<long>();
    if (!model.store().contains(name))
      throw DataError(path + ": checkpoint tensor '" + name +
                      "' does not exist in the configured model");
    auto& tensor = model.store().get(name);
    if (tensor.value.rows() != rows || tensor.value.cols() != cols)
      throw DataError(path + ": tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " but the model expects " +
                      std::to_string(tensor.value.rows()) + "x" +
                      std::to_string(tensor.value.cols()));
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) {
        float x = 0;
        in.read(reinterpret_cast<char*>(&x), sizeof(x));
        tensor.value(i, j) = static_cast<Real>(x);
      }
  }
  if (!in) throw DataError(path + ": truncated checkpoint data");
}

// Rebuilds the model a checkpoint was saved from: configuration and word
// vocabulary come from the header, weights from the data section.
template <class Real>
std::unique_ptr<DrModel<Real>> load(const std::string& path) {
  Header h = peek(path);
  RunConfig run;
  for (const auto& [key, value] : h.config) run.set(key, value);
  WordVocab vocab(h.word_vocab);
  auto model = std::make_unique<DrModel<Real>>(run.train.model_config(), std::move(vocab),
                                               /*vectors_path=*/"", /*seed=*/0);
  load_into(path, *model);
  return model;
}

}  // namespace checkpoint
}  // namespace hgdre
