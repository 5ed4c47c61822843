#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hgdre/errors.hpp"
#include "hgdre/traineval.hpp"

namespace hgdre {

// Flat key=value run configuration. Precedence: command-line overrides >
// config file > built-in defaults; the merged result is echoed into every
// output artifact so a run is reproducible from any of its files.
struct RunConfig {
  // Paths.
  std::string data_dir;        // directory holding train.json/dev.json/test.json
  std::string train_file, dev_file, test_file;
  std::string vectors;         // pretrained word vector file (may be empty)
  std::string cache_dir = "cache";
  std::string checkpoint_dir = "checkpoints";
  std::string out_dir = "runs";
  std::string backend = "rule";
  std::string output_format = "text";  // text | json
  int workers = 1;
  TrainConfig train;

  std::string split_path(Split split) const {
    switch (split) {
      case Split::kTrain:
        if (!train_file.empty()) return train_file;
        break;
      case Split::kDev:
        if (!dev_file.empty()) return dev_file;
        break;
      case Split::kTest:
        if (!test_file.empty()) return test_file;
        break;
    }
    if (data_dir.empty())
      throw DataError(std::string("no path configured for the ") + split_name(split) +
                      " split (set data_dir or " + split_name(split) + "_file)");
    return data_dir + "/" + split_name(split) + ".json";
  }

  std::map<std::string, std::string> to_map() const {
    std::map<std::string, std::string> m;
    m["data_dir"] = data_dir;
    m["train_file"] = train_file;
    m["dev_file"] = dev_file;
    m["test_file"] = test_file;
    m["vectors"] = vectors;
    m["cache_dir"] = cache_dir;
    m["checkpoint_dir"] = checkpoint_dir;
    m["out_dir"] = out_dir;
    m["backend"] = backend;
    m["output_format"] = output_format;
    m["workers"] = std::to_string(workers);
    m["learning_rate"] = std::to_string(train.learning_rate);
    m["batch_size"] = std::to_string(train.batch_size);
    m["head_count"] = std::to_string(train.head_count);
    m["epoch_budget"] = std::to_string(train.epoch_budget);
    m["patience"] = std::to_string(train.patience);
    m["seed"] = std::to_string(train.seed);
    m["schedule"] = train.schedule;
    m["no_local_lstm"] = train.no_local_lstm ? "true" : "false";
    m["no_global_lstm"] = train.no_global_lstm ? "true" : "false";
    m["no_argument_nodes"] = train.no_argument_nodes ? "true" : "false";
    m["no_pos_embedding"] = train.no_pos_embedding ? "true" : "false";
    m["no_ner_embedding"] = train.no_ner_embedding ? "true" : "false";
    m["no_pos_edge_features"] = train.no_pos_edge_features ? "true" : "false";
    m["log_f1c"] = train.log_f1c ? "true" : "false";
    return m;
  }

  void set(const std::string& key, const std::string& value) {
    auto as_bool = [&]() {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw UsageError("config key '" + key + "' expects true/false, got '" + value + "'");
    };
    try {
      if (key == "data_dir") data_dir = value;
      else if (key == "train_file") train_file = value;
      else if (key == "dev_file") dev_file = value;
      else if (key == "test_file") test_file = value;
      else if (key == "vectors") vectors = value;
      else if (key == "cache_dir") cache_dir = value;
      else if (key == "checkpoint_dir") checkpoint_dir = value;
      else if (key == "out_dir") out_dir = value;
      else if (key == "backend") backend = value;
      else if (key == "output_format") output_format = value;
      else if (key == "workers") workers = std::stoi(value);
      else if (key == "learning_rate") train.learning_rate = std::stod(value);
      else if (key == "batch_size") train.batch_size = std::stoi(value);
      else if (key == "head_count") train.head_count = std::stoi(value);
      else if (key == "epoch_budget") train.epoch_budget = std::stoi(value);
      else if (key == "patience") train.patience = std::stoi(value);
      else if (key == "seed") train.seed = std::stoull(value);
      else if (key == "schedule") train.schedule = value;
      else if (key == "no_local_lstm") train.no_local_lstm = as_bool();
      else if (key == "no_global_lstm") train.no_global_lstm = as_bool();
      else if (key == "no_argument_nodes") train.no_argument_nodes = as_bool();
      else if (key == "no_pos_embedding") train.no_pos_embedding = as_bool();
      else if (key == "no_ner_embedding") train.no_ner_embedding = as_bool();
      else if (key == "no_pos_edge_features") train.no_pos_edge_features = as_bool();
      else if (key == "log_f1c") train.log_f1c = as_bool();
      else throw UsageError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw UsageError("config key '" + key + "' has a malformed value: '" + value + "'");
    }
  }

  // Reads "key = value" lines; '#' starts a comment.
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      size_t eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos)
          throw DataError(path + ":" + std::to_string(lineno) + ": expected key = value");
        continue;
      }
      auto trim = [](std::string s) {
        size_t b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        size_t e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw DataError(path + ":" + std::to_string(lineno) + ": empty key");
      set(key, value);
    }
  }

  std::string echo() const {
    std::ostringstream out;
    for (const auto& [k, v] : to_map()) out << k << " = " << v << "\n";
    return out.str();
  }
};

}  // namespace hgdre
