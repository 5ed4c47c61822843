// Command-line front end: preprocess, stats, train, eval, predict, params and
// experiment subcommands over a flat key=value configuration.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hgdre/checkpoint.hpp"
#include "hgdre/config.hpp"
#include "hgdre/traineval.hpp"

namespace fs = std::filesystem;
using namespace hgdre;

namespace {

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;
};

RunConfig make_config(const CommonOpts& common) {
  RunConfig run;
  if (!common.config_file.empty()) run.load_file(common.config_file);
  for (const auto& kv : common.sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got: " + kv);
    run.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return run;
}

void add_common(CLI::App* cmd, CommonOpts& common) {
  cmd->add_option("--config", common.config_file, "flat key = value config file");
  cmd->add_option("--set", common.sets, "override a config key, e.g. --set seed=7")
      ->take_all();
}

std::string run_directory(const RunConfig& run) {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream name;
  name << std::put_time(&tm, "%Y%m%d-%H%M%S") << "-seed" << run.train.seed;
  fs::path dir = fs::path(run.out_dir) / name.str();
  fs::create_directories(dir);
  std::ofstream cfg(dir / "config.txt");
  cfg << run.echo();
  return dir.string();
}

void require_file(const std::string& path, const std::string& field) {
  if (!fs::exists(path))
    throw DataError("path for '" + field + "' does not exist: " + path);
}

std::string cache_path(const RunConfig& run, Split split, const Annotator& backend) {
  return run.cache_dir + "/" + split_name(split) + "." + backend.name() + "-" +
         backend.version() + ".lpj";
}

std::vector<Dialogue> load_split(const RunConfig& run, Split split) {
  std::string path = run.split_path(split);
  require_file(path, std::string(split_name(split)) + " corpus");
  return load_corpus(path, split);
}

PreparedCorpus prepare_split(const RunConfig& run, const std::vector<Dialogue>& dialogues,
                             Split split, const Annotator& backend,
                             const GraphOptions& options) {
  std::string cache = cache_path(run, split, backend);
  if (fs::exists(cache)) {
    auto cached = read_annotation_cache(cache, backend);
    if (cached.size() == dialogues.size())
      return prepare_corpus(dialogues, backend, options, &cached);
    std::cerr << "cache " << cache << " has " << cached.size() << " records for "
              << dialogues.size() << " dialogues; re-annotating\n";
  }
  return prepare_corpus(dialogues, backend, options);
}

// ---------------------------------------------------------------------------

int cmd_stats(const RunConfig& run, const std::string& split_arg, bool labels, bool as_json) {
  std::vector<Split> splits;
  if (split_arg == "all")
    splits = {Split::kTrain, Split::kDev, Split::kTest};
  else
    splits = {split_from_name(split_arg)};

  std::vector<StatsReport> reports;
  std::vector<LabelDistribution> dists;
  for (Split s : splits) {
    auto dialogues = load_split(run, s);
    reports.push_back(corpus_stats(dialogues));
    dists.push_back(label_distribution(dialogues));
  }

  const auto& vocab = RelationVocabulary::instance();
  if (as_json) {
    nlohmann::json j;
    j["config"] = run.to_map();
    for (size_t i = 0; i < splits.size(); ++i) {
      nlohmann::json s;
      s["conversations"] = reports[i].conversations;
      s["argument_pairs"] = reports[i].argument_pairs;
      s["avg_dialogue_length"] = reports[i].mean_tokens;
      s["avg_turns"] = reports[i].mean_turns;
      s["avg_speakers"] = reports[i].mean_speakers;
      if (labels) {
        nlohmann::json lab = nlohmann::json::object();
        for (int id = 0; id < vocab.size(); ++id)
          lab[vocab.name(id)] = {{"count", dists[i].counts[static_cast<size_t>(id)]},
                                 {"percent", dists[i].percentage(id)}};
        s["labels"] = std::move(lab);
      }
      j[split_name(splits[i])] = std::move(s);
    }
    std::cout << j.dump(2) << "\n";
    return 0;
  }

  std::printf("%-24s", "DialogRE");
  for (Split s : splits) std::printf("%12s", split_name(s));
  std::printf("\n");
  auto row_l = [&](const char* name, auto get) {
    std::printf("%-24s", name);
    for (size_t i = 0; i < splits.size(); ++i) std::printf("%12ld", get(reports[i]));
    std::printf("\n");
  };
  auto row_d = [&](const char* name, auto get) {
    std::printf("%-24s", name);
    for (size_t i = 0; i < splits.size(); ++i) std::printf("%12.1f", get(reports[i]));
    std::printf("\n");
  };
  row_l("conversations", [](const StatsReport& r) { return r.conversations; });
  row_l("argument pairs", [](const StatsReport& r) { return r.argument_pairs; });
  row_d("avg dialogue length", [](const StatsReport& r) { return r.mean_tokens; });
  row_d("avg turns", [](const StatsReport& r) { return r.mean_turns; });
  row_d("avg speakers", [](const StatsReport& r) { return r.mean_speakers; });

  if (labels) {
    std::printf("\n%-28s", "relation type");
    for (Split s : splits) std::printf("%20s", split_name(s));
    std::printf("\n");
    for (int id = 0; id < vocab.size(); ++id) {
      std::printf("%-28s", vocab.name(id).c_str());
      for (size_t i = 0; i < splits.size(); ++i) {
        std::ostringstream cell;
        cell << dists[i].counts[static_cast<size_t>(id)] << " (" << std::fixed
             << std::setprecision(2) << dists[i].percentage(id) << "%)";
        std::printf("%20s", cell.str().c_str());
      }
      std::printf("\n");
    }
  }
  return 0;
}

int cmd_preprocess(const RunConfig& run, const std::string& split_arg) {
  std::vector<Split> splits;
  if (split_arg == "all")
    splits = {Split::kTrain, Split::kDev, Split::kTest};
  else
    splits = {split_from_name(split_arg)};
  auto backend = make_annotator(run.backend, run.cache_dir);
  fs::create_directories(run.cache_dir);
  for (Split s : splits) {
    auto dialogues = load_split(run, s);
    std::vector<std::vector<AnnotatedUtterance>> records(dialogues.size());
    if (run.workers > 1 && backend->shareable()) {
      std::vector<std::future<void>> tasks;
      std::atomic<size_t> next{0};
      for (int w = 0; w < run.workers; ++w)
        tasks.push_back(std::async(std::launch::async, [&]() {
          for (size_t i = next.fetch_add(1); i < dialogues.size(); i = next.fetch_add(1))
            records[i] = annotate_dialogue(dialogues[i], *backend);
        }));
      for (auto& t : tasks) t.get();
    } else {
      for (size_t i = 0; i < dialogues.size(); ++i)
        records[i] = annotate_dialogue(dialogues[i], *backend);
    }
    std::string out = cache_path(run, s, *backend);
    write_annotation_cache(out, *backend, records);
    std::cout << split_name(s) << ": " << records.size() << " dialogues -> " << out << "\n";
  }
  return 0;
}

void write_eval_report(std::ostream& out, const RunConfig& run, const EvalReport& report,
                       const std::string& setting, bool as_json) {
  const auto& vocab = RelationVocabulary::instance();
  if (as_json) {
    nlohmann::json j;
    j["config"] = run.to_map();
    j["split"] = report.split;
    j["setting"] = setting;
    j["macro_f1"] =
        setting == "conversational" ? report.f1_conversational : report.f1_standard;
    j["instances"] = report.instances;
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [id, f1] : report.per_label_f1) per[vocab.name(id)] = f1;
    j["per_label_f1"] = std::move(per);
    out << j.dump(2) << "\n";
    return;
  }
  out << "# effective config\n" << run.echo() << "#\n";
  out << "split              " << report.split << "\n";
  out << "setting            " << setting << "\n";
  out << std::fixed << std::setprecision(4);
  out << "macro_f1           "
      << (setting == "conversational" ? report.f1_conversational : report.f1_standard) << "\n";
  out << "instances          " << report.instances << "\n";
  out << "per-label F1:\n";
  for (const auto& [id, f1] : report.per_label_f1)
    out << "  " << std::left << std::setw(28) << vocab.name(id) << std::right << std::setw(8)
        << std::setprecision(4) << f1 << "\n";
}

int cmd_train(const RunConfig& run) {
  auto backend = make_annotator(run.backend, run.cache_dir);
  GraphOptions gopts = run.train.model_config().graph_options();
  auto train_dialogues = load_split(run, Split::kTrain);
  auto dev_dialogues = load_split(run, Split::kDev);
  if (!run.vectors.empty()) require_file(run.vectors, "vectors");

  std::string dir = run_directory(run);
  std::cout << "run directory: " << dir << "\n";

  PreparedCorpus train_corpus = prepare_split(run, train_dialogues, Split::kTrain, *backend, gopts);
  PreparedCorpus dev_corpus = prepare_split(run, dev_dialogues, Split::kDev, *backend, gopts);

  std::vector<std::vector<AnnotatedUtterance>> annotated;
  for (const auto& d : train_corpus.dialogues) annotated.push_back(d.annotated);
  for (const auto& d : dev_corpus.dialogues) annotated.push_back(d.annotated);
  WordVocab vocab = WordVocab::build(annotated);

  DrModel<float> model(run.train.model_config(), std::move(vocab), run.vectors, run.train.seed);
  std::cout << "trainable parameters: " << model.trainable_parameters() << "\n";

  std::ofstream log(fs::path(dir) / "train_log.jsonl");
  TrainOutcome outcome =
      train_model(model, train_corpus, dev_corpus, run.train, &log, backend.get());

  fs::create_directories(run.checkpoint_dir);
  std::string ckpt = (fs::path(run.checkpoint_dir) / "best.ckpt").string();
  checkpoint::save(ckpt, model, run.to_map(), backend->name(), backend->version());

  EvalReport dev_std = evaluate_standard(model, dev_corpus, "dev", run.workers);
  EvalReport dev_conv =
      evaluate_conversational(model, dev_corpus, *backend, "dev", run.workers);
  {
    std::ofstream rep(fs::path(dir) / "dev_standard.txt");
    write_eval_report(rep, run, dev_std, "standard", false);
    std::ofstream repc(fs::path(dir) / "dev_conversational.txt");
    write_eval_report(repc, run, dev_conv, "conversational", false);
  }
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "best dev F1 " << outcome.best_dev_f1 << " at epoch " << outcome.best_epoch
            << " (" << outcome.epochs_run << " epochs run)\n";
  std::cout << "dev F1  (standard)       " << dev_std.f1_standard << "\n";
  std::cout << "dev F1c (conversational) " << dev_conv.f1_conversational << "\n";
  std::cout << "checkpoint: " << ckpt << "\n";
  return 0;
}

int cmd_eval(const RunConfig& run, const std::string& ckpt, const std::string& split_arg,
             const std::string& setting) {
  require_file(ckpt, "checkpoint");
  if (setting != "standard" && setting != "conversational")
    throw UsageError("--setting must be standard or conversational");
  Split split = split_from_name(split_arg);
  auto header = checkpoint::peek(ckpt);
  auto model = checkpoint::load<float>(ckpt);
  auto backend = make_annotator(run.backend, run.cache_dir);
  auto dialogues = load_split(run, split);
  PreparedCorpus corpus =
      prepare_split(run, dialogues, split, *backend, model->config().graph_options());

  EvalReport report;
  if (setting == "standard")
    report = evaluate_standard(*model, corpus, split_name(split), run.workers);
  else
    report = evaluate_conversational(*model, corpus, *backend, split_name(split), run.workers);

  std::string dir = run_directory(run);
  std::ofstream rep(fs::path(dir) / ("eval_" + std::string(split_name(split)) + "_" + setting +
                                     (run.output_format == "json" ? ".json" : ".txt")));
  write_eval_report(rep, run, report, setting, run.output_format == "json");
  write_eval_report(std::cout, run, report, setting, run.output_format == "json");
  return 0;
}

int cmd_predict(const RunConfig& run, const std::string& ckpt, const std::string& dialogue_file,
                const std::string& subject, const std::string& object,
                const std::string& subject_type, const std::string& object_type,
                const std::string& graph_dump) {
  require_file(ckpt, "checkpoint");
  require_file(dialogue_file, "dialogue");

  std::ifstream in(dialogue_file);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dialogue_file + ": JSON parse failure: " + e.what());
  }
  Dialogue dialogue;
  if (root.is_array() && !root.empty() && root[0].is_string()) {
    int index = 0;
    for (const auto& t : root)
      dialogue.utterances.push_back(
          detail::parse_turn(t.get<std::string>(), index++, dialogue_file));
  } else {
    auto dialogues = parse_corpus_json(root, Split::kTest, dialogue_file);
    if (dialogues.empty()) throw DataError(dialogue_file + ": no dialogues");
    dialogue = dialogues[0];
  }

  RelationInstance instance;
  instance.subject_text = subject;
  instance.object_text = object;
  instance.subject_type = subject_type;
  instance.object_type = object_type;

  auto model = checkpoint::load<float>(ckpt);
  auto backend = make_annotator(run.backend, run.cache_dir);
  auto annotated = annotate_dialogue(dialogue, *backend);
  SpeakerMap speakers = resolve_speakers(dialogue);

  if (!graph_dump.empty()) {
    ArgumentMentions mentions = locate_arguments(annotated, instance, speakers, *backend);
    HeteroGraph graph = build_graph(annotated, mentions, speakers, instance,
                                    model->config().graph_options());
    std::ofstream out(graph_dump);
    out << graph_to_json(graph).dump(2) << "\n";
    std::cout << "graph dumped to " << graph_dump << "\n";
  }

  Prediction pred = model->predict(annotated, speakers, instance, *backend);
  const auto& vocab = RelationVocabulary::instance();
  std::vector<int> order(static_cast<size_t>(vocab.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return pred.probabilities[static_cast<size_t>(a)] > pred.probabilities[static_cast<size_t>(b)];
  });
  std::cout << "subject: " << subject << "\nobject:  " << object << "\n";
  std::cout << std::fixed << std::setprecision(4);
  for (int id : order) {
    bool chosen = pred.predicted_labels.count(id) != 0;
    std::cout << (chosen ? "* " : "  ") << std::left << std::setw(28) << vocab.name(id)
              << std::right << pred.probabilities[static_cast<size_t>(id)] << "\n";
  }
  return 0;
}

int cmd_params(const RunConfig& run) {
  WordVocab vocab({"placeholder"});
  DrModel<float> model(run.train.model_config(), std::move(vocab), "", run.train.seed);
  std::printf("%-16s %12s\n", "module", "parameters");
  for (const auto& [group, n] : model.parameter_breakdown())
    std::printf("%-16s %12ld\n", group.c_str(), n);
  std::printf("%-16s %12ld\n", "total trainable", model.trainable_parameters());
  std::printf("%-16s %12ld  (pretrained word table, |V| x %d)\n", "frozen",
              model.frozen_parameters(), run.train.model_config().embed.word_dim);
  return 0;
}

int cmd_experiment(const RunConfig& run, const std::string& matrix_file) {
  require_file(matrix_file, "matrix");
  std::ifstream in(matrix_file);
  nlohmann::json rows_json;
  try {
    in >> rows_json;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(matrix_file + ": JSON parse failure: " + e.what());
  }
  std::vector<ExperimentRow> rows;
  if (!rows_json.is_array() || rows_json.empty())
    throw DataError(matrix_file + ": expected a non-empty JSON list of rows");
  for (const auto& r : rows_json) {
    ExperimentRow row;
    row.name = r.value("name", "row" + std::to_string(rows.size()));
    RunConfig scratch = run;
    if (r.contains("set"))
      for (auto it = r["set"].begin(); it != r["set"].end(); ++it)
        scratch.set(it.key(), it.value().is_string() ? it.value().get<std::string>()
                                                     : it.value().dump());
    row.config = scratch.train;
    rows.push_back(std::move(row));
  }

  auto backend = make_annotator(run.backend, run.cache_dir);
  auto train_dialogues = load_split(run, Split::kTrain);
  auto dev_dialogues = load_split(run, Split::kDev);
  auto test_dialogues = load_split(run, Split::kTest);

  std::string dir = run_directory(run);
  std::vector<ExperimentResult> results;
  for (const auto& row : rows) {
    ExperimentResult result;
    result.name = row.name;
    try {
      GraphOptions gopts = row.config.model_config().graph_options();
      PreparedCorpus train_corpus =
          prepare_split(run, train_dialogues, Split::kTrain, *backend, gopts);
      PreparedCorpus dev_corpus = prepare_split(run, dev_dialogues, Split::kDev, *backend, gopts);
      PreparedCorpus test_corpus =
          prepare_split(run, test_dialogues, Split::kTest, *backend, gopts);
      std::vector<std::vector<AnnotatedUtterance>> annotated;
      for (const auto& d : train_corpus.dialogues) annotated.push_back(d.annotated);
      for (const auto& d : dev_corpus.dialogues) annotated.push_back(d.annotated);
      WordVocab vocab = WordVocab::build(annotated);
      DrModel<float> model(row.config.model_config(), std::move(vocab), run.vectors,
                           row.config.seed);
      std::ofstream log(fs::path(dir) / (row.name + ".train_log.jsonl"));
      train_model(model, train_corpus, dev_corpus, row.config, &log, backend.get());
      result.dev_f1 = evaluate_standard(model, dev_corpus, "dev", run.workers).f1_standard;
      result.dev_f1c = evaluate_conversational(model, dev_corpus, *backend, "dev", run.workers)
                           .f1_conversational;
      result.test_f1 = evaluate_standard(model, test_corpus, "test", run.workers).f1_standard;
      result.test_f1c =
          evaluate_conversational(model, test_corpus, *backend, "test", run.workers)
              .f1_conversational;
      result.ok = true;
    } catch (const std::exception& e) {
      result.error = e.what();
    }
    results.push_back(result);
    std::cerr << "row '" << result.name << "' "
              << (result.ok ? "done" : std::string("failed: ") + result.error) << "\n";
  }

  std::ostringstream tsv, text;
  tsv << "name\tdev_f1\tdev_f1c\ttest_f1\ttest_f1c\terror\n";
  text << std::left << std::setw(24) << "strategy" << std::right << std::setw(9) << "dev F1"
       << std::setw(9) << "dev F1c" << std::setw(9) << "test F1" << std::setw(10) << "test F1c"
       << "\n";
  for (const auto& r : results) {
    tsv << r.name << "\t" << r.dev_f1 << "\t" << r.dev_f1c << "\t" << r.test_f1 << "\t"
        << r.test_f1c << "\t" << r.error << "\n";
    text << std::left << std::setw(24) << r.name;
    if (r.ok) {
      text << std::right << std::fixed << std::setprecision(4) << std::setw(9) << r.dev_f1
           << std::setw(9) << r.dev_f1c << std::setw(9) << r.test_f1 << std::setw(10)
           << r.test_f1c << "\n";
    } else {
      text << "  FAILED: " << r.error << "\n";
    }
  }
  std::ofstream(fs::path(dir) / "experiment.tsv") << tsv.str();
  std::ofstream(fs::path(dir) / "experiment.txt") << "# effective config\n"
                                                  << run.echo() << "#\n"
                                                  << text.str();
  std::cout << text.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-based heterogeneous graph network for dialogue relation extraction"};
  app.require_subcommand(1);

  CommonOpts stats_common, preprocess_common, train_common, eval_common, predict_common,
      params_common, experiment_common;

  auto* stats = app.add_subcommand("stats", "corpus statistics and label distribution");
  std::string stats_split = "all";
  bool stats_labels = false, stats_json = false;
  stats->add_option("--split", stats_split, "train|dev|test|all");
  stats->add_flag("--labels", stats_labels, "per-label counts and percentages");
  stats->add_flag("--json", stats_json, "emit JSON instead of aligned text");
  add_common(stats, stats_common);

  auto* preprocess = app.add_subcommand("preprocess", "annotate a split and write the cache");
  std::string preprocess_split = "all";
  preprocess->add_option("--split", preprocess_split, "train|dev|test|all");
  add_common(preprocess, preprocess_common);

  auto* train = app.add_subcommand("train", "train a model and keep the best-dev checkpoint");
  add_common(train, train_common);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string eval_ckpt, eval_split = "dev", eval_setting = "standard";
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--split", eval_split, "dev|test|train");
  eval->add_option("--setting", eval_setting, "standard|conversational");
  add_common(eval, eval_common);

  auto* predict = app.add_subcommand("predict", "rank relation labels for one argument pair");
  std::string p_ckpt, p_dialogue, p_subject, p_object, p_stype = "PER", p_otype = "PER",
                       p_graph_dump;
  predict->add_option("--checkpoint", p_ckpt, "checkpoint file")->required();
  predict->add_option("--dialogue", p_dialogue, "dialogue JSON file")->required();
  predict->add_option("--subject", p_subject, "subject argument string")->required();
  predict->add_option("--object", p_object, "object argument string")->required();
  predict->add_option("--subject-type", p_stype, "coarse subject type (PER/GPE/ORG/STRING/VALUE)");
  predict->add_option("--object-type", p_otype, "coarse object type");
  predict->add_option("--graph-dump", p_graph_dump, "write the constructed graph as JSON");
  add_common(predict, predict_common);

  auto* params = app.add_subcommand("params", "report trainable parameter counts");
  add_common(params, params_common);

  auto* experiment = app.add_subcommand("experiment", "run an ablation / meta-path matrix");
  std::string matrix_file;
  experiment->add_option("--matrix", matrix_file, "JSON matrix file")->required();
  add_common(experiment, experiment_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (stats->parsed()) return cmd_stats(make_config(stats_common), stats_split, stats_labels, stats_json);
    if (preprocess->parsed()) return cmd_preprocess(make_config(preprocess_common), preprocess_split);
    if (train->parsed()) return cmd_train(make_config(train_common));
    if (eval->parsed())
      return cmd_eval(make_config(eval_common), eval_ckpt, eval_split, eval_setting);
    if (predict->parsed())
      return cmd_predict(make_config(predict_common), p_ckpt, p_dialogue, p_subject, p_object,
                         p_stype, p_otype, p_graph_dump);
    if (params->parsed()) return cmd_params(make_config(params_common));
    if (experiment->parsed()) return cmd_experiment(make_config(experiment_common), matrix_file);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
