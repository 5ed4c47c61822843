#pragma once

#include <map>
#include <set>
#include <vector>

#include "hgdre/errors.hpp"

namespace hgdre {

// One scored instance: the predicted label set against the gold set.
struct PairScore {
  std::set<int> predicted;
  std::set<int> gold;
};

struct F1Report {
  double macro_f1 = 0.0;
  std::map<int, double> per_label;  // labels present in gold only
  long instances = 0;
};

// Macro F1: unweighted mean over relation labels of per-label F1, where a
// (pair, label) prediction is a true positive iff the label is in the gold
// set. Labels absent from the gold of the evaluated instances are excluded
// from the average (so dev-only labels do not zero out train-split checks).
inline F1Report macro_f1(const std::vector<PairScore>& scores, int label_count) {
  F1Report report;
  report.instances = static_cast<long>(scores.size());
  std::vector<long> tp(static_cast<size_t>(label_count), 0);
  std::vector<long> fp(static_cast<size_t>(label_count), 0);
  std::vector<long> fn(static_cast<size_t>(label_count), 0);
  std::vector<bool> in_gold(static_cast<size_t>(label_count), false);
  for (const auto& s : scores) {
    for (int label : s.gold) {
      in_gold[static_cast<size_t>(label)] = true;
      if (s.predicted.count(label)) tp[static_cast<size_t>(label)] += 1;
      else fn[static_cast<size_t>(label)] += 1;
    }
    for (int label : s.predicted)
      if (!s.gold.count(label)) fp[static_cast<size_t>(label)] += 1;
  }
  double sum = 0.0;
  int denom = 0;
  for (int label = 0; label < label_count; ++label) {
    if (!in_gold[static_cast<size_t>(label)]) continue;
    const double t = static_cast<double>(tp[static_cast<size_t>(label)]);
    const double p_den = t + static_cast<double>(fp[static_cast<size_t>(label)]);
    const double r_den = t + static_cast<double>(fn[static_cast<size_t>(label)]);
    const double precision = p_den > 0 ? t / p_den : 0.0;
    const double recall = r_den > 0 ? t / r_den : 0.0;
    const double f1 =
        (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    report.per_label[label] = f1;
    sum += f1;
    ++denom;
  }
  report.macro_f1 = denom > 0 ? sum / static_cast<double>(denom) : 0.0;
  return report;
}

}  // namespace hgdre
