#pragma once

// Evaluation metrics. Every percentage is in [0, 100].

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evmarl/core.hpp"

namespace evmarl {

/// Percentage of predictions whose tIoU with ground truth is strictly larger
/// than threshold. Throws on an empty list.
double acc_at(std::span<const std::pair<Interval, Interval>> results, double threshold);

/// Same, from precomputed tIoU values.
double acc_at_tious(std::span<const double> tious, double threshold);

struct OosScores {
  double accuracy = 0.0;
  double f1 = 0.0;
  int tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Pairs of (predicted OOS, labelled OOS); OOS is the positive class.
OosScores oos_metrics(std::span<const std::pair<bool, bool>> decisions);

/// Percentage of queries whose true id is in the top k of its ranking.
double recall_at_k(std::span<const std::vector<std::string>> rankings, std::span<const std::string> truth,
                   int k);

/// Pearson correlation; 0 when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct MetricsRow {
  double acc50 = 0.0;
  double acc70 = 0.0;
  double oos_accuracy = 0.0;
  double oos_f1 = 0.0;
  std::map<int, double> r_at;
};

}  // namespace evmarl
