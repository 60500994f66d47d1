#include "evmarl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evmarl {

double acc_at_tious(std::span<const double> tious, double threshold) {
  if (tious.empty()) throw std::invalid_argument("acc_at: no results");
  const auto hits = std::count_if(tious.begin(), tious.end(), [&](double v) { return v > threshold; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(tious.size());
}

double acc_at(std::span<const std::pair<Interval, Interval>> results, double threshold) {
  std::vector<double> tious;
  tious.reserve(results.size());
  for (const auto& [pred, gt] : results) tious.push_back(tiou(pred, gt));
  return acc_at_tious(tious, threshold);
}

OosScores oos_metrics(std::span<const std::pair<bool, bool>> decisions) {
  if (decisions.empty()) throw std::invalid_argument("oos_metrics: no decisions");
  OosScores s;
  for (const auto& [pred, label] : decisions) {
    if (pred && label) ++s.tp;
    else if (pred && !label) ++s.fp;
    else if (!pred && label) ++s.fn;
    else ++s.tn;
  }
  s.accuracy = 100.0 * (s.tp + s.tn) / static_cast<double>(decisions.size());
  const int denom = 2 * s.tp + s.fp + s.fn;
  s.f1 = denom == 0 ? 0.0 : 100.0 * 2.0 * s.tp / denom;
  return s;
}

double recall_at_k(std::span<const std::vector<std::string>> rankings, std::span<const std::string> truth,
                   int k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  if (rankings.size() != truth.size()) throw std::invalid_argument("recall_at_k: size mismatch");
  if (rankings.empty()) throw std::invalid_argument("recall_at_k: no queries");
  int hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto& r = rankings[q];
    const auto top = r.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(r.size()));
    if (std::find(r.begin(), top, truth[q]) != top) ++hits;
  }
  return 100.0 * hits / static_cast<double>(rankings.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("pearson: size mismatch");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace evmarl
