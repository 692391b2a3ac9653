#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "grant/error.hpp"

namespace grant {

inline double mean_absolute_error(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw StructuralError("mae: length mismatch");
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

// Probability that a random positive outranks a random negative, ties
// counting one half. Computed from average ranks (Mann-Whitney U).
inline double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw StructuralError("roc_auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] > 0.5) {
        pos += 1.0;
        rank_sum += avg_rank;
      }
    i = j;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw NumericError("degenerate labels: ROC-AUC needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

// Step-interpolated area under the precision-recall curve: sum over distinct
// score thresholds (descending) of (recall gain) * precision. Tied scores
// enter together.
inline double average_precision(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw StructuralError("average_precision: length mismatch");
  const std::size_t n = scores.size();
  double total_pos = 0.0;
  for (double y : labels) total_pos += y > 0.5 ? 1.0 : 0.0;
  if (total_pos == 0.0) throw NumericError("degenerate labels: average precision needs a positive label");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double tp = 0.0, fp = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    double new_tp = 0.0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] > 0.5) new_tp += 1.0; else fp += 1.0;
      ++j;
    }
    tp += new_tp;
    if (new_tp > 0.0) ap += (new_tp / total_pos) * (tp / (tp + fp));
    i = j;
  }
  return ap;
}

}  // namespace grant
