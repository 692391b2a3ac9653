#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grant/graph.hpp"

// Greedy graph selection. The teacher ranks graphs by how far the current
// model is from the target on them and trains only on the worst ones:
//   graph level: |f(G_i) - y_i|      (Euclidean norm for multi-output)
//   node level:  ||f(G_i) - y_i||_F / n_i
// GraNT(B) keeps whole minibatches with the largest mean score, GraNT(S)
// keeps the top fraction of every minibatch and repacks the survivors.
namespace grant {

enum class SelectionVariant { none, batch, sample };

inline std::string_view to_string(SelectionVariant v) {
  switch (v) {
    case SelectionVariant::none: return "none";
    case SelectionVariant::batch: return "B";
    case SelectionVariant::sample: return "S";
  }
  return "?";
}

inline SelectionVariant parse_selection_variant(std::string_view s) {
  if (s == "none") return SelectionVariant::none;
  if (s == "B" || s == "b") return SelectionVariant::batch;
  if (s == "S" || s == "s") return SelectionVariant::sample;
  throw ConfigError("unknown policy '" + std::string(s) + "' (expected none, B or S)");
}

struct SelectionPolicy {
  SelectionVariant variant = SelectionVariant::none;
  double start_ratio = 1.0;
  TargetLevel level = TargetLevel::graph;

  void validate() const {
    if (!(start_ratio > 0.0 && start_ratio <= 1.0)) throw ConfigError("start_ratio must lie in (0, 1]");
  }
};

struct CurriculumStage {
  int epoch_start = 0;  // 0-based
  int interval = 1;     // epochs between selection events inside the stage
  double ratio = 1.0;   // fraction of the pool kept at each event
};

struct CurriculumSchedule {
  std::vector<CurriculumStage> stages;
  int total_epochs = 0;

  const CurriculumStage& stage_at(int epoch) const {
    auto it = std::upper_bound(stages.begin(), stages.end(), epoch,
                               [](int e, const CurriculumStage& s) { return e < s.epoch_start; });
    return *std::prev(it);
  }

  // Selection fires at the first epoch of every stage and then every
  // `interval` epochs inside it.
  bool is_selection_epoch(int epoch) const {
    const auto& s = stage_at(epoch);
    return (epoch - s.epoch_start) % s.interval == 0;
  }

  double ratio_at(int epoch) const { return stage_at(epoch).ratio; }
};

inline constexpr int kCurriculumStages = 50;

// min(50, total_epochs) equal-length stages; the interval grows linearly
// from 1 to max_interval (rounded) and the ratio linearly from start_ratio
// to 1. max_interval <= 0 selects total_epochs / 50 (at least 1).
inline CurriculumSchedule build_schedule(double start_ratio, int total_epochs, int max_interval = 0) {
  if (!(start_ratio > 0.0 && start_ratio <= 1.0)) throw ConfigError("start_ratio must lie in (0, 1]");
  if (total_epochs < 1) throw ConfigError("schedule needs at least one epoch");
  if (max_interval <= 0) max_interval = std::max(1, total_epochs / kCurriculumStages);
  const int count = std::min(kCurriculumStages, total_epochs);
  CurriculumSchedule sched;
  sched.total_epochs = total_epochs;
  sched.stages.reserve(count);
  for (int s = 0; s < count; ++s) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(s) / (count - 1);
    CurriculumStage st;
    st.epoch_start = static_cast<int>(static_cast<long long>(s) * total_epochs / count);
    st.interval = static_cast<int>(std::lround(1.0 + (max_interval - 1) * frac));
    st.ratio = s + 1 == count && count > 1 ? 1.0 : start_ratio + (1.0 - start_ratio) * frac;
    sched.stages.push_back(st);
  }
  return sched;
}

// Per-graph residual score. outputs/targets are aligned per graph; for the
// node level node_counts[i] is n_i.
inline std::vector<double> residual_scores(std::span<const Matrix> outputs, std::span<const Matrix> targets,
                                           TargetLevel level, std::span<const Eigen::Index> node_counts = {}) {
  if (outputs.size() != targets.size()) throw StructuralError("residual_scores: outputs and targets differ in length");
  if (level == TargetLevel::node && node_counts.size() != outputs.size())
    throw StructuralError("residual_scores: node level needs one node count per graph");
  std::vector<double> scores(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i].rows() != targets[i].rows() || outputs[i].cols() != targets[i].cols())
      throw StructuralError("residual_scores: output/target shape mismatch at graph " + std::to_string(i));
    const double norm = (outputs[i] - targets[i]).norm();
    scores[i] = level == TargetLevel::node ? norm / static_cast<double>(node_counts[i]) : norm;
  }
  return scores;
}

// Indices of the m largest scores, best first; ties go to the lower index.
inline std::vector<std::size_t> select_top_m(std::span<const double> scores, std::size_t m) {
  if (m > scores.size())
    throw ConfigError("cannot select " + std::to_string(m) + " of " + std::to_string(scores.size()) + " items");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(), [&](auto a, auto b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  idx.resize(m);
  return idx;
}

// GraNT(B): the m_batches batches with the largest mean residual, returned in
// their original order.
inline std::vector<std::size_t> select_batches_B(std::span<const double> batch_scores, std::size_t m_batches) {
  auto keep = select_top_m(batch_scores, m_batches);
  std::sort(keep.begin(), keep.end());
  return keep;
}

// ceil(ratio * size), at least one. The small slack keeps products such as
// 0.4 * 5 from rounding up past the exact integer.
inline std::size_t keep_count(double ratio, std::size_t size) {
  if (size == 0) return 0;
  const double want = std::ceil(ratio * static_cast<double>(size) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(want, 0.0)), 1, size);
}

// GraNT(S): keep the top ceil(ratio |b|) graphs of every batch (scores are
// indexed by graph id), concatenate in batch order then score order, and
// repack into batches of batch_size; the last one may be short.
inline std::vector<std::vector<std::size_t>> select_graphs_S(const std::vector<std::vector<std::size_t>>& batches,
                                                             std::span<const double> scores, double ratio,
                                                             std::size_t batch_size) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("selection ratio must lie in (0, 1]");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> kept;
  for (const auto& b : batches) {
    if (b.empty()) throw StructuralError("select_graphs_S: empty batch");
    std::vector<double> local(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) local[k] = scores[b[k]];
    for (auto k : select_top_m(local, keep_count(ratio, b.size()))) kept.push_back(b[k]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t at = 0; at < kept.size(); at += batch_size)
    out.emplace_back(kept.begin() + static_cast<std::ptrdiff_t>(at),
                     kept.begin() + static_cast<std::ptrdiff_t>(std::min(kept.size(), at + batch_size)));
  return out;
}

}  // namespace grant
