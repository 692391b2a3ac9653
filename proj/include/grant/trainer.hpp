#pragma once

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "grant/flexgcn.hpp"
#include "grant/gntk.hpp"
#include "grant/metrics.hpp"
#include "grant/teaching.hpp"

namespace grant {

struct PlateauConfig {
  bool enabled = false;
  double factor = 0.5;
  int patience = 10;
  double min_lr = 1e-6;
};

struct TrainerConfig {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  int epochs = 100;
  double stop_epsilon = 0.0;
  LossKind loss = LossKind::mse;
  PlateauConfig plateau;
  bool restart_on_selection = true;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  int max_interval = 0;  // 0: total_epochs / 50

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (stop_epsilon < 0.0) throw ConfigError("stop_epsilon must be nonnegative");
    if (!(plateau.factor > 0.0 && plateau.factor < 1.0)) throw ConfigError("plateau factor must lie in (0, 1)");
    if (plateau.patience < 1) throw ConfigError("plateau patience must be >= 1");
    if (plateau.min_lr < 0.0) throw ConfigError("plateau min_lr must be nonnegative");
  }
};

// theta <- theta - lr * grad.
inline Vector sgd_step(const Vector& theta, const Vector& grad, double lr) {
  if (theta.size() != grad.size())
    throw StructuralError("sgd_step: gradient has " + std::to_string(grad.size()) + " entries, parameters have " +
                          std::to_string(theta.size()));
  return theta - lr * grad;
}

inline GcnParams sgd_step(const LayerSpec& spec, const GcnParams& params, const Vector& grad, double lr) {
  return GcnParams::unflatten(spec, sgd_step(params.flatten(), grad, lr));
}

// Reduce-on-plateau: after `patience` consecutive evaluations without an
// improvement of at least 1e-8, lr <- max(lr * factor, min_lr).
class PlateauScheduler {
 public:
  PlateauScheduler(PlateauConfig cfg, double initial_lr) : cfg_(cfg), initial_lr_(initial_lr), lr_(initial_lr) {}

  double lr() const { return lr_; }

  double step(double val_loss) {
    if (!cfg_.enabled) return lr_;
    if (val_loss < best_ - 1e-8) {
      best_ = val_loss;
      stale_ = 0;
    } else if (++stale_ >= cfg_.patience) {
      lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
      stale_ = 0;
    }
    return lr_;
  }

  // Back to the initial rate with a fresh patience window.
  void restart() {
    lr_ = initial_lr_;
    best_ = std::numeric_limits<double>::infinity();
    stale_ = 0;
  }

 private:
  PlateauConfig cfg_;
  double initial_lr_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double wallclock_ms = 0.0;
  std::size_t train_evals = 0;    // cumulative graphs passed through forward+backward
  std::size_t forward_evals = 0;  // cumulative forward-only scoring evaluations
  double train_loss = 0.0;
  double val_loss = 0.0;
  double metric = 0.0;
  double lr = 0.0;
  bool selection_event = false;

  // Forward-only passes weigh one third of a training step.
  double graphs_processed() const { return static_cast<double>(train_evals) + static_cast<double>(forward_evals) / 3.0; }
};

struct SelectionEvent {
  int epoch = 0;
  SelectionVariant variant = SelectionVariant::none;
  double ratio = 1.0;
  std::size_t selected_count = 0;
  double score_min = 0.0;
  double score_max = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::vector<SelectionEvent> selections;
  std::string metric_name;
  double initial_train_loss = 0.0;
  bool stopped_early = false;
};

struct TrainResult {
  GcnParams params;
  TrainingLog log;
};

// Everything the trainer needs from one pass over a dataset.
struct PoolEval {
  std::vector<Matrix> outputs;
  double loss = 0.0;
  double residual_norm = 0.0;  // || [f(G_i) - y_i]_N ||_2 over observed labels
};

// Output with classification logits mapped through the sigmoid and masked
// entries replaced by their targets, so residuals only see observed labels.
inline Matrix effective_output(const Matrix& out, const Target& t, LossKind loss) {
  Matrix e = loss == LossKind::bce_with_logits ? Matrix(out.unaryExpr([](double z) { return sigmoid(z); })) : out;
  if (t.mask) e = (t.mask->array() != 0.0).select(e, t.values);
  return e;
}

inline PoolEval evaluate_pool(const GcnParams& params, const LayerSpec& spec, const Dataset& ds, LossKind loss) {
  PoolEval pe;
  pe.outputs = predict(params, spec, ds.graphs);
  double sq = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Target& t = ds[i].target();
    pe.loss += graph_loss(pe.outputs[i], t, loss).value;
    sq += (effective_output(pe.outputs[i], t, loss) - t.values).squaredNorm();
  }
  if (!ds.empty()) pe.loss /= static_cast<double>(ds.size());
  pe.residual_norm = std::sqrt(sq);
  return pe;
}

inline std::vector<double> selection_scores(const PoolEval& pe, const Dataset& ds, LossKind loss) {
  std::vector<Matrix> eff(ds.size()), targets(ds.size());
  std::vector<Eigen::Index> counts(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    eff[i] = effective_output(pe.outputs[i], ds[i].target(), loss);
    targets[i] = ds[i].target().values;
    counts[i] = ds[i].n();
  }
  const TargetLevel level = is_node_level(ds.task) ? TargetLevel::node : TargetLevel::graph;
  return residual_scores(eff, targets, level, counts);
}

struct MetricReport {
  double loss = 0.0;
  std::optional<double> mae;
  std::optional<double> roc_auc;
  std::optional<double> average_precision;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["loss"] = loss;
    if (mae) j["mae"] = *mae;
    if (roc_auc) j["roc_auc"] = *roc_auc;
    if (average_precision) j["ap"] = *average_precision;
    return j;
  }
};

// Observed (prediction, label) pairs pooled over graphs and nodes.
inline void pooled_pairs(const std::vector<Matrix>& outputs, const Dataset& ds, std::vector<double>& pred,
                         std::vector<double>& label) {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Target& t = ds[i].target();
    for (Eigen::Index r = 0; r < t.values.rows(); ++r)
      for (Eigen::Index c = 0; c < t.values.cols(); ++c) {
        if (t.mask && (*t.mask)(r, c) == 0.0) continue;
        pred.push_back(outputs[i](r, c));
        label.push_back(t.values(r, c));
      }
  }
}

// Regression reports {loss, mae}; classification reports {loss, roc_auc, ap}
// and throws NumericError when a class is missing.
inline MetricReport evaluate(const GcnParams& params, const LayerSpec& spec, const Dataset& ds, LossKind loss) {
  if (is_classification(ds.task) != (loss == LossKind::bce_with_logits))
    throw ConfigError("loss " + std::string(to_string(loss)) + " does not fit task " + std::string(to_string(ds.task)));
  auto pe = evaluate_pool(params, spec, ds, loss);
  MetricReport rep;
  rep.loss = pe.loss;
  std::vector<double> pred, label;
  pooled_pairs(pe.outputs, ds, pred, label);
  if (loss == LossKind::mse) {
    rep.mae = mean_absolute_error(pred, label);
  } else {
    rep.roc_auc = roc_auc(pred, label);
    rep.average_precision = average_precision(pred, label);
  }
  return rep;
}

inline LossKind default_loss(TaskKind task) {
  return is_classification(task) ? LossKind::bce_with_logits : LossKind::mse;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t at = 0; at < order.size(); at += size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), at + size)));
  return out;
}

// Headline metric for the per-epoch log: MAE for regression, ROC-AUC for
// classification (NaN when undefined).
inline double headline_metric(const PoolEval& pe, const Dataset& ds, LossKind loss) {
  if (ds.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> pred, label;
  pooled_pairs(pe.outputs, ds, pred, label);
  if (loss == LossKind::mse) return mean_absolute_error(pred, label);
  try {
    return roc_auc(pred, label);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochRecord&, const GcnParams&)>;

// Minibatch gradient descent with optional greedy selection.
//
// Every epoch the active pool is shuffled and cut into batches. On selection
// epochs (per the curriculum) the whole training set is scored with a
// forward pass, counted in forward_evals, and the active pool is replaced by
// the GraNT(B) or GraNT(S) choice; the learning rate restarts if configured.
// Training stops after config.epochs epochs or once the training residual
// norm drops below stop_epsilon. A non-finite training loss raises NumericError.
inline TrainResult train(const TrainerConfig& config, const LayerSpec& spec, GcnParams params, const Dataset& train_ds,
                         const Dataset& val_ds, const SelectionPolicy& policy, const EpochCallback& on_epoch = {}) {
  config.validate();
  policy.validate();
  spec.validate();
  if (!params.matches(spec)) throw ConfigError("initial parameters do not match the layer spec");
  if (train_ds.empty() && config.epochs > 0) throw ConfigError("training set is empty");
  if (!train_ds.empty()) {
    if (train_ds.d != spec.input_dim()) throw ConfigError("model input width differs from dataset feature dimension");
    if (train_ds.c != spec.output_dim()) throw ConfigError("model output width differs from target dimension");
    if (is_node_level(train_ds.task) != (spec.pooling == Pooling::none))
      throw ConfigError("pooling does not match task level (node-level tasks need pooling=none)");
    if (is_classification(train_ds.task) != (config.loss == LossKind::bce_with_logits))
      throw ConfigError("loss " + std::string(to_string(config.loss)) + " does not fit task " +
                        std::string(to_string(train_ds.task)));
  }
  if (!val_ds.empty() && (val_ds.task != train_ds.task || val_ds.d != train_ds.d || val_ds.c != train_ds.c))
    throw ConfigError("validation set is incompatible with the training set");

  TrainResult result;
  TrainingLog& log = result.log;
  log.metric_name = config.loss == LossKind::mse ? "mae" : "roc_auc";
  if (config.epochs == 0) {
    result.params = std::move(params);
    return result;
  }

  const bool teaching = policy.variant != SelectionVariant::none;
  std::optional<CurriculumSchedule> schedule;
  if (teaching) schedule = build_schedule(policy.start_ratio, config.epochs, config.max_interval);

  std::mt19937_64 rng(config.seed);
  PlateauScheduler plateau(config.plateau, config.lr);
  double lr = config.lr;
  const std::size_t n_train = train_ds.size();
  std::vector<std::size_t> active(n_train);
  std::iota(active.begin(), active.end(), std::size_t{0});

  std::size_t train_evals = 0, forward_evals = 0;
  PoolEval train_eval = evaluate_pool(params, spec, train_ds, config.loss);
  log.initial_train_loss = train_eval.loss;
  const auto t_start = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (train_eval.residual_norm < config.stop_epsilon) {
      log.stopped_early = true;
      break;
    }
    std::vector<std::vector<std::size_t>> batches;
    const bool select = teaching && schedule->is_selection_epoch(epoch);
    if (select) {
      if (config.restart_on_selection) {
        plateau.restart();
        lr = plateau.lr();
      }
      // train_eval holds the outputs of the current parameters.
      forward_evals += n_train;
      const auto scores = selection_scores(train_eval, train_ds, config.loss);
      std::vector<std::size_t> order(n_train);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      auto candidates = detail::chunk(order, config.batch_size);
      const double ratio = schedule->ratio_at(epoch);
      if (policy.variant == SelectionVariant::batch) {
        std::vector<double> means(candidates.size());
        for (std::size_t b = 0; b < candidates.size(); ++b) {
          double s = 0.0;
          for (auto i : candidates[b]) s += scores[i];
          means[b] = s / static_cast<double>(candidates[b].size());
        }
        for (auto b : select_batches_B(means, keep_count(ratio, candidates.size())))
          batches.push_back(std::move(candidates[b]));
      } else {
        batches = select_graphs_S(candidates, scores, ratio, config.batch_size);
      }
      active.clear();
      for (const auto& b : batches) active.insert(active.end(), b.begin(), b.end());
      SelectionEvent ev{epoch, policy.variant, ratio, active.size(), std::numeric_limits<double>::infinity(),
                        -std::numeric_limits<double>::infinity()};
      for (auto i : active) {
        ev.score_min = std::min(ev.score_min, scores[i]);
        ev.score_max = std::max(ev.score_max, scores[i]);
      }
      log.selections.push_back(ev);
    } else {
      std::shuffle(active.begin(), active.end(), rng);
      batches = detail::chunk(active, config.batch_size);
    }

    std::vector<GraphPtr> batch;
    for (const auto& b : batches) {
      batch.clear();
      for (auto i : b) batch.push_back(train_ds.graphs[i]);
      const auto lg = loss_grad(params, spec, batch, config.loss);
      params = sgd_step(spec, params, lg.grad, lr);
      train_evals += batch.size();
    }

    train_eval = evaluate_pool(params, spec, train_ds, config.loss);
    if (!std::isfinite(train_eval.loss))
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + " (non-finite training loss)");
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_evals = train_evals;
    rec.forward_evals = forward_evals;
    rec.train_loss = train_eval.loss;
    rec.lr = lr;
    rec.selection_event = select;
    if (!val_ds.empty()) {
      const auto ve = evaluate_pool(params, spec, val_ds, config.loss);
      rec.val_loss = ve.loss;
      rec.metric = detail::headline_metric(ve, val_ds, config.loss);
      lr = plateau.step(ve.loss);
    } else {
      rec.val_loss = rec.metric = std::numeric_limits<double>::quiet_NaN();
    }
    rec.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec, params);
  }
  result.params = std::move(params);
  return result;
}

inline TrainResult train(const TrainerConfig& config, const LayerSpec& spec, const Dataset& train_ds,
                         const Dataset& val_ds, const SelectionPolicy& policy, const EpochCallback& on_epoch = {}) {
  return train(config, spec, init_params(spec, config.seed, config.init_scale), train_ds, val_ds, policy, on_epoch);
}

// Learning-rate bound of the sufficient-loss-reduction result: with a loss of
// smoothness tau and kernel bounded by gamma, lr <= 1 / (2 tau gamma).
struct LossReductionProbe {
  double tau = 0.0;
  double gamma = 0.0;
  double lr_bound = 0.0;
};

inline double smoothness_constant(LossKind loss) { return loss == LossKind::mse ? 1.0 : 0.25; }

// gamma is the largest GNTK diagonal entry over the probe graphs.
inline LossReductionProbe estimate_descent_bound(const LayerSpec& spec, const GcnParams& params,
                                                 std::span<const GraphPtr> probe, LossKind loss = LossKind::mse) {
  if (spec.pooling != Pooling::sum) throw ConfigError("descent bound needs a graph-level model (node level unsupported)");
  if (probe.empty()) throw ConfigError("descent bound needs at least one probe graph");
  const auto k = gntk_matrix(params, spec, probe);
  LossReductionProbe p;
  p.tau = smoothness_constant(loss);
  p.gamma = k.entries.diagonal().maxCoeff();
  if (!(p.gamma > 0.0)) throw NumericError("zero kernel: every probe jacobian vanishes");
  p.lr_bound = 1.0 / (2.0 * p.tau * p.gamma);
  return p;
}

// Per-epoch CSV. Columns are fixed; doubles use %.17g so equal runs produce
// equal bytes outside the wallclock column.
inline constexpr const char* kLogCsvHeader =
    "epoch,wallclock_ms,train_evals,forward_evals,train_loss,val_loss,metric,lr,selection_event";

inline void write_log_csv(const TrainingLog& log, std::ostream& out) {
  out << kLogCsvHeader << '\n';
  char buf[512];
  for (const auto& r : log.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.3f,%zu,%zu,%.17g,%.17g,%.17g,%.17g,%d\n", r.epoch, r.wallclock_ms,
                  r.train_evals, r.forward_evals, r.train_loss, r.val_loss, r.metric, r.lr, r.selection_event ? 1 : 0);
    out << buf;
  }
}

inline void write_log_csv(const TrainingLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_log_csv(log, out);
}

inline nlohmann::json selection_event_json(const SelectionEvent& ev) {
  return {{"epoch", ev.epoch},
          {"variant", std::string(to_string(ev.variant))},
          {"ratio", ev.ratio},
          {"selected_count", ev.selected_count},
          {"score_min", ev.score_min},
          {"score_max", ev.score_max}};
}

inline nlohmann::json log_summary(const TrainingLog& log) {
  nlohmann::json j;
  j["epochs_run"] = log.epochs.size();
  j["stopped_early"] = log.stopped_early;
  j["initial_train_loss"] = log.initial_train_loss;
  j["selection_events"] = log.selections.size();
  if (!log.epochs.empty()) {
    const auto& last = log.epochs.back();
    j["final_train_loss"] = last.train_loss;
    j["final_val_loss"] = last.val_loss;
    j["final_" + log.metric_name] = last.metric;
    j["total_train_evals"] = last.train_evals;
    j["total_forward_evals"] = last.forward_evals;
    j["graphs_processed"] = last.graphs_processed();
    j["total_time_ms"] = last.wallclock_ms;
  }
  return j;
}

}  // namespace grant
