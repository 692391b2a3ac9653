#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "grant/checkpoint.hpp"
#include "grant/dataset_io.hpp"
#include "grant/flexgcn.hpp"
#include "grant/parallel.hpp"

// Synthetic node-property datasets drawn from a graphon. Each graph samples
// latent positions u_i ~ U[0, 1], connects i < j with probability W(u_i, u_j)
// read from an R x R grid, and orders nodes by degree so graphs from the same
// graphon line up. A fixed random teacher GCN supplies the targets.
namespace grant {

struct Graphon {
  std::string kind;
  Matrix grid;  // R x R edge probabilities, symmetric, entries in [0, 1]

  Eigen::Index resolution() const { return grid.rows(); }

  double at(double u, double v) const {
    const Eigen::Index r = resolution();
    auto cell = [r](double t) { return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(t * r), 0, r - 1); };
    return grid(cell(u), cell(v));
  }

  static Graphon constant(double p, Eigen::Index resolution = 1000) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("graphon probability must lie in [0, 1]");
    return {"constant", Matrix::Constant(resolution, resolution, p)};
  }

  // W(u, v) = u v, sampled at cell centres.
  static Graphon gradient(Eigen::Index resolution = 1000) {
    Vector centres(resolution);
    for (Eigen::Index i = 0; i < resolution; ++i) centres(i) = (static_cast<double>(i) + 0.5) / static_cast<double>(resolution);
    return {"gradient", centres * centres.transpose()};
  }

  // Two equal blocks split at u = 1/2.
  static Graphon two_block(double p_in, double p_out, Eigen::Index resolution = 1000) {
    if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0))
      throw ConfigError("block probabilities must lie in [0, 1]");
    Matrix g(resolution, resolution);
    const Eigen::Index half = resolution / 2;
    for (Eigen::Index i = 0; i < resolution; ++i)
      for (Eigen::Index j = 0; j < resolution; ++j) g(i, j) = (i < half) == (j < half) ? p_in : p_out;
    return {"sbm", std::move(g)};
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent stream per graph index, so output never depends on how the
// work is split across threads.
inline std::uint64_t graph_seed(std::uint64_t base, std::uint64_t index) { return splitmix64(base ^ splitmix64(index)); }

// Structure and standard-normal features; the target is left empty.
inline Graph sample_graph(const Graphon& w, Eigen::Index n, Eigen::Index feature_dim, std::uint64_t seed) {
  if (n < 2) throw ConfigError("sample_graph needs n >= 2");
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> u(static_cast<std::size_t>(n));
  for (auto& v : u) v = unif(rng);
  Matrix raw = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (unif(rng) < w.at(u[i], u[j])) raw(i, j) = raw(j, i) = 1.0;
  const Vector degree = raw.rowwise().sum();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return degree(a) < degree(b) || (degree(a) == degree(b) && u[a] < u[b]);
  });
  Matrix adj(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) adj(i, j) = raw(order[i], order[j]);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, feature_dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < feature_dim; ++k) x(i, k) = normal(rng);
  return Graph(std::move(x), std::move(adj));
}

inline double edge_density(const Graph& g) {
  const double n = static_cast<double>(g.n());
  return static_cast<double>(g.edge_count()) / (n * (n - 1.0) / 2.0);
}

enum class SynthTask { regression, classification };

struct SynthConfig {
  std::string graphon = "gradient";  // constant | gradient | sbm
  double graphon_p = 0.3;
  double sbm_p_in = 0.3;
  double sbm_p_out = 0.05;
  Eigen::Index resolution = 1000;
  int nodes_mean = 100;
  std::size_t num_graphs = 50000;
  int feature_dim = 40;
  SynthTask task = SynthTask::regression;
  TargetLevel level = TargetLevel::node;
  int teacher_hidden = 16;
  std::vector<int> teacher_kappas = {2, 2};
  std::uint64_t teacher_seed = 1;
  double teacher_scale = 1.0;
  double cls_percentile = 0.8;
  SplitCounts split = {30000, 10000, 10000};
  std::uint64_t seed = 0;

  void validate() const {
    if (nodes_mean < 2) throw ConfigError("nodes_mean must be >= 2");
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
    if (teacher_hidden < 1) throw ConfigError("teacher_hidden must be >= 1");
    if (teacher_kappas.size() != 2) throw ConfigError("teacher must have exactly two layers");
    if (!(cls_percentile >= 0.0 && cls_percentile <= 1.0)) throw ConfigError("cls_percentile must lie in [0, 1]");
    if (split.train + split.val + split.test > num_graphs) throw ConfigError("split counts exceed num_graphs");
    if (graphon != "constant" && graphon != "gradient" && graphon != "sbm")
      throw ConfigError("unknown graphon kind '" + graphon + "'");
  }

  Graphon make_graphon() const {
    if (graphon == "constant") return Graphon::constant(graphon_p, resolution);
    if (graphon == "sbm") return Graphon::two_block(sbm_p_in, sbm_p_out, resolution);
    return Graphon::gradient(resolution);
  }

  LayerSpec teacher_spec() const { return {{feature_dim, teacher_hidden, 1}, teacher_kappas, Pooling::none}; }

  TaskKind task_kind() const {
    const bool cls = task == SynthTask::classification;
    if (level == TargetLevel::node) return cls ? TaskKind::node_classification : TaskKind::node_regression;
    return cls ? TaskKind::graph_classification : TaskKind::graph_regression;
  }
};

struct Teacher {
  LayerSpec spec;
  GcnParams params;
};

inline Teacher make_teacher(const SynthConfig& cfg) {
  Teacher t{cfg.teacher_spec(), {}};
  t.params = init_params(t.spec, cfg.teacher_seed, cfg.teacher_scale);
  return t;
}

// Raw teacher output for one graph: n x 1 per node, or its sum (1 x 1) at
// graph level.
inline Matrix teacher_output(const Teacher& t, const Graph& g, TargetLevel level) {
  if (t.spec.pooling != Pooling::none || t.spec.output_dim() != 1)
    throw ConfigError("teacher must be node-level with a single output");
  if (g.d() != t.spec.input_dim()) throw StructuralError("teacher/graph feature dimension mismatch");
  Matrix out = forward(t.params, t.spec, g).output;
  if (level == TargetLevel::graph) return Matrix::Constant(1, 1, out.sum());
  return out;
}

// Linear-interpolated quantile, q in [0, 1].
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw NumericError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double classification_threshold(const std::vector<Matrix>& outputs, double percentile) {
  std::vector<double> pooled;
  for (const auto& m : outputs) pooled.insert(pooled.end(), m.data(), m.data() + m.size());
  return quantile(std::move(pooled), percentile);
}

// Label 1 where the teacher output exceeds the threshold.
inline Matrix threshold_labels(const Matrix& outputs, double threshold) {
  return (outputs.array() > threshold).cast<double>().matrix();
}

struct LabelResult {
  std::vector<Matrix> targets;
  double threshold = std::numeric_limits<double>::quiet_NaN();  // classification only
};

inline LabelResult label_with_teacher(std::span<const GraphPtr> graphs, const Teacher& teacher, SynthTask task,
                                      TargetLevel level = TargetLevel::node, double percentile = 0.8) {
  LabelResult r;
  r.targets.resize(graphs.size());
  parallel_for(graphs.size(), [&](std::size_t i) { r.targets[i] = teacher_output(teacher, *graphs[i], level); });
  if (task == SynthTask::classification) {
    r.threshold = classification_threshold(r.targets, percentile);
    for (auto& t : r.targets) t = threshold_labels(t, r.threshold);
  }
  return r;
}

inline Eigen::Index sample_node_count(const SynthConfig& cfg, std::uint64_t seed) {
  const auto lo = static_cast<int>(std::lround(0.9 * cfg.nodes_mean));
  const auto hi = static_cast<int>(std::lround(1.1 * cfg.nodes_mean));
  std::mt19937_64 rng(splitmix64(seed ^ 0x6e6f646573ull));
  return std::uniform_int_distribution<int>(std::max(2, lo), std::max(2, hi))(rng);
}

// Structure + features of graph `index` of the dataset described by cfg.
inline Graph synth_graph(const SynthConfig& cfg, const Graphon& w, std::size_t index) {
  const std::uint64_t s = graph_seed(cfg.seed, index);
  return sample_graph(w, sample_node_count(cfg, s), cfg.feature_dim, s);
}

inline Target make_target(const Matrix& values, TargetLevel level) {
  Target t;
  t.level = level;
  t.values = values;
  return t;
}

// Whole dataset in memory, graphs in generation order (unsplit).
inline Dataset synthesize(const SynthConfig& cfg, double* threshold_out = nullptr) {
  cfg.validate();
  const Graphon w = cfg.make_graphon();
  const Teacher teacher = make_teacher(cfg);
  std::vector<GraphPtr> bare(cfg.num_graphs);
  parallel_for(cfg.num_graphs, [&](std::size_t i) { bare[i] = std::make_shared<const Graph>(synth_graph(cfg, w, i)); });
  auto labels = label_with_teacher(bare, teacher, cfg.task, cfg.level, cfg.cls_percentile);
  if (threshold_out) *threshold_out = labels.threshold;
  Dataset ds;
  ds.task = cfg.task_kind();
  ds.d = cfg.feature_dim;
  ds.c = 1;
  ds.graphs.reserve(cfg.num_graphs);
  for (std::size_t i = 0; i < cfg.num_graphs; ++i)
    ds.graphs.push_back(std::make_shared<const Graph>(bare[i]->with_target(make_target(labels.targets[i], cfg.level))));
  return ds;
}

inline nlohmann::json synth_config_json(const SynthConfig& cfg) {
  return {{"graphon", cfg.graphon},
          {"graphon_p", cfg.graphon_p},
          {"sbm_p_in", cfg.sbm_p_in},
          {"sbm_p_out", cfg.sbm_p_out},
          {"resolution", cfg.resolution},
          {"nodes_mean", cfg.nodes_mean},
          {"num_graphs", cfg.num_graphs},
          {"feature_dim", cfg.feature_dim},
          {"task", cfg.task == SynthTask::regression ? "reg" : "cls"},
          {"level", cfg.level == TargetLevel::node ? "node" : "graph"},
          {"teacher_hidden", cfg.teacher_hidden},
          {"teacher_kappas", cfg.teacher_kappas},
          {"teacher_seed", cfg.teacher_seed},
          {"teacher_scale", cfg.teacher_scale},
          {"cls_percentile", cfg.cls_percentile},
          {"split", {cfg.split.train, cfg.split.val, cfg.split.test}},
          {"seed", cfg.seed}};
}

struct GeneratedFiles {
  std::filesystem::path train, val, test, metadata, teacher;
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

// Writes train/val/test JSON-lines files, the teacher checkpoint and a
// metadata sidecar. Graphs are regenerated from their per-index seeds when
// written, so memory stays bounded by the teacher outputs. The split is the
// same seeded permutation split_dataset uses.
inline GeneratedFiles generate_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const Graphon w = cfg.make_graphon();
  const Teacher teacher = make_teacher(cfg);

  std::vector<Matrix> outputs(cfg.num_graphs);
  parallel_for(cfg.num_graphs, [&](std::size_t i) { outputs[i] = teacher_output(teacher, synth_graph(cfg, w, i), cfg.level); });
  GeneratedFiles files;
  if (cfg.task == SynthTask::classification) {
    files.threshold = classification_threshold(outputs, cfg.cls_percentile);
    for (auto& o : outputs) o = threshold_labels(o, files.threshold);
  }

  const TaskKind task = cfg.task_kind();
  const auto perm = seeded_permutation(cfg.num_graphs, cfg.seed);
  files.train = out_dir / "train.jsonl";
  files.val = out_dir / "val.jsonl";
  files.test = out_dir / "test.jsonl";
  auto write_split = [&](const std::filesystem::path& path, std::size_t lo, std::size_t count) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    constexpr std::size_t kChunk = 256;
    std::vector<std::string> lines;
    for (std::size_t at = lo; at < lo + count; at += kChunk) {
      const std::size_t len = std::min(kChunk, lo + count - at);
      lines.assign(len, {});
      parallel_for(len, [&](std::size_t k) {
        const std::size_t id = perm[at + k];
        Graph g = synth_graph(cfg, w, id).with_target(make_target(outputs[id], cfg.level));
        lines[k] = jsonl::graph_to_json(g, task).dump();
      });
      for (const auto& l : lines) out << l << '\n';
    }
    if (!out) throw Error("write failed for " + path.string());
  };
  write_split(files.train, 0, cfg.split.train);
  write_split(files.val, cfg.split.train, cfg.split.val);
  write_split(files.test, cfg.split.train + cfg.split.val, cfg.split.test);

  files.teacher = out_dir / "teacher.json";
  save_checkpoint({teacher.spec, teacher.params, -1}, files.teacher);

  files.metadata = out_dir / "meta.json";
  nlohmann::json meta;
  meta["generator"] = "graphon";
  meta["config"] = synth_config_json(cfg);
  meta["task"] = std::string(to_string(task));
  meta["teacher_checkpoint"] = "teacher.json";
  meta["teacher_theta_tag"] = theta_tag(teacher.params);
  if (cfg.task == SynthTask::classification) meta["threshold"] = files.threshold;
  else meta["threshold"] = nullptr;
  meta["counts"] = {{"train", cfg.split.train}, {"val", cfg.split.val}, {"test", cfg.split.test}};
  std::ofstream mo(files.metadata);
  mo << meta.dump(2) << '\n';
  return files;
}

}  // namespace grant
