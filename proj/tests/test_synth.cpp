#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "grant/synth.hpp"

using namespace grant;

namespace fs = std::filesystem;

namespace {

bool degrees_nondecreasing(const Graph& g) {
  const Vector deg = g.adj().rowwise().sum();
  for (Eigen::Index i = 1; i < deg.size(); ++i)
    if (deg(i) < deg(i - 1)) return false;
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

SynthConfig small_config() {
  SynthConfig c;
  c.nodes_mean = 12;
  c.num_graphs = 40;
  c.feature_dim = 3;
  c.teacher_hidden = 4;
  c.resolution = 100;
  c.split = {20, 10, 10};
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Graphon, GridInvariants) {
  for (const auto& w : {Graphon::constant(0.3, 50), Graphon::gradient(50), Graphon::two_block(0.4, 0.1, 50)}) {
    EXPECT_EQ(w.grid, w.grid.transpose()) << w.kind;
    EXPECT_GE(w.grid.minCoeff(), 0.0);
    EXPECT_LE(w.grid.maxCoeff(), 1.0);
  }
  EXPECT_EQ(Graphon::gradient(1000).resolution(), 1000);
  EXPECT_DOUBLE_EQ(Graphon::gradient(10).at(0.95, 0.05), 0.95 * 0.05);
  EXPECT_THROW(Graphon::constant(1.5), ConfigError);
}

TEST(SampleGraph, ExtremeConstantGraphons) {
  const Graph empty = sample_graph(Graphon::constant(0.0, 10), 20, 2, 1);
  EXPECT_TRUE(empty.adj().isZero(0.0));
  const Graph full = sample_graph(Graphon::constant(1.0, 10), 20, 2, 1);
  EXPECT_EQ(full.adj(), Matrix::Ones(20, 20) - Matrix::Identity(20, 20));
  EXPECT_EQ(full.d(), 2);
  EXPECT_THROW(sample_graph(Graphon::constant(0.5, 10), 1, 2, 1), ConfigError);
}

TEST(SampleGraph, DensityConcentrates) {
  const Graphon w = Graphon::constant(0.3);
  double sum = 0.0;
  for (std::uint64_t i = 0; i < 500; ++i) {
    const Graph g = sample_graph(w, 100, 1, graph_seed(9, i));
    sum += edge_density(g);
    ASSERT_TRUE(degrees_nondecreasing(g)) << i;
  }
  const double mean = sum / 500.0;
  // Standard error of the mean over 500 * 4950 Bernoulli(0.3) edges.
  const double se = std::sqrt(0.3 * 0.7 / (500.0 * 4950.0));
  EXPECT_NEAR(mean, 0.3, 0.015);
  EXPECT_NEAR(mean, 0.3, 5.0 * se);
}

TEST(SampleGraph, DegreesSortedForEveryGraphon) {
  for (const auto& w : {Graphon::gradient(200), Graphon::two_block(0.5, 0.05, 200)})
    for (std::uint64_t i = 0; i < 50; ++i) EXPECT_TRUE(degrees_nondecreasing(sample_graph(w, 30 + i, 2, i))) << w.kind;
}

TEST(SampleGraph, DeterministicPerSeed) {
  const Graphon w = Graphon::gradient(100);
  const Graph a = sample_graph(w, 25, 3, 42), b = sample_graph(w, 25, 3, 42), c = sample_graph(w, 25, 3, 43);
  EXPECT_EQ(a.adj(), b.adj());
  EXPECT_EQ(a.x(), b.x());
  EXPECT_NE(a.x(), c.x());
}

TEST(Labels, ZeroTeacherGivesZeroTargets) {
  SynthConfig cfg = small_config();
  Teacher t = make_teacher(cfg);
  for (auto& w : t.params.weights) w.setZero();
  std::vector<GraphPtr> gs;
  for (int i = 0; i < 3; ++i) gs.push_back(std::make_shared<const Graph>(sample_graph(cfg.make_graphon(), 10, 3, i)));
  for (const auto& m : label_with_teacher(gs, t, SynthTask::regression).targets) EXPECT_TRUE(m.isZero(0.0));
}

TEST(Labels, ThresholdOracle) {
  Matrix out(4, 1);
  out << 1, 2, 3, 4;
  EXPECT_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  Matrix want(4, 1);
  want << 0, 0, 1, 1;
  EXPECT_EQ(threshold_labels(out, 2.5), want);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.8), 4.2);
}

TEST(Labels, ClassificationImbalance) {
  SynthConfig cfg = small_config();
  cfg.task = SynthTask::classification;
  cfg.num_graphs = 200;
  cfg.split = {200, 0, 0};
  const Dataset ds = synthesize(cfg);
  double pos = 0.0, total = 0.0;
  for (const auto& g : ds.graphs) {
    pos += g->target().values.sum();
    total += static_cast<double>(g->target().values.size());
  }
  EXPECT_NEAR(pos / total, 0.2, 0.01);
  EXPECT_EQ(ds.task, TaskKind::node_classification);
}

TEST(Labels, GraphLevelSumsTeacherNodes) {
  SynthConfig cfg = small_config();
  const Teacher t = make_teacher(cfg);
  const Graph g = sample_graph(cfg.make_graphon(), 9, 3, 3);
  EXPECT_DOUBLE_EQ(teacher_output(t, g, TargetLevel::graph)(0, 0), teacher_output(t, g, TargetLevel::node).sum());
}

TEST(Labels, TeacherFeatureMismatch) {
  SynthConfig cfg = small_config();
  const Teacher t = make_teacher(cfg);
  EXPECT_THROW(teacher_output(t, sample_graph(cfg.make_graphon(), 5, 4, 1), TargetLevel::node), StructuralError);
}

TEST(Synthesize, NodeCountsWithinTenPercent) {
  SynthConfig cfg = small_config();
  cfg.nodes_mean = 100;
  cfg.feature_dim = 1;
  cfg.num_graphs = 60;
  cfg.split = {60, 0, 0};
  const Dataset ds = synthesize(cfg);
  Eigen::Index lo = 1000, hi = 0;
  for (const auto& g : ds.graphs) {
    lo = std::min(lo, g->n());
    hi = std::max(hi, g->n());
  }
  EXPECT_GE(lo, 90);
  EXPECT_LE(hi, 110);
  EXPECT_LT(lo, hi);
}

TEST(Synthesize, DeterministicAndTeacherConsistent) {
  const SynthConfig cfg = small_config();
  const Dataset a = synthesize(cfg), b = synthesize(cfg);
  const Teacher t = make_teacher(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].adj(), b[i].adj());
    EXPECT_EQ(a[i].target().values, b[i].target().values);
    EXPECT_EQ(teacher_output(t, a[i], TargetLevel::node), a[i].target().values);
  }
}

TEST(GenerateDataset, FilesMatchInMemorySplit) {
  for (SynthTask task : {SynthTask::regression, SynthTask::classification}) {
    SynthConfig cfg = small_config();
    cfg.task = task;
    const fs::path dir = fs::temp_directory_path() / "grant_synth_gen";
    fs::remove_all(dir);
    const auto files = generate_dataset(cfg, dir);
    double threshold = 0.0;
    const Dataset all = synthesize(cfg, &threshold);
    auto [tr, va, te] = split_dataset(all, cfg.split, cfg.seed);
    const Dataset tr_file = load_dataset(files.train);
    ASSERT_EQ(tr_file.size(), 20u);
    EXPECT_EQ(load_dataset(files.val).size(), 10u);
    EXPECT_EQ(load_dataset(files.test).size(), 10u);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      EXPECT_EQ(tr_file[i].x(), tr[i].x());
      EXPECT_EQ(tr_file[i].target().values, tr[i].target().values);
    }
    EXPECT_TRUE(fs::exists(files.metadata));
    EXPECT_TRUE(fs::exists(files.teacher));
    if (task == SynthTask::classification) EXPECT_EQ(files.threshold, threshold);
  }
}

TEST(GenerateDataset, SingletonSplitsAndByteIdentical) {
  SynthConfig cfg = small_config();
  cfg.num_graphs = 3;
  cfg.split = {1, 1, 1};
  const fs::path d1 = fs::temp_directory_path() / "grant_synth_a", d2 = fs::temp_directory_path() / "grant_synth_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  generate_dataset(cfg, d1);
  generate_dataset(cfg, d2);
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "meta.json", "teacher.json"}) {
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl"}) EXPECT_EQ(line_count(d1 / f), 1u);
}

TEST(GenerateDataset, IndependentOfThreadCount) {
  SynthConfig cfg = small_config();
  set_threads(1);
  const Dataset a = synthesize(cfg);
  set_threads(3);
  const Dataset b = synthesize(cfg);
  set_threads(0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].target().values, b[i].target().values);
}

TEST(SynthConfig, Validation) {
  SynthConfig cfg = small_config();
  cfg.nodes_mean = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.split = {30, 10, 10};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.graphon = "ring";
  EXPECT_THROW(cfg.validate(), ConfigError);
}
