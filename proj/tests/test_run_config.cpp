#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "grant/run_config.hpp"

using namespace grant;

TEST(RunConfig, UnknownKeyRejected) {
  RunConfig c;
  try {
    c.set("learning_rate", "0.1");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "unknown key learning_rate");
  }
  std::istringstream in("lr = 0.1\nbogus = 3\n");
  EXPECT_THROW(c.merge_stream(in, "cfg"), ConfigError);
}

TEST(RunConfig, MergeOrderAndComments) {
  RunConfig c;
  std::istringstream in("# comment\n\nlr = 0.25   # trailing\nkappas = 4, 3\n");
  c.merge_stream(in, "cfg");
  c.set_assignment("epochs=7");
  EXPECT_EQ(c.get_double("lr"), 0.25);
  EXPECT_EQ(c.get_int("epochs"), 7);
  EXPECT_EQ(c.get_int_list("kappas"), (std::vector<int>{4, 3}));
  EXPECT_THROW(c.set_assignment("epochs"), ConfigError);
}

TEST(RunConfig, ResolvedListsEveryKeyInOrder) {
  RunConfig c;
  c.set("lr", "0.5");
  const std::string r = c.resolved();
  std::istringstream in(r);
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    ASSERT_LT(i, config_keys().size());
    EXPECT_EQ(line.substr(0, line.find(" = ")), config_keys()[i].name);
    ++i;
  }
  EXPECT_EQ(i, config_keys().size());
  EXPECT_NE(r.find("lr = 0.5\n"), std::string::npos);
}

TEST(RunConfig, TypedGettersRejectGarbage) {
  RunConfig c;
  c.set("lr", "fast");
  EXPECT_THROW(c.get_double("lr"), ConfigError);
  c.set("epochs", "1.5");
  EXPECT_THROW(c.get_int("epochs"), ConfigError);
  c.set("plateau", "maybe");
  EXPECT_THROW(c.get_bool("plateau"), ConfigError);
}

TEST(RunConfig, LayerSpecFromLists) {
  RunConfig c;
  c.set("kappas", "5,4,2,2");
  c.set("hidden", "32,16,8");
  const auto s = c.layer_spec(9, 1, TaskKind::graph_regression);
  EXPECT_EQ(s.widths, (std::vector<int>{9, 32, 16, 8, 1}));
  EXPECT_EQ(s.pooling, Pooling::sum);
  c.set("hidden", "32");
  EXPECT_EQ(c.layer_spec(9, 1, TaskKind::graph_regression).widths, (std::vector<int>{9, 32, 32, 32, 1}));
  c.set("hidden", "32,16");
  EXPECT_THROW(c.layer_spec(9, 1, TaskKind::graph_regression), ConfigError);
  c.set("kappas", "3");
  c.set("hidden", "");
  const auto one = c.layer_spec(4, 2, TaskKind::node_regression);
  EXPECT_EQ(one.widths, (std::vector<int>{4, 2}));
  EXPECT_EQ(one.pooling, Pooling::none);
}

TEST(RunConfig, TrainerAndPolicy) {
  RunConfig c;
  c.set("policy", "S");
  c.set("start_ratio", "0.1");
  c.set("plateau", "true");
  const auto t = c.trainer(TaskKind::node_classification);
  EXPECT_EQ(t.loss, LossKind::bce_with_logits);
  EXPECT_TRUE(t.plateau.enabled);
  const auto p = c.policy(TaskKind::node_classification);
  EXPECT_EQ(p.variant, SelectionVariant::sample);
  EXPECT_EQ(p.level, TargetLevel::node);
  c.set("policy", "C");
  EXPECT_THROW(c.policy(TaskKind::graph_regression), ConfigError);
  c.set("policy", "B");
  c.set("start_ratio", "0");
  EXPECT_THROW(c.policy(TaskKind::graph_regression), ConfigError);
}

TEST(RunConfig, BenchmarkPresets) {
  struct Row {
    const char* name;
    const char* lr;
    std::vector<int> kappas;
    long long batch;
    double start;
    long long epochs;
  };
  const std::vector<Row> rows = {
      {"qm9", "0.00005", {3, 2}, 256, 0.05, 750},          {"zinc", "0.0004", {5, 4, 2, 2}, 256, 0.05, 1000},
      {"ogbg-molhiv", "0.01", {4, 3, 2, 2}, 500, 0.1, 600}, {"ogbg-molpcba", "0.015", {5, 4, 3, 2, 2}, 128, 0.1, 800},
      {"gen-reg", "0.0002", {3, 2}, 100, 0.05, 250},        {"gen-cls", "0.0002", {4, 3}, 200, 0.05, 500},
  };
  for (const auto& row : rows) {
    RunConfig c;
    c.merge_file(std::filesystem::path(GRANT_PRESET_DIR) / (std::string(row.name) + ".cfg"));
    EXPECT_EQ(c.get("lr"), row.lr) << row.name;
    EXPECT_EQ(c.get_int_list("kappas"), row.kappas) << row.name;
    EXPECT_EQ(c.get_int("batch_size"), row.batch) << row.name;
    EXPECT_EQ(c.get_double("start_ratio"), row.start) << row.name;
    EXPECT_EQ(c.get_int("epochs"), row.epochs) << row.name;
  }
}

TEST(RunConfig, GeneratedPresetsDescribeFullSplit) {
  for (const char* name : {"gen-reg", "gen-cls"}) {
    RunConfig c;
    c.merge_file(std::filesystem::path(GRANT_PRESET_DIR) / (std::string(name) + ".cfg"));
    const auto s = c.synth();
    EXPECT_EQ(s.num_graphs, 50000u);
    EXPECT_EQ(s.split.train, 30000u);
    EXPECT_EQ(s.split.val, 10000u);
    EXPECT_EQ(s.split.test, 10000u);
    EXPECT_EQ(s.feature_dim, 40);
    EXPECT_EQ(s.nodes_mean, 100);
    EXPECT_EQ(s.resolution, 1000);
  }
}
