#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "grant/synth.hpp"
#include "grant/teaching.hpp"
#include "grant/trainer.hpp"

// Flat key = value run configuration. Layers are applied in order (preset
// file, --config file, command-line overrides); every key must be known.
namespace grant {

struct ConfigKey {
  const char* name;
  const char* default_value;
};

// Declaration order is also the order of the resolved-config file.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      // io
      {"data_dir", "data"},
      {"out_dir", "out"},
      {"threads", "0"},
      {"seed", "0"},
      // model
      {"hidden", "16"},
      {"kappas", "3,2"},
      {"init_scale", "1"},
      // trainer
      {"lr", "0.001"},
      {"batch_size", "32"},
      {"epochs", "100"},
      {"stop_epsilon", "0"},
      {"loss", "auto"},
      {"plateau", "false"},
      {"plateau_factor", "0.5"},
      {"plateau_patience", "10"},
      {"plateau_min_lr", "1e-6"},
      {"restart_on_selection", "true"},
      {"checkpoint_every", "0"},
      // teaching
      {"policy", "none"},
      {"start_ratio", "1"},
      {"max_interval", "0"},
      // kernel probes
      {"probe_size", "64"},
      // synthetic data
      {"graphon", "gradient"},
      {"graphon_p", "0.3"},
      {"sbm_p_in", "0.3"},
      {"sbm_p_out", "0.05"},
      {"graphon_resolution", "1000"},
      {"nodes_mean", "100"},
      {"num_graphs", "50000"},
      {"feature_dim", "40"},
      {"task", "reg"},
      {"level", "node"},
      {"teacher_hidden", "16"},
      {"teacher_kappas", "2,2"},
      {"teacher_seed", "1"},
      {"teacher_scale", "1"},
      {"cls_percentile", "0.8"},
      {"split", "30000,10000,10000"},
      {"data_seed", "0"},
  };
  return keys;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_.emplace_back(k.name, k.default_value);
  }

  bool known(std::string_view key) const {
    return std::any_of(values_.begin(), values_.end(), [&](const auto& kv) { return kv.first == key; });
  }

  void set(const std::string& key, const std::string& value) {
    for (auto& kv : values_)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    throw ConfigError("unknown key " + key);
  }

  // "key=value" as given on the command line.
  void set_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  void merge_stream(std::istream& in, const std::string& origin) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    }
  }

  void merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    merge_stream(in, path.string());
  }

  const std::string& get(std::string_view key) const {
    for (const auto& kv : values_)
      if (kv.first == key) return kv.second;
    throw ConfigError("unknown key " + std::string(key));
  }

  double get_double(std::string_view key) const {
    const auto& v = get(key);
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("key " + std::string(key) + ": '" + v + "' is not a number");
    }
  }

  long long get_int(std::string_view key) const {
    const auto& v = get(key);
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
      throw ConfigError("key " + std::string(key) + ": '" + v + "' is not an integer");
    return out;
  }

  bool get_bool(std::string_view key) const {
    const auto& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key " + std::string(key) + ": '" + v + "' is not a boolean");
  }

  std::vector<int> get_int_list(std::string_view key) const {
    std::vector<int> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      int v = 0;
      auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || p != item.data() + item.size())
        throw ConfigError("key " + std::string(key) + ": '" + item + "' is not an integer");
      out.push_back(v);
    }
    return out;
  }

  std::string resolved() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  void write_resolved(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << resolved();
  }

  // Trainer settings. loss=auto picks mse or bce from the task.
  TrainerConfig trainer(TaskKind task) const {
    TrainerConfig c;
    c.lr = get_double("lr");
    const auto bs = get_int("batch_size");
    if (bs < 1) throw ConfigError("batch_size must be positive");
    c.batch_size = static_cast<std::size_t>(bs);
    c.epochs = static_cast<int>(get_int("epochs"));
    c.stop_epsilon = get_double("stop_epsilon");
    c.loss = get("loss") == "auto" ? default_loss(task) : parse_loss_kind(get("loss"));
    c.plateau.enabled = get_bool("plateau");
    c.plateau.factor = get_double("plateau_factor");
    c.plateau.patience = static_cast<int>(get_int("plateau_patience"));
    c.plateau.min_lr = get_double("plateau_min_lr");
    c.restart_on_selection = get_bool("restart_on_selection");
    c.seed = static_cast<std::uint64_t>(get_int("seed"));
    c.init_scale = get_double("init_scale");
    c.max_interval = static_cast<int>(get_int("max_interval"));
    c.validate();
    return c;
  }

  SelectionPolicy policy(TaskKind task) const {
    SelectionPolicy p;
    p.variant = parse_selection_variant(get("policy"));
    p.start_ratio = get_double("start_ratio");
    p.level = is_node_level(task) ? TargetLevel::node : TargetLevel::graph;
    p.validate();
    return p;
  }

  // Widths are (feature_dim, hidden..., target_dim); node-level tasks drop
  // the pooling. A single hidden width applies to every hidden layer.
  LayerSpec layer_spec(Eigen::Index feature_dim, Eigen::Index target_dim, TaskKind task) const {
    LayerSpec s;
    s.kappas = get_int_list("kappas");
    auto hidden = get_int_list("hidden");
    if (hidden.size() == 1 && !s.kappas.empty()) hidden.assign(s.kappas.size() - 1, hidden.front());
    if (hidden.size() + 1 != s.kappas.size())
      throw ConfigError("hidden lists " + std::to_string(hidden.size()) + " widths but kappas implies " +
                        std::to_string(s.kappas.size() == 0 ? 0 : s.kappas.size() - 1));
    s.widths.push_back(static_cast<int>(feature_dim));
    s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
    s.widths.push_back(static_cast<int>(target_dim));
    s.pooling = is_node_level(task) ? Pooling::none : Pooling::sum;
    s.validate();
    return s;
  }

  SynthConfig synth() const {
    SynthConfig c;
    c.graphon = get("graphon");
    c.graphon_p = get_double("graphon_p");
    c.sbm_p_in = get_double("sbm_p_in");
    c.sbm_p_out = get_double("sbm_p_out");
    c.resolution = get_int("graphon_resolution");
    if (c.resolution < 1) throw ConfigError("graphon_resolution must be positive");
    c.nodes_mean = static_cast<int>(get_int("nodes_mean"));
    const auto ng = get_int("num_graphs");
    if (ng < 0) throw ConfigError("num_graphs must be nonnegative");
    c.num_graphs = static_cast<std::size_t>(ng);
    c.feature_dim = static_cast<int>(get_int("feature_dim"));
    const auto& task = get("task");
    if (task != "reg" && task != "cls") throw ConfigError("task must be reg or cls");
    c.task = task == "reg" ? SynthTask::regression : SynthTask::classification;
    const auto& level = get("level");
    if (level != "node" && level != "graph") throw ConfigError("level must be node or graph");
    c.level = level == "node" ? TargetLevel::node : TargetLevel::graph;
    c.teacher_hidden = static_cast<int>(get_int("teacher_hidden"));
    c.teacher_kappas = get_int_list("teacher_kappas");
    c.teacher_seed = static_cast<std::uint64_t>(get_int("teacher_seed"));
    c.teacher_scale = get_double("teacher_scale");
    c.cls_percentile = get_double("cls_percentile");
    const auto split = get_int_list("split");
    if (split.size() != 3 || std::any_of(split.begin(), split.end(), [](int v) { return v < 0; }))
      throw ConfigError("split must be three nonnegative counts");
    c.split = {static_cast<std::size_t>(split[0]), static_cast<std::size_t>(split[1]), static_cast<std::size_t>(split[2])};
    c.seed = static_cast<std::uint64_t>(get_int("data_seed"));
    c.validate();
    return c;
  }

 private:
  std::vector<std::pair<std::string, std::string>> values_;
};

}  // namespace grant
