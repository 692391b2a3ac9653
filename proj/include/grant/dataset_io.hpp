#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "grant/graph.hpp"

namespace grant {

// JSON-lines dataset format, one graph per line:
//
//   {"task": "node-regression", "n": 3, "x": [x00, x01, x10, ...],
//    "edges": [[0, 1], [1, 2]], "y": [[0.1], [0.2], [0.3]], "mask": [[1], [0], [1]]}
//
// x is row-major (n*d numbers). Each undirected edge appears once; a dense
// "adj" matrix may be given instead of "edges". Graph-level
// y is a number or a flat array of c numbers; node-level y is one row per
// node. "task" is optional and defaults to regression at the level implied by
// the shape of y; mask is optional and shaped like y.
namespace jsonl {

using nlohmann::json;

inline json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json graph_to_json(const Graph& g, TaskKind task) {
  json j;
  j["task"] = std::string(to_string(task));
  j["n"] = g.n();
  json x = json::array();
  for (Eigen::Index i = 0; i < g.n(); ++i)
    for (Eigen::Index k = 0; k < g.d(); ++k) x.push_back(g.x()(i, k));
  j["x"] = std::move(x);
  json edges = json::array();
  for (Eigen::Index a = 0; a < g.n(); ++a)
    for (Eigen::Index b = a + 1; b < g.n(); ++b)
      if (g.adj()(a, b) != 0.0) edges.push_back({a, b});
  j["edges"] = std::move(edges);
  const Target& t = g.target();
  auto encode = [&](const Matrix& m) -> json {
    if (t.level == TargetLevel::node) return matrix_rows(m);
    if (m.cols() == 1) return m(0, 0);
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(0, k));
    return row;
  };
  j["y"] = encode(t.values);
  if (t.mask) j["mask"] = encode(*t.mask);
  return j;
}

inline void write_graph(std::ostream& os, const Graph& g, TaskKind task) {
  os << graph_to_json(g, task).dump() << '\n';
}

inline Matrix decode_target(const json& y, TargetLevel level, Eigen::Index n) {
  if (level == TargetLevel::graph) {
    if (y.is_number()) return Matrix::Constant(1, 1, y.get<double>());
    if (!y.is_array() || y.empty()) throw ParseError("graph-level y must be a number or nonempty array");
    Matrix m(1, static_cast<Eigen::Index>(y.size()));
    for (std::size_t k = 0; k < y.size(); ++k) m(0, static_cast<Eigen::Index>(k)) = y[k].get<double>();
    return m;
  }
  if (!y.is_array() || static_cast<Eigen::Index>(y.size()) != n)
    throw ParseError("node-level y must have one row per node");
  const auto c = static_cast<Eigen::Index>(y[0].is_array() ? y[0].size() : 1);
  Matrix m(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = y[static_cast<std::size_t>(i)];
    if (row.is_number()) {
      if (c != 1) throw ParseError("ragged node-level y");
      m(i, 0) = row.get<double>();
      continue;
    }
    if (static_cast<Eigen::Index>(row.size()) != c) throw ParseError("ragged node-level y");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

// Parses one line. The returned task is either the explicit "task" field or
// the one implied by the shape of y.
inline std::pair<Graph, TaskKind> graph_from_json(const json& j) {
  const auto n = j.at("n").get<Eigen::Index>();
  if (n < 1) throw ParseError("n must be positive");
  const json& xs = j.at("x");
  if (!xs.is_array() || xs.empty()) throw ParseError("x must be a nonempty array");
  Matrix x;
  if (xs[0].is_array()) {
    if (static_cast<Eigen::Index>(xs.size()) != n) throw ParseError("x has the wrong number of rows");
    const auto d = static_cast<Eigen::Index>(xs[0].size());
    x.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const json& row = xs[static_cast<std::size_t>(i)];
      if (static_cast<Eigen::Index>(row.size()) != d) throw ParseError("ragged x");
      for (Eigen::Index k = 0; k < d; ++k) x(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
  } else {
    if (static_cast<Eigen::Index>(xs.size()) % n != 0) throw ParseError("x length is not a multiple of n");
    const Eigen::Index d = static_cast<Eigen::Index>(xs.size()) / n;
    x.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < d; ++k) x(i, k) = xs[static_cast<std::size_t>(i * d + k)].get<double>();
  }

  Matrix adj = Matrix::Zero(n, n);
  if (j.contains("adj")) {
    // Dense alternative to "edges": n x n, nested rows or flat row-major.
    const json& a = j["adj"];
    const bool nested = a.is_array() && !a.empty() && a[0].is_array();
    if (!a.is_array() || (nested ? static_cast<Eigen::Index>(a.size()) != n : static_cast<Eigen::Index>(a.size()) != n * n))
      throw ParseError("adj must be n x n");
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) {
        const json& v = nested ? a[static_cast<std::size_t>(r)].at(static_cast<std::size_t>(c))
                               : a[static_cast<std::size_t>(r * n + c)];
        adj(r, c) = v.get<double>();
      }
  }
  for (const json& e : j.value("edges", json::array())) {
    if (!e.is_array() || e.size() != 2) throw ParseError("edge must be a pair");
    const auto a = e[0].get<Eigen::Index>(), b = e[1].get<Eigen::Index>();
    if (a < 0 || b < 0 || a >= n || b >= n) throw StructuralError("edge index out of range");
    if (a == b) throw StructuralError("self edge at node " + std::to_string(a));
    if (adj(a, b) != 0.0) throw StructuralError("duplicate edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
    adj(a, b) = adj(b, a) = 1.0;
  }

  const json& y = j.at("y");
  TaskKind task;
  if (j.contains("task")) {
    task = parse_task_kind(j["task"].get<std::string>());
  } else {
    const bool nested = y.is_array() && !y.empty() && y[0].is_array();
    task = nested ? TaskKind::node_regression : TaskKind::graph_regression;
  }
  Target t;
  t.level = is_node_level(task) ? TargetLevel::node : TargetLevel::graph;
  t.values = decode_target(y, t.level, n);
  if (j.contains("mask")) t.mask = decode_target(j["mask"], t.level, n);
  return {Graph(std::move(x), std::move(adj), std::move(t)), task};
}

}  // namespace jsonl

inline Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::size_t index = ds.graphs.size();
    try {
      auto j = nlohmann::json::parse(line);
      auto [g, task] = jsonl::graph_from_json(j);
      if (index == 0) {
        ds.task = task;
        ds.d = g.d();
        ds.c = g.target().dim();
      } else if (task != ds.task) {
        throw StructuralError("task " + std::string(to_string(task)) + " differs from " +
                              std::string(to_string(ds.task)));
      }
      ds.graphs.push_back(std::make_shared<const Graph>(std::move(g)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const StructuralError& e) {
      throw StructuralError("graph " + std::to_string(index) + " (line " + std::to_string(lineno) + "): " + e.what());
    }
  }
  ds.validate();
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path.string());
  return read_dataset(in);
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& g : ds.graphs) jsonl::write_graph(out, *g, ds.task);
  if (!out) throw Error("write failed for " + path.string());
}

// Deterministic seeded permutation of [0, n).
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};

// Seeded shuffle followed by a contiguous train/val/test partition.
inline std::tuple<Dataset, Dataset, Dataset> split_dataset(const Dataset& ds, SplitCounts counts, std::uint64_t seed) {
  if (counts.train + counts.val + counts.test > ds.size())
    throw ConfigError("split counts (" + std::to_string(counts.train) + ", " + std::to_string(counts.val) + ", " +
                      std::to_string(counts.test) + ") exceed dataset size " + std::to_string(ds.size()));
  const auto perm = seeded_permutation(ds.size(), seed);
  auto take = [&](std::size_t lo, std::size_t count) {
    return ds.subset(std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                                              perm.begin() + static_cast<std::ptrdiff_t>(lo + count)));
  };
  return {take(0, counts.train), take(counts.train, counts.val), take(counts.train + counts.val, counts.test)};
}

}  // namespace grant
