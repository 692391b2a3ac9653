#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grant/error.hpp"

namespace grant {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class TaskKind { graph_regression, graph_classification, node_regression, node_classification };

inline bool is_node_level(TaskKind k) {
  return k == TaskKind::node_regression || k == TaskKind::node_classification;
}
inline bool is_classification(TaskKind k) {
  return k == TaskKind::graph_classification || k == TaskKind::node_classification;
}

inline std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::graph_regression: return "graph-regression";
    case TaskKind::graph_classification: return "graph-classification";
    case TaskKind::node_regression: return "node-regression";
    case TaskKind::node_classification: return "node-classification";
  }
  return "?";
}

inline TaskKind parse_task_kind(std::string_view s) {
  if (s == "graph-regression") return TaskKind::graph_regression;
  if (s == "graph-classification") return TaskKind::graph_classification;
  if (s == "node-regression") return TaskKind::node_regression;
  if (s == "node-classification") return TaskKind::node_classification;
  throw ConfigError("unknown task kind '" + std::string(s) + "'");
}

enum class TargetLevel { graph, node };

// Property attached to a graph. Graph-level targets are stored as a 1 x c
// row, node-level targets as n x c (one row per node). The optional mask has
// the same shape; 0 marks a missing label.
struct Target {
  TargetLevel level = TargetLevel::graph;
  Matrix values;
  std::optional<Matrix> mask;

  static Target graph_level(double y) {
    Target t;
    t.values = Matrix::Constant(1, 1, y);
    return t;
  }
  static Target node_level(Matrix y) {
    Target t;
    t.level = TargetLevel::node;
    t.values = std::move(y);
    return t;
  }

  Eigen::Index dim() const { return values.cols(); }
};

// A single attributed graph G = (X, A) with its property. Immutable once
// constructed; the constructor enforces the structural invariants.
class Graph {
 public:
  Graph(Matrix x, Matrix adj, Target target = {})
      : x_(std::move(x)), adj_(std::move(adj)), target_(std::move(target)) {
    validate();
  }

  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index d() const { return x_.cols(); }
  const Matrix& x() const { return x_; }
  const Matrix& adj() const { return adj_; }
  const Target& target() const { return target_; }

  // Same structure and features with a different target.
  Graph with_target(Target t) const { return Graph(x_, adj_, std::move(t)); }

  std::size_t edge_count() const {
    std::size_t e = 0;
    for (Eigen::Index i = 0; i < n(); ++i)
      for (Eigen::Index j = i + 1; j < n(); ++j)
        if (adj_(i, j) != 0.0) ++e;
    return e;
  }

 private:
  void validate() const {
    if (x_.rows() < 1) throw StructuralError("graph must have at least one node");
    if (adj_.rows() != adj_.cols()) throw StructuralError("adjacency matrix is not square");
    if (adj_.rows() != x_.rows())
      throw StructuralError("feature matrix has " + std::to_string(x_.rows()) +
                            " rows but adjacency is " + std::to_string(adj_.rows()) + "x" +
                            std::to_string(adj_.cols()));
    for (Eigen::Index i = 0; i < adj_.rows(); ++i) {
      if (adj_(i, i) != 0.0) throw StructuralError("adjacency has a self loop at node " + std::to_string(i));
      for (Eigen::Index j = i + 1; j < adj_.cols(); ++j)
        if (adj_(i, j) != adj_(j, i)) throw StructuralError("adjacency is not symmetric");
    }
    if (target_.values.size() > 0) {
      if (target_.level == TargetLevel::graph && target_.values.rows() != 1)
        throw StructuralError("graph-level target must be a single row");
      if (target_.level == TargetLevel::node && target_.values.rows() != n())
        throw StructuralError("node-level target has " + std::to_string(target_.values.rows()) +
                              " rows, expected " + std::to_string(n()));
    }
    if (target_.mask && (target_.mask->rows() != target_.values.rows() ||
                         target_.mask->cols() != target_.values.cols()))
      throw StructuralError("label mask shape differs from target shape");
  }

  Matrix x_;
  Matrix adj_;
  Target target_;
};

using GraphPtr = std::shared_ptr<const Graph>;

// Ordered graph collection sharing a feature dimension and task kind. Graphs
// are held by shared pointer so splits and subsets never copy adjacency data.
struct Dataset {
  std::vector<GraphPtr> graphs;
  TaskKind task = TaskKind::graph_regression;
  Eigen::Index d = 0;
  Eigen::Index c = 0;

  std::size_t size() const { return graphs.size(); }
  bool empty() const { return graphs.empty(); }
  const Graph& operator[](std::size_t i) const { return *graphs[i]; }

  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset out{{}, task, d, c};
    out.graphs.reserve(idx.size());
    for (auto i : idx) out.graphs.push_back(graphs.at(i));
    return out;
  }

  // Throws naming the first graph that breaks a dataset-wide invariant.
  void validate() const {
    const TargetLevel want = is_node_level(task) ? TargetLevel::node : TargetLevel::graph;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const Graph& g = *graphs[i];
      auto fail = [&](const std::string& why) {
        throw StructuralError("graph " + std::to_string(i) + ": " + why);
      };
      if (g.d() != d) fail("feature dimension " + std::to_string(g.d()) + " != " + std::to_string(d));
      if (g.target().level != want) fail("target level does not match task " + std::string(to_string(task)));
      if (g.target().dim() != c) fail("target dimension " + std::to_string(g.target().dim()) + " != " + std::to_string(c));
    }
  }
};

// Lifted adjacency [A^0 | A^1 | ... | A^(kappa-1)], an n x (kappa n) matrix.
inline Matrix adjacency_concat(const Matrix& adj, int kappa) {
  if (adj.rows() != adj.cols()) throw StructuralError("adjacency_concat: adjacency is not square");
  if (kappa < 1) throw StructuralError("adjacency_concat: kappa must be >= 1");
  const Eigen::Index n = adj.rows();
  Matrix out(n, kappa * n);
  Matrix power = Matrix::Identity(n, n);
  for (int k = 0; k < kappa; ++k) {
    out.middleCols(k * n, n) = power;
    if (k + 1 < kappa) power = (power * adj).eval();
  }
  return out;
}

// diag(X; kappa): kappa copies of x on the block diagonal.
inline Matrix block_diag_features(const Matrix& x, int kappa) {
  if (kappa < 1) throw StructuralError("block_diag_features: kappa must be >= 1");
  const Eigen::Index n = x.rows(), d = x.cols();
  Matrix out = Matrix::Zero(kappa * n, kappa * d);
  for (int k = 0; k < kappa; ++k) out.block(k * n, k * d, n, d) = x;
  return out;
}

}  // namespace grant
