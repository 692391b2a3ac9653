#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grant/graph.hpp"
#include "grant/loss.hpp"
#include "grant/parallel.hpp"

// Flexible GCN: every layer aggregates kappa adjacency powers of its input
// with an independent weight block per power,
//
//   X^(l) = relu([X | A X | ... | A^(k-1) X] W^(l)),   l < L
//   out   = 1^T [X | A X | ... ] W^(L)   (sum pooling) or the n x c matrix itself.
//
// [X | A X | ...] is the product A^[k] diag(X; k) from graph.hpp, computed
// without materializing either factor.
namespace grant {

enum class Pooling { sum, none };

struct LayerSpec {
  std::vector<int> widths;  // h_0 ... h_L, h_0 = feature dim, h_L = output dim
  std::vector<int> kappas;  // kappa_1 ... kappa_L
  Pooling pooling = Pooling::sum;

  int layers() const { return static_cast<int>(kappas.size()); }
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }

  // Rows of W^(l) for 1-based layer l.
  int weight_rows(int l) const { return kappas[l - 1] * widths[l - 1]; }
  int weight_cols(int l) const { return widths[l]; }

  std::size_t param_count() const {
    std::size_t m = 0;
    for (int l = 1; l <= layers(); ++l)
      m += static_cast<std::size_t>(weight_rows(l)) * static_cast<std::size_t>(weight_cols(l));
    return m;
  }

  void validate() const {
    if (kappas.empty()) throw ConfigError("layer spec needs at least one layer");
    if (widths.size() != kappas.size() + 1)
      throw ConfigError("layer spec has " + std::to_string(widths.size()) + " widths for " +
                        std::to_string(kappas.size()) + " layers");
    for (int h : widths)
      if (h < 1) throw ConfigError("layer widths must be positive");
    for (int k : kappas)
      if (k < 1) throw ConfigError("convolutional orders must be positive");
  }

  bool operator==(const LayerSpec&) const = default;
};

// Per-layer weights; weights[l-1] is W^(l) with shape (kappa_l h_(l-1)) x h_l.
struct GcnParams {
  std::vector<Matrix> weights;

  // theta: layer blocks from the last layer to the first, each block
  // column-major (column 1 of W^(l), then column 2, ...).
  Vector flatten() const {
    Eigen::Index m = 0;
    for (const auto& w : weights) m += w.size();
    Vector theta(m);
    Eigen::Index at = 0;
    for (auto it = weights.rbegin(); it != weights.rend(); ++it) {
      theta.segment(at, it->size()) = Eigen::Map<const Vector>(it->data(), it->size());
      at += it->size();
    }
    return theta;
  }

  static GcnParams unflatten(const LayerSpec& spec, const Vector& theta) {
    if (static_cast<std::size_t>(theta.size()) != spec.param_count())
      throw StructuralError("parameter vector has " + std::to_string(theta.size()) + " entries, spec needs " +
                            std::to_string(spec.param_count()));
    GcnParams p;
    p.weights.resize(spec.layers());
    Eigen::Index at = 0;
    for (int l = spec.layers(); l >= 1; --l) {
      Matrix w(spec.weight_rows(l), spec.weight_cols(l));
      w = Eigen::Map<const Matrix>(theta.data() + at, w.rows(), w.cols());
      at += w.size();
      p.weights[l - 1] = std::move(w);
    }
    return p;
  }

  bool matches(const LayerSpec& spec) const {
    if (static_cast<int>(weights.size()) != spec.layers()) return false;
    for (int l = 1; l <= spec.layers(); ++l)
      if (weights[l - 1].rows() != spec.weight_rows(l) || weights[l - 1].cols() != spec.weight_cols(l)) return false;
    return true;
  }
};

// Zero-mean Gaussian init with std scale / sqrt(fan_in), fan_in = kappa_l h_(l-1).
inline GcnParams init_params(const LayerSpec& spec, std::uint64_t seed, double scale = 1.0) {
  spec.validate();
  if (!(scale > 0.0)) throw ConfigError("init scale must be positive");
  std::mt19937_64 rng(seed);
  GcnParams p;
  for (int l = 1; l <= spec.layers(); ++l) {
    std::normal_distribution<double> dist(0.0, scale / std::sqrt(static_cast<double>(spec.weight_rows(l))));
    Matrix w(spec.weight_rows(l), spec.weight_cols(l));
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
    p.weights.push_back(std::move(w));
  }
  return p;
}

// [X | A X | ... | A^(kappa-1) X], i.e. A^[kappa] diag(X; kappa).
inline Matrix lift(const Matrix& adj, const Matrix& x, int kappa) {
  const Eigen::Index n = x.rows(), h = x.cols();
  Matrix z(n, kappa * h);
  z.leftCols(h) = x;
  for (int k = 1; k < kappa; ++k) z.middleCols(k * h, h).noalias() = adj * z.middleCols((k - 1) * h, h);
  return z;
}

// Adjoint of lift: sum_k (A^k)^T dZ_k, evaluated Horner-style.
inline Matrix lift_adjoint(const Matrix& adj, const Matrix& dz, int kappa) {
  const Eigen::Index h = dz.cols() / kappa;
  Matrix acc = dz.middleCols((kappa - 1) * h, h);
  for (int k = kappa - 2; k >= 0; --k) acc = (dz.middleCols(k * h, h) + adj.transpose() * acc).eval();
  return acc;
}

struct ForwardCache {
  std::vector<Matrix> lifted;  // lifted[l-1] = A^[k_l] diag(X^(l-1); k_l)
  std::vector<Matrix> pre;     // pre[l-1]    = lifted[l-1] * W^(l)
  // ReLU outputs of the hidden layers are max(pre, 0); the derivative mask is
  // (pre > 0), with the subgradient at exactly 0 taken as 0.
};

struct ForwardResult {
  Matrix output;  // 1 x c with sum pooling, n x c without
  ForwardCache cache;
};

inline void check_input(const LayerSpec& spec, const GcnParams& params, const Graph& g) {
  if (g.d() != spec.input_dim())
    throw StructuralError("graph has feature dimension " + std::to_string(g.d()) + ", model expects " +
                          std::to_string(spec.input_dim()));
  if (!params.matches(spec)) throw StructuralError("parameters do not match the layer spec");
}

inline ForwardResult forward(const GcnParams& params, const LayerSpec& spec, const Graph& g) {
  check_input(spec, params, g);
  ForwardResult r;
  r.cache.lifted.reserve(spec.layers());
  r.cache.pre.reserve(spec.layers());
  Matrix x = g.x();
  for (int l = 1; l <= spec.layers(); ++l) {
    r.cache.lifted.push_back(lift(g.adj(), x, spec.kappas[l - 1]));
    r.cache.pre.push_back(r.cache.lifted.back() * params.weights[l - 1]);
    if (l < spec.layers()) x = r.cache.pre.back().cwiseMax(0.0);
  }
  const Matrix& last = r.cache.pre.back();
  r.output = spec.pooling == Pooling::sum ? Matrix(last.colwise().sum()) : last;
  return r;
}

// Reverse pass. d_output has the shape of the forward output; returns
// dL/dW^(l) for every layer, shaped like the weights.
inline GcnParams backward(const GcnParams& params, const LayerSpec& spec, const Graph& g, const ForwardCache& cache,
                          const Matrix& d_output) {
  const Eigen::Index n = g.n();
  if (static_cast<int>(cache.pre.size()) != spec.layers() || cache.pre.back().rows() != n)
    throw StructuralError("forward cache does not belong to this graph/spec");
  Matrix d_pre;
  if (spec.pooling == Pooling::sum) {
    if (d_output.rows() != 1 || d_output.cols() != spec.output_dim())
      throw StructuralError("output gradient shape mismatch");
    d_pre = d_output.replicate(n, 1);
  } else {
    if (d_output.rows() != n || d_output.cols() != spec.output_dim())
      throw StructuralError("output gradient shape mismatch");
    d_pre = d_output;
  }
  GcnParams grad;
  grad.weights.resize(spec.layers());
  for (int l = spec.layers(); l >= 1; --l) {
    grad.weights[l - 1].noalias() = cache.lifted[l - 1].transpose() * d_pre;
    if (l == 1) break;
    Matrix d_lifted = d_pre * params.weights[l - 1].transpose();
    Matrix d_x = lift_adjoint(g.adj(), d_lifted, spec.kappas[l - 1]);
    const Matrix& below = cache.pre[l - 2];
    d_pre = (below.array() > 0.0).select(d_x, 0.0);
  }
  return grad;
}

// d f / d theta for every scalar output coordinate: an m x k matrix whose
// column j is the flattened gradient of output j. Graph-level outputs are
// ordered by column; node-level outputs by (node, column) row-major.
inline Matrix output_jacobian(const GcnParams& params, const LayerSpec& spec, const Graph& g,
                              const ForwardCache& cache) {
  check_input(spec, params, g);
  const Eigen::Index rows = spec.pooling == Pooling::sum ? 1 : g.n();
  const Eigen::Index cols = spec.output_dim();
  Matrix jac(static_cast<Eigen::Index>(spec.param_count()), rows * cols);
  Matrix seed = Matrix::Zero(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) {
      seed(i, k) = 1.0;
      jac.col(i * cols + k) = backward(params, spec, g, cache, seed).flatten();
      seed(i, k) = 0.0;
    }
  }
  return jac;
}

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

// Batch-mean loss and its gradient in flattened theta layout. Per-graph
// gradients land in their own slot and are summed in index order, so the
// result is independent of the worker count.
inline LossGrad loss_grad(const GcnParams& params, const LayerSpec& spec, std::span<const GraphPtr> batch,
                          LossKind loss) {
  if (batch.empty()) throw ConfigError("loss_grad: empty batch");
  std::vector<double> losses(batch.size());
  std::vector<Vector> grads(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    const Graph& g = *batch[i];
    auto fr = forward(params, spec, g);
    auto lv = graph_loss(fr.output, g.target(), loss);
    losses[i] = lv.value;
    grads[i] = backward(params, spec, g, fr.cache, lv.d_output).flatten();
  });
  LossGrad out;
  out.grad = Vector::Zero(static_cast<Eigen::Index>(spec.param_count()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss += losses[i];
    out.grad += grads[i];
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  out.loss *= scale;
  out.grad *= scale;
  return out;
}

inline LossGrad loss_grad(const GcnParams& params, const LayerSpec& spec, const std::vector<GraphPtr>& batch,
                          LossKind loss) {
  return loss_grad(params, spec, std::span<const GraphPtr>(batch), loss);
}

// Forward pass over many graphs, outputs in input order.
inline std::vector<Matrix> predict(const GcnParams& params, const LayerSpec& spec, std::span<const GraphPtr> graphs) {
  std::vector<Matrix> out(graphs.size());
  parallel_for(graphs.size(), [&](std::size_t i) { out[i] = forward(params, spec, *graphs[i]).output; });
  return out;
}

}  // namespace grant
