#pragma once

// Reference implementations used only by tests. None of them reuse the code
// paths they check: finite differences only call forward(), the MLP oracle
// works on plain std::vector loops, and the metric/selection oracles
// enumerate pairs, thresholds and full sorts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "grant/grant.hpp"

namespace oracle {

using grant::GcnParams;
using grant::Graph;
using grant::LayerSpec;
using grant::Matrix;
using grant::Vector;

// Output flattened row-major, matching output_jacobian's column order.
inline Vector flat_output(const GcnParams& p, const LayerSpec& spec, const Graph& g) {
  const Matrix out = grant::forward(p, spec, g).output;
  Vector v(out.size());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index k = 0; k < out.cols(); ++k) v(i * out.cols() + k) = out(i, k);
  return v;
}

// Sign pattern of every hidden pre-activation.
inline std::vector<bool> relu_pattern(const GcnParams& p, const LayerSpec& spec, const Graph& g) {
  auto fr = grant::forward(p, spec, g);
  std::vector<bool> bits;
  for (std::size_t l = 0; l + 1 < fr.cache.pre.size(); ++l)
    for (Eigen::Index k = 0; k < fr.cache.pre[l].size(); ++k) bits.push_back(fr.cache.pre[l].data()[k] > 0.0);
  return bits;
}

inline double min_abs_preactivation(const GcnParams& p, const LayerSpec& spec, const Graph& g) {
  auto fr = grant::forward(p, spec, g);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < fr.cache.pre.size(); ++l) m = std::min(m, fr.cache.pre[l].cwiseAbs().minCoeff());
  return m;
}

struct FdJacobian {
  Matrix jac;                 // m x outputs
  std::vector<bool> at_kink;  // per theta coordinate: a ReLU flips within +-step
};

inline FdJacobian fd_jacobian(const GcnParams& p, const LayerSpec& spec, const Graph& g, double step = 1e-5) {
  const Vector theta = p.flatten();
  const auto base_pattern = relu_pattern(p, spec, g);
  const Eigen::Index outs = flat_output(p, spec, g).size();
  FdJacobian r{Matrix(theta.size(), outs), std::vector<bool>(static_cast<std::size_t>(theta.size()))};
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vector plus = theta, minus = theta;
    plus(i) += step;
    minus(i) -= step;
    const auto pp = GcnParams::unflatten(spec, plus), pm = GcnParams::unflatten(spec, minus);
    r.jac.row(i) = (flat_output(pp, spec, g) - flat_output(pm, spec, g)).transpose() / (2.0 * step);
    r.at_kink[static_cast<std::size_t>(i)] = relu_pattern(pp, spec, g) != base_pattern ||
                                             relu_pattern(pm, spec, g) != base_pattern;
  }
  return r;
}

inline double batch_loss(const GcnParams& p, const LayerSpec& spec, const std::vector<grant::GraphPtr>& batch,
                         grant::LossKind loss) {
  double s = 0.0;
  for (const auto& g : batch) s += grant::graph_loss(grant::forward(p, spec, *g).output, g->target(), loss).value;
  return s / static_cast<double>(batch.size());
}

inline Vector fd_loss_grad(const GcnParams& p, const LayerSpec& spec, const std::vector<grant::GraphPtr>& batch,
                           grant::LossKind loss, double step = 1e-5) {
  const Vector theta = p.flatten();
  Vector grad(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vector plus = theta, minus = theta;
    plus(i) += step;
    minus(i) -= step;
    grad(i) = (batch_loss(GcnParams::unflatten(spec, plus), spec, batch, loss) -
               batch_loss(GcnParams::unflatten(spec, minus), spec, batch, loss)) /
              (2.0 * step);
  }
  return grad;
}

// Relative error with a unit floor on the denominator.
inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

// ---------------------------------------------------------------------------
// Plain MLP applied row-wise to node features, written with std::vector loops.

using Mat = std::vector<std::vector<double>>;  // row-major

inline Mat to_mat(const Matrix& m) {
  Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

struct Mlp {
  std::vector<Mat> w;  // w[l]: in x out
  bool sum_pool = true;

  // Per-node activations; acts[l] is the input to layer l.
  std::vector<std::vector<double>> node_forward(const std::vector<double>& x,
                                                std::vector<std::vector<double>>* pre = nullptr) const {
    std::vector<std::vector<double>> acts{x};
    for (std::size_t l = 0; l < w.size(); ++l) {
      std::vector<double> z(w[l][0].size(), 0.0);
      for (std::size_t i = 0; i < w[l].size(); ++i)
        for (std::size_t j = 0; j < z.size(); ++j) z[j] += acts.back()[i] * w[l][i][j];
      if (pre) pre->push_back(z);
      if (l + 1 < w.size())
        for (auto& v : z) v = v > 0.0 ? v : 0.0;
      acts.push_back(z);
    }
    return acts;
  }

  Mat forward(const Mat& x) const {
    Mat per_node;
    for (const auto& row : x) per_node.push_back(node_forward(row).back());
    if (!sum_pool) return per_node;
    std::vector<double> pooled(per_node[0].size(), 0.0);
    for (const auto& r : per_node)
      for (std::size_t j = 0; j < r.size(); ++j) pooled[j] += r[j];
    return {pooled};
  }

  // Gradient of sum_{i,j} seed[i][j] * out[i][j] w.r.t. every weight,
  // accumulated node by node (the MLP "batch" is the node set).
  std::vector<Mat> backward(const Mat& x, const Mat& seed) const {
    std::vector<Mat> grad;
    for (const auto& m : w) grad.emplace_back(m.size(), std::vector<double>(m[0].size(), 0.0));
    for (std::size_t node = 0; node < x.size(); ++node) {
      std::vector<std::vector<double>> pre;
      const auto acts = node_forward(x[node], &pre);
      std::vector<double> delta = sum_pool ? seed[0] : seed[node];
      for (std::size_t l = w.size(); l-- > 0;) {
        for (std::size_t i = 0; i < w[l].size(); ++i)
          for (std::size_t j = 0; j < delta.size(); ++j) grad[l][i][j] += acts[l][i] * delta[j];
        if (l == 0) break;
        std::vector<double> below(w[l].size(), 0.0);
        for (std::size_t i = 0; i < w[l].size(); ++i)
          for (std::size_t j = 0; j < delta.size(); ++j) below[i] += w[l][i][j] * delta[j];
        for (std::size_t i = 0; i < below.size(); ++i) below[i] = pre[l - 1][i] > 0.0 ? below[i] : 0.0;
        delta = below;
      }
    }
    return grad;
  }

  // Same layout as GcnParams::flatten: last layer first, column-major.
  static Vector flatten(const std::vector<Mat>& ws) {
    std::vector<double> out;
    for (std::size_t l = ws.size(); l-- > 0;)
      for (std::size_t j = 0; j < ws[l][0].size(); ++j)
        for (std::size_t i = 0; i < ws[l].size(); ++i) out.push_back(ws[l][i][j]);
    return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
  }
};

inline Mlp mlp_from(const GcnParams& p, const LayerSpec& spec) {
  Mlp m;
  m.sum_pool = spec.pooling == grant::Pooling::sum;
  for (const auto& w : p.weights) m.w.push_back(to_mat(w));
  return m;
}

// ---------------------------------------------------------------------------
// Metrics by enumeration.

inline double auc_pairs(const std::vector<double>& s, const std::vector<double>& y) {
  double concordant = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!(y[i] > 0.5 && y[j] <= 0.5)) continue;
      pairs += 1.0;
      if (s[i] > s[j]) concordant += 1.0;
      else if (s[i] == s[j]) concordant += 0.5;
    }
  return concordant / pairs;
}

// For each distinct threshold t (descending), predict positive iff s >= t;
// AP = sum of (recall increase) * precision.
inline double ap_thresholds(const std::vector<double>& s, const std::vector<double>& y) {
  std::vector<double> th = s;
  std::sort(th.begin(), th.end(), std::greater<>());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  double total_pos = 0.0;
  for (double v : y) total_pos += v > 0.5 ? 1.0 : 0.0;
  double ap = 0.0, prev_tp = 0.0;
  for (double t : th) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) (y[i] > 0.5 ? tp : fp) += 1.0;
    if (tp > prev_tp) ap += ((tp - prev_tp) / total_pos) * (tp / (tp + fp));
    prev_tp = tp;
  }
  return ap;
}

// ---------------------------------------------------------------------------
// Selection by full stable sort.

inline std::vector<std::size_t> top_m_by_sort(const std::vector<double>& scores, std::size_t m) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  idx.resize(m);
  return idx;
}

// ---------------------------------------------------------------------------
// Random instances.

inline Graph random_graph(std::mt19937_64& rng, int n, int d, double density = 0.4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix adj = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (u(rng) < density) adj(i, j) = adj(j, i) = 1.0;
  Matrix x(n, d);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = nd(rng);
  return Graph(std::move(x), std::move(adj));
}

// Random flexible-GCN instance: n <= max_n nodes, L <= max_layers layers,
// hidden widths <= max_h, orders <= max_kappa.
struct RandomCase {
  LayerSpec spec;
  GcnParams params;
  Graph graph;
};

inline RandomCase random_case(std::mt19937_64& rng, grant::Pooling pooling, int max_n = 10, int max_layers = 3,
                              int max_h = 8, int max_kappa = 4) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  LayerSpec spec;
  spec.pooling = pooling;
  const int layers = pick(1, max_layers);
  spec.widths.push_back(pick(1, max_h));
  for (int l = 1; l <= layers; ++l) {
    spec.widths.push_back(l == layers ? pick(1, 3) : pick(1, max_h));
    spec.kappas.push_back(pick(1, max_kappa));
  }
  const int n = pick(1, max_n);
  Graph g = random_graph(rng, n, spec.widths.front(), std::uniform_real_distribution<double>(0.1, 0.6)(rng));
  auto params = grant::init_params(spec, rng());
  return {spec, std::move(params), std::move(g)};
}

}  // namespace oracle
