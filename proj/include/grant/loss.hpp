#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "grant/graph.hpp"

namespace grant {

enum class LossKind { mse, bce_with_logits };

inline std::string_view to_string(LossKind k) { return k == LossKind::mse ? "mse" : "bce"; }

inline LossKind parse_loss_kind(std::string_view s) {
  if (s == "mse") return LossKind::mse;
  if (s == "bce" || s == "bce-with-logits") return LossKind::bce_with_logits;
  throw ConfigError("unknown loss '" + std::string(s) + "'");
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct LossValue {
  double value = 0.0;
  Matrix d_output;  // dL/d(output), same shape as the output
};

// Per-graph loss: the mean over unmasked target entries of the elementwise
// loss. mse uses 1/2 (p - y)^2, so a scalar regression target has unit
// smoothness constant. A graph with every label masked contributes zero.
inline LossValue graph_loss(const Matrix& output, const Target& target, LossKind kind) {
  if (output.rows() != target.values.rows() || output.cols() != target.values.cols())
    throw StructuralError("output shape does not match target shape");
  LossValue lv;
  lv.d_output = Matrix::Zero(output.rows(), output.cols());
  double count = 0.0;
  for (Eigen::Index i = 0; i < output.rows(); ++i) {
    for (Eigen::Index k = 0; k < output.cols(); ++k) {
      if (target.mask && (*target.mask)(i, k) == 0.0) continue;
      const double p = output(i, k), y = target.values(i, k);
      if (kind == LossKind::mse) {
        const double r = p - y;
        lv.value += 0.5 * r * r;
        lv.d_output(i, k) = r;
      } else {
        // log(1 + e^p) - y p, written to avoid overflow.
        lv.value += std::max(p, 0.0) - p * y + std::log1p(std::exp(-std::abs(p)));
        lv.d_output(i, k) = sigmoid(p) - y;
      }
      count += 1.0;
    }
  }
  if (count > 0) {
    lv.value /= count;
    lv.d_output /= count;
  }
  return lv;
}

}  // namespace grant
