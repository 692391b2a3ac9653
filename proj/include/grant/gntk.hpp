#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "grant/checkpoint.hpp"
#include "grant/flexgcn.hpp"

// Graph neural tangent kernel of a finite-width flexible GCN,
//   K_theta(G, G') = < d f_theta(G) / d theta, d f_theta(G') / d theta >,
// for scalar graph-level outputs.
namespace grant {

struct KernelMatrix {
  Matrix entries;
  std::vector<std::size_t> graph_ids;
  std::string theta_tag;

  std::size_t size() const { return graph_ids.size(); }
};

inline void require_scalar_graph_output(const LayerSpec& spec) {
  if (spec.pooling != Pooling::sum || spec.output_dim() != 1)
    throw ConfigError("GNTK is only defined here for scalar graph-level outputs (sum pooling, output dim 1)");
}

// Flattened d f / d theta for one graph.
inline Vector graph_jacobian(const GcnParams& params, const LayerSpec& spec, const Graph& g) {
  require_scalar_graph_output(spec);
  auto fr = forward(params, spec, g);
  return output_jacobian(params, spec, g, fr.cache).col(0);
}

inline double gntk_entry(const GcnParams& params, const LayerSpec& spec, const Graph& g1, const Graph& g2) {
  return graph_jacobian(params, spec, g1).dot(graph_jacobian(params, spec, g2));
}

// All N jacobians once, then the Gram matrix entry by entry.
inline KernelMatrix gntk_matrix(const GcnParams& params, const LayerSpec& spec, std::span<const GraphPtr> graphs,
                                std::vector<std::size_t> ids = {}) {
  require_scalar_graph_output(spec);
  const std::size_t n = graphs.size();
  if (ids.empty()) {
    ids.resize(n);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
  }
  if (ids.size() != n) throw StructuralError("gntk_matrix: graph id count differs from graph count");
  std::vector<Vector> jac(n);
  parallel_for(n, [&](std::size_t i) { jac[i] = graph_jacobian(params, spec, *graphs[i]); });
  KernelMatrix k{Matrix(n, n), std::move(ids), theta_tag(params)};
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i; j < n; ++j) k.entries(i, j) = jac[i].dot(jac[j]);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) k.entries(i, j) = k.entries(j, i);
  return k;
}

inline KernelMatrix gntk_matrix(const GcnParams& params, const LayerSpec& spec, const std::vector<GraphPtr>& graphs,
                                std::vector<std::size_t> ids = {}) {
  return gntk_matrix(params, spec, std::span<const GraphPtr>(graphs), std::move(ids));
}

// Frobenius distance between two kernels over the same graph list.
inline double kernel_drift(const KernelMatrix& a, const KernelMatrix& b) {
  if (a.graph_ids != b.graph_ids) throw StructuralError("kernel_drift: kernels cover different graph sets");
  return (a.entries - b.entries).norm();
}

inline double min_eigenvalue(const KernelMatrix& k) {
  if (k.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(k.entries, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline void write_kernel_csv(const KernelMatrix& k, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "graph_id";
  for (auto id : k.graph_ids) out << ',' << id;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < k.size(); ++i) {
    out << k.graph_ids[i];
    for (std::size_t j = 0; j < k.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", k.entries(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

// Binary kernel checkpoint: "GNTK", u32 version, u32 tag length, tag bytes,
// u64 N, N u64 graph ids, N*N f64 entries (row-major), all little-endian host order.
inline void save_kernel_binary(const KernelMatrix& k, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  out.write("GNTK", 4);
  put(std::uint32_t{1});
  put(static_cast<std::uint32_t>(k.theta_tag.size()));
  out.write(k.theta_tag.data(), static_cast<std::streamsize>(k.theta_tag.size()));
  put(static_cast<std::uint64_t>(k.size()));
  for (auto id : k.graph_ids) put(static_cast<std::uint64_t>(id));
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j) put(k.entries(i, j));
}

inline KernelMatrix load_kernel_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  auto get = [&](auto& v) {
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError("truncated kernel file " + path.string());
  };
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "GNTK") throw ParseError("not a GNTK kernel file");
  std::uint32_t version = 0, tag_len = 0;
  get(version);
  if (version != 1) throw ParseError("unsupported kernel file version");
  get(tag_len);
  KernelMatrix k;
  k.theta_tag.resize(tag_len);
  if (!in.read(k.theta_tag.data(), tag_len)) throw ParseError("truncated kernel file " + path.string());
  std::uint64_t n = 0;
  get(n);
  k.graph_ids.resize(n);
  for (auto& id : k.graph_ids) {
    std::uint64_t v;
    get(v);
    id = static_cast<std::size_t>(v);
  }
  k.entries.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < n; ++j) get(k.entries(i, j));
  return k;
}

}  // namespace grant
