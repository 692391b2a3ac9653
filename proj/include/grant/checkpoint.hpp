#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "grant/flexgcn.hpp"

namespace grant {

// FNV-1a over the raw bytes of theta; identifies a parameter state.
inline std::string theta_tag(const GcnParams& params) {
  const Vector theta = params.flatten();
  std::uint64_t h = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(theta.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(theta.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Checkpoint {
  LayerSpec spec;
  GcnParams params;
  long epoch = -1;
};

// JSON checkpoint: layer spec plus row-major weights per layer. Doubles are
// written in shortest round-trip form, so save -> load is exact.
inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["format"] = "grant-gcn";
  j["version"] = 1;
  j["widths"] = ck.spec.widths;
  j["kappas"] = ck.spec.kappas;
  j["pooling"] = ck.spec.pooling == Pooling::sum ? "sum" : "none";
  j["epoch"] = ck.epoch;
  j["theta_tag"] = theta_tag(ck.params);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& w : ck.params.weights) {
    nlohmann::json flat = nlohmann::json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    layers.push_back(std::move(flat));
  }
  j["weights"] = std::move(layers);
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "grant-gcn") throw ParseError("not a grant-gcn checkpoint");
  if (j.value("version", 0) != 1) throw ParseError("unsupported checkpoint version");
  Checkpoint ck;
  ck.spec.widths = j.at("widths").get<std::vector<int>>();
  ck.spec.kappas = j.at("kappas").get<std::vector<int>>();
  const auto pooling = j.at("pooling").get<std::string>();
  if (pooling != "sum" && pooling != "none") throw ParseError("unknown pooling '" + pooling + "'");
  ck.spec.pooling = pooling == "sum" ? Pooling::sum : Pooling::none;
  ck.spec.validate();
  ck.epoch = j.value("epoch", -1L);
  const auto& layers = j.at("weights");
  if (static_cast<int>(layers.size()) != ck.spec.layers()) throw ParseError("checkpoint layer count mismatch");
  for (int l = 1; l <= ck.spec.layers(); ++l) {
    const auto& flat = layers[static_cast<std::size_t>(l - 1)];
    Matrix w(ck.spec.weight_rows(l), ck.spec.weight_cols(l));
    if (static_cast<Eigen::Index>(flat.size()) != w.size()) throw ParseError("checkpoint weight size mismatch");
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[static_cast<std::size_t>(r * w.cols() + c)].get<double>();
    ck.params.weights.push_back(std::move(w));
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ck).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace grant
