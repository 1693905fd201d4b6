#pragma once

#include "realuid/nets.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace realuid {

/// Checkpoints are a `<prefix>.manifest.json` / `<prefix>.params.bin` pair:
/// the manifest describes the network and lists parameter segments in blob
/// order; the blob is the little-endian 64-bit-real concatenation of those
/// segments.
struct Checkpoint {
  nlohmann::json manifest;
  std::vector<double> blob;

  std::span<const double> segment(const std::string& name) const;
};

void save_checkpoint(const std::string& prefix, const nlohmann::json& manifest,
                     std::span<const double> blob);
Checkpoint load_checkpoint(const std::string& prefix);

nlohmann::json mlp_manifest(const Mlp& net);
Mlp mlp_from_manifest(const nlohmann::json& manifest, std::span<const double> params);

nlohmann::json generator_manifest(const Generator& gen, bool with_ema);
Generator generator_from_manifest(const nlohmann::json& manifest, std::span<const double> params);

}  // namespace realuid
