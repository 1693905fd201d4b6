#include "realuid/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace realuid {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; byte swapping is not implemented");

std::span<const double> Checkpoint::segment(const std::string& name) const {
  size_t off = 0;
  for (const auto& seg : manifest.at("segments")) {
    const size_t count = seg.at("count").get<size_t>();
    if (seg.at("name").get<std::string>() == name) {
      if (off + count > blob.size()) throw std::runtime_error("checkpoint blob shorter than manifest");
      return {blob.data() + off, count};
    }
    off += count;
  }
  throw std::runtime_error("checkpoint has no segment '" + name + "'");
}

void save_checkpoint(const std::string& prefix, const json& manifest, std::span<const double> blob) {
  {
    std::ofstream f(prefix + ".manifest.json");
    if (!f) throw std::runtime_error("cannot write " + prefix + ".manifest.json");
    f << manifest.dump(2) << "\n";
  }
  std::ofstream f(prefix + ".params.bin", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + prefix + ".params.bin");
  f.write(reinterpret_cast<const char*>(blob.data()),
          static_cast<std::streamsize>(blob.size() * sizeof(double)));
}

Checkpoint load_checkpoint(const std::string& prefix) {
  Checkpoint ck;
  {
    std::ifstream f(prefix + ".manifest.json");
    if (!f) throw std::runtime_error("cannot open " + prefix + ".manifest.json");
    f >> ck.manifest;
  }
  std::ifstream f(prefix + ".params.bin", std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + prefix + ".params.bin");
  f.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(f.tellg());
  f.seekg(0);
  if (bytes % sizeof(double) != 0)
    throw std::runtime_error(prefix + ".params.bin length is not a multiple of 8");
  ck.blob.resize(bytes / sizeof(double));
  f.read(reinterpret_cast<char*>(ck.blob.data()), static_cast<std::streamsize>(bytes));
  size_t expect = 0;
  for (const auto& seg : ck.manifest.at("segments")) expect += seg.at("count").get<size_t>();
  if (expect != ck.blob.size())
    throw std::runtime_error("checkpoint blob length " + std::to_string(ck.blob.size()) +
                             " does not match manifest total " + std::to_string(expect));
  return ck;
}

json mlp_manifest(const Mlp& net) {
  json j;
  j["kind"] = "mlp";
  j["widths"] = net.spec().widths;
  j["activation"] = to_string(net.spec().activation);
  j["time_embed_dim"] = net.spec().time_embed_dim;
  j["segments"] = json::array({json{{"name", "params"}, {"count", net.param_count()}}});
  return j;
}

Mlp mlp_from_manifest(const json& manifest, std::span<const double> params) {
  MlpSpec spec;
  spec.widths = manifest.at("widths").get<std::vector<int64_t>>();
  spec.activation = activation_from_string(manifest.at("activation").get<std::string>());
  spec.time_embed_dim = manifest.at("time_embed_dim").get<int>();
  return Mlp(spec, std::vector<double>(params.begin(), params.end()));
}

json generator_manifest(const Generator& gen, bool with_ema) {
  json j = mlp_manifest(gen.net);
  j["kind"] = "generator";
  j["residual"] = gen.residual;
  j["conditional"] = gen.conditional;
  auto segs = json::array({json{{"name", "params"}, {"count", gen.net.param_count()}}});
  if (with_ema) segs.push_back(json{{"name", "ema"}, {"count", gen.net.param_count()}});
  j["segments"] = segs;
  return j;
}

Generator generator_from_manifest(const json& manifest, std::span<const double> params) {
  Generator g;
  g.net = mlp_from_manifest(manifest, params);
  g.residual = manifest.at("residual").get<bool>();
  g.conditional = manifest.at("conditional").get<bool>();
  return g;
}

}  // namespace realuid
