#include "realuid/datasets.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace realuid {

using nlohmann::json;

namespace {

void check_keys(const json& cfg, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : cfg.items())
    if (!allowed.count(k))
      throw std::invalid_argument("unknown key '" + k + "' in " + where);
}

double get_or(const json& cfg, const char* key, double dflt) {
  return cfg.contains(key) ? cfg.at(key).get<double>() : dflt;
}

}  // namespace

std::vector<double> Dataset::draw(Rng& rng, int64_t n) const {
  std::vector<double> out(static_cast<size_t>(n * dim));
  sample(rng, out);
  return out;
}

Dataset make_dataset(const json& cfg) {
  if (!cfg.contains("name")) throw std::invalid_argument("data config needs a 'name'");
  const std::string name = cfg.at("name").get<std::string>();
  Dataset ds;
  ds.name = name;

  if (name == "gauss1d") {
    check_keys(cfg, {"name", "mean", "std"}, "data(gauss1d)");
    const double mean = get_or(cfg, "mean", 0.0);
    const double sd = get_or(cfg, "std", 1.0);
    if (sd <= 0) throw std::invalid_argument("gauss1d std must be positive");
    ds.dim = 1;
    ds.gauss = Gauss1D{mean, sd * sd};
    ds.sample = [mean, sd](Rng& rng, std::span<double> out) {
      for (double& v : out) v = mean + sd * rng.normal();
    };
  } else if (name == "gauss_mix") {
    check_keys(cfg, {"name", "means", "std"}, "data(gauss_mix)");
    std::vector<double> means = cfg.contains("means")
                                    ? cfg.at("means").get<std::vector<double>>()
                                    : std::vector<double>{-2.0, 2.0};
    if (means.empty()) throw std::invalid_argument("gauss_mix needs at least one mean");
    const double sd = get_or(cfg, "std", 0.3);
    ds.dim = 1;
    ds.sample = [means, sd](Rng& rng, std::span<double> out) {
      for (double& v : out) {
        const size_t k = static_cast<size_t>(rng.uniform() * means.size());
        v = means[std::min(k, means.size() - 1)] + sd * rng.normal();
      }
    };
  } else if (name == "two_moons") {
    check_keys(cfg, {"name", "noise"}, "data(two_moons)");
    const double noise = get_or(cfg, "noise", 0.05);
    ds.dim = 2;
    ds.sample = [noise](Rng& rng, std::span<double> out) {
      for (size_t i = 0; i + 1 < out.size(); i += 2) {
        const double a = rng.uniform() * std::numbers::pi;
        double x, y;
        if (rng.uniform() < 0.5) {
          x = std::cos(a);
          y = std::sin(a);
        } else {
          x = 1.0 - std::cos(a);
          y = 0.5 - std::sin(a);
        }
        out[i] = x - 0.5 + noise * rng.normal();
        out[i + 1] = y - 0.25 + noise * rng.normal();
      }
    };
  } else if (name == "eight_gaussians") {
    check_keys(cfg, {"name", "radius", "std"}, "data(eight_gaussians)");
    const double radius = get_or(cfg, "radius", 2.0);
    const double sd = get_or(cfg, "std", 0.15);
    ds.dim = 2;
    ds.sample = [radius, sd](Rng& rng, std::span<double> out) {
      for (size_t i = 0; i + 1 < out.size(); i += 2) {
        const int k = std::min(7, static_cast<int>(rng.uniform() * 8.0));
        const double a = k * std::numbers::pi / 4.0;
        out[i] = radius * std::cos(a) + sd * rng.normal();
        out[i + 1] = radius * std::sin(a) + sd * rng.normal();
      }
    };
  } else if (name == "checkerboard") {
    check_keys(cfg, {"name"}, "data(checkerboard)");
    ds.dim = 2;
    ds.sample = [](Rng& rng, std::span<double> out) {
      for (size_t i = 0; i + 1 < out.size(); i += 2) {
        const double x1 = rng.uniform() * 4.0 - 2.0;
        const double x2 = rng.uniform() - (rng.uniform() < 0.5 ? 0.0 : 2.0) +
                          std::fmod(std::floor(x1) + 4.0, 2.0);
        out[i] = x1;
        out[i + 1] = x2;
      }
    };
  } else {
    throw std::invalid_argument("unknown dataset '" + name +
                                "' (expected gauss1d, gauss_mix, two_moons, eight_gaussians, checkerboard)");
  }
  return ds;
}

CouplingDataset make_coupling_dataset(const json& cfg) {
  if (!cfg.contains("name")) throw std::invalid_argument("data config needs a 'name'");
  const std::string name = cfg.at("name").get<std::string>();
  if (name != "translate1d")
    throw std::invalid_argument("unknown coupling dataset '" + name + "' (expected translate1d)");
  check_keys(cfg, {"name", "shift", "noise", "x0_mean", "x0_std"}, "data(translate1d)");
  const double shift = get_or(cfg, "shift", 1.0);
  const double noise = get_or(cfg, "noise", 0.1);
  const double mean0 = get_or(cfg, "x0_mean", 0.0);
  const double sd0 = get_or(cfg, "x0_std", 1.0);
  if (noise <= 0 || sd0 <= 0) throw std::invalid_argument("translate1d noise and x0_std must be positive");

  CouplingDataset ds;
  ds.name = name;
  ds.dim = 1;
  ds.sample_pair = [shift, noise, mean0, sd0](Rng& rng, std::span<double> x0, std::span<double> xT) {
    for (size_t i = 0; i < x0.size(); ++i) {
      x0[i] = mean0 + sd0 * rng.normal();
      xT[i] = x0[i] + shift + noise * rng.normal();
    }
  };
  const double v0 = sd0 * sd0, vn = noise * noise;
  ds.posterior_mean = [shift, mean0, v0, vn](double xT) {
    return mean0 + v0 / (v0 + vn) * (xT - shift - mean0);
  };
  return ds;
}

}  // namespace realuid
