#pragma once

#include "realuid/nets.hpp"
#include "realuid/oracle.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <span>
#include <string>

namespace realuid {

/// Built-in synthetic data source. `sample` fills batch*dim values row-major.
struct Dataset {
  std::string name;
  int dim = 1;
  std::function<void(Rng&, std::span<double>)> sample;
  std::optional<Gauss1D> gauss;  // closed-form reference when the data is 1-D Gaussian

  std::vector<double> draw(Rng& rng, int64_t n) const;
};

/// Coupled endpoints (x0, xT) for bridge / interpolant distillation.
struct CouplingDataset {
  std::string name;
  int dim = 1;
  std::function<void(Rng&, std::span<double> x0, std::span<double> xT)> sample_pair;

  /// Posterior mean E[x0 | xT] when the coupling is linear-Gaussian.
  std::function<double(double)> posterior_mean;
};

/// data config: {"name": ..., dataset-specific numeric keys}. Unknown keys
/// are rejected.
Dataset make_dataset(const nlohmann::json& cfg);
CouplingDataset make_coupling_dataset(const nlohmann::json& cfg);

}  // namespace realuid
