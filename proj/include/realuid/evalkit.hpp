#pragma once

#include "realuid/nets.hpp"
#include "realuid/oracle.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

namespace realuid {

/// One evaluation snapshot, emitted as a JSONL line.
struct MetricsRecord {
  int64_t step = 0;
  std::map<std::string, double> losses;
  std::optional<double> w2_gauss;
  std::optional<double> sliced_w2;
  std::optional<double> energy_dist;
  int64_t nan_skips = 0;
  double wall_ms = 0.0;

  std::string to_json_line() const;
  /// Same line with wall_ms removed (for determinism comparisons).
  std::string stable_line() const;
};

/// Closed-form 2-Wasserstein between 1-D Gaussians: sqrt(dmu^2 + dsigma^2).
double w2_gaussian(const Gauss1D& a, const Gauss1D& b);

/// Exact 1-D W2 between empirical samples (piecewise quantile integral).
double wasserstein1d(std::span<const double> a, std::span<const double> b);

/// Mean over random unit directions of the 1-D W2 of the projections.
/// D = 1 short-circuits to the exact distance.
double sliced_w2(std::span<const double> a, std::span<const double> b, int dim, int n_projections,
                 Rng& rng);

/// 2 E||A-B|| - E||A-A'|| - E||B-B'|| via U-statistics.
double energy_distance(std::span<const double> a, std::span<const double> b, int dim);

/// Gaussian moment fit of a 1-D sample set.
Gauss1D fit_gauss1d(std::span<const double> samples);

/// Shortest round-trip decimal formatting for 64-bit reals.
std::string format_double(double v);

}  // namespace realuid
