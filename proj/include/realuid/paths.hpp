#pragma once

#include "realuid/nets.hpp"
#include "realuid/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace realuid {

enum class PathKind { flow_linear, diffusion_vp, bridge_brownian, interpolant };
PathKind path_kind_from_string(const std::string& s);
std::string to_string(PathKind k);

/// A conditional probability path and its conditional matching target.
/// Time runs data (t=0) to noise/endpoint (t=1).
struct PathSpec {
  PathKind kind = PathKind::flow_linear;
  double sigma_min = 0.01;   // diffusion schedule: sigma_t = sigma_min + t (sigma_max - sigma_min)
  double sigma_max = 1.0;
  double bridge_eps = 1.0;   // Brownian bridge noise scale
  double gamma_amp = 0.5;    // interpolant gamma_t = gamma_amp * t (1-t)
  double t_lo = 1e-3;        // time clamp for score-target kinds (1/t singularity)
  double t_hi = 1.0 - 1e-3;

  double alpha_t(double t) const;  // diffusion mean scale (fixed to 1)
  double sigma_t(double t) const;
  double gamma_t(double t) const { return gamma_amp * t * (1.0 - t); }
  double gamma_dot(double t) const { return gamma_amp * (1.0 - 2.0 * t); }
  bool clamped_times() const {
    return kind == PathKind::diffusion_vp || kind == PathKind::bridge_brownian;
  }
  bool uses_path_noise() const {
    return kind == PathKind::bridge_brownian || kind == PathKind::interpolant;
  }
  void validate() const;
};

/// One batch of (t, x_t, target) triples plus everything that produced them.
/// x_t and target live on the tape of x0 (tracked when x0 is the live
/// generator output, constants otherwise).
struct TripleBatch {
  int64_t batch = 0, dim = 0;
  std::vector<double> t;  // length batch
  Tensor t_col;           // [B,1]
  Tensor x_t;             // [B,D]
  Tensor target;          // [B,D]
  Tensor x0;              // [B,D]
  Tensor endpoint;        // [B,D] noise x1 or coupling endpoint x_T
  Tensor eps;             // [B,D] path noise, empty when the kind has none
};

/// Uniform time draw, restricted to [t_lo, t_hi] for score-target kinds.
std::vector<double> sample_times(const PathSpec& spec, int64_t batch, Rng& rng);

/// Builds x_t and the conditional target from endpoints (and path noise when
/// the kind needs it). Differentiable w.r.t. x0/endpoint through the tape.
TripleBatch build_triples(const PathSpec& spec, const Tensor& x0, const Tensor& endpoint,
                          std::span<const double> t, const Tensor& eps = {});

/// Convenience for plain sampling: draws t (and eps) itself.
TripleBatch sample_triples(const PathSpec& spec, const Tensor& x0, const Tensor& endpoint, Rng& rng);

struct Gauss1D;  // oracle.hpp

/// Marginal of the flow_linear path for a 1-D Gaussian data distribution and
/// a standard normal noise endpoint: N(mu (1-t), (1-t)^2 var + t^2).
Gauss1D marginal_gaussian(const PathSpec& spec, const Gauss1D& p0, double t);

}  // namespace realuid
