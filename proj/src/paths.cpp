#include "realuid/paths.hpp"

#include "realuid/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace realuid {

PathKind path_kind_from_string(const std::string& s) {
  if (s == "flow_linear") return PathKind::flow_linear;
  if (s == "diffusion_vp") return PathKind::diffusion_vp;
  if (s == "bridge_brownian") return PathKind::bridge_brownian;
  if (s == "interpolant") return PathKind::interpolant;
  throw std::invalid_argument("unknown path kind '" + s + "'");
}

std::string to_string(PathKind k) {
  switch (k) {
    case PathKind::flow_linear: return "flow_linear";
    case PathKind::diffusion_vp: return "diffusion_vp";
    case PathKind::bridge_brownian: return "bridge_brownian";
    case PathKind::interpolant: return "interpolant";
  }
  return "?";
}

double PathSpec::alpha_t(double) const { return 1.0; }

double PathSpec::sigma_t(double t) const { return sigma_min + t * (sigma_max - sigma_min); }

void PathSpec::validate() const {
  if (!(t_lo >= 0.0 && t_hi <= 1.0 && t_lo < t_hi))
    throw std::invalid_argument("path time clamp must satisfy 0 <= t_lo < t_hi <= 1");
  if (kind == PathKind::diffusion_vp && !(sigma_max > 0.0 && sigma_min >= 0.0))
    throw std::invalid_argument("diffusion schedule needs sigma_min >= 0 and sigma_max > 0");
  if (kind == PathKind::bridge_brownian && !(bridge_eps > 0.0))
    throw std::invalid_argument("bridge noise must be positive");
  if (kind == PathKind::interpolant && !(gamma_amp >= 0.0))
    throw std::invalid_argument("interpolant amplitude must be nonnegative");
}

std::vector<double> sample_times(const PathSpec& spec, int64_t batch, Rng& rng) {
  std::vector<double> t(static_cast<size_t>(batch));
  if (spec.clamped_times())
    rng.fill_uniform(t, spec.t_lo, spec.t_hi);
  else
    rng.fill_uniform(t, 0.0, 1.0);
  return t;
}

TripleBatch build_triples(const PathSpec& spec, const Tensor& x0, const Tensor& endpoint,
                          std::span<const double> t, const Tensor& eps) {
  if (x0.shape() != endpoint.shape())
    throw std::invalid_argument("triples: x0 " + shape_str(x0.shape()) + " and endpoint " +
                                shape_str(endpoint.shape()) + " must match");
  const int64_t B = x0.shape()[0], D = x0.shape()[1];
  if (static_cast<int64_t>(t.size()) != B)
    throw std::invalid_argument("triples: time batch length mismatch");
  if (spec.uses_path_noise() && (eps.empty() || eps.shape() != x0.shape()))
    throw std::invalid_argument("triples: path noise required for " + to_string(spec.kind));

  TripleBatch tb;
  tb.batch = B;
  tb.dim = D;
  tb.t.assign(t.begin(), t.end());
  tb.t_col = Tensor({B, 1}, tb.t);
  tb.x0 = x0;
  tb.endpoint = endpoint;
  tb.eps = eps;

  std::vector<double> w0(static_cast<size_t>(B)), w1(static_cast<size_t>(B));
  switch (spec.kind) {
    case PathKind::flow_linear: {
      for (int64_t i = 0; i < B; ++i) { w0[i] = 1.0 - t[i]; w1[i] = t[i]; }
      tb.x_t = add(mul(x0, Tensor({B, 1}, w0)), mul(endpoint, Tensor({B, 1}, w1)));
      tb.target = sub(endpoint, x0);
      break;
    }
    case PathKind::diffusion_vp: {
      // endpoint plays the role of the perturbation noise: x_t = a_t x0 + s_t eps
      std::vector<double> inv(static_cast<size_t>(B));
      for (int64_t i = 0; i < B; ++i) {
        w0[i] = spec.alpha_t(t[i]);
        w1[i] = spec.sigma_t(t[i]);
        inv[i] = -1.0 / (w1[i] * w1[i]);
      }
      tb.x_t = add(mul(x0, Tensor({B, 1}, w0)), mul(endpoint, Tensor({B, 1}, w1)));
      // conditional score -(x_t - a_t x0) / s_t^2
      tb.target = mul(sub(tb.x_t, mul(x0, Tensor({B, 1}, w0))), Tensor({B, 1}, inv));
      break;
    }
    case PathKind::bridge_brownian: {
      std::vector<double> wn(static_cast<size_t>(B)), inv(static_cast<size_t>(B));
      for (int64_t i = 0; i < B; ++i) {
        w0[i] = 1.0 - t[i];
        w1[i] = t[i];
        wn[i] = spec.bridge_eps * std::sqrt(t[i] * (1.0 - t[i]));
        inv[i] = -1.0 / (spec.bridge_eps * spec.bridge_eps * t[i]);
      }
      tb.x_t = add(add(mul(x0, Tensor({B, 1}, w0)), mul(endpoint, Tensor({B, 1}, w1))),
                   mul(eps, Tensor({B, 1}, wn)));
      // score of the driftless prior p_t(x_t|x0): -(x_t - x0) / (eps_b^2 t)
      tb.target = mul(sub(tb.x_t, x0), Tensor({B, 1}, inv));
      break;
    }
    case PathKind::interpolant: {
      std::vector<double> wn(static_cast<size_t>(B)), wd(static_cast<size_t>(B));
      for (int64_t i = 0; i < B; ++i) {
        w0[i] = 1.0 - t[i];
        w1[i] = t[i];
        wn[i] = spec.gamma_t(t[i]);
        wd[i] = spec.gamma_dot(t[i]);
      }
      tb.x_t = add(add(mul(x0, Tensor({B, 1}, w0)), mul(endpoint, Tensor({B, 1}, w1))),
                   mul(eps, Tensor({B, 1}, wn)));
      tb.target = add(sub(endpoint, x0), mul(eps, Tensor({B, 1}, wd)));
      break;
    }
  }
  return tb;
}

TripleBatch sample_triples(const PathSpec& spec, const Tensor& x0, const Tensor& endpoint, Rng& rng) {
  auto t = sample_times(spec, x0.shape()[0], rng);
  Tensor eps;
  if (spec.uses_path_noise()) {
    std::vector<double> e(static_cast<size_t>(x0.size()));
    rng.fill_normal(e);
    eps = Tensor(x0.shape(), std::move(e));
  }
  return build_triples(spec, x0, endpoint, t, eps);
}

Gauss1D marginal_gaussian(const PathSpec& spec, const Gauss1D& p0, double t) {
  if (spec.kind != PathKind::flow_linear)
    throw std::invalid_argument("marginal_gaussian supports flow_linear only, got " + to_string(spec.kind));
  const double a = 1.0 - t;
  return Gauss1D{a * p0.mean, a * a * p0.var + t * t};
}

}  // namespace realuid
