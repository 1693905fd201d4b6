#pragma once

#include "realuid/losses.hpp"
#include "realuid/nets.hpp"
#include "realuid/paths.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

using namespace realuid;

// Central finite differences of a scalar function of the parameter vector.
inline std::vector<double> finite_diff(std::vector<double>& params,
                                       const std::function<double()>& eval, double h = 1e-5) {
  std::vector<double> g(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = eval();
    params[i] = keep - h;
    const double dn = eval();
    params[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

inline double max_rel_err(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline Tensor randn(Rng& rng, Shape shape) {
  std::vector<double> v(static_cast<size_t>(numel(shape)));
  rng.fill_normal(v);
  return Tensor(std::move(shape), std::move(v));
}

// Mean-parametrized triples for 1-D tests: x0 = z + mu on a tape so that
// d(loss)/d(mu) is a single tracked scalar going through the whole batch.
struct MeanParam {
  Tape tape;
  Tensor mu;          // [1,1] leaf
  TripleBatch triples;

  MeanParam(const PathSpec& spec, double mu0, int64_t batch, Rng& rng) {
    std::vector<double> z(static_cast<size_t>(batch)), x1(static_cast<size_t>(batch));
    rng.fill_normal(z);
    rng.fill_normal(x1);
    auto t = sample_times(spec, batch, rng);
    mu = tape.leaf({1, 1}, std::vector<double>{mu0});
    // x0 = z + mu via matmul against a column of ones
    Tensor ones({batch, 1}, std::vector<double>(static_cast<size_t>(batch), 1.0));
    Tensor x0 = add(Tensor({batch, 1}, z), matmul(ones, mu));
    Tensor eps;
    if (spec.uses_path_noise()) {
      std::vector<double> e(static_cast<size_t>(batch));
      rng.fill_normal(e);
      eps = Tensor({batch, 1}, e);
    }
    triples = build_triples(spec, x0, Tensor({batch, 1}, x1), t, eps);
  }
};

// Differentiable closed-form closures for the 1-D Gaussian flow setup,
// built from tensor ops so gradients flow through x_t.

// u_t(x) is affine in x: c1(t) x + c0(t).
inline FieldFn oracle_field_ops(double mu) {
  return [mu](const Tensor& xt, const Tensor& t) {
    auto tv = t.values();
    const int64_t B = xt.shape()[0];
    std::vector<double> c0(static_cast<size_t>(B)), c1(static_cast<size_t>(B));
    for (int64_t i = 0; i < B; ++i) {
      const double tt = tv[static_cast<size_t>(i)];
      const double var = (1.0 - tt) * (1.0 - tt) + tt * tt;
      c1[static_cast<size_t>(i)] = (2.0 * tt - 1.0) / var;
      c0[static_cast<size_t>(i)] = -mu - c1[static_cast<size_t>(i)] * mu * (1.0 - tt);
    }
    return add(mul(xt, Tensor({B, 1}, c1)), Tensor({B, 1}, c0));
  };
}

// Path-marginal density of N(mu,1) data as ops.
inline Tensor gauss_path_pdf_ops(const Tensor& xt, const Tensor& t, double mu) {
  auto tv = t.values();
  const int64_t B = xt.shape()[0];
  std::vector<double> m(static_cast<size_t>(B)), q(static_cast<size_t>(B)), z(static_cast<size_t>(B));
  for (int64_t i = 0; i < B; ++i) {
    const double tt = tv[static_cast<size_t>(i)];
    const double var = (1.0 - tt) * (1.0 - tt) + tt * tt;
    m[static_cast<size_t>(i)] = mu * (1.0 - tt);
    q[static_cast<size_t>(i)] = -0.5 / var;
    z[static_cast<size_t>(i)] = 1.0 / std::sqrt(2.0 * 3.14159265358979323846 * var);
  }
  Tensor diff = sub(xt, Tensor({B, 1}, m));
  return mul(realuid::exp(mul(square(diff), Tensor({B, 1}, q))), Tensor({B, 1}, z));
}

// The density-weighted optimal fake (rational in x), fully differentiable.
inline FieldFn optimal_fake_ops(double mu_star, double mu_theta, const Coeffs& c) {
  return [mu_star, mu_theta, c](const Tensor& xt, const Tensor& t) {
    Tensor ps = gauss_path_pdf_ops(xt, t, mu_star);
    Tensor pt = gauss_path_pdf_ops(xt, t, mu_theta);
    Tensor fs = oracle_field_ops(mu_star)(xt, t);
    Tensor ft = oracle_field_ops(mu_theta)(xt, t);
    Tensor num = add(scale(mul(ps, fs), 1.0 - c.beta), scale(mul(pt, ft), c.beta));
    Tensor den = add(scale(ps, 1.0 - c.alpha), scale(pt, c.alpha));
    return mul(num, recip_guard(den, 1e-300));
  };
}

}  // namespace testutil
