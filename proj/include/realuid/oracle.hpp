#pragma once

#include <functional>
#include <string>
#include <vector>

namespace realuid {

struct Coeffs;  // losses.hpp

/// 1-D Gaussian with consistent density / log-density / score.
struct Gauss1D {
  double mean = 0.0;
  double var = 1.0;

  double pdf(double x) const;
  double logpdf(double x) const;
  double score(double x) const { return -(x - mean) / var; }
};

/// Closed-form ground truth for the flow_linear path between N(mu,1) data and
/// N(0,1) noise: marginals, unconditional fields, optimal fake models and the
/// pointwise distances they induce.
namespace oracle {

/// Marginal at time t: N(mu (1-t), (1-t)^2 + t^2).
Gauss1D flow_marginal(double mu, double t);

/// Unconditional field u_t(x) for p0 = N(mu,1): derived from the Gaussian path
/// identity u = m_dot + (sigma_dot/sigma)(x - m) with m = mu(1-t),
/// sigma^2 = (1-t)^2 + t^2.
double uncond_field(double mu, double t, double x);

/// Independent Bayes route for E[x1 - x0 | x_t] via quadrature over x0.
double cond_mean_target_quad(double mu, double t, double x, int nodes = 200);

/// Argmax fake model of the real-data distillation loss (density-weighted
/// blend of teacher and student fields). gamma enters the denominator in the
/// general three-coefficient variant; pass gamma = alpha for the plain form.
double optimal_fake(double mu_star, double mu_theta, double t, double x, const Coeffs& c);

/// Integrand of the maximized distillation loss at one point.
double pointwise_distance(double mu_star, double mu_theta, double t, double x, const Coeffs& c);

/// Same without the square and the denominator: |((beta-alpha) p* + alpha p^th) f* - beta p^th f^th|.
double normalized_integrand(double mu_star, double mu_theta, double t, double x, const Coeffs& c);

enum class DistanceKind { uid, real_uid, general, normalized };
DistanceKind distance_kind_from_string(const std::string& s);

/// Composite Gauss-Legendre rule over an x window crossed with time nodes.
struct QuadratureRule {
  std::vector<double> x_nodes, x_weights;
  std::vector<double> t_nodes, t_weights;  // t_weights average to 1 over the window
  double x_lo = -10.0, x_hi = 10.0;
  double t_lo = 1e-3, t_hi = 1.0 - 1e-3;

  static QuadratureRule make(int nodes_per_panel = 64, int panels = 8, double x_lo = -10.0,
                             double x_hi = 10.0, int t_nodes = 32, double t_lo = 1e-3,
                             double t_hi = 1.0 - 1e-3);
  /// Mass of N(0,1) captured by the window; rejects rules below 1 - 1e-10.
  double mass_check() const;
};

/// Deterministic integral of the chosen closed-form distance over (t, x).
double loss_by_quadrature(DistanceKind kind, double mu_star, double mu_theta, const Coeffs& c,
                          const QuadratureRule& rule);

/// Lemma-1 route via per-gridpoint maximization: integrates
/// p_t^theta (f^* - E_quad[target|x_t])^2 with the conditional mean obtained by
/// the independent Bayes quadrature instead of the closed form.
double uid_distance_gridmax(double mu_star, double mu_theta, const QuadratureRule& rule);

/// Scalar quadratic maximization by ternary search (for brute-force checks of
/// the closed-form argmax / max identities).
struct ScalarMax {
  double arg = 0.0;
  double value = 0.0;
};
ScalarMax maximize_scalar(const std::function<double(double)>& f, double lo, double hi,
                          int iters = 200);

/// Pointwise delta-objective of the general three-coefficient loss:
/// J(d) = p^th (-gamma d^2 + 2 alpha d f* - 2 beta d f^th)
///      + p^*  (-(1-gamma) d^2 + 2 (1-alpha) d f* - 2 (1-beta) d f^*).
double delta_objective(double mu_star, double mu_theta, double t, double x, const Coeffs& c,
                       double d);

/// VE-style diffusion marginals and the mixed-score machinery behind the
/// KL-gradient check (x_t = x0 + sigma_t eps).
Gauss1D ve_marginal(double mu, double sigma_t);
double mixed_score(double mu_star, double mu_theta, double alpha, double sigma_t, double x);
double kl_mixture_quadrature(double mu_star, double mu_theta, double alpha,
                             const std::vector<double>& sigmas, const QuadratureRule& rule);
double dmd_gradient_quadrature(double mu_star, double mu_theta, double alpha,
                               const std::vector<double>& sigmas, const QuadratureRule& rule);

}  // namespace oracle
}  // namespace realuid
