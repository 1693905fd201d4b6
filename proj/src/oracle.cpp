#include "realuid/oracle.hpp"

#include "realuid/losses.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace realuid {

double Gauss1D::pdf(double x) const {
  return std::exp(logpdf(x));
}

double Gauss1D::logpdf(double x) const {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

namespace oracle {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// sigma_t^2 of the flow_linear path with unit-variance endpoints
double path_var(double t) { return (1.0 - t) * (1.0 - t) + t * t; }

template <int N>
void append_panel(std::vector<double>& nodes, std::vector<double>& weights, double lo, double hi) {
  using GL = boost::math::quadrature::gauss<double, N>;
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  const auto& xs = GL::abscissa();  // nonnegative half, xs[0] == 0 for odd N only
  const auto& ws = GL::weights();
  std::vector<std::pair<double, double>> pts;
  for (size_t i = 0; i < xs.size(); ++i) {
    pts.emplace_back(mid - half * xs[i], half * ws[i]);
    if (xs[i] != 0.0) pts.emplace_back(mid + half * xs[i], half * ws[i]);
  }
  std::sort(pts.begin(), pts.end());
  for (auto& [x, w] : pts) {
    nodes.push_back(x);
    weights.push_back(w);
  }
}

void append_panel_n(int n, std::vector<double>& nodes, std::vector<double>& weights, double lo, double hi) {
  switch (n) {
    case 16: append_panel<16>(nodes, weights, lo, hi); break;
    case 32: append_panel<32>(nodes, weights, lo, hi); break;
    case 64: append_panel<64>(nodes, weights, lo, hi); break;
    case 128: append_panel<128>(nodes, weights, lo, hi); break;
    case 200: append_panel<200>(nodes, weights, lo, hi); break;
    default: throw std::invalid_argument("unsupported Gauss-Legendre size " + std::to_string(n));
  }
}

}  // namespace

Gauss1D flow_marginal(double mu, double t) {
  return Gauss1D{mu * (1.0 - t), path_var(t)};
}

double uncond_field(double mu, double t, double x) {
  const double m = mu * (1.0 - t);
  const double v = path_var(t);
  // u = m_dot + (sigma_dot / sigma) (x - m); sigma_dot/sigma = (2t-1)/v
  return -mu + (2.0 * t - 1.0) * (x - m) / v;
}

double cond_mean_target_quad(double mu, double t, double x, int nodes) {
  if (t <= 0.0 || t >= 1.0)
    throw std::invalid_argument("cond_mean_target_quad needs t in (0,1)");
  // posterior x0 | x_t is Gaussian; integrate (x - x0)/t against it
  const double v_post = t * t / path_var(t);
  const double m_post = mu + (1.0 - t) / path_var(t) * (x - mu * (1.0 - t));
  const double lo = m_post - 14.0 * std::sqrt(v_post), hi = m_post + 14.0 * std::sqrt(v_post);
  std::vector<double> xs, ws;
  append_panel_n(nodes, xs, ws, lo, hi);
  Gauss1D data{mu, 1.0};
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double x0 = xs[i];
    const double x1 = (x - (1.0 - t) * x0) / t;
    // joint density of (x0, x_t): p0(x0) N(x1; 0,1) / t
    const double w = ws[i] * data.pdf(x0) * std::exp(-0.5 * x1 * x1) / std::sqrt(kTwoPi) / t;
    num += w * (x - x0) / t;
    den += w;
  }
  return num / den;
}

double optimal_fake(double mu_star, double mu_theta, double t, double x, const Coeffs& c) {
  const Gauss1D ps = flow_marginal(mu_star, t), pt = flow_marginal(mu_theta, t);
  const double dens_s = ps.pdf(x), dens_t = pt.pdf(x);
  const double fs = uncond_field(mu_star, t, x), ft = uncond_field(mu_theta, t, x);
  const double den = (1.0 - c.alpha) * dens_s + c.alpha * dens_t;
  return ((1.0 - c.beta) * dens_s * fs + c.beta * dens_t * ft) / den;
}

double pointwise_distance(double mu_star, double mu_theta, double t, double x, const Coeffs& c) {
  const Gauss1D ps = flow_marginal(mu_star, t), pt = flow_marginal(mu_theta, t);
  const double dens_s = ps.pdf(x), dens_t = pt.pdf(x);
  const double fs = uncond_field(mu_star, t, x), ft = uncond_field(mu_theta, t, x);
  const double num = (dens_s * (c.beta - c.alpha) + c.alpha * dens_t) * fs - c.beta * dens_t * ft;
  const double den = (1.0 - c.gamma) * dens_s + c.gamma * dens_t;
  return num * num / den;
}

double normalized_integrand(double mu_star, double mu_theta, double t, double x, const Coeffs& c) {
  const Gauss1D ps = flow_marginal(mu_star, t), pt = flow_marginal(mu_theta, t);
  const double dens_s = ps.pdf(x), dens_t = pt.pdf(x);
  const double fs = uncond_field(mu_star, t, x), ft = uncond_field(mu_theta, t, x);
  return std::abs((dens_s * (c.beta - c.alpha) + c.alpha * dens_t) * fs - c.beta * dens_t * ft);
}

DistanceKind distance_kind_from_string(const std::string& s) {
  if (s == "uid" || s == "uid_distance") return DistanceKind::uid;
  if (s == "real_uid" || s == "real_uid_distance") return DistanceKind::real_uid;
  if (s == "general" || s == "general_distance") return DistanceKind::general;
  if (s == "normalized" || s == "normalized_distance") return DistanceKind::normalized;
  throw std::invalid_argument("unknown distance kind '" + s + "'");
}

QuadratureRule QuadratureRule::make(int nodes_per_panel, int panels, double x_lo, double x_hi,
                                    int t_nodes, double t_lo, double t_hi) {
  QuadratureRule r;
  r.x_lo = x_lo;
  r.x_hi = x_hi;
  r.t_lo = t_lo;
  r.t_hi = t_hi;
  const double step = (x_hi - x_lo) / panels;
  for (int p = 0; p < panels; ++p)
    append_panel_n(nodes_per_panel, r.x_nodes, r.x_weights, x_lo + p * step, x_lo + (p + 1) * step);
  append_panel_n(t_nodes, r.t_nodes, r.t_weights, t_lo, t_hi);
  // time integral represents an average over the window
  for (double& w : r.t_weights) w /= (t_hi - t_lo);
  return r;
}

double QuadratureRule::mass_check() const {
  Gauss1D unit{0.0, 1.0};
  double m = 0.0;
  for (size_t i = 0; i < x_nodes.size(); ++i) m += x_weights[i] * unit.pdf(x_nodes[i]);
  return m;
}

namespace {

void require_mass(const QuadratureRule& rule) {
  if (rule.mass_check() < 1.0 - 1e-10)
    throw std::invalid_argument("quadrature window too narrow: unit-Gaussian mass check failed");
}

}  // namespace

double loss_by_quadrature(DistanceKind kind, double mu_star, double mu_theta, const Coeffs& c,
                          const QuadratureRule& rule) {
  require_mass(rule);
  double acc = 0.0;
  for (size_t it = 0; it < rule.t_nodes.size(); ++it) {
    const double t = rule.t_nodes[it];
    double inner = 0.0;
    switch (kind) {
      case DistanceKind::uid: {
        const Gauss1D pt = flow_marginal(mu_theta, t);
        for (size_t ix = 0; ix < rule.x_nodes.size(); ++ix) {
          const double x = rule.x_nodes[ix];
          const double d = uncond_field(mu_star, t, x) - uncond_field(mu_theta, t, x);
          inner += rule.x_weights[ix] * pt.pdf(x) * d * d;
        }
        break;
      }
      case DistanceKind::real_uid:
      case DistanceKind::general: {
        Coeffs cc = c;
        if (kind == DistanceKind::real_uid) cc.gamma = cc.alpha;
        for (size_t ix = 0; ix < rule.x_nodes.size(); ++ix)
          inner += rule.x_weights[ix] * pointwise_distance(mu_star, mu_theta, t, rule.x_nodes[ix], cc);
        break;
      }
      case DistanceKind::normalized: {
        for (size_t ix = 0; ix < rule.x_nodes.size(); ++ix)
          inner += rule.x_weights[ix] * normalized_integrand(mu_star, mu_theta, t, rule.x_nodes[ix], c);
        break;
      }
    }
    acc += rule.t_weights[it] * inner;
  }
  return acc;
}

double uid_distance_gridmax(double mu_star, double mu_theta, const QuadratureRule& rule) {
  require_mass(rule);
  double acc = 0.0;
  for (size_t it = 0; it < rule.t_nodes.size(); ++it) {
    const double t = rule.t_nodes[it];
    const Gauss1D pt = flow_marginal(mu_theta, t);
    double inner = 0.0;
    for (size_t ix = 0; ix < rule.x_nodes.size(); ++ix) {
      const double x = rule.x_nodes[ix];
      const double dens = pt.pdf(x);
      if (dens < 1e-300) continue;
      // the per-point maximizer of the generated-data objective is the
      // conditional mean of the target; take it from the Bayes route
      const double fstar = uncond_field(mu_star, t, x);
      const double ftheta = cond_mean_target_quad(mu_theta, t, x);
      inner += rule.x_weights[ix] * dens * (fstar - ftheta) * (fstar - ftheta);
    }
    acc += rule.t_weights[it] * inner;
  }
  return acc;
}

ScalarMax maximize_scalar(const std::function<double(double)>& f, double lo, double hi, int iters) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c1 = b - kInvPhi * (b - a), c2 = a + kInvPhi * (b - a);
  double f1 = f(c1), f2 = f(c2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + kInvPhi * (b - a);
      f2 = f(c2);
    } else {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - kInvPhi * (b - a);
      f1 = f(c1);
    }
  }
  const double arg = 0.5 * (a + b);
  return {arg, f(arg)};
}

double delta_objective(double mu_star, double mu_theta, double t, double x, const Coeffs& c,
                       double d) {
  const Gauss1D ps = flow_marginal(mu_star, t), pt = flow_marginal(mu_theta, t);
  const double dens_s = ps.pdf(x), dens_t = pt.pdf(x);
  const double fs = uncond_field(mu_star, t, x), ft = uncond_field(mu_theta, t, x);
  const double gen_part = dens_t * (-c.gamma * d * d + 2.0 * c.alpha * d * fs - 2.0 * c.beta * d * ft);
  const double real_part = dens_s * (-(1.0 - c.gamma) * d * d + 2.0 * (1.0 - c.alpha) * d * fs -
                                     2.0 * (1.0 - c.beta) * d * fs);
  return gen_part + real_part;
}

Gauss1D ve_marginal(double mu, double sigma_t) {
  return Gauss1D{mu, 1.0 + sigma_t * sigma_t};
}

double mixed_score(double mu_star, double mu_theta, double alpha, double sigma_t, double x) {
  const Gauss1D ps = ve_marginal(mu_star, sigma_t), pt = ve_marginal(mu_theta, sigma_t);
  const double r = pt.pdf(x) / ps.pdf(x);
  return (alpha * r * pt.score(x) + (1.0 - alpha) * ps.score(x)) / (alpha * r + 1.0 - alpha);
}

double kl_mixture_quadrature(double mu_star, double mu_theta, double alpha,
                             const std::vector<double>& sigmas, const QuadratureRule& rule) {
  double acc = 0.0;
  for (double s : sigmas) {
    const Gauss1D ps = ve_marginal(mu_star, s), pt = ve_marginal(mu_theta, s);
    double kl = 0.0;
    for (size_t i = 0; i < rule.x_nodes.size(); ++i) {
      const double x = rule.x_nodes[i];
      const double q = alpha * pt.pdf(x) + (1.0 - alpha) * ps.pdf(x);
      if (q < 1e-300) continue;
      kl += rule.x_weights[i] * q * (std::log(q) - ps.logpdf(x));
    }
    acc += kl;
  }
  return acc / static_cast<double>(sigmas.size());
}

double dmd_gradient_quadrature(double mu_star, double mu_theta, double alpha,
                               const std::vector<double>& sigmas, const QuadratureRule& rule) {
  // E_t E_{x ~ p_t^theta} alpha (s^{theta,alpha}(x) - s^*(x)); dx/dmu = 1
  double acc = 0.0;
  for (double s : sigmas) {
    const Gauss1D ps = ve_marginal(mu_star, s), pt = ve_marginal(mu_theta, s);
    double g = 0.0;
    for (size_t i = 0; i < rule.x_nodes.size(); ++i) {
      const double x = rule.x_nodes[i];
      g += rule.x_weights[i] * pt.pdf(x) * alpha * (mixed_score(mu_star, mu_theta, alpha, s, x) - ps.score(x));
    }
    acc += g;
  }
  return acc / static_cast<double>(sigmas.size());
}

}  // namespace oracle
}  // namespace realuid
