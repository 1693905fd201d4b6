#include "realuid/evalkit.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace realuid {

using nlohmann::json;

namespace {

json record_json(const MetricsRecord& r, bool with_wall) {
  json j;
  j["step"] = r.step;
  j["losses"] = json::object();
  for (const auto& [k, v] : r.losses) j["losses"][k] = v;
  if (r.w2_gauss) j["w2_gauss"] = *r.w2_gauss;
  if (r.sliced_w2) j["sliced_w2"] = *r.sliced_w2;
  if (r.energy_dist) j["energy_dist"] = *r.energy_dist;
  j["nan_skips"] = r.nan_skips;
  if (with_wall) j["wall_ms"] = r.wall_ms;
  return j;
}

}  // namespace

std::string MetricsRecord::to_json_line() const { return record_json(*this, true).dump(); }

std::string MetricsRecord::stable_line() const { return record_json(*this, false).dump(); }

double w2_gaussian(const Gauss1D& a, const Gauss1D& b) {
  const double dm = a.mean - b.mean;
  const double ds = std::sqrt(a.var) - std::sqrt(b.var);
  return std::sqrt(dm * dm + ds * ds);
}

double wasserstein1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1d: empty sample set");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const size_t n = sa.size(), m = sb.size();
  // integrate (Fa^{-1}(u) - Fb^{-1}(u))^2 over u with piecewise-constant quantiles
  double acc = 0.0, u = 0.0;
  size_t i = 0, j = 0;
  while (i < n && j < m) {
    const double ua = static_cast<double>(i + 1) / n;
    const double ub = static_cast<double>(j + 1) / m;
    const double next = std::min(ua, ub);
    const double d = sa[i] - sb[j];
    acc += (next - u) * d * d;
    u = next;
    if (ua <= ub) ++i;
    if (ub <= ua) ++j;
  }
  return std::sqrt(acc);
}

double sliced_w2(std::span<const double> a, std::span<const double> b, int dim, int n_projections,
                 Rng& rng) {
  if (dim <= 0) throw std::invalid_argument("sliced_w2: dimension must be positive");
  if (a.empty() || b.empty()) throw std::invalid_argument("sliced_w2: empty sample set");
  if (a.size() % dim != 0 || b.size() % dim != 0)
    throw std::invalid_argument("sliced_w2: sample length not a multiple of dim");
  if (n_projections < 1) throw std::invalid_argument("sliced_w2: need n_projections >= 1");
  const size_t na = a.size() / dim, nb = b.size() / dim;
  if (dim == 1) return wasserstein1d(a, b);

  std::vector<double> dir(static_cast<size_t>(dim));
  std::vector<double> pa(na), pb(nb);
  double acc = 0.0;
  for (int p = 0; p < n_projections; ++p) {
    double nrm = 0.0;
    for (double& d : dir) {
      d = rng.normal();
      nrm += d * d;
    }
    nrm = std::sqrt(nrm);
    for (double& d : dir) d /= nrm;
    for (size_t i = 0; i < na; ++i) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k) s += a[i * dim + k] * dir[static_cast<size_t>(k)];
      pa[i] = s;
    }
    for (size_t i = 0; i < nb; ++i) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k) s += b[i * dim + k] * dir[static_cast<size_t>(k)];
      pb[i] = s;
    }
    acc += wasserstein1d(pa, pb);
  }
  return acc / n_projections;
}

namespace {

double mean_pair_dist(std::span<const double> a, std::span<const double> b, int dim) {
  const size_t na = a.size() / dim, nb = b.size() / dim;
  double acc = 0.0;
  for (size_t i = 0; i < na; ++i)
    for (size_t j = 0; j < nb; ++j) {
      double sq = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double d = a[i * dim + k] - b[j * dim + k];
        sq += d * d;
      }
      acc += std::sqrt(sq);
    }
  return acc / (static_cast<double>(na) * static_cast<double>(nb));
}

double mean_self_dist(std::span<const double> a, int dim) {
  const size_t n = a.size() / dim;
  if (n < 2) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double d = a[i * dim + k] - a[j * dim + k];
        sq += d * d;
      }
      acc += std::sqrt(sq);
    }
  return 2.0 * acc / (static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace

double energy_distance(std::span<const double> a, std::span<const double> b, int dim) {
  if (dim <= 0) throw std::invalid_argument("energy_distance: dimension must be positive");
  if (a.empty() || b.empty()) throw std::invalid_argument("energy_distance: empty sample set");
  if (a.size() % dim != 0 || b.size() % dim != 0)
    throw std::invalid_argument("energy_distance: sample length not a multiple of dim");
  const double u = 2.0 * mean_pair_dist(a, b, dim) - mean_self_dist(a, dim) - mean_self_dist(b, dim);
  // the unbiased U-statistic can dip below zero for near-identical samples
  return std::max(0.0, u);
}

Gauss1D fit_gauss1d(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("fit_gauss1d: need at least 2 samples");
  double m = 0.0;
  for (double v : samples) m += v;
  m /= samples.size();
  double var = 0.0;
  for (double v : samples) var += (v - m) * (v - m);
  var /= (samples.size() - 1);
  return Gauss1D{m, std::max(var, 1e-300)};
}

std::string format_double(double v) { return json(v).dump(); }

}  // namespace realuid
