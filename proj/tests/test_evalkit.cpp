#include "doctest.h"

#include "realuid/evalkit.hpp"
#include "test_helpers.hpp"

#include <cmath>
#include <numbers>

using namespace realuid;

TEST_CASE("w2_gaussian closed form") {
  CHECK(w2_gaussian({1.0, 2.0}, {1.0, 2.0}) == 0.0);
  CHECK(w2_gaussian({0.0, 1.0}, {2.0, 1.0}) == doctest::Approx(2.0));
  CHECK(w2_gaussian({0.0, 1.0}, {1.0, 4.0}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("w2_gaussian triangle consistency on random triples") {
  Rng rng(401);
  for (int k = 0; k < 50; ++k) {
    Gauss1D a{rng.normal(), 0.2 + rng.uniform()};
    Gauss1D b{rng.normal(), 0.2 + rng.uniform()};
    Gauss1D c{rng.normal(), 0.2 + rng.uniform()};
    CHECK(w2_gaussian(a, c) <= w2_gaussian(a, b) + w2_gaussian(b, c) + 1e-12);
    CHECK(w2_gaussian(a, b) == doctest::Approx(w2_gaussian(b, a)));
    CHECK(w2_gaussian(a, b) >= 0.0);
  }
}

TEST_CASE("1-D sliced distance reduces to the exact empirical W2") {
  Rng rng(402);
  std::vector<double> a(500), b(700);
  rng.fill_normal(a);
  rng.fill_normal(b);
  for (double& v : b) v += 1.0;
  Rng prng(403);
  CHECK(sliced_w2(a, b, 1, 16, prng) == doctest::Approx(wasserstein1d(a, b)));
  // identical arrays are at distance zero
  CHECK(wasserstein1d(a, a) == 0.0);
}

TEST_CASE("sliced W2 of two unit Gaussians two apart in 2D") {
  // projected distance |<dir, dmu>| integrates to ||dmu|| * 2/pi in 2D
  Rng rng(404);
  const int64_t n = 10000;
  std::vector<double> a(2 * n), b(2 * n);
  rng.fill_normal(a);
  rng.fill_normal(b);
  for (size_t i = 0; i < b.size(); i += 2) b[i] += 2.0;
  Rng prng(405);
  const double got = sliced_w2(a, b, 2, 128, prng);
  const double want = 2.0 * 2.0 / std::numbers::pi;
  CHECK(got == doctest::Approx(want).epsilon(0.05));
}

TEST_CASE("sliced W2 is invariant under identical permutation of both sets") {
  Rng rng(406);
  const int64_t n = 256;
  std::vector<double> a(2 * n), b(2 * n);
  rng.fill_normal(a);
  rng.fill_normal(b);
  Rng p1(407), p2(407);
  const double before = sliced_w2(a, b, 2, 32, p1);
  // reverse the row order of both sets
  std::vector<double> ar(a.size()), br(b.size());
  for (int64_t i = 0; i < n; ++i)
    for (int k = 0; k < 2; ++k) {
      ar[static_cast<size_t>(2 * (n - 1 - i) + k)] = a[static_cast<size_t>(2 * i + k)];
      br[static_cast<size_t>(2 * (n - 1 - i) + k)] = b[static_cast<size_t>(2 * i + k)];
    }
  const double after = sliced_w2(ar, br, 2, 32, p2);
  CHECK(before == doctest::Approx(after));
}

TEST_CASE("energy distance") {
  SUBCASE("disjoint point masses at 0 and 1") {
    std::vector<double> a(64, 0.0), b(64, 1.0);
    CHECK(energy_distance(a, b, 1) == doctest::Approx(2.0));
  }
  SUBCASE("identical large samples go to zero") {
    Rng rng(408);
    std::vector<double> a(4000);
    rng.fill_normal(a);
    std::vector<double> b(4000);
    rng.fill_normal(b);
    CHECK(energy_distance(a, b, 1) == doctest::Approx(0.0).epsilon(0.05));
    CHECK(std::abs(energy_distance(a, b, 1)) < 0.05);
  }
  SUBCASE("U-statistic matches a paired Monte-Carlo reference") {
    // N(0,1) vs N(2,1): reference from 1e6 paired draws
    Rng rng(409);
    const int64_t N = 1000000;
    double eab = 0.0, eaa = 0.0, ebb = 0.0;
    double eab2 = 0.0;
    for (int64_t i = 0; i < N; ++i) {
      const double a1 = rng.normal(), a2 = rng.normal();
      const double b1 = 2.0 + rng.normal(), b2 = 2.0 + rng.normal();
      const double ab = std::abs(a1 - b1);
      eab += ab;
      eab2 += ab * ab;
      eaa += std::abs(a1 - a2);
      ebb += std::abs(b1 - b2);
    }
    const double ref = 2.0 * eab / N - eaa / N - ebb / N;
    const double se = 2.0 * std::sqrt((eab2 / N - (eab / N) * (eab / N)) / N) * 2.0;
    std::vector<double> a(4096), b(4096);
    Rng srng(410);
    srng.fill_normal(a);
    srng.fill_normal(b);
    for (double& v : b) v += 2.0;
    const double got = energy_distance(a, b, 1);
    // the 4096-sample U-statistic has its own error ~ O(1/sqrt(n))
    CHECK(std::abs(got - ref) <= 3.0 * se + 0.08);
  }
  SUBCASE("nonnegativity and symmetry on random inputs") {
    Rng rng(411);
    for (int k = 0; k < 10; ++k) {
      std::vector<double> a(200), b(240);
      rng.fill_normal(a);
      rng.fill_normal(b);
      for (double& v : b) v += rng.uniform(-1.0, 1.0);
      const double ab = energy_distance(a, b, 2);
      CHECK(ab >= -1e-12);
      CHECK(ab == doctest::Approx(energy_distance(b, a, 2)));
    }
  }
  SUBCASE("empty sets rejected") {
    std::vector<double> a, b{1.0};
    Rng rng(412);
    CHECK_THROWS_AS(energy_distance(a, b, 1), std::invalid_argument);
    CHECK_THROWS_AS(sliced_w2(a, b, 1, 8, rng), std::invalid_argument);
  }
}

TEST_CASE("metrics record serialization is stable and finite") {
  MetricsRecord r;
  r.step = 42;
  r.losses["loss.fake"] = 0.5;
  r.losses["loss.gen"] = -0.25;
  r.sliced_w2 = 0.125;
  r.wall_ms = 17.0;
  const std::string line = r.to_json_line();
  CHECK(line.find("\"step\":42") != std::string::npos);
  CHECK(line.find("wall_ms") != std::string::npos);
  CHECK(r.stable_line().find("wall_ms") == std::string::npos);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
}
