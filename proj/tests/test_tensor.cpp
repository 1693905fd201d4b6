#include "doctest.h"

#include "realuid/tensor.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace realuid;

TEST_CASE("forward op values") {
  CHECK(dot(Tensor({2}, {1, 2}), Tensor({2}, {3, 4})).value() == doctest::Approx(11.0));
  CHECK(sum(Tensor::zeros({5})).value() == 0.0);

  // matmul against the identity
  Rng rng(7);
  Tensor x = testutil::randn(rng, {3, 3});
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor y = matmul(eye, x);
  for (int64_t i = 0; i < 9; ++i) CHECK(y[i] == doctest::Approx(x[i]));

  CHECK(mean(Tensor({4}, {1, 2, 3, 4})).value() == doctest::Approx(2.5));
  CHECK(square(Tensor({2}, {3, -2}))[1] == doctest::Approx(4.0));
  CHECK(realuid::sqrt(Tensor({1}, {9.0})).value() == doctest::Approx(3.0));
  Tensor cc = concat_cols(Tensor({2, 1}, {1, 2}), Tensor({2, 2}, {3, 4, 5, 6}));
  CHECK(cc.shape() == Shape{2, 3});
  CHECK(cc[4] == doctest::Approx(5.0));
  CHECK(softplus(Tensor({1}, {0.0})).value() == doctest::Approx(std::log(2.0)));
  CHECK(sigmoid(Tensor({1}, {0.0})).value() == doctest::Approx(0.5));
}

TEST_CASE("shape mismatches are rejected with both shapes named") {
  Tensor a({2, 3}, std::vector<double>(6, 1.0));
  Tensor b({4}, std::vector<double>(4, 1.0));
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2,3]"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[4]"), std::invalid_argument);
  CHECK_THROWS_AS(dot(a, b), std::invalid_argument);
}

TEST_CASE("backward through simple graphs") {
  SUBCASE("power rule: d(x^2)/dx = 2x") {
    Tape tape;
    Tensor x = tape.leaf({1}, std::vector<double>{3.0});
    Tensor loss = square(x);
    tape.backward(loss);
    CHECK(tape.grad(x)[0] == doctest::Approx(6.0));
  }
  SUBCASE("non-scalar loss rejected") {
    Tape tape;
    Tensor x = tape.leaf({2}, std::vector<double>{1.0, 2.0});
    CHECK_THROWS_AS(tape.backward(square(x)), std::invalid_argument);
  }
  SUBCASE("mul, rowscale, bias broadcast") {
    Tape tape;
    Tensor x = tape.leaf({2, 2}, std::vector<double>{1, 2, 3, 4});
    Tensor s({2, 1}, {2, 3});
    Tensor b = tape.leaf({2}, std::vector<double>{0.5, -0.5});
    Tensor loss = sum(add(mul(x, s), b));
    tape.backward(loss);
    auto gx = tape.grad(x);
    CHECK(gx[0] == doctest::Approx(2.0));
    CHECK(gx[3] == doctest::Approx(3.0));
    auto gb = tape.grad(b);
    CHECK(gb[0] == doctest::Approx(2.0));  // two rows
  }
}

TEST_CASE("stop_grad contract") {
  SUBCASE("value identical, shares no gradient") {
    Tape tape;
    Tensor y = tape.leaf({3}, std::vector<double>{1, 2, 3});
    Tensor sg = stop_grad(y);
    for (int64_t i = 0; i < 3; ++i) CHECK(sg[i] == y[i]);
    Tensor x = tape.leaf({3}, std::vector<double>{4, 5, 6});
    Tensor loss = dot(sg, x);
    tape.backward(loss);
    CHECK(tape.grad(y).empty());  // zero gradient: never reached
    CHECK(tape.grad(x)[0] == doctest::Approx(1.0));
  }
  SUBCASE("grad of <stop_grad(x), x> is x, not 2x") {
    Tape tape;
    Tensor x = tape.leaf({2}, std::vector<double>{2.0, -3.0});
    Tensor loss = dot(stop_grad(x), x);
    tape.backward(loss);
    auto g = tape.grad(x);
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(-3.0));
  }
  SUBCASE("nested stop_grad is idempotent") {
    Tensor x({2}, {1.0, 2.0});
    Tensor a = stop_grad(x);
    Tensor b = stop_grad(a);
    CHECK(b[0] == a[0]);
    CHECK(b[1] == a[1]);
    CHECK_FALSE(b.tracked());
  }
}

TEST_CASE("tape visits nodes once in reverse order") {
  // x used twice: gradient must accumulate exactly once per use
  Tape tape;
  Tensor x = tape.leaf({1}, std::vector<double>{2.0});
  Tensor loss = add(square(x), scale(x, 3.0));  // x^2 + 3x -> 2x + 3 = 7
  tape.backward(loss);
  CHECK(tape.grad(x)[0] == doctest::Approx(7.0));
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("elementwise backward rules against finite differences") {
  Rng rng(11);
  for (auto op : {0, 1, 2, 3, 4, 5}) {
    std::vector<double> params(6);
    rng.fill_normal(params);
    for (double& p : params) p = 0.3 + std::abs(p);  // keep sqrt/recip in range
    auto eval = [&]() {
      Tape tape;
      Tensor x = tape.leaf({2, 3}, params);
      Tensor y;
      switch (op) {
        case 0: y = realuid::tanh(x); break;
        case 1: y = silu(x); break;
        case 2: y = realuid::sqrt(x); break;
        case 3: y = sigmoid(x); break;
        case 4: y = softplus(x); break;
        default: y = recip_guard(x, 1e-8); break;
      }
      return dot(y, y).value();
    };
    auto fd = testutil::finite_diff(params, eval);
    Tape tape;
    Tensor x = tape.leaf({2, 3}, params);
    Tensor y;
    switch (op) {
      case 0: y = realuid::tanh(x); break;
      case 1: y = silu(x); break;
      case 2: y = realuid::sqrt(x); break;
      case 3: y = sigmoid(x); break;
      case 4: y = softplus(x); break;
      default: y = recip_guard(x, 1e-8); break;
    }
    tape.backward(dot(y, y));
    CHECK(testutil::max_rel_err(tape.grad(x), fd) < 1e-6);
  }
}

TEST_CASE("recip_guard zeroes degenerate entries") {
  Tape tape;
  Tensor x = tape.leaf({2}, std::vector<double>{0.0, 2.0});
  Tensor y = recip_guard(x, 1e-8);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(0.5));
  tape.backward(sum(y));
  auto g = tape.grad(x);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == doctest::Approx(-0.25));
}
