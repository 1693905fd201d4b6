#include "realuid/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace realuid {

namespace {

using MatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutMatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Tape* tape_of(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->tracked()) continue;
    if (tape && tape != t->tape())
      throw std::logic_error("tensors from different tapes in one op");
    tape = t->tape();
  }
  return tape;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()) + " do not match");
}

double sigmoid_s(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_s(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  for (int64_t e : shape_)
    if (e <= 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape_));
  if (numel(shape_) != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape_));
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) {
  auto n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
  auto n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

std::span<const double> Tensor::values() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

double Tensor::value() const {
  if (size() != 1) throw std::logic_error("value() on non-scalar tensor " + shape_str(shape_));
  return (*data_)[0];
}

Tensor Tape::leaf(Shape shape, std::span<const double> values) {
  Tensor t(std::move(shape), std::vector<double>(values.begin(), values.end()));
  t.node_ = static_cast<int>(nodes_.size());
  t.tape_ = this;
  nodes_.push_back(Node{t.size(), {}, {}});
  return t;
}

Tensor Tape::record(Shape shape, std::vector<double> values, BackwardFn back) {
  Tensor t(std::move(shape), std::move(values));
  t.node_ = static_cast<int>(nodes_.size());
  t.tape_ = this;
  nodes_.push_back(Node{t.size(), {}, std::move(back)});
  return t;
}

std::vector<double>& Tape::grad_buf(int node) {
  Node& nd = nodes_.at(static_cast<size_t>(node));
  if (nd.grad.empty()) nd.grad.assign(static_cast<size_t>(nd.n), 0.0);
  return nd.grad;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.tracked() || loss.tape() != this)
    throw std::invalid_argument("backward: loss is not tracked on this tape");
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (backward_done_) throw std::logic_error("backward already run on this tape");
  backward_done_ = true;

  grad_buf(loss.node())[0] = 1.0;
  for (int i = loss.node(); i >= 0; --i) {
    Node& nd = nodes_[static_cast<size_t>(i)];
    if (nd.grad.empty() || !nd.back) continue;
    nd.back(*this, std::span<const double>(nd.grad));
  }
}

std::span<const double> Tape::grad(const Tensor& t) const {
  if (!t.tracked() || t.tape() != this) return {};
  return grad(t.node());
}

std::span<const double> Tape::grad(int node) const {
  const Node& nd = nodes_.at(static_cast<size_t>(node));
  return {nd.grad.data(), nd.grad.size()};
}

// ---------------------------------------------------------------------------
// ops

namespace {

// Captures a tensor's buffer without copying.
struct Held {
  std::shared_ptr<const std::vector<double>> buf;
  const double* p() const { return buf->data(); }
};

Held hold(const Tensor& t) { return Held{t.storage()}; }

void axpy(std::span<const double> g, std::vector<double>& out) {
  for (size_t i = 0; i < g.size(); ++i) out[i] += g[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const bool bias = a.shape().size() == 2 && b.shape().size() == 1 && a.shape()[1] == b.shape()[0];
  if (!bias) check_same_shape("add", a, b);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.begin(), av.end());
  if (bias) {
    const int64_t B = a.shape()[0], N = a.shape()[1];
    for (int64_t r = 0; r < B; ++r)
      for (int64_t c = 0; c < N; ++c) out[static_cast<size_t>(r * N + c)] += bv[static_cast<size_t>(c)];
  } else {
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  }
  Tape* tp = tape_of({&a, &b});
  if (!tp) return Tensor(a.shape(), std::move(out));
  const int na = a.tracked() ? a.node() : -1;
  const int nb = b.tracked() ? b.node() : -1;
  const int64_t B = bias ? a.shape()[0] : 0, N = bias ? a.shape()[1] : 0;
  return tp->record(a.shape(), std::move(out), [na, nb, bias, B, N](Tape& t, std::span<const double> g) {
    if (na >= 0) axpy(g, t.grad_buf(na));
    if (nb >= 0) {
      auto& gb = t.grad_buf(nb);
      if (bias) {
        for (int64_t r = 0; r < B; ++r)
          for (int64_t c = 0; c < N; ++c) gb[static_cast<size_t>(c)] += g[static_cast<size_t>(r * N + c)];
      } else {
        axpy(g, gb);
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const bool bias = a.shape().size() == 2 && b.shape().size() == 1 && a.shape()[1] == b.shape()[0];
  if (!bias) check_same_shape("sub", a, b);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.begin(), av.end());
  if (bias) {
    const int64_t B = a.shape()[0], N = a.shape()[1];
    for (int64_t r = 0; r < B; ++r)
      for (int64_t c = 0; c < N; ++c) out[static_cast<size_t>(r * N + c)] -= bv[static_cast<size_t>(c)];
  } else {
    for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  }
  Tape* tp = tape_of({&a, &b});
  if (!tp) return Tensor(a.shape(), std::move(out));
  const int na = a.tracked() ? a.node() : -1;
  const int nb = b.tracked() ? b.node() : -1;
  const int64_t B = bias ? a.shape()[0] : 0, N = bias ? a.shape()[1] : 0;
  return tp->record(a.shape(), std::move(out), [na, nb, bias, B, N](Tape& t, std::span<const double> g) {
    if (na >= 0) axpy(g, t.grad_buf(na));
    if (nb >= 0) {
      auto& gb = t.grad_buf(nb);
      if (bias) {
        for (int64_t r = 0; r < B; ++r)
          for (int64_t c = 0; c < N; ++c) gb[static_cast<size_t>(c)] -= g[static_cast<size_t>(r * N + c)];
      } else {
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const bool rowscale = a.shape().size() == 2 && b.shape().size() == 2 && b.shape()[1] == 1 &&
                        a.shape()[0] == b.shape()[0] && a.shape()[1] != 1;
  if (!rowscale) check_same_shape("mul", a, b);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  const int64_t B = a.shape().size() == 2 ? a.shape()[0] : 1;
  const int64_t N = a.shape().size() == 2 ? a.shape()[1] : a.size();
  if (rowscale) {
    for (int64_t r = 0; r < B; ++r)
      for (int64_t c = 0; c < N; ++c)
        out[static_cast<size_t>(r * N + c)] = av[static_cast<size_t>(r * N + c)] * bv[static_cast<size_t>(r)];
  } else {
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  }
  Tape* tp = tape_of({&a, &b});
  if (!tp) return Tensor(a.shape(), std::move(out));
  const int na = a.tracked() ? a.node() : -1;
  const int nb = b.tracked() ? b.node() : -1;
  Held ha = hold(a), hb = hold(b);
  return tp->record(a.shape(), std::move(out),
                    [na, nb, rowscale, B, N, ha, hb](Tape& t, std::span<const double> g) {
    if (na >= 0) {
      auto& ga = t.grad_buf(na);
      if (rowscale) {
        for (int64_t r = 0; r < B; ++r)
          for (int64_t c = 0; c < N; ++c)
            ga[static_cast<size_t>(r * N + c)] += g[static_cast<size_t>(r * N + c)] * hb.p()[r];
      } else {
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * hb.p()[i];
      }
    }
    if (nb >= 0) {
      auto& gb = t.grad_buf(nb);
      if (rowscale) {
        for (int64_t r = 0; r < B; ++r) {
          double acc = 0;
          for (int64_t c = 0; c < N; ++c)
            acc += g[static_cast<size_t>(r * N + c)] * ha.p()[r * N + c];
          gb[static_cast<size_t>(r)] += acc;
        }
      } else {
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ha.p()[i];
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("matmul: shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()) + " do not conform");
  const int64_t B = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
  std::vector<double> out(static_cast<size_t>(B * N));
  {
    MatMap A(a.values().data(), B, K), Bm(b.values().data(), K, N);
    MutMatMap C(out.data(), B, N);
    C.noalias() = A * Bm;
  }
  Tape* tp = tape_of({&a, &b});
  if (!tp) return Tensor({B, N}, std::move(out));
  const int na = a.tracked() ? a.node() : -1;
  const int nb = b.tracked() ? b.node() : -1;
  Held ha = hold(a), hb = hold(b);
  return tp->record({B, N}, std::move(out), [na, nb, B, K, N, ha, hb](Tape& t, std::span<const double> g) {
    MatMap G(g.data(), B, N);
    if (na >= 0) {
      MutMatMap GA(t.grad_buf(na).data(), B, K);
      MatMap Bm(hb.p(), K, N);
      GA.noalias() += G * Bm.transpose();
    }
    if (nb >= 0) {
      MutMatMap GB(t.grad_buf(nb).data(), K, N);
      MatMap A(ha.p(), B, K);
      GB.noalias() += A.transpose() * G;
    }
  });
}

namespace {

template <class Fwd, class Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd_factory) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  if (!a.tracked()) return Tensor(a.shape(), std::move(out));
  return bwd_factory(std::move(out));
}

}  // namespace

Tensor scale(const Tensor& a, double c) {
  return unary_op(a, [c](double x) { return c * x; }, [&](std::vector<double> out) {
    const int na = a.node();
    return a.tape()->record(a.shape(), std::move(out), [na, c](Tape& t, std::span<const double> g) {
      auto& ga = t.grad_buf(na);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op(a, [c](double x) { return x + c; }, [&](std::vector<double> out) {
    const int na = a.node();
    return a.tape()->record(a.shape(), std::move(out), [na](Tape& t, std::span<const double> g) {
      axpy(g, t.grad_buf(na));
    });
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0;
  for (double v : a.values()) acc += v;
  if (!a.tracked()) return Tensor::scalar(acc);
  const int na = a.node();
  const int64_t n = a.size();
  return a.tape()->record({1}, {acc}, [na, n](Tape& t, std::span<const double> g) {
    auto& ga = t.grad_buf(na);
    for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += g[0];
  });
}

Tensor mean(const Tensor& a) {
  double acc = 0;
  for (double v : a.values()) acc += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  if (!a.tracked()) return Tensor::scalar(acc * inv);
  const int na = a.node();
  const int64_t n = a.size();
  return a.tape()->record({1}, {acc * inv}, [na, n, inv](Tape& t, std::span<const double> g) {
    auto& ga = t.grad_buf(na);
    for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += g[0] * inv;
  });
}

Tensor rowsum(const Tensor& a) {
  if (a.shape().size() != 2)
    throw std::invalid_argument("rowsum: expected rank-2 tensor, got " + shape_str(a.shape()));
  const int64_t B = a.shape()[0], N = a.shape()[1];
  auto av = a.values();
  std::vector<double> out(static_cast<size_t>(B), 0.0);
  for (int64_t r = 0; r < B; ++r)
    for (int64_t c = 0; c < N; ++c) out[static_cast<size_t>(r)] += av[static_cast<size_t>(r * N + c)];
  if (!a.tracked()) return Tensor({B, 1}, std::move(out));
  const int na = a.node();
  return a.tape()->record({B, 1}, std::move(out), [na, B, N](Tape& t, std::span<const double> g) {
    auto& ga = t.grad_buf(na);
    for (int64_t r = 0; r < B; ++r)
      for (int64_t c = 0; c < N; ++c) ga[static_cast<size_t>(r * N + c)] += g[static_cast<size_t>(r)];
  });
}

Tensor square(const Tensor& a) {
  return unary_op(a, [](double x) { return x * x; }, [&](std::vector<double> out) {
    const int na = a.node();
    Held ha = hold(a);
    return a.tape()->record(a.shape(), std::move(out), [na, ha](Tape& t, std::span<const double> g) {
      auto& ga = t.grad_buf(na);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * ha.p()[i] * g[i];
    });
  });
}

Tensor sqrt(const Tensor& a) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(av[i]);
  if (!a.tracked()) return Tensor(a.shape(), std::move(out));
  const int na = a.node();
  auto held = std::make_shared<const std::vector<double>>(out);
  return a.tape()->record(a.shape(), std::move(out), [na, held](Tape& t, std::span<const double> g) {
    auto& ga = t.grad_buf(na);
    for (size_t i = 0; i < g.size(); ++i) {
      const double y = (*held)[i];
      if (y > 1e-150) ga[i] += 0.5 / y * g[i];  // flat at the origin, keeps 0-norm rows NaN-free
    }
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dot: shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()) + " differ in length");
  auto av = a.values();
  auto bv = b.values();
  double acc = 0;
  for (size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  Tape* tp = tape_of({&a, &b});
  if (!tp) return Tensor::scalar(acc);
  const int na = a.tracked() ? a.node() : -1;
  const int nb = b.tracked() ? b.node() : -1;
  Held ha = hold(a), hb = hold(b);
  return tp->record({1}, {acc}, [na, nb, ha, hb](Tape& t, std::span<const double> g) {
    if (na >= 0) {
      auto& ga = t.grad_buf(na);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * hb.p()[i];
    }
    if (nb >= 0) {
      auto& gb = t.grad_buf(nb);
      for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[0] * ha.p()[i];
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[0] != b.shape()[0])
    throw std::invalid_argument("concat_cols: shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()) + " do not share a row count");
  const int64_t B = a.shape()[0], Na = a.shape()[1], Nb = b.shape()[1];
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(static_cast<size_t>(B * (Na + Nb)));
  for (int64_t r = 0; r < B; ++r) {
    for (int64_t c = 0; c < Na; ++c) out[static_cast<size_t>(r * (Na + Nb) + c)] = av[static_cast<size_t>(r * Na + c)];
    for (int64_t c = 0; c < Nb; ++c) out[static_cast<size_t>(r * (Na + Nb) + Na + c)] = bv[static_cast<size_t>(r * Nb + c)];
  }
  Tape* tp = tape_of({&a, &b});
  if (!tp) return Tensor({B, Na + Nb}, std::move(out));
  const int na = a.tracked() ? a.node() : -1;
  const int nb = b.tracked() ? b.node() : -1;
  return tp->record({B, Na + Nb}, std::move(out), [na, nb, B, Na, Nb](Tape& t, std::span<const double> g) {
    if (na >= 0) {
      auto& ga = t.grad_buf(na);
      for (int64_t r = 0; r < B; ++r)
        for (int64_t c = 0; c < Na; ++c)
          ga[static_cast<size_t>(r * Na + c)] += g[static_cast<size_t>(r * (Na + Nb) + c)];
    }
    if (nb >= 0) {
      auto& gb = t.grad_buf(nb);
      for (int64_t r = 0; r < B; ++r)
        for (int64_t c = 0; c < Nb; ++c)
          gb[static_cast<size_t>(r * Nb + c)] += g[static_cast<size_t>(r * (Na + Nb) + Na + c)];
    }
  });
}

Tensor tanh(const Tensor& a) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  if (!a.tracked()) return Tensor(a.shape(), std::move(out));
  const int na = a.node();
  auto held = std::make_shared<const std::vector<double>>(out);
  return a.tape()->record(a.shape(), std::move(out), [na, held](Tape& t, std::span<const double> g) {
    auto& ga = t.grad_buf(na);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += (1.0 - (*held)[i] * (*held)[i]) * g[i];
  });
}

Tensor exp(const Tensor& a) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  if (!a.tracked()) return Tensor(a.shape(), std::move(out));
  const int na = a.node();
  auto held = std::make_shared<const std::vector<double>>(out);
  return a.tape()->record(a.shape(), std::move(out), [na, held](Tape& t, std::span<const double> g) {
    auto& ga = t.grad_buf(na);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += (*held)[i] * g[i];
  });
}

Tensor silu(const Tensor& a) {
  return unary_op(a, [](double x) { return x * sigmoid_s(x); }, [&](std::vector<double> out) {
    const int na = a.node();
    Held ha = hold(a);
    return a.tape()->record(a.shape(), std::move(out), [na, ha](Tape& t, std::span<const double> g) {
      auto& ga = t.grad_buf(na);
      for (size_t i = 0; i < g.size(); ++i) {
        const double s = sigmoid_s(ha.p()[i]);
        ga[i] += s * (1.0 + ha.p()[i] * (1.0 - s)) * g[i];
      }
    });
  });
}

Tensor sigmoid(const Tensor& a) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_s(av[i]);
  if (!a.tracked()) return Tensor(a.shape(), std::move(out));
  const int na = a.node();
  auto held = std::make_shared<const std::vector<double>>(out);
  return a.tape()->record(a.shape(), std::move(out), [na, held](Tape& t, std::span<const double> g) {
    auto& ga = t.grad_buf(na);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += (*held)[i] * (1.0 - (*held)[i]) * g[i];
  });
}

Tensor softplus(const Tensor& a) {
  return unary_op(a, softplus_s, [&](std::vector<double> out) {
    const int na = a.node();
    Held ha = hold(a);
    return a.tape()->record(a.shape(), std::move(out), [na, ha](Tape& t, std::span<const double> g) {
      auto& ga = t.grad_buf(na);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += sigmoid_s(ha.p()[i]) * g[i];
    });
  });
}

Tensor recip_guard(const Tensor& a, double eps) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] >= eps ? 1.0 / av[i] : 0.0;
  if (!a.tracked()) return Tensor(a.shape(), std::move(out));
  const int na = a.node();
  Held ha = hold(a);
  return a.tape()->record(a.shape(), std::move(out), [na, ha, eps](Tape& t, std::span<const double> g) {
    auto& ga = t.grad_buf(na);
    for (size_t i = 0; i < g.size(); ++i) {
      const double x = ha.p()[i];
      if (x >= eps) ga[i] -= g[i] / (x * x);
    }
  });
}

Tensor stop_grad(const Tensor& a) {
  Tensor t;
  t.shape_ = a.shape_;
  t.data_ = a.data_;  // forward value is identical, shares the buffer
  return t;
}

}  // namespace realuid
