#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace realuid {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

/// Dense row-major tensor of 64-bit reals. Values are immutable once built;
/// every op returns a fresh tensor. A tensor is either a plain constant or
/// tracked on a Tape (node >= 0), in which case backward() can reach it.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);

  const Shape& shape() const { return shape_; }
  int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
  bool empty() const { return !data_; }
  std::span<const double> values() const;
  double value() const;  // scalar convenience
  double operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

  bool tracked() const { return node_ >= 0; }
  int node() const { return node_; }
  Tape* tape() const { return tape_; }

  /// Shared immutable storage; used by op internals to keep values alive.
  const std::shared_ptr<const std::vector<double>>& storage() const { return data_; }

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  int node_ = -1;
  Tape* tape_ = nullptr;
  friend class Tape;
  friend Tensor stop_grad(const Tensor&);
};

/// Append-only record of tensor operations. Node order is forward order; the
/// backward pass walks nodes in strict reverse order exactly once. One
/// backward() per tape.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::span<const double>)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Tracked leaf (parameter or input that wants a gradient).
  Tensor leaf(Shape shape, std::span<const double> values);

  /// Runs reverse accumulation from a scalar loss.
  void backward(const Tensor& loss);

  /// Gradient of the last backward() w.r.t. a tracked tensor. Empty span
  /// means the tensor was never reached, i.e. its gradient is zero.
  std::span<const double> grad(const Tensor& t) const;
  std::span<const double> grad(int node) const;

  int size() const { return static_cast<int>(nodes_.size()); }

  // op plumbing
  Tensor record(Shape shape, std::vector<double> values, BackwardFn back);
  std::vector<double>& grad_buf(int node);

 private:
  struct Node {
    int64_t n = 0;
    std::vector<double> grad;  // allocated lazily during backward
    BackwardFn back;           // empty for leaves
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Recorded operations. Inputs may live on at most one tape; results are
// tracked iff any input is. Shape violations throw std::invalid_argument
// naming both shapes.
Tensor add(const Tensor& a, const Tensor& b);   // equal shapes, or b=[N] bias row vs a=[B,N]
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);   // equal shapes, or b=[B,1] row scale vs a=[B,N]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor rowsum(const Tensor& a);                 // [B,N] -> [B,1]
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);   // sum of elementwise products -> scalar
Tensor concat_cols(const Tensor& a, const Tensor& b);  // [B,Na],[B,Nb] -> [B,Na+Nb]
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor recip_guard(const Tensor& a, double eps);  // x>=eps ? 1/x : 0
Tensor stop_grad(const Tensor& a);

}  // namespace realuid
