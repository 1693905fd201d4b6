#pragma once

#include "realuid/tensor.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace realuid {

/// Deterministic RNG stream. Substreams are derived from the root seed so
/// parallel workers stay reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  double uniform();               // [0,1)
  double uniform(double lo, double hi);
  double normal();                // standard normal
  uint64_t next_u64();
  void fill_normal(std::span<double> out);
  void fill_uniform(std::span<double> out, double lo, double hi);

  uint64_t seed() const { return seed_; }
  Rng substream(uint64_t salt) const;

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

uint64_t splitmix64(uint64_t x);

enum class Activation { tanh, silu };
Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

/// Sinusoidal features of t in [0,1]; dim must be even (pairs of sin/cos).
std::vector<double> time_embedding(std::span<const double> t, int dim);

struct MlpSpec {
  std::vector<int64_t> widths;  // widths[0] = feature dim (time embedding excluded), widths.back() = output dim
  Activation activation = Activation::silu;
  int time_embed_dim = 16;
  void validate() const;
};

class Mlp;

/// Per-tape handle for an Mlp: weights staged once so gradients accumulate
/// across repeated forward calls within a step. Frozen nets stage constants
/// and therefore contribute exactly zero parameter gradients.
struct StagedMlp {
  const Mlp* net = nullptr;
  std::vector<Tensor> weights, biases;
  bool trainable = false;

  Tensor operator()(const Tensor& x, const Tensor& t) const;
  Tensor features(const Tensor& x, const Tensor& t) const;  // last hidden layer
  std::vector<double> grads(const Tape& tape) const;  // flat, layer order; zeros where unreached
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, Rng& init_rng);
  Mlp(MlpSpec spec, std::vector<double> params);

  const MlpSpec& spec() const { return spec_; }
  int64_t param_count() const { return static_cast<int64_t>(params_.size()); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  StagedMlp stage(Tape& tape, bool trainable) const;
  /// One-off forward pass for plain (non-training) evaluation.
  std::vector<double> eval(std::span<const double> x, std::span<const double> t, int64_t batch) const;

 private:
  MlpSpec spec_;
  std::vector<double> params_;  // per layer: W (in*out, row-major) then b (out)
  friend struct StagedMlp;
};

struct Generator {
  Mlp net;
  bool residual = true;
  bool conditional = false;

  struct Staged {
    StagedMlp net;
    bool residual = false;
    bool conditional = false;
    Tensor operator()(const Tensor& z, const Tensor& x_end = {}) const;
    std::vector<double> grads(const Tape& tape) const { return net.grads(tape); }
  };
  Staged stage(Tape& tape, bool trainable) const;

  /// Plain sampling forward, optionally with substitute (EMA) parameters.
  std::vector<double> eval(std::span<const double> z, std::span<const double> x_end, int64_t batch,
                           std::span<const double> params_override = {}) const;
  int64_t dim() const { return net.spec().widths.back(); }
};

struct EmaState {
  double decay = 0.999;
  std::vector<double> shadow;

  static EmaState init(double decay, std::span<const double> params);
  void update(std::span<const double> params);
};

/// Decoupled-weight-decay adaptive-moment optimizer with global gradient-norm
/// clipping applied before the moment updates.
struct AdamW {
  double lr = 1e-3;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 1.0;  // <=0 disables clipping

  /// Returns false (and leaves params untouched) when the gradient is not finite.
  bool step(std::span<double> params, std::span<double> grads, double lr_scale = 1.0);

 private:
  std::vector<double> m_, v_;
  int64_t t_ = 0;
};

uint64_t fnv1a_hash(std::span<const double> data);

}  // namespace realuid
