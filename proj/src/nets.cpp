#include "realuid/nets.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace realuid {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Rng::Rng(uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

double Rng::uniform() {
  return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
}

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen_);
}

double Rng::normal() { return normal_(gen_); }

uint64_t Rng::next_u64() { return gen_(); }

void Rng::fill_normal(std::span<double> out) {
  for (double& v : out) v = normal_(gen_);
}

void Rng::fill_uniform(std::span<double> out, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : out) v = d(gen_);
}

Rng Rng::substream(uint64_t salt) const {
  return Rng(splitmix64(seed_ ^ splitmix64(salt + 0x51ed270b84229ull)));
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "silu") return Activation::silu;
  throw std::invalid_argument("unknown activation '" + s + "' (expected tanh or silu)");
}

std::string to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "silu";
}

std::vector<double> time_embedding(std::span<const double> t, int dim) {
  if (dim % 2 != 0 || dim < 0)
    throw std::invalid_argument("time_embed_dim must be even and nonnegative, got " + std::to_string(dim));
  const int pairs = dim / 2;
  std::vector<double> out(t.size() * static_cast<size_t>(dim));
  for (size_t i = 0; i < t.size(); ++i) {
    double omega = std::numbers::pi;
    for (int k = 0; k < pairs; ++k) {
      out[i * dim + 2 * k] = std::sin(omega * t[i]);
      out[i * dim + 2 * k + 1] = std::cos(omega * t[i]);
      omega *= 2.0;
    }
  }
  return out;
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("mlp needs at least input and output widths");
  for (int64_t w : widths)
    if (w <= 0) throw std::invalid_argument("mlp widths must be positive");
  if (time_embed_dim < 0 || time_embed_dim % 2 != 0)
    throw std::invalid_argument("time_embed_dim must be even and nonnegative");
}

namespace {

int64_t layer_in(const MlpSpec& s, size_t layer) {
  return layer == 0 ? s.widths[0] + s.time_embed_dim : s.widths[layer];
}

int64_t param_total(const MlpSpec& s) {
  int64_t n = 0;
  for (size_t l = 0; l + 1 < s.widths.size(); ++l)
    n += layer_in(s, l) * s.widths[l + 1] + s.widths[l + 1];
  return n;
}

}  // namespace

Mlp::Mlp(MlpSpec spec, Rng& init_rng) : spec_(std::move(spec)) {
  spec_.validate();
  params_.resize(static_cast<size_t>(param_total(spec_)));
  size_t off = 0;
  for (size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
    const int64_t in = layer_in(spec_, l), out = spec_.widths[l + 1];
    const double sd = 1.0 / std::sqrt(static_cast<double>(in));
    for (int64_t i = 0; i < in * out; ++i) params_[off++] = sd * init_rng.normal();
    off += static_cast<size_t>(out);  // biases stay zero
  }
}

Mlp::Mlp(MlpSpec spec, std::vector<double> params) : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (static_cast<int64_t>(params_.size()) != param_total(spec_))
    throw std::invalid_argument("mlp parameter blob of length " + std::to_string(params_.size()) +
                                " does not match spec (" + std::to_string(param_total(spec_)) + ")");
}

StagedMlp Mlp::stage(Tape& tape, bool trainable) const {
  StagedMlp s;
  s.net = this;
  s.trainable = trainable;
  size_t off = 0;
  for (size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
    const int64_t in = layer_in(spec_, l), out = spec_.widths[l + 1];
    std::span<const double> w(params_.data() + off, static_cast<size_t>(in * out));
    off += static_cast<size_t>(in * out);
    std::span<const double> b(params_.data() + off, static_cast<size_t>(out));
    off += static_cast<size_t>(out);
    if (trainable) {
      s.weights.push_back(tape.leaf({in, out}, w));
      s.biases.push_back(tape.leaf({out}, b));
    } else {
      s.weights.push_back(Tensor({in, out}, std::vector<double>(w.begin(), w.end())));
      s.biases.push_back(Tensor({out}, std::vector<double>(b.begin(), b.end())));
    }
  }
  return s;
}

namespace {

Tensor mlp_trunk(const StagedMlp& s, const Tensor& x, const Tensor& t, bool with_head) {
  const MlpSpec& spec = s.net->spec();
  if (x.shape().size() != 2 || x.shape()[1] != spec.widths[0])
    throw std::invalid_argument("mlp forward: input " + shape_str(x.shape()) + " does not match width " +
                                std::to_string(spec.widths[0]));
  Tensor h = x;
  if (spec.time_embed_dim > 0) {
    if (t.empty() || t.shape()[0] != x.shape()[0])
      throw std::invalid_argument("mlp forward: time column missing or wrong length");
    Tensor emb({x.shape()[0], spec.time_embed_dim}, time_embedding(t.values(), spec.time_embed_dim));
    h = concat_cols(h, emb);
  }
  const size_t layers = s.weights.size();
  for (size_t l = 0; l < layers; ++l) {
    const bool last = (l + 1 == layers);
    if (last && !with_head) return h;
    h = add(matmul(h, s.weights[l]), s.biases[l]);
    if (!last) h = spec.activation == Activation::tanh ? realuid::tanh(h) : silu(h);
  }
  return h;
}

}  // namespace

Tensor StagedMlp::operator()(const Tensor& x, const Tensor& t) const {
  return mlp_trunk(*this, x, t, /*with_head=*/true);
}

Tensor StagedMlp::features(const Tensor& x, const Tensor& t) const {
  return mlp_trunk(*this, x, t, /*with_head=*/false);
}

std::vector<double> StagedMlp::grads(const Tape& tape) const {
  std::vector<double> out(static_cast<size_t>(net->param_count()), 0.0);
  if (!trainable) return out;
  size_t off = 0;
  for (size_t l = 0; l < weights.size(); ++l) {
    for (const Tensor* t : {&weights[l], &biases[l]}) {
      auto g = tape.grad(*t);
      if (!g.empty()) std::memcpy(out.data() + off, g.data(), g.size() * sizeof(double));
      off += static_cast<size_t>(t->size());
    }
  }
  return out;
}

std::vector<double> Mlp::eval(std::span<const double> x, std::span<const double> t, int64_t batch) const {
  Tape tape;  // nothing staged as trainable: pure eager evaluation
  auto staged = stage(tape, false);
  Tensor xt({batch, spec_.widths[0]}, std::vector<double>(x.begin(), x.end()));
  Tensor tc;
  if (spec_.time_embed_dim > 0)
    tc = Tensor({batch, 1}, std::vector<double>(t.begin(), t.end()));
  Tensor out = staged(xt, tc);
  return std::vector<double>(out.values().begin(), out.values().end());
}

Generator::Staged Generator::stage(Tape& tape, bool trainable) const {
  Staged s;
  s.net = net.stage(tape, trainable);
  s.residual = residual;
  s.conditional = conditional;
  return s;
}

Tensor Generator::Staged::operator()(const Tensor& z, const Tensor& x_end) const {
  Tensor in = z;
  if (conditional) {
    if (x_end.empty())
      throw std::invalid_argument("conditional generator needs an endpoint input");
    in = concat_cols(z, x_end);
  } else if (!x_end.empty()) {
    throw std::invalid_argument("unconditional generator got an endpoint input");
  }
  Tensor t0 = Tensor::zeros({z.shape()[0], 1});  // fixed control input t=0
  Tensor out = net(in, t0);
  if (residual) out = add(out, z);
  return out;
}

std::vector<double> Generator::eval(std::span<const double> z, std::span<const double> x_end, int64_t batch,
                                    std::span<const double> params_override) const {
  const Generator* g = this;
  Generator tmp;
  if (!params_override.empty()) {
    tmp.net = Mlp(net.spec(), std::vector<double>(params_override.begin(), params_override.end()));
    tmp.residual = residual;
    tmp.conditional = conditional;
    g = &tmp;
  }
  Tape tape;
  auto staged = g->stage(tape, false);
  const int64_t D = g->dim();
  Tensor zt({batch, D}, std::vector<double>(z.begin(), z.end()));
  Tensor et;
  if (conditional) et = Tensor({batch, D}, std::vector<double>(x_end.begin(), x_end.end()));
  Tensor out = staged(zt, et);
  return std::vector<double>(out.values().begin(), out.values().end());
}

EmaState EmaState::init(double decay, std::span<const double> params) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw std::invalid_argument("ema decay must lie in [0,1]");
  return EmaState{decay, std::vector<double>(params.begin(), params.end())};
}

void EmaState::update(std::span<const double> params) {
  if (params.size() != shadow.size())
    throw std::invalid_argument("ema update: got " + std::to_string(params.size()) +
                                " params for shadow of length " + std::to_string(shadow.size()));
  for (size_t i = 0; i < shadow.size(); ++i)
    shadow[i] = decay * shadow[i] + (1.0 - decay) * params[i];
}

bool AdamW::step(std::span<double> params, std::span<double> grads, double lr_scale) {
  if (params.size() != grads.size())
    throw std::invalid_argument("optimizer step: parameter/gradient length mismatch");
  if (m_.empty()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  if (!std::isfinite(sq)) return false;

  if (clip_norm > 0.0) {
    const double nrm = std::sqrt(sq);
    if (nrm > clip_norm) {
      const double s = clip_norm / nrm;
      for (double& g : grads) g *= s;
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  const double step_lr = lr * lr_scale;
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * grads[i];
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= step_lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * params[i]);
  }
  return true;
}

uint64_t fnv1a_hash(std::span<const double> data) {
  uint64_t h = 0xcbf29ce484222325ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  for (size_t i = 0; i < data.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace realuid
