#pragma once

#include "realuid/checkpoint.hpp"
#include "realuid/datasets.hpp"
#include "realuid/evalkit.hpp"
#include "realuid/losses.hpp"
#include "realuid/runconfig.hpp"

#include <functional>
#include <optional>

namespace realuid {

/// Receives evaluation records (and, when set, per-step parameter hashes so
/// tests can watch the alternation schedule).
struct MetricsSink {
  std::function<void(const MetricsRecord&)> emit;
  std::function<void(int64_t step, uint64_t gen_hash, uint64_t fake_hash)> step_probe;
};

struct TeacherResult {
  Mlp net;
  bool aborted = false;
  double eval_loss = 0.0;  // matching loss on a fresh batch at the last eval
};

/// Matching-loss pretraining of the teacher on real data.
TeacherResult train_teacher(const RunConfig& cfg, const Dataset& data, MetricsSink sink = {});
TeacherResult train_teacher_coupling(const RunConfig& cfg, const CouplingDataset& data,
                                     MetricsSink sink = {});

struct DistillResult {
  Generator gen;
  Mlp fake;
  EmaState ema;
  bool aborted = false;
  int64_t steps_done = 0;
  double best_metric = 0.0;
  int64_t best_step = -1;
  std::vector<double> best_gen_params, best_ema_shadow;
};

struct DistillInit {
  std::optional<std::vector<double>> gen_params;
  std::optional<std::vector<double>> ema_shadow;
  bool fake_from_teacher = false;
  bool no_warmup = false;
};

/// The alternating min-max loop: K-1 of every K steps refresh the fake model,
/// steps with n % K == 0 update the generator. The teacher stays frozen.
DistillResult distill(const Mlp& teacher, const RunConfig& cfg, const Dataset& data,
                      MetricsSink sink = {}, const DistillInit* init = nullptr);

/// Same loop over couplings: everything conditioned on the endpoint x_T and
/// the generator maps (z, x_T) -> x0.
DistillResult distill_coupling(const Mlp& teacher, const RunConfig& cfg,
                               const CouplingDataset& data, MetricsSink sink = {},
                               const DistillInit* init = nullptr);

/// Fine-tuning stage: generator restarts from a checkpoint, the fake model
/// restarts from the teacher, no warm-up.
DistillResult finetune(const Mlp& teacher, std::span<const double> gen_params, const RunConfig& cfg,
                       const Dataset& data, MetricsSink sink = {});

/// Euler integration of the learned field from noise (t=1) down to data (t=0).
std::vector<double> sample_teacher_ode(const Mlp& teacher, const PathSpec& spec, int n_steps,
                                       int64_t n_samples, Rng& rng);

/// One-step sampling x0 = G(z), z ~ N(0, I); pass the EMA shadow to sample in
/// evaluation mode.
std::vector<double> sample_generator(const Generator& gen, int64_t n_samples, Rng& rng,
                                     std::span<const double> ema_shadow = {});
std::vector<double> sample_generator_cond(const Generator& gen, std::span<const double> x_end,
                                          Rng& rng, std::span<const double> ema_shadow = {});

std::vector<double> standard_normal(Rng& rng, int64_t n);

}  // namespace realuid
