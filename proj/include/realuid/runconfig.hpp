#pragma once

#include "realuid/losses.hpp"
#include "realuid/nets.hpp"
#include "realuid/paths.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>

namespace realuid {

/// Invalid configuration (missing/unknown keys, bad values). CLI exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mode/coefficient inconsistency (e.g. mixed-score distillation with
/// alpha != beta). CLI exit 4.
struct ModeError : ConfigError {
  using ConfigError::ConfigError;
};

/// Training aborted (NaN policy). CLI exit 3.
struct TrainingAborted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Mode { uid, real_uid, sid, general, normalized, dmd_real, gan_baseline, coupling };
Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct NetConfig {
  std::vector<int64_t> hidden{64, 64, 64};
  Activation activation = Activation::silu;
  int time_embed_dim = 16;
  bool residual = true;
  int64_t disc_hidden = 64;
};

struct TrainConfig {
  Mode mode = Mode::uid;
  int64_t k_fake_steps = 5;
  int64_t n_iters = 20000;
  int64_t batch_size = 256;
  double lr_fake = 1e-3;
  double lr_gen = 1e-3;
  double lr_teacher = 1e-3;
  int64_t teacher_iters = 20000;
  int64_t warmup_steps = 500;
  double ema_decay = 0.999;
  double clip_norm = 1.0;
  double weight_decay = 0.0;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.999;
  uint64_t seed = 1;
  int64_t eval_interval = 500;
  std::string fake_init = "random";  // or "teacher"
  bool init_gen_from_teacher = false;
  std::string time_weighting = "uniform";
  std::string lr_decay = "none";  // or "cosine"
};

struct EvalConfig {
  int n_projections = 128;
  int64_t n_samples = 4096;
  std::string metric = "auto";  // auto | w2_gauss | sliced_w2 | energy
  double threshold = 0.0;       // steps_to_threshold target for sweeps (0 = unset)
};

/// The resolved configuration of a run: sections `path`, `coeffs`, `net`,
/// `train`, `data`, `eval`. Unknown keys are rejected everywhere; the
/// resolved copy is written back into the run directory.
struct RunConfig {
  PathSpec path;
  Coeffs coeffs;
  NetConfig net;
  TrainConfig train;
  nlohmann::json data = nlohmann::json::object();
  EvalConfig eval;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& file);
  nlohmann::json to_json() const;

  /// Mode-specific coefficient constraints (throws ModeError).
  void validate() const;
};

}  // namespace realuid
