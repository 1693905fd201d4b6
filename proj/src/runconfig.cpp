#include "realuid/runconfig.hpp"

#include <fstream>
#include <set>

namespace realuid {

using nlohmann::json;

Mode mode_from_string(const std::string& s) {
  if (s == "uid") return Mode::uid;
  if (s == "real_uid") return Mode::real_uid;
  if (s == "sid") return Mode::sid;
  if (s == "general") return Mode::general;
  if (s == "normalized") return Mode::normalized;
  if (s == "dmd_real") return Mode::dmd_real;
  if (s == "gan_baseline") return Mode::gan_baseline;
  if (s == "coupling") return Mode::coupling;
  throw ConfigError("unknown mode '" + s + "'");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::uid: return "uid";
    case Mode::real_uid: return "real_uid";
    case Mode::sid: return "sid";
    case Mode::general: return "general";
    case Mode::normalized: return "normalized";
    case Mode::dmd_real: return "dmd_real";
    case Mode::gan_baseline: return "gan_baseline";
    case Mode::coupling: return "coupling";
  }
  return "?";
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("section '" + where + "' must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in section '" + where + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j, {"path", "coeffs", "net", "train", "data", "eval"}, "<root>");
  RunConfig c;

  if (j.contains("path")) {
    const json& p = j.at("path");
    check_keys(p, {"kind", "sigma_min", "sigma_max", "bridge_eps", "gamma_amp", "t_lo", "t_hi"},
               "path");
    std::string kind = to_string(c.path.kind);
    read(p, "kind", kind);
    c.path.kind = path_kind_from_string(kind);
    read(p, "sigma_min", c.path.sigma_min);
    read(p, "sigma_max", c.path.sigma_max);
    read(p, "bridge_eps", c.path.bridge_eps);
    read(p, "gamma_amp", c.path.gamma_amp);
    read(p, "t_lo", c.path.t_lo);
    read(p, "t_hi", c.path.t_hi);
  }

  if (j.contains("coeffs")) {
    const json& p = j.at("coeffs");
    check_keys(p, {"alpha", "beta", "gamma", "alpha_sid", "lambda_adv_g", "lambda_adv_d", "lambda_dist"},
               "coeffs");
    read(p, "alpha", c.coeffs.alpha);
    read(p, "beta", c.coeffs.beta);
    read(p, "gamma", c.coeffs.gamma);
    read(p, "alpha_sid", c.coeffs.alpha_sid);
    read(p, "lambda_adv_g", c.coeffs.lambda_adv_g);
    read(p, "lambda_adv_d", c.coeffs.lambda_adv_d);
    read(p, "lambda_dist", c.coeffs.lambda_dist);
  }

  if (j.contains("net")) {
    const json& p = j.at("net");
    check_keys(p, {"hidden", "activation", "time_embed_dim", "residual", "disc_hidden"}, "net");
    read(p, "hidden", c.net.hidden);
    if (p.contains("activation"))
      c.net.activation = activation_from_string(p.at("activation").get<std::string>());
    read(p, "time_embed_dim", c.net.time_embed_dim);
    read(p, "residual", c.net.residual);
    read(p, "disc_hidden", c.net.disc_hidden);
  }

  if (j.contains("train")) {
    const json& p = j.at("train");
    check_keys(p,
               {"mode", "k_fake_steps", "n_iters", "batch_size", "lr_fake", "lr_gen", "lr_teacher",
                "teacher_iters", "warmup_steps", "ema_decay", "clip_norm", "weight_decay",
                "adam_beta1", "adam_beta2", "seed", "eval_interval", "fake_init",
                "init_gen_from_teacher", "time_weighting", "lr_decay"},
               "train");
    if (p.contains("mode")) c.train.mode = mode_from_string(p.at("mode").get<std::string>());
    read(p, "k_fake_steps", c.train.k_fake_steps);
    read(p, "n_iters", c.train.n_iters);
    read(p, "batch_size", c.train.batch_size);
    read(p, "lr_fake", c.train.lr_fake);
    read(p, "lr_gen", c.train.lr_gen);
    read(p, "lr_teacher", c.train.lr_teacher);
    read(p, "teacher_iters", c.train.teacher_iters);
    read(p, "warmup_steps", c.train.warmup_steps);
    read(p, "ema_decay", c.train.ema_decay);
    read(p, "clip_norm", c.train.clip_norm);
    read(p, "weight_decay", c.train.weight_decay);
    read(p, "adam_beta1", c.train.adam_beta1);
    read(p, "adam_beta2", c.train.adam_beta2);
    read(p, "seed", c.train.seed);
    read(p, "eval_interval", c.train.eval_interval);
    read(p, "fake_init", c.train.fake_init);
    read(p, "init_gen_from_teacher", c.train.init_gen_from_teacher);
    read(p, "time_weighting", c.train.time_weighting);
    read(p, "lr_decay", c.train.lr_decay);
  }

  if (j.contains("data")) c.data = j.at("data");

  if (j.contains("eval")) {
    const json& p = j.at("eval");
    check_keys(p, {"n_projections", "n_samples", "metric", "threshold"}, "eval");
    read(p, "n_projections", c.eval.n_projections);
    read(p, "n_samples", c.eval.n_samples);
    read(p, "metric", c.eval.metric);
    read(p, "threshold", c.eval.threshold);
  }

  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& file) {
  std::ifstream f(file);
  if (!f) throw ConfigError("cannot open config file '" + file + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + file + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json j;
  j["path"] = {{"kind", to_string(path.kind)},   {"sigma_min", path.sigma_min},
               {"sigma_max", path.sigma_max},    {"bridge_eps", path.bridge_eps},
               {"gamma_amp", path.gamma_amp},    {"t_lo", path.t_lo},
               {"t_hi", path.t_hi}};
  j["coeffs"] = {{"alpha", coeffs.alpha},
                 {"beta", coeffs.beta},
                 {"gamma", coeffs.gamma},
                 {"alpha_sid", coeffs.alpha_sid},
                 {"lambda_adv_g", coeffs.lambda_adv_g},
                 {"lambda_adv_d", coeffs.lambda_adv_d},
                 {"lambda_dist", coeffs.lambda_dist}};
  j["net"] = {{"hidden", net.hidden},
              {"activation", to_string(net.activation)},
              {"time_embed_dim", net.time_embed_dim},
              {"residual", net.residual},
              {"disc_hidden", net.disc_hidden}};
  j["train"] = {{"mode", to_string(train.mode)},
                {"k_fake_steps", train.k_fake_steps},
                {"n_iters", train.n_iters},
                {"batch_size", train.batch_size},
                {"lr_fake", train.lr_fake},
                {"lr_gen", train.lr_gen},
                {"lr_teacher", train.lr_teacher},
                {"teacher_iters", train.teacher_iters},
                {"warmup_steps", train.warmup_steps},
                {"ema_decay", train.ema_decay},
                {"clip_norm", train.clip_norm},
                {"weight_decay", train.weight_decay},
                {"adam_beta1", train.adam_beta1},
                {"adam_beta2", train.adam_beta2},
                {"seed", train.seed},
                {"eval_interval", train.eval_interval},
                {"fake_init", train.fake_init},
                {"init_gen_from_teacher", train.init_gen_from_teacher},
                {"time_weighting", train.time_weighting},
                {"lr_decay", train.lr_decay}};
  j["data"] = data;
  j["eval"] = {{"n_projections", eval.n_projections},
               {"n_samples", eval.n_samples},
               {"metric", eval.metric},
               {"threshold", eval.threshold}};
  return j;
}

void RunConfig::validate() const {
  try {
    coeffs.validate();
    path.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (train.k_fake_steps < 1) throw ConfigError("k_fake_steps must be >= 1");
  if (train.n_iters < 1 || train.batch_size < 1) throw ConfigError("n_iters and batch_size must be >= 1");
  if (!(train.lr_fake > 0 && train.lr_gen > 0 && train.lr_teacher > 0))
    throw ConfigError("learning rates must be positive");
  if (train.warmup_steps < 0) throw ConfigError("warmup_steps must be nonnegative");
  if (!(train.ema_decay >= 0.0 && train.ema_decay <= 1.0)) throw ConfigError("ema_decay must lie in [0,1]");
  if (!(train.clip_norm > 0)) throw ConfigError("clip_norm must be positive");
  for (int64_t w : net.hidden)
    if (w <= 0) throw ConfigError("net hidden widths must be positive");
  if (net.hidden.empty()) throw ConfigError("net needs at least one hidden layer");
  if (train.fake_init != "random" && train.fake_init != "teacher")
    throw ConfigError("fake_init must be 'random' or 'teacher'");
  if (train.time_weighting != "uniform")
    throw ConfigError("only uniform time weighting is implemented");
  if (train.lr_decay != "none" && train.lr_decay != "cosine")
    throw ConfigError("lr_decay must be 'none' or 'cosine'");
  if (train.eval_interval < 1) throw ConfigError("eval_interval must be >= 1");

  switch (train.mode) {
    case Mode::dmd_real:
      if (coeffs.alpha != coeffs.beta)
        throw ModeError("dmd_real requires alpha == beta (mixed-score training collapses otherwise)");
      if (path.kind != PathKind::diffusion_vp)
        throw ModeError("dmd_real requires the diffusion_vp path");
      break;
    case Mode::coupling:
      if (path.kind != PathKind::bridge_brownian && path.kind != PathKind::interpolant)
        throw ModeError("coupling mode requires a bridge_brownian or interpolant path");
      break;
    default:
      break;
  }
}

}  // namespace realuid
