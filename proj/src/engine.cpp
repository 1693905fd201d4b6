#include "realuid/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace realuid {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double warmup_scale(int64_t step, int64_t warmup) {
  if (warmup <= 0) return 1.0;
  return std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(warmup));
}

double lr_schedule(const TrainConfig& tc, int64_t step, int64_t total, int64_t warmup) {
  double s = warmup_scale(step, warmup);
  if (tc.lr_decay == "cosine" && total > 1) {
    const double u = static_cast<double>(step) / static_cast<double>(total - 1);
    s *= 0.5 * (1.0 + std::cos(u * 3.14159265358979323846));
  }
  return s;
}

MlpSpec field_spec(const RunConfig& cfg, int64_t in_dim, int64_t out_dim) {
  MlpSpec s;
  s.widths.push_back(in_dim);
  for (int64_t w : cfg.net.hidden) s.widths.push_back(w);
  s.widths.push_back(out_dim);
  s.activation = cfg.net.activation;
  s.time_embed_dim = cfg.net.time_embed_dim;
  return s;
}

AdamW make_adam(const RunConfig& cfg, double lr) {
  AdamW a;
  a.lr = lr;
  a.beta1 = cfg.train.adam_beta1;
  a.beta2 = cfg.train.adam_beta2;
  a.weight_decay = cfg.train.weight_decay;
  a.clip_norm = cfg.train.clip_norm;
  return a;
}

// Tracks consecutive non-finite steps; aborts after three in a row.
struct NanGuard {
  int64_t skips = 0;
  int consecutive = 0;
  bool note(bool ok) {
    if (ok) {
      consecutive = 0;
      return false;
    }
    ++skips;
    return ++consecutive >= 3;
  }
};

struct Evaluator {
  const EvalConfig* ec = nullptr;
  int dim = 1;
  std::optional<Gauss1D> data_gauss;
  std::vector<double> ref;
  Rng rng{0};

  void fill(std::span<const double> samples, MetricsRecord& rec) {
    if (dim == 1 && data_gauss) rec.w2_gauss = w2_gaussian(fit_gauss1d(samples), *data_gauss);
    rec.sliced_w2 = sliced_w2(samples, ref, dim, ec->n_projections, rng);
    const size_t cap = 2048 * static_cast<size_t>(dim);
    rec.energy_dist = energy_distance(
        samples.subspan(0, std::min(samples.size(), cap)),
        std::span<const double>(ref).subspan(0, std::min(ref.size(), cap)), dim);
  }

  double headline(const MetricsRecord& rec) const {
    if (ec->metric == "w2_gauss" || (ec->metric == "auto" && rec.w2_gauss)) return *rec.w2_gauss;
    if (ec->metric == "energy") return *rec.energy_dist;
    return *rec.sliced_w2;
  }
};

}  // namespace

std::vector<double> standard_normal(Rng& rng, int64_t n) {
  std::vector<double> out(static_cast<size_t>(n));
  rng.fill_normal(out);
  return out;
}

// ---------------------------------------------------------------------------
// teacher pretraining

namespace {

TeacherResult train_teacher_impl(const RunConfig& cfg, int dim, bool conditional,
                                 const std::function<void(Rng&, std::vector<double>&, std::vector<double>&)>& draw_pair,
                                 MetricsSink& sink) {
  cfg.validate();
  const auto t0 = Clock::now();
  const int64_t B = cfg.train.batch_size;
  Rng root(cfg.train.seed);
  Rng init_rng = root.substream(11);
  Rng loop_rng = root.substream(12);

  Mlp teacher(field_spec(cfg, conditional ? 2 * dim : dim, dim), init_rng);
  AdamW opt = make_adam(cfg, cfg.train.lr_teacher);
  NanGuard guard;
  std::vector<double> last_good = teacher.params();
  bool aborted = false;
  double eval_loss = 0.0;

  std::vector<double> x0(static_cast<size_t>(B * dim)), xT(static_cast<size_t>(B * dim));

  auto eval_um = [&](int64_t n_eval, Rng& rng) {
    std::vector<double> ex0(static_cast<size_t>(n_eval * dim)), exT(static_cast<size_t>(n_eval * dim));
    draw_pair(rng, ex0, exT);
    Tensor x0t({n_eval, dim}, ex0), xTt({n_eval, dim}, exT);
    auto tb = sample_triples(cfg.path, x0t, xTt, rng);
    Tape tape;
    auto staged = teacher.stage(tape, false);
    FieldFn f = conditional ? bind_field(staged, xTt) : bind_field(staged);
    return um_loss(f, tb).total.value();
  };

  int64_t n = 0;
  for (; n < cfg.train.teacher_iters; ++n) {
    draw_pair(loop_rng, x0, xT);
    Tensor x0t({B, dim}, x0), xTt({B, dim}, xT);
    auto tb = sample_triples(cfg.path, x0t, xTt, loop_rng);

    Tape tape;
    auto staged = teacher.stage(tape, true);
    FieldFn f = conditional ? bind_field(staged, xTt) : bind_field(staged);
    auto parts = um_loss(f, tb);
    const double loss_val = parts.total.value();
    bool ok = std::isfinite(loss_val);
    if (ok) {
      tape.backward(parts.total);
      auto grads = staged.grads(tape);
      ok = opt.step(teacher.params(), grads,
                    lr_schedule(cfg.train, n, cfg.train.teacher_iters, cfg.train.warmup_steps));
    }
    if (guard.note(ok)) {
      aborted = true;
      teacher = Mlp(teacher.spec(), last_good);  // last good checkpoint
      break;
    }

    if ((n + 1) % cfg.train.eval_interval == 0 || n + 1 == cfg.train.teacher_iters) {
      Rng erng = root.substream(13).substream(static_cast<uint64_t>(n));
      eval_loss = eval_um(2048, erng);
      if (std::isfinite(eval_loss)) last_good = teacher.params();
      if (sink.emit) {
        MetricsRecord rec;
        rec.step = n + 1;
        rec.losses["um_loss"] = loss_val;
        rec.losses["um_loss_eval"] = eval_loss;
        rec.nan_skips = guard.skips;
        rec.wall_ms = ms_since(t0);
        sink.emit(rec);
      }
    }
  }
  return {std::move(teacher), aborted, eval_loss};
}

}  // namespace

TeacherResult train_teacher(const RunConfig& cfg, const Dataset& data, MetricsSink sink) {
  auto draw = [&data](Rng& rng, std::vector<double>& x0, std::vector<double>& xT) {
    data.sample(rng, x0);
    rng.fill_normal(xT);  // independent noise endpoint
  };
  return train_teacher_impl(cfg, data.dim, false, draw, sink);
}

TeacherResult train_teacher_coupling(const RunConfig& cfg, const CouplingDataset& data,
                                     MetricsSink sink) {
  auto draw = [&data](Rng& rng, std::vector<double>& x0, std::vector<double>& xT) {
    data.sample_pair(rng, x0, xT);
  };
  return train_teacher_impl(cfg, data.dim, true, draw, sink);
}

// ---------------------------------------------------------------------------
// distillation

namespace {

bool mode_needs_real(const RunConfig& cfg) {
  const Coeffs& c = cfg.coeffs;
  switch (cfg.train.mode) {
    case Mode::uid: return false;
    case Mode::gan_baseline: return true;
    case Mode::general: return c.alpha < 1.0 || c.beta < 1.0 || c.gamma < 1.0;
    case Mode::coupling: return true;
    default: return c.alpha < 1.0 || c.beta < 1.0;
  }
}

struct DistillLoop {
  const Mlp* teacher;
  const RunConfig* cfg;
  MetricsSink* sink;
  int dim;
  bool conditional = false;

  // per-iteration real endpoint draw; fills x0_real (and xT for couplings)
  std::function<void(Rng&, std::vector<double>& x0r, std::vector<double>& xT)> draw_real;
  Evaluator eval;
  std::function<double(std::span<const double>)> extra_metric;  // optional, logged as "mu_abs_err"

  DistillResult run(const DistillInit* init) {
    const RunConfig& c = *cfg;
    c.validate();
    const auto t0 = Clock::now();
    const int64_t B = c.train.batch_size;
    const int64_t D = dim;
    const Coeffs& co = c.coeffs;

    Rng root(c.train.seed);
    Rng init_rng = root.substream(21);
    Rng loop_rng = root.substream(22);
    eval.rng = root.substream(23);

    // generator: latents are D-dimensional; couplings add the endpoint input
    Generator gen;
    gen.residual = c.net.residual;
    gen.conditional = conditional;
    gen.net = Mlp(field_spec(c, conditional ? 2 * D : D, D), init_rng);
    if (init && init->gen_params) {
      if (init->gen_params->size() != gen.net.params().size())
        throw ConfigError("generator checkpoint does not match the configured architecture");
      gen.net.params() = *init->gen_params;
    } else if (c.train.init_gen_from_teacher && teacher->spec().widths == gen.net.spec().widths) {
      gen.net.params() = teacher->params();
    }

    Mlp fake = (init && init->fake_from_teacher) || c.train.fake_init == "teacher"
                   ? *teacher
                   : Mlp(teacher->spec(), init_rng);

    std::optional<Mlp> head;
    if (c.train.mode == Mode::gan_baseline) {
      MlpSpec hs;
      hs.widths = {teacher->spec().widths[teacher->spec().widths.size() - 2], c.net.disc_hidden, 1};
      hs.activation = c.net.activation;
      hs.time_embed_dim = 0;
      head = Mlp(hs, init_rng);
    }

    AdamW opt_fake = make_adam(c, c.train.lr_fake);
    AdamW opt_gen = make_adam(c, c.train.lr_gen);
    AdamW opt_head = make_adam(c, c.train.lr_fake);
    EmaState ema = EmaState::init(c.train.ema_decay, gen.net.params());
    if (init && init->ema_shadow) ema.shadow = *init->ema_shadow;

    const int64_t warmup = (init && init->no_warmup) ? 0 : c.train.warmup_steps;
    const bool needs_real = mode_needs_real(c);
    const uint64_t teacher_hash_before = fnv1a_hash(teacher->params());

    DistillResult res;
    res.best_metric = std::numeric_limits<double>::infinity();
    NanGuard guard;
    double last_fake_loss = 0.0, last_gen_loss = 0.0;
    double last_fake_gen_term = 0.0, last_fake_real_term = 0.0;

    std::vector<double> z(static_cast<size_t>(B * D)), x1(static_cast<size_t>(B * D));
    std::vector<double> x0r, xTr;

    int64_t n = 0;
    for (; n < c.train.n_iters; ++n) {
      loop_rng.fill_normal(z);
      if (!conditional) loop_rng.fill_normal(x1);
      auto t = sample_times(c.path, B, loop_rng);
      Tensor eps;
      if (c.path.uses_path_noise()) {
        std::vector<double> e(static_cast<size_t>(B * D));
        loop_rng.fill_normal(e);
        eps = Tensor({B, D}, std::move(e));
      }
      const bool gen_step = (n % c.train.k_fake_steps == 0);
      const bool want_real = conditional || (needs_real && (!gen_step || c.train.mode == Mode::gan_baseline));
      Tensor x0_real, x_end;
      if (want_real) {
        x0r.resize(static_cast<size_t>(B * D));
        xTr.resize(static_cast<size_t>(B * D));
        draw_real(loop_rng, x0r, xTr);
        x0_real = Tensor({B, D}, x0r);
        if (conditional) x_end = Tensor({B, D}, xTr);
      }
      if (!conditional) x_end = Tensor({B, D}, x1);

      Tensor z_t({B, D}, z);
      const double lr_scale = lr_schedule(c.train, n, c.train.n_iters, warmup);
      bool ok = true;

      if (!gen_step) {
        // fake-model refresh; generator outputs detached by staging it frozen
        Tape tape;
        auto gen_staged = gen.stage(tape, false);
        Tensor x0g = gen_staged(z_t, conditional ? x_end : Tensor{});
        auto gen_tb = build_triples(c.path, x0g, x_end, t, eps);
        TripleBatch real_tb;
        if (want_real) real_tb = build_triples(c.path, x0_real, x_end, t, eps);
        const TripleBatch* real_ptr = want_real ? &real_tb : nullptr;

        auto fake_staged = fake.stage(tape, true);
        FieldFn fake_f = conditional ? bind_field(fake_staged, x_end) : bind_field(fake_staged);
        std::optional<StagedMlp> head_staged;

        Tensor loss;
        LossParts parts;
        switch (c.train.mode) {
          case Mode::uid:
            parts = um_loss(fake_f, gen_tb);
            loss = parts.total;
            break;
          case Mode::real_uid:
          case Mode::sid:
          case Mode::coupling:
          case Mode::dmd_real:
            parts = real_uid_fake_step_loss(fake_f, gen_tb, real_ptr, co);
            loss = parts.total;
            break;
          case Mode::general: {
            auto teacher_staged = teacher->stage(tape, false);
            FieldFn teacher_f = conditional ? bind_field(teacher_staged, x_end) : bind_field(teacher_staged);
            FieldFn delta = [&](const Tensor& x, const Tensor& tt) {
              return sub(teacher_f(x, tt), fake_f(x, tt));
            };
            parts = general_real_uid_loss(delta, teacher_f, gen_tb, real_ptr, co);
            loss = scale(parts.total, -1.0);  // maximized over the fake
            break;
          }
          case Mode::normalized: {
            auto teacher_staged = teacher->stage(tape, false);
            FieldFn teacher_f = conditional ? bind_field(teacher_staged, x_end) : bind_field(teacher_staged);
            parts = normalized_real_uid_loss(teacher_f, fake_f, gen_tb, real_ptr, co);
            loss = scale(parts.total, -1.0);
            break;
          }
          case Mode::gan_baseline: {
            head_staged = head->stage(tape, true);
            FieldFn disc = [&](const Tensor& x, const Tensor& tt) {
              return (*head_staged)(fake_staged.features(x, tt), Tensor{});
            };
            parts = um_loss(fake_f, gen_tb);
            auto adv = adversarial_losses(disc, gen_tb, real_tb);
            loss = add(scale(parts.total, co.lambda_dist), scale(adv.disc_term, -co.lambda_adv_d));
            break;
          }
        }
        const double lv = loss.value();
        ok = std::isfinite(lv);
        if (ok) {
          tape.backward(loss);
          auto grads = fake_staged.grads(tape);
          ok = opt_fake.step(fake.params(), grads, lr_scale);
          if (ok && head_staged) {
            auto head_grads = head_staged->grads(tape);
            ok = opt_head.step(head->params(), head_grads, lr_scale);
          }
          last_fake_loss = lv;
          last_fake_gen_term = parts.gen_term.empty() ? lv : parts.gen_term.value();
          last_fake_real_term = parts.real_term.empty() ? 0.0 : parts.real_term.value();
        }
      } else {
        // generator update
        Tape tape;
        auto gen_staged = gen.stage(tape, true);
        Tensor x0g = gen_staged(z_t, conditional ? x_end : Tensor{});
        auto gen_tb = build_triples(c.path, x0g, x_end, t, eps);

        auto teacher_staged = teacher->stage(tape, false);
        auto fake_staged = fake.stage(tape, false);
        FieldFn teacher_f = conditional ? bind_field(teacher_staged, x_end) : bind_field(teacher_staged);
        FieldFn fake_f = conditional ? bind_field(fake_staged, x_end) : bind_field(fake_staged);

        Tensor loss;
        switch (c.train.mode) {
          case Mode::uid:
            loss = uid_generator_loss(teacher_f, fake_f, gen_tb).total;
            break;
          case Mode::real_uid:
          case Mode::coupling:
            loss = real_uid_generator_loss(teacher_f, fake_f, gen_tb, co).total;
            break;
          case Mode::sid:
            loss = sid_generator_loss(teacher_f, fake_f, gen_tb, co).total;
            break;
          case Mode::general: {
            FieldFn delta = [&](const Tensor& x, const Tensor& tt) {
              return sub(teacher_f(x, tt), fake_f(x, tt));
            };
            loss = general_real_uid_loss(delta, teacher_f, gen_tb, nullptr, co).gen_term;
            break;
          }
          case Mode::normalized:
            loss = normalized_real_uid_loss(teacher_f, fake_f, gen_tb, nullptr, co).gen_term;
            break;
          case Mode::dmd_real:
            loss = dmd_real_generator_loss(fake_f, teacher_f, gen_tb, co.alpha);
            break;
          case Mode::gan_baseline: {
            auto head_staged = head->stage(tape, false);
            FieldFn disc = [&](const Tensor& x, const Tensor& tt) {
              return head_staged(fake_staged.features(x, tt), Tensor{});
            };
            TripleBatch real_tb = build_triples(c.path, x0_real, x_end, t, eps);
            auto adv = adversarial_losses(disc, gen_tb, real_tb);
            Tensor dist = uid_generator_loss(teacher_f, fake_f, gen_tb).total;
            loss = add(scale(dist, co.lambda_dist), scale(adv.gen_term, co.lambda_adv_g));
            break;
          }
        }
        const double lv = loss.value();
        ok = std::isfinite(lv);
        if (ok) {
          tape.backward(loss);
          auto grads = gen_staged.grads(tape);
          ok = opt_gen.step(gen.net.params(), grads, lr_scale);
          if (ok) ema.update(gen.net.params());
          last_gen_loss = lv;
        }
      }

      if (guard.note(ok)) {
        res.aborted = true;
        ++n;
        break;
      }
      if (sink->step_probe)
        sink->step_probe(n, fnv1a_hash(gen.net.params()), fnv1a_hash(fake.params()));

      if ((n + 1) % c.train.eval_interval == 0 || n + 1 == c.train.n_iters) {
        MetricsRecord rec;
        rec.step = n + 1;
        rec.losses["loss.fake"] = last_fake_loss;
        rec.losses["loss.gen_term"] = last_fake_gen_term;
        rec.losses["loss.real_term"] = last_fake_real_term;
        rec.losses["loss.gen"] = last_gen_loss;
        auto samples = sample_eval(ema, gen);
        eval.fill(samples, rec);
        if (extra_metric) rec.losses["mu_abs_err"] = extra_metric(samples);
        rec.nan_skips = guard.skips;
        rec.wall_ms = ms_since(t0);
        const double m = eval.headline(rec);
        if (m < res.best_metric) {
          res.best_metric = m;
          res.best_step = n + 1;
          res.best_gen_params = gen.net.params();
          res.best_ema_shadow = ema.shadow;
        }
        if (sink->emit) sink->emit(rec);
      }
    }

    if (fnv1a_hash(teacher->params()) != teacher_hash_before)
      throw std::logic_error("teacher parameters changed during distillation");

    res.gen = std::move(gen);
    res.fake = std::move(fake);
    res.ema = std::move(ema);
    res.steps_done = n;
    if (res.best_step < 0) {
      res.best_gen_params = res.gen.net.params();
      res.best_ema_shadow = res.ema.shadow;
    }
    return res;
  }

  std::vector<double> sample_eval(const EmaState& ema, const Generator& gen) {
    const int64_t n = eval.ec->n_samples;
    auto z = standard_normal(eval.rng, n * dim);
    if (!conditional) return gen.eval(z, {}, n, ema.shadow);
    std::vector<double> x0(static_cast<size_t>(n * dim)), xT(static_cast<size_t>(n * dim));
    draw_real(eval.rng, x0, xT);
    return gen.eval(z, xT, n, ema.shadow);
  }
};

}  // namespace

DistillResult distill(const Mlp& teacher, const RunConfig& cfg, const Dataset& data,
                      MetricsSink sink, const DistillInit* init) {
  if (cfg.train.mode == Mode::coupling)
    throw ConfigError("coupling mode needs a coupling dataset; use distill_coupling");
  DistillLoop loop;
  loop.teacher = &teacher;
  loop.cfg = &cfg;
  loop.sink = &sink;
  loop.dim = data.dim;
  loop.conditional = false;
  loop.draw_real = [&data](Rng& rng, std::vector<double>& x0, std::vector<double>&) {
    data.sample(rng, x0);
  };
  loop.eval.ec = &cfg.eval;
  loop.eval.dim = data.dim;
  loop.eval.data_gauss = data.gauss;
  Rng ref_rng = Rng(cfg.train.seed).substream(24);
  loop.eval.ref = data.draw(ref_rng, cfg.eval.n_samples);
  if (data.gauss) {
    const double mu = data.gauss->mean;
    const int dim = data.dim;
    loop.extra_metric = [mu, dim](std::span<const double> s) {
      double m = 0.0;
      for (double v : s) m += v;
      return std::abs(m / static_cast<double>(s.size() / dim) - mu);
    };
  }
  return loop.run(init);
}

DistillResult distill_coupling(const Mlp& teacher, const RunConfig& cfg,
                               const CouplingDataset& data, MetricsSink sink,
                               const DistillInit* init) {
  if (cfg.train.mode != Mode::coupling)
    throw ConfigError("distill_coupling requires mode=coupling");
  DistillLoop loop;
  loop.teacher = &teacher;
  loop.cfg = &cfg;
  loop.sink = &sink;
  loop.dim = data.dim;
  loop.conditional = true;
  loop.draw_real = [&data](Rng& rng, std::vector<double>& x0, std::vector<double>& xT) {
    data.sample_pair(rng, x0, xT);
  };
  loop.eval.ec = &cfg.eval;
  loop.eval.dim = data.dim;
  Rng ref_rng = Rng(cfg.train.seed).substream(24);
  {
    const int64_t n = cfg.eval.n_samples;
    std::vector<double> x0(static_cast<size_t>(n * data.dim)), xT(static_cast<size_t>(n * data.dim));
    data.sample_pair(ref_rng, x0, xT);
    loop.eval.ref = x0;
  }
  return loop.run(init);
}

DistillResult finetune(const Mlp& teacher, std::span<const double> gen_params, const RunConfig& cfg,
                       const Dataset& data, MetricsSink sink) {
  DistillInit init;
  init.gen_params = std::vector<double>(gen_params.begin(), gen_params.end());
  init.fake_from_teacher = true;
  init.no_warmup = true;
  return distill(teacher, cfg, data, sink, &init);
}

// ---------------------------------------------------------------------------
// samplers

std::vector<double> sample_teacher_ode(const Mlp& teacher, const PathSpec& spec, int n_steps,
                                       int64_t n_samples, Rng& rng) {
  if (n_steps < 1) throw std::invalid_argument("sampler needs n_steps >= 1");
  if (spec.kind == PathKind::bridge_brownian)
    throw std::invalid_argument("bridge paths need endpoint conditioning; no unconditional sampler");
  const int64_t D = teacher.spec().widths.back();
  std::vector<double> x = standard_normal(rng, n_samples * D);
  std::vector<double> t(static_cast<size_t>(n_samples));
  const double dt = 1.0 / n_steps;
  for (int k = n_steps; k >= 1; --k) {
    const double tk = static_cast<double>(k) / n_steps;
    std::fill(t.begin(), t.end(), tk);
    auto f = teacher.eval(x, t, n_samples);
    if (spec.kind == PathKind::diffusion_vp) {
      // probability-flow step for the score model: dx = -sigma sigma_dot s dt
      const double sig = spec.sigma_t(tk);
      const double sig_dot = spec.sigma_max - spec.sigma_min;
      for (size_t i = 0; i < x.size(); ++i) x[i] += dt * sig * sig_dot * f[i];
    } else {
      for (size_t i = 0; i < x.size(); ++i) x[i] -= dt * f[i];
    }
  }
  return x;
}

std::vector<double> sample_generator(const Generator& gen, int64_t n_samples, Rng& rng,
                                     std::span<const double> ema_shadow) {
  auto z = standard_normal(rng, n_samples * gen.dim());
  return gen.eval(z, {}, n_samples, ema_shadow);
}

std::vector<double> sample_generator_cond(const Generator& gen, std::span<const double> x_end,
                                          Rng& rng, std::span<const double> ema_shadow) {
  const int64_t n = static_cast<int64_t>(x_end.size()) / gen.dim();
  auto z = standard_normal(rng, n * gen.dim());
  return gen.eval(z, x_end, n, ema_shadow);
}

}  // namespace realuid
