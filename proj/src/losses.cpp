#include "realuid/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace realuid {

void Coeffs::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_unit(alpha) || !in_unit(beta) || !in_unit(gamma))
    throw std::invalid_argument("coefficients alpha, beta, gamma must lie in (0,1]");
  if (alpha_sid < 0.0 || lambda_adv_g < 0.0 || lambda_adv_d < 0.0 || lambda_dist < 0.0)
    throw std::invalid_argument("alpha_sid and lambda weights must be nonnegative");
}

FieldFn bind_field(const StagedMlp& net) {
  return [net](const Tensor& x_t, const Tensor& t) { return net(x_t, t); };
}

FieldFn bind_field(const StagedMlp& net, const Tensor& x_end) {
  return [net, x_end](const Tensor& x_t, const Tensor& t) {
    return net(concat_cols(x_t, x_end), t);
  };
}

namespace {

// (1/B) sum_i ||a_i - b_i||^2. All real-data reductions run through here so
// that the alpha = beta = 1 paths stay bitwise identical to the data-free ones.
Tensor mean_sq_diff(const Tensor& a, const Tensor& b, int64_t batch) {
  return scale(sum(square(sub(a, b))), 1.0 / static_cast<double>(batch));
}

// (1/B) sum_i <a_i, b_i>
Tensor mean_inner(const Tensor& a, const Tensor& b, int64_t batch) {
  return scale(dot(a, b), 1.0 / static_cast<double>(batch));
}

void require_nonempty(const TripleBatch& tb, const char* who) {
  if (tb.batch <= 0) throw std::invalid_argument(std::string(who) + ": empty triple batch");
}

}  // namespace

LossParts um_loss(const FieldFn& f, const TripleBatch& triples) {
  require_nonempty(triples, "um_loss");
  Tensor out = f(triples.x_t, triples.t_col);
  Tensor total = mean_sq_diff(out, triples.target, triples.batch);
  return {total, total, {}};
}

LossParts real_um_loss(const FieldFn& f, const TripleBatch& gen, const TripleBatch* real,
                       const Coeffs& c) {
  c.validate();
  require_nonempty(gen, "real_um_loss");
  Tensor f_gen = f(gen.x_t, gen.t_col);
  Tensor gen_term =
      scale(mean_sq_diff(f_gen, scale(gen.target, c.beta / c.alpha), gen.batch), c.alpha);
  Tensor real_term;
  if (c.alpha < 1.0) {
    if (!real) throw std::invalid_argument("real_um_loss: alpha < 1 needs real triples");
    require_nonempty(*real, "real_um_loss(real)");
    Tensor f_real = f(real->x_t, real->t_col);
    Tensor scaled = scale(real->target, (1.0 - c.beta) / (1.0 - c.alpha));
    real_term = scale(mean_sq_diff(f_real, scaled, real->batch), 1.0 - c.alpha);
  } else if (c.beta < 1.0) {
    if (!real) throw std::invalid_argument("real_um_loss: beta < 1 needs real triples");
    require_nonempty(*real, "real_um_loss(real)");
    Tensor f_real = f(real->x_t, real->t_col);
    real_term = scale(mean_inner(f_real, real->target, real->batch), -2.0 * (1.0 - c.beta));
  }
  Tensor total = real_term.empty() ? gen_term : add(gen_term, real_term);
  return {total, gen_term, real_term};
}

LossParts uid_generator_loss(const FieldFn& teacher, const FieldFn& fake, const TripleBatch& gen) {
  require_nonempty(gen, "uid_generator_loss");
  Tensor teacher_res = mean_sq_diff(teacher(gen.x_t, gen.t_col), gen.target, gen.batch);
  Tensor fake_res = mean_sq_diff(fake(gen.x_t, gen.t_col), gen.target, gen.batch);
  Tensor total = sub(teacher_res, fake_res);
  return {total, total, {}};
}

LossParts real_uid_fake_step_loss(const FieldFn& fake, const TripleBatch& gen,
                                  const TripleBatch* real, const Coeffs& c) {
  return real_um_loss(fake, gen, real, c);
}

LossParts real_uid_generator_loss(const FieldFn& teacher, const FieldFn& fake,
                                  const TripleBatch& gen, const Coeffs& c) {
  c.validate();
  require_nonempty(gen, "real_uid_generator_loss");
  Tensor scaled = scale(gen.target, c.beta / c.alpha);
  Tensor teacher_res = scale(mean_sq_diff(teacher(gen.x_t, gen.t_col), scaled, gen.batch), c.alpha);
  Tensor fake_res = scale(mean_sq_diff(fake(gen.x_t, gen.t_col), scaled, gen.batch), c.alpha);
  Tensor total = sub(teacher_res, fake_res);
  return {total, total, {}};
}

LossParts general_real_uid_loss(const FieldFn& delta, const FieldFn& teacher,
                                const TripleBatch& gen, const TripleBatch* real, const Coeffs& c) {
  c.validate();
  require_nonempty(gen, "general_real_uid_loss");
  Tensor d_gen = delta(gen.x_t, gen.t_col);
  Tensor quad = scale(scale(sum(square(d_gen)), 1.0 / gen.batch), -c.gamma);
  Tensor with_teacher = scale(mean_inner(d_gen, teacher(gen.x_t, gen.t_col), gen.batch), 2.0 * c.alpha);
  Tensor with_target = scale(mean_inner(d_gen, gen.target, gen.batch), -2.0 * c.beta);
  Tensor gen_term = add(add(quad, with_teacher), with_target);

  Tensor real_term;
  if (real) {
    require_nonempty(*real, "general_real_uid_loss(real)");
    Tensor d_real = delta(real->x_t, real->t_col);
    Tensor quad_r = scale(scale(sum(square(d_real)), 1.0 / real->batch), -(1.0 - c.gamma));
    Tensor with_teacher_r =
        scale(mean_inner(d_real, teacher(real->x_t, real->t_col), real->batch), 2.0 * (1.0 - c.alpha));
    Tensor with_target_r = scale(mean_inner(d_real, real->target, real->batch), -2.0 * (1.0 - c.beta));
    real_term = add(add(quad_r, with_teacher_r), with_target_r);
  }
  Tensor total = real_term.empty() ? gen_term : add(gen_term, real_term);
  return {total, gen_term, real_term};
}

LossParts sid_generator_loss(const FieldFn& teacher, const FieldFn& fake, const TripleBatch& gen,
                             const Coeffs& c) {
  c.validate();
  require_nonempty(gen, "sid_generator_loss");
  Tensor teacher_out = teacher(gen.x_t, gen.t_col);
  Tensor d = sub(teacher_out, fake(gen.x_t, gen.t_col));
  Tensor quad = scale(scale(sum(square(d)), 1.0 / gen.batch), -2.0 * c.alpha_sid * c.alpha);
  Tensor with_teacher = scale(mean_inner(d, teacher_out, gen.batch), 2.0 * c.alpha);
  Tensor with_target = scale(mean_inner(d, gen.target, gen.batch), -2.0 * c.beta);
  Tensor total = add(add(quad, with_teacher), with_target);
  return {total, total, {}};
}

namespace {

Tensor normalized_side(const FieldFn& teacher, const FieldFn& fake, const TripleBatch& tb,
                       double w_teacher, double w_target, double eps_norm) {
  Tensor t_out = teacher(tb.x_t, tb.t_col);
  Tensor d = sub(t_out, fake(tb.x_t, tb.t_col));
  Tensor inv_norm = recip_guard(realuid::sqrt(rowsum(square(d))), eps_norm);
  Tensor unit = mul(d, inv_norm);
  Tensor w = sub(scale(t_out, w_teacher), scale(tb.target, w_target));
  return mean_inner(unit, w, tb.batch);
}

}  // namespace

LossParts normalized_real_uid_loss(const FieldFn& teacher, const FieldFn& fake,
                                   const TripleBatch& gen, const TripleBatch* real, const Coeffs& c,
                                   double eps_norm) {
  c.validate();
  require_nonempty(gen, "normalized_real_uid_loss");
  Tensor gen_term = normalized_side(teacher, fake, gen, c.alpha, c.beta, eps_norm);
  Tensor real_term;
  if (real && (c.alpha < 1.0 || c.beta < 1.0)) {
    require_nonempty(*real, "normalized_real_uid_loss(real)");
    real_term = normalized_side(teacher, fake, *real, 1.0 - c.alpha, 1.0 - c.beta, eps_norm);
  }
  Tensor total = real_term.empty() ? gen_term : add(gen_term, real_term);
  return {total, gen_term, real_term};
}

Tensor dmd_real_generator_loss(const FieldFn& fake_score, const FieldFn& teacher_score,
                               const TripleBatch& gen, double alpha) {
  require_nonempty(gen, "dmd_real_generator_loss");
  Tensor frozen_xt = stop_grad(gen.x_t);
  Tensor fs = stop_grad(fake_score(frozen_xt, gen.t_col));
  Tensor ts = stop_grad(teacher_score(frozen_xt, gen.t_col));
  Tensor v = scale(sub(fs, ts), alpha);
  return mean_inner(gen.x_t, v, gen.batch);
}

AdvParts adversarial_losses(const FieldFn& disc_logit, const TripleBatch& gen,
                            const TripleBatch& real) {
  require_nonempty(gen, "adversarial_losses");
  require_nonempty(real, "adversarial_losses(real)");
  Tensor z_real = disc_logit(real.x_t, real.t_col);
  Tensor z_gen = disc_logit(gen.x_t, gen.t_col);
  // ln D = -softplus(-z), ln(1-D) = -softplus(z)
  Tensor ln_d_real = scale(mean(softplus(scale(z_real, -1.0))), -1.0);
  Tensor ln_1m_d_gen = scale(mean(softplus(z_gen)), -1.0);
  return {ln_1m_d_gen, add(ln_d_real, ln_1m_d_gen)};
}

}  // namespace realuid
