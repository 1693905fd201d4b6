#pragma once

#include "realuid/paths.hpp"
#include "realuid/tensor.hpp"

#include <functional>
#include <utility>

namespace realuid {

/// Loss-mixing coefficients. alpha = beta = gamma = 1 reduces every
/// real-data variant to its data-free form exactly.
struct Coeffs {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double alpha_sid = 0.5;
  double lambda_adv_g = 0.0;
  double lambda_adv_d = 0.0;
  double lambda_dist = 1.0;

  void validate() const;
  bool data_free() const { return alpha == 1.0 && beta == 1.0; }
};

/// A field evaluation closure: (x_t, t) -> [B,D]. Networks are bound through
/// StagedMlp (live or frozen); oracle closed forms can be bound for tests.
using FieldFn = std::function<Tensor(const Tensor& x_t, const Tensor& t)>;

FieldFn bind_field(const StagedMlp& net);
/// Conditional variant: evaluates net on concat(x_t, x_end).
FieldFn bind_field(const StagedMlp& net, const Tensor& x_end);

struct LossParts {
  Tensor total;
  Tensor gen_term;   // generated-data term
  Tensor real_term;  // real-data term; empty when the loss has none
};

/// Mean over triples of ||f(t,x_t) - target||^2.
LossParts um_loss(const FieldFn& f, const TripleBatch& triples);

/// Two-term matching loss with real data. At alpha = 1 the real term
/// degenerates to -2 (1-beta) <f, target*> (the expanded square minus its
/// vanished quadratic piece); at alpha = beta = 1 it is exactly zero.
LossParts real_um_loss(const FieldFn& f, const TripleBatch& gen, const TripleBatch* real,
                       const Coeffs& c);

/// Difference of squared residuals of teacher and (frozen) fake on generated
/// triples; the data-free generator objective.
LossParts uid_generator_loss(const FieldFn& teacher, const FieldFn& fake, const TripleBatch& gen);

/// Fake-model step objective (identical to real_um_loss; generator outputs
/// must be staged frozen so no gradient reaches them).
LossParts real_uid_fake_step_loss(const FieldFn& fake, const TripleBatch& gen,
                                  const TripleBatch* real, const Coeffs& c);

/// Generator step objective: the alpha-scaled residual difference on
/// generated triples only (real data reaches the generator through the fake
/// model alone).
LossParts real_uid_generator_loss(const FieldFn& teacher, const FieldFn& fake,
                                  const TripleBatch& gen, const Coeffs& c);

/// Six-term delta-form objective with the quadratic coefficient split by
/// gamma. Maximized over delta; delta defaults to teacher - fake at the call
/// site.
LossParts general_real_uid_loss(const FieldFn& delta, const FieldFn& teacher,
                                const TripleBatch& gen, const TripleBatch* real, const Coeffs& c);

/// Scaled-quadratic generator objective with delta = teacher - fake; at
/// alpha_sid = 0.5 and alpha = beta = 1 it equals uid_generator_loss after
/// expanding the squares.
LossParts sid_generator_loss(const FieldFn& teacher, const FieldFn& fake, const TripleBatch& gen,
                             const Coeffs& c);

/// Direction-normalized objective estimating the non-squared distance.
/// Samples whose direction norm falls below eps_norm contribute zero.
LossParts normalized_real_uid_loss(const FieldFn& teacher, const FieldFn& fake,
                                   const TripleBatch& gen, const TripleBatch* real, const Coeffs& c,
                                   double eps_norm = 1e-8);

/// Surrogate whose gradient w.r.t. x_t equals alpha (fake_score - teacher_score) / B,
/// the KL-mixture estimator; both scores are evaluated without gradients.
Tensor dmd_real_generator_loss(const FieldFn& fake_score, const FieldFn& teacher_score,
                               const TripleBatch& gen, double alpha);

struct AdvParts {
  Tensor gen_term;   // mean ln(1 - D(x_t^gen)), minimized by the generator
  Tensor disc_term;  // mean ln D(x_t^real) + mean ln(1 - D(x_t^gen)), maximized by the discriminator
};

/// Logistic discriminator terms from a logit head.
AdvParts adversarial_losses(const FieldFn& disc_logit, const TripleBatch& gen,
                            const TripleBatch& real);

}  // namespace realuid
