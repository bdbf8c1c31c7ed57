#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fdgan/autograd.hpp"

namespace fdgan::losses {

/// Mixing weights for the combined objective plus the one-sided label
/// smoothing amount used by the discriminator losses.
struct LossWeights {
  double lambda_id = 0.1;
  double lambda_pd = 0.1;
  double lambda_r = 10.0;
  double lambda_sp = 1.0;
  double label_smoothing = 0.1;

  void validate() const {
    require(lambda_id >= 0 && lambda_pd >= 0 && lambda_r >= 0 && lambda_sp >= 0,
            "loss weights must be nonnegative");
    require(label_smoothing >= 0 && label_smoothing < 0.5,
            "label smoothing must lie in [0, 0.5)");
  }
};

/// Per-iteration scalar values of every term. Discriminator-side and
/// generator-side adversarial terms are tracked separately because they are
/// optimized on disjoint parameter sets.
struct LossReport {
  double l_v = 0;     // verification
  double l_id_d = 0;  // identity discriminator, D-step
  double l_id_g = 0;  // identity adversarial, G-step
  double l_pd_d = 0;  // pose discriminator, D-step
  double l_pd_g = 0;  // pose adversarial, G-step
  double l_r = 0;     // reconstruction
  double l_sp = 0;    // same-pose
  double total = 0;   // combined generator-side objective
  long saturated = 0; // probability clamp activations this iteration
};

namespace detail {

constexpr double kProbEps = 1e-7;

template <typename S>
Var<S> clamped_prob(const Var<S>& p, long* saturated) {
  return clamp(p, static_cast<S>(kProbEps), static_cast<S>(1.0 - kProbEps),
               saturated);
}

template <typename S>
Var<S> const_like(const Var<S>& v, S value) {
  ArrayX<S> a = ArrayX<S>::Constant(v.shape().numel(), value);
  return Var<S>::leaf(v.shape(), std::move(a), false);
}

}  // namespace detail

/// Binary cross-entropy of same-identity probabilities against {0,1} targets,
/// averaged over the batch. Probabilities are clamped to
/// [1e-7, 1-1e-7]; clamp activations increment *saturated when given.
template <typename S>
Var<S> verification_loss(const Var<S>& probs, const ArrayX<S>& targets,
                         long* saturated = nullptr) {
  require(probs.shape().rank == 1, "verification_loss: probs must be a vector");
  require(probs.shape().numel() == targets.size(),
          "verification_loss: target count mismatch");
  require(probs.shape().numel() > 0, "verification_loss: empty batch");
  for (Index i = 0; i < targets.size(); ++i)
    require(targets[i] == S(0) || targets[i] == S(1),
            "verification_loss: targets must be 0 or 1");
  Var<S> p = detail::clamped_prob(probs, saturated);
  Var<S> t = Var<S>::leaf(probs.shape(), targets, false);
  Var<S> ones = detail::const_like(probs, S(1));
  Var<S> ll = add(mul(t, log_val(p)), mul(sub(ones, t), log_val(sub(ones, p))));
  return scale(mean_all(ll), S(-1));
}

/// Discriminator-side adversarial loss with one-sided label smoothing:
///   -(1-eps) * mean(log D(real)) - mean(log(1 - D(fake))).
/// Call once per Siamese branch and sum; batch averaging happens inside.
template <typename S>
Var<S> adversarial_discriminator_loss(const Var<S>& real_probs,
                                      const Var<S>& fake_probs, double eps,
                                      long* saturated = nullptr) {
  require(real_probs.shape().numel() > 0 && fake_probs.shape().numel() > 0,
          "adversarial_discriminator_loss: empty score set");
  require(eps >= 0 && eps < 0.5,
          "adversarial_discriminator_loss: smoothing must lie in [0, 0.5)");
  Var<S> pr = detail::clamped_prob(real_probs, saturated);
  Var<S> pf = detail::clamped_prob(fake_probs, saturated);
  Var<S> real_term = scale(mean_all(log_val(pr)), static_cast<S>(-(1.0 - eps)));
  Var<S> ones = detail::const_like(pf, S(1));
  Var<S> fake_term = scale(mean_all(log_val(sub(ones, pf))), S(-1));
  return add(real_term, fake_term);
}

/// Non-saturating generator-side adversarial loss: -mean(log D(fake)).
template <typename S>
Var<S> adversarial_generator_loss(const Var<S>& fake_probs,
                                  long* saturated = nullptr) {
  require(fake_probs.shape().numel() > 0,
          "adversarial_generator_loss: empty score set");
  Var<S> pf = detail::clamped_prob(fake_probs, saturated);
  return scale(mean_all(log_val(pf)), S(-1));
}

/// Reduces a PatchGAN confidence map (N,1,h,w) to one probability per sample
/// by arithmetic mean, before any log term is applied.
template <typename S>
Var<S> patch_average(const Var<S>& maps) {
  require(maps.shape().rank == 4 && maps.shape()[1] == 1,
          "patch_average: expected (N,1,h,w) confidence maps");
  return mean_per_sample(maps);
}

/// Mean absolute difference over every value of the generated/truth stacks.
/// Callers must skip samples whose ground-truth image is absent.
template <typename S>
Var<S> reconstruction_loss(const Var<S>& generated, const Var<S>& truth) {
  require(generated.shape() == truth.shape(),
          "reconstruction_loss: shape mismatch between generated and truth");
  require(generated.shape().numel() > 0, "reconstruction_loss: empty input");
  return mean_all(abs_val(sub(generated, truth)));
}

/// Mean absolute difference between the two branches' generations. Only
/// defined for positive pairs (same identity, same target pose, shared noise).
template <typename S>
Var<S> same_pose_loss(const Var<S>& generated_1, const Var<S>& generated_2) {
  require(generated_1.shape() == generated_2.shape(),
          "same_pose_loss: branch output shapes differ");
  require(generated_1.shape().numel() > 0, "same_pose_loss: empty input");
  return mean_all(abs_val(sub(generated_1, generated_2)));
}

/// Checked variant: refuses negative pairs outright.
template <typename S>
Var<S> same_pose_loss(const Var<S>& generated_1, const Var<S>& generated_2,
                      const std::vector<char>& is_positive_pair) {
  for (char flag : is_positive_pair)
    require(flag != 0, "same_pose_loss: called on a negative pair");
  require(!is_positive_pair.empty(), "same_pose_loss: empty pair set");
  return same_pose_loss(generated_1, generated_2);
}

namespace detail {

inline double checked_term(double v, const char* name) {
  if (!std::isfinite(v)) throw divergence_error(name);
  return v;
}

}  // namespace detail

/// Combined objective on a generator-side step:
///   L = L_v + l_id*L_id + l_pd*L_pd + l_r*L_r + l_sp*L_sp,
/// accumulated left to right. Throws divergence_error naming the first
/// non-finite term.
inline double total_objective(const LossReport& parts, const LossWeights& w) {
  double t = detail::checked_term(parts.l_v, "L_v");
  t += w.lambda_id * detail::checked_term(parts.l_id_g, "L_id");
  t += w.lambda_pd * detail::checked_term(parts.l_pd_g, "L_pd");
  t += w.lambda_r * detail::checked_term(parts.l_r, "L_r");
  t += w.lambda_sp * detail::checked_term(parts.l_sp, "L_sp");
  if (!std::isfinite(t)) throw divergence_error("total");
  return t;
}

/// Differentiable twin of total_objective with the identical left-to-right
/// association, so the backward graph optimizes exactly the reported value.
template <typename S>
Var<S> objective_var(const Var<S>& l_v, const Var<S>& l_id_g,
                     const Var<S>& l_pd_g, const Var<S>& l_r,
                     const Var<S>& l_sp, const LossWeights& w) {
  Var<S> t = l_v;
  t = add(t, scale(l_id_g, static_cast<S>(w.lambda_id)));
  t = add(t, scale(l_pd_g, static_cast<S>(w.lambda_pd)));
  t = add(t, scale(l_r, static_cast<S>(w.lambda_r)));
  t = add(t, scale(l_sp, static_cast<S>(w.lambda_sp)));
  return t;
}

}  // namespace fdgan::losses
