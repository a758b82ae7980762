// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#include "baldro/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace baldro {

namespace {

void check_same_shape(const ToyModel& a, const ToyModel& b) {
  const bool same = a.variant == b.variant && a.vocab_size == b.vocab_size &&
                    a.context_order == b.context_order &&
                    a.embed_dim == b.embed_dim &&
                    a.hidden_dim == b.hidden_dim &&
                    a.params.size() == b.params.size();
  if (!same) throw std::invalid_argument("model and reference shapes differ");
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log_sigmoid(double x) {
  // log sigmoid(x) = -log(1 + e^{-x}) = x - log(1 + e^{x})
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double ga_loss(const ToyModel& m, const Sample& s, Eigen::Ref<Vec> grad) {
  return mean_logprob_and_grad(m, s, grad);
}

double npo_loss(const ToyModel& m, const RefModel& ref, const Sample& s,
                double alpha, Eigen::Ref<Vec> grad) {
  check_alpha(alpha);
  check_same_shape(m, ref.model);
  const double mean_lp = mean_logprob_and_grad(m, s, grad);
  const double mean_lp_ref = token_logprobs(ref.model, s).mean();
  const double r = mean_lp - mean_lp_ref;
  // d/dr of -(2/alpha) log sigmoid(-alpha r) = 2 sigmoid(alpha r)
  grad *= 2.0 * stable_sigmoid(alpha * r);
  return -(2.0 / alpha) * stable_log_sigmoid(-alpha * r);
}

double simnpo_loss(const ToyModel& m, const Sample& s, double alpha,
                   Eigen::Ref<Vec> grad) {
  check_alpha(alpha);
  // The sequence log-prob scaled by alpha/|y| equals alpha * mean_lp.
  const double mean_lp = mean_logprob_and_grad(m, s, grad);
  grad *= 2.0 * stable_sigmoid(alpha * mean_lp);
  return -(2.0 / alpha) * stable_log_sigmoid(-alpha * mean_lp);
}

Vec satimp_weights(const ToyModel& m, const Sample& s, double alpha1,
                   double alpha2) {
  if (alpha1 < 0.0 || alpha2 < 0.0)
    throw std::invalid_argument("saturation exponents must be >= 0");
  const Vec lp = token_logprobs(m, s);
  Vec w(lp.size());
  for (long k = 0; k < lp.size(); ++k) {
    const double p = std::exp(lp[k]);
    w[k] = std::pow(p, alpha1) * std::pow(1.0 - p, alpha2);
  }
  return w;
}

double satimp_loss(const ToyModel& m, const Sample& s, double alpha1,
                   double alpha2, Eigen::Ref<Vec> grad) {
  const Vec w = satimp_weights(m, s, alpha1, alpha2);
  grad.setZero();
  const double ny = static_cast<double>(s.target.size());
  return weighted_logprob_accum_grad(m, s, w / ny, grad);
}

double combined_objective(double forget_loss,
                          const Eigen::Ref<const Vec>& forget_grad,
                          double retain_loss,
                          const Eigen::Ref<const Vec>& retain_grad,
                          double lambda, Eigen::Ref<Vec> out) {
  if (forget_grad.size() != retain_grad.size() ||
      out.size() != forget_grad.size())
    throw std::invalid_argument("gradient lengths differ");
  out = forget_grad + lambda * retain_grad;
  return forget_loss + lambda * retain_loss;
}

double forget_loss_grad(Method method, const ToyModel& m, const RefModel& ref,
                        const Sample& s, const LossParams& p,
                        Eigen::Ref<Vec> grad) {
  switch (method) {
    case Method::GA:
    case Method::GD:
      return ga_loss(m, s, grad);
    case Method::NPO:
      return npo_loss(m, ref, s, p.alpha_npo, grad);
    case Method::SimNPO:
      return simnpo_loss(m, s, p.alpha_sim, grad);
    case Method::SatImp:
      return satimp_loss(m, s, p.alpha1, p.alpha2, grad);
  }
  throw std::invalid_argument("unknown method");
}

double forget_loss_value(Method method, const ToyModel& m, const RefModel& ref,
                         const Sample& s, const LossParams& p) {
  const Vec lp = token_logprobs(m, s);
  const double mean_lp = lp.mean();
  switch (method) {
    case Method::GA:
    case Method::GD:
      return mean_lp;
    case Method::NPO: {
      check_alpha(p.alpha_npo);
      check_same_shape(m, ref.model);
      const double r = mean_lp - token_logprobs(ref.model, s).mean();
      return -(2.0 / p.alpha_npo) * stable_log_sigmoid(-p.alpha_npo * r);
    }
    case Method::SimNPO:
      check_alpha(p.alpha_sim);
      return -(2.0 / p.alpha_sim) * stable_log_sigmoid(-p.alpha_sim * mean_lp);
    case Method::SatImp: {
      if (p.alpha1 < 0.0 || p.alpha2 < 0.0)
        throw std::invalid_argument("saturation exponents must be >= 0");
      double total = 0.0;
      for (long k = 0; k < lp.size(); ++k) {
        const double pk = std::exp(lp[k]);
        total += std::pow(pk, p.alpha1) * std::pow(1.0 - pk, p.alpha2) * lp[k];
      }
      return total / static_cast<double>(lp.size());
    }
  }
  throw std::invalid_argument("unknown method");
}

}  // namespace baldro
