// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "baldro/toy_model.hpp"
#include "baldro/types.hpp"

namespace baldro {

enum class Method { GA, GD, NPO, SimNPO, SatImp };

struct LossParams {
  double alpha_npo = 1.0;  // NPO inverse-temperature
  double alpha_sim = 1.0;  // SimNPO inverse-temperature
  double alpha1 = 0.0;     // saturation exponent on p
  double alpha2 = 0.0;     // importance exponent on 1 - p
  double lambda = 1.0;     // retain-term weight
};

/// Frozen pre-unlearning snapshot; parameters are never mutated after the
/// snapshot is taken.
struct RefModel {
  ToyModel model;
};

/// Branch forms that never overflow for |x| up to ~700.
double stable_sigmoid(double x);
double stable_log_sigmoid(double x);

/// Mean per-token log pi_theta(y|x), a negated cross-entropy; minimizing it
/// ascends the NLL. grad is overwritten.
double ga_loss(const ToyModel& m, const Sample& s, Eigen::Ref<Vec> grad);

/// -(2/alpha) log sigmoid(-alpha r) with r the mean per-token log-ratio
/// between m and the frozen reference.
double npo_loss(const ToyModel& m, const RefModel& ref, const Sample& s,
                double alpha, Eigen::Ref<Vec> grad);

/// Reference-free variant driven by the length-normalized sequence
/// log-probability.
double simnpo_loss(const ToyModel& m, const Sample& s, double alpha,
                   Eigen::Ref<Vec> grad);

/// Per-token weights w_k = p_k^alpha1 * (1 - p_k)^alpha2 with
/// p_k = pi_theta(y_k | context); treated as constants by satimp_loss.
Vec satimp_weights(const ToyModel& m, const Sample& s, double alpha1,
                   double alpha2);

/// mean_k w_k log pi_theta(y_k | context) with w detached from the graph.
double satimp_loss(const ToyModel& m, const Sample& s, double alpha1,
                   double alpha2, Eigen::Ref<Vec> grad);

/// forget + lambda * retain; out receives the combined gradient.
double combined_objective(double forget_loss,
                          const Eigen::Ref<const Vec>& forget_grad,
                          double retain_loss,
                          const Eigen::Ref<const Vec>& retain_grad,
                          double lambda, Eigen::Ref<Vec> out);

/// Per-sample forget loss for the selected method. GA and GD share the
/// ascent loss here; they differ only in the configured retain weight.
double forget_loss_grad(Method method, const ToyModel& m, const RefModel& ref,
                        const Sample& s, const LossParams& p,
                        Eigen::Ref<Vec> grad);

/// Same value without the gradient work; agrees with forget_loss_grad up to
/// rounding.
double forget_loss_value(Method method, const ToyModel& m, const RefModel& ref,
                         const Sample& s, const LossParams& p);

}  // namespace baldro
