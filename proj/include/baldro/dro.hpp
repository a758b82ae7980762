// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <utility>
#include <vector>

#include "baldro/types.hpp"

namespace baldro {

/** Distributionally robust reweighting of a batch of per-sample losses.
 *
 *  The continuous variant evaluates the worst-case expected loss over all
 *  reweightings Q of the empirical batch distribution with bounded
 *  KL(Q || empirical), through its smooth dual at fixed temperature beta:
 *
 *      sup_Q { E_Q[loss] - beta KL(Q || empirical) }
 *        = beta log( (1/n) sum_i exp(loss_i / beta) ),
 *
 *  attained by the exponential tilt Q*_i proportional to exp(loss_i / beta).
 *  beta -> infinity recovers the plain mean, beta -> 0 the batch maximum.
 *
 *  The discrete variant replaces the tilt with a hard selection: the
 *  worst-mean group under a fixed partition, or the top ceil(rho n) losses
 *  when no partition is given.
 */

enum class DroVariant { None, G, DV };

struct DroConfig {
  DroVariant variant = DroVariant::None;
  double beta = 2.0;             // DV temperature
  double rho = 0.5;              // G selection fraction, in (0, 1]
  std::map<long, int> groups;    // sample id -> group id; empty = percentile
  double eta = 0.0;              // recorded radius; the fixed-beta dual
                                 // absorbs it into an additive constant
  bool apply_to_retain = false;  // reweight the retain batch as well
  bool full_set = false;         // DV over the whole forget set, one step
                                 // per epoch
};

/// Tilted weights over one batch. weights sums to 1; kl_to_empirical is
/// KL(Q* || uniform) = sum_i w_i log(n w_i).
struct AdversarialWeights {
  Vec weights;
  double beta = 0.0;
  double kl_to_empirical = 0.0;
};

/// beta log((1/n) sum_i exp(loss_i / beta)), computed with the max shifted
/// out of the exponent.
double dv_objective(const Eigen::Ref<const Vec>& losses, double beta);

AdversarialWeights dv_weights(const Eigen::Ref<const Vec>& losses,
                              double beta);

/// Gradient of dv_objective through frozen per-sample gradients: the
/// Q*-weighted combination grads * weights. grads is [params x n].
Vec dv_grad(const Eigen::Ref<const Mat>& grads,
            const Eigen::Ref<const Vec>& losses, double beta);

/// | (E_Q*[loss] - beta KL(Q*||empirical)) - dv_objective |; zero up to
/// rounding for every batch.
double dual_primal_residual(const Eigen::Ref<const Vec>& losses, double beta);

/// Indices of the ceil(rho n) largest losses, ascending index order, ties
/// toward the lower index.
std::vector<int> top_fraction_select(const Eigen::Ref<const Vec>& losses,
                                     double rho);

/// (group id, mean loss) of the worst-mean group. group_of[i] assigns
/// sample i to a group id in [0, G); every group must be non-empty. Ties
/// break toward the lower group id.
std::pair<int, double> group_max_loss(const Eigen::Ref<const Vec>& losses,
                                      const std::vector<int>& group_of);

/// Batch indices the G variant keeps: the worst group when group_of is
/// given, the top fraction rho otherwise.
std::vector<int> g_variant_select(const Eigen::Ref<const Vec>& losses,
                                  const DroConfig& cfg,
                                  const std::vector<int>* group_of = nullptr);

/// Mean of the selected gradient columns.
Vec g_variant_grad(const Eigen::Ref<const Mat>& grads,
                   const Eigen::Ref<const Vec>& losses, const DroConfig& cfg,
                   const std::vector<int>* group_of = nullptr);

}  // namespace baldro
