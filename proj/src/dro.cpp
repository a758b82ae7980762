// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#include "baldro/dro.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace baldro {

namespace {

void check_losses(const Eigen::Ref<const Vec>& losses) {
  if (losses.size() == 0) throw std::invalid_argument("empty loss batch");
  if (!losses.allFinite())
    throw std::invalid_argument("non-finite loss in batch");
}

void check_beta(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
}

}  // namespace

double dv_objective(const Eigen::Ref<const Vec>& losses, double beta) {
  check_losses(losses);
  check_beta(beta);
  const long n = losses.size();
  const double zmax = losses.maxCoeff() / beta;
  double sum = 0.0;
  for (long i = 0; i < n; ++i) sum += std::exp(losses[i] / beta - zmax);
  return beta * (zmax + std::log(sum / static_cast<double>(n)));
}

AdversarialWeights dv_weights(const Eigen::Ref<const Vec>& losses,
                              double beta) {
  check_losses(losses);
  check_beta(beta);
  const long n = losses.size();
  AdversarialWeights out;
  out.beta = beta;
  out.weights.resize(n);
  const double zmax = losses.maxCoeff() / beta;
  double sum = 0.0;
  for (long i = 0; i < n; ++i) {
    out.weights[i] = std::exp(losses[i] / beta - zmax);
    sum += out.weights[i];
  }
  out.weights /= sum;
  double kl = 0.0;
  for (long i = 0; i < n; ++i) {
    const double w = out.weights[i];
    if (w > 0.0) kl += w * std::log(static_cast<double>(n) * w);
  }
  out.kl_to_empirical = kl;
  return out;
}

Vec dv_grad(const Eigen::Ref<const Mat>& grads,
            const Eigen::Ref<const Vec>& losses, double beta) {
  if (grads.cols() != losses.size())
    throw std::invalid_argument("gradient column count != batch size");
  const AdversarialWeights aw = dv_weights(losses, beta);
  return grads * aw.weights;
}

double dual_primal_residual(const Eigen::Ref<const Vec>& losses, double beta) {
  const AdversarialWeights aw = dv_weights(losses, beta);
  const double primal = aw.weights.dot(losses) - beta * aw.kl_to_empirical;
  return std::abs(primal - dv_objective(losses, beta));
}

std::vector<int> top_fraction_select(const Eigen::Ref<const Vec>& losses,
                                     double rho) {
  check_losses(losses);
  if (!(rho > 0.0) || rho > 1.0)
    throw std::invalid_argument("rho must be in (0, 1]");
  const int n = static_cast<int>(losses.size());
  const int k = std::clamp(
      static_cast<int>(std::ceil(rho * static_cast<double>(n) - 1e-9)), 1, n);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Descending by loss, ties toward the lower index.
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return losses[a] > losses[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::pair<int, double> group_max_loss(const Eigen::Ref<const Vec>& losses,
                                      const std::vector<int>& group_of) {
  check_losses(losses);
  if (static_cast<long>(group_of.size()) != losses.size())
    throw std::invalid_argument("group assignment length != batch size");
  int gmax = -1;
  for (int g : group_of) {
    if (g < 0) throw std::invalid_argument("negative group id");
    gmax = std::max(gmax, g);
  }
  std::vector<double> sum(gmax + 1, 0.0);
  std::vector<long> count(gmax + 1, 0);
  for (long i = 0; i < losses.size(); ++i) {
    sum[group_of[i]] += losses[i];
    ++count[group_of[i]];
  }
  int best = -1;
  double best_mean = 0.0;
  for (int g = 0; g <= gmax; ++g) {
    if (count[g] == 0) throw std::invalid_argument("empty group in assignment");
    const double mean = sum[g] / static_cast<double>(count[g]);
    if (best < 0 || mean > best_mean) {
      best = g;
      best_mean = mean;
    }
  }
  return {best, best_mean};
}

std::vector<int> g_variant_select(const Eigen::Ref<const Vec>& losses,
                                  const DroConfig& cfg,
                                  const std::vector<int>* group_of) {
  if (group_of == nullptr) return top_fraction_select(losses, cfg.rho);
  const int worst = group_max_loss(losses, *group_of).first;
  std::vector<int> idx;
  for (long i = 0; i < losses.size(); ++i)
    if ((*group_of)[i] == worst) idx.push_back(static_cast<int>(i));
  return idx;
}

Vec g_variant_grad(const Eigen::Ref<const Mat>& grads,
                   const Eigen::Ref<const Vec>& losses, const DroConfig& cfg,
                   const std::vector<int>* group_of) {
  if (grads.cols() != losses.size())
    throw std::invalid_argument("gradient column count != batch size");
  const std::vector<int> idx = g_variant_select(losses, cfg, group_of);
  Vec out = Vec::Zero(grads.rows());
  for (int i : idx) out += grads.col(i);
  return out / static_cast<double>(idx.size());
}

}  // namespace baldro
