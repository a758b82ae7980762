// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>

#include "baldro/types.hpp"

namespace baldro {

enum class ModelVariant { Tabular, Mlp };

/// Fixed-order next-token model over a vocabulary of size V, double
/// precision throughout.
///
/// Tabular: params reshape to [V^context_order x V], one logit row per
/// context state, row-major in the context with the oldest token as the
/// most significant digit.
///
/// Mlp: token embeddings [V x embed_dim], the context_order embeddings
/// concatenated into a tanh hidden layer of width hidden_dim, then a linear
/// output layer over the vocabulary. Parameter order in the flat vector:
/// embeddings, hidden weights, hidden bias, output weights, output bias.
///
/// Positions before the start of a sequence use a begin sentinel that
/// indexes as token 0.
struct ToyModel {
  ModelVariant variant = ModelVariant::Tabular;
  int vocab_size = 0;
  int context_order = 2;
  int embed_dim = 0;   // Mlp only
  int hidden_dim = 0;  // Mlp only
  Vec params;
};

ToyModel make_tabular(int vocab_size, int context_order = 2);
ToyModel make_mlp(int vocab_size, int context_order, int embed_dim,
                  int hidden_dim);

/// Parameter count implied by the shape fields.
long param_count(const ToyModel& m);

/// Seeded uniform init in [-scale, scale].
void init_params(ToyModel& m, std::uint64_t seed, double scale = 0.1);

/// Log-probability of each target token given its context; length |target|.
Vec token_logprobs(const ToyModel& m, const Sample& s);

/// Column k is the full vocabulary log-prob vector at target position k.
Mat position_vocab_logprobs(const ToyModel& m, const Sample& s);

/// sum_k weights[k] * log pi(target[k] | ctx); the gradient of that sum is
/// ADDED into grad. Returns the weighted sum.
double weighted_logprob_accum_grad(const ToyModel& m, const Sample& s,
                                   const Eigen::Ref<const Vec>& weights,
                                   Eigen::Ref<Vec> grad);

/// Mean per-token log-probability; grad is overwritten with its gradient.
double mean_logprob_and_grad(const ToyModel& m, const Sample& s,
                             Eigen::Ref<Vec> grad);

/// Mean per-token negative log-likelihood and its gradient.
std::pair<double, Vec> ce_loss_and_grad(const ToyModel& m, const Sample& s);
double ce_loss(const ToyModel& m, const Sample& s);

/// Greedy argmax continuation of prompt, ties broken toward the lowest
/// token id. Decoded tokens extend the context window.
TokenSeq greedy_decode(const ToyModel& m, const TokenSeq& prompt, int len);

using LossFn = std::function<std::pair<double, Vec>(const ToyModel&)>;

/// Central-difference check of the gradient returned by loss_fn at m.
/// Returns max_i |g_analytic_i - g_fd_i| / max(1, |g_fd_i|).
double grad_check(const ToyModel& m, const LossFn& loss_fn, double step);

/// Model file: one header line "variant V order [embed hidden]", then one
/// parameter per line; round-trips bit-exactly.
void write_model(const ToyModel& m, const std::string& path);
ToyModel read_model(const std::string& path);

}  // namespace baldro
