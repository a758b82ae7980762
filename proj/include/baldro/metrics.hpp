// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "baldro/data_synth.hpp"
#include "baldro/toy_model.hpp"
#include "baldro/trainer.hpp"
#include "baldro/types.hpp"

namespace baldro {

/// exp(mean per-token NLL); >= 1 for any model, == vocab_size under uniform
/// logits.
double perplexity(const ToyModel& m, const Sample& s);

/// First epoch at which ppl_per_epoch >= tau, or nullopt if never reached.
std::optional<int> forget_epoch(const std::vector<double>& ppl_per_epoch,
                                double tau);

/// Teacher-forced: fraction of target positions whose argmax token equals
/// the target token, ties toward the lowest id.
double exact_match(const ToyModel& m, const Sample& s);

/// 1 - k*/|y| where k* is the smallest ground-truth prefix length after
/// which greedy decoding reproduces the rest of the target; 0 when even the
/// full prefix short of the last token fails.
double extraction_strength(const ToyModel& m, const Sample& s);

enum class Attack { Loss, MinK, MinKpp };

/// Higher score = more member-like. Loss: negated mean CE. MinK: mean of
/// the lowest ceil(k |y|) token log-probs. MinKpp: the same subset of
/// tokens scored as (logprob - mu) / sigma under the position's vocabulary
/// log-prob distribution weighted by the model's own probabilities; a
/// zero-sigma position scores 0.
double mia_score(const ToyModel& m, const Sample& s, Attack attack,
                 double k = 0.2);

/// MinK on a precomputed per-token log-prob vector.
double mink_from_logprobs(const Eigen::Ref<const Vec>& logprobs, double k);

/// P(member_score > nonmember_score) over all pairs, ties counted 1/2.
double attack_auc(const std::vector<double>& members,
                  const std::vector<double>& nonmembers);

/// Dispersion of per-sample forget epochs from a trajectory log. Samples
/// that never cross tau are censored at budget (the number of epochs) for
/// the std and IQR aggregates.
struct BalanceReport {
  std::vector<long> sample_ids;
  std::vector<std::optional<int>> forget_epochs;
  std::vector<double> final_ppl;
  int budget = 0;
  double tau = 0.0;
  double cap = 0.0;
  double std_epochs = 0.0;       // population std of censored epochs
  double iqr_epochs = 0.0;       // linear-interpolation quartiles
  double frac_unforgotten = 0.0; // never crossed tau
  double frac_overforgotten = 0.0;  // final-epoch ppl > cap
};

BalanceReport balance_report(const TrajectoryLog& log, double tau, double cap);

struct PrivacyReport {
  double auc_loss = 0.0;
  double auc_mink = 0.0;
  double auc_minkpp = 0.0;
  double k = 0.2;
};

/// Forget-vs-holdout AUC for the three attacks; holdout must be non-empty.
PrivacyReport privacy_report(const ToyModel& m, const Corpus& corpus,
                             double k = 0.2);

struct SampleMetricsRow {
  long sample_id = 0;
  int dup_factor = 1;
  double final_ppl = 0.0;
  std::optional<int> forget_epoch;
  double exact_match = 0.0;
  double extraction_strength = 0.0;
  double loss_score = 0.0;
  double mink_score = 0.0;
  double minkpp_score = 0.0;
};

std::vector<SampleMetricsRow> per_sample_rows(const ToyModel& m,
                                              const std::vector<Sample>& forget,
                                              const BalanceReport& balance,
                                              double k);

/// Flat "key = value" block; keys are documented in the README and pinned
/// by tests.
void write_report_kv(const BalanceReport& balance, const PrivacyReport& privacy,
                     double retain_ppl_mean, const std::string& path);

/// CSV, one row per forget sample; forget_epoch prints "never" when unset.
void write_report_csv(const std::vector<SampleMetricsRow>& rows,
                      const std::string& path);

}  // namespace baldro
