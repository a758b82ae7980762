// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "baldro/data_synth.hpp"
#include "baldro/dro.hpp"
#include "baldro/losses.hpp"
#include "baldro/toy_model.hpp"
#include "baldro/types.hpp"

namespace baldro {

enum class OptimizerKind { SGD, Adam };

struct UnlearnConfig {
  Method method = Method::NPO;
  DroConfig dro;
  LossParams loss_params;
  double lr = 0.01;
  int batch_size = 8;
  int epochs = 10;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 0;
};

/// Non-finite loss or parameter encountered; step is the global optimizer
/// step at which training aborted, or -1 when thrown outside a run loop.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(long step_)
      : std::runtime_error("non-finite value in training step"), step(step_) {}
  long step;
};

/// SGD, or Adam with decay rates (0.9, 0.999) and epsilon 1e-8.
struct Optimizer {
  Optimizer(OptimizerKind kind, double lr, long n);
  void step(Eigen::Ref<Vec> params, const Eigen::Ref<const Vec>& grad);

  OptimizerKind kind;
  double lr;
  Vec m, v;  // Adam moments
  long t = 0;
};

struct StepDiagnostics {
  Vec weights;          // DV tilt, G 0/1 selection, or uniform 1/n
  double forget_loss;   // aggregated forget objective
  double retain_loss;   // aggregated retain CE (0 when lambda == 0)
  double kl = 0.0;      // KL(Q*||empirical) for DV steps
};

/// Per-epoch bookkeeping over the full forget set, evaluated at epoch end.
struct SampleRecord {
  long sample_id = 0;
  double loss = 0.0;  // the configured forget loss
  double ppl = 0.0;
  double weight_or_selected = 0.0;  // last DV weight / G selection seen
};

struct EpochRecord {
  int epoch = 0;
  std::vector<SampleRecord> samples;
  double retain_loss = 0.0;  // mean retain CE at epoch end
  long step_count = 0;       // optimizer steps taken so far
};

struct TrajectoryLog {
  std::vector<EpochRecord> epochs;
};

/// Cross-entropy SGD over retain plus forget, each forget sample repeated
/// dup_factor times per epoch, order reshuffled every epoch. Deterministic
/// in seed; epochs == 0 returns the model unchanged.
ToyModel pretrain(ToyModel model, const Corpus& corpus, double lr, int epochs,
                  std::uint64_t seed);

/// One optimizer update from paired forget/retain mini-batches: per-sample
/// forget losses and gradients, DRO aggregation per cfg.dro, plus
/// lambda times the retain CE gradient (also reweighted when
/// cfg.dro.apply_to_retain). Throws DivergenceError(-1) on non-finite loss.
StepDiagnostics unlearn_step(ToyModel& model,
                             const std::vector<const Sample*>& forget_batch,
                             const std::vector<const Sample*>& retain_batch,
                             const UnlearnConfig& cfg, const RefModel& ref,
                             Optimizer& opt);

/// Full loop: snapshots the reference, walks the forget set in seeded
/// shuffled order without replacement while cycling the retain set, and
/// appends one EpochRecord per epoch. dro.full_set folds each epoch into a
/// single whole-set step.
std::pair<ToyModel, TrajectoryLog> run_unlearning(ToyModel model,
                                                  const Corpus& corpus,
                                                  const UnlearnConfig& cfg);

/// CSV with header epoch,sample_id,loss,ppl,weight_or_selected. Epoch-level
/// values travel as one pseudo-row per epoch with sample_id -1: loss is the
/// retain CE, ppl its exponential, weight_or_selected the step count.
void write_trajectory_csv(const TrajectoryLog& log, const std::string& path);
TrajectoryLog read_trajectory_csv(const std::string& path);

}  // namespace baldro
