// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#include "baldro/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "baldro/rng.hpp"

namespace baldro {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

/// Per-batch group ids compacted to [0, G) in ascending original-id order,
/// so the lowest-original-id tie break survives compaction.
std::vector<int> batch_groups(const std::vector<const Sample*>& batch,
                              const std::map<long, int>& groups) {
  std::vector<int> raw(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto it = groups.find(batch[i]->id);
    if (it == groups.end())
      throw std::invalid_argument("sample id " + std::to_string(batch[i]->id) +
                                  " missing from group assignment");
    raw[i] = it->second;
  }
  std::vector<int> sorted = raw;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = static_cast<int>(
        std::lower_bound(sorted.begin(), sorted.end(), raw[i]) -
        sorted.begin());
  return out;
}

void aggregate_batch(const Mat& grads, const Vec& losses,
                     const DroConfig& dro, const std::vector<int>* group_of,
                     Vec& agg_grad, double& agg_loss, Vec& weights,
                     double& kl) {
  const long n = losses.size();
  kl = 0.0;
  switch (dro.variant) {
    case DroVariant::None: {
      // Same weighted-sum kernel as the DV branch, so the DV tilt with
      // uniform weights reproduces this update bit for bit.
      weights = Vec::Constant(n, 1.0 / static_cast<double>(n));
      agg_grad.noalias() = grads * weights;
      agg_loss = losses.mean();
      return;
    }
    case DroVariant::DV: {
      const AdversarialWeights aw = dv_weights(losses, dro.beta);
      agg_grad.noalias() = grads * aw.weights;
      agg_loss = dv_objective(losses, dro.beta);
      weights = aw.weights;
      kl = aw.kl_to_empirical;
      return;
    }
    case DroVariant::G: {
      const std::vector<int> idx = g_variant_select(losses, dro, group_of);
      agg_grad.setZero();
      double sum = 0.0;
      for (int i : idx) {
        agg_grad += grads.col(i);
        sum += losses[i];
      }
      agg_grad /= static_cast<double>(idx.size());
      agg_loss = sum / static_cast<double>(idx.size());
      weights = Vec::Zero(n);
      for (int i : idx) weights[i] = 1.0;
      return;
    }
  }
  throw std::invalid_argument("unknown DRO variant");
}

}  // namespace

Optimizer::Optimizer(OptimizerKind kind_, double lr_, long n)
    : kind(kind_), lr(lr_) {
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (kind == OptimizerKind::Adam) {
    m = Vec::Zero(n);
    v = Vec::Zero(n);
  }
}

void Optimizer::step(Eigen::Ref<Vec> params,
                     const Eigen::Ref<const Vec>& grad) {
  if (kind == OptimizerKind::SGD) {
    params -= lr * grad;
    return;
  }
  ++t;
  m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
  v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
  params.array() -=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
}

ToyModel pretrain(ToyModel model, const Corpus& corpus, double lr, int epochs,
                  std::uint64_t seed) {
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (epochs == 0) return model;
  std::vector<const Sample*> order;
  for (const Sample& s : corpus.retain) order.push_back(&s);
  for (const Sample& s : corpus.forget)
    for (int r = 0; r < s.dup_factor; ++r) order.push_back(&s);
  if (order.empty())
    throw std::invalid_argument("empty training set");
  std::mt19937_64 rng(seed);
  Vec grad(model.params.size());
  long step = 0;
  for (int e = 0; e < epochs; ++e) {
    shuffle_in_place(order, rng);
    for (const Sample* s : order) {
      const double mean_lp = mean_logprob_and_grad(model, *s, grad);
      if (!std::isfinite(mean_lp)) throw DivergenceError(step);
      // CE descent is mean-logprob ascent.
      model.params += lr * grad;
      if (!model.params.allFinite()) throw DivergenceError(step);
      ++step;
    }
  }
  return model;
}

StepDiagnostics unlearn_step(ToyModel& model,
                             const std::vector<const Sample*>& forget_batch,
                             const std::vector<const Sample*>& retain_batch,
                             const UnlearnConfig& cfg, const RefModel& ref,
                             Optimizer& opt) {
  if (forget_batch.empty())
    throw std::invalid_argument("empty forget batch");
  const double lambda = cfg.loss_params.lambda;
  if (lambda != 0.0 && retain_batch.empty())
    throw std::invalid_argument("empty retain batch with nonzero lambda");
  const long P = model.params.size();
  const long nf = static_cast<long>(forget_batch.size());

  Mat fgrads(P, nf);
  Vec flosses(nf);
  for (long i = 0; i < nf; ++i)
    flosses[i] = forget_loss_grad(cfg.method, model, ref, *forget_batch[i],
                                  cfg.loss_params, fgrads.col(i));
  if (!flosses.allFinite()) throw DivergenceError(-1);

  const bool grouped =
      cfg.dro.variant == DroVariant::G && !cfg.dro.groups.empty();
  std::vector<int> fgroups;
  if (grouped) fgroups = batch_groups(forget_batch, cfg.dro.groups);

  StepDiagnostics diag;
  Vec fagg(P);
  aggregate_batch(fgrads, flosses, cfg.dro, grouped ? &fgroups : nullptr,
                  fagg, diag.forget_loss, diag.weights, diag.kl);

  if (lambda != 0.0) {
    const long nr = static_cast<long>(retain_batch.size());
    Vec ragg(P);
    double rloss = 0.0;
    if (cfg.dro.apply_to_retain && cfg.dro.variant != DroVariant::None) {
      Mat rgrads(P, nr);
      Vec rlosses(nr);
      for (long i = 0; i < nr; ++i) {
        const double mean_lp =
            mean_logprob_and_grad(model, *retain_batch[i], rgrads.col(i));
        rlosses[i] = -mean_lp;
        rgrads.col(i) = -rgrads.col(i);
      }
      if (!rlosses.allFinite()) throw DivergenceError(-1);
      // Retain-side grouping is not meaningful; the G variant falls back to
      // the percentile rule here.
      Vec rweights;
      double rkl = 0.0;
      aggregate_batch(rgrads, rlosses, cfg.dro, nullptr, ragg, rloss,
                      rweights, rkl);
    } else {
      ragg.setZero();
      Vec g(P);
      for (long i = 0; i < nr; ++i) {
        const double mean_lp =
            mean_logprob_and_grad(model, *retain_batch[i], g);
        if (!std::isfinite(mean_lp)) throw DivergenceError(-1);
        rloss -= mean_lp;
        ragg -= g;
      }
      rloss /= static_cast<double>(nr);
      ragg /= static_cast<double>(nr);
    }
    diag.retain_loss = rloss;
    fagg += lambda * ragg;
  } else {
    diag.retain_loss = 0.0;
  }

  opt.step(model.params, fagg);
  if (!model.params.allFinite()) throw DivergenceError(-1);
  return diag;
}

std::pair<ToyModel, TrajectoryLog> run_unlearning(ToyModel model,
                                                  const Corpus& corpus,
                                                  const UnlearnConfig& cfg) {
  if (cfg.batch_size < 1)
    throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  const long nf = static_cast<long>(corpus.forget.size());
  const long nr = static_cast<long>(corpus.retain.size());
  const double lambda = cfg.loss_params.lambda;
  TrajectoryLog log;
  if (cfg.epochs == 0) return {std::move(model), std::move(log)};
  if (nf == 0) throw std::invalid_argument("empty forget set");
  if (lambda != 0.0 && nr == 0)
    throw std::invalid_argument("empty retain set with nonzero lambda");
  if (cfg.dro.variant == DroVariant::G && !cfg.dro.groups.empty())
    for (const Sample& s : corpus.forget)
      if (cfg.dro.groups.find(s.id) == cfg.dro.groups.end())
        throw std::invalid_argument("sample id " + std::to_string(s.id) +
                                    " missing from group assignment");

  const RefModel ref{model};
  Optimizer opt(cfg.optimizer, cfg.lr, model.params.size());
  std::mt19937_64 rng(cfg.seed);
  const bool full_set = cfg.dro.full_set && cfg.dro.variant == DroVariant::DV;
  long steps_done = 0;

  std::vector<int> forder(nf), rorder(std::max<long>(nr, 0));
  std::iota(forder.begin(), forder.end(), 0);
  std::iota(rorder.begin(), rorder.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_in_place(forder, rng);
    if (nr > 0) shuffle_in_place(rorder, rng);
    std::size_t rcur = 0;
    auto draw_retain = [&](long count) {
      std::vector<const Sample*> rb;
      if (lambda == 0.0 || nr == 0) return rb;
      rb.reserve(count);
      for (long i = 0; i < count; ++i) {
        rb.push_back(&corpus.retain[rorder[rcur]]);
        rcur = (rcur + 1) % static_cast<std::size_t>(nr);
      }
      return rb;
    };
    std::map<long, double> weight_seen;
    auto run_one = [&](const std::vector<const Sample*>& fb) {
      const std::vector<const Sample*> rb = draw_retain(
          static_cast<long>(fb.size()));
      StepDiagnostics diag;
      try {
        diag = unlearn_step(model, fb, rb, cfg, ref, opt);
      } catch (const DivergenceError&) {
        throw DivergenceError(steps_done);
      }
      ++steps_done;
      for (std::size_t i = 0; i < fb.size(); ++i)
        weight_seen[fb[i]->id] = diag.weights[static_cast<long>(i)];
    };
    if (full_set) {
      std::vector<const Sample*> fb;
      fb.reserve(nf);
      for (const Sample& s : corpus.forget) fb.push_back(&s);
      run_one(fb);
    } else {
      for (long b0 = 0; b0 < nf; b0 += cfg.batch_size) {
        std::vector<const Sample*> fb;
        const long b1 = std::min(nf, b0 + cfg.batch_size);
        fb.reserve(b1 - b0);
        for (long i = b0; i < b1; ++i) fb.push_back(&corpus.forget[forder[i]]);
        run_one(fb);
      }
    }

    EpochRecord er;
    er.epoch = epoch;
    er.step_count = steps_done;
    er.samples.reserve(nf);
    for (const Sample& s : corpus.forget) {
      SampleRecord sr;
      sr.sample_id = s.id;
      sr.loss = forget_loss_value(cfg.method, model, ref, s, cfg.loss_params);
      sr.ppl = std::exp(ce_loss(model, s));
      sr.weight_or_selected = weight_seen.at(s.id);
      er.samples.push_back(sr);
    }
    double rsum = 0.0;
    for (const Sample& s : corpus.retain) rsum += ce_loss(model, s);
    er.retain_loss = nr > 0 ? rsum / static_cast<double>(nr) : 0.0;
    log.epochs.push_back(std::move(er));
  }
  return {std::move(model), std::move(log)};
}

void write_trajectory_csv(const TrajectoryLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "epoch,sample_id,loss,ppl,weight_or_selected\n";
  char a[64], b[64], c[64];
  for (const EpochRecord& er : log.epochs) {
    for (const SampleRecord& sr : er.samples) {
      std::snprintf(a, sizeof(a), "%.17g", sr.loss);
      std::snprintf(b, sizeof(b), "%.17g", sr.ppl);
      std::snprintf(c, sizeof(c), "%.17g", sr.weight_or_selected);
      out << er.epoch << ',' << sr.sample_id << ',' << a << ',' << b << ','
          << c << '\n';
    }
    std::snprintf(a, sizeof(a), "%.17g", er.retain_loss);
    std::snprintf(b, sizeof(b), "%.17g", std::exp(er.retain_loss));
    std::snprintf(c, sizeof(c), "%.17g",
                  static_cast<double>(er.step_count));
    out << er.epoch << ",-1," << a << ',' << b << ',' << c << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

TrajectoryLog read_trajectory_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      (line != "epoch,sample_id,loss,ppl,weight_or_selected" &&
       line != "epoch,sample_id,loss,ppl,weight_or_selected\r"))
    throw std::runtime_error("bad trajectory header: " + path);
  TrajectoryLog log;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[5];
    for (int i = 0; i < 5; ++i)
      if (!std::getline(ls, f[i], ','))
        throw std::runtime_error("bad trajectory row at line " +
                                 std::to_string(line_no) + ": " + path);
    int epoch;
    long sid;
    double loss, ppl, w;
    try {
      epoch = std::stoi(f[0]);
      sid = std::stol(f[1]);
      loss = std::stod(f[2]);
      ppl = std::stod(f[3]);
      w = std::stod(f[4]);
    } catch (const std::exception&) {
      throw std::runtime_error("bad trajectory row at line " +
                               std::to_string(line_no) + ": " + path);
    }
    if (log.epochs.empty() || log.epochs.back().epoch != epoch) {
      if (!log.epochs.empty() && epoch < log.epochs.back().epoch)
        throw std::runtime_error("epochs out of order at line " +
                                 std::to_string(line_no) + ": " + path);
      log.epochs.push_back(EpochRecord{});
      log.epochs.back().epoch = epoch;
    }
    EpochRecord& er = log.epochs.back();
    if (sid == -1) {
      er.retain_loss = loss;
      er.step_count = static_cast<long>(w);
    } else {
      er.samples.push_back(SampleRecord{sid, loss, ppl, w});
    }
  }
  return log;
}

}  // namespace baldro
