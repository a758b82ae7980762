// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#include "baldro/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace baldro {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

std::vector<int> mink_subset(const Eigen::Ref<const Vec>& logprobs, double k) {
  if (logprobs.size() == 0) throw std::invalid_argument("empty sequence");
  if (!(k > 0.0) || k > 1.0)
    throw std::invalid_argument("k must be in (0, 1]");
  const int n = static_cast<int>(logprobs.size());
  const int count = std::clamp(
      static_cast<int>(std::ceil(k * static_cast<double>(n) - 1e-9)), 1, n);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return logprobs[a] < logprobs[b];
  });
  idx.resize(count);
  return idx;
}

}  // namespace

double perplexity(const ToyModel& m, const Sample& s) {
  return std::exp(ce_loss(m, s));
}

std::optional<int> forget_epoch(const std::vector<double>& ppl_per_epoch,
                                double tau) {
  if (ppl_per_epoch.empty())
    throw std::invalid_argument("empty perplexity trajectory");
  for (std::size_t e = 0; e < ppl_per_epoch.size(); ++e)
    if (ppl_per_epoch[e] >= tau) return static_cast<int>(e);
  return std::nullopt;
}

double exact_match(const ToyModel& m, const Sample& s) {
  const Mat lp = position_vocab_logprobs(m, s);
  long hits = 0;
  for (long k = 0; k < lp.cols(); ++k) {
    int best = 0;
    for (int v = 1; v < lp.rows(); ++v)
      if (lp(v, k) > lp(best, k)) best = v;
    if (best == s.target[k]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(lp.cols());
}

double extraction_strength(const ToyModel& m, const Sample& s) {
  if (s.target.empty()) throw std::invalid_argument("empty target sequence");
  const int ny = static_cast<int>(s.target.size());
  for (int kstar = 0; kstar < ny; ++kstar) {
    TokenSeq prefix = s.prompt;
    prefix.insert(prefix.end(), s.target.begin(), s.target.begin() + kstar);
    const TokenSeq decoded = greedy_decode(m, prefix, ny - kstar);
    if (std::equal(decoded.begin(), decoded.end(),
                   s.target.begin() + kstar)) {
      return 1.0 - static_cast<double>(kstar) / static_cast<double>(ny);
    }
  }
  return 0.0;
}

double mink_from_logprobs(const Eigen::Ref<const Vec>& logprobs, double k) {
  const std::vector<int> idx = mink_subset(logprobs, k);
  double sum = 0.0;
  for (int i : idx) sum += logprobs[i];
  return sum / static_cast<double>(idx.size());
}

double mia_score(const ToyModel& m, const Sample& s, Attack attack,
                 double k) {
  switch (attack) {
    case Attack::Loss:
      return -ce_loss(m, s);
    case Attack::MinK:
      return mink_from_logprobs(token_logprobs(m, s), k);
    case Attack::MinKpp: {
      const Mat vocab_lp = position_vocab_logprobs(m, s);
      Vec token_lp(vocab_lp.cols());
      for (long j = 0; j < vocab_lp.cols(); ++j)
        token_lp[j] = vocab_lp(s.target[j], j);
      const std::vector<int> idx = mink_subset(token_lp, k);
      double sum = 0.0;
      for (int j : idx) {
        // Moments of the log-prob distribution under the model's own
        // next-token probabilities at this position.
        const auto col = vocab_lp.col(j).array();
        const auto p = col.exp();
        const double mu = (p * col).sum();
        const double var = (p * (col - mu).square()).sum();
        const double sigma = std::sqrt(std::max(var, 0.0));
        sum += sigma > 0.0 ? (token_lp[j] - mu) / sigma : 0.0;
      }
      return sum / static_cast<double>(idx.size());
    }
  }
  throw std::invalid_argument("unknown attack");
}

double attack_auc(const std::vector<double>& members,
                  const std::vector<double>& nonmembers) {
  if (members.empty() || nonmembers.empty())
    throw std::invalid_argument("empty score set");
  double wins = 0.0;
  for (double a : members)
    for (double b : nonmembers) {
      if (a > b) wins += 1.0;
      else if (a == b) wins += 0.5;
    }
  return wins / (static_cast<double>(members.size()) *
                 static_cast<double>(nonmembers.size()));
}

BalanceReport balance_report(const TrajectoryLog& log, double tau,
                             double cap) {
  if (log.epochs.empty())
    throw std::invalid_argument("empty trajectory log");
  BalanceReport rep;
  rep.budget = static_cast<int>(log.epochs.size());
  rep.tau = tau;
  rep.cap = cap;
  // Per-sample perplexity trajectories in first-epoch sample order.
  std::vector<long> ids;
  std::map<long, std::vector<double>> traj;
  for (const SampleRecord& sr : log.epochs.front().samples) {
    ids.push_back(sr.sample_id);
    traj[sr.sample_id] = {};
  }
  for (const EpochRecord& er : log.epochs)
    for (const SampleRecord& sr : er.samples) {
      const auto it = traj.find(sr.sample_id);
      if (it == traj.end())
        throw std::invalid_argument("sample appears mid-trajectory");
      it->second.push_back(sr.ppl);
    }
  std::vector<double> censored;
  long never = 0, over = 0;
  for (long id : ids) {
    const std::vector<double>& ppl = traj.at(id);
    if (static_cast<int>(ppl.size()) != rep.budget)
      throw std::invalid_argument("ragged perplexity trajectory");
    const std::optional<int> fe = forget_epoch(ppl, tau);
    rep.sample_ids.push_back(id);
    rep.forget_epochs.push_back(fe);
    rep.final_ppl.push_back(ppl.back());
    censored.push_back(fe ? static_cast<double>(*fe)
                          : static_cast<double>(rep.budget));
    if (!fe) ++never;
    if (ppl.back() > cap) ++over;
  }
  const double n = static_cast<double>(censored.size());
  double mean = 0.0;
  for (double c : censored) mean += c;
  mean /= n;
  double var = 0.0;
  for (double c : censored) var += (c - mean) * (c - mean);
  rep.std_epochs = std::sqrt(var / n);
  rep.iqr_epochs = quantile(censored, 0.75) - quantile(censored, 0.25);
  rep.frac_unforgotten = static_cast<double>(never) / n;
  rep.frac_overforgotten = static_cast<double>(over) / n;
  return rep;
}

PrivacyReport privacy_report(const ToyModel& m, const Corpus& corpus,
                             double k) {
  if (corpus.forget.empty())
    throw std::invalid_argument("empty forget set");
  if (corpus.holdout.empty())
    throw std::invalid_argument("empty holdout set");
  PrivacyReport rep;
  rep.k = k;
  const Attack attacks[] = {Attack::Loss, Attack::MinK, Attack::MinKpp};
  double* out[] = {&rep.auc_loss, &rep.auc_mink, &rep.auc_minkpp};
  for (int a = 0; a < 3; ++a) {
    std::vector<double> mem, non;
    for (const Sample& s : corpus.forget)
      mem.push_back(mia_score(m, s, attacks[a], k));
    for (const Sample& s : corpus.holdout)
      non.push_back(mia_score(m, s, attacks[a], k));
    *out[a] = attack_auc(mem, non);
  }
  return rep;
}

std::vector<SampleMetricsRow> per_sample_rows(
    const ToyModel& m, const std::vector<Sample>& forget,
    const BalanceReport& balance, double k) {
  std::map<long, const Sample*> by_id;
  for (const Sample& s : forget) by_id[s.id] = &s;
  std::vector<SampleMetricsRow> rows;
  rows.reserve(balance.sample_ids.size());
  for (std::size_t i = 0; i < balance.sample_ids.size(); ++i) {
    const auto it = by_id.find(balance.sample_ids[i]);
    if (it == by_id.end())
      throw std::invalid_argument("trajectory sample missing from forget set");
    const Sample& s = *it->second;
    SampleMetricsRow row;
    row.sample_id = s.id;
    row.dup_factor = s.dup_factor;
    row.final_ppl = balance.final_ppl[i];
    row.forget_epoch = balance.forget_epochs[i];
    row.exact_match = exact_match(m, s);
    row.extraction_strength = extraction_strength(m, s);
    row.loss_score = mia_score(m, s, Attack::Loss, k);
    row.mink_score = mia_score(m, s, Attack::MinK, k);
    row.minkpp_score = mia_score(m, s, Attack::MinKpp, k);
    rows.push_back(row);
  }
  return rows;
}

void write_report_kv(const BalanceReport& balance,
                     const PrivacyReport& privacy, double retain_ppl_mean,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "n_forget = " << balance.sample_ids.size() << '\n';
  out << "budget = " << balance.budget << '\n';
  out << "tau = " << fmt17(balance.tau) << '\n';
  out << "cap = " << fmt17(balance.cap) << '\n';
  out << "dispersion_std = " << fmt17(balance.std_epochs) << '\n';
  out << "dispersion_iqr = " << fmt17(balance.iqr_epochs) << '\n';
  out << "frac_unforgotten = " << fmt17(balance.frac_unforgotten) << '\n';
  out << "frac_overforgotten = " << fmt17(balance.frac_overforgotten) << '\n';
  out << "retain_ppl_mean = " << fmt17(retain_ppl_mean) << '\n';
  out << "mink_k = " << fmt17(privacy.k) << '\n';
  out << "auc_loss = " << fmt17(privacy.auc_loss) << '\n';
  out << "auc_mink = " << fmt17(privacy.auc_mink) << '\n';
  out << "auc_minkpp = " << fmt17(privacy.auc_minkpp) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_report_csv(const std::vector<SampleMetricsRow>& rows,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "sample_id,dup_factor,final_ppl,forget_epoch,exact_match,"
         "extraction_strength,loss_score,mink_score,minkpp_score\n";
  for (const SampleMetricsRow& r : rows) {
    out << r.sample_id << ',' << r.dup_factor << ',' << fmt17(r.final_ppl)
        << ',';
    if (r.forget_epoch) out << *r.forget_epoch;
    else out << "never";
    out << ',' << fmt17(r.exact_match) << ',' << fmt17(r.extraction_strength)
        << ',' << fmt17(r.loss_score) << ',' << fmt17(r.mink_score) << ','
        << fmt17(r.minkpp_score) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace baldro
