// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "baldro/losses.hpp"
#include "test_util.hpp"

using namespace baldro;

namespace {

long double softplus_ld(long double x) {
  // log(1 + e^x) without overflow
  if (x > 0) return x + log1pl(expl(-x));
  return log1pl(expl(x));
}

/// -(2/alpha) log sigmoid(-alpha r) = (2/alpha) softplus(alpha r)
long double npo_scalar_ld(long double r, long double alpha) {
  return (2.0L / alpha) * softplus_ld(alpha * r);
}

}  // namespace

TEST_CASE("stable logistic helpers") {
  CHECK(stable_sigmoid(0.0) == 0.5);
  CHECK(std::abs(stable_log_sigmoid(0.0) + std::log(2.0)) < 1e-15);
  std::mt19937_64 rng(21);
  for (int i = 0; i < 50; ++i) {
    const double x = next_symmetric(rng, 30.0);
    CHECK(std::abs(stable_sigmoid(x) + stable_sigmoid(-x) - 1.0) < 1e-15);
    CHECK(std::abs(stable_log_sigmoid(x) - std::log(stable_sigmoid(x))) <
          1e-12);
  }
  // no overflow at extreme arguments
  CHECK(std::isfinite(stable_sigmoid(700.0)));
  CHECK(std::isfinite(stable_sigmoid(-700.0)));
  CHECK(std::isfinite(stable_log_sigmoid(700.0)));
  CHECK(std::isfinite(stable_log_sigmoid(-700.0)));
  CHECK(std::abs(stable_log_sigmoid(-700.0) + 700.0) < 1e-9);
}

TEST_CASE("ascent loss is the negated cross entropy") {
  const ToyModel uniform = make_tabular(4, 2);
  Sample s;
  s.prompt = {1, 0};
  s.target = {2, 3};
  Vec g(uniform.params.size());
  CHECK(std::abs(ga_loss(uniform, s, g) - std::log(0.25)) < 1e-15);

  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 4; ++rep) {
    const ToyModel m = testutil::random_model(rng, rep % 2 == 1, 5);
    const Sample r = testutil::random_sample(rng, 5, 2, 3);
    Vec ga_grad(m.params.size());
    const double ga = ga_loss(m, r, ga_grad);
    const auto [ce, ce_grad] = ce_loss_and_grad(m, r);
    CHECK(std::abs(ga + ce) < 1e-15);
    CHECK((ga_grad + ce_grad).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("preference loss at the reference point is exactly 2 log 2") {
  std::mt19937_64 rng(23);
  const ToyModel m = testutil::random_model(rng, false, 5);
  const RefModel ref{m};
  const Sample s = testutil::random_sample(rng, 5, 2, 3);
  Vec g(m.params.size());
  CHECK(std::abs(npo_loss(m, ref, s, 1.0, g) - 2.0 * std::log(2.0)) < 1e-12);
  CHECK(std::abs(npo_loss(m, ref, s, 3.5, g) -
                 (2.0 / 3.5) * std::log(2.0)) < 1e-12);
}

TEST_CASE("preference loss matches the scalar map of the measured log-ratio") {
  std::mt19937_64 rng(24);
  for (int rep = 0; rep < 6; ++rep) {
    const ToyModel m = testutil::random_model(rng, rep % 2 == 1, 5);
    ToyModel ref_m = m;
    init_params(ref_m, rng(), 0.3);
    const RefModel ref{ref_m};
    const Sample s = testutil::random_sample(rng, 5, 2, 3);
    const double alpha = 0.5 + next_unit(rng) * 2.0;
    const double r =
        token_logprobs(m, s).mean() - token_logprobs(ref.model, s).mean();
    Vec g(m.params.size());
    const double loss = npo_loss(m, ref, s, alpha, g);
    CHECK(std::abs(loss - static_cast<double>(npo_scalar_ld(r, alpha))) <
          1e-12);
    CHECK(loss > 0.0);
    CHECK(loss <= (2.0 / alpha) * (std::max(0.0, alpha * r) + std::log(2.0)) +
                      1e-12);
  }
}

TEST_CASE("preference loss hits a crafted unit log-ratio") {
  // Tune the target logit so the model sits exactly one nat below a uniform
  // reference, then the loss must be -2 log sigmoid(1).
  const double lp_target = -std::log(4.0) - 1.0;
  const double c = testutil::bisect(
      [](double x) { return x - std::log(std::exp(x) + 3.0); }, -20.0, 20.0,
      lp_target);
  ToyModel m = make_tabular(4, 1);
  m.params[2 * 4 + 0] = c;  // context state 2, token 0
  const RefModel ref{make_tabular(4, 1)};
  Sample s;
  s.prompt = {2};
  s.target = {0};
  Vec g(m.params.size());
  const double loss = npo_loss(m, ref, s, 1.0, g);
  const double expected = static_cast<double>(npo_scalar_ld(-1.0L, 1.0L));
  CHECK(std::abs(loss - expected) < 1e-12);
  CHECK(loss == doctest::Approx(0.6265).epsilon(1e-3));
}

TEST_CASE("preference loss gradient passes finite differences") {
  std::mt19937_64 rng(25);
  for (int rep = 0; rep < 4; ++rep) {
    const ToyModel m = testutil::random_model(rng, rep % 2 == 1, 5);
    ToyModel ref_m = m;
    init_params(ref_m, rng(), 0.2);
    const RefModel ref{ref_m};
    const Sample s = testutil::random_sample(rng, 5, 2, 3);
    const LossFn fn = [&](const ToyModel& model) {
      Vec g(model.params.size());
      const double v = npo_loss(model, ref, s, 1.5, g);
      return std::make_pair(v, g);
    };
    CHECK(grad_check(m, fn, 1e-5) < 1e-5);
  }
}

TEST_CASE("reference-free loss matches its scalar map and finite differences") {
  std::mt19937_64 rng(26);
  for (int rep = 0; rep < 4; ++rep) {
    const ToyModel m = testutil::random_model(rng, rep % 2 == 1, 5);
    const Sample s = testutil::random_sample(rng, 5, 2, 3);
    const double alpha = 0.5 + next_unit(rng) * 2.0;
    const double mean_lp = token_logprobs(m, s).mean();
    Vec g(m.params.size());
    const double loss = simnpo_loss(m, s, alpha, g);
    CHECK(std::abs(loss -
                   static_cast<double>(npo_scalar_ld(mean_lp, alpha))) <
          1e-12);
    const LossFn fn = [&](const ToyModel& model) {
      Vec gg(model.params.size());
      const double v = simnpo_loss(model, s, alpha, gg);
      return std::make_pair(v, gg);
    };
    CHECK(grad_check(m, fn, 1e-5) < 1e-5);
  }
}

TEST_CASE("reference-free loss saturates at 2 log 2 for a certain target") {
  ToyModel m = make_tabular(4, 1);
  m.params[1 * 4 + 0] = 40.0;  // p(token 0 | state 1) ~ 1
  Sample s;
  s.prompt = {1};
  s.target = {0};
  Vec g(m.params.size());
  CHECK(std::abs(simnpo_loss(m, s, 1.0, g) - 2.0 * std::log(2.0)) < 1e-12);
}

TEST_CASE("unlearning losses vanish once the target is forgotten") {
  ToyModel m = make_tabular(4, 1);
  m.params[1 * 4 + 0] = -50.0;
  Sample s;
  s.prompt = {1};
  s.target = {0};
  const RefModel ref{make_tabular(4, 1)};
  Vec g(m.params.size());
  const double npo = npo_loss(m, ref, s, 1.0, g);
  CHECK(npo >= 0.0);
  CHECK(npo < 1e-12);
  const double sim = simnpo_loss(m, s, 1.0, g);
  CHECK(sim >= 0.0);
  CHECK(sim < 1e-12);
}

TEST_CASE("extreme log-ratios stay finite") {
  ToyModel m = make_tabular(2, 1);
  ToyModel ref_m = make_tabular(2, 1);
  m.params[0] = 600.0;    // state 0 row: [600, 0], lp(token 0) ~ -0
  ref_m.params[0] = -600.0;  // lp(token 0) ~ -600
  const RefModel ref{ref_m};
  Sample s;
  s.prompt = {0};
  s.target = {0};
  Vec g(m.params.size());
  const double r = token_logprobs(m, s)[0] - token_logprobs(ref.model, s)[0];
  const double loss = npo_loss(m, ref, s, 1.0, g);
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(2.0 * r).epsilon(1e-9));
  CHECK(g.allFinite());
}

TEST_CASE("saturation weights hit closed-form anchors") {
  // Uniform binary model puts p = 1/2 on every token.
  const ToyModel half = make_tabular(2, 1);
  Sample s;
  s.prompt = {0};
  s.target = {1};
  CHECK(std::abs(satimp_weights(half, s, 1.0, 1.0)[0] - 0.25) < 1e-15);

  ToyModel p9 = make_tabular(2, 1);
  p9.params[0 * 2 + 1] = std::log(9.0);  // p(token 1 | state 0) = 0.9
  CHECK(std::abs(satimp_weights(p9, s, 1.0, 0.0)[0] - 0.9) < 1e-12);

  ToyModel p8 = make_tabular(2, 1);
  p8.params[0 * 2 + 1] = std::log(4.0);  // p = 0.8
  CHECK(std::abs(satimp_weights(p8, s, 2.0, 1.0)[0] - 0.128) < 1e-12);

  CHECK_THROWS_AS(satimp_weights(half, s, -1.0, 0.0), std::invalid_argument);
}

TEST_CASE("saturation-weighted loss on a uniform model") {
  const ToyModel m = make_tabular(4, 2);
  Sample s;
  s.prompt = {0, 1};
  s.target = {2, 3};
  Vec g(m.params.size());
  const double loss = satimp_loss(m, s, 1.0, 1.0, g);
  // w = 0.25 * 0.75 at every position, loss = w * log(1/4)
  const long double expected = 0.1875L * logl(0.25L);
  CHECK(std::abs(loss - static_cast<double>(expected)) < 1e-14);
}

TEST_CASE("zero saturation exponents reduce to the ascent loss") {
  std::mt19937_64 rng(27);
  for (int rep = 0; rep < 4; ++rep) {
    const ToyModel m = testutil::random_model(rng, rep % 2 == 1, 5);
    const Sample s = testutil::random_sample(rng, 5, 2, 3);
    Vec g1(m.params.size()), g2(m.params.size());
    const double sat = satimp_loss(m, s, 0.0, 0.0, g1);
    const double ga = ga_loss(m, s, g2);
    CHECK(std::abs(sat - ga) < 1e-15);
    CHECK((g1 - g2).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("saturation weights are detached from the gradient") {
  std::mt19937_64 rng(28);
  const ToyModel m = testutil::random_model(rng, true, 5);
  const Sample s = testutil::random_sample(rng, 5, 2, 3);
  const double a1 = 1.0, a2 = 2.0;
  Vec g(m.params.size());
  const double loss = satimp_loss(m, s, a1, a2, g);

  // Frozen objective: weights pinned at the base parameters.
  const Vec w0 = satimp_weights(m, s, a1, a2) /
                 static_cast<double>(s.target.size());
  const LossFn frozen = [&](const ToyModel& model) {
    Vec gg = Vec::Zero(model.params.size());
    const double v = weighted_logprob_accum_grad(model, s, w0, gg);
    return std::make_pair(v, gg);
  };
  const auto [fval, fgrad] = frozen(m);
  CHECK(std::abs(fval - loss) < 1e-15);
  CHECK((fgrad - g).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(grad_check(m, frozen, 1e-5) < 1e-5);
}

TEST_CASE("combined objective is forget plus lambda retain") {
  Vec fg(3), rg(3), out(3);
  fg << 1.0, 2.0, 3.0;
  rg << -1.0, 0.5, 2.0;
  const double total = combined_objective(1.0, fg, 2.0, rg, 0.5, out);
  CHECK(total == 2.0);
  CHECK(out[0] == 0.5);
  CHECK(out[1] == 2.25);
  CHECK(out[2] == 4.0);
  CHECK(combined_objective(1.0, fg, 2.0, rg, 0.0, out) == 1.0);
  CHECK(out == fg);
  Vec short_g(2);
  CHECK_THROWS_AS(combined_objective(1.0, fg, 2.0, short_g, 1.0, out),
                  std::invalid_argument);
}

TEST_CASE("loss-only dispatcher agrees with the gradient dispatcher") {
  std::mt19937_64 rng(29);
  const Method methods[] = {Method::GA, Method::GD, Method::NPO,
                            Method::SimNPO, Method::SatImp};
  for (int rep = 0; rep < 4; ++rep) {
    const ToyModel m = testutil::random_model(rng, rep % 2 == 1, 5);
    ToyModel ref_m = m;
    init_params(ref_m, rng(), 0.2);
    const RefModel ref{ref_m};
    const Sample s = testutil::random_sample(rng, 5, 2, 3);
    LossParams p;
    p.alpha_npo = 1.5;
    p.alpha_sim = 2.0;
    p.alpha1 = 1.0;
    p.alpha2 = 1.0;
    Vec g(m.params.size());
    for (Method method : methods) {
      const double with_grad = forget_loss_grad(method, m, ref, s, p, g);
      const double value_only = forget_loss_value(method, m, ref, s, p);
      CHECK(std::abs(with_grad - value_only) < 1e-12);
    }
  }
}

TEST_CASE("mismatched reference shapes are rejected") {
  const ToyModel m = make_tabular(4, 2);
  const RefModel ref{make_tabular(5, 2)};
  Sample s;
  s.prompt = {0};
  s.target = {1};
  Vec g(m.params.size());
  CHECK_THROWS_AS(npo_loss(m, ref, s, 1.0, g), std::invalid_argument);
  CHECK_THROWS_AS(npo_loss(m, RefModel{m}, s, 0.0, g), std::invalid_argument);
}
