// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "baldro/toy_model.hpp"
#include "test_util.hpp"

using namespace baldro;

TEST_CASE("param_count matches the layer shapes") {
  CHECK(param_count(make_tabular(4, 2)) == 4 * 4 * 4);
  CHECK(param_count(make_tabular(64, 2)) == 64L * 64 * 64);
  // 5*3 + 3*2*7 + 7 + 7*5 + 5
  CHECK(param_count(make_mlp(5, 2, 3, 7)) == 104);
  CHECK_THROWS_AS(make_tabular(1, 2), std::invalid_argument);
  CHECK_THROWS_AS(make_tabular(4096, 8), std::invalid_argument);
  CHECK_THROWS_AS(make_mlp(4, 2, 0, 3), std::invalid_argument);
}

TEST_CASE("uniform tabular model emits -log V everywhere") {
  const ToyModel m = make_tabular(4, 2);
  Sample s;
  s.prompt = {1, 2};
  s.target = {0, 3, 2};
  const Vec lp = token_logprobs(m, s);
  REQUIRE(lp.size() == 3);
  for (long k = 0; k < lp.size(); ++k)
    CHECK(std::abs(lp[k] - std::log(0.25)) < 1e-15);
  CHECK(std::abs(ce_loss(m, s) - std::log(4.0)) < 1e-15);
}

TEST_CASE("dominant logit log-prob matches a long double oracle") {
  ToyModel m = make_tabular(4, 1);
  // Context state 1 gets logits [10, 0, 0, 0].
  m.params[1 * 4 + 0] = 10.0;
  Sample s;
  s.prompt = {1};
  s.target = {0};
  const Vec lp = token_logprobs(m, s);
  const long double oracle =
      10.0L - testutil::lse_ld({10.0L, 0.0L, 0.0L, 0.0L});
  CHECK(std::abs(lp[0] - static_cast<double>(oracle)) < 1e-12);
  CHECK(lp[0] == doctest::Approx(-1.3619e-4).epsilon(1e-4));
}

TEST_CASE("invalid samples are rejected") {
  const ToyModel m = make_tabular(4, 2);
  Sample bad_token;
  bad_token.prompt = {0};
  bad_token.target = {4};
  CHECK_THROWS_AS(token_logprobs(m, bad_token), std::domain_error);
  bad_token.target = {-1};
  CHECK_THROWS_AS(token_logprobs(m, bad_token), std::domain_error);
  Sample empty;
  empty.prompt = {0};
  CHECK_THROWS_AS(token_logprobs(m, empty), std::invalid_argument);
  ToyModel wrong = m;
  wrong.params.resize(7);
  Sample ok;
  ok.prompt = {0};
  ok.target = {1};
  CHECK_THROWS_AS(token_logprobs(wrong, ok), std::invalid_argument);
}

TEST_CASE("tabular CE gradient equals softmax minus onehot over length") {
  std::mt19937_64 rng(11);
  ToyModel m = make_tabular(4, 1);
  init_params(m, rng(), 0.5);
  Sample s;
  s.prompt = {2};
  s.target = {1, 3};  // states: ctx [2] then ctx [1]
  const auto [ce, grad] = ce_loss_and_grad(m, s);
  CHECK(std::abs(ce - ce_loss(m, s)) < 1e-15);
  Vec expected = Vec::Zero(m.params.size());
  const Mat lp = position_vocab_logprobs(m, s);
  const int states[2] = {2, 1};
  for (int k = 0; k < 2; ++k) {
    Vec p = lp.col(k).array().exp();
    expected.segment(states[k] * 4, 4) += p / 2.0;
    expected[states[k] * 4 + s.target[k]] -= 0.5;
  }
  CHECK((grad - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("repeated context states accumulate gradient contributions") {
  std::mt19937_64 rng(12);
  ToyModel m = make_tabular(4, 1);
  init_params(m, rng(), 0.5);
  Sample s;
  s.prompt = {3};
  s.target = {3, 3};  // both positions share context state 3
  const auto [ce, grad] = ce_loss_and_grad(m, s);
  const Mat lp = position_vocab_logprobs(m, s);
  Vec expected = Vec::Zero(m.params.size());
  for (int k = 0; k < 2; ++k) {
    Vec p = lp.col(k).array().exp();
    expected.segment(3 * 4, 4) += p / 2.0;
    expected[3 * 4 + 3] -= 0.5;
  }
  CHECK((grad - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::isfinite(ce));
}

TEST_CASE("probability rows sum to one") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 8; ++rep) {
    const ToyModel m = testutil::random_model(rng, rep % 2 == 1, 6);
    const Sample s = testutil::random_sample(rng, 6, 2, 4);
    const Mat lp = position_vocab_logprobs(m, s);
    for (long k = 0; k < lp.cols(); ++k)
      CHECK(std::abs(lp.col(k).array().exp().sum() - 1.0) < 1e-12);
    // token_logprobs agrees with the full table
    const Vec tlp = token_logprobs(m, s);
    for (long k = 0; k < tlp.size(); ++k)
      CHECK(tlp[k] == lp(s.target[k], k));
  }
}

TEST_CASE("begin sentinel indexes as token zero") {
  std::mt19937_64 rng(14);
  const ToyModel m = testutil::random_model(rng, false, 5);
  Sample no_prompt;
  no_prompt.target = {3, 1};
  Sample zero_prompt;
  zero_prompt.prompt = {0, 0};
  zero_prompt.target = {3, 1};
  const Vec a = token_logprobs(m, no_prompt);
  // Position 0 of no_prompt sees [sentinel, sentinel] = state of [0, 0].
  const Vec b = token_logprobs(m, zero_prompt);
  CHECK(a[0] == b[0]);
  const ToyModel mm = testutil::random_model(rng, true, 5);
  CHECK(token_logprobs(mm, no_prompt)[0] ==
        token_logprobs(mm, zero_prompt)[0]);
}

TEST_CASE("finite differences validate the CE gradient") {
  std::mt19937_64 rng(15);
  for (int rep = 0; rep < 6; ++rep) {
    const bool mlp = rep % 2 == 1;
    const ToyModel m = testutil::random_model(rng, mlp, 5);
    const Sample s = testutil::random_sample(rng, 5, 2, 3);
    const LossFn ce = [&s](const ToyModel& model) {
      return ce_loss_and_grad(model, s);
    };
    CHECK(grad_check(m, ce, 1e-5) < 1e-5);
  }
}

TEST_CASE("grad_check flags a corrupted gradient") {
  std::mt19937_64 rng(16);
  const ToyModel m = testutil::random_model(rng, false, 4);
  const Sample s = testutil::random_sample(rng, 4, 1, 3);
  const LossFn corrupted = [&s](const ToyModel& model) {
    auto [v, g] = ce_loss_and_grad(model, s);
    g[0] += 0.5;
    return std::make_pair(v, g);
  };
  CHECK(grad_check(m, corrupted, 1e-5) > 1e-2);
}

TEST_CASE("grad_check on a quadratic is near machine precision") {
  std::mt19937_64 rng(17);
  ToyModel m = make_tabular(3, 1);
  init_params(m, rng(), 1.0);
  const LossFn quad = [](const ToyModel& model) {
    return std::make_pair(0.5 * model.params.squaredNorm(),
                          Vec(model.params));
  };
  CHECK(grad_check(m, quad, 1e-5) < 1e-9);
}

TEST_CASE("forward passes are deterministic") {
  std::mt19937_64 rng(18);
  const ToyModel m = testutil::random_model(rng, true, 6);
  const Sample s = testutil::random_sample(rng, 6, 2, 4);
  const Vec a = token_logprobs(m, s);
  const Vec b = token_logprobs(m, s);
  CHECK(a == b);
}

TEST_CASE("greedy decode breaks ties toward the lowest token id") {
  const ToyModel m = make_tabular(4, 2);
  const TokenSeq out = greedy_decode(m, {1, 2}, 5);
  REQUIRE(out.size() == 5);
  for (int t : out) CHECK(t == 0);
  CHECK(greedy_decode(m, {1}, 0).empty());
}

TEST_CASE("greedy decode follows a forced column") {
  ToyModel m = make_tabular(4, 2);
  for (int state = 0; state < 16; ++state) m.params[state * 4 + 2] = 3.0;
  const TokenSeq out = greedy_decode(m, {1}, 4);
  for (int t : out) CHECK(t == 2);
}

TEST_CASE("init_params is seeded and bounded") {
  ToyModel a = make_mlp(5, 2, 3, 4);
  ToyModel b = make_mlp(5, 2, 3, 4);
  init_params(a, 7);
  init_params(b, 7);
  CHECK(a.params == b.params);
  init_params(b, 8);
  CHECK(a.params != b.params);
  CHECK(a.params.cwiseAbs().maxCoeff() <= 0.1);
  CHECK(a.params.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("model files round trip bit exactly") {
  testutil::TempDir dir;
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 2; ++rep) {
    const ToyModel m = testutil::random_model(rng, rep == 1, 5);
    const std::string path = dir.file("model.txt");
    write_model(m, path);
    const ToyModel r = read_model(path);
    CHECK(r.variant == m.variant);
    CHECK(r.vocab_size == m.vocab_size);
    CHECK(r.context_order == m.context_order);
    CHECK(r.embed_dim == m.embed_dim);
    CHECK(r.hidden_dim == m.hidden_dim);
    CHECK(r.params == m.params);
  }
}

TEST_CASE("malformed model files are rejected") {
  testutil::TempDir dir;
  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir.file(name), std::ios::binary);
    out << text;
    return dir.file(name);
  };
  CHECK_THROWS(read_model(dir.file("missing.txt")));
  CHECK_THROWS(read_model(write_text("empty.txt", "")));
  CHECK_THROWS(read_model(write_text("variant.txt", "rnn 4 2\n0\n")));
  CHECK_THROWS(read_model(write_text("trunc.txt", "tabular 2 1\n0.5\n")));
  CHECK_THROWS(read_model(
      write_text("badnum.txt", "tabular 2 1\n0.5\nx\n1\n2\n")));
  CHECK_THROWS(read_model(
      write_text("nonfinite.txt", "tabular 2 1\n0.5\ninf\n1\n2\n")));
}
