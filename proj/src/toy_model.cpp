// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#include "baldro/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "baldro/rng.hpp"

namespace baldro {

namespace {

constexpr long kMaxParams = 100000000;

long checked_param_count(ModelVariant variant, int V, int order, int d,
                         int h) {
  if (V < 2) throw std::invalid_argument("vocab_size must be >= 2");
  if (order < 1) throw std::invalid_argument("context_order must be >= 1");
  if (variant == ModelVariant::Tabular) {
    long rows = 1;
    for (int i = 0; i < order; ++i) {
      rows *= V;
      if (rows > kMaxParams) throw std::invalid_argument("tabular shape too large");
    }
    long total = rows * V;
    if (total > kMaxParams) throw std::invalid_argument("tabular shape too large");
    return total;
  }
  if (d < 1 || h < 1)
    throw std::invalid_argument("mlp dims must be >= 1");
  long total = static_cast<long>(V) * d + static_cast<long>(d) * order * h +
               h + static_cast<long>(h) * V + V;
  if (total > kMaxParams) throw std::invalid_argument("mlp shape too large");
  return total;
}

/// Offsets of the Mlp parameter blocks in the flat vector.
struct MlpDims {
  int V, order, d, h;
  long emb, w1, b1, w2, b2;
};

MlpDims mlp_dims(const ToyModel& m) {
  MlpDims dd;
  dd.V = m.vocab_size;
  dd.order = m.context_order;
  dd.d = m.embed_dim;
  dd.h = m.hidden_dim;
  dd.emb = 0;
  dd.w1 = dd.emb + static_cast<long>(dd.V) * dd.d;
  dd.b1 = dd.w1 + static_cast<long>(dd.d) * dd.order * dd.h;
  dd.w2 = dd.b1 + dd.h;
  dd.b2 = dd.w2 + static_cast<long>(dd.h) * dd.V;
  return dd;
}

void check_model(const ToyModel& m) {
  if (m.params.size() != param_count(m))
    throw std::invalid_argument("params size does not match model shape");
}

void check_tokens(const TokenSeq& t, int V) {
  for (int tok : t)
    if (tok < 0 || tok >= V)
      throw std::domain_error("token id out of range [0, vocab_size)");
}

/// Context token ids for each target position: the context_order tokens
/// preceding position k of (prompt ++ target), begin sentinel indexing as 0.
std::vector<int> context_windows(const Sample& s, int order) {
  const long np = static_cast<long>(s.prompt.size());
  const long ny = static_cast<long>(s.target.size());
  std::vector<int> full;
  full.reserve(np + ny);
  full.insert(full.end(), s.prompt.begin(), s.prompt.end());
  full.insert(full.end(), s.target.begin(), s.target.end());
  std::vector<int> ctx(static_cast<std::size_t>(ny) * order);
  for (long k = 0; k < ny; ++k) {
    const long pos = np + k;
    for (int j = 0; j < order; ++j) {
      const long src = pos - order + j;
      ctx[k * order + j] = src >= 0 ? full[src] : 0;
    }
  }
  return ctx;
}

long tabular_state(const int* ctx, int order, int V) {
  long state = 0;
  for (int j = 0; j < order; ++j) state = state * V + ctx[j];
  return state;
}

double log_sum_exp(const Eigen::Ref<const Vec>& z) {
  const double zmax = z.maxCoeff();
  return zmax + std::log((z.array() - zmax).exp().sum());
}

/// Scratch for one Mlp forward/backward position.
struct MlpWork {
  Vec x, a1, h1, logits, dlogits, da1, dx;
  void resize(const MlpDims& dd) {
    x.resize(static_cast<long>(dd.d) * dd.order);
    a1.resize(dd.h);
    h1.resize(dd.h);
    logits.resize(dd.V);
    dlogits.resize(dd.V);
    da1.resize(dd.h);
    dx.resize(static_cast<long>(dd.d) * dd.order);
  }
};

void mlp_forward(const ToyModel& m, const MlpDims& dd, const int* ctx,
                 MlpWork& w) {
  Eigen::Map<const Mat> E(m.params.data() + dd.emb, dd.V, dd.d);
  Eigen::Map<const Mat> W1(m.params.data() + dd.w1,
                           static_cast<long>(dd.d) * dd.order, dd.h);
  Eigen::Map<const Vec> b1(m.params.data() + dd.b1, dd.h);
  Eigen::Map<const Mat> W2(m.params.data() + dd.w2, dd.h, dd.V);
  Eigen::Map<const Vec> b2(m.params.data() + dd.b2, dd.V);
  for (int j = 0; j < dd.order; ++j)
    w.x.segment(static_cast<long>(j) * dd.d, dd.d) = E.row(ctx[j]).transpose();
  w.a1.noalias() = W1.transpose() * w.x;
  w.a1 += b1;
  w.h1 = w.a1.array().tanh();
  w.logits.noalias() = W2.transpose() * w.h1;
  w.logits += b2;
}

/// Accumulates d(loss)/d(params) for d(loss)/d(logits) = w.dlogits.
void mlp_backward(const ToyModel& m, const MlpDims& dd, const int* ctx,
                  MlpWork& w, Eigen::Ref<Vec> grad) {
  Eigen::Map<const Mat> W1(m.params.data() + dd.w1,
                           static_cast<long>(dd.d) * dd.order, dd.h);
  Eigen::Map<const Mat> W2(m.params.data() + dd.w2, dd.h, dd.V);
  Eigen::Map<Mat> gE(grad.data() + dd.emb, dd.V, dd.d);
  Eigen::Map<Mat> gW1(grad.data() + dd.w1,
                      static_cast<long>(dd.d) * dd.order, dd.h);
  Eigen::Map<Vec> gb1(grad.data() + dd.b1, dd.h);
  Eigen::Map<Mat> gW2(grad.data() + dd.w2, dd.h, dd.V);
  Eigen::Map<Vec> gb2(grad.data() + dd.b2, dd.V);

  gW2.noalias() += w.h1 * w.dlogits.transpose();
  gb2 += w.dlogits;
  w.da1.noalias() = W2 * w.dlogits;
  w.da1.array() *= 1.0 - w.h1.array().square();
  gW1.noalias() += w.x * w.da1.transpose();
  gb1 += w.da1;
  w.dx.noalias() = W1 * w.da1;
  for (int j = 0; j < dd.order; ++j)
    gE.row(ctx[j]) += w.dx.segment(static_cast<long>(j) * dd.d, dd.d).transpose();
}

void validate_sample(const ToyModel& m, const Sample& s) {
  check_model(m);
  if (s.target.empty()) throw std::invalid_argument("empty target sequence");
  check_tokens(s.prompt, m.vocab_size);
  check_tokens(s.target, m.vocab_size);
}

}  // namespace

ToyModel make_tabular(int vocab_size, int context_order) {
  ToyModel m;
  m.variant = ModelVariant::Tabular;
  m.vocab_size = vocab_size;
  m.context_order = context_order;
  m.params = Vec::Zero(checked_param_count(m.variant, vocab_size,
                                           context_order, 0, 0));
  return m;
}

ToyModel make_mlp(int vocab_size, int context_order, int embed_dim,
                  int hidden_dim) {
  ToyModel m;
  m.variant = ModelVariant::Mlp;
  m.vocab_size = vocab_size;
  m.context_order = context_order;
  m.embed_dim = embed_dim;
  m.hidden_dim = hidden_dim;
  m.params = Vec::Zero(checked_param_count(m.variant, vocab_size,
                                           context_order, embed_dim,
                                           hidden_dim));
  return m;
}

long param_count(const ToyModel& m) {
  return checked_param_count(m.variant, m.vocab_size, m.context_order,
                             m.embed_dim, m.hidden_dim);
}

void init_params(ToyModel& m, std::uint64_t seed, double scale) {
  check_model(m);
  std::mt19937_64 rng(seed);
  for (long i = 0; i < m.params.size(); ++i)
    m.params[i] = next_symmetric(rng, scale);
}

Vec token_logprobs(const ToyModel& m, const Sample& s) {
  validate_sample(m, s);
  const int order = m.context_order;
  const int V = m.vocab_size;
  const long ny = static_cast<long>(s.target.size());
  const std::vector<int> ctx = context_windows(s, order);
  Vec out(ny);
  if (m.variant == ModelVariant::Tabular) {
    for (long k = 0; k < ny; ++k) {
      const long state = tabular_state(&ctx[k * order], order, V);
      auto row = m.params.segment(state * V, V);
      out[k] = row[s.target[k]] - log_sum_exp(row);
    }
  } else {
    const MlpDims dd = mlp_dims(m);
    MlpWork w;
    w.resize(dd);
    for (long k = 0; k < ny; ++k) {
      mlp_forward(m, dd, &ctx[k * order], w);
      out[k] = w.logits[s.target[k]] - log_sum_exp(w.logits);
    }
  }
  return out;
}

Mat position_vocab_logprobs(const ToyModel& m, const Sample& s) {
  validate_sample(m, s);
  const int order = m.context_order;
  const int V = m.vocab_size;
  const long ny = static_cast<long>(s.target.size());
  const std::vector<int> ctx = context_windows(s, order);
  Mat out(V, ny);
  if (m.variant == ModelVariant::Tabular) {
    for (long k = 0; k < ny; ++k) {
      const long state = tabular_state(&ctx[k * order], order, V);
      auto row = m.params.segment(state * V, V);
      out.col(k) = row.array() - log_sum_exp(row);
    }
  } else {
    const MlpDims dd = mlp_dims(m);
    MlpWork w;
    w.resize(dd);
    for (long k = 0; k < ny; ++k) {
      mlp_forward(m, dd, &ctx[k * order], w);
      out.col(k) = w.logits.array() - log_sum_exp(w.logits);
    }
  }
  return out;
}

double weighted_logprob_accum_grad(const ToyModel& m, const Sample& s,
                                   const Eigen::Ref<const Vec>& weights,
                                   Eigen::Ref<Vec> grad) {
  validate_sample(m, s);
  const long ny = static_cast<long>(s.target.size());
  if (weights.size() != ny)
    throw std::invalid_argument("weights length != target length");
  if (grad.size() != m.params.size())
    throw std::invalid_argument("grad length != params length");
  const int order = m.context_order;
  const int V = m.vocab_size;
  const std::vector<int> ctx = context_windows(s, order);
  double total = 0.0;
  if (m.variant == ModelVariant::Tabular) {
    Vec p(V);
    for (long k = 0; k < ny; ++k) {
      const long state = tabular_state(&ctx[k * order], order, V);
      auto row = m.params.segment(state * V, V);
      const double lse = log_sum_exp(row);
      total += weights[k] * (row[s.target[k]] - lse);
      // d(logprob)/d(row) = onehot - softmax
      p = (row.array() - lse).exp();
      grad.segment(state * V, V) -= weights[k] * p;
      grad[state * V + s.target[k]] += weights[k];
    }
  } else {
    const MlpDims dd = mlp_dims(m);
    MlpWork w;
    w.resize(dd);
    for (long k = 0; k < ny; ++k) {
      mlp_forward(m, dd, &ctx[k * order], w);
      const double lse = log_sum_exp(w.logits);
      total += weights[k] * (w.logits[s.target[k]] - lse);
      w.dlogits = -weights[k] * (w.logits.array() - lse).exp();
      w.dlogits[s.target[k]] += weights[k];
      mlp_backward(m, dd, &ctx[k * order], w, grad);
    }
  }
  return total;
}

double mean_logprob_and_grad(const ToyModel& m, const Sample& s,
                             Eigen::Ref<Vec> grad) {
  const long ny = static_cast<long>(s.target.size());
  if (ny == 0) throw std::invalid_argument("empty target sequence");
  grad.setZero();
  const Vec w = Vec::Constant(ny, 1.0 / static_cast<double>(ny));
  return weighted_logprob_accum_grad(m, s, w, grad);
}

std::pair<double, Vec> ce_loss_and_grad(const ToyModel& m, const Sample& s) {
  Vec grad(m.params.size());
  const double mean_lp = mean_logprob_and_grad(m, s, grad);
  grad = -grad;
  return {-mean_lp, std::move(grad)};
}

double ce_loss(const ToyModel& m, const Sample& s) {
  return -token_logprobs(m, s).mean();
}

TokenSeq greedy_decode(const ToyModel& m, const TokenSeq& prompt, int len) {
  check_model(m);
  check_tokens(prompt, m.vocab_size);
  if (len < 0) throw std::invalid_argument("negative decode length");
  const int order = m.context_order;
  const int V = m.vocab_size;
  TokenSeq full = prompt;
  TokenSeq out;
  out.reserve(len);
  std::vector<int> ctx(order);
  const MlpDims dd = m.variant == ModelVariant::Mlp ? mlp_dims(m) : MlpDims{};
  MlpWork w;
  if (m.variant == ModelVariant::Mlp) w.resize(dd);
  for (int step = 0; step < len; ++step) {
    const long pos = static_cast<long>(full.size());
    for (int j = 0; j < order; ++j) {
      const long src = pos - order + j;
      ctx[j] = src >= 0 ? full[src] : 0;
    }
    int best = 0;
    if (m.variant == ModelVariant::Tabular) {
      const long state = tabular_state(ctx.data(), order, V);
      auto row = m.params.segment(state * V, V);
      double best_v = row[0];
      for (int v = 1; v < V; ++v)
        if (row[v] > best_v) { best_v = row[v]; best = v; }
    } else {
      mlp_forward(m, dd, ctx.data(), w);
      double best_v = w.logits[0];
      for (int v = 1; v < V; ++v)
        if (w.logits[v] > best_v) { best_v = w.logits[v]; best = v; }
    }
    out.push_back(best);
    full.push_back(best);
  }
  return out;
}

double grad_check(const ToyModel& m, const LossFn& loss_fn, double step) {
  check_model(m);
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  const Vec g = loss_fn(m).second;
  if (g.size() != m.params.size())
    throw std::invalid_argument("loss_fn gradient length != params length");
  ToyModel probe = m;
  double worst = 0.0;
  for (long i = 0; i < probe.params.size(); ++i) {
    const double orig = probe.params[i];
    probe.params[i] = orig + step;
    const double up = loss_fn(probe).first;
    probe.params[i] = orig - step;
    const double down = loss_fn(probe).first;
    probe.params[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("non-finite loss during finite differencing");
    const double fd = (up - down) / (2.0 * step);
    const double rel = std::abs(g[i] - fd) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, rel);
  }
  return worst;
}

void write_model(const ToyModel& m, const std::string& path) {
  check_model(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  if (m.variant == ModelVariant::Tabular)
    out << "tabular " << m.vocab_size << ' ' << m.context_order << '\n';
  else
    out << "mlp " << m.vocab_size << ' ' << m.context_order << ' '
        << m.embed_dim << ' ' << m.hidden_dim << '\n';
  char buf[64];
  for (long i = 0; i < m.params.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", m.params[i]);
    out << buf << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ToyModel read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("model file is empty: " + path);
  std::istringstream hs(header);
  std::string kind;
  hs >> kind;
  ToyModel m;
  if (kind == "tabular") {
    if (!(hs >> m.vocab_size >> m.context_order))
      throw std::runtime_error("malformed tabular model header: " + path);
    m.variant = ModelVariant::Tabular;
  } else if (kind == "mlp") {
    if (!(hs >> m.vocab_size >> m.context_order >> m.embed_dim >> m.hidden_dim))
      throw std::runtime_error("malformed mlp model header: " + path);
    m.variant = ModelVariant::Mlp;
  } else {
    throw std::runtime_error("unknown model variant '" + kind + "': " + path);
  }
  std::string trail;
  if (hs >> trail)
    throw std::runtime_error("trailing tokens in model header: " + path);
  const long n = param_count(m);
  m.params.resize(n);
  std::string line;
  for (long i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error("model file truncated: " + path);
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(line, &used);
    } catch (const std::exception&) {
      throw std::runtime_error("bad parameter line in model file: " + path);
    }
    while (used < line.size() && std::isspace(static_cast<unsigned char>(line[used]))) ++used;
    if (used != line.size())
      throw std::runtime_error("bad parameter line in model file: " + path);
    if (!std::isfinite(v))
      throw std::runtime_error("non-finite parameter in model file: " + path);
    m.params[i] = v;
  }
  if (std::getline(in, line) && !line.empty())
    throw std::runtime_error("trailing content in model file: " + path);
  return m;
}

}  // namespace baldro
