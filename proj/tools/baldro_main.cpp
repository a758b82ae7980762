// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

// Batch front-end for the unlearning lab: dataset generation, pretraining,
// unlearning runs, evaluation reports, and beta/lambda sweeps. Every command
// reads a flat key = value config, writes its artifacts plus a manifest with
// FNV-1a checksums, and is byte-reproducible from (inputs, seed) apart from
// the manifest's wall_ms line.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "baldro/config.hpp"
#include "baldro/data_synth.hpp"
#include "baldro/dro.hpp"
#include "baldro/losses.hpp"
#include "baldro/metrics.hpp"
#include "baldro/toy_model.hpp"
#include "baldro/trainer.hpp"

namespace {

using namespace baldro;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fnv1a_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file for checksum: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(h));
  return out;
}

/// Ordered key-value rows; wall_ms is appended last so everything above it
/// is byte-stable across reruns.
struct Manifest {
  std::vector<std::pair<std::string, std::string>> rows;

  void add(const std::string& key, const std::string& value) {
    rows.emplace_back(key, value);
  }
  void add_file(const std::string& role, const std::string& path) {
    add(role, path);
    add(role + ".fnv1a", fnv1a_hex(path));
  }
  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write manifest: " + path);
    for (const auto& [k, v] : rows) out << k << " = " << v << '\n';
    if (!out) throw ConfigError("manifest write failed: " + path);
  }
};

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  long ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::string corpus_path;
  std::string model_path;
  std::string ref_path;
  std::string traj_path;
  long seed_flag = 0;
  bool seed_given = false;
};

KeyValueConfig load_config(const CommonArgs& a, bool required) {
  if (a.config_path.empty()) {
    if (required) throw ConfigError("--config is required for this command");
    return KeyValueConfig{};
  }
  return KeyValueConfig::parse_file(a.config_path);
}

void need(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ConfigError(flag + " is required for this command");
}

std::uint64_t effective_seed(const CommonArgs& a, const KeyValueConfig& cfg) {
  if (a.seed_given) return static_cast<std::uint64_t>(a.seed_flag);
  return static_cast<std::uint64_t>(cfg.get_int("seed", 0));
}

Manifest start_manifest(const std::string& command, const CommonArgs& a,
                        const KeyValueConfig& cfg, std::uint64_t seed) {
  Manifest m;
  m.add("command", command);
  m.add("config", a.config_path.empty() ? "<none>" : a.config_path);
  for (const auto& [k, v] : cfg.values) m.add("cfg." + k, v);
  m.add("seed", std::to_string(seed));
  return m;
}

Method parse_method(const std::string& v) {
  if (v == "ga") return Method::GA;
  if (v == "gd") return Method::GD;
  if (v == "npo") return Method::NPO;
  if (v == "simnpo") return Method::SimNPO;
  if (v == "satimp") return Method::SatImp;
  throw ConfigError("key 'method' has unknown value '" + v + "'");
}

DroVariant parse_dro(const std::string& v) {
  if (v == "none") return DroVariant::None;
  if (v == "g") return DroVariant::G;
  if (v == "dv") return DroVariant::DV;
  throw ConfigError("key 'dro' has unknown value '" + v + "'");
}

OptimizerKind parse_optimizer(const std::string& v) {
  if (v == "sgd") return OptimizerKind::SGD;
  if (v == "adam") return OptimizerKind::Adam;
  throw ConfigError("key 'optimizer' has unknown value '" + v + "'");
}

/// "id:group, id:group, ..." pairs for the fixed-partition G variant.
std::map<long, int> parse_groups(const std::string& text) {
  std::map<long, int> groups;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    std::string part = text.substr(start, comma - start);
    const auto ltrim = part.find_first_not_of(" \t");
    const auto rtrim = part.find_last_not_of(" \t");
    if (ltrim == std::string::npos)
      throw ConfigError("key 'groups' has an empty entry");
    part = part.substr(ltrim, rtrim - ltrim + 1);
    const std::size_t colon = part.find(':');
    if (colon == std::string::npos)
      throw ConfigError("key 'groups' entries must look like id:group, got '" +
                        part + "'");
    try {
      std::size_t used = 0;
      const long id = std::stol(part.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument(part);
      const std::string gtext = part.substr(colon + 1);
      const int gid = static_cast<int>(std::stol(gtext, &used));
      if (used != gtext.size()) throw std::invalid_argument(part);
      if (groups.count(id))
        throw ConfigError("key 'groups' assigns sample " + std::to_string(id) +
                          " twice");
      groups[id] = gid;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("key 'groups' entries must look like id:group, got '" +
                        part + "'");
    }
    start = comma + 1;
  }
  return groups;
}

const std::set<std::string> kUnlearnKeys = {
    "method",    "dro",       "beta",   "rho",          "eta",
    "lambda",    "alpha_npo", "alpha_sim", "alpha1",    "alpha2",
    "lr",        "batch_size", "epochs", "optimizer",   "seed",
    "dro_on_retain", "dv_full_set", "groups"};

UnlearnConfig unlearn_config_from(const KeyValueConfig& cfg,
                                  std::uint64_t seed) {
  UnlearnConfig u;
  u.method = parse_method(cfg.get_string("method", "npo"));
  u.dro.variant = parse_dro(cfg.get_string("dro", "none"));
  u.dro.beta = cfg.get_double("beta", 2.0);
  u.dro.rho = cfg.get_double("rho", 0.5);
  u.dro.eta = cfg.get_double("eta", 0.0);
  u.dro.apply_to_retain = cfg.get_bool("dro_on_retain", false);
  u.dro.full_set = cfg.get_bool("dv_full_set", false);
  if (cfg.has("groups")) u.dro.groups = parse_groups(cfg.get_string("groups"));
  u.loss_params.lambda = cfg.get_double("lambda", 1.0);
  u.loss_params.alpha_npo = cfg.get_double("alpha_npo", 1.0);
  u.loss_params.alpha_sim = cfg.get_double("alpha_sim", 1.0);
  u.loss_params.alpha1 = cfg.get_double("alpha1", 0.0);
  u.loss_params.alpha2 = cfg.get_double("alpha2", 0.0);
  u.lr = cfg.get_double("lr", 0.01);
  u.batch_size = static_cast<int>(cfg.get_int("batch_size", 8));
  u.epochs = static_cast<int>(cfg.get_int("epochs", 10));
  u.optimizer = parse_optimizer(cfg.get_string("optimizer", "adam"));
  u.seed = seed;
  return u;
}

double mean_retain_ppl(const ToyModel& m, const Corpus& corpus) {
  if (corpus.retain.empty())
    throw ConfigError("corpus has no retain samples");
  double sum = 0.0;
  for (const Sample& s : corpus.retain) sum += perplexity(m, s);
  return sum / static_cast<double>(corpus.retain.size());
}

/// Evaluation inputs when no unlearning trajectory exists: a single epoch
/// holding the model's current state, so forget epochs read "never" unless
/// the model already sits above tau.
TrajectoryLog snapshot_log(const ToyModel& m, const Corpus& corpus) {
  TrajectoryLog log;
  EpochRecord er;
  er.epoch = 0;
  er.step_count = 0;
  for (const Sample& s : corpus.forget) {
    const double ce = ce_loss(m, s);
    er.samples.push_back(SampleRecord{s.id, ce, std::exp(ce), 0.0});
  }
  double rsum = 0.0;
  for (const Sample& s : corpus.retain) rsum += ce_loss(m, s);
  er.retain_loss =
      corpus.retain.empty()
          ? 0.0
          : rsum / static_cast<double>(corpus.retain.size());
  log.epochs.push_back(std::move(er));
  return log;
}

int cmd_gen_data(const CommonArgs& a) {
  const Timer timer;
  const KeyValueConfig cfg = load_config(a, true);
  cfg.require_known({"vocab_size", "n_retain", "n_forget", "prompt_len",
                     "target_len", "dup_factors", "seed"});
  need(a.out_path, "--out");
  const std::uint64_t seed = effective_seed(a, cfg);

  DatasetSpec spec;
  spec.vocab_size = static_cast<int>(cfg.get_int("vocab_size"));
  spec.n_retain = static_cast<int>(cfg.get_int("n_retain"));
  spec.n_forget = static_cast<int>(cfg.get_int("n_forget"));
  spec.prompt_len = static_cast<int>(cfg.get_int("prompt_len"));
  spec.target_len = static_cast<int>(cfg.get_int("target_len"));
  spec.seed = seed;
  std::vector<long> dups = {1};
  if (cfg.has("dup_factors")) dups = cfg.get_int_list("dup_factors");
  if (dups.empty()) throw ConfigError("key 'dup_factors' is empty");
  spec.dup_factors.resize(spec.n_forget);
  for (int i = 0; i < spec.n_forget; ++i)
    spec.dup_factors[i] = static_cast<int>(dups[i % dups.size()]);

  const Corpus corpus = synthesize(spec);
  write_corpus(corpus, a.out_path);

  Manifest man = start_manifest("gen-data", a, cfg, seed);
  man.add_file("output.corpus", a.out_path);
  man.add("wall_ms", std::to_string(timer.ms()));
  man.write(a.out_path + ".manifest");
  return 0;
}

int cmd_pretrain(const CommonArgs& a) {
  const Timer timer;
  const KeyValueConfig cfg = load_config(a, true);
  cfg.require_known({"model", "vocab_size", "context_order", "embed_dim",
                     "hidden_dim", "lr", "epochs", "seed"});
  need(a.corpus_path, "--corpus");
  need(a.out_path, "--out");
  const std::uint64_t seed = effective_seed(a, cfg);

  const Corpus corpus = read_corpus(a.corpus_path);
  const int vocab = static_cast<int>(cfg.get_int("vocab_size"));
  for (const auto* sec : {&corpus.retain, &corpus.forget, &corpus.holdout})
    for (const Sample& s : *sec) {
      for (int t : s.prompt)
        if (t >= vocab)
          throw ConfigError("vocab_size " + std::to_string(vocab) +
                            " is smaller than corpus token " +
                            std::to_string(t));
      for (int t : s.target)
        if (t >= vocab)
          throw ConfigError("vocab_size " + std::to_string(vocab) +
                            " is smaller than corpus token " +
                            std::to_string(t));
    }

  const std::string kind = cfg.get_string("model", "tabular");
  const int order = static_cast<int>(cfg.get_int("context_order", 2));
  ToyModel m =
      kind == "tabular" ? make_tabular(vocab, order)
      : kind == "mlp"
          ? make_mlp(vocab, order,
                     static_cast<int>(cfg.get_int("embed_dim", 8)),
                     static_cast<int>(cfg.get_int("hidden_dim", 16)))
          : throw ConfigError("key 'model' has unknown value '" + kind + "'");
  init_params(m, seed);
  m = pretrain(std::move(m), corpus, cfg.get_double("lr"),
               static_cast<int>(cfg.get_int("epochs")), seed);
  write_model(m, a.out_path);

  Manifest man = start_manifest("pretrain", a, cfg, seed);
  man.add_file("input.corpus", a.corpus_path);
  man.add_file("output.model", a.out_path);
  man.add("wall_ms", std::to_string(timer.ms()));
  man.write(a.out_path + ".manifest");
  return 0;
}

int cmd_unlearn(const CommonArgs& a) {
  const Timer timer;
  const KeyValueConfig cfg = load_config(a, true);
  cfg.require_known(kUnlearnKeys);
  need(a.corpus_path, "--corpus");
  need(a.model_path, "--model");
  need(a.out_path, "--out");
  const std::uint64_t seed = effective_seed(a, cfg);

  const Corpus corpus = read_corpus(a.corpus_path);
  const ToyModel start = read_model(a.model_path);
  const UnlearnConfig ucfg = unlearn_config_from(cfg, seed);
  auto [model, log] = run_unlearning(start, corpus, ucfg);
  write_model(model, a.out_path);
  const std::string traj_path = a.out_path + ".traj.csv";
  write_trajectory_csv(log, traj_path);

  Manifest man = start_manifest("unlearn", a, cfg, seed);
  man.add_file("input.corpus", a.corpus_path);
  man.add_file("input.model", a.model_path);
  man.add_file("output.model", a.out_path);
  man.add_file("output.traj", traj_path);
  man.add("wall_ms", std::to_string(timer.ms()));
  man.write(a.out_path + ".manifest");
  return 0;
}

int cmd_eval(const CommonArgs& a) {
  const Timer timer;
  const KeyValueConfig cfg = load_config(a, false);
  cfg.require_known({"tau_factor", "cap_factor", "mink_k", "seed"});
  need(a.model_path, "--model");
  need(a.ref_path, "--ref");
  need(a.corpus_path, "--corpus");
  need(a.out_path, "--out");
  const std::uint64_t seed = effective_seed(a, cfg);

  const ToyModel model = read_model(a.model_path);
  const ToyModel ref = read_model(a.ref_path);
  if (model.vocab_size != ref.vocab_size ||
      model.params.size() != ref.params.size())
    throw ConfigError("model and reference model shapes disagree");
  const Corpus corpus = read_corpus(a.corpus_path);

  const double tau_factor = cfg.get_double("tau_factor", 2.0);
  const double cap_factor = cfg.get_double("cap_factor", 10.0);
  const double mink_k = cfg.get_double("mink_k", 0.2);
  const double ref_ppl = mean_retain_ppl(ref, corpus);
  const double tau = tau_factor * ref_ppl;
  const double cap = cap_factor * ref_ppl;

  TrajectoryLog log;
  if (a.traj_path.empty()) log = snapshot_log(model, corpus);
  else log = read_trajectory_csv(a.traj_path);

  const BalanceReport bal = balance_report(log, tau, cap);
  const PrivacyReport priv = privacy_report(model, corpus, mink_k);
  const double retain_ppl = mean_retain_ppl(model, corpus);
  const std::string report_path = a.out_path + ".report.txt";
  const std::string samples_path = a.out_path + ".samples.csv";
  write_report_kv(bal, priv, retain_ppl, report_path);
  write_report_csv(per_sample_rows(model, corpus.forget, bal, mink_k),
                   samples_path);

  Manifest man = start_manifest("eval", a, cfg, seed);
  man.add_file("input.model", a.model_path);
  man.add_file("input.ref", a.ref_path);
  man.add_file("input.corpus", a.corpus_path);
  if (!a.traj_path.empty()) man.add_file("input.traj", a.traj_path);
  man.add_file("output.report", report_path);
  man.add_file("output.samples", samples_path);
  man.add("wall_ms", std::to_string(timer.ms()));
  man.write(a.out_path + ".manifest");
  return 0;
}

int cmd_sweep(const CommonArgs& a) {
  const Timer timer;
  const KeyValueConfig cfg = load_config(a, true);
  std::set<std::string> keys = kUnlearnKeys;
  keys.erase("beta");
  keys.erase("lambda");
  keys.insert({"grid_beta", "grid_lambda", "tau_factor", "cap_factor",
               "mink_k"});
  cfg.require_known(keys);
  if (cfg.has("dro") && cfg.get_string("dro") == "none")
    throw ConfigError("key 'dro' must be 'dv' or 'g' for a sweep");
  need(a.corpus_path, "--corpus");
  need(a.model_path, "--model");
  need(a.out_path, "--out");
  const std::uint64_t seed = effective_seed(a, cfg);

  const std::vector<double> grid_beta = cfg.get_double_list("grid_beta");
  const std::vector<double> grid_lambda = cfg.get_double_list("grid_lambda");
  if (grid_beta.empty() || grid_lambda.empty())
    throw ConfigError("sweep grids must be non-empty");

  const Corpus corpus = read_corpus(a.corpus_path);
  const ToyModel start = read_model(a.model_path);
  const double tau_factor = cfg.get_double("tau_factor", 2.0);
  const double cap_factor = cfg.get_double("cap_factor", 10.0);
  const double mink_k = cfg.get_double("mink_k", 0.2);
  const double ref_ppl = mean_retain_ppl(start, corpus);

  UnlearnConfig base = unlearn_config_from(cfg, seed);
  if (!cfg.has("dro")) base.dro.variant = DroVariant::DV;

  std::ofstream out(a.out_path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + a.out_path);
  out << "beta,lambda,dispersion,retain_ppl,auc_loss,auc_mink,auc_minkpp,"
         "status\n";
  const double nan = std::nan("");
  for (double beta : grid_beta) {
    for (double lambda : grid_lambda) {
      UnlearnConfig cell = base;
      cell.dro.beta = beta;
      cell.loss_params.lambda = lambda;
      double dispersion = nan, retain_ppl = nan;
      double auc_loss = nan, auc_mink = nan, auc_minkpp = nan;
      std::string status = "ok";
      try {
        auto [model, log] = run_unlearning(start, corpus, cell);
        const BalanceReport bal =
            balance_report(log, tau_factor * ref_ppl, cap_factor * ref_ppl);
        const PrivacyReport priv = privacy_report(model, corpus, mink_k);
        dispersion = bal.std_epochs;
        retain_ppl = mean_retain_ppl(model, corpus);
        auc_loss = priv.auc_loss;
        auc_mink = priv.auc_mink;
        auc_minkpp = priv.auc_minkpp;
      } catch (const DivergenceError&) {
        status = "diverged";
      } catch (const std::exception&) {
        status = "error";
      }
      out << fmt17(beta) << ',' << fmt17(lambda) << ',' << fmt17(dispersion)
          << ',' << fmt17(retain_ppl) << ',' << fmt17(auc_loss) << ','
          << fmt17(auc_mink) << ',' << fmt17(auc_minkpp) << ',' << status
          << '\n';
    }
  }
  out.close();
  if (!out) throw ConfigError("write failed: " + a.out_path);

  Manifest man = start_manifest("sweep", a, cfg, seed);
  man.add_file("input.corpus", a.corpus_path);
  man.add_file("input.model", a.model_path);
  man.add_file("output.sweep", a.out_path);
  man.add("wall_ms", std::to_string(timer.ms()));
  man.write(a.out_path + ".manifest");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale lab for robust unlearning of toy language models"};
  app.require_subcommand(1);

  CommonArgs args;
  std::vector<CLI::Option*> seed_opts;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "flat key = value file");
    sub->add_option("--out", args.out_path, "output path or prefix");
    seed_opts.push_back(
        sub->add_option("--seed", args.seed_flag, "override the config seed"));
  };
  CLI::App* gen = app.add_subcommand("gen-data", "synthesize a corpus");
  add_common(gen);
  CLI::App* pre = app.add_subcommand("pretrain", "memorize a corpus");
  add_common(pre);
  pre->add_option("--corpus", args.corpus_path, "corpus file");
  CLI::App* unl = app.add_subcommand("unlearn", "run an unlearning config");
  add_common(unl);
  unl->add_option("--corpus", args.corpus_path, "corpus file");
  unl->add_option("--model", args.model_path, "pretrained model file");
  CLI::App* ev = app.add_subcommand("eval", "balance and privacy reports");
  add_common(ev);
  ev->add_option("--corpus", args.corpus_path, "corpus file");
  ev->add_option("--model", args.model_path, "model under evaluation");
  ev->add_option("--ref", args.ref_path, "pre-unlearning reference model");
  ev->add_option("--traj", args.traj_path, "unlearning trajectory CSV");
  CLI::App* sw = app.add_subcommand("sweep", "beta/lambda grid of runs");
  add_common(sw);
  sw->add_option("--corpus", args.corpus_path, "corpus file");
  sw->add_option("--model", args.model_path, "pretrained model file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  for (const CLI::Option* opt : seed_opts)
    if (opt->count() > 0) args.seed_given = true;

  try {
    if (app.got_subcommand(gen)) return cmd_gen_data(args);
    if (app.got_subcommand(pre)) return cmd_pretrain(args);
    if (app.got_subcommand(unl)) return cmd_unlearn(args);
    if (app.got_subcommand(ev)) return cmd_eval(args);
    if (app.got_subcommand(sw)) return cmd_sweep(args);
    throw ConfigError("no subcommand selected");
  } catch (const DivergenceError& e) {
    std::cerr << "error: diverged at step " << e.step << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
