// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#include "baldro/data_synth.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "baldro/rng.hpp"

namespace baldro {

namespace {

TokenSeq random_tokens(std::mt19937_64& rng, int len, int V) {
  TokenSeq t(len);
  for (int i = 0; i < len; ++i) t[i] = next_int(rng, V);
  return t;
}

[[noreturn]] void parse_fail(const std::string& path, long line_no,
                             const std::string& what) {
  std::ostringstream msg;
  msg << "corpus parse error at " << path << ":" << line_no << ": " << what;
  throw std::runtime_error(msg.str());
}

TokenSeq parse_tokens(const std::string& field, const std::string& path,
                      long line_no) {
  TokenSeq out;
  std::istringstream is(field);
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      if (v < 0) parse_fail(path, line_no, "negative token id");
      out.push_back(v);
    } catch (const std::invalid_argument&) {
      parse_fail(path, line_no, "bad token '" + tok + "'");
    } catch (const std::out_of_range&) {
      parse_fail(path, line_no, "token out of range '" + tok + "'");
    }
  }
  return out;
}

void write_section(std::ofstream& out, const char* name,
                   const std::vector<Sample>& samples) {
  out << "# " << name << '\n';
  for (const Sample& s : samples) {
    out << s.id << '\t' << s.dup_factor << '\t';
    for (std::size_t i = 0; i < s.prompt.size(); ++i) {
      if (i) out << ' ';
      out << s.prompt[i];
    }
    out << '\t';
    for (std::size_t i = 0; i < s.target.size(); ++i) {
      if (i) out << ' ';
      out << s.target[i];
    }
    out << '\n';
  }
}

}  // namespace

Corpus synthesize(const DatasetSpec& spec) {
  if (spec.vocab_size < 2)
    throw std::invalid_argument("vocab_size must be >= 2");
  if (spec.n_retain < 0 || spec.n_forget < 0)
    throw std::invalid_argument("negative sample count");
  if (spec.prompt_len < 1 || spec.target_len < 1)
    throw std::invalid_argument("sequence lengths must be >= 1");
  if (static_cast<int>(spec.dup_factors.size()) != spec.n_forget)
    throw std::invalid_argument("dup_factors size != n_forget");
  for (int d : spec.dup_factors)
    if (d < 1) throw std::invalid_argument("dup factors must be >= 1");

  std::mt19937_64 rng(spec.seed);
  Corpus c;
  long next_id = 0;
  std::set<TokenSeq> used_targets;

  c.retain.reserve(spec.n_retain);
  for (int i = 0; i < spec.n_retain; ++i) {
    Sample s;
    s.id = next_id++;
    s.prompt = random_tokens(rng, spec.prompt_len, spec.vocab_size);
    s.target = random_tokens(rng, spec.target_len, spec.vocab_size);
    used_targets.insert(s.target);
    c.retain.push_back(std::move(s));
  }
  c.forget.reserve(spec.n_forget);
  for (int i = 0; i < spec.n_forget; ++i) {
    Sample s;
    s.id = next_id++;
    s.prompt = random_tokens(rng, spec.prompt_len, spec.vocab_size);
    s.target = random_tokens(rng, spec.target_len, spec.vocab_size);
    s.dup_factor = spec.dup_factors[i];
    used_targets.insert(s.target);
    c.forget.push_back(std::move(s));
  }
  // Holdout targets are re-drawn until unseen, so membership attacks compare
  // genuinely out-of-distribution continuations.
  c.holdout.reserve(spec.n_forget);
  for (int i = 0; i < spec.n_forget; ++i) {
    Sample s;
    s.id = next_id++;
    s.prompt = random_tokens(rng, spec.prompt_len, spec.vocab_size);
    const long attempts = 64 + 16L * (spec.n_retain + spec.n_forget + spec.n_forget);
    bool found = false;
    for (long a = 0; a < attempts; ++a) {
      s.target = random_tokens(rng, spec.target_len, spec.vocab_size);
      if (used_targets.find(s.target) == used_targets.end()) {
        found = true;
        break;
      }
    }
    if (!found)
      throw std::invalid_argument(
          "vocab too small to draw holdout targets disjoint from the "
          "training targets");
    used_targets.insert(s.target);
    c.holdout.push_back(std::move(s));
  }
  return c;
}

void write_corpus(const Corpus& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_section(out, "retain", c.retain);
  write_section(out, "forget", c.forget);
  write_section(out, "holdout", c.holdout);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  Corpus c;
  std::vector<Sample>* section = nullptr;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string name = line.substr(1);
      const auto b = name.find_first_not_of(" \t");
      const auto e = name.find_last_not_of(" \t\r");
      name = b == std::string::npos ? "" : name.substr(b, e - b + 1);
      if (name == "retain") section = &c.retain;
      else if (name == "forget") section = &c.forget;
      else if (name == "holdout") section = &c.holdout;
      else parse_fail(path, line_no, "unknown section '" + name + "'");
      continue;
    }
    if (section == nullptr)
      parse_fail(path, line_no, "record before any section header");
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
      fields.back().pop_back();
    if (fields.size() != 4)
      parse_fail(path, line_no, "expected 4 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    Sample s;
    try {
      std::size_t used = 0;
      s.id = std::stol(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument(fields[0]);
      s.dup_factor = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument(fields[1]);
    } catch (const std::exception&) {
      parse_fail(path, line_no, "bad id or dup field");
    }
    if (s.dup_factor < 1) parse_fail(path, line_no, "dup factor must be >= 1");
    s.prompt = parse_tokens(fields[2], path, line_no);
    s.target = parse_tokens(fields[3], path, line_no);
    section->push_back(std::move(s));
  }
  return c;
}

}  // namespace baldro
