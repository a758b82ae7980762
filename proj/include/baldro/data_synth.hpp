// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "baldro/types.hpp"

namespace baldro {

/// Recipe for a synthetic corpus with a heterogeneous-difficulty forget set:
/// dup_factors[i] is the pretraining repetition count of forget sample i, so
/// higher-dup samples are memorized harder and resist unlearning longer.
struct DatasetSpec {
  int vocab_size = 0;
  int n_retain = 0;
  int n_forget = 0;
  int prompt_len = 0;
  int target_len = 0;
  std::vector<int> dup_factors;  // size n_forget, each >= 1
  std::uint64_t seed = 0;
};

struct Corpus {
  std::vector<Sample> retain;
  std::vector<Sample> forget;
  std::vector<Sample> holdout;
};

/// Deterministic in spec.seed. Holdout has n_forget samples whose targets
/// are re-drawn until disjoint from every retain and forget target; throws
/// if the vocabulary is too small to find enough distinct targets.
Corpus synthesize(const DatasetSpec& spec);

/// Text format: section lines "# retain", "# forget", "# holdout", then one
/// record per line: id, dup factor, space-separated prompt tokens,
/// space-separated target tokens, tab-separated. UTF-8, LF. Round-trips
/// bit-exactly.
void write_corpus(const Corpus& c, const std::string& path);

/// Throws on malformed input, naming the 1-based line number.
Corpus read_corpus(const std::string& path);

}  // namespace baldro
