// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace baldro {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Token ids over a vocabulary [0, V).
using TokenSeq = std::vector<int>;

/// One (prompt, target) pair; the unit of forgetting. dup_factor is the
/// number of times the sample is repeated per pretraining epoch.
struct Sample {
  long id = 0;
  TokenSeq prompt;
  TokenSeq target;
  int dup_factor = 1;
};

inline bool operator==(const Sample& a, const Sample& b) {
  return a.id == b.id && a.prompt == b.prompt && a.target == b.target &&
         a.dup_factor == b.dup_factor;
}

}  // namespace baldro
