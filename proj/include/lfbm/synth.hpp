#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lfbm/core.hpp"

namespace lfbm {

/// Planted-partition generator settings.
struct BlockSpec {
  std::vector<int> sizes;
  Eigen::MatrixXd link_prob;  // K x K
  double noise = 0.05;        // label flip probability, in [0, 0.5)
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when sizes, probabilities or noise are out
  /// of range.
  void check() const;

  /// 200 objects in three clusters of 67/67/66. Clusters 0 and 1 are dense
  /// inside; cluster 2 is empty inside but fully linked with cluster 0.
  static BlockSpec paper_3cluster(std::uint64_t seed, double noise = 0.05);
};

struct Generated {
  RelationData data;
  std::vector<int> labels;
};

/// Fully observed directed relation without self-pairs: s ~ Bernoulli(P[c_i, c_j])
/// then flipped with probability `noise`.
Generated generate(const BlockSpec& spec);

struct Split {
  RelationData train;
  std::vector<Entry> test;
};

/// Moves round(holdout_frac * |entries|) uniformly chosen entries into the
/// test set; they become missing in train.
Split split(const RelationData& data, double holdout_frac, std::uint64_t seed);

}  // namespace lfbm
