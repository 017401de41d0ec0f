#pragma once

// Internal helpers shared by the model and trainer translation units.

#include <cstddef>

#include "lfbm/model.hpp"

namespace lfbm::detail {

double logit_unchecked(const LatentState& state, std::size_t i, std::size_t j,
                       const SideInfo* side);

/// S H - llp(H)
double log_bernoulli(std::uint8_t s, double h);

double prior_weight(FactorKind kind, const HyperParams& hp);

void check_selector(const FactorSelector& which, const LatentState& state);

/// Calls f(entry position) for every observed pair whose logit depends on the
/// selected block.
template <class F>
void for_block_entries(const FactorSelector& which, const RelationData& data, F&& f) {
  switch (which.kind) {
    case FactorKind::URow:
      for (Index pos : data.outgoing(which.index)) f(pos);
      break;
    case FactorKind::VRow:
      for (Index pos : data.incoming(which.index)) f(pos);
      break;
    default:
      for (std::size_t pos = 0; pos < data.size(); ++pos) f(pos);
      break;
  }
}

enum class CurvatureMode { None, Exact, Bound };

struct Accumulated {
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;  // empty when mode == None
};

/// One pass over the block's entries producing the gradient and, depending
/// on mode, the exact Hessian or the 1/4 curvature bound.
Accumulated accumulate(const FactorSelector& which, const LatentState& state,
                       const RelationData& data, const HyperParams& hp, const SideInfo* side,
                       CurvatureMode mode);

}  // namespace lfbm::detail
