#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "lfbm/core.hpp"

namespace lfbm {

/// Clamp applied to sigma so that log(sigma) and log(1 - sigma) stay finite.
inline constexpr double kSigmaFloor = 1e-12;

enum class FactorKind { URow, VRow, CFlat, Beta, Bias };

/// Names the block held free in one alternating update; every other
/// quantity stays fixed.
struct FactorSelector {
  FactorKind kind = FactorKind::Bias;
  std::size_t index = 0;  // object index for URow / VRow

  static FactorSelector u_row(std::size_t i) { return {FactorKind::URow, i}; }
  static FactorSelector v_row(std::size_t j) { return {FactorKind::VRow, j}; }
  static FactorSelector c_flat() { return {FactorKind::CFlat, 0}; }
  static FactorSelector beta() { return {FactorKind::Beta, 0}; }
  static FactorSelector bias() { return {FactorKind::Bias, 0}; }
};

struct LogitTerms {
  double sigma;  // 1 / (1 + exp(-x)), clamped into [kSigmaFloor, 1 - kSigmaFloor]
  double llp;    // log(1 + exp(x))
};

/// Overflow-free logistic and log-partition of x. Throws NumericError when x
/// is not finite.
LogitTerms stable_logit_terms(double x);

/// H_ij = beta . x_ij + u_i . v_j + C[z_i, z_j] + bias.
double logit(const LatentState& state, std::size_t i, std::size_t j,
             const SideInfo* side = nullptr);

/// Throws DataError when state, data and side information disagree on shapes.
void check_dimensions(const LatentState& state, const RelationData& data,
                      const SideInfo* side);

/// MAP objective (additive constants dropped):
///   sum_obs (S H - llp(H)) - lu/2 |U|^2 - lv/2 |V|^2 - lc/2 |C|^2 - lb/2 |beta|^2
double log_posterior(const LatentState& state, const RelationData& data,
                     const HyperParams& hp, const SideInfo* side = nullptr);

/// The terms of log_posterior that depend on the selected block. For any two
/// states differing only in that block, the difference of block_objective
/// equals the difference of log_posterior.
double block_objective(const FactorSelector& which, const LatentState& state,
                       const RelationData& data, const HyperParams& hp,
                       const SideInfo* side = nullptr);

std::size_t block_size(const FactorSelector& which, const LatentState& state);
Eigen::VectorXd get_block(const FactorSelector& which, const LatentState& state);
void set_block(const FactorSelector& which, LatentState& state, const Eigen::VectorXd& values);

/// Gradient of log_posterior with respect to the selected block. The C block
/// is flattened row-major: index k * K + l holds C(k, l).
Eigen::VectorXd gradient(const FactorSelector& which, const LatentState& state,
                         const RelationData& data, const HyperParams& hp,
                         const SideInfo* side = nullptr);

/// Exact Hessian: -sum_obs sigma (1 - sigma) a a^T - lambda I.
Eigen::MatrixXd exact_hessian(const FactorSelector& which, const LatentState& state,
                              const RelationData& data, const HyperParams& hp,
                              const SideInfo* side = nullptr);

/// State-independent lower bound on the Hessian from sigma (1 - sigma) <= 1/4:
///   -1/4 sum_obs a a^T - lambda I.
Eigen::MatrixXd curvature(const FactorSelector& which, const LatentState& state,
                          const RelationData& data, const HyperParams& hp,
                          const SideInfo* side = nullptr);

/// Quadratic lower bound of the objective around an anchor point.
struct MinorizerContext {
  Eigen::VectorXd anchor;
  Eigen::VectorXd grad_at_anchor;
  Eigen::MatrixXd curvature;
  double objective_at_anchor = 0.0;
};

MinorizerContext make_minorizer(const FactorSelector& which, const LatentState& state,
                                const RelationData& data, const HyperParams& hp,
                                const SideInfo* side = nullptr);

/// Q(w) = L(a) + (w - a)^T g + 1/2 (w - a)^T K (w - a).
double minorizer_value(const MinorizerContext& ctx, const Eigen::VectorXd& omega);

/// z_i (x) z_j flattened row-major, so that vec(C)^T result = C[z_i, z_j].
/// Throws DataError unless both inputs are one-hot of equal length.
Eigen::VectorXd block_kron(const Eigen::VectorXd& zi, const Eigen::VectorXd& zj);

}  // namespace lfbm
