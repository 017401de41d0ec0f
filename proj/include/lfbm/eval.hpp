#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lfbm/core.hpp"

namespace lfbm {

using RocCurve = std::vector<std::pair<double, double>>;  // (fpr, tpr)

/// Largest n for which reconstruct() will materialize the dense matrix.
inline constexpr std::size_t kMaxReconstructSize = 5000;

/// Mann-Whitney AUC: P(score+ > score-) + 1/2 P(score+ == score-).
/// Labels must be 0/1 with both classes present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Threshold sweep from the highest score down; tied scores form one step.
/// Starts at (0, 0) and ends at (1, 1).
RocCurve roc(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under a curve of (x, y) points.
double trapezoid(const RocCurve& curve);

/// Mutual information normalized by the mean entropy (natural logs).
/// Zero when both labelings are constant.
double nmi(std::span<const int> a, std::span<const int> b);

/// Row-wise argmax, ties to the lowest column.
std::vector<int> factor_labels(const RowMatrix& U);

/// Dense n x n matrix of sigma(H_ij).
Eigen::MatrixXd reconstruct(const LatentState& state, const SideInfo* side = nullptr);

/// Sum over held-out entries of log p(s | H) with sigma clamped away from 0 and 1.
double holdout_log_likelihood(const LatentState& state, std::span<const Entry> test,
                              const SideInfo* side = nullptr);

/// AUC, ROC and held-out likelihood on `test`; NMI of state.z against
/// `true_labels` when given.
EvalReport evaluate(const LatentState& state, std::span<const Entry> test,
                    const SideInfo* side = nullptr,
                    const std::vector<int>* true_labels = nullptr);

}  // namespace lfbm
