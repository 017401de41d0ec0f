#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "lfbm/core.hpp"
#include "lfbm/model.hpp"

namespace lfbm {

/// Backtracking gives up after this many shrinks and reports a skipped step.
inline constexpr int kMaxBacktracks = 30;

enum class Phase { URows, VRows, Beta, C, Labels, Bias };

struct SweepSchedule {
  std::vector<Phase> order{Phase::URows, Phase::VRows, Phase::Beta,
                           Phase::C,     Phase::Labels, Phase::Bias};
  int reassign_every = 1;

  /// Throws std::invalid_argument on repeated phases or reassign_every < 1.
  void check() const;
};

enum class AblationMode {
  Full,
  FactorOnly,  // C pinned at zero, labels ignored
  BlockOnly,   // U and V pinned at zero
};

std::string_view to_string(AblationMode mode);
/// Accepts "full", "factor-only", "block-only".
AblationMode parse_ablation_mode(std::string_view name);

/// U, V ~ N(0, 0.1^2), labels uniform over [0, K), everything else zero.
/// Deterministic in (n, hp.d, hp.K, hp.seed, side_dim).
LatentState init_state(std::size_t n, const HyperParams& hp, std::size_t side_dim);

/// Replaces the selected block by  w + eta (-K)^{-1} grad  where K is the
/// curvature bound at w. Throws NumericError when K is singular.
LatentState mm_step(const FactorSelector& which, const LatentState& state,
                    const RelationData& data, const HyperParams& hp, const SideInfo* side,
                    double eta);

/// Largest eta0 * shrink^t (t <= kMaxBacktracks) satisfying the Armijo
/// sufficient-increase condition along the MM direction; 0 when none does or
/// the curvature is singular.
double armijo_eta(const FactorSelector& which, const LatentState& state,
                  const RelationData& data, const HyperParams& hp, const SideInfo* side = nullptr);

/// Sequential per-object argmax of the log-likelihood over labels, in
/// ascending object order, using both outgoing and incoming pairs. Ties go to
/// the lowest label. `changed`, if given, receives the number of moves.
LatentState reassign_clusters(const LatentState& state, const RelationData& data,
                              const HyperParams& hp, const SideInfo* side = nullptr,
                              int* changed = nullptr);

/// Alternating MM trainer. Owns the state while fitting.
class Trainer {
 public:
  Trainer(const RelationData& data, const HyperParams& hp, const SideInfo* side,
          SweepSchedule schedule, AblationMode mode, LatentState init);

  /// Runs one pass of the schedule and records the new objective.
  double sweep();

  const LatentState& state() const { return state_; }
  const FitTrace& trace() const { return trace_; }
  LatentState release_state() { return std::move(state_); }
  FitTrace release_trace() { return std::move(trace_); }
  int sweeps_done() const { return sweeps_; }

 private:
  bool runs(Phase phase) const;
  void update_rows(FactorKind kind);
  void update_block(const FactorSelector& which);
  int reassign();

  const RelationData& data_;
  HyperParams hp_;
  const SideInfo* side_;
  SweepSchedule schedule_;
  AblationMode mode_;
  LatentState state_;
  FitTrace trace_;
  int sweeps_ = 0;
  int skipped_ = 0;
};

struct FitResult {
  LatentState state;
  FitTrace trace;
};

/// Called after every sweep with the 1-based sweep number and objective.
using SweepObserver = std::function<void(int, double)>;

/// Runs up to hp.max_sweeps sweeps from init (or init_state when absent),
/// stopping once a sweep improves the objective by less than
/// hp.rel_tol * max(1, |L|).
FitResult fit(const RelationData& data, const HyperParams& hp, const SideInfo* side,
              const SweepSchedule& schedule = {}, AblationMode mode = AblationMode::Full,
              std::optional<LatentState> init = std::nullopt,
              const SweepObserver& observer = {});

/// sigma(H_ij) for each pair.
std::vector<double> predict(const LatentState& state,
                            std::span<const std::pair<Index, Index>> pairs,
                            const SideInfo* side = nullptr);

}  // namespace lfbm
