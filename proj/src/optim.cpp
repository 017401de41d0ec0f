#include "lfbm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "detail.hpp"

namespace lfbm {

namespace {

// (-K)^{-1} grad, or nothing when -K is not positive definite.
std::optional<Eigen::VectorXd> mm_direction(const Eigen::VectorXd& grad,
                                            const Eigen::MatrixXd& curv) {
  if (grad.size() == 0) return Eigen::VectorXd();
  Eigen::LLT<Eigen::MatrixXd> llt(-curv);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd dir = llt.solve(grad);
  if (!dir.allFinite()) return std::nullopt;
  return dir;
}

// Backtracking along dir, mutating state in place. Leaves the state at the
// accepted point (or at the anchor when every trial fails) and returns eta.
double armijo_in_place(const FactorSelector& which, LatentState& state, const RelationData& data,
                       const HyperParams& hp, const SideInfo* side, const Eigen::VectorXd& grad,
                       const Eigen::VectorXd& dir) {
  const Eigen::VectorXd anchor = get_block(which, state);
  const double base = block_objective(which, state, data, hp, side);
  const double increase = grad.dot(dir);
  double eta = hp.eta0;
  for (int t = 0; t <= kMaxBacktracks; ++t, eta *= hp.armijo_shrink) {
    set_block(which, state, anchor + eta * dir);
    const double value = block_objective(which, state, data, hp, side);
    if (value >= base + hp.armijo_slope * eta * increase) return eta;
  }
  set_block(which, state, anchor);
  return 0.0;
}

std::string phase_name(FactorKind kind) {
  switch (kind) {
    case FactorKind::URow: return "U-row";
    case FactorKind::VRow: return "V-row";
    case FactorKind::CFlat: return "C";
    case FactorKind::Beta: return "beta";
    case FactorKind::Bias: return "bias";
  }
  return "?";
}

// Log-likelihood of object i's pairs if it were moved to label k.
double label_score(const LatentState& state, const RelationData& data, std::size_t i, int k,
                   std::span<const double> out_base, std::span<const double> in_base) {
  double ll = 0.0;
  auto out = data.outgoing(i);
  for (std::size_t t = 0; t < out.size(); ++t) {
    const Entry& e = data.entry(out[t]);
    const int zj = e.j == i ? k : state.z[e.j];
    ll += detail::log_bernoulli(e.s, out_base[t] + state.C(k, zj));
  }
  auto in = data.incoming(i);
  for (std::size_t t = 0; t < in.size(); ++t) {
    const Entry& e = data.entry(in[t]);
    if (e.i == i) continue;  // self-pair already counted above
    ll += detail::log_bernoulli(e.s, in_base[t] + state.C(state.z[e.i], k));
  }
  return ll;
}

int reassign_in_place(LatentState& state, const RelationData& data, const SideInfo* side) {
  const int K = state.K();
  if (K <= 1) return 0;
  int changed = 0;
  std::vector<double> out_base;
  std::vector<double> in_base;
  for (std::size_t i = 0; i < state.n(); ++i) {
    // Logits without the block term; they do not depend on z_i.
    auto out = data.outgoing(i);
    out_base.resize(out.size());
    for (std::size_t t = 0; t < out.size(); ++t) {
      const Entry& e = data.entry(out[t]);
      out_base[t] = detail::logit_unchecked(state, e.i, e.j, side) - state.C(state.z[e.i], state.z[e.j]);
    }
    auto in = data.incoming(i);
    in_base.resize(in.size());
    for (std::size_t t = 0; t < in.size(); ++t) {
      const Entry& e = data.entry(in[t]);
      in_base[t] = detail::logit_unchecked(state, e.i, e.j, side) - state.C(state.z[e.i], state.z[e.j]);
    }

    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      const double score = label_score(state, data, i, k, out_base, in_base);
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    if (best != state.z[i]) {
      state.z[i] = best;
      ++changed;
    }
  }
  return changed;
}

}  // namespace

void SweepSchedule::check() const {
  if (reassign_every < 1) throw std::invalid_argument("reassign_every must be >= 1");
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      if (order[a] == order[b]) throw std::invalid_argument("schedule repeats a phase");
    }
  }
}

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::Full: return "full";
    case AblationMode::FactorOnly: return "factor-only";
    case AblationMode::BlockOnly: return "block-only";
  }
  return "full";
}

AblationMode parse_ablation_mode(std::string_view name) {
  if (name == "full") return AblationMode::Full;
  if (name == "factor-only") return AblationMode::FactorOnly;
  if (name == "block-only") return AblationMode::BlockOnly;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
}

LatentState init_state(std::size_t n, const HyperParams& hp, std::size_t side_dim) {
  hp.check();
  if (n < 1) throw std::invalid_argument("init_state needs n >= 1");
  LatentState s = LatentState::zeros(n, hp.d, hp.K, side_dim);
  std::mt19937_64 rng(hp.seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  for (Eigen::Index i = 0; i < s.U.rows(); ++i) {
    for (Eigen::Index k = 0; k < s.U.cols(); ++k) s.U(i, k) = normal(rng);
  }
  for (Eigen::Index i = 0; i < s.V.rows(); ++i) {
    for (Eigen::Index k = 0; k < s.V.cols(); ++k) s.V(i, k) = normal(rng);
  }
  std::uniform_int_distribution<int> label(0, hp.K - 1);
  for (auto& zi : s.z) zi = label(rng);
  return s;
}

LatentState mm_step(const FactorSelector& which, const LatentState& state,
                    const RelationData& data, const HyperParams& hp, const SideInfo* side,
                    double eta) {
  check_dimensions(state, data, side);
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
  auto acc = detail::accumulate(which, state, data, hp, side, detail::CurvatureMode::Bound);
  auto dir = mm_direction(acc.grad, acc.hess);
  if (!dir) throw NumericError("singular curvature for " + phase_name(which.kind) + " block");
  LatentState next = state;
  set_block(which, next, get_block(which, state) + eta * *dir);
  return next;
}

double armijo_eta(const FactorSelector& which, const LatentState& state,
                  const RelationData& data, const HyperParams& hp, const SideInfo* side) {
  check_dimensions(state, data, side);
  auto acc = detail::accumulate(which, state, data, hp, side, detail::CurvatureMode::Bound);
  auto dir = mm_direction(acc.grad, acc.hess);
  if (!dir) return 0.0;
  LatentState scratch = state;
  return armijo_in_place(which, scratch, data, hp, side, acc.grad, *dir);
}

LatentState reassign_clusters(const LatentState& state, const RelationData& data,
                              const HyperParams& /*hp*/, const SideInfo* side, int* changed) {
  check_dimensions(state, data, side);
  LatentState next = state;
  const int moves = reassign_in_place(next, data, side);
  if (changed != nullptr) *changed = moves;
  return next;
}

Trainer::Trainer(const RelationData& data, const HyperParams& hp, const SideInfo* side,
                 SweepSchedule schedule, AblationMode mode, LatentState init)
    : data_(data), hp_(hp), side_(side), schedule_(std::move(schedule)), mode_(mode),
      state_(std::move(init)) {
  hp_.check();
  schedule_.check();
  state_.check();
  check_dimensions(state_, data_, side_);
  if (mode_ == AblationMode::FactorOnly) state_.C.setZero();
  if (mode_ == AblationMode::BlockOnly) {
    state_.U.setZero();
    state_.V.setZero();
  }
  trace_.objective_per_sweep.push_back(log_posterior(state_, data_, hp_, side_));
}

bool Trainer::runs(Phase phase) const {
  switch (phase) {
    case Phase::URows:
    case Phase::VRows: return mode_ != AblationMode::BlockOnly;
    case Phase::C: return mode_ != AblationMode::FactorOnly;
    case Phase::Labels:
      return mode_ != AblationMode::FactorOnly && state_.K() > 1 &&
             sweeps_ % schedule_.reassign_every == 0;
    case Phase::Beta: return state_.side_dim() > 0;
    case Phase::Bias: return true;
  }
  return false;
}

void Trainer::update_block(const FactorSelector& which) {
  auto acc = detail::accumulate(which, state_, data_, hp_, side_, detail::CurvatureMode::Bound);
  auto dir = mm_direction(acc.grad, acc.hess);
  if (!dir) {
    ++skipped_;
    trace_.eta_per_update.push_back(0.0);
    return;
  }
  trace_.eta_per_update.push_back(
      armijo_in_place(which, state_, data_, hp_, side_, acc.grad, *dir));
}

void Trainer::update_rows(FactorKind kind) {
  const bool sender = kind == FactorKind::URow;
  const RowMatrix& fixed = sender ? state_.V : state_.U;
  const double lambda = sender ? hp_.lambda_u : hp_.lambda_v;
  const std::size_t n = state_.n();
  const Eigen::Index d = state_.d();

  // The curvature bound depends only on the fixed factor and the row's mask,
  // so the Gram matrix of the fixed factor is shared across the phase. Rows
  // observed on more than half the objects subtract their few missing terms
  // from it instead of summing the observed ones.
  const Eigen::MatrixXd gram = fixed.transpose() * fixed;
  std::vector<char> observed(n, 0);
  Eigen::MatrixXd curv(d, d);

  for (std::size_t i = 0; i < n; ++i) {
    const FactorSelector which{kind, i};
    auto pairs = sender ? data_.outgoing(i) : data_.incoming(i);
    auto acc = detail::accumulate(which, state_, data_, hp_, side_, detail::CurvatureMode::None);

    if (2 * pairs.size() > n) {
      for (Index pos : pairs) observed[sender ? data_.entry(pos).j : data_.entry(pos).i] = 1;
      Eigen::MatrixXd sum = gram;
      for (std::size_t other = 0; other < n; ++other) {
        if (observed[other] == 0) {
          const auto row = fixed.row(static_cast<Eigen::Index>(other));
          sum.noalias() -= row.transpose() * row;
        }
      }
      for (Index pos : pairs) observed[sender ? data_.entry(pos).j : data_.entry(pos).i] = 0;
      curv = -0.25 * sum;
    } else {
      curv.setZero();
      for (Index pos : pairs) {
        const auto row = fixed.row(sender ? data_.entry(pos).j : data_.entry(pos).i);
        curv.noalias() -= 0.25 * row.transpose() * row;
      }
    }
    curv.diagonal().array() -= lambda;

    auto dir = mm_direction(acc.grad, curv);
    if (!dir) {
      ++skipped_;
      trace_.eta_per_update.push_back(0.0);
      continue;
    }
    trace_.eta_per_update.push_back(
        armijo_in_place(which, state_, data_, hp_, side_, acc.grad, *dir));
  }
}

int Trainer::reassign() { return reassign_in_place(state_, data_, side_); }

double Trainer::sweep() {
  skipped_ = 0;
  int moves = 0;
  for (Phase phase : schedule_.order) {
    if (!runs(phase)) continue;
    switch (phase) {
      case Phase::URows: update_rows(FactorKind::URow); break;
      case Phase::VRows: update_rows(FactorKind::VRow); break;
      case Phase::Beta: update_block(FactorSelector::beta()); break;
      case Phase::C: update_block(FactorSelector::c_flat()); break;
      case Phase::Labels: moves = reassign(); break;
      case Phase::Bias: update_block(FactorSelector::bias()); break;
    }
  }
  ++sweeps_;
  if (skipped_ > 0) {
    trace_.warnings.push_back("sweep " + std::to_string(sweeps_) + ": skipped " +
                              std::to_string(skipped_) +
                              " block update(s) with singular curvature");
  }
  trace_.reassignment_counts.push_back(moves);
  const double objective = log_posterior(state_, data_, hp_, side_);
  trace_.objective_per_sweep.push_back(objective);
  return objective;
}

FitResult fit(const RelationData& data, const HyperParams& hp, const SideInfo* side,
              const SweepSchedule& schedule, AblationMode mode, std::optional<LatentState> init,
              const SweepObserver& observer) {
  hp.check();
  const std::size_t m = side != nullptr ? side->dim() : 0;
  LatentState start = init ? std::move(*init) : init_state(data.n(), hp, m);
  Trainer trainer(data, hp, side, schedule, mode, std::move(start));
  double previous = trainer.trace().objective_per_sweep.back();
  for (int t = 0; t < hp.max_sweeps; ++t) {
    const double current = trainer.sweep();
    if (observer) observer(trainer.sweeps_done(), current);
    if (current - previous < hp.rel_tol * std::max(1.0, std::abs(previous))) break;
    previous = current;
  }
  return {trainer.release_state(), trainer.release_trace()};
}

std::vector<double> predict(const LatentState& state,
                            std::span<const std::pair<Index, Index>> pairs, const SideInfo* side) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    out.push_back(stable_logit_terms(logit(state, i, j, side)).sigma);
  }
  return out;
}

}  // namespace lfbm
