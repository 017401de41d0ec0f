#include "lfbm/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace lfbm {

namespace {

std::string describe(std::size_t pos, const Entry& e) {
  return "entry " + std::to_string(pos) + " (" + std::to_string(e.i) + ", " +
         std::to_string(e.j) + ", " + std::to_string(int(e.s)) + ")";
}

template <class M>
bool all_finite(const M& m) {
  return m.allFinite();
}

}  // namespace

void validate(std::size_t n, std::span<const Entry> entries) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(entries.size());
  for (std::size_t pos = 0; pos < entries.size(); ++pos) {
    const Entry& e = entries[pos];
    if (e.i >= n || e.j >= n) {
      throw DataError("index-out-of-range: " + describe(pos, e) + " with n = " +
                      std::to_string(n));
    }
    if (e.s > 1) {
      throw DataError("non-binary-value: " + describe(pos, e));
    }
    const std::uint64_t key = (static_cast<std::uint64_t>(e.i) << 32) | e.j;
    if (!seen.insert(key).second) {
      throw DataError("duplicate-pair: " + describe(pos, e));
    }
  }
}

RelationData::RelationData(std::size_t n, std::vector<Entry> entries, bool directed)
    : n_(n), directed_(directed), entries_(std::move(entries)) {
  validate(n_, entries_);
  if (entries_.size() > std::numeric_limits<Index>::max()) {
    throw DataError("too many entries");
  }
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });

  // Sorted by (i, j): the outgoing lists are contiguous runs.
  out_start_.assign(n_ + 1, 0);
  in_start_.assign(n_ + 1, 0);
  for (const Entry& e : entries_) {
    ++out_start_[e.i + 1];
    ++in_start_[e.j + 1];
  }
  std::partial_sum(out_start_.begin(), out_start_.end(), out_start_.begin());
  std::partial_sum(in_start_.begin(), in_start_.end(), in_start_.begin());

  out_order_.resize(entries_.size());
  std::iota(out_order_.begin(), out_order_.end(), Index{0});

  in_order_.resize(entries_.size());
  std::vector<std::size_t> cursor(in_start_.begin(), in_start_.end() - 1);
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    in_order_[cursor[entries_[e].j]++] = static_cast<Index>(e);
  }
}

std::span<const Index> RelationData::outgoing(std::size_t row) const {
  return std::span<const Index>(out_order_).subspan(out_start_[row],
                                                    out_start_[row + 1] - out_start_[row]);
}

std::span<const Index> RelationData::incoming(std::size_t col) const {
  return std::span<const Index>(in_order_).subspan(in_start_[col],
                                                   in_start_[col + 1] - in_start_[col]);
}

std::optional<std::size_t> RelationData::find(Index i, Index j) const {
  if (i >= n_) return std::nullopt;
  auto row = outgoing(i);
  auto it = std::lower_bound(row.begin(), row.end(), j,
                             [&](Index e, Index col) { return entries_[e].j < col; });
  if (it != row.end() && entries_[*it].j == j) return *it;
  return std::nullopt;
}

SideInfo::SideInfo(std::size_t m) : m_(m), zero_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))) {}

void SideInfo::set(Index i, Index j, Eigen::VectorXd x) {
  if (static_cast<std::size_t>(x.size()) != m_) {
    throw DataError("side-info vector for (" + std::to_string(i) + ", " + std::to_string(j) +
                    ") has length " + std::to_string(x.size()) + ", expected " +
                    std::to_string(m_));
  }
  if (!x.allFinite()) {
    throw DataError("side-info vector for (" + std::to_string(i) + ", " + std::to_string(j) +
                    ") is not finite");
  }
  values_[key(i, j)] = std::move(x);
}

const Eigen::VectorXd& SideInfo::at(Index i, Index j) const {
  auto it = values_.find(key(i, j));
  return it == values_.end() ? zero_ : it->second;
}

void HyperParams::check() const {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  for (double l : {lambda_u, lambda_v, lambda_c, lambda_beta}) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw std::invalid_argument("regularization weights must be finite and >= 0");
    }
  }
  if (!(eta0 > 0.0 && eta0 <= 1.0)) throw std::invalid_argument("eta0 must lie in (0, 1]");
  if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) {
    throw std::invalid_argument("armijo_shrink must lie in (0, 1)");
  }
  if (!(armijo_slope > 0.0 && armijo_slope < 1.0)) {
    throw std::invalid_argument("armijo_slope must lie in (0, 1)");
  }
  if (max_sweeps < 0) throw std::invalid_argument("max_sweeps must be >= 0");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be > 0");
}

Eigen::VectorXd LatentState::one_hot(std::size_t i) const {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(C.rows());
  h(z[i]) = 1.0;
  return h;
}

void LatentState::check() const {
  if (V.rows() != U.rows() || V.cols() != U.cols()) {
    throw DataError("U and V shapes differ");
  }
  if (C.rows() != C.cols() || C.rows() < 1) throw DataError("C must be square and non-empty");
  if (z.size() != static_cast<std::size_t>(U.rows())) {
    throw DataError("z has length " + std::to_string(z.size()) + ", expected " +
                    std::to_string(U.rows()));
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] < 0 || z[i] >= C.rows()) {
      throw DataError("label z[" + std::to_string(i) + "] = " + std::to_string(z[i]) +
                      " outside [0, K)");
    }
  }
  if (!all_finite(U) || !all_finite(V) || !all_finite(C) || !beta.allFinite() ||
      !std::isfinite(bias)) {
    throw DataError("state contains non-finite values");
  }
}

LatentState LatentState::zeros(std::size_t n, int d, int K, std::size_t m) {
  LatentState s;
  s.U = RowMatrix::Zero(static_cast<Eigen::Index>(n), d);
  s.V = RowMatrix::Zero(static_cast<Eigen::Index>(n), d);
  s.C = Eigen::MatrixXd::Zero(K, K);
  s.z.assign(n, 0);
  s.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  s.bias = 0.0;
  return s;
}

bool operator==(const LatentState& a, const LatentState& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return same(a.U, b.U) && same(a.V, b.V) && same(a.C, b.C) && a.z == b.z &&
         a.beta.size() == b.beta.size() && a.beta == b.beta && a.bias == b.bias;
}

bool FitTrace::monotone(double tol) const {
  for (std::size_t t = 1; t < objective_per_sweep.size(); ++t) {
    if (objective_per_sweep[t] < objective_per_sweep[t - 1] - tol) return false;
  }
  return true;
}

}  // namespace lfbm
