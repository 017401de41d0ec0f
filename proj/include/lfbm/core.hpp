#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lfbm {

using Index = std::uint32_t;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised for malformed or inconsistent input data (bad indices, duplicates,
/// non-binary values, dimension mismatches).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical procedure cannot proceed (singular curvature,
/// non-finite values).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One observed cell of the relation matrix: S(i, j) = s with W(i, j) = 1.
struct Entry {
  Index i = 0;
  Index j = 0;
  std::uint8_t s = 0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Throws DataError naming the first offending entry when any index is out
/// of [0, n), a pair repeats, or a value is not binary.
void validate(std::size_t n, std::span<const Entry> entries);

/// Masked binary relation matrix. Only observed pairs are stored; anything
/// absent is missing. Entries are kept sorted by (i, j) and indexed by row
/// (outgoing) and column (incoming) for per-object sweeps.
class RelationData {
 public:
  RelationData() = default;
  RelationData(std::size_t n, std::vector<Entry> entries, bool directed = true);

  std::size_t n() const { return n_; }
  std::size_t size() const { return entries_.size(); }
  bool directed() const { return directed_; }
  std::span<const Entry> entries() const { return entries_; }
  const Entry& entry(std::size_t e) const { return entries_[e]; }

  /// Entry positions with i == row, in ascending j.
  std::span<const Index> outgoing(std::size_t row) const;
  /// Entry positions with j == col, in ascending i.
  std::span<const Index> incoming(std::size_t col) const;

  /// Position of (i, j) in entries(), if observed.
  std::optional<std::size_t> find(Index i, Index j) const;

 private:
  std::size_t n_ = 0;
  bool directed_ = true;
  std::vector<Entry> entries_;
  std::vector<Index> out_order_;
  std::vector<std::size_t> out_start_;
  std::vector<Index> in_order_;
  std::vector<std::size_t> in_start_;
};

/// Covariate vectors x_ij attached to pairs. Pairs without a vector use the
/// zero vector.
class SideInfo {
 public:
  explicit SideInfo(std::size_t m = 0);

  std::size_t dim() const { return m_; }
  void set(Index i, Index j, Eigen::VectorXd x);
  const Eigen::VectorXd& at(Index i, Index j) const;
  std::size_t count() const { return values_.size(); }

  template <class F>
  void for_each(F&& f) const {
    for (const auto& [key, x] : values_) {
      f(static_cast<Index>(key >> 32), static_cast<Index>(key & 0xffffffffu), x);
    }
  }

 private:
  static std::uint64_t key(Index i, Index j) {
    return (static_cast<std::uint64_t>(i) << 32) | j;
  }

  std::size_t m_;
  Eigen::VectorXd zero_;
  std::unordered_map<std::uint64_t, Eigen::VectorXd> values_;
};

struct HyperParams {
  int d = 2;
  int K = 3;
  double lambda_u = 1.0;
  double lambda_v = 1.0;
  double lambda_c = 1.0;
  double lambda_beta = 1.0;
  double eta0 = 0.2;
  double armijo_shrink = 0.5;
  double armijo_slope = 0.01;
  int max_sweeps = 100;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when a field is outside its domain.
  void check() const;
};

/// Every learnable quantity of the model.
struct LatentState {
  RowMatrix U;         // n x d sender factors
  RowMatrix V;         // n x d receiver factors
  Eigen::MatrixXd C;   // K x K block matrix
  std::vector<int> z;  // cluster label per object
  Eigen::VectorXd beta;
  double bias = 0.0;

  std::size_t n() const { return static_cast<std::size_t>(U.rows()); }
  int d() const { return static_cast<int>(U.cols()); }
  int K() const { return static_cast<int>(C.rows()); }
  std::size_t side_dim() const { return static_cast<std::size_t>(beta.size()); }

  /// One-hot row for object i.
  Eigen::VectorXd one_hot(std::size_t i) const;

  /// Throws DataError on inconsistent shapes, out-of-range labels or
  /// non-finite values.
  void check() const;

  static LatentState zeros(std::size_t n, int d, int K, std::size_t m);

  friend bool operator==(const LatentState& a, const LatentState& b);
};

struct FitTrace {
  std::vector<double> objective_per_sweep;
  std::vector<double> eta_per_update;
  std::vector<int> reassignment_counts;
  std::vector<std::string> warnings;

  /// True when no sweep lowered the objective by more than tol.
  bool monotone(double tol = 1e-8) const;
};

struct EvalReport {
  double auc = 0.5;
  std::vector<std::pair<double, double>> roc;
  std::optional<double> nmi;
  double holdout_log_likelihood = 0.0;
};

}  // namespace lfbm
