#include "lfbm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lfbm/model.hpp"

namespace lfbm {

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts check_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("scores and labels differ in length (" + std::to_string(scores.size()) +
                    " vs " + std::to_string(labels.size()) + ")");
  }
  ClassCounts c;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] == 1) {
      ++c.pos;
    } else if (labels[t] == 0) {
      ++c.neg;
    } else {
      throw DataError("label at position " + std::to_string(t) + " is not 0 or 1");
    }
    if (!std::isfinite(scores[t])) {
      throw DataError("score at position " + std::to_string(t) + " is not finite");
    }
  }
  if (c.pos == 0 || c.neg == 0) throw DataError("degenerate label set: need both classes");
  return c;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return order;
}

template <typename Key>
double entropy(const std::map<Key, std::size_t>& counts, double total) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = double(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = check_binary(scores, labels);
  const auto order = order_by_score(scores, false);
  // Sum of mid-ranks (1-based) of the positives.
  double rank_sum = 0.0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
    const double mid_rank = 0.5 * double(start + 1 + end);
    for (std::size_t t = start; t < end; ++t) {
      if (labels[order[t]] == 1) rank_sum += mid_rank;
    }
    start = end;
  }
  const double P = double(c.pos);
  const double N = double(c.neg);
  return (rank_sum - P * (P + 1.0) / 2.0) / (P * N);
}

RocCurve roc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = check_binary(scores, labels);
  const auto order = order_by_score(scores, true);
  RocCurve curve{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (labels[order[end]] == 1 ? tp : fp) += 1;
      ++end;
    }
    curve.emplace_back(double(fp) / double(c.neg), double(tp) / double(c.pos));
    start = end;
  }
  return curve;
}

double trapezoid(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t t = 1; t < curve.size(); ++t) {
    area += (curve[t].first - curve[t - 1].first) * (curve[t].second + curve[t - 1].second) / 2.0;
  }
  return area;
}

double nmi(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw DataError("label vectors differ in length (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw DataError("nmi needs at least one object");
  std::map<int, std::size_t> ca;
  std::map<int, std::size_t> cb;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t t = 0; t < a.size(); ++t) {
    ++ca[a[t]];
    ++cb[b[t]];
    ++joint[{a[t], b[t]}];
  }
  const double total = double(a.size());
  const double ha = entropy(ca, total);
  const double hb = entropy(cb, total);
  if (ha + hb <= 0.0) return 0.0;
  // Summed in the same order as ha when a == b, so identical labelings give 1.
  const double mi = ha + hb - entropy(joint, total);
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

std::vector<int> factor_labels(const RowMatrix& U) {
  if (U.cols() < 1) throw DataError("factor matrix has no columns");
  std::vector<int> labels(static_cast<std::size_t>(U.rows()));
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    Eigen::Index best = 0;
    U.row(i).maxCoeff(&best);
    // maxCoeff keeps the first maximum, which is the lowest column.
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

Eigen::MatrixXd reconstruct(const LatentState& state, const SideInfo* side) {
  const std::size_t n = state.n();
  if (n > kMaxReconstructSize) {
    throw DataError("reconstruct refuses n = " + std::to_string(n) + " (limit " +
                    std::to_string(kMaxReconstructSize) + ")");
  }
  Eigen::MatrixXd out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          stable_logit_terms(logit(state, i, j, side)).sigma;
    }
  }
  return out;
}

double holdout_log_likelihood(const LatentState& state, std::span<const Entry> test,
                              const SideInfo* side) {
  double ll = 0.0;
  for (const Entry& e : test) {
    const double p = stable_logit_terms(logit(state, e.i, e.j, side)).sigma;
    ll += e.s != 0 ? std::log(p) : std::log1p(-p);
  }
  return ll;
}

EvalReport evaluate(const LatentState& state, std::span<const Entry> test, const SideInfo* side,
                    const std::vector<int>* true_labels) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(test.size());
  labels.reserve(test.size());
  for (const Entry& e : test) {
    scores.push_back(stable_logit_terms(logit(state, e.i, e.j, side)).sigma);
    labels.push_back(e.s);
  }
  EvalReport report;
  report.auc = auc(scores, labels);
  report.roc = roc(scores, labels);
  report.holdout_log_likelihood = holdout_log_likelihood(state, test, side);
  if (true_labels != nullptr) report.nmi = nmi(state.z, *true_labels);
  return report;
}

}  // namespace lfbm
