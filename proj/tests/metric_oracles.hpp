#pragma once

// Brute-force metric oracles shared by the eval suite and the acceptance run.

#include <cmath>
#include <map>
#include <random>
#include <utility>
#include <vector>

namespace lfbm::testing {

inline double brute_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    if (labels[a] != 1) continue;
    for (std::size_t b = 0; b < scores.size(); ++b) {
      if (labels[b] != 0) continue;
      pairs += 1.0;
      if (scores[a] > scores[b]) wins += 1.0;
      if (scores[a] == scores[b]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline double entropy(const std::map<int, double>& counts, double total) {
  double h = 0.0;
  for (const auto& [_, c] : counts) h -= c / total * std::log(c / total);
  return h;
}

// Direct sum I(a; b) = sum p(a, b) log(p(a, b) / (p(a) p(b))), normalized by
// the mean entropy.
inline double entropy_nmi(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, double> ca;
  std::map<int, double> cb;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t t = 0; t < a.size(); ++t) {
    ca[a[t]] += 1;
    cb[b[t]] += 1;
    joint[{a[t], b[t]}] += 1;
  }
  const double n = double(a.size());
  const double ha = entropy(ca, n);
  const double hb = entropy(cb, n);
  if (ha == 0.0 && hb == 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    mi += c / n * std::log((c / n) / ((ca[key.first] / n) * (cb[key.second] / n)));
  }
  return mi / (0.5 * (ha + hb));
}

struct Case {
  std::vector<double> scores;
  std::vector<int> labels;
};

inline Case random_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(2, 60);
  std::uniform_int_distribution<int> coarse(0, 5);
  std::uniform_real_distribution<double> fine(0.0, 1.0);
  Case c;
  const int n = size(rng);
  const bool ties = rng() % 2 == 0;
  for (int t = 0; t < n; ++t) {
    c.scores.push_back(ties ? coarse(rng) / 5.0 : fine(rng));
    c.labels.push_back(int(rng() % 2));
  }
  c.labels[0] = 0;
  c.labels[1] = 1;
  return c;
}

}  // namespace lfbm::testing
