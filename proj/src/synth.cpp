#include "lfbm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lfbm {

void BlockSpec::check() const {
  if (sizes.empty()) throw std::invalid_argument("block spec needs at least one cluster");
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("cluster sizes must be positive");
  }
  const auto K = static_cast<Eigen::Index>(sizes.size());
  if (link_prob.rows() != K || link_prob.cols() != K) {
    throw std::invalid_argument("link_prob must be " + std::to_string(K) + " x " +
                                std::to_string(K));
  }
  if (!((link_prob.array() >= 0.0).all() && (link_prob.array() <= 1.0).all())) {
    throw std::invalid_argument("link probabilities must lie in [0, 1]");
  }
  if (!(noise >= 0.0 && noise < 0.5)) throw std::invalid_argument("noise must lie in [0, 0.5)");
}

BlockSpec BlockSpec::paper_3cluster(std::uint64_t seed, double noise) {
  BlockSpec spec;
  spec.sizes = {67, 67, 66};
  spec.link_prob.resize(3, 3);
  spec.link_prob << 1, 0, 1,
                    0, 1, 0,
                    1, 0, 0;
  spec.noise = noise;
  spec.seed = seed;
  return spec;
}

Generated generate(const BlockSpec& spec) {
  spec.check();
  std::vector<int> labels;
  for (std::size_t k = 0; k < spec.sizes.size(); ++k) {
    labels.insert(labels.end(), static_cast<std::size_t>(spec.sizes[k]), static_cast<int>(k));
  }
  const std::size_t n = labels.size();

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Entry> entries;
  entries.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      bool link = unit(rng) < spec.link_prob(labels[i], labels[j]);
      if (unit(rng) < spec.noise) link = !link;
      entries.push_back({static_cast<Index>(i), static_cast<Index>(j), std::uint8_t(link)});
    }
  }
  return {RelationData(n, std::move(entries)), std::move(labels)};
}

Split split(const RelationData& data, double holdout_frac, std::uint64_t seed) {
  if (!(holdout_frac > 0.0 && holdout_frac < 1.0)) {
    throw std::invalid_argument("holdout fraction must lie in (0, 1)");
  }
  const std::size_t total = data.size();
  const auto held = static_cast<std::size_t>(std::llround(holdout_frac * double(total)));
  if (held >= total) throw DataError("holdout would leave the training set empty");

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `held` slots are a uniform sample.
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < held; ++t) {
    std::uniform_int_distribution<std::size_t> pick(t, total - 1);
    std::swap(order[t], order[pick(rng)]);
  }
  std::vector<char> in_test(total, 0);
  for (std::size_t t = 0; t < held; ++t) in_test[order[t]] = 1;

  Split out;
  std::vector<Entry> train;
  train.reserve(total - held);
  out.test.reserve(held);
  for (std::size_t e = 0; e < total; ++e) {
    (in_test[e] ? out.test : train).push_back(data.entry(e));
  }
  out.train = RelationData(data.n(), std::move(train), data.directed());
  return out;
}

}  // namespace lfbm
