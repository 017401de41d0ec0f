#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lfbm/model.hpp"
#include "test_support.hpp"

using namespace lfbm;
using namespace lfbm::testing;

namespace {

// Two objects, d = 2, K = 2: the worked logit example.
LatentState example_state() {
  LatentState s = LatentState::zeros(2, 2, 2, 0);
  s.U.row(0) << 1.0, 0.0;
  s.V.row(1) << 2.0, 0.0;
  s.z = {0, 1};
  s.C(0, 1) = 0.5;
  s.bias = 0.25;
  return s;
}

HyperParams no_priors() {
  HyperParams hp;
  hp.lambda_u = hp.lambda_v = hp.lambda_c = hp.lambda_beta = 0.0;
  return hp;
}

}  // namespace

TEST_CASE("stable_logit_terms") {
  const LogitTerms zero = stable_logit_terms(0.0);
  CHECK(zero.sigma == 0.5);
  CHECK(zero.llp == doctest::Approx(0.6931471805599453).epsilon(1e-15));

  const LogitTerms big = stable_logit_terms(1000.0);
  CHECK(std::isfinite(big.llp));
  CHECK(big.llp == doctest::Approx(1000.0));
  CHECK(big.sigma < 1.0);
  CHECK(big.sigma == doctest::Approx(1.0));

  const LogitTerms small = stable_logit_terms(-1000.0);
  CHECK(small.llp >= 0.0);
  CHECK(small.llp == doctest::Approx(0.0));
  CHECK(small.sigma > 0.0);

  for (double x : {-30.0, -3.0, -0.1, 0.7, 5.0, 25.0}) {
    const LogitTerms t = stable_logit_terms(x);
    const double sigma = std::clamp(1.0 / (1.0 + std::exp(-x)), kSigmaFloor, 1.0 - kSigmaFloor);
    CHECK(t.sigma == doctest::Approx(sigma).epsilon(1e-14));
    CHECK(t.llp == doctest::Approx(std::log1p(std::exp(x))).epsilon(1e-14));
  }

  CHECK_THROWS_AS(stable_logit_terms(std::nan("")), NumericError);
  CHECK_THROWS_AS(stable_logit_terms(INFINITY), NumericError);
}

TEST_CASE("logit examples") {
  const LatentState s = example_state();
  CHECK(logit(s, 0, 1) == doctest::Approx(2.75).epsilon(1e-15));
  CHECK(logit(LatentState::zeros(2, 2, 2, 0), 0, 1) == 0.0);

  LatentState with_beta = LatentState::zeros(2, 2, 2, 2);
  with_beta.U = s.U;
  with_beta.V = s.V;
  with_beta.z = s.z;
  with_beta.C = s.C;
  with_beta.bias = s.bias;
  with_beta.beta << 1.0, -1.0;
  SideInfo side(2);
  side.set(0, 1, Eigen::Vector2d(0.5, 0.5));
  CHECK(logit(with_beta, 0, 1, &side) == doctest::Approx(2.75).epsilon(1e-15));

  CHECK_THROWS(logit(s, 0, 2));
}

TEST_CASE("log_posterior examples") {
  HyperParams hp = no_priors();
  RelationData one(1, {{0, 0, 1}});
  CHECK(log_posterior(LatentState::zeros(1, 1, 1, 0), one, hp) ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-15));

  LatentState s = LatentState::zeros(1, 1, 1, 0);
  s.U(0, 0) = 2.0;
  hp.lambda_u = 1.0;
  CHECK(log_posterior(s, RelationData(1, {}), hp) == -2.0);
}

TEST_CASE("log_posterior matches the naive double loop") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Instance inst = random_instance(seed, 6);
    const double got = log_posterior(inst.state, inst.data, inst.hp, inst.side_ptr());
    const double want =
        naive_log_posterior(inst.state, inst.data, inst.hp, inst.side_ptr());
    CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    CHECK(got <= 0.0);
  }
}

TEST_CASE("log_posterior rejects dimension mismatch") {
  const LatentState s = LatentState::zeros(3, 2, 2, 0);
  CHECK_THROWS_AS(log_posterior(s, RelationData(4, {}), HyperParams{}), DataError);
  SideInfo side(1);
  CHECK_THROWS_AS(log_posterior(s, RelationData(3, {}), HyperParams{}, &side), DataError);
}

TEST_CASE("block_objective differences track log_posterior") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Instance inst = random_instance(seed);
    std::mt19937_64 rng(seed + 99);
    std::normal_distribution<double> normal(0.0, 0.5);
    for (const FactorSelector& which : all_selectors(inst.state)) {
      LatentState moved = inst.state;
      Eigen::VectorXd w = get_block(which, moved);
      for (Eigen::Index t = 0; t < w.size(); ++t) w(t) += normal(rng);
      set_block(which, moved, w);
      const auto* side = inst.side_ptr();
      const double full = log_posterior(moved, inst.data, inst.hp, side) -
                          log_posterior(inst.state, inst.data, inst.hp, side);
      const double part = block_objective(which, moved, inst.data, inst.hp, side) -
                          block_objective(which, inst.state, inst.data, inst.hp, side);
      CHECK(part == doctest::Approx(full).epsilon(1e-9));
    }
  }
}

TEST_CASE("gradient closed-form examples") {
  // All pairs observed with S = 1 and H = 0 (U = 0): residual 0.5 each.
  const std::size_t n = 4;
  std::vector<Entry> entries;
  for (Index j = 0; j < n; ++j) entries.push_back({1, j, 1});
  RelationData data(n, entries);
  LatentState s = LatentState::zeros(n, 2, 1, 0);
  s.V << 1.0, 2.0, -0.5, 0.0, 3.0, 1.0, 0.25, -4.0;
  const HyperParams hp = no_priors();
  const Eigen::VectorXd g = gradient(FactorSelector::u_row(1), s, data, hp);
  const Eigen::VectorXd want = 0.5 * s.V.colwise().sum().transpose();
  CHECK((g - want).norm() < 1e-15);

  HyperParams prior;
  prior.lambda_u = 0.7;
  s.U.row(2) << 1.5, -2.0;
  const Eigen::VectorXd only_prior = gradient(FactorSelector::u_row(2), s, data, prior);
  CHECK((only_prior + 0.7 * s.U.row(2).transpose()).norm() < 1e-15);
}

TEST_CASE("gradient matches finite differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Instance inst = random_instance(seed);
    for (const FactorSelector& which : all_selectors(inst.state)) {
      const Eigen::VectorXd g =
          gradient(which, inst.state, inst.data, inst.hp, inst.side_ptr());
      worst = std::max(worst, relative_error(g, fd_gradient(which, inst)));
    }
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst <= 1e-6);
}

TEST_CASE("exact_hessian and curvature examples") {
  RelationData data(2, {{0, 1, 1}});
  LatentState s = LatentState::zeros(2, 2, 1, 0);
  s.V.row(1) << 1.0, 0.0;
  HyperParams hp;
  hp.lambda_u = 1.0;
  Eigen::Matrix2d want;
  want << -1.25, 0.0, 0.0, -1.0;
  const auto u0 = FactorSelector::u_row(0);
  CHECK((exact_hessian(u0, s, data, hp) - want).norm() < 1e-15);
  CHECK((curvature(u0, s, data, hp) - want).norm() < 1e-15);

  const auto u1 = FactorSelector::u_row(1);
  CHECK((exact_hessian(u1, s, data, hp) + Eigen::Matrix2d::Identity()).norm() == 0.0);
  CHECK((curvature(u1, s, data, hp) + Eigen::Matrix2d::Identity()).norm() == 0.0);
}

TEST_CASE("exact_hessian matches finite differences of the gradient") {
  double worst = 0.0;
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    Instance inst = random_instance(seed);
    for (const FactorSelector& which : all_selectors(inst.state)) {
      const Eigen::MatrixXd h =
          exact_hessian(which, inst.state, inst.data, inst.hp, inst.side_ptr());
      CHECK((h - h.transpose()).norm() <= 1e-12 * std::max(1.0, h.norm()));
      worst = std::max(worst, relative_error(h, fd_hessian(which, inst)));
    }
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst <= 1e-5);
}

TEST_CASE("curvature is dominated by the exact Hessian") {
  for (std::uint64_t seed = 200; seed < 250; ++seed) {
    Instance inst = random_instance(seed);
    for (const FactorSelector& which : all_selectors(inst.state)) {
      const auto* side = inst.side_ptr();
      const Eigen::MatrixXd k = curvature(which, inst.state, inst.data, inst.hp, side);
      const Eigen::MatrixXd h = exact_hessian(which, inst.state, inst.data, inst.hp, side);
      CHECK(min_eigenvalue(h - k) >= -1e-10);
      CHECK((k - k.transpose()).norm() == 0.0);
    }
  }
}

TEST_CASE("curvature does not depend on S or on the current block") {
  Instance inst = random_instance(7);
  std::vector<Entry> flipped(inst.data.entries().begin(), inst.data.entries().end());
  for (Entry& e : flipped) e.s = std::uint8_t(1 - e.s);
  RelationData other(inst.data.n(), flipped);
  for (const FactorSelector& which : all_selectors(inst.state)) {
    const Eigen::MatrixXd a = curvature(which, inst.state, inst.data, inst.hp, inst.side_ptr());
    LatentState moved = inst.state;
    set_block(which, moved, get_block(which, moved).array() + 3.0);
    const Eigen::MatrixXd b = curvature(which, moved, other, inst.hp, inst.side_ptr());
    CHECK((a - b).norm() == 0.0);
  }
}

TEST_CASE("minorizer touches at the anchor and stays below") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::uint64_t seed = 300; seed < 310; ++seed) {
    Instance inst = random_instance(seed);
    const auto* side = inst.side_ptr();
    for (const FactorSelector& which : all_selectors(inst.state)) {
      const MinorizerContext ctx = make_minorizer(which, inst.state, inst.data, inst.hp, side);
      const double at_anchor = log_posterior(inst.state, inst.data, inst.hp, side);
      CHECK(std::abs(minorizer_value(ctx, ctx.anchor) - at_anchor) <= 1e-9);
      for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd step(ctx.anchor.size());
        for (Eigen::Index t = 0; t < step.size(); ++t) step(t) = unit(rng);
        if (step.norm() > 1.0) step /= step.norm();
        LatentState probe = inst.state;
        set_block(which, probe, ctx.anchor + step);
        CHECK(minorizer_value(ctx, ctx.anchor + step) <=
              log_posterior(probe, inst.data, inst.hp, side) + 1e-9);
      }
    }
  }
}

TEST_CASE("minorizer scalar example") {
  MinorizerContext ctx;
  ctx.anchor = Eigen::VectorXd::Zero(1);
  ctx.grad_at_anchor = Eigen::VectorXd::Ones(1);
  ctx.curvature = Eigen::MatrixXd::Constant(1, 1, -2.0);
  ctx.objective_at_anchor = 0.0;
  CHECK(minorizer_value(ctx, Eigen::VectorXd::Ones(1)) == 0.0);
  CHECK_THROWS(minorizer_value(ctx, Eigen::VectorXd::Ones(2)));
}

TEST_CASE("block_kron") {
  const Eigen::Vector2d e0(1.0, 0.0);
  const Eigen::Vector2d e1(0.0, 1.0);
  Eigen::VectorXd r = block_kron(e0, e1);
  CHECK(r.size() == 4);
  CHECK(r(1) == 1.0);
  CHECK(r.sum() == 1.0);
  r = block_kron(e0, e0);
  CHECK(r(0) == 1.0);
  CHECK(r.sum() == 1.0);

  CHECK_THROWS_AS(block_kron(Eigen::Vector2d(1.0, 1.0), e0), DataError);
  CHECK_THROWS_AS(block_kron(Eigen::Vector2d(0.5, 0.0), e0), DataError);
  CHECK_THROWS_AS(block_kron(e0, Eigen::Vector3d(1.0, 0.0, 0.0)), DataError);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int K = 1; K <= 4; ++K) {
    Eigen::MatrixXd C(K, K);
    for (Eigen::Index t = 0; t < C.size(); ++t) C(t) = normal(rng);
    // Row-major flattening of C.
    Eigen::VectorXd flat(K * K);
    for (int k = 0; k < K; ++k) {
      for (int l = 0; l < K; ++l) flat(k * K + l) = C(k, l);
    }
    for (int a = 0; a < K; ++a) {
      for (int b = 0; b < K; ++b) {
        const Eigen::VectorXd zi = Eigen::VectorXd::Unit(K, a);
        const Eigen::VectorXd zj = Eigen::VectorXd::Unit(K, b);
        const double direct = zi.transpose() * C * zj;
        CHECK(flat.dot(block_kron(zi, zj)) == direct);
      }
    }
  }
}

TEST_CASE("C block uses row-major flattening") {
  LatentState s = LatentState::zeros(2, 1, 2, 0);
  s.C << 1.0, 2.0, 3.0, 4.0;
  const Eigen::VectorXd flat = get_block(FactorSelector::c_flat(), s);
  CHECK(flat(1) == 2.0);
  CHECK(flat(2) == 3.0);
  CHECK(block_size(FactorSelector::c_flat(), s) == 4);
}

TEST_CASE("selectors are bounds-checked") {
  const LatentState s = LatentState::zeros(3, 2, 2, 0);
  RelationData data(3, {});
  CHECK_THROWS(gradient(FactorSelector::u_row(3), s, data, HyperParams{}));
  CHECK_THROWS(exact_hessian(FactorSelector::v_row(7), s, data, HyperParams{}));
  CHECK(gradient(FactorSelector::beta(), s, data, HyperParams{}).size() == 0);
}
