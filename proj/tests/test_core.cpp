#include <doctest.h>

#include <string>
#include <vector>

#include "lfbm/core.hpp"
#include "lfbm/model.hpp"
#include "test_support.hpp"

using namespace lfbm;

namespace {

std::string validation_error(std::size_t n, std::vector<Entry> entries) {
  try {
    validate(n, entries);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("validate accepts a minimal instance") {
  CHECK(validation_error(2, {{0, 1, 1}}).empty());
}

TEST_CASE("validate rejects bad entries") {
  CHECK(validation_error(2, {{0, 2, 1}}).starts_with("index-out-of-range"));
  CHECK(validation_error(2, {{0, 1, 1}, {0, 1, 0}}).starts_with("duplicate-pair"));
  CHECK(validation_error(2, {{0, 1, 2}}).starts_with("non-binary-value"));
  CHECK_THROWS_AS(RelationData(2, {{1, 1, 1}, {1, 1, 1}}), DataError);
}

TEST_CASE("self-pairs are permitted") {
  RelationData data(3, {{1, 1, 1}});
  CHECK(data.size() == 1);
  CHECK(data.find(1, 1).has_value());
}

TEST_CASE("RelationData indexes rows and columns") {
  RelationData data(4, {{2, 0, 1}, {0, 3, 0}, {0, 1, 1}, {3, 1, 0}, {1, 1, 1}});
  REQUIRE(data.size() == 5);

  // Entries are sorted by (i, j).
  for (std::size_t e = 1; e < data.size(); ++e) {
    const Entry& a = data.entry(e - 1);
    const Entry& b = data.entry(e);
    CHECK((a.i < b.i || (a.i == b.i && a.j < b.j)));
  }
  CHECK(data.outgoing(0).size() == 2);
  CHECK(data.outgoing(2).size() == 1);
  CHECK(data.incoming(1).size() == 3);
  CHECK(data.incoming(2).empty());
  for (Index pos : data.incoming(1)) CHECK(data.entry(pos).j == 1);
  for (Index pos : data.outgoing(0)) CHECK(data.entry(pos).i == 0);

  const auto hit = data.find(3, 1);
  REQUIRE(hit.has_value());
  CHECK(data.entry(*hit).s == 0);
  CHECK_FALSE(data.find(1, 3).has_value());
}

TEST_CASE("SideInfo defaults to zeros") {
  SideInfo side(2);
  side.set(0, 1, Eigen::Vector2d(1.0, 2.0));
  CHECK(side.at(0, 1)(1) == 2.0);
  CHECK(side.at(1, 0).isZero());
  CHECK(side.at(1, 0).size() == 2);
  CHECK_THROWS(side.set(0, 2, Eigen::Vector3d::Zero()));
}

TEST_CASE("HyperParams domain checks") {
  HyperParams hp;
  CHECK_NOTHROW(hp.check());
  hp.eta0 = 0.0;
  CHECK_THROWS(hp.check());
  hp = {};
  hp.K = 0;
  CHECK_THROWS(hp.check());
  hp = {};
  hp.lambda_v = -1.0;
  CHECK_THROWS(hp.check());
  hp = {};
  hp.armijo_shrink = 1.0;
  CHECK_THROWS(hp.check());
}

TEST_CASE("zero state gives zero logits everywhere") {
  const LatentState s = LatentState::zeros(5, 3, 2, 1);
  SideInfo side(1);
  side.set(1, 2, Eigen::VectorXd::Constant(1, 4.0));
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) CHECK(logit(s, i, j, &side) == 0.0);
  }
}

TEST_CASE("LatentState checks labels and finiteness") {
  LatentState s = LatentState::zeros(3, 2, 2, 0);
  CHECK_NOTHROW(s.check());
  CHECK(s.one_hot(1).sum() == 1.0);
  s.z[2] = 2;
  CHECK_THROWS_AS(s.check(), DataError);
  s.z[2] = 1;
  s.U(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(s.check(), DataError);
}

TEST_CASE("FitTrace monotone tolerance") {
  FitTrace t;
  t.objective_per_sweep = {-10.0, -9.0, -9.0 - 5e-9, -8.0};
  CHECK(t.monotone());
  t.objective_per_sweep.push_back(-8.1);
  CHECK_FALSE(t.monotone());
}
