#include <gtest/gtest.h>

#include <random>

#include "adrl/rng.hpp"
#include "adrl/combiners.hpp"
#include "oracles.hpp"

using namespace adrl;

namespace {

ActionSet random_set(int n, int dim, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ActionSet s;
  for (int w = 0; w < n; ++w) {
    Vector a(dim);
    for (int k = 0; k < dim; ++k) a[k] = u(rng);
    s.push_back(a);
  }
  return s;
}

oracle::Mat as_mat(const ActionSet& s) {
  oracle::Mat m;
  for (const auto& a : s) m.push_back(oracle::to_vec(a));
  return m;
}

}  // namespace

TEST(Combiners, MatchBruteForceReferences) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const ActionSet s = random_set(2 + trial % 6, 2, rng);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_vec(combine_avg(s)), oracle::average(as_mat(s))), 1e-12);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_vec(combine_cnt(s)), oracle::medoid(as_mat(s))), 1e-12);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_vec(combine_mjv(s, 10)), oracle::majority(as_mat(s), 10)), 1e-12);
  }
}

TEST(Combiners, StayInsideTheHullOfTheInputs) {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const ActionSet s = random_set(4, 3, rng);
    Vector lo = s[0], hi = s[0];
    for (const auto& a : s) {
      lo = lo.cwiseMin(a);
      hi = hi.cwiseMax(a);
    }
    for (Combiner c : {Combiner::average, Combiner::centroid, Combiner::majority}) {
      const Vector out = combine(c, s);
      EXPECT_TRUE(((out - lo).array() >= -1e-15).all() && ((hi - out).array() >= -1e-15).all());
    }
    const Vector cnt = combine_cnt(s);
    bool member = false;
    for (const auto& a : s) member = member || a == cnt;
    EXPECT_TRUE(member);
  }
}

TEST(Combiners, TieBreaking) {
  // two identical-cost medoids: the lower index wins
  ActionSet pair{Vector::Constant(1, -0.5), Vector::Constant(1, 0.5)};
  EXPECT_EQ(medoid_index(pair), 0u);
  // bins {-0.9}, {0.95} tie with one vote each: the lower bin wins
  EXPECT_DOUBLE_EQ(combine_mjv({Vector::Constant(1, -0.9), Vector::Constant(1, 0.95)}, 10)[0], -0.9);
  // two votes in the top bin beat one
  EXPECT_DOUBLE_EQ(combine_mjv({Vector::Constant(1, -0.9), Vector::Constant(1, 0.9), Vector::Constant(1, 1.0)}, 10)[0],
                   0.95);
}

TEST(Combiners, BinEdges) {
  EXPECT_EQ(action_bin(-1.0, 10), 0);
  EXPECT_EQ(action_bin(1.0, 10), 9);
  EXPECT_EQ(action_bin(0.0, 10), 5);
  const double edge = -1.0 + 2.0 * 3 / 10;
  EXPECT_EQ(action_bin(edge, 10), 3);
  EXPECT_EQ(action_bin(std::nextafter(edge, -1.0), 10), 2);
  for (double v = -1.0; v <= 1.0; v += 0.001) EXPECT_EQ(action_bin(v, 10), oracle::bin_of(v, 10)) << v;
  EXPECT_THROW(action_bin(1.0001, 10), std::invalid_argument);
}

TEST(Combiners, ConcatenationKeepsViewOrder) {
  std::vector<Eigen::Index> offsets;
  const Vector c = concat_features({Vector::Constant(2, 1.0), Vector::Constant(3, 2.0)}, &offsets);
  ASSERT_EQ(c.size(), 5);
  EXPECT_EQ(offsets, (std::vector<Eigen::Index>{0, 2}));
  EXPECT_EQ(c[1], 1.0);
  EXPECT_EQ(c[2], 2.0);
  EXPECT_THROW(concat_features({}), ShapeError);
  EXPECT_THROW(combine_avg({}), ShapeError);
}
