#include <gtest/gtest.h>

#include "adrl/attention.hpp"
#include "oracles.hpp"

using namespace adrl;

namespace {

Vector uniform_vector(Eigen::Index n, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

}  // namespace

TEST(AttentionWeights, MatchSoftmaxReference) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = 1 + trial % 6;
    const Vector f = uniform_vector(n, -5, 5, rng), g = uniform_vector(n, -3, 3, rng);
    const Vector p = attention_weights(f, g);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_vec(p), oracle::softmax(oracle::to_vec(f), oracle::to_vec(g))), 1e-12);
  }
}

TEST(AttentionWeights, PositiveAndNormalisedEvenForExtremeLogits) {
  const Vector f = (Vector(3) << 1e3, 0.0, -1e3).finished();
  const Vector p = attention_weights(f, Vector::Ones(3));
  EXPECT_GT(p.minCoeff(), 0.0);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  EXPECT_GT(p[0], 0.999);
}

TEST(AttentionWeights, EqualLogitsGiveUniformWeights) {
  const Vector p = attention_weights(Vector::Constant(4, 2.5), Vector::Ones(4));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(p[i], 0.25, 1e-15);
}

TEST(AttentionWeights, RejectsBadInput) {
  EXPECT_THROW(attention_weights(Vector::Ones(3), Vector::Ones(2)), ShapeError);
  EXPECT_THROW(attention_weights(Vector(), Vector()), ShapeError);
  Vector f = Vector::Ones(2);
  f[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(attention_weights(f, Vector::Ones(2)), NumericError);
}

TEST(Fuse, MatchesWeightedSumReference) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 3;
    std::vector<Vector> x;
    oracle::Mat xm;
    for (int w = 0; w < n; ++w) {
      x.push_back(standard_normal(5, rng));
      xm.push_back(oracle::to_vec(x.back()));
    }
    const Vector p = attention_weights(standard_normal(n, rng), Vector::Ones(n));
    EXPECT_LE(oracle::max_abs_diff(oracle::to_vec(fuse(x, p).x), oracle::fuse(xm, oracle::to_vec(p))), 1e-12);
  }
  EXPECT_THROW(fuse({Vector::Ones(2), Vector::Ones(3)}, Vector::Constant(2, 0.5)), ShapeError);
}

TEST(Fuse, BatchAgreesWithSingleSample) {
  Rng rng(3);
  std::vector<Matrix> feats{Matrix::Random(4, 6), Matrix::Random(4, 6), Matrix::Random(4, 6)};
  const Matrix f = Matrix::Random(3, 6);
  const Vector g = uniform_vector(3, 0.5, 2, rng);
  const Matrix p = attention_weights_batch(f, g);
  const Matrix x = fuse_batch(feats, p);
  for (Eigen::Index k = 0; k < 6; ++k) {
    const Vector pk = attention_weights(f.col(k), g);
    EXPECT_LE((pk - p.col(k)).cwiseAbs().maxCoeff(), 1e-15);
    const Vector xk = fuse({feats[0].col(k), feats[1].col(k), feats[2].col(k)}, pk).x;
    EXPECT_LE((xk - x.col(k)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(FuseBackward, FeatureAndGainGradientsMatchCentralDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + trial % 3, dim = 3, batch = 4;
    std::vector<Matrix> feats;
    for (int w = 0; w < n; ++w) feats.push_back(Matrix::Random(dim, batch));
    const Matrix f = Matrix::Random(n, batch) * 2.0;
    Vector g = uniform_vector(n, 0.2, 2.0, rng);
    const Matrix weight = Matrix::Random(dim, batch);  // loss = sum(weight .* x)
    const auto loss = [&](const std::vector<Matrix>& fs, const Vector& gains) {
      return fuse_batch(fs, attention_weights_batch(f, gains)).cwiseProduct(weight).sum();
    };
    const Matrix p = attention_weights_batch(f, g);
    const FusionGradients grad = fuse_backward(feats, p, f, fuse_batch(feats, p), weight);

    const auto by_gain = [&](const oracle::Vec& v) { return loss(feats, Eigen::Map<const Vector>(v.data(), n)); };
    EXPECT_LE(oracle::relative_error(oracle::to_vec(grad.gains), oracle::finite_difference(by_gain, oracle::to_vec(g))),
              1e-6);
    for (int w = 0; w < n; ++w) {
      const auto by_feature = [&](const oracle::Vec& v) {
        auto fs = feats;
        fs[w] = Eigen::Map<const Matrix>(v.data(), dim, batch);
        return loss(fs, g);
      };
      const oracle::Vec x0(feats[w].data(), feats[w].data() + feats[w].size());
      const oracle::Vec an(grad.features[w].data(), grad.features[w].data() + grad.features[w].size());
      EXPECT_LE(oracle::relative_error(an, oracle::finite_difference(by_feature, x0)), 1e-6);
    }
  }
}

TEST(Attend, GateValuesComeFromEachWorkersOwnCritic) {
  Rng rng(5);
  AgentHyper h;
  NetSizes sizes{{8}, {6}, {10}};
  std::vector<Worker> workers;
  for (int w = 0; w < 3; ++w) workers.emplace_back(4, 2, sizes, h, rng);
  AttentionGate gate(3, 1e-3);
  gate.gains << 0.5, 1.0, 2.0;
  std::vector<Vector> obs{standard_normal(4, rng), standard_normal(4, rng), standard_normal(4, rng)};
  const AttentionStep s = attend(workers, gate, obs);
  for (int w = 0; w < 3; ++w) EXPECT_NEAR(s.f[w], workers[w].gate_value(obs[w]), 1e-14);
  EXPECT_LE((s.p - attention_weights(s.f, gate.gains)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((s.x - fuse(s.features, s.p).x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AttentionEncoder, EncodesTheFusedWorkerFeatures) {
  Rng rng(6);
  AgentHyper h;
  NetSizes sizes{{8}, {6}, {10}};
  std::vector<Worker> workers;
  for (int w = 0; w < 2; ++w) workers.emplace_back(3, 2, sizes, h, rng);
  AttentionGate gate(2, 1e-3);
  ReplayBuffer buf(5);
  for (int i = 0; i < 5; ++i)
    buf.store({{standard_normal(3, rng), standard_normal(3, rng)}, Vector::Zero(2), 0.0,
               {standard_normal(3, rng), standard_normal(3, rng)}, false});
  Batch b;
  for (std::size_t i = 0; i < 5; ++i) b.push_back(&buf.at(i));
  AttentionEncoder enc(workers, gate);
  const Matrix x = enc.encode(b);
  for (std::size_t k = 0; k < 5; ++k) {
    const AttentionStep s = attend(workers, gate, b[k]->views);
    EXPECT_LE((s.x - x.col(static_cast<Eigen::Index>(k))).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(AttentionEncoder, BackwardMovesTrunksAndGainsButNotEncoders) {
  Rng rng(7);
  AgentHyper h;
  NetSizes sizes{{8}, {6}, {10}};
  std::vector<Worker> workers;
  for (int w = 0; w < 2; ++w) workers.emplace_back(3, 2, sizes, h, rng);
  AttentionGate gate(2, 1e-2);
  ReplayBuffer buf(4);
  for (int i = 0; i < 4; ++i)
    buf.store({{standard_normal(3, rng), standard_normal(3, rng)}, Vector::Zero(2), 0.0,
               {standard_normal(3, rng), standard_normal(3, rng)}, false});
  Batch b;
  for (std::size_t i = 0; i < 4; ++i) b.push_back(&buf.at(i));
  const auto enc_hash = parameter_hash(workers[0].view.encoder.params());
  const auto trunk_hash = parameter_hash(workers[0].view.trunk.params());
  const Vector gains = gate.gains;
  AttentionEncoder enc(workers, gate);
  const Matrix x = enc.encode(b);
  enc.backward(Matrix::Ones(x.rows(), x.cols()));
  EXPECT_EQ(parameter_hash(workers[0].view.encoder.params()), enc_hash);
  EXPECT_NE(parameter_hash(workers[0].view.trunk.params()), trunk_hash);
  EXPECT_NE((gate.gains - gains).norm(), 0.0);
}
