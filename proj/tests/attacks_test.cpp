// Copyright 2026 The ldpfeat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"

namespace ldpfeat {
namespace {

using testing::ThrowsCode;

Vec RandomUnitVec(CounterRng& rng, Eigen::Index n) { return NormalVector(rng, n).normalized(); }

TEST(DatabaseAttack, PlantedRecoveryBeatsRandomGuess) {
  SyntheticCorpusSpec spec;
  spec.n = 16;
  spec.components = 10;
  spec.spread = 0.3;
  spec.size = 1000;
  const Dictionary w(GenerateCorpus(spec, 1), Metric::kEuclidean);
  spec.size = 100;
  const Mat queries = GenerateCorpus(spec, 1, 1000);
  DatabaseAttackConfig acfg;
  acfg.database = &w;
  acfg.m = 4;
  CounterRng guess(2, 0);
  int wins = 0;
  for (Eigen::Index t = 0; t < queries.cols(); ++t) {
    const Vec d = queries.col(t);
    LiftingConfig lcfg;
    lcfg.m = 4;
    lcfg.database = &w;
    lcfg.rng_seed = static_cast<uint64_t>(t);
    const LiftingRecord rec = Lift(d, lcfg);
    const AffineSubspace sent = StripGroundTruth(Reparameterize(rec, 1000 + static_cast<uint64_t>(t)));
    const AttackEstimate est = DatabaseAttack(sent, acfg);
    std::vector<uint32_t> got = est.recovered_indices, want = rec.adversarial_indices;
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    EXPECT_EQ(got, want);
    for (const Vec& a : est.adversarial_hats) EXPECT_LT(PointToSubspaceDist(rec.subspace, a), 1e-9);
    EXPECT_LT(PointToSubspaceDist(sent, est.d_hat), 1e-6);
    const size_t r = UniformIndex(guess, w.size());
    wins += CosineSimilarity(est.d_hat, d) > CosineSimilarity(w.entry(r), d) ? 1 : 0;
  }
  EXPECT_GE(wins, 95);
}

TEST(DatabaseAttack, SingleNeighbourCollapsesToProjection) {
  Mat e(4, 2);
  e << 1, 0.3,  //
      0, 0.9,   //
      0, -0.2,  //
      0, 0.4;
  const Dictionary w(e, Metric::kEuclidean);
  const Vec d{{0.0, 0.0, 1.0, 0.0}};
  LiftingConfig lcfg;
  lcfg.m = 2;
  lcfg.database = &w;
  const LiftingRecord rec = Lift(d, lcfg);
  ASSERT_EQ(rec.adversarial_indices, std::vector<uint32_t>{0});
  DatabaseAttackConfig acfg{&w, 2, 1, 1};
  const AttackEstimate est = DatabaseAttack(rec.subspace, acfg);
  Mat dirs(4, 2);
  dirs.col(0) = w.entry(0) - d;
  dirs.col(1) = rec.subspace.basis().col(1);
  const Vec oracle = testing::QrProjection(d, rec.subspace.basis(), w.entry(1));
  EXPECT_LT((est.d_hat - oracle).norm(), 1e-12);
}

TEST(DatabaseAttack, DescriptorInsideDatabaseIsRecoveredExactly) {
  CounterRng rng(3, 0);
  Mat e(32, 200);
  for (Eigen::Index i = 0; i < 200; ++i) e.col(i) = RandomUnitVec(rng, 32);
  const Dictionary w(e, Metric::kEuclidean);
  const Vec d = w.entry(17);
  LiftingConfig lcfg;
  lcfg.m = 6;
  lcfg.database = &w;
  lcfg.rng_seed = 4;
  const LiftingRecord rec = Lift(d, lcfg);
  ASSERT_EQ(std::count(rec.adversarial_indices.begin(), rec.adversarial_indices.end(), 17u), 0);
  DatabaseAttackConfig acfg{&w, 6, 64, 8};
  const AttackEstimate est = DatabaseAttack(Reparameterize(rec, 5).subspace, acfg);
  EXPECT_LT((est.d_hat - d).norm(), 1e-6);
}

TEST(DatabaseAttack, Errors) {
  CounterRng rng(6, 0);
  Mat e(8, 5);
  for (Eigen::Index i = 0; i < 5; ++i) e.col(i) = RandomUnitVec(rng, 8);
  const Dictionary w(e, Metric::kEuclidean);
  LiftingConfig lcfg;
  lcfg.m = 2;
  lcfg.database = &w;
  const LiftingRecord rec = Lift(RandomUnitVec(rng, 8), lcfg);
  DatabaseAttackConfig acfg{&w, 2, 64, 8};
  EXPECT_TRUE(ThrowsCode([&] { DatabaseAttack(rec.subspace, acfg); }, ErrorCode::kInsufficientNeighbors));
  acfg.m = 3;
  EXPECT_TRUE(ThrowsCode([&] { DatabaseAttack(rec.subspace, acfg); }, ErrorCode::kInvalidArgument));
}

TEST(KMeansEuclidean, SeparatesBlobs) {
  CounterRng rng(7, 0);
  Mat data(3, 60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    Vec c = Vec::Zero(3);
    c[i % 3] = 10.0;
    data.col(i) = c + 0.1 * NormalVector(rng, 3);
  }
  const EuclideanKMeans a = KMeansEuclidean(data, 3, 50, 8);
  const EuclideanKMeans b = KMeansEuclidean(data, 3, 50, 8);
  EXPECT_EQ(a.labels, b.labels);
  for (Eigen::Index i = 3; i < 60; ++i) EXPECT_EQ(a.labels[static_cast<size_t>(i)], a.labels[static_cast<size_t>(i % 3)]);
  std::vector<uint32_t> firsts{a.labels[0], a.labels[1], a.labels[2]};
  std::sort(firsts.begin(), firsts.end());
  EXPECT_EQ(firsts, (std::vector<uint32_t>{0, 1, 2}));
}

// Two tight public clusters around d and a1 on a plane D; one auxiliary
// subspace passes through a1, so the centre near d must win.
struct TwoClusterScene {
  Vec d, a1;
  AffineSubspace subspace;
  Dictionary pub;
  std::vector<AffineSubspace> aux;
};

TwoClusterScene MakeTwoClusterScene(uint64_t seed) {
  const Eigen::Index n = 8;
  CounterRng rng(seed, 0);
  TwoClusterScene s;
  s.d = RandomUnitVec(rng, n);
  s.a1 = RandomUnitVec(rng, n);
  s.subspace = AffineSubspace(s.d, std::vector<Vec>{s.a1 - s.d, NormalVector(rng, n)});
  Mat e(n, 20);
  for (Eigen::Index i = 0; i < 20; ++i) e.col(i) = (i < 10 ? s.d : s.a1) + 0.01 * NormalVector(rng, n);
  s.pub = Dictionary(e, Metric::kEuclidean);
  s.aux.emplace_back(s.a1, std::vector<Vec>{NormalVector(rng, n), NormalVector(rng, n)});
  return s;
}

TEST(ClusterAttack, TwoCandidateOracle) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const TwoClusterScene s = MakeTwoClusterScene(seed);
    ClusterAttackConfig cfg;
    cfg.public_db = &s.pub;
    cfg.aux_subspaces = &s.aux;
    cfg.m = 2;
    cfg.v_size = 20;
    cfg.seed = seed;
    const AttackEstimate est = ClusterAttack(s.subspace, cfg);
    ASSERT_EQ(est.candidate_scores.size(), 2u);
    EXPECT_LT((est.d_hat - s.d).norm(), (est.d_hat - s.a1).norm());
    EXPECT_LT(PointToSubspaceDist(s.subspace, est.d_hat), 1e-6);
    for (const auto& c : est.candidate_scores) EXPECT_LE(c.score, est.candidate_scores[est.selected].score);

    // Independent centre: inverse-distance mean of the first ten entries, QR-projected.
    Vec sum = Vec::Zero(8);
    double alpha = 0.0;
    for (size_t i = 0; i < 10; ++i) {
      const Vec x = s.pub.entry(i);
      const double dist = (x - testing::QrProjection(s.subspace.translation(), s.subspace.basis(), x)).norm();
      sum += x / dist;
      alpha += 1.0 / dist;
    }
    const Vec oracle = testing::QrProjection(s.subspace.translation(), s.subspace.basis(), sum / alpha);
    EXPECT_LT((est.d_hat - oracle).norm(), 1e-9);
    ASSERT_EQ(est.adversarial_hats.size(), 1u);
    EXPECT_LT((est.adversarial_hats[0] - s.a1).norm(), 0.05);
  }
}

TEST(ClusterAttack, NoIntersectingAux) {
  TwoClusterScene s = MakeTwoClusterScene(1);
  CounterRng rng(9, 0);
  std::vector<AffineSubspace> far{AffineSubspace(Vec::Constant(8, 5.0), std::vector<Vec>{NormalVector(rng, 8)})};
  ClusterAttackConfig cfg;
  cfg.public_db = &s.pub;
  cfg.aux_subspaces = &far;
  cfg.m = 2;
  cfg.v_size = 20;
  EXPECT_GT(SubspaceToSubspaceDist(s.subspace, far[0]), 1e-3);
  EXPECT_TRUE(ThrowsCode([&] { ClusterAttack(s.subspace, cfg); }, ErrorCode::kNoIntersectingAux));
  std::vector<AffineSubspace> none;
  cfg.aux_subspaces = &none;
  EXPECT_TRUE(ThrowsCode([&] { ClusterAttack(s.subspace, cfg); }, ErrorCode::kInvalidArgument));
}

TEST(CollisionRate, ForcedAndDisjoint) {
  CounterRng rng(10, 0);
  Mat e(8, 50);
  for (Eigen::Index i = 0; i < 50; ++i) e.col(i) = RandomUnitVec(rng, 8);
  const Dictionary w(e, Metric::kEuclidean);
  std::vector<LiftingRecord> records;
  std::vector<AffineSubspace> through_d, far;
  for (uint64_t t = 0; t < 20; ++t) {
    LiftingConfig lcfg;
    lcfg.m = 2;
    lcfg.database = &w;
    lcfg.rng_seed = t;
    records.push_back(Lift(RandomUnitVec(rng, 8), lcfg));
    through_d.emplace_back(records.back().original, std::vector<Vec>{NormalVector(rng, 8)});
    far.emplace_back(Vec::Constant(8, 40.0 + static_cast<double>(t)), std::vector<Vec>{NormalVector(rng, 8)});
  }
  ClusterAttackConfig cfg;
  cfg.aux_subspaces = &through_d;
  EXPECT_EQ(CollisionRate(records, cfg), 0.0);
  cfg.aux_subspaces = &far;
  EXPECT_EQ(CollisionRate(records, cfg), 1.0);
}

TEST(IntersectionMatches, RatioTestCases) {
  const Vec d{{0.0, 0.0, 0.0, 1.0, 0.0}};
  const Vec a{{1.0, 0.0, 0.0, 0.0, 0.0}};
  // Second entry is a slight perturbation of the planted sample: unambiguous.
  Mat near(5, 2);
  near.col(0) = a;
  near.col(1) = a + 1e-3 * Vec::Unit(5, 1);
  const Dictionary w_near(near, Metric::kEuclidean);
  LiftingConfig lcfg;
  lcfg.m = 2;
  lcfg.database = &w_near;
  lcfg.partitions = 2;
  for (uint64_t s = 0; s < 50; ++s) {
    lcfg.rng_seed = s;
    const LiftingRecord rec = Lift(d, lcfg);
    if (rec.adversarial_indices[0] != 0) continue;
    EXPECT_TRUE(IntersectionMatches(rec, w_near, 1));
  }
  // Second entry equidistant from d and a: ratio test fails.
  Mat mid(5, 2);
  mid.col(0) = a;
  mid.col(1) = 0.5 * (a + d) + 0.3 * Vec::Unit(5, 2);
  const Dictionary w_mid(mid, Metric::kEuclidean);
  lcfg.database = &w_mid;
  lcfg.partitions = 1;
  LiftingRecord rec;
  for (uint64_t s = 0; s < 50; ++s) {
    lcfg.rng_seed = s;
    rec = Lift(d, lcfg);
    if (rec.adversarial_indices[0] == 0) break;
  }
  ASSERT_EQ(rec.adversarial_indices[0], 0u);
  EXPECT_FALSE(IntersectionMatches(rec, w_mid, 1));
  EXPECT_EQ(IntersectionSuccessRate({rec}, w_mid, 1), 0.0);
  EXPECT_EQ(IntersectionSuccessRate({}, w_mid, 1), 0.0);
}

}  // namespace
}  // namespace ldpfeat
