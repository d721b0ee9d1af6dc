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

Dictionary RandomDictionary(size_t k, Eigen::Index n, uint64_t seed) {
  CounterRng rng(seed, 9);
  Mat e(n, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < e.cols(); ++i) e.col(i) = NormalVector(rng, n);
  return Dictionary(e, Metric::kEuclidean);
}

TEST(Lift, LineThroughTwoPoints) {
  const Vec a{{1.0, 2.0, 3.0, 4.0}};
  const Dictionary w(Mat(a), Metric::kEuclidean);
  const Vec d{{-1.0, 0.5, 0.0, 2.0}};
  LiftingConfig cfg;
  cfg.m = 2;
  cfg.database = &w;
  cfg.rng_seed = 1;
  const LiftingRecord rec = Lift(d, cfg);
  EXPECT_EQ(rec.subspace.dim(), 2);
  EXPECT_LT(PointToSubspaceDist(rec.subspace, d), 1e-12);
  EXPECT_LT(PointToSubspaceDist(rec.subspace, a), 1e-12);
  EXPECT_EQ(rec.adversarial_indices, std::vector<uint32_t>{0});
}

TEST(Lift, ContainsAllFormingPoints) {
  const Dictionary w = RandomDictionary(500, 128, 2);
  CounterRng rng(3, 0);
  const Vec d = NormalVector(rng, 128);
  LiftingConfig cfg;
  cfg.m = 8;
  cfg.database = &w;
  cfg.rng_seed = 4;
  const LiftingRecord rec = Lift(d, cfg);
  ASSERT_EQ(rec.adversarial_indices.size(), 4u);
  EXPECT_EQ(rec.subspace.dim(), 8);
  EXPECT_LT(PointToSubspaceDist(rec.subspace, d), 1e-6);
  for (uint32_t i : rec.adversarial_indices) EXPECT_LT(PointToSubspaceDist(rec.subspace, w.entry(i)), 1e-6);
  std::vector<uint32_t> sorted = rec.adversarial_indices;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
}

TEST(Lift, DeterministicUnderSeed) {
  const Dictionary w = RandomDictionary(100, 32, 5);
  const Vec d = Vec::Ones(32);
  LiftingConfig cfg;
  cfg.m = 4;
  cfg.database = &w;
  cfg.rng_seed = 77;
  const LiftingRecord a = Lift(d, cfg), b = Lift(d, cfg);
  EXPECT_TRUE(a.subspace == b.subspace);
  EXPECT_EQ(a.adversarial_indices, b.adversarial_indices);
  cfg.rng_seed = 78;
  EXPECT_FALSE(Lift(d, cfg).subspace == a.subspace);
}

TEST(Lift, ConfigErrors) {
  const Dictionary w = RandomDictionary(1, 16, 6);
  LiftingConfig cfg;
  cfg.database = &w;
  cfg.m = 4;
  try {
    Lift(Vec::Zero(16), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientDatabase);
  }
  cfg.m = 3;
  EXPECT_THROW(Lift(Vec::Zero(16), cfg), Error);
  cfg.m = 16;
  EXPECT_THROW(Lift(Vec::Zero(16), cfg), Error);
}

TEST(Lift, DuplicateAdversarialEntryShrinksWithWarning) {
  const Vec d{{0.5, -0.25, 1.0, 0.0, 2.0}};
  const Dictionary w(Mat(d), Metric::kEuclidean);
  LiftingConfig cfg;
  cfg.m = 2;
  cfg.database = &w;
  const LiftingRecord rec = Lift(d, cfg);
  EXPECT_EQ(rec.subspace.dim(), 1);
  EXPECT_FALSE(rec.warnings.empty());
}

TEST(Lift, PartitionsDrawFromOneSubDatabase) {
  const Dictionary w = RandomDictionary(64, 32, 7);
  LiftingConfig cfg;
  cfg.m = 8;
  cfg.database = &w;
  cfg.partitions = 16;
  for (uint64_t s = 0; s < 50; ++s) {
    cfg.rng_seed = s;
    const LiftingRecord rec = Lift(Vec::Ones(32), cfg);
    const uint32_t part = rec.adversarial_indices[0] / 4;
    for (uint32_t i : rec.adversarial_indices) EXPECT_EQ(i / 4, part);
  }
}

TEST(Reparameterize, SameSubspaceNewTranslation) {
  const Dictionary w = RandomDictionary(300, 16, 8);
  CounterRng rng(9, 0);
  for (int trial = 0; trial < 50; ++trial) {
    LiftingConfig cfg;
    cfg.m = 4;
    cfg.database = &w;
    cfg.rng_seed = rng();
    const Vec d = NormalVector(rng, 16);
    const LiftingRecord rec = Lift(d, cfg);
    const LiftingRecord rep = Reparameterize(rec, rng());
    const AffineSubspace& o = rec.subspace;
    const AffineSubspace& r = rep.subspace;
    EXPECT_LT(PointToSubspaceDist(r, o.translation()), 1e-6);
    EXPECT_LT(PointToSubspaceDist(o, r.translation()), 1e-6);
    EXPECT_LT(PointToSubspaceDist(r, d), 1e-6);
    EXPECT_GT((r.translation() - d).norm(), 1e-3);
    ASSERT_EQ(r.dim(), o.dim());
    // Principal angles between the linear parts via SVD of the cross-Gram.
    Eigen::JacobiSVD<Mat> svd(o.basis().transpose() * r.basis());
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
      EXPECT_LT(std::acos(std::min(1.0, svd.singularValues()[i])), 1e-6);
    }
    const Mat gram = r.basis().transpose() * r.basis();
    EXPECT_LT((gram - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(StripGroundTruth, OnlySubspaceLeaves) {
  const Dictionary w = RandomDictionary(50, 16, 10);
  LiftingConfig cfg;
  cfg.m = 2;
  cfg.database = &w;
  const Vec d = Vec::LinSpaced(16, -1.0, 1.0);
  const LiftingRecord rec = Reparameterize(Lift(d, cfg), 3);
  const AffineSubspace s = StripGroundTruth(rec);
  EXPECT_TRUE(s == rec.subspace);
  EXPECT_GT((s.translation() - d).norm(), 1e-6);
  for (Eigen::Index i = 0; i < s.dim(); ++i) EXPECT_GT((s.basis().col(i) - d).norm(), 1e-6);
  const Bytes bytes = EncodeSubspace(s);
  EXPECT_EQ(EncodeSubspace(DecodeSubspace(bytes)), bytes);
}

// The m/2 nearest dictionary entries to D are the planted samples.
TEST(Lift, PlantedSamplesAreNearestEntries) {
  SyntheticCorpusSpec spec;
  spec.size = 10000;
  spec.components = 200;
  const Dictionary w(GenerateCorpus(spec, 11), Metric::kEuclidean);
  spec.size = 200;
  const Mat queries = GenerateCorpus(spec, 11, 10000);
  size_t hits = 0;
  for (Eigen::Index t = 0; t < queries.cols(); ++t) {
    LiftingConfig cfg;
    cfg.m = 4;
    cfg.database = &w;
    cfg.rng_seed = static_cast<uint64_t>(t);
    const LiftingRecord rec = Lift(queries.col(t), cfg);
    const auto sorted = SortedDistancesToSubspace(w, rec.subspace);
    std::vector<uint32_t> top{sorted[0].index, sorted[1].index}, want = rec.adversarial_indices;
    std::sort(top.begin(), top.end());
    std::sort(want.begin(), want.end());
    hits += top == want ? 1 : 0;
  }
  EXPECT_GT(static_cast<double>(hits) / 200.0, 0.95);
}

TEST(SubspaceCodec, RoundTripAndErrors) {
  CounterRng rng(12, 0);
  const AffineSubspace s = testing::RandomSubspace(rng, 8, 3);
  const Bytes bytes = EncodeSubspace(s);
  ASSERT_EQ(bytes.size(), 4u + 2 + 4 + 4 + 4u * 8 * 4);
  EXPECT_EQ(EncodeSubspace(DecodeSubspace(bytes)), bytes);
  const AffineSubspace rounded = DecodeSubspace(bytes);
  EXPECT_TRUE(DecodeSubspace(EncodeSubspace(rounded)) == rounded);

  Bytes bad = bytes;
  bad[0] = 'X';
  try {
    DecodeSubspace(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptFile);
  }
  Bytes version = bytes;
  version[4] = 9;
  try {
    DecodeSubspace(version);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionUnsupported);
  }
  Bytes truncated(bytes.begin(), bytes.end() - 3);
  EXPECT_THROW(DecodeSubspace(truncated), Error);
  Bytes skewed = bytes;
  skewed[bytes.size() - 1] ^= 0x40;  // perturbs the last basis coordinate's exponent
  EXPECT_THROW(DecodeSubspace(skewed), Error);
}

}  // namespace
}  // namespace ldpfeat
