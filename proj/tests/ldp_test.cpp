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

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>

#include "test_util.hpp"

namespace ldpfeat {
namespace {

using testing::ThrowsCode;

Dictionary UnitDictionary(size_t k, Eigen::Index n, uint64_t seed) {
  CounterRng rng(seed, 3);
  Mat e(n, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < e.cols(); ++i) e.col(i) = NormalVector(rng, n).normalized();
  return Dictionary(e, Metric::kEuclidean);
}

LdpConfig Config(const Dictionary& dict, uint32_t m, double eps) {
  LdpConfig cfg;
  cfg.dictionary = &dict;
  cfg.m = m;
  cfg.epsilon = PrivacyBudget::Finite(eps);
  return cfg;
}

// Direct long-double evaluation of m e^eps / (m e^eps + K - m).
long double DirectP(long double eps, long double m, long double k) {
  const long double a = m * std::exp(eps);
  return a / (a + k - m);
}

TEST(BernoulliP, ClosedFormValues) {
  EXPECT_NEAR(BernoulliP(PrivacyBudget::Finite(0.0), 1, 2), 0.5, 1e-15);
  EXPECT_EQ(BernoulliP(PrivacyBudget::Infinite(), 3, 100), 1.0);
  EXPECT_EQ(BernoulliP(PrivacyBudget::Finite(0.0), 5, 5), 1.0);
  EXPECT_NEAR(BernoulliP(PrivacyBudget::Finite(10.0), 2, 256000), 0.146818, 5e-7);
  for (double eps : {0.0, 0.5, 1.0, 3.0, 10.0}) {
    for (uint64_t m : {1u, 2u, 16u}) {
      for (uint64_t k : {16u, 1000u, 256000u}) {
        const double want = static_cast<double>(DirectP(eps, m, k));
        EXPECT_NEAR(BernoulliP(PrivacyBudget::Finite(eps), m, k), want, 1e-14 * want);
      }
    }
  }
}

TEST(BernoulliP, HugeSymbolicDomain) {
  // log|K| = 1024 log 2: p is tiny but positive and finite.
  const double log_k = 1024.0 * std::log(2.0);
  const double p = BernoulliPFromLogDomain(PrivacyBudget::Finite(10.0), 4, log_k);
  EXPECT_GT(p, 0.0);
  EXPECT_NEAR(std::log(p), std::log(4.0) + 10.0 - log_k, 1e-9);
  EXPECT_NEAR(BernoulliPFromLogDomain(PrivacyBudget::Finite(1.0), 2, std::log(256000.0)),
              BernoulliP(PrivacyBudget::Finite(1.0), 2, 256000), 1e-12);
}

TEST(BernoulliP, Monotone) {
  double prev = 0.0;
  for (double eps = 0.0; eps <= 12.0; eps += 0.5) {
    const double p = BernoulliP(PrivacyBudget::Finite(eps), 2, 1000);
    EXPECT_GT(p, prev);
    prev = p;
  }
  prev = 1.0;
  for (uint64_t k : {4u, 8u, 64u, 1024u, 65536u}) {
    const double p = BernoulliP(PrivacyBudget::Finite(1.0), 2, k);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(PrivacyBudget, RejectsInvalid) {
  EXPECT_TRUE(ThrowsCode([] { PrivacyBudget::Finite(-1.0); }, ErrorCode::kInvalidArgument));
  EXPECT_TRUE(ThrowsCode([] { PrivacyBudget::Finite(std::nan("")); }, ErrorCode::kInvalidArgument));
  EXPECT_TRUE(ThrowsCode([] { PrivacyBudget::Infinite().epsilon(); }, ErrorCode::kInvalidArgument));
}

TEST(SampleSubset, FullDomainAndInfiniteBudget) {
  CounterRng rng(1, 0);
  const std::vector<uint32_t> all{0, 1, 2, 3};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(SampleSubset(2, 4, 4, 1.0, rng), all);
  const Dictionary dict = UnitDictionary(20, 8, 2);
  LdpConfig cfg = Config(dict, 1, 0.0);
  cfg.epsilon = PrivacyBudget::Infinite();
  for (Eigen::Index i = 0; i < 20; ++i) {
    const PrivatizedFeature f = Privatize(dict.entry(static_cast<size_t>(i)), cfg, rng);
    EXPECT_EQ(f.indices, std::vector<uint32_t>{static_cast<uint32_t>(i)});
  }
}

TEST(SampleSubset, InclusionRate) {
  const double p = BernoulliP(PrivacyBudget::Finite(1.0), 2, 8);
  EXPECT_NEAR(p, 2.0 * std::exp(1.0) / (2.0 * std::exp(1.0) + 6.0), 1e-15);
  EXPECT_NEAR(p, 0.47536, 1e-5);
  CounterRng rng(7, 0);
  const int trials = 1000000;
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    const auto z = SampleSubset(3, 2, 8, p, rng);
    ASSERT_EQ(z.size(), 2u);
    ASSERT_LT(z[0], z[1]);
    hits += std::binary_search(z.begin(), z.end(), 3u) ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(hits) / trials, 0.47536, 0.002);
}

TEST(SampleSubset, EmpiricalMatchesClosedForm) {
  // Chi-square goodness of fit over all C(7,3) = 35 outputs.
  const Dictionary dict = UnitDictionary(7, 8, 3);
  const LdpConfig cfg = Config(dict, 3, 1.5);
  const double p = BernoulliP(cfg);
  CounterRng rng(11, 0);
  const int trials = 200000;
  std::vector<int> counts(35, 0);
  for (int t = 0; t < trials; ++t) ++counts[RankSubset(SampleSubset(4, 3, 7, p, rng))];
  double chi2 = 0.0;
  for (uint64_t z = 0; z < 35; ++z) {
    const double expected = trials * SubsetProbability(UnrankSubset(z, 3), 4, cfg);
    chi2 += (counts[z] - expected) * (counts[z] - expected) / expected;
  }
  const double crit = boost::math::quantile(boost::math::chi_squared(34), 0.999);
  EXPECT_LT(chi2, crit);
}

TEST(SubsetProbability, NormalizedWithRatioBound) {
  for (uint32_t k : {6u, 8u, 10u}) {
    const Dictionary dict = UnitDictionary(k, 12, k);
    for (uint32_t m : {1u, 2u, 3u}) {
      for (double eps : {0.0, 0.5, 2.0}) {
        const LdpConfig cfg = Config(dict, m, eps);
        const uint64_t outputs = BinomialCount(k, m);
        for (uint32_t v = 0; v < k; ++v) {
          double sum = 0.0;
          for (uint64_t z = 0; z < outputs; ++z) sum += SubsetProbability(UnrankSubset(z, m), v, cfg);
          EXPECT_NEAR(sum, 1.0, 1e-12);
        }
        for (uint64_t z = 0; z < outputs; ++z) {
          const auto subset = UnrankSubset(z, m);
          double lo = std::numeric_limits<double>::infinity(), hi = -lo;
          for (uint32_t v = 0; v < k; ++v) {
            lo = std::min(lo, LogSubsetProbability(subset, v, cfg));
            hi = std::max(hi, LogSubsetProbability(subset, v, cfg));
          }
          EXPECT_LE(hi - lo, eps + 1e-12);
        }
      }
    }
  }
  const Dictionary six = UnitDictionary(6, 4, 1);
  const LdpConfig uniform = Config(six, 1, 0.0);
  for (uint32_t z = 0; z < 6; ++z) EXPECT_NEAR(SubsetProbability(std::vector<uint32_t>{z}, 0, uniform), 1.0 / 6, 1e-15);
}

TEST(SubsetRank, ColexBijection) {
  for (uint32_t m : {1u, 2u, 3u}) {
    const uint64_t outputs = BinomialCount(9, m);
    for (uint64_t r = 0; r < outputs; ++r) {
      const auto s = UnrankSubset(r, m);
      ASSERT_TRUE(std::is_sorted(s.begin(), s.end()));
      EXPECT_LT(s.back(), 9u);
      EXPECT_EQ(RankSubset(s), r);
    }
  }
  EXPECT_EQ(BinomialCount(64, 2), 2016u);
  EXPECT_EQ(BinomialCount(10, 0), 1u);
  EXPECT_EQ(BinomialCount(3, 5), 0u);
}

TEST(Privatize, SharedNearestNeighbourGivesSameOutput) {
  const Dictionary dict = UnitDictionary(50, 16, 4);
  const LdpConfig cfg = Config(dict, 4, 2.0);
  CounterRng noise(5, 0);
  for (int i = 0; i < 200; ++i) {
    const size_t w = static_cast<size_t>(i % 50);
    const Vec a = dict.entry(w) + 1e-4 * NormalVector(noise, 16);
    const Vec b = dict.entry(w) - 1e-4 * NormalVector(noise, 16);
    ASSERT_EQ(Nearest(dict, a).index, Nearest(dict, b).index);
    CounterRng r1(100 + static_cast<uint64_t>(i), 0), r2(100 + static_cast<uint64_t>(i), 0);
    const auto fa = Privatize(a, cfg, r1);
    const auto fb = Privatize(b, cfg, r2);
    EXPECT_EQ(fa, fb);
    EXPECT_EQ(fa.indices.size(), 4u);
  }
}

TEST(Privatize, Errors) {
  LdpConfig cfg;
  EXPECT_TRUE(ThrowsCode([&] { BernoulliP(cfg); }, ErrorCode::kEmptyDictionary));
  const Dictionary dict = UnitDictionary(5, 4, 6);
  cfg = Config(dict, 6, 1.0);
  EXPECT_TRUE(ThrowsCode([&] { BernoulliP(cfg); }, ErrorCode::kInvalidArgument));
  cfg.m = 2;
  CounterRng rng(1, 1);
  EXPECT_TRUE(ThrowsCode([&] { Privatize(Vec::Zero(3), cfg, rng); }, ErrorCode::kDimensionMismatch));
}

TEST(VerifyLdp, PassesForMechanism) {
  const Dictionary dict = UnitDictionary(6, 8, 8);
  LdpConfig cfg = Config(dict, 2, 1.0);
  cfg.rng_seed = 3;
  const LdpVerdict v = VerifyLdp(cfg, 100000);
  EXPECT_TRUE(v.pass);
  EXPECT_EQ(v.outputs, 15u);
  for (bool s : v.scenario_pass) EXPECT_TRUE(s);
  EXPECT_LT(v.worst_ratio, std::exp(1.0) * 1.1);
  EXPECT_NEAR(v.inclusion_rate, v.inclusion_expected, 0.005);
}

TEST(VerifyLdp, ZeroBudgetIsInputIndependent) {
  const Dictionary dict = UnitDictionary(6, 8, 9);
  LdpConfig cfg = Config(dict, 1, 0.0);
  const LdpVerdict v = VerifyLdp(cfg, 100000);
  EXPECT_TRUE(v.pass);
  EXPECT_LE(v.max_tv, v.tv_slack);
  EXPECT_LT(v.max_tv, 0.02);
}

TEST(VerifyLdp, CatchesBrokenSamplers) {
  const Dictionary dict = UnitDictionary(6, 8, 10);
  const LdpConfig cfg = Config(dict, 1, 1.0);
  // Deterministic release of the word: infinite ratio.
  const LdpVerdict det = VerifyLdp(cfg, 20000, [](uint32_t word, CounterRng&) { return std::vector<uint32_t>{word}; });
  EXPECT_FALSE(det.pass);
  EXPECT_TRUE(std::isinf(det.worst_ratio));
  // Spends twice the budget: ratio e^2 against a bound of e.
  const double p2 = BernoulliP(PrivacyBudget::Finite(2.0), 1, 6);
  const LdpVerdict twice = VerifyLdp(cfg, 100000, [p2](uint32_t word, CounterRng& rng) {
    return SampleSubset(word, 1, 6, p2, rng);
  });
  EXPECT_FALSE(twice.pass);
  EXPECT_FALSE(twice.ratio_test_pass);
  EXPECT_GT(twice.worst_ratio, std::exp(1.5));
}

TEST(VerifyLdp, DomainTooLarge) {
  const Dictionary dict = UnitDictionary(200, 4, 11);
  const LdpConfig cfg = Config(dict, 3, 1.0);
  EXPECT_TRUE(ThrowsCode([&] { VerifyLdp(cfg, 10); }, ErrorCode::kDomainTooLarge));
}

TEST(PrivatizedCodec, RoundTripAndCorruption) {
  PrivatizedFeature f;
  f.keypoint = Eigen::Vector2d(12.5, -3.25);
  f.indices = {1, 9, 400};
  const Bytes bytes = EncodePrivatized(f);
  EXPECT_EQ(bytes.size(), 4u + 2 + 4 + 8 + 12);
  EXPECT_EQ(DecodePrivatized(bytes), f);
  PrivatizedFeature bare;
  bare.indices = {7};
  EXPECT_EQ(DecodePrivatized(EncodePrivatized(bare)), bare);

  Bytes magic = bytes;
  magic[3] = '?';
  EXPECT_TRUE(ThrowsCode([&] { DecodePrivatized(magic); }, ErrorCode::kCorruptFile));
  Bytes version = bytes;
  version[4] = 2;
  EXPECT_TRUE(ThrowsCode([&] { DecodePrivatized(version); }, ErrorCode::kVersionUnsupported));
  Bytes truncated(bytes.begin(), bytes.end() - 1);
  EXPECT_TRUE(ThrowsCode([&] { DecodePrivatized(truncated); }, ErrorCode::kCorruptFile));
  PrivatizedFeature dup;
  dup.indices = {4, 4};
  EXPECT_TRUE(ThrowsCode([&] { DecodePrivatized(EncodePrivatized(dup)); }, ErrorCode::kCorruptFile));
}

}  // namespace
}  // namespace ldpfeat
