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
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "ldpfeat/common.hpp"
#include "ldpfeat/dictionary.hpp"
#include "ldpfeat/geometry.hpp"
#include "ldpfeat/io.hpp"
#include "ldpfeat/parallel.hpp"
#include "ldpfeat/rng.hpp"

namespace ldpfeat {

// Privacy budget. Infinity is an explicit flag (nearest-neighbour-only mode),
// never a float fed into the formulas.
class PrivacyBudget {
 public:
  static PrivacyBudget Finite(double epsilon) {
    Require(std::isfinite(epsilon) && epsilon >= 0.0, ErrorCode::kInvalidArgument,
            "epsilon must be finite and non-negative");
    PrivacyBudget b;
    b.epsilon_ = epsilon;
    return b;
  }
  static PrivacyBudget Infinite() {
    PrivacyBudget b;
    b.infinite_ = true;
    return b;
  }

  bool infinite() const { return infinite_; }
  double epsilon() const {
    Require(!infinite_, ErrorCode::kInvalidArgument, "infinite budget has no finite epsilon");
    return epsilon_;
  }
  // Outside [0.01, 10] is allowed but worth flagging to the caller.
  bool in_typical_range() const { return !infinite_ && epsilon_ >= 0.01 && epsilon_ <= 10.0; }
  std::string ToString() const { return infinite_ ? "inf" : std::to_string(epsilon_); }

 private:
  double epsilon_ = 0.0;
  bool infinite_ = false;
};

struct LdpConfig {
  PrivacyBudget epsilon = PrivacyBudget::Finite(1.0);
  uint32_t m = 1;
  const Dictionary* dictionary = nullptr;
  uint64_t rng_seed = 0;

  uint64_t domain_size() const { return dictionary != nullptr ? dictionary->size() : 0; }

  void Validate() const {
    Require(dictionary != nullptr && dictionary->size() > 0, ErrorCode::kEmptyDictionary,
            "privatization needs a non-empty dictionary");
    Require(m >= 1 && m <= dictionary->size(), ErrorCode::kInvalidArgument, "subset size must be in [1, |K|]");
  }
};

namespace detail {

inline double LogAddExp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log(K - m) given log K, stable for K up to ~2^1024 and beyond.
inline double LogDomainMinus(double log_domain, double m) {
  const double frac = m * std::exp(-log_domain);
  if (frac >= 1.0) return -std::numeric_limits<double>::infinity();
  return log_domain + std::log1p(-frac);
}

inline double LogBinomial(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

// Pr(u = 1) = m e^eps / (m e^eps + |K| - m), from log |K| so symbolic domains
// such as 2^(8*128) work. Evaluated as a logistic in log space.
inline double BernoulliPFromLogDomain(PrivacyBudget budget, double m, double log_domain_size) {
  Require(m >= 1.0, ErrorCode::kInvalidArgument, "subset size must be >= 1");
  if (budget.infinite()) return 1.0;
  const double t = detail::LogDomainMinus(log_domain_size, m) - std::log(m) - budget.epsilon();
  if (t == -std::numeric_limits<double>::infinity()) return 1.0;
  if (t > 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

inline double BernoulliP(PrivacyBudget budget, uint64_t m, uint64_t domain_size) {
  Require(m >= 1 && m <= domain_size, ErrorCode::kInvalidArgument, "subset size must be in [1, |K|]");
  if (budget.infinite() || m == domain_size) return 1.0;
  const double t = std::log(static_cast<double>(domain_size - m)) - std::log(static_cast<double>(m)) -
                   budget.epsilon();
  if (t > 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

inline double BernoulliP(const LdpConfig& cfg) {
  cfg.Validate();
  return BernoulliP(cfg.epsilon, cfg.m, cfg.domain_size());
}

struct PrivatizedFeature {
  std::optional<Eigen::Vector2d> keypoint;
  // Sorted ascending, m distinct dictionary indices.
  std::vector<uint32_t> indices;

  bool operator==(const PrivatizedFeature& o) const {
    const bool kp_eq = keypoint.has_value() == o.keypoint.has_value() &&
                       (!keypoint.has_value() || *keypoint == *o.keypoint);
    return kp_eq && indices == o.indices;
  }
};

// omega-subset mechanism on an already quantized index: draw u ~ Bernoulli(p),
// then m - u indices uniformly from K \ {word}, then add the word if u = 1.
template <typename Rng>
std::vector<uint32_t> SampleSubset(uint32_t word, uint32_t m, uint64_t domain_size, double p, Rng& rng) {
  Require(word < domain_size, ErrorCode::kInvalidArgument, "word index out of range");
  const bool include = Bernoulli(rng, p);
  const uint64_t draws = m - (include ? 1u : 0u);
  std::vector<uint32_t> out;
  out.reserve(m);
  // Slot s of the virtual array K \ {word} holds s, or s + 1 past the word.
  for (uint64_t s : SampleWithoutReplacement(rng, domain_size - 1, draws)) {
    out.push_back(static_cast<uint32_t>(s >= word ? s + 1 : s));
  }
  if (include) out.push_back(word);
  std::sort(out.begin(), out.end());
  return out;
}

template <typename Rng>
PrivatizedFeature Privatize(const Eigen::Ref<const Vec>& d, const LdpConfig& cfg, Rng& rng,
                            std::optional<Eigen::Vector2d> keypoint = std::nullopt) {
  cfg.Validate();
  const Neighbor nn = Nearest(*cfg.dictionary, d);
  PrivatizedFeature out;
  out.keypoint = keypoint;
  out.indices = SampleSubset(nn.index, cfg.m, cfg.domain_size(), BernoulliP(cfg), rng);
  return out;
}

// Production entry point: draws from the kernel CSPRNG.
inline PrivatizedFeature Privatize(const Eigen::Ref<const Vec>& d, const LdpConfig& cfg,
                                   std::optional<Eigen::Vector2d> keypoint = std::nullopt) {
  thread_local SecureRng rng;
  return Privatize(d, cfg, rng, keypoint);
}

// log Pr(Z | v) for the omega-subset mechanism, normalized over all C(|K|, m)
// subsets: |K| e^eps / ((m e^eps + |K| - m) C(|K|, m)) when v in Z, and
// |K| / ((m e^eps + |K| - m) C(|K|, m)) otherwise.
inline double LogSubsetProbability(std::span<const uint32_t> subset, uint32_t v, const LdpConfig& cfg) {
  cfg.Validate();
  const uint64_t domain = cfg.domain_size();
  Require(subset.size() == cfg.m, ErrorCode::kInvalidArgument, "subset must have exactly m indices");
  Require(v < domain, ErrorCode::kInvalidArgument, "value index out of range");
  std::vector<uint32_t> sorted(subset.begin(), subset.end());
  std::sort(sorted.begin(), sorted.end());
  Require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorCode::kInvalidArgument,
          "subset indices must be distinct");
  Require(sorted.back() < domain, ErrorCode::kInvalidArgument, "subset index out of range");
  const bool contains = std::binary_search(sorted.begin(), sorted.end(), v);
  const auto k = static_cast<double>(domain);
  const auto m = static_cast<double>(cfg.m);
  if (cfg.epsilon.infinite()) {
    if (!contains) return -std::numeric_limits<double>::infinity();
    return -detail::LogBinomial(k - 1.0, m - 1.0);
  }
  const double eps = cfg.epsilon.epsilon();
  const double log_norm = detail::LogAddExp(eps + std::log(m), domain > cfg.m ? std::log(k - m)
                                                                              : -std::numeric_limits<double>::infinity());
  return std::log(k) + (contains ? eps : 0.0) - log_norm - detail::LogBinomial(k, m);
}

inline double SubsetProbability(std::span<const uint32_t> subset, uint32_t v, const LdpConfig& cfg) {
  return std::exp(LogSubsetProbability(subset, v, cfg));
}

// Colexicographic rank of a sorted m-subset of [0, |K|): sum of C(z_i, i + 1).
inline uint64_t RankSubset(std::span<const uint32_t> sorted_subset) {
  uint64_t rank = 0;
  for (size_t i = 0; i < sorted_subset.size(); ++i) {
    const uint64_t n = sorted_subset[i];
    const uint64_t k = i + 1;
    if (n < k) continue;
    uint64_t c = 1;
    for (uint64_t j = 1; j <= k; ++j) c = c * (n - k + j) / j;
    rank += c;
  }
  return rank;
}

inline std::vector<uint32_t> UnrankSubset(uint64_t rank, uint32_t m) {
  std::vector<uint32_t> out(m);
  for (uint32_t i = m; i-- > 0;) {
    const uint64_t k = i + 1;
    // Largest n with C(n, k) <= rank.
    uint64_t n = k - 1;
    auto binom = [k](uint64_t nn) {
      if (nn < k) return uint64_t{0};
      uint64_t c = 1;
      for (uint64_t j = 1; j <= k; ++j) c = c * (nn - k + j) / j;
      return c;
    };
    while (binom(n + 1) <= rank) ++n;
    rank -= binom(n);
    out[i] = static_cast<uint32_t>(n);
  }
  return out;
}

inline uint64_t BinomialCount(uint64_t n, uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 c = 1;
  for (uint64_t j = 1; j <= k; ++j) {
    c = c * (n - k + j) / j;
    if (c > std::numeric_limits<uint64_t>::max()) return std::numeric_limits<uint64_t>::max();
  }
  return static_cast<uint64_t>(c);
}

inline constexpr uint64_t kMaxVerifiableOutputs = 10000;

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};

inline WilsonInterval Wilson(uint64_t successes, uint64_t trials, double z) {
  const auto n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct LdpVerdict {
  bool pass = false;
  // max over cells of max_x P[Z|x] / min_x P[Z|x] (empirical); infinite if some input never emits Z.
  double worst_ratio = 0.0;
  double bound = 0.0;
  // Scenarios {v1 in Z1, v2 in Z2}, {out, in}, {in, out}, {out, out}.
  std::array<bool, 4> scenario_pass{};
  bool ratio_test_pass = false;
  double max_tv = 0.0;
  double tv_slack = 0.0;
  double inclusion_rate = 0.0;
  double inclusion_expected = 0.0;
  uint64_t trials = 0;
  uint64_t outputs = 0;
  double z = 0.0;
};

// Empirical epsilon-LDP check over a small enumerable domain. Every dictionary
// entry is used as a raw input; `sampler(word, rng)` produces one output subset.
// Cells use 99% Wilson intervals with Bonferroni correction over all
// (input, subset) cells. A violation is a subset Z with
// max_x lower(Z|x) > e^eps * min_x upper(Z|x).
template <typename Sampler>
LdpVerdict VerifyLdp(const LdpConfig& cfg, uint64_t trials, Sampler&& sampler) {
  cfg.Validate();
  Require(trials >= 1, ErrorCode::kInvalidArgument, "verify_ldp needs trials");
  const uint64_t domain = cfg.domain_size();
  const uint64_t outputs = BinomialCount(domain, cfg.m);
  if (outputs > kMaxVerifiableOutputs) {
    throw Error(ErrorCode::kDomainTooLarge,
                "C(|K|, m) = " + std::to_string(outputs) + " exceeds " + std::to_string(kMaxVerifiableOutputs));
  }
  const Dictionary& dict = *cfg.dictionary;
  std::vector<std::vector<uint32_t>> counts(domain, std::vector<uint32_t>(outputs, 0));
  const CounterRng master(cfg.rng_seed, 0x7665726966ULL);
  ParallelFor(domain, [&](size_t x) {
    const uint32_t word = Nearest(dict, dict.entry(x)).index;
    CounterRng rng = master.Split(x);
    auto& row = counts[x];
    for (uint64_t t = 0; t < trials; ++t) {
      std::vector<uint32_t> z = sampler(word, rng);
      std::sort(z.begin(), z.end());
      ++row[RankSubset(z)];
    }
  });

  LdpVerdict v;
  v.trials = trials;
  v.outputs = outputs;
  v.bound = cfg.epsilon.infinite() ? std::numeric_limits<double>::infinity() : std::exp(cfg.epsilon.epsilon());
  const double cells = static_cast<double>(domain) * static_cast<double>(outputs);
  const double alpha = 0.01 / cells;
  v.z = boost::math::quantile(boost::math::complement(boost::math::normal(), alpha / 2.0));

  bool ratio_ok = true;
  bool in_ok = true;
  bool out_ok = true;
  uint64_t included = 0;
  double worst = 0.0;
  for (uint64_t z = 0; z < outputs; ++z) {
    const std::vector<uint32_t> subset = UnrankSubset(z, cfg.m);
    double max_lo = 0.0, min_hi = 1.0, max_p = 0.0, min_p = 1.0, max_half = 0.0;
    for (uint64_t x = 0; x < domain; ++x) {
      const uint64_t c = counts[x][z];
      const WilsonInterval w = Wilson(c, trials, v.z);
      max_lo = std::max(max_lo, w.lo);
      min_hi = std::min(min_hi, w.hi);
      const double p = static_cast<double>(c) / static_cast<double>(trials);
      max_p = std::max(max_p, p);
      min_p = std::min(min_p, p);
      max_half = std::max(max_half, 0.5 * (w.hi - w.lo));
      const uint32_t word = static_cast<uint32_t>(x);
      const bool contains = std::binary_search(subset.begin(), subset.end(), word);
      if (contains) included += c;
      const double expected = SubsetProbability(subset, word, cfg);
      if (expected < w.lo || expected > w.hi) (contains ? in_ok : out_ok) = false;
    }
    v.tv_slack += max_half;
    if (max_p > 0.0) worst = std::max(worst, min_p > 0.0 ? max_p / min_p : std::numeric_limits<double>::infinity());
    if (max_lo > v.bound * min_hi) ratio_ok = false;
  }
  v.worst_ratio = worst;
  v.ratio_test_pass = ratio_ok;
  v.inclusion_rate = static_cast<double>(included) / (static_cast<double>(trials) * static_cast<double>(domain));
  v.inclusion_expected = BernoulliP(cfg);

  for (uint64_t a = 0; a < domain; ++a) {
    for (uint64_t b = a + 1; b < domain; ++b) {
      double tv = 0.0;
      for (uint64_t z = 0; z < outputs; ++z) {
        tv += std::abs(static_cast<double>(counts[a][z]) - static_cast<double>(counts[b][z]));
      }
      v.max_tv = std::max(v.max_tv, 0.5 * tv / static_cast<double>(trials));
    }
  }

  // Closed-form case ratios are 1, e^-eps, e^eps, 1; each scenario also needs
  // the cells it involves to agree with the closed form.
  v.scenario_pass = {in_ok, in_ok && out_ok, in_ok && out_ok, out_ok};
  v.pass = ratio_ok && in_ok && out_ok;
  return v;
}

inline LdpVerdict VerifyLdp(const LdpConfig& cfg, uint64_t trials) {
  const double p = BernoulliP(cfg);
  const uint64_t domain = cfg.domain_size();
  const uint32_t m = cfg.m;
  return VerifyLdp(cfg, trials, [p, domain, m](uint32_t word, CounterRng& rng) {
    return SampleSubset(word, m, domain, p, rng);
  });
}

inline constexpr uint16_t kPrivatizedVersion = 1;

// LDPZ: magic, u16 version, u32 m, f32 x, f32 y (NaN when absent), m x u32 indices.
inline void EncodePrivatized(const PrivatizedFeature& f, ByteWriter& w) {
  w.Magic("LDPZ");
  w.U16(kPrivatizedVersion);
  w.U32(static_cast<uint32_t>(f.indices.size()));
  const float nan = std::numeric_limits<float>::quiet_NaN();
  w.F32(f.keypoint ? static_cast<float>(f.keypoint->x()) : nan);
  w.F32(f.keypoint ? static_cast<float>(f.keypoint->y()) : nan);
  for (uint32_t i : f.indices) w.U32(i);
}

inline Bytes EncodePrivatized(const PrivatizedFeature& f) {
  ByteWriter w;
  EncodePrivatized(f, w);
  return w.Take();
}

inline PrivatizedFeature DecodePrivatized(ByteReader& r) {
  r.ExpectMagic("LDPZ");
  const uint16_t version = r.U16();
  if (version != kPrivatizedVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "LDPZ version " + std::to_string(version));
  }
  const uint32_t m = r.U32();
  Require(m >= 1, ErrorCode::kCorruptFile, "LDPZ record with empty subset");
  const float x = r.F32();
  const float y = r.F32();
  r.Need(static_cast<size_t>(m) * 4);
  PrivatizedFeature f;
  if (!std::isnan(x) || !std::isnan(y)) {
    Require(!std::isnan(x) && !std::isnan(y), ErrorCode::kCorruptFile, "half-present keypoint");
    f.keypoint = Eigen::Vector2d(x, y);
  }
  f.indices.resize(m);
  for (uint32_t i = 0; i < m; ++i) f.indices[i] = r.U32();
  std::vector<uint32_t> sorted = f.indices;
  std::sort(sorted.begin(), sorted.end());
  Require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorCode::kCorruptFile,
          "duplicate indices in LDPZ record");
  return f;
}

inline PrivatizedFeature DecodePrivatized(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  PrivatizedFeature f = DecodePrivatized(r);
  Require(r.remaining() == 0, ErrorCode::kCorruptFile, "trailing bytes after LDPZ record");
  return f;
}

// A privatized-feature file is a concatenation of LDPZ records.
inline void SavePrivatized(const std::vector<PrivatizedFeature>& features, const std::filesystem::path& path) {
  ByteWriter w;
  for (const auto& f : features) EncodePrivatized(f, w);
  WriteFileAtomic(path, w.bytes());
}

inline std::vector<PrivatizedFeature> LoadPrivatized(const std::filesystem::path& path) {
  const Bytes bytes = ReadFileBytes(path);
  ByteReader r(bytes);
  std::vector<PrivatizedFeature> out;
  while (r.remaining() > 0) out.push_back(DecodePrivatized(r));
  return out;
}

}  // namespace ldpfeat
