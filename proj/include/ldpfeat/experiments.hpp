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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ldpfeat/attacks.hpp"
#include "ldpfeat/common.hpp"
#include "ldpfeat/corpus.hpp"
#include "ldpfeat/dictionary.hpp"
#include "ldpfeat/ldp.hpp"
#include "ldpfeat/lifting.hpp"
#include "ldpfeat/matching.hpp"
#include "ldpfeat/parallel.hpp"

namespace ldpfeat {

inline double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// Nearest-rank quantile, q in [0, 1].
inline double Quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

// Re-throws a module error with the trial that produced it.
template <typename Body>
void RunTrials(size_t trials, Body&& body) {
  ParallelFor(trials, [&](size_t t) {
    try {
      body(t);
    } catch (const Error& e) {
      throw Error(e.code(), "trial " + std::to_string(t) + ": " + e.message());
    }
  });
}

// ---------------------------------------------------------------------------
// Database attack on planted hybrid liftings.

struct DbAttackParams {
  SyntheticCorpusSpec corpus;  // corpus.size is |W|
  int m = 2;
  uint32_t partitions = 1;
  size_t v_size = 64;
  size_t u_size = 8;
  size_t trials = 100;
  uint64_t seed = 0;
};

struct DbAttackTrial {
  bool exact = false;
  double cosine = 0.0;
  double baseline_cosine = 0.0;
  double adversarial_error = 0.0;
};

struct DbAttackResult {
  double exact_adversarial_recovery = 0.0;
  // Fraction of trials whose estimate beats the best random dictionary entry.
  double recovery_rate = 0.0;
  double median_cosine = 0.0;
  double median_baseline_cosine = 0.0;
  std::vector<DbAttackTrial> per_trial;
};

inline DbAttackResult RunDbAttack(const DbAttackParams& p) {
  Require(p.trials >= 1, ErrorCode::kInvalidArgument, "trial count must be at least 1");
  const Dictionary db(GenerateCorpus(p.corpus, p.seed), Metric::kEuclidean);
  SyntheticCorpusSpec qspec = p.corpus;
  qspec.size = p.trials;
  const Mat queries = GenerateCorpus(qspec, p.seed, p.corpus.size);
  const CounterRng master(p.seed, 0x64626174ULL);
  DbAttackResult res;
  res.per_trial.resize(p.trials);
  RunTrials(p.trials, [&](size_t t) {
    CounterRng rng = master.Split(t);
    LiftingConfig lc;
    lc.m = p.m;
    lc.database = &db;
    lc.partitions = p.partitions;
    lc.rng_seed = rng();
    const Vec d = queries.col(static_cast<Eigen::Index>(t));
    const LiftingRecord rec = Reparameterize(Lift(d, lc), rng());
    DatabaseAttackConfig ac{&db, p.m, p.v_size, p.u_size};
    const AttackEstimate est = DatabaseAttack(StripGroundTruth(rec), ac);

    DbAttackTrial& row = res.per_trial[t];
    std::vector<uint32_t> want = rec.adversarial_indices, got = est.recovered_indices;
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    row.exact = want == got;
    for (size_t i = 0; i < est.adversarial_hats.size() && i < est.recovered_indices.size(); ++i) {
      row.adversarial_error =
          std::max(row.adversarial_error, (est.adversarial_hats[i] - db.entry(est.recovered_indices[i])).norm());
    }
    row.exact = row.exact && row.adversarial_error < kZeroDistanceTol;
    row.cosine = CosineSimilarity(est.d_hat, d);
    row.baseline_cosine = -1.0;
    for (size_t u = 0; u < p.u_size; ++u) {
      const auto idx = static_cast<size_t>(UniformIndex(rng, db.size()));
      row.baseline_cosine = std::max(row.baseline_cosine, CosineSimilarity(db.entry(idx), d));
    }
  });
  std::vector<double> cos, base;
  size_t exact = 0, beats = 0;
  for (const auto& r : res.per_trial) {
    exact += r.exact ? 1 : 0;
    beats += r.cosine > r.baseline_cosine ? 1 : 0;
    cos.push_back(r.cosine);
    base.push_back(r.baseline_cosine);
  }
  const auto n = static_cast<double>(p.trials);
  res.exact_adversarial_recovery = static_cast<double>(exact) / n;
  res.recovery_rate = static_cast<double>(beats) / n;
  res.median_cosine = Median(cos);
  res.median_baseline_cosine = Median(base);
  return res;
}

// ---------------------------------------------------------------------------
// Clustering attack with a public proxy database and auxiliary liftings.

struct ClusterAttackParams {
  SyntheticCorpusSpec corpus;  // mixture shape; size is ignored
  size_t private_size = 256;
  uint32_t partitions = 16;
  size_t public_size = 10000;
  size_t aux_count = 500;
  int m = 4;
  size_t v_size = 64;
  double intersection_tol = 1e-4;
  double collision_radius = 0.0;
  int kmeans_iters = 50;
  size_t top_n = 5;
  double ratio = 0.8;
  size_t trials = 100;
  uint64_t seed = 0;
};

struct ClusterAttackTrial {
  bool has_aux = false;
  bool correct = false;
  bool collision_free = false;
  bool intersection_ok = false;
  double cosine = 0.0;
};

struct ClusterAttackResult {
  double selection_rate = 0.0;
  double chance_rate = 0.0;
  double no_aux_rate = 0.0;
  double collision_free_rate = 0.0;
  double intersection_success_rate = 0.0;
  double median_cosine = 0.0;
  std::vector<ClusterAttackTrial> per_trial;
};

inline ClusterAttackResult RunClusterAttack(const ClusterAttackParams& p) {
  Require(p.trials >= 1, ErrorCode::kInvalidArgument, "trial count must be at least 1");
  Require(p.aux_count >= 1, ErrorCode::kInvalidArgument, "auxiliary set must be non-empty");
  const Mat means = MixtureMeans(p.corpus, p.seed);
  auto sample = [&](size_t first, size_t count) {
    return Mat(RoundToFloat(SampleMixture(p.corpus, means, p.seed, first, count)));
  };
  const Dictionary priv(sample(0, p.private_size), Metric::kEuclidean);
  const Dictionary pub(sample(p.private_size, p.public_size), Metric::kEuclidean);
  const Mat aux_points = sample(p.private_size + p.public_size, p.aux_count);
  const Mat queries = sample(p.private_size + p.public_size + p.aux_count, p.trials);

  const CounterRng master(p.seed, 0x636c7573ULL);
  auto lift = [&](const Vec& d, CounterRng& rng) {
    LiftingConfig lc;
    lc.m = p.m;
    lc.database = &priv;
    lc.partitions = p.partitions;
    lc.rng_seed = rng();
    LiftingRecord rec = Lift(d, lc);
    LiftingRecord rep = Reparameterize(rec, rng());
    return std::make_pair(std::move(rec), std::move(rep));
  };
  std::vector<AffineSubspace> aux(p.aux_count);
  RunTrials(p.aux_count, [&](size_t j) {
    CounterRng rng = master.Split(1000000007ULL + j);
    aux[j] = lift(aux_points.col(static_cast<Eigen::Index>(j)), rng).second.subspace;
  });

  ClusterAttackConfig cc;
  cc.public_db = &pub;
  cc.aux_subspaces = &aux;
  cc.m = p.m;
  cc.v_size = p.v_size;
  cc.intersection_tol = p.intersection_tol;
  cc.collision_radius = p.collision_radius;
  cc.kmeans_iters = p.kmeans_iters;

  ClusterAttackResult res;
  res.per_trial.resize(p.trials);
  RunTrials(p.trials, [&](size_t t) {
    CounterRng rng = master.Split(t);
    const Vec d = queries.col(static_cast<Eigen::Index>(t));
    const auto [rec, rep] = lift(d, rng);
    ClusterAttackTrial& row = res.per_trial[t];
    row.collision_free = CollisionRate({rec}, cc) == 1.0;
    row.intersection_ok = IntersectionMatches(rec, priv, p.top_n, p.ratio);
    ClusterAttackConfig local = cc;
    local.seed = rng();
    AttackEstimate est;
    try {
      est = ClusterAttack(StripGroundTruth(rep), local);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoIntersectingAux) throw;
      return;
    }
    row.has_aux = true;
    size_t nearest = 0;
    for (size_t i = 1; i < est.candidate_scores.size(); ++i) {
      if ((est.candidate_scores[i].descriptor - d).norm() < (est.candidate_scores[nearest].descriptor - d).norm()) {
        nearest = i;
      }
    }
    row.correct = nearest == est.selected;
    row.cosine = CosineSimilarity(est.d_hat, d);
  });
  size_t correct = 0, no_aux = 0, clean = 0, inter = 0;
  std::vector<double> cos;
  for (const auto& r : res.per_trial) {
    correct += r.correct ? 1 : 0;
    no_aux += r.has_aux ? 0 : 1;
    clean += r.collision_free ? 1 : 0;
    inter += r.intersection_ok ? 1 : 0;
    if (r.has_aux) cos.push_back(r.cosine);
  }
  const auto n = static_cast<double>(p.trials);
  res.selection_rate = static_cast<double>(correct) / n;
  res.chance_rate = 1.0 / static_cast<double>(p.m / 2 + 1);
  res.no_aux_rate = static_cast<double>(no_aux) / n;
  res.collision_free_rate = static_cast<double>(clean) / n;
  res.intersection_success_rate = static_cast<double>(inter) / n;
  res.median_cosine = Median(cos);
  return res;
}

// ---------------------------------------------------------------------------
// Statistical verification of the subset mechanism on a small random domain.

struct LdpVerifyParams {
  uint64_t domain_size = 6;
  uint32_t m = 2;
  PrivacyBudget epsilon = PrivacyBudget::Finite(1.0);
  uint64_t trials = 100000;
  Eigen::Index n = 8;
  uint64_t seed = 0;
};

// Random unit vectors in n dimensions, one per domain element.
inline Dictionary RandomDomain(uint64_t size, Eigen::Index n, uint64_t seed) {
  CounterRng rng(seed, 0x646f6dULL);
  Mat e(n, static_cast<Eigen::Index>(size));
  for (Eigen::Index i = 0; i < e.cols(); ++i) e.col(i) = NormalVector(rng, n).normalized();
  return Dictionary(e, Metric::kEuclidean);
}

inline LdpVerdict RunLdpVerify(const LdpVerifyParams& p) {
  const Dictionary dict = RandomDomain(p.domain_size, p.n, p.seed);
  LdpConfig cfg;
  cfg.epsilon = p.epsilon;
  cfg.m = p.m;
  cfg.dictionary = &dict;
  cfg.rng_seed = p.seed;
  return VerifyLdp(cfg, p.trials);
}

// ---------------------------------------------------------------------------
// Matching utility of privatized features on synthetic scenes.

struct LdpUtilityParams {
  SyntheticCorpusSpec corpus;  // mixture shape; size is ignored
  size_t pool_size = 4000;
  size_t dict_train_size = 20000;
  size_t k = 256;
  int kmeans_iters = 25;
  PrivacyBudget epsilon = PrivacyBudget::Finite(4.0);
  uint32_t m = 4;
  UtilityParams utility;
};

struct LdpUtilityData {
  Mat pool;
  Dictionary dictionary;
};

inline LdpUtilityData PrepareUtilityData(const LdpUtilityParams& p, uint64_t seed) {
  const Mat means = MixtureMeans(p.corpus, seed);
  LdpUtilityData data;
  data.pool = RoundToFloat(SampleMixture(p.corpus, means, seed, 0, p.pool_size));
  const Mat train = RoundToFloat(SampleMixture(p.corpus, means, seed, p.pool_size, p.dict_train_size));
  data.dictionary = BuildSphericalKMeans(train, p.k, p.kmeans_iters, seed).dictionary;
  return data;
}

inline UtilityMetrics RunLdpUtility(const LdpUtilityParams& p, const LdpUtilityData& data) {
  LdpConfig cfg;
  cfg.epsilon = p.epsilon;
  cfg.m = p.m;
  cfg.dictionary = &data.dictionary;
  return UtilityReport(data.pool, cfg, p.utility);
}

// ---------------------------------------------------------------------------
// Kernel throughput.

struct BenchParams {
  std::vector<size_t> domain_sizes{65536, 262144, 1048576};
  Eigen::Index n = 128;
  int subspace_dim = 16;
  size_t repetitions = 10;
  size_t projections_per_rep = 1000;
  size_t queries_per_rep = 4;
  uint32_t m = 16;
  double epsilon = 10.0;
  uint64_t seed = 0;
};

struct BenchRow {
  std::string kernel;
  size_t domain_size = 0;
  size_t ops_per_rep = 0;
  double median_s = 0.0;
  double p95_s = 0.0;
  double ops_per_sec = 0.0;
};

template <typename Fn>
BenchRow TimeKernel(std::string kernel, size_t domain_size, size_t ops, size_t reps, Fn&& fn) {
  std::vector<double> secs;
  for (size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    secs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  BenchRow row{std::move(kernel), domain_size, ops, Median(secs), Quantile(secs, 0.95), 0.0};
  row.ops_per_sec = row.median_s > 0.0 ? static_cast<double>(ops) / row.median_s : 0.0;
  return row;
}

inline std::vector<BenchRow> RunBench(const BenchParams& p) {
  Require(p.repetitions >= 10, ErrorCode::kInvalidArgument, "bench needs at least 10 repetitions");
  Require(p.subspace_dim >= 1 && p.subspace_dim < p.n, ErrorCode::kInvalidArgument, "bad subspace dimension");
  CounterRng rng(p.seed, 0x62656e6368ULL);
  std::vector<BenchRow> rows;
  {
    std::vector<Vec> dirs;
    for (int i = 0; i < p.subspace_dim; ++i) dirs.push_back(NormalVector(rng, p.n));
    const AffineSubspace s(NormalVector(rng, p.n), dirs);
    Mat pts(p.n, static_cast<Eigen::Index>(p.projections_per_rep));
    for (Eigen::Index i = 0; i < pts.cols(); ++i) pts.col(i) = NormalVector(rng, p.n);
    volatile double sink = 0.0;
    rows.push_back(TimeKernel("project", 0, p.projections_per_rep, p.repetitions, [&] {
      for (Eigen::Index i = 0; i < pts.cols(); ++i) sink = sink + Project(s, pts.col(i))[0];
    }));
  }
  for (size_t k : p.domain_sizes) {
    const Dictionary dict = RandomDomain(k, p.n, p.seed + k);
    Mat queries(p.n, static_cast<Eigen::Index>(p.queries_per_rep));
    for (Eigen::Index i = 0; i < queries.cols(); ++i) queries.col(i) = NormalVector(rng, p.n);
    volatile uint32_t sink = 0;
    rows.push_back(TimeKernel("nn_scan", k, p.queries_per_rep, p.repetitions, [&] {
      for (Eigen::Index i = 0; i < queries.cols(); ++i) sink = sink + Nearest(dict, queries.col(i)).index;
    }));
    LdpConfig cfg;
    cfg.epsilon = PrivacyBudget::Finite(p.epsilon);
    cfg.m = std::min<uint32_t>(p.m, static_cast<uint32_t>(k));
    cfg.dictionary = &dict;
    CounterRng prng = rng.Split(k);
    rows.push_back(TimeKernel("privatize", k, p.queries_per_rep, p.repetitions, [&] {
      for (Eigen::Index i = 0; i < queries.cols(); ++i) sink = sink + Privatize(queries.col(i), cfg, prng).indices[0];
    }));
  }
  return rows;
}

}  // namespace ldpfeat
