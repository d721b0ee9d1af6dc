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
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "ldpfeat/common.hpp"
#include "ldpfeat/dictionary.hpp"
#include "ldpfeat/geometry.hpp"
#include "ldpfeat/lifting.hpp"
#include "ldpfeat/rng.hpp"

namespace ldpfeat {

// Distances at or below this separate exact intersections from near neighbours.
inline constexpr double kZeroDistanceTol = 1e-6;
// Inverse-distance weights clamp distances to this floor.
inline constexpr double kMinWeightDistance = 1e-12;

struct DatabaseAttackConfig {
  const Dictionary* database = nullptr;
  int m = 2;
  size_t v_size = 64;
  size_t u_size = 8;
};

struct ClusterAttackConfig {
  const Dictionary* public_db = nullptr;
  const std::vector<AffineSubspace>* aux_subspaces = nullptr;
  int m = 2;
  size_t v_size = 64;
  double intersection_tol = 1e-4;
  // Radius around the true descriptor that counts as a collision in
  // CollisionRate; 0 falls back to intersection_tol.
  double collision_radius = 0.0;
  int kmeans_iters = 50;
  uint64_t seed = 0;
};

struct ScoredCandidate {
  Vec descriptor;
  double score = 0.0;
};

struct AttackEstimate {
  Vec d_hat;
  std::vector<Vec> adversarial_hats;
  std::vector<ScoredCandidate> candidate_scores;
  // Database indices identified as adversarial samples (database attack only).
  std::vector<uint32_t> recovered_indices;
  // Index of d_hat within candidate_scores.
  size_t selected = 0;
};

namespace detail {

// Inverse-distance weighted mean of `members`, projected onto D.
inline Vec WeightedProjectedMean(const AffineSubspace& subspace, const std::vector<Vec>& members,
                                 const std::vector<double>& distances) {
  Vec sum = Vec::Zero(subspace.ambient_dim());
  double alpha = 0.0;
  for (size_t i = 0; i < members.size(); ++i) {
    const double w = 1.0 / std::max(distances[i], kMinWeightDistance);
    sum += w * members[i];
    alpha += w;
  }
  return Project(subspace, sum / alpha);
}

}  // namespace detail

// Database attack: the m/2 entries nearest to D are the adversarial samples;
// the concealed descriptor is estimated from the remaining near neighbours
// that lie farthest from those samples.
inline AttackEstimate DatabaseAttack(const AffineSubspace& subspace, const DatabaseAttackConfig& cfg) {
  Require(cfg.database != nullptr, ErrorCode::kInvalidArgument, "database attack needs a database");
  Require(cfg.m >= 2 && cfg.m % 2 == 0, ErrorCode::kInvalidArgument, "m must be even and >= 2");
  Require(cfg.u_size >= 1 && cfg.u_size <= cfg.v_size, ErrorCode::kInvalidArgument, "need 0 < |U| <= |V|");
  const Dictionary& db = *cfg.database;
  RequireSameDim(subspace.ambient_dim(), db.dim(), "database attack");
  const std::vector<Neighbor> sorted = SortedDistancesToSubspace(db, subspace);
  const size_t half = static_cast<size_t>(cfg.m / 2);
  Require(sorted.size() > half, ErrorCode::kInsufficientNeighbors, "database smaller than m/2 + 1");

  AttackEstimate est;
  for (size_t i = 0; i < half; ++i) {
    est.recovered_indices.push_back(sorted[i].index);
    est.adversarial_hats.emplace_back(db.entry(sorted[i].index));
  }

  // More exact intersections than adversarial samples: the extra one is d itself.
  if (sorted[half].distance <= kZeroDistanceTol) {
    est.d_hat = Project(subspace, db.entry(sorted[half].index));
    est.candidate_scores.push_back({est.d_hat, 0.0});
    est.selected = 0;
    return est;
  }

  std::vector<size_t> v_positions;
  for (size_t i = half; i < sorted.size() && v_positions.size() < cfg.v_size; ++i) {
    if (sorted[i].distance > kZeroDistanceTol) v_positions.push_back(i);
  }
  if (v_positions.size() < cfg.u_size) {
    throw Error(ErrorCode::kInsufficientNeighbors, "only " + std::to_string(v_positions.size()) +
                                                       " neighbours available for |U| = " +
                                                       std::to_string(cfg.u_size));
  }
  std::vector<double> scores(v_positions.size());
  for (size_t i = 0; i < v_positions.size(); ++i) {
    const auto v = db.entry(sorted[v_positions[i]].index);
    double s = std::numeric_limits<double>::infinity();
    for (const Vec& a : est.adversarial_hats) s = std::min(s, (a - v).norm());
    scores[i] = s;
  }
  std::vector<size_t> order(v_positions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  std::vector<Vec> members;
  std::vector<double> distances;
  for (size_t r = 0; r < cfg.u_size; ++r) {
    const Neighbor& nb = sorted[v_positions[order[r]]];
    members.emplace_back(db.entry(nb.index));
    distances.push_back(nb.distance);
    est.candidate_scores.push_back({members.back(), scores[order[r]]});
  }
  est.d_hat = detail::WeightedProjectedMean(subspace, members, distances);
  est.selected = 0;
  return est;
}

struct EuclideanKMeans {
  std::vector<uint32_t> labels;
  Mat centers;
};

// Lloyd's k-means with k-means++ seeding on Euclidean distance (columns of data).
inline EuclideanKMeans KMeansEuclidean(const Mat& data, size_t k, int iters, uint64_t seed) {
  const Eigen::Index count = data.cols();
  Require(count >= 1 && k >= 1, ErrorCode::kInvalidArgument, "k-means needs data and k >= 1");
  k = std::min<size_t>(k, static_cast<size_t>(count));
  CounterRng rng(seed, 0x65756b6dULL);
  EuclideanKMeans out;
  out.centers.resize(data.rows(), static_cast<Eigen::Index>(k));
  std::vector<double> d2(static_cast<size_t>(count), std::numeric_limits<double>::infinity());
  out.centers.col(0) = data.col(static_cast<Eigen::Index>(UniformIndex(rng, static_cast<uint64_t>(count))));
  for (size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) {
      d2[static_cast<size_t>(i)] = std::min(d2[static_cast<size_t>(i)],
                                            (data.col(i) - out.centers.col(static_cast<Eigen::Index>(c - 1))).squaredNorm());
      total += d2[static_cast<size_t>(i)];
    }
    Eigen::Index pick = count - 1;
    if (total > 0.0) {
      double target = Uniform01(rng) * total;
      for (Eigen::Index i = 0; i < count; ++i) {
        target -= d2[static_cast<size_t>(i)];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    }
    out.centers.col(static_cast<Eigen::Index>(c)) = data.col(pick);
  }
  out.labels.assign(static_cast<size_t>(count), 0);
  for (int iter = 0; iter < iters; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < count; ++i) {
      uint32_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < out.centers.cols(); ++c) {
        const double dist = (data.col(i) - out.centers.col(c)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = static_cast<uint32_t>(c);
        }
      }
      if (iter == 0 || out.labels[static_cast<size_t>(i)] != best) changed = true;
      out.labels[static_cast<size_t>(i)] = best;
    }
    if (!changed) break;
    Mat sums = Mat::Zero(data.rows(), out.centers.cols());
    std::vector<size_t> members(static_cast<size_t>(out.centers.cols()), 0);
    for (Eigen::Index i = 0; i < count; ++i) {
      sums.col(out.labels[static_cast<size_t>(i)]) += data.col(i);
      ++members[out.labels[static_cast<size_t>(i)]];
    }
    for (Eigen::Index c = 0; c < out.centers.cols(); ++c) {
      if (members[static_cast<size_t>(c)] > 0) {
        out.centers.col(c) = sums.col(c) / static_cast<double>(members[static_cast<size_t>(c)]);
      }
    }
  }
  return out;
}

// Auxiliary subspaces whose distance to D is below intersection_tol.
inline std::vector<size_t> IntersectingAux(const AffineSubspace& subspace, const ClusterAttackConfig& cfg) {
  std::vector<size_t> out;
  for (size_t j = 0; j < cfg.aux_subspaces->size(); ++j) {
    if (SubspaceToSubspaceDist(subspace, (*cfg.aux_subspaces)[j]) < cfg.intersection_tol) out.push_back(j);
  }
  return out;
}

// Clustering attack: cluster the public neighbours of D into m/2 + 1 groups,
// then pick the group centre farthest from every auxiliary subspace that meets D.
inline AttackEstimate ClusterAttack(const AffineSubspace& subspace, const ClusterAttackConfig& cfg) {
  Require(cfg.public_db != nullptr && cfg.aux_subspaces != nullptr, ErrorCode::kInvalidArgument,
          "cluster attack needs a public database and auxiliary subspaces");
  Require(!cfg.aux_subspaces->empty(), ErrorCode::kInvalidArgument, "auxiliary subspace set is empty");
  Require(cfg.m >= 2 && cfg.m % 2 == 0, ErrorCode::kInvalidArgument, "m must be even and >= 2");
  Require(cfg.v_size >= 1, ErrorCode::kInvalidArgument, "|V| must be positive");
  const Dictionary& pub = *cfg.public_db;
  RequireSameDim(subspace.ambient_dim(), pub.dim(), "cluster attack");

  const std::vector<Neighbor> sorted = SortedDistancesToSubspace(pub, subspace);
  const size_t v_count = std::min(cfg.v_size, sorted.size());
  Mat v(pub.dim(), static_cast<Eigen::Index>(v_count));
  for (size_t i = 0; i < v_count; ++i) v.col(static_cast<Eigen::Index>(i)) = pub.entry(sorted[i].index);
  const size_t k = static_cast<size_t>(cfg.m / 2 + 1);
  const EuclideanKMeans km = KMeansEuclidean(v, k, cfg.kmeans_iters, cfg.seed);

  AttackEstimate est;
  std::vector<Vec> centers;
  for (Eigen::Index c = 0; c < km.centers.cols(); ++c) {
    std::vector<Vec> members;
    std::vector<double> distances;
    for (size_t i = 0; i < v_count; ++i) {
      if (km.labels[i] != static_cast<uint32_t>(c)) continue;
      members.emplace_back(v.col(static_cast<Eigen::Index>(i)));
      distances.push_back(sorted[i].distance);
    }
    if (members.empty()) continue;
    centers.push_back(detail::WeightedProjectedMean(subspace, members, distances));
  }

  const std::vector<size_t> intersecting = IntersectingAux(subspace, cfg);
  if (intersecting.empty()) {
    throw Error(ErrorCode::kNoIntersectingAux, "no auxiliary subspace intersects the attacked subspace");
  }
  size_t best = 0;
  for (size_t i = 0; i < centers.size(); ++i) {
    double s = std::numeric_limits<double>::infinity();
    for (size_t j : intersecting) s = std::min(s, PointToSubspaceDist((*cfg.aux_subspaces)[j], centers[i]));
    est.candidate_scores.push_back({centers[i], s});
    if (s > est.candidate_scores[best].score) best = i;
  }
  est.selected = best;
  est.d_hat = centers[best];
  for (size_t i = 0; i < centers.size(); ++i) {
    if (i != best) est.adversarial_hats.push_back(centers[i]);
  }
  return est;
}

// Fraction of records for which no intersecting auxiliary subspace passes
// within the collision radius of the true descriptor.
inline double CollisionRate(const std::vector<LiftingRecord>& records, const ClusterAttackConfig& cfg) {
  Require(cfg.aux_subspaces != nullptr, ErrorCode::kInvalidArgument, "collision rate needs auxiliary subspaces");
  if (records.empty()) return 0.0;
  const double radius = cfg.collision_radius > 0.0 ? cfg.collision_radius : cfg.intersection_tol;
  size_t clean = 0;
  for (const LiftingRecord& rec : records) {
    Require(rec.original.size() == rec.subspace.ambient_dim(), ErrorCode::kInvalidArgument,
            "record lacks ground truth");
    bool collided = false;
    for (size_t j : IntersectingAux(rec.subspace, cfg)) {
      if (PointToSubspaceDist((*cfg.aux_subspaces)[j], rec.original) < radius) {
        collided = true;
        break;
      }
    }
    if (!collided) ++clean;
  }
  return static_cast<double>(clean) / static_cast<double>(records.size());
}

// Whether D meets the descriptor manifold only at its m/2 + 1 forming points.
// The planted samples themselves sit at distance zero and are skipped; each of
// the next top_n entries nearest D must pass a ratio test against its nearest
// forming descriptor.
inline bool IntersectionMatches(const LiftingRecord& rec, const Dictionary& database, size_t top_n,
                                double ratio = 0.8) {
  const std::vector<Neighbor> sorted = SortedDistancesToSubspace(database, rec.subspace);
  std::vector<Vec> forming;
  forming.push_back(rec.original);
  for (uint32_t a : rec.adversarial_indices) forming.emplace_back(database.entry(a));
  size_t checked = 0;
  for (size_t t = 0; t < sorted.size() && checked < top_n; ++t) {
    if (std::find(rec.adversarial_indices.begin(), rec.adversarial_indices.end(), sorted[t].index) !=
        rec.adversarial_indices.end()) {
      continue;
    }
    ++checked;
    const auto entry = database.entry(sorted[t].index);
    double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
    for (const Vec& f : forming) {
      const double dist = (f - entry).norm();
      if (dist < d1) {
        d2 = d1;
        d1 = dist;
      } else if (dist < d2) {
        d2 = dist;
      }
    }
    if (!(d1 < ratio * d2)) return false;
  }
  return true;
}

inline double IntersectionSuccessRate(const std::vector<LiftingRecord>& records, const Dictionary& database,
                                      size_t top_n, double ratio = 0.8) {
  if (records.empty()) return 0.0;
  size_t ok = 0;
  for (const LiftingRecord& rec : records) ok += IntersectionMatches(rec, database, top_n, ratio) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

}  // namespace ldpfeat
