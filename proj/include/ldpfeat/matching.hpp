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
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "ldpfeat/common.hpp"
#include "ldpfeat/dictionary.hpp"
#include "ldpfeat/geometry.hpp"
#include "ldpfeat/ldp.hpp"
#include "ldpfeat/parallel.hpp"
#include "ldpfeat/rng.hpp"

namespace ldpfeat {

using Point2 = Eigen::Vector2d;

enum class MatchSource { kRaw, kLifted, kLdp };

struct Correspondence {
  uint32_t query_index = 0;
  uint32_t ref_index = 0;
  Point2 query_keypoint = Point2::Zero();
  Point2 ref_keypoint = Point2::Zero();
  double score = 0.0;
  MatchSource source = MatchSource::kRaw;
};

// Keypoints plus one descriptor column per keypoint.
struct FeatureSet {
  std::vector<Point2> keypoints;
  Mat descriptors;

  size_t size() const { return keypoints.size(); }
};

namespace detail {

inline Point2 KeypointOr(const std::vector<Point2>& kps, size_t i) {
  return i < kps.size() ? kps[i] : Point2::Zero();
}

}  // namespace detail

// Mutual nearest neighbours under L2; argmin ties resolve to the lowest index.
inline std::vector<Correspondence> MatchMutualNN(const FeatureSet& query, const FeatureSet& ref) {
  const Mat& q = query.descriptors;
  const Mat& r = ref.descriptors;
  std::vector<Correspondence> out;
  if (q.cols() == 0 || r.cols() == 0) return out;
  RequireSameDim(q.rows(), r.rows(), "mutual nn");
  Mat dist(q.cols(), r.cols());
  for (Eigen::Index j = 0; j < r.cols(); ++j) {
    dist.col(j) = (q.colwise() - r.col(j)).colwise().squaredNorm().transpose();
  }
  std::vector<Eigen::Index> q_best(static_cast<size_t>(q.cols())), r_best(static_cast<size_t>(r.cols()));
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    Eigen::Index b = 0;
    for (Eigen::Index j = 1; j < r.cols(); ++j) {
      if (dist(i, j) < dist(i, b)) b = j;
    }
    q_best[static_cast<size_t>(i)] = b;
  }
  for (Eigen::Index j = 0; j < r.cols(); ++j) {
    Eigen::Index b = 0;
    for (Eigen::Index i = 1; i < q.cols(); ++i) {
      if (dist(i, j) < dist(b, j)) b = i;
    }
    r_best[static_cast<size_t>(j)] = b;
  }
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const Eigen::Index j = q_best[static_cast<size_t>(i)];
    if (r_best[static_cast<size_t>(j)] != i) continue;
    out.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(j),
                   detail::KeypointOr(query.keypoints, static_cast<size_t>(i)),
                   detail::KeypointOr(ref.keypoints, static_cast<size_t>(j)), std::sqrt(dist(i, j)),
                   MatchSource::kRaw});
  }
  return out;
}

// Each reference descriptor is quantized to its dictionary word; a privatized
// query matches every reference whose word is in its subset. All collisions are
// emitted; geometric verification sorts them out. Score is 1 / shared words.
inline std::vector<Correspondence> MatchVocabulary(const std::vector<PrivatizedFeature>& query, const FeatureSet& ref,
                                                   const Dictionary& dict) {
  std::unordered_map<uint32_t, std::vector<uint32_t>> holders;
  for (Eigen::Index j = 0; j < ref.descriptors.cols(); ++j) {
    holders[Nearest(dict, ref.descriptors.col(j)).index].push_back(static_cast<uint32_t>(j));
  }
  std::vector<Correspondence> out;
  for (size_t i = 0; i < query.size(); ++i) {
    for (uint32_t word : query[i].indices) {
      Require(word < dict.size(), ErrorCode::kInvalidArgument, "query word outside the dictionary");
      const auto it = holders.find(word);
      if (it == holders.end()) continue;
      for (uint32_t j : it->second) {
        out.push_back({static_cast<uint32_t>(i), j, query[i].keypoint.value_or(Point2::Zero()),
                       detail::KeypointOr(ref.keypoints, j), 1.0, MatchSource::kLdp});
      }
    }
  }
  return out;
}

// Raw references against lifted queries: nearest reference by point-to-subspace
// distance, kept when best < ratio * second best.
inline std::vector<Correspondence> MatchPointToSubspace(const FeatureSet& raw_refs,
                                                        const std::vector<AffineSubspace>& lifted_queries,
                                                        const std::vector<Point2>& query_keypoints, double ratio = 0.8) {
  std::vector<Correspondence> out;
  const Mat& r = raw_refs.descriptors;
  for (size_t i = 0; i < lifted_queries.size(); ++i) {
    const AffineSubspace& s = lifted_queries[i];
    RequireSameDim(s.ambient_dim(), r.rows(), "point-to-subspace matching");
    double best = std::numeric_limits<double>::infinity(), second = best;
    Eigen::Index best_j = -1;
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
      const double d = PointToSubspaceDist(s, r.col(j));
      if (d < best) {
        second = best;
        best = d;
        best_j = j;
      } else if (d < second) {
        second = d;
      }
    }
    if (best_j < 0 || !(best < ratio * second)) continue;
    out.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(best_j), detail::KeypointOr(query_keypoints, i),
                   detail::KeypointOr(raw_refs.keypoints, static_cast<size_t>(best_j)), best, MatchSource::kLifted});
  }
  return out;
}

enum class TransformModel { kSimilarity, kHomography };

inline size_t MinimalSample(TransformModel model) { return model == TransformModel::kSimilarity ? 2 : 4; }

inline Point2 ApplyTransform(const Eigen::Matrix3d& h, const Point2& p) {
  const Eigen::Vector3d v = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
  return v.head<2>() / v.z();
}

// Least-squares similarity q = a * r + b over complex numbers (exact for two points).
inline std::optional<Eigen::Matrix3d> FitSimilarity(const std::vector<Point2>& ref, const std::vector<Point2>& query) {
  using C = std::complex<double>;
  const size_t n = ref.size();
  C rc(0, 0), qc(0, 0);
  for (size_t i = 0; i < n; ++i) {
    rc += C(ref[i].x(), ref[i].y());
    qc += C(query[i].x(), query[i].y());
  }
  rc /= static_cast<double>(n);
  qc /= static_cast<double>(n);
  C num(0, 0);
  double den = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const C r = C(ref[i].x(), ref[i].y()) - rc;
    const C q = C(query[i].x(), query[i].y()) - qc;
    num += std::conj(r) * q;
    den += std::norm(r);
  }
  if (den <= 1e-12) return std::nullopt;
  const C a = num / den;
  const C b = qc - a * rc;
  Eigen::Matrix3d h;
  h << a.real(), -a.imag(), b.real(), a.imag(), a.real(), b.imag(), 0.0, 0.0, 1.0;
  return h;
}

namespace detail {

inline Eigen::Matrix3d NormalizingTransform(const std::vector<Point2>& pts) {
  Point2 mean = Point2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double spread = 0.0;
  for (const auto& p : pts) spread += (p - mean).norm();
  spread /= static_cast<double>(pts.size());
  const double s = spread > 0.0 ? std::numbers::sqrt2 / spread : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

}  // namespace detail

// Normalized DLT over four or more correspondences.
inline std::optional<Eigen::Matrix3d> FitHomography(const std::vector<Point2>& ref, const std::vector<Point2>& query) {
  const size_t n = ref.size();
  if (n < 4) return std::nullopt;
  const Eigen::Matrix3d tr = detail::NormalizingTransform(ref);
  const Eigen::Matrix3d tq = detail::NormalizingTransform(query);
  Eigen::MatrixXd a(2 * n, 9);
  for (size_t i = 0; i < n; ++i) {
    const Point2 r = ApplyTransform(tr, ref[i]);
    const Point2 q = ApplyTransform(tq, query[i]);
    const auto row = static_cast<Eigen::Index>(2 * i);
    a.row(row) << -r.x(), -r.y(), -1, 0, 0, 0, q.x() * r.x(), q.x() * r.y(), q.x();
    a.row(row + 1) << 0, 0, 0, -r.x(), -r.y(), -1, q.y() * r.x(), q.y() * r.y(), q.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  // A rank drop beyond the null vector means a degenerate (e.g. collinear) sample.
  if (sv.size() >= 8 && sv[7] <= 1e-10 * sv[0]) return std::nullopt;
  const Eigen::VectorXd hv = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << hv[0], hv[1], hv[2], hv[3], hv[4], hv[5], hv[6], hv[7], hv[8];
  Eigen::Matrix3d h = tq.inverse() * hn * tr;
  if (std::abs(h(2, 2)) < 1e-15 || !h.allFinite()) return std::nullopt;
  h /= h(2, 2);
  return h;
}

inline std::optional<Eigen::Matrix3d> FitTransform(TransformModel model, const std::vector<Point2>& ref,
                                                   const std::vector<Point2>& query) {
  return model == TransformModel::kSimilarity ? FitSimilarity(ref, query) : FitHomography(ref, query);
}

struct RansacParams {
  TransformModel model = TransformModel::kSimilarity;
  int iters = 1000;
  double inlier_px = 3.0;
  uint64_t seed = 0;
};

struct RansacResult {
  bool found = false;
  Eigen::Matrix3d transform = Eigen::Matrix3d::Identity();
  // Indices into the candidate list, ascending.
  std::vector<size_t> inliers;
  double rms = 0.0;
};

// RANSAC over ref -> query keypoint transforms. Best model by inlier count,
// ties by lower inlier RMS; the winner is refit on its inliers. Candidates are
// canonically ordered before sampling, so the result does not depend on input order.
inline RansacResult RansacVerify(const std::vector<Correspondence>& cands, const RansacParams& params) {
  const size_t minimal = MinimalSample(params.model);
  if (cands.size() < minimal) {
    throw Error(ErrorCode::kInsufficientCandidates,
                std::to_string(cands.size()) + " candidates, need " + std::to_string(minimal));
  }
  Require(params.iters >= 1, ErrorCode::kInvalidArgument, "RANSAC needs at least one iteration");
  std::vector<size_t> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](size_t i) {
    const auto& c = cands[i];
    return std::make_tuple(c.ref_keypoint.x(), c.ref_keypoint.y(), c.query_keypoint.x(), c.query_keypoint.y(),
                           c.score);
  };
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return key(a) < key(b); });

  const double thresh2 = params.inlier_px * params.inlier_px;
  auto evaluate = [&](const Eigen::Matrix3d& h, std::vector<size_t>& inliers, double& rms) {
    inliers.clear();
    double sum = 0.0;
    for (size_t i = 0; i < cands.size(); ++i) {
      const double e2 = (ApplyTransform(h, cands[i].ref_keypoint) - cands[i].query_keypoint).squaredNorm();
      if (e2 < thresh2) {
        inliers.push_back(i);
        sum += e2;
      }
    }
    rms = inliers.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(inliers.size()));
  };
  auto better = [](size_t count, double rms, const RansacResult& best) {
    return !best.found || count > best.inliers.size() || (count == best.inliers.size() && rms < best.rms);
  };

  CounterRng rng(params.seed, 0x72616e736163ULL);
  RansacResult best;
  std::vector<Point2> ref_pts(minimal), query_pts(minimal);
  std::vector<size_t> inliers;
  double rms = 0.0;
  for (int it = 0; it < params.iters; ++it) {
    const std::vector<uint64_t> sample = SampleWithoutReplacement(rng, cands.size(), minimal);
    // Two candidates sharing a keypoint collapse the fit (scale 0 maps every
    // reference onto one query point), so such samples are skipped.
    bool distinct = true;
    for (size_t s = 0; s < minimal && distinct; ++s) {
      const auto& c = cands[order[sample[s]]];
      for (size_t t = 0; t < s && distinct; ++t) {
        const auto& o = cands[order[sample[t]]];
        distinct = c.query_index != o.query_index && c.ref_index != o.ref_index;
      }
      ref_pts[s] = c.ref_keypoint;
      query_pts[s] = c.query_keypoint;
    }
    if (!distinct) continue;
    const auto h = FitTransform(params.model, ref_pts, query_pts);
    if (!h || !h->allFinite()) continue;
    evaluate(*h, inliers, rms);
    if (better(inliers.size(), rms, best)) {
      best.found = true;
      best.transform = *h;
      best.inliers = inliers;
      best.rms = rms;
    }
  }
  if (best.found && best.inliers.size() >= minimal) {
    std::vector<Point2> r, q;
    for (size_t i : best.inliers) {
      r.push_back(cands[i].ref_keypoint);
      q.push_back(cands[i].query_keypoint);
    }
    if (const auto h = FitTransform(params.model, r, q); h && h->allFinite()) {
      evaluate(*h, inliers, rms);
      if (inliers.size() > best.inliers.size() || (inliers.size() == best.inliers.size() && rms <= best.rms)) {
        best.transform = *h;
        best.inliers = inliers;
        best.rms = rms;
      }
    }
  }
  return best;
}

// Planar scene: reference keypoints in a square image, query keypoints are a
// transformed noisy subset plus unrelated outliers.
struct SceneSpec {
  size_t ref_count = 400;
  size_t query_count = 40;
  double outlier_fraction = 0.0;
  double noise_px = 1.0;
  double image_size = 640.0;
  // Isotropic Gaussian perturbation norm added to query descriptors (renormalized).
  double descriptor_noise = 0.1;
  TransformModel model = TransformModel::kSimilarity;
};

struct SyntheticScene {
  TransformModel model = TransformModel::kSimilarity;
  Eigen::Matrix3d transform = Eigen::Matrix3d::Identity();
  FeatureSet ref;
  FeatureSet query;
  // Reference index each query was generated from, -1 for outliers.
  std::vector<int> query_truth;
  double image_size = 640.0;
};

inline Eigen::Matrix3d RandomTransform(TransformModel model, double image_size, CounterRng& rng) {
  const double angle = UniformReal(rng, -std::numbers::pi, std::numbers::pi);
  const double scale = UniformReal(rng, 0.7, 1.4);
  const double c = image_size / 2.0;
  Eigen::Matrix3d to_center, from_center, sim;
  to_center << 1, 0, -c, 0, 1, -c, 0, 0, 1;
  from_center << 1, 0, c + UniformReal(rng, -50, 50), 0, 1, c + UniformReal(rng, -50, 50), 0, 0, 1;
  sim << scale * std::cos(angle), -scale * std::sin(angle), 0, scale * std::sin(angle), scale * std::cos(angle), 0, 0,
      0, 1;
  Eigen::Matrix3d h = from_center * sim * to_center;
  if (model == TransformModel::kHomography) {
    Eigen::Matrix3d persp = Eigen::Matrix3d::Identity();
    persp(2, 0) = UniformReal(rng, -2e-4, 2e-4);
    persp(2, 1) = UniformReal(rng, -2e-4, 2e-4);
    h = h * persp;
    h /= h(2, 2);
  }
  return h;
}

// Reference descriptors are drawn without replacement from `pool` columns.
inline SyntheticScene MakeScene(const SceneSpec& spec, const Mat& pool, uint64_t seed) {
  Require(spec.outlier_fraction >= 0.0 && spec.outlier_fraction < 1.0, ErrorCode::kInvalidArgument,
          "outlier fraction must be in [0, 1)");
  Require(spec.ref_count >= 1 && spec.query_count >= 1, ErrorCode::kInvalidArgument, "empty scene");
  Require(static_cast<size_t>(pool.cols()) >= spec.ref_count + spec.query_count, ErrorCode::kInvalidArgument,
          "descriptor pool too small for the scene");
  CounterRng rng(seed, 0x7363656e65ULL);
  SyntheticScene scene;
  scene.model = spec.model;
  scene.image_size = spec.image_size;
  scene.transform = RandomTransform(spec.model, spec.image_size, rng);
  const Eigen::Index n = pool.rows();
  const std::vector<uint64_t> picks =
      SampleWithoutReplacement(rng, static_cast<uint64_t>(pool.cols()), spec.ref_count + spec.query_count);

  scene.ref.descriptors.resize(n, static_cast<Eigen::Index>(spec.ref_count));
  for (size_t j = 0; j < spec.ref_count; ++j) {
    scene.ref.keypoints.emplace_back(UniformReal(rng, 0, spec.image_size), UniformReal(rng, 0, spec.image_size));
    scene.ref.descriptors.col(static_cast<Eigen::Index>(j)) = pool.col(static_cast<Eigen::Index>(picks[j]));
  }
  const auto outliers = static_cast<size_t>(std::floor(spec.outlier_fraction * static_cast<double>(spec.query_count)));
  const size_t inliers = spec.query_count - outliers;
  const size_t take = std::min(inliers, spec.ref_count);
  const std::vector<uint64_t> sources = SampleWithoutReplacement(rng, spec.ref_count, take);
  scene.query.descriptors.resize(n, static_cast<Eigen::Index>(take + outliers));
  const double per_coord = spec.descriptor_noise / std::sqrt(static_cast<double>(n));
  for (size_t i = 0; i < take; ++i) {
    const auto j = static_cast<size_t>(sources[i]);
    Point2 p = ApplyTransform(scene.transform, scene.ref.keypoints[j]);
    p += spec.noise_px * Point2(StandardNormal(rng), StandardNormal(rng));
    scene.query.keypoints.push_back(p);
    Vec d = scene.ref.descriptors.col(static_cast<Eigen::Index>(j)) + per_coord * NormalVector(rng, n);
    scene.query.descriptors.col(static_cast<Eigen::Index>(i)) = d.normalized();
    scene.query_truth.push_back(static_cast<int>(j));
  }
  for (size_t o = 0; o < outliers; ++o) {
    scene.query.keypoints.emplace_back(UniformReal(rng, 0, spec.image_size), UniformReal(rng, 0, spec.image_size));
    scene.query.descriptors.col(static_cast<Eigen::Index>(take + o)) =
        pool.col(static_cast<Eigen::Index>(picks[spec.ref_count + o]));
    scene.query_truth.push_back(-1);
  }
  return scene;
}

// Largest displacement between the true and estimated maps over a 5x5 grid of
// the reference image.
inline double TransformError(const Eigen::Matrix3d& truth, const Eigen::Matrix3d& estimate, double image_size) {
  double worst = 0.0;
  for (int i = 0; i <= 4; ++i) {
    for (int j = 0; j <= 4; ++j) {
      const Point2 p(image_size * i / 4.0, image_size * j / 4.0);
      worst = std::max(worst, (ApplyTransform(truth, p) - ApplyTransform(estimate, p)).norm());
    }
  }
  return worst;
}

enum class MatcherKind { kVocabulary, kMutualNN };

struct UtilityParams {
  SceneSpec scene;
  RansacParams ransac;
  MatcherKind matcher = MatcherKind::kVocabulary;
  size_t trials = 200;
  uint64_t seed = 0;
  // A trial succeeds when the estimate is within this many pixels of the truth
  // over the image and is supported by at least min_inliers correspondences.
  double success_tol_px = 5.0;
  size_t min_inliers = 8;
  // Replace query descriptors by unrelated pool draws (chance baseline).
  bool scramble_queries = false;
};

struct UtilityTrial {
  bool success = false;
  size_t candidates = 0;
  size_t inliers = 0;
  size_t keypoints = 0;
  size_t words_survived = 0;
  double transform_error = 0.0;
};

struct UtilityMetrics {
  double success_rate = 0.0;
  double mean_inlier_fraction = 0.0;
  double word_survival_rate = 0.0;
  double word_survival_expected = 0.0;
  uint64_t keypoints = 0;
  size_t trials = 0;
  std::vector<UtilityTrial> per_trial;
};

// privatize -> match -> RANSAC over independent seeded scenes.
inline UtilityMetrics UtilityReport(const Mat& pool, const LdpConfig& cfg, const UtilityParams& params) {
  cfg.Validate();
  Require(params.trials >= 1, ErrorCode::kInvalidArgument, "utility needs trials");
  const Dictionary& dict = *cfg.dictionary;
  const CounterRng master(params.seed, 0x7574696cULL);
  std::vector<UtilityTrial> trials(params.trials);
  ParallelFor(params.trials, [&](size_t t) {
    CounterRng trial_rng = master.Split(t);
    const uint64_t scene_seed = trial_rng();
    SyntheticScene scene = MakeScene(params.scene, pool, scene_seed);
    if (params.scramble_queries) {
      CounterRng scramble = trial_rng.Split(1);
      for (Eigen::Index i = 0; i < scene.query.descriptors.cols(); ++i) {
        scene.query.descriptors.col(i) = pool.col(static_cast<Eigen::Index>(UniformIndex(scramble, pool.cols())));
      }
    }
    CounterRng priv_rng = trial_rng.Split(2);
    UtilityTrial& out = trials[t];
    out.keypoints = scene.query.size();
    std::vector<Correspondence> cands;
    if (params.matcher == MatcherKind::kVocabulary) {
      std::vector<PrivatizedFeature> features;
      features.reserve(scene.query.size());
      const double p = BernoulliP(cfg);
      for (size_t i = 0; i < scene.query.size(); ++i) {
        const uint32_t word = Nearest(dict, scene.query.descriptors.col(static_cast<Eigen::Index>(i))).index;
        PrivatizedFeature f;
        f.keypoint = scene.query.keypoints[i];
        f.indices = SampleSubset(word, cfg.m, dict.size(), p, priv_rng);
        if (std::binary_search(f.indices.begin(), f.indices.end(), word)) ++out.words_survived;
        features.push_back(std::move(f));
      }
      cands = MatchVocabulary(features, scene.ref, dict);
    } else {
      cands = MatchMutualNN(scene.query, scene.ref);
    }
    out.candidates = cands.size();
    if (cands.size() < MinimalSample(params.ransac.model)) return;
    RansacParams rp = params.ransac;
    rp.seed = trial_rng.Split(3)();
    const RansacResult res = RansacVerify(cands, rp);
    if (!res.found) return;
    out.inliers = res.inliers.size();
    out.transform_error = TransformError(scene.transform, res.transform, scene.image_size);
    out.success = out.inliers >= params.min_inliers && out.transform_error < params.success_tol_px;
  });

  UtilityMetrics m;
  m.trials = params.trials;
  uint64_t survived = 0;
  size_t successes = 0;
  double inlier_fraction = 0.0;
  for (const auto& t : trials) {
    successes += t.success ? 1 : 0;
    survived += t.words_survived;
    m.keypoints += t.keypoints;
    inlier_fraction += t.candidates > 0 ? static_cast<double>(t.inliers) / static_cast<double>(t.candidates) : 0.0;
  }
  m.success_rate = static_cast<double>(successes) / static_cast<double>(params.trials);
  m.mean_inlier_fraction = inlier_fraction / static_cast<double>(params.trials);
  m.word_survival_rate = m.keypoints > 0 ? static_cast<double>(survived) / static_cast<double>(m.keypoints) : 0.0;
  m.word_survival_expected = BernoulliP(cfg);
  m.per_trial = std::move(trials);
  return m;
}

}  // namespace ldpfeat
