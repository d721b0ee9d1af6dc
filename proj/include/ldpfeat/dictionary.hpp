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
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ldpfeat/common.hpp"
#include "ldpfeat/geometry.hpp"
#include "ldpfeat/io.hpp"
#include "ldpfeat/rng.hpp"

namespace ldpfeat {

enum class Metric : uint8_t { kEuclidean = 0, kCosine = 1 };

struct Neighbor {
  uint32_t index = 0;
  double distance = 0.0;
};

inline constexpr uint16_t kDictionaryVersion = 1;

// Finite ordered descriptor domain. Entries are stored as columns, rounded
// through float32 so persistence is exact. Indices are stable identifiers.
class Dictionary {
 public:
  Dictionary() = default;

  Dictionary(Mat entries, Metric metric, nlohmann::json provenance = nlohmann::json::object())
      : entries_(RoundToFloat(entries)), metric_(metric), provenance_(std::move(provenance)) {
    Validate();
  }

  size_t size() const { return static_cast<size_t>(entries_.cols()); }
  Eigen::Index dim() const { return entries_.rows(); }
  Metric metric() const { return metric_; }
  const Mat& entries() const { return entries_; }
  auto entry(size_t i) const { return entries_.col(static_cast<Eigen::Index>(i)); }
  const nlohmann::json& provenance() const { return provenance_; }

  // Contiguous equal-size sub-databases; 1 when unpartitioned.
  uint32_t partition_count() const { return provenance_.value("partitions", 1u); }
  void set_partition_count(uint32_t count) {
    Require(count >= 1 && size() % count == 0, ErrorCode::kInvalidArgument,
            "partition count must divide the dictionary size");
    provenance_["partitions"] = count;
  }

  bool operator==(const Dictionary& other) const {
    return metric_ == other.metric_ && entries_.rows() == other.entries_.rows() &&
           entries_.cols() == other.entries_.cols() && entries_ == other.entries_ &&
           provenance_ == other.provenance_;
  }

 private:
  void Validate() const {
    Require(entries_.cols() >= 1, ErrorCode::kEmptyDictionary, "dictionary needs at least one entry");
    Require(entries_.rows() >= 1, ErrorCode::kInvalidArgument, "dictionary entries must be non-empty");
    Require(entries_.allFinite(), ErrorCode::kInvalidArgument, "dictionary entries must be finite");
    if (metric_ == Metric::kCosine) {
      for (Eigen::Index i = 0; i < entries_.cols(); ++i) {
        Require(std::abs(entries_.col(i).norm() - 1.0) <= 1e-6, ErrorCode::kInvalidArgument,
                "cosine dictionary entry " + std::to_string(i) + " is not unit norm");
      }
    }
    // Exact duplicates are the only way two float entries can be at distance 0.
    std::vector<std::vector<Eigen::Index>> buckets;
    std::unordered_map<uint64_t, size_t> bucket_of;
    for (Eigen::Index i = 0; i < entries_.cols(); ++i) {
      uint64_t h = 0x12345;
      for (Eigen::Index r = 0; r < entries_.rows(); ++r) {
        h = Mix64(h ^ std::bit_cast<uint64_t>(entries_(r, i) + 0.0));
      }
      auto [it, inserted] = bucket_of.try_emplace(h, buckets.size());
      if (inserted) {
        buckets.push_back({i});
        continue;
      }
      for (Eigen::Index j : buckets[it->second]) {
        Require(entries_.col(j) != entries_.col(i), ErrorCode::kInvalidArgument,
                "dictionary entries " + std::to_string(j) + " and " + std::to_string(i) + " are identical");
      }
      buckets[it->second].push_back(i);
    }
  }

  Mat entries_;
  Metric metric_ = Metric::kEuclidean;
  nlohmann::json provenance_ = nlohmann::json::object();
};

// Exact nearest entry. Cosine dictionaries compare against the unit-normalized
// query and report the chord distance |q/|q| - e|. Ties go to the lowest index.
inline Neighbor Nearest(const Dictionary& dict, const Eigen::Ref<const Vec>& query) {
  RequireSameDim(query.size(), dict.dim(), "nearest");
  Vec q = query;
  if (dict.metric() == Metric::kCosine) {
    const double norm = q.norm();
    Require(norm > 0.0, ErrorCode::kInvalidArgument, "cosine query must be non-zero");
    q /= norm;
  }
  const Eigen::RowVectorXd sq = (dict.entries().colwise() - q).colwise().squaredNorm();
  Neighbor best{0, std::numeric_limits<double>::infinity()};
  for (Eigen::Index i = 0; i < sq.size(); ++i) {
    if (sq[i] < best.distance) best = {static_cast<uint32_t>(i), sq[i]};
  }
  best.distance = std::sqrt(best.distance);
  return best;
}

// Exact point-to-subspace distance of every entry, ascending; ties by index.
inline std::vector<Neighbor> SortedDistancesToSubspace(const Dictionary& dict, const AffineSubspace& subspace) {
  RequireSameDim(subspace.ambient_dim(), dict.dim(), "sorted_distances_to_subspace");
  const Eigen::Index count = dict.entries().cols();
  std::vector<Neighbor> out(static_cast<size_t>(count));
  constexpr Eigen::Index kBlock = 2048;
  const Mat& basis = subspace.basis();
  for (Eigen::Index start = 0; start < count; start += kBlock) {
    const Eigen::Index len = std::min(kBlock, count - start);
    Mat offsets = dict.entries().middleCols(start, len).colwise() - subspace.translation();
    const Mat coeffs = basis.transpose() * offsets;
    offsets.noalias() -= basis * coeffs;
    const Eigen::RowVectorXd norms = offsets.colwise().norm();
    for (Eigen::Index j = 0; j < len; ++j) {
      out[static_cast<size_t>(start + j)] = {static_cast<uint32_t>(start + j), norms[j]};
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; });
  return out;
}

struct KMeansResult {
  Dictionary dictionary;
  std::vector<uint32_t> assignment;
  // Sum of cosine similarities to the assigned centroid, one value per round.
  std::vector<double> objective_trace;
};

// Spherical k-means with k-means++ seeding (cosine dissimilarity 1 - cos).
// Centroids are renormalized after every mean update; empty clusters are
// reseeded from the point farthest from its centroid.
inline KMeansResult BuildSphericalKMeans(const Eigen::Ref<const Mat>& data, size_t k, int iters, uint64_t seed) {
  const Eigen::Index count = data.cols();
  Require(count >= 1, ErrorCode::kInvalidArgument, "k-means needs data");
  Require(k >= 1 && k <= static_cast<size_t>(count), ErrorCode::kInvalidArgument, "k must be in [1, |data|]");
  Require(iters >= 1, ErrorCode::kInvalidArgument, "k-means needs at least one iteration");

  Mat x = data;
  for (Eigen::Index i = 0; i < count; ++i) {
    const double norm = x.col(i).norm();
    Require(norm > 0.0, ErrorCode::kDegenerateData, "zero-norm descriptor " + std::to_string(i));
    x.col(i) /= norm;
  }
  bool all_identical = true;
  for (Eigen::Index i = 1; i < count && all_identical; ++i) all_identical = x.col(i) == x.col(0);
  if (all_identical && count > 1) throw Error(ErrorCode::kDegenerateData, "all inputs are identical");

  CounterRng rng(seed, 0x6b6d65616e73ULL);
  Mat centroids(x.rows(), static_cast<Eigen::Index>(k));
  std::vector<double> min_dissim(static_cast<size_t>(count), std::numeric_limits<double>::infinity());
  Eigen::Index first = static_cast<Eigen::Index>(UniformIndex(rng, static_cast<uint64_t>(count)));
  centroids.col(0) = x.col(first);
  for (size_t c = 1; c < k; ++c) {
    const Eigen::RowVectorXd sims = centroids.col(static_cast<Eigen::Index>(c - 1)).transpose() * x;
    double total = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) {
      min_dissim[static_cast<size_t>(i)] = std::min(min_dissim[static_cast<size_t>(i)], std::max(0.0, 1.0 - sims[i]));
      total += min_dissim[static_cast<size_t>(i)];
    }
    Eigen::Index pick = -1;
    if (total > 0.0) {
      double target = Uniform01(rng) * total;
      for (Eigen::Index i = 0; i < count; ++i) {
        target -= min_dissim[static_cast<size_t>(i)];
        if (target < 0.0 && min_dissim[static_cast<size_t>(i)] > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = count - 1; i >= 0; --i) {
          if (min_dissim[static_cast<size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    }
    Require(pick >= 0, ErrorCode::kDegenerateData, "fewer distinct points than clusters");
    centroids.col(static_cast<Eigen::Index>(c)) = x.col(pick);
  }

  std::vector<uint32_t> assignment(static_cast<size_t>(count), std::numeric_limits<uint32_t>::max());
  std::vector<double> best_sim(static_cast<size_t>(count), 0.0);
  std::vector<double> trace;
  for (int iter = 0; iter < iters; ++iter) {
    const Mat sims = centroids.transpose() * x;
    bool changed = false;
    double objective = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < sims.rows(); ++c) {
        if (sims(c, i) > sims(best, i)) best = c;
      }
      if (assignment[static_cast<size_t>(i)] != static_cast<uint32_t>(best)) changed = true;
      assignment[static_cast<size_t>(i)] = static_cast<uint32_t>(best);
      best_sim[static_cast<size_t>(i)] = sims(best, i);
      objective += sims(best, i);
    }
    trace.push_back(objective);
    if (!changed && iter > 0) break;

    Mat sums = Mat::Zero(x.rows(), static_cast<Eigen::Index>(k));
    std::vector<size_t> members(k, 0);
    for (Eigen::Index i = 0; i < count; ++i) {
      sums.col(assignment[static_cast<size_t>(i)]) += x.col(i);
      ++members[assignment[static_cast<size_t>(i)]];
    }
    std::vector<bool> taken(static_cast<size_t>(count), false);
    for (size_t c = 0; c < k; ++c) {
      const double norm = sums.col(static_cast<Eigen::Index>(c)).norm();
      if (members[c] > 0 && norm > 0.0) {
        centroids.col(static_cast<Eigen::Index>(c)) = sums.col(static_cast<Eigen::Index>(c)) / norm;
        continue;
      }
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < count; ++i) {
        if (taken[static_cast<size_t>(i)]) continue;
        if (far < 0 || best_sim[static_cast<size_t>(i)] < best_sim[static_cast<size_t>(far)]) far = i;
      }
      taken[static_cast<size_t>(far)] = true;
      centroids.col(static_cast<Eigen::Index>(c)) = x.col(far);
    }
  }
  // A final assignment pass so `assignment` and the last trace entry match the returned centroids.
  {
    const Mat sims = centroids.transpose() * x;
    double objective = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < sims.rows(); ++c) {
        if (sims(c, i) > sims(best, i)) best = c;
      }
      assignment[static_cast<size_t>(i)] = static_cast<uint32_t>(best);
      objective += sims(best, i);
    }
    if (trace.empty() || objective != trace.back()) trace.push_back(objective);
  }

  Mat rounded = RoundToFloat(centroids);
  for (Eigen::Index c = 0; c < rounded.cols(); ++c) rounded.col(c) = RoundToFloat(Vec(rounded.col(c).normalized()));
  nlohmann::json provenance = {{"builder", "spherical-kmeans"}, {"k", k}, {"iters", iters},
                               {"seed", seed}, {"data_size", count}, {"objective", trace.back()}};
  return {Dictionary(std::move(rounded), Metric::kCosine, std::move(provenance)), std::move(assignment),
          std::move(trace)};
}

// LDPD: magic, u16 version, u8 metric, u32 |K|, u32 n, f32 entries (entry-major),
// u32 length + UTF-8 JSON provenance.
inline Bytes EncodeDictionary(const Dictionary& dict) {
  ByteWriter w;
  w.Magic("LDPD");
  w.U16(kDictionaryVersion);
  w.U8(static_cast<uint8_t>(dict.metric()));
  w.U32(static_cast<uint32_t>(dict.size()));
  w.U32(static_cast<uint32_t>(dict.dim()));
  const Mat& e = dict.entries();
  for (Eigen::Index c = 0; c < e.cols(); ++c) {
    for (Eigen::Index r = 0; r < e.rows(); ++r) w.F32(static_cast<float>(e(r, c)));
  }
  const std::string meta = dict.provenance().dump();
  w.U32(static_cast<uint32_t>(meta.size()));
  w.Raw(meta);
  return w.Take();
}

inline Dictionary DecodeDictionary(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  r.ExpectMagic("LDPD");
  const uint16_t version = r.U16();
  if (version != kDictionaryVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "LDPD version " + std::to_string(version));
  }
  const uint8_t metric = r.U8();
  Require(metric <= 1, ErrorCode::kCorruptFile, "unknown metric tag");
  const uint32_t count = r.U32();
  const uint32_t dim = r.U32();
  Require(count >= 1 && dim >= 1, ErrorCode::kCorruptFile, "empty dictionary header");
  r.Need(static_cast<size_t>(count) * dim * 4);
  Mat entries(dim, count);
  for (uint32_t c = 0; c < count; ++c) {
    for (uint32_t d = 0; d < dim; ++d) entries(d, c) = r.F32();
  }
  const uint32_t meta_len = r.U32();
  const std::string meta = r.Raw(meta_len);
  Require(r.remaining() == 0, ErrorCode::kCorruptFile, "trailing bytes after LDPD payload");
  nlohmann::json provenance;
  try {
    provenance = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("provenance JSON: ") + e.what());
  }
  try {
    return Dictionary(std::move(entries), static_cast<Metric>(metric), std::move(provenance));
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorruptFile, e.what());
  }
}

inline void SaveDictionary(const Dictionary& dict, const std::filesystem::path& path) {
  WriteFileAtomic(path, EncodeDictionary(dict));
}

inline Dictionary LoadDictionary(const std::filesystem::path& path) {
  return DecodeDictionary(ReadFileBytes(path));
}

}  // namespace ldpfeat
