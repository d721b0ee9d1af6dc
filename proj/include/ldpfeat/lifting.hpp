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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ldpfeat/common.hpp"
#include "ldpfeat/dictionary.hpp"
#include "ldpfeat/geometry.hpp"
#include "ldpfeat/io.hpp"
#include "ldpfeat/rng.hpp"

namespace ldpfeat {

// Hybrid lifting parameters: half of the m directions come from database
// samples, half from i.i.d. uniform noise on [value_lo, value_hi].
struct LiftingConfig {
  int m = 2;
  const Dictionary* database = nullptr;
  uint64_t rng_seed = 0;
  double value_lo = -1.0;
  double value_hi = 1.0;
  // Lifts draw from one randomly chosen contiguous sub-database when > 1.
  uint32_t partitions = 1;

  void Validate(Eigen::Index n) const {
    Require(m >= 2 && m % 2 == 0, ErrorCode::kInvalidArgument, "m must be even and >= 2");
    Require(m < n, ErrorCode::kInvalidArgument, "m must be below the descriptor dimension");
    Require(database != nullptr, ErrorCode::kInvalidArgument, "lifting needs a database");
    RequireSameDim(database->dim(), n, "lifting database");
    Require(value_lo < value_hi, ErrorCode::kInvalidArgument, "empty uniform value range");
    Require(partitions >= 1 && database->size() % partitions == 0, ErrorCode::kInvalidArgument,
            "partitions must divide the database size");
    if (database->size() / partitions < static_cast<size_t>(m / 2)) {
      throw Error(ErrorCode::kInsufficientDatabase,
                  "database (partition) holds fewer than m/2 = " + std::to_string(m / 2) + " entries");
    }
  }
};

// A lifted descriptor plus the ground truth kept locally for evaluation.
struct LiftingRecord {
  AffineSubspace subspace;
  std::vector<uint32_t> adversarial_indices;
  Vec original;
  std::vector<std::string> warnings;
};

inline LiftingRecord Lift(const Eigen::Ref<const Vec>& d, const LiftingConfig& cfg) {
  cfg.Validate(d.size());
  Require(d.allFinite(), ErrorCode::kInvalidArgument, "descriptor must be finite");
  CounterRng rng(cfg.rng_seed, 0x6c696674ULL);
  const Dictionary& db = *cfg.database;
  const uint64_t part_size = db.size() / cfg.partitions;
  const uint64_t part = cfg.partitions > 1 ? UniformIndex(rng, cfg.partitions) : 0;
  const auto half = static_cast<uint64_t>(cfg.m / 2);

  LiftingRecord rec;
  rec.original = d;
  std::vector<Vec> directions;
  directions.reserve(static_cast<size_t>(cfg.m));
  for (uint64_t pick : SampleWithoutReplacement(rng, part_size, half)) {
    const auto index = static_cast<uint32_t>(part * part_size + pick);
    rec.adversarial_indices.push_back(index);
  }
  // Dictionary entries are distinct, so duplicates can only coincide with d itself.
  for (uint32_t index : rec.adversarial_indices) {
    if (db.entry(index) == d) {
      rec.warnings.push_back("adversarial entry " + std::to_string(index) + " equals the descriptor; dropped");
      continue;
    }
    directions.emplace_back(db.entry(index) - d);
  }
  for (uint64_t i = 0; i < half; ++i) {
    directions.push_back(UniformVector(rng, d.size(), cfg.value_lo, cfg.value_hi));
  }
  rec.subspace = AffineSubspace(Vec(d), directions);
  if (rec.subspace.dim() < cfg.m) {
    rec.warnings.push_back("subspace dimension reduced to " + std::to_string(rec.subspace.dim()));
  }
  return rec;
}

inline constexpr int kMaxSpanRounds = 16;

// Replaces translation and basis by projections of fresh uniform samples; the
// point set is unchanged.
inline LiftingRecord Reparameterize(const LiftingRecord& rec, uint64_t rng_seed, double value_lo = -1.0,
                                    double value_hi = 1.0) {
  const AffineSubspace& old = rec.subspace;
  const Eigen::Index n = old.ambient_dim();
  const Eigen::Index m = old.dim();
  CounterRng rng(rng_seed, 0x72657061ULL);
  const Vec translation = Project(old, UniformVector(rng, n, value_lo, value_hi));
  for (int round = 0; round < kMaxSpanRounds; ++round) {
    std::vector<Vec> directions;
    directions.reserve(static_cast<size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
      directions.emplace_back(Project(old, UniformVector(rng, n, value_lo, value_hi)) - translation);
    }
    std::vector<Vec> q;
    try {
      q = Orthonormalize(directions);
    } catch (const Error&) {
      continue;
    }
    if (static_cast<Eigen::Index>(q.size()) < m) continue;
    Mat basis(n, m);
    for (Eigen::Index i = 0; i < m; ++i) basis.col(i) = q[static_cast<size_t>(i)];
    LiftingRecord out = rec;
    out.subspace = AffineSubspace::FromOrthonormal(translation, std::move(basis));
    return out;
  }
  throw Error(ErrorCode::kSpanFailure, "projected samples failed to span the subspace after " +
                                           std::to_string(kMaxSpanRounds) + " rounds");
}

// What a client transmits: the subspace alone.
inline AffineSubspace StripGroundTruth(const LiftingRecord& rec) { return rec.subspace; }

inline constexpr uint16_t kSubspaceVersion = 1;

// LDPS: magic, u16 version, u32 n, u32 m, f32 translation, then m basis rows of n f32.
inline void EncodeSubspace(const AffineSubspace& s, ByteWriter& w) {
  w.Magic("LDPS");
  w.U16(kSubspaceVersion);
  w.U32(static_cast<uint32_t>(s.ambient_dim()));
  w.U32(static_cast<uint32_t>(s.dim()));
  for (Eigen::Index i = 0; i < s.ambient_dim(); ++i) w.F32(static_cast<float>(s.translation()[i]));
  for (Eigen::Index j = 0; j < s.dim(); ++j) {
    for (Eigen::Index i = 0; i < s.ambient_dim(); ++i) w.F32(static_cast<float>(s.basis()(i, j)));
  }
}

inline Bytes EncodeSubspace(const AffineSubspace& s) {
  ByteWriter w;
  EncodeSubspace(s, w);
  return w.Take();
}

inline AffineSubspace DecodeSubspace(ByteReader& r) {
  r.ExpectMagic("LDPS");
  const uint16_t version = r.U16();
  if (version != kSubspaceVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "LDPS version " + std::to_string(version));
  }
  const uint32_t n = r.U32();
  const uint32_t m = r.U32();
  Require(n >= 2 && m >= 1 && m < n, ErrorCode::kCorruptFile, "bad LDPS dimensions");
  r.Need(static_cast<size_t>(n) * (m + 1) * 4);
  Vec translation(n);
  for (uint32_t i = 0; i < n; ++i) translation[i] = r.F32();
  Mat basis(n, m);
  for (uint32_t j = 0; j < m; ++j) {
    for (uint32_t i = 0; i < n; ++i) basis(i, j) = r.F32();
  }
  try {
    return AffineSubspace::FromOrthonormal(std::move(translation), std::move(basis));
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorruptFile, e.what());
  }
}

inline AffineSubspace DecodeSubspace(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  AffineSubspace s = DecodeSubspace(r);
  Require(r.remaining() == 0, ErrorCode::kCorruptFile, "trailing bytes after LDPS record");
  return s;
}

// A subspace file is a concatenation of LDPS records.
inline void SaveSubspaces(const std::vector<AffineSubspace>& subspaces, const std::filesystem::path& path) {
  ByteWriter w;
  for (const auto& s : subspaces) EncodeSubspace(s, w);
  WriteFileAtomic(path, w.bytes());
}

inline std::vector<AffineSubspace> LoadSubspaces(const std::filesystem::path& path) {
  const Bytes bytes = ReadFileBytes(path);
  ByteReader r(bytes);
  std::vector<AffineSubspace> out;
  while (r.remaining() > 0) out.push_back(DecodeSubspace(r));
  return out;
}

}  // namespace ldpfeat
