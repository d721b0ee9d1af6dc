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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "ldpfeat/common.hpp"
#include "ldpfeat/geometry.hpp"
#include "ldpfeat/io.hpp"
#include "ldpfeat/rng.hpp"

namespace ldpfeat {

inline constexpr uint16_t kDescriptorFileVersion = 1;

// LDPF: magic, u16 version, u32 count, u32 dim, u8 dtype (0 float32, 1 uint8),
// row-major payload (one descriptor per row). Columns of `data` are descriptors.
inline void EncodeDescriptors(const Mat& data, DType dtype, ByteWriter& w) {
  w.Magic("LDPF");
  w.U16(kDescriptorFileVersion);
  w.U32(static_cast<uint32_t>(data.cols()));
  w.U32(static_cast<uint32_t>(data.rows()));
  w.U8(static_cast<uint8_t>(dtype));
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      const double v = data(r, c);
      if (dtype == DType::kFloat32) {
        w.F32(static_cast<float>(v));
      } else {
        Require(v >= 0.0 && v <= 1.0, ErrorCode::kInvalidArgument, "uint8 descriptors must lie in [0, 1]");
        w.U8(static_cast<uint8_t>(std::lround(v * 255.0)));
      }
    }
  }
}

inline Bytes EncodeDescriptors(const Mat& data, DType dtype = DType::kFloat32) {
  ByteWriter w;
  EncodeDescriptors(data, dtype, w);
  return w.Take();
}

struct DescriptorFile {
  Mat data;
  DType dtype = DType::kFloat32;
};

inline DescriptorFile DecodeDescriptors(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  r.ExpectMagic("LDPF");
  const uint16_t version = r.U16();
  if (version != kDescriptorFileVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "LDPF version " + std::to_string(version));
  }
  const uint32_t count = r.U32();
  const uint32_t dim = r.U32();
  const uint8_t dtype = r.U8();
  Require(dtype <= 1, ErrorCode::kCorruptFile, "unknown LDPF dtype " + std::to_string(dtype));
  Require(dim >= 1, ErrorCode::kCorruptFile, "LDPF dimension is zero");
  DescriptorFile out;
  out.dtype = static_cast<DType>(dtype);
  const size_t width = out.dtype == DType::kFloat32 ? 4 : 1;
  r.Need(static_cast<size_t>(count) * dim * width);
  out.data.resize(dim, count);
  for (uint32_t c = 0; c < count; ++c) {
    for (uint32_t i = 0; i < dim; ++i) {
      out.data(i, c) = out.dtype == DType::kFloat32 ? static_cast<double>(r.F32()) : r.U8() / 255.0;
    }
  }
  Require(r.remaining() == 0, ErrorCode::kCorruptFile, "trailing bytes after LDPF payload");
  Require(out.data.allFinite(), ErrorCode::kCorruptFile, "non-finite descriptor value");
  return out;
}

inline void SaveDescriptorFile(const Mat& data, const std::filesystem::path& path, DType dtype = DType::kFloat32) {
  WriteFileAtomic(path, EncodeDescriptors(data, dtype));
}

inline Mat LoadDescriptorFile(const std::filesystem::path& path) { return DecodeDescriptors(ReadFileBytes(path)).data; }

enum class CorpusGenerator { kGaussianMixture, kUniformCube, kFile };

inline CorpusGenerator ParseCorpusGenerator(const std::string& name) {
  if (name == "gaussian-mixture-on-sphere") return CorpusGenerator::kGaussianMixture;
  if (name == "uniform-cube") return CorpusGenerator::kUniformCube;
  if (name == "file") return CorpusGenerator::kFile;
  throw Error(ErrorCode::kConfigError, "unknown corpus generator '" + name + "'");
}

inline std::string CorpusGeneratorName(CorpusGenerator g) {
  switch (g) {
    case CorpusGenerator::kGaussianMixture:
      return "gaussian-mixture-on-sphere";
    case CorpusGenerator::kUniformCube:
      return "uniform-cube";
    case CorpusGenerator::kFile:
      return "file";
  }
  return "?";
}

struct SyntheticCorpusSpec {
  Eigen::Index n = 128;
  CorpusGenerator generator = CorpusGenerator::kGaussianMixture;
  size_t components = 100;
  // Norm scale of the isotropic noise added to a component mean.
  double spread = 0.5;
  size_t size = 1000;
  std::filesystem::path path;

  void Validate() const {
    Require(size >= 1, ErrorCode::kInvalidArgument, "corpus size must be at least 1");
    if (generator == CorpusGenerator::kFile) return;
    Require(n >= 1, ErrorCode::kInvalidArgument, "descriptor dimension must be positive");
    Require(spread > 0.0, ErrorCode::kInvalidArgument, "spread must be positive");
    Require(generator != CorpusGenerator::kGaussianMixture || components >= 1, ErrorCode::kInvalidArgument,
            "mixture needs at least one component");
  }
};

// Unit-normalized component means; stream 0 of the seed.
inline Mat MixtureMeans(const SyntheticCorpusSpec& spec, uint64_t seed) {
  CounterRng rng = CounterRng(seed, 0x636f72707573ULL).Split(0);
  Mat means(spec.n, static_cast<Eigen::Index>(spec.components));
  for (Eigen::Index c = 0; c < means.cols(); ++c) means.col(c) = NormalVector(rng, spec.n).normalized();
  return means;
}

// Draws `count` points starting at point index `first`; each point has its own
// stream, so disjoint index ranges give disjoint, reproducible samples.
inline Mat SampleMixture(const SyntheticCorpusSpec& spec, const Mat& means, uint64_t seed, size_t first,
                         size_t count) {
  const CounterRng master(seed, 0x636f72707573ULL);
  const double per_coord = spec.spread / std::sqrt(static_cast<double>(spec.n));
  Mat out(spec.n, static_cast<Eigen::Index>(count));
  for (size_t i = 0; i < count; ++i) {
    CounterRng rng = master.Split(1 + first + i);
    const auto c = static_cast<Eigen::Index>(UniformIndex(rng, static_cast<uint64_t>(means.cols())));
    Vec p = means.col(c) + per_coord * NormalVector(rng, spec.n);
    out.col(static_cast<Eigen::Index>(i)) = p.normalized();
  }
  return out;
}

// Descriptors as columns. Values are rounded through float32 so a corpus
// survives an LDPF round trip unchanged.
inline Mat GenerateCorpus(const SyntheticCorpusSpec& spec, uint64_t seed, size_t first = 0) {
  spec.Validate();
  switch (spec.generator) {
    case CorpusGenerator::kGaussianMixture:
      return RoundToFloat(SampleMixture(spec, MixtureMeans(spec, seed), seed, first, spec.size));
    case CorpusGenerator::kUniformCube: {
      const CounterRng master(seed, 0x63756265ULL);
      Mat out(spec.n, static_cast<Eigen::Index>(spec.size));
      for (size_t i = 0; i < spec.size; ++i) {
        CounterRng rng = master.Split(first + i);
        out.col(static_cast<Eigen::Index>(i)) = UniformVector(rng, spec.n, -1.0, 1.0);
      }
      return RoundToFloat(out);
    }
    case CorpusGenerator::kFile: {
      Mat all = LoadDescriptorFile(spec.path);
      Require(static_cast<size_t>(all.cols()) >= first + spec.size, ErrorCode::kInvalidArgument,
              "descriptor file holds fewer than the requested points");
      return all.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(spec.size));
    }
  }
  return {};
}

}  // namespace ldpfeat
