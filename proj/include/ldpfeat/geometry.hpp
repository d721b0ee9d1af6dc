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
#include <span>
#include <string>
#include <vector>

#include "ldpfeat/common.hpp"

namespace ldpfeat {

// L2 residual below which a point counts as lying on a subspace (float32 regime).
inline constexpr double kMembershipTol = 1e-6;
// Residual norm below which a vector is treated as linearly dependent.
inline constexpr double kDependenceTol = 1e-9;

enum class DType : uint8_t { kFloat32 = 0, kUint8 = 1 };

// A descriptor vector. uint8 data is promoted to k/255 on construction so all
// geometry runs on a single floating-point path.
class Descriptor {
 public:
  Descriptor() = default;

  static Descriptor FromFloat(Vec values) {
    Require(values.size() >= 1, ErrorCode::kInvalidArgument, "descriptor must be non-empty");
    Require(values.allFinite(), ErrorCode::kInvalidArgument, "descriptor entries must be finite");
    Descriptor d;
    d.values_ = std::move(values);
    d.dtype_ = DType::kFloat32;
    return d;
  }

  static Descriptor FromUint8(std::span<const uint8_t> bytes) {
    Require(!bytes.empty(), ErrorCode::kInvalidArgument, "descriptor must be non-empty");
    Descriptor d;
    d.values_.resize(static_cast<Eigen::Index>(bytes.size()));
    for (size_t i = 0; i < bytes.size(); ++i) {
      d.values_[static_cast<Eigen::Index>(i)] = static_cast<double>(bytes[i]) / 255.0;
    }
    d.dtype_ = DType::kUint8;
    return d;
  }

  const Vec& values() const { return values_; }
  DType dtype() const { return dtype_; }
  Eigen::Index size() const { return values_.size(); }

 private:
  Vec values_;
  DType dtype_ = DType::kFloat32;
};

// Modified Gram-Schmidt with a second re-orthogonalization pass. Vectors whose
// residual falls under kDependenceTol (scaled by their norm when above 1) are
// dropped, so the output may be shorter than the input.
inline std::vector<Vec> Orthonormalize(std::span<const Vec> vectors) {
  Require(!vectors.empty(), ErrorCode::kInvalidArgument, "orthonormalize needs at least one vector");
  const Eigen::Index n = vectors.front().size();
  std::vector<Vec> basis;
  basis.reserve(vectors.size());
  for (const Vec& v : vectors) {
    RequireSameDim(v.size(), n, "orthonormalize");
    Vec r = v;
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vec& q : basis) r -= q.dot(r) * q;
    }
    const double norm = r.norm();
    if (norm < kDependenceTol * std::max(1.0, v.norm())) continue;
    basis.push_back(r / norm);
  }
  if (basis.empty()) {
    throw Error(ErrorCode::kAllDegenerate, "every input vector is linearly dependent or zero");
  }
  return basis;
}

// D = translation + span(basis columns); the basis is always orthonormal.
class AffineSubspace {
 public:
  AffineSubspace() = default;

  // Orthonormalizes `directions`; dependent directions are dropped.
  AffineSubspace(Vec translation, std::span<const Vec> directions)
      : translation_(std::move(translation)) {
    Require(translation_.allFinite(), ErrorCode::kInvalidArgument, "translation must be finite");
    const std::vector<Vec> q = Orthonormalize(directions);
    basis_.resize(translation_.size(), static_cast<Eigen::Index>(q.size()));
    for (size_t i = 0; i < q.size(); ++i) {
      RequireSameDim(q[i].size(), translation_.size(), "subspace direction");
      basis_.col(static_cast<Eigen::Index>(i)) = q[i];
    }
    CheckShape();
  }

  // Adopts an already orthonormal basis (columns) without modifying it.
  static AffineSubspace FromOrthonormal(Vec translation, Mat basis, double tol = kMembershipTol) {
    RequireSameDim(basis.rows(), translation.size(), "subspace basis rows");
    Require(basis.cols() >= 1, ErrorCode::kInvalidArgument, "subspace needs a basis vector");
    Require(translation.allFinite() && basis.allFinite(), ErrorCode::kInvalidArgument,
            "subspace values must be finite");
    const Mat gram = basis.transpose() * basis;
    const double dev = (gram - Mat::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
    Require(dev <= tol, ErrorCode::kInvalidArgument,
            "basis is not orthonormal (max Gram deviation " + std::to_string(dev) + ")");
    AffineSubspace s;
    s.translation_ = std::move(translation);
    s.basis_ = std::move(basis);
    s.CheckShape();
    return s;
  }

  const Vec& translation() const { return translation_; }
  const Mat& basis() const { return basis_; }
  Eigen::Index ambient_dim() const { return translation_.size(); }
  Eigen::Index dim() const { return basis_.cols(); }

  bool operator==(const AffineSubspace& other) const {
    return translation_.size() == other.translation_.size() && basis_.cols() == other.basis_.cols() &&
           translation_ == other.translation_ && basis_ == other.basis_;
  }

 private:
  void CheckShape() const {
    Require(basis_.cols() < translation_.size(), ErrorCode::kInvalidArgument,
            "subspace dimension must be below the ambient dimension");
  }

  Vec translation_;
  Mat basis_;
};

// Orthogonal projection of `point` onto D.
inline Vec Project(const AffineSubspace& subspace, const Eigen::Ref<const Vec>& point) {
  RequireSameDim(point.size(), subspace.ambient_dim(), "project");
  const Vec offset = point - subspace.translation();
  return subspace.translation() + subspace.basis() * (subspace.basis().transpose() * offset);
}

inline double PointToSubspaceDist(const AffineSubspace& subspace, const Eigen::Ref<const Vec>& point) {
  RequireSameDim(point.size(), subspace.ambient_dim(), "point_to_subspace_dist");
  const Vec offset = point - subspace.translation();
  const Vec residual = offset - subspace.basis() * (subspace.basis().transpose() * offset);
  return residual.norm();
}

// min over x, y of |(a0 + A x) - (b0 + B y)|: the distance from b0 - a0 to
// span(A, B), taken against an orthonormal basis of the joint span.
inline double SubspaceToSubspaceDist(const AffineSubspace& a, const AffineSubspace& b) {
  RequireSameDim(a.ambient_dim(), b.ambient_dim(), "subspace_to_subspace_dist");
  std::vector<Vec> joint;
  joint.reserve(static_cast<size_t>(a.dim() + b.dim()));
  for (Eigen::Index i = 0; i < a.dim(); ++i) joint.emplace_back(a.basis().col(i));
  for (Eigen::Index i = 0; i < b.dim(); ++i) joint.emplace_back(b.basis().col(i));
  const std::vector<Vec> q = Orthonormalize(joint);
  Vec r = b.translation() - a.translation();
  for (int pass = 0; pass < 2; ++pass) {
    for (const Vec& qi : q) r -= qi.dot(r) * qi;
  }
  return r.norm();
}

inline double CosineSimilarity(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) {
  RequireSameDim(a.size(), b.size(), "cosine");
  const double denom = a.norm() * b.norm();
  return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

}  // namespace ldpfeat
