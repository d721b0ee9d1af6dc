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

#include <sys/random.h>

#include <array>
#include <cerrno>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "ldpfeat/common.hpp"

namespace ldpfeat {

inline constexpr uint64_t Mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based generator: output i is a pure function of (key, i), so any
// position of a stream can be reproduced and streams split without sharing
// state. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = uint64_t;

  explicit CounterRng(uint64_t seed = 0, uint64_t stream = 0)
      : key_(Mix64(Mix64(seed) ^ Mix64(stream ^ 0x5851f42d4c957f2dULL))) {}

  result_type operator()() {
    const uint64_t c = counter_++;
    return Mix64(key_ ^ Mix64(c + 0x632be59bd9b4e019ULL));
  }

  // Independent child stream; does not advance this generator.
  CounterRng Split(uint64_t stream_id) const {
    CounterRng child;
    child.key_ = Mix64(key_ ^ Mix64(stream_id * 0xd1342543de82ef95ULL + 1));
    return child;
  }

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

// Kernel-backed CSPRNG stream (getrandom). Not seedable.
class SecureRng {
 public:
  using result_type = uint64_t;

  result_type operator()() {
    if (pos_ == buffer_.size()) Refill();
    return buffer_[pos_++];
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

 private:
  void Refill() {
    auto* bytes = reinterpret_cast<unsigned char*>(buffer_.data());
    size_t filled = 0;
    const size_t want = buffer_.size() * sizeof(uint64_t);
    while (filled < want) {
      const ssize_t got = getrandom(bytes + filled, want - filled, 0);
      if (got < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kIoError, "getrandom failed");
      }
      filled += static_cast<size_t>(got);
    }
    pos_ = 0;
  }

  std::array<uint64_t, 64> buffer_{};
  size_t pos_ = 64;
};

// Uniform double in [0, 1) with 53 random bits.
template <typename Rng>
double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Rng>
double UniformReal(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * Uniform01(rng);
}

// Unbiased integer in [0, bound) (Lemire's multiply-shift with rejection).
template <typename Rng>
uint64_t UniformIndex(Rng& rng, uint64_t bound) {
  Require(bound > 0, ErrorCode::kInvalidArgument, "UniformIndex bound must be positive");
  unsigned __int128 product = static_cast<unsigned __int128>(rng()) * bound;
  auto low = static_cast<uint64_t>(product);
  if (low < bound) {
    const uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      product = static_cast<unsigned __int128>(rng()) * bound;
      low = static_cast<uint64_t>(product);
    }
  }
  return static_cast<uint64_t>(product >> 64);
}

template <typename Rng>
bool Bernoulli(Rng& rng, double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return Uniform01(rng) < p;
}

// Box-Muller, one variate per call.
template <typename Rng>
double StandardNormal(Rng& rng) {
  double u1 = Uniform01(rng);
  while (u1 <= 0.0) u1 = Uniform01(rng);
  const double u2 = Uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename Rng>
Vec UniformVector(Rng& rng, Eigen::Index n, double lo, double hi) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = UniformReal(rng, lo, hi);
  return v;
}

template <typename Rng>
Vec NormalVector(Rng& rng, Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = StandardNormal(rng);
  return v;
}

// Draws `count` distinct values from [0, population) by a partial Fisher-Yates
// shuffle over a virtual identity array; only displaced slots are stored, so
// the cost is O(count) regardless of population.
template <typename Rng>
std::vector<uint64_t> SampleWithoutReplacement(Rng& rng, uint64_t population, uint64_t count) {
  Require(count <= population, ErrorCode::kInvalidArgument,
          "cannot sample more items than the population holds");
  std::vector<uint64_t> out;
  out.reserve(count);
  if (count == 0) return out;
  // Small counts: linear probe of displaced slots beats hashing.
  std::vector<std::pair<uint64_t, uint64_t>> displaced;
  displaced.reserve(2 * count);
  auto value_at = [&](uint64_t slot) {
    for (const auto& [s, v] : displaced) {
      if (s == slot) return v;
    }
    return slot;
  };
  auto assign = [&](uint64_t slot, uint64_t value) {
    for (auto& [s, v] : displaced) {
      if (s == slot) {
        v = value;
        return;
      }
    }
    displaced.emplace_back(slot, value);
  };
  for (uint64_t i = 0; i < count; ++i) {
    const uint64_t j = i + UniformIndex(rng, population - i);
    const uint64_t vi = value_at(i);
    const uint64_t vj = value_at(j);
    out.push_back(vj);
    assign(j, vi);
    assign(i, vj);
  }
  return out;
}

}  // namespace ldpfeat
