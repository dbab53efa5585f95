// Copyright 2026 The KLMS Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace klms {

// Identifies one deterministic random stream. Encoder and decoder derive the
// same stream from the same key, so the key is the shared seed of the codec.
struct StreamKey {
  std::uint64_t root_seed = 0;
  std::vector<std::pair<std::string, std::uint64_t>> labels;

  StreamKey() = default;
  StreamKey(std::uint64_t seed,
            std::vector<std::pair<std::string, std::uint64_t>> l)
      : root_seed(seed), labels(std::move(l)) {}

  // Returns a copy with one more label appended.
  StreamKey with(std::string tag, std::uint64_t value) const;

  bool operator==(const StreamKey&) const = default;
};

// Counter-based generator: draw i is mix(key_hash, i), so the output of a
// stream depends only on its key and the draw index. Value type; copies
// continue independently from the same position.
class SampleStream {
 public:
  explicit SampleStream(std::uint64_t key_hash, std::uint64_t counter = 0)
      : key_(key_hash), counter_(counter) {}

  std::uint64_t next_u64();

  // 53-bit uniform in [0, 1). One draw.
  double next_uniform();

  // Standard normal via the cosine branch of Box-Muller:
  //   u1 = 1 - next_uniform()   (in (0, 1])
  //   u2 = next_uniform()
  //   z  = sqrt(-2 ln u1) * cos(2 pi u2)
  // Always consumes exactly two draws.
  double next_gaussian();

  // Uniform integer in [0, n) by 128-bit multiply-high. One draw. n >= 1.
  std::uint64_t next_below(std::uint64_t n);

  std::uint64_t key_hash() const { return key_; }
  std::uint64_t position() const { return counter_; }

  // Repositions the stream at an absolute draw index.
  void seek(std::uint64_t position) { counter_ = position; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// 64-bit hash of (root_seed, labels). Throws std::invalid_argument when the
// label list is empty.
std::uint64_t hash_key(const StreamKey& key);

SampleStream derive_stream(const StreamKey& key);

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace klms
