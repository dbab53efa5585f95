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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "klms/distributions.hpp"
#include "klms/rng.hpp"

namespace klms {

// Contiguous blocks covering [0, dimension). starts[0] == 0 and starts are
// strictly increasing; block m ends where block m + 1 starts (or at
// dimension for the last one).
class BlockPartition {
 public:
  BlockPartition() = default;
  // Throws std::invalid_argument unless the starts describe a valid cover.
  BlockPartition(std::vector<std::size_t> starts, std::size_t dimension);

  static BlockPartition from_lengths(std::span<const std::uint32_t> lengths);

  std::size_t dimension() const { return dimension_; }
  std::size_t num_blocks() const { return starts_.size(); }
  const std::vector<std::size_t>& starts() const { return starts_; }
  CoordRange block(std::size_t m) const;
  std::vector<std::uint32_t> lengths() const;
  std::size_t max_length() const;

  // Throws std::invalid_argument if some block is longer than max_block_size.
  void check_max_length(std::size_t max_block_size) const;

  bool operator==(const BlockPartition&) const = default;

 private:
  std::vector<std::size_t> starts_;
  std::size_t dimension_ = 0;
};

struct CodecParams {
  double d_kl_target = 2.0;        // nats per block
  double overhead_r = 0.0;         // nats added to every block budget
  std::size_t max_block_size = 1024;
  double kl_max_threshold = 4.0;   // nats, average block KL
  double kl_min_threshold = 1.0;

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  // Bits per transmitted sample index: samples_per_block(d_kl_target).bits.
  unsigned index_bits() const;
  // ceil(log2(max_block_size)); a block length L is sent as L - 1.
  unsigned length_field_bits() const;
};

struct SampleBudget {
  std::uint64_t samples = 0;  // K = 2^bits
  unsigned bits = 0;
};

// bits = max(1, ceil((block_kl + r) / ln 2)), K = 2^bits. A relative
// tolerance of 1e-12 absorbs rounding when the quotient is an integer.
SampleBudget samples_per_block(double block_kl, const CodecParams& params);

// Largest K encode_block will enumerate.
inline constexpr std::uint64_t kMaxSamplesPerBlock = std::uint64_t{1} << 26;

// Normalized importance weights exp(w_k) / sum_l exp(w_l), computed with a
// max shift. Throws std::domain_error if every log weight is -infinity.
std::vector<double> softmax_weights(std::span<const double> log_weights);

// First k with u < cumsum(weights)[k]. Falls back to the last index with
// positive weight when rounding leaves u above the final cumulative sum.
std::size_t select_index(std::span<const double> weights, double u);

struct BlockEncoding {
  std::uint64_t index = 0;
  std::vector<double> sample;
};

// Draws K candidates from p over range using shared_stream (candidate k
// starts at draw offset k * range.size() * p.draws_per_coordinate()),
// weights them by q/p and picks one using a single uniform from
// selector_stream.
BlockEncoding encode_block(const ProductDistribution& q,
                           const ProductDistribution& p, CoordRange range,
                           std::uint64_t num_samples, SampleStream shared_stream,
                           SampleStream selector_stream);

// Regenerates candidate number index from the shared stream. Throws
// std::out_of_range if index >= num_samples.
std::vector<double> decode_block(const ProductDistribution& p, CoordRange range,
                                 std::uint64_t num_samples,
                                 SampleStream shared_stream, std::uint64_t index);

// Greedy left-to-right split: a block closes at the first coordinate where
// its KL sum reaches d_kl_target, or when it reaches max_block_size.
BlockPartition split_blocks_adaptive(std::span<const double> kl,
                                     const CodecParams& params);

BlockPartition split_blocks_fixed(std::size_t dimension, std::size_t block_size);

// Ceiling-average of the m-th start index over the clients that have one,
// followed by a repair pass: starts that do not increase are dropped and
// blocks longer than max_block_size are split at multiples of it.
BlockPartition aggregate_block_locations(
    std::span<const BlockPartition> client_partitions,
    std::size_t max_block_size);

struct MessageHeader {
  std::uint32_t round = 0;
  std::uint32_t client_id = 0;
};

struct EncodedUpdate {
  std::uint32_t round = 0;
  std::uint32_t client_id = 0;
  bool includes_locations = false;
  float avg_block_kl = 0.0f;  // nats
  std::vector<std::uint32_t> block_lengths;  // present iff includes_locations
  std::vector<std::uint64_t> indices;

  std::size_t num_blocks() const { return indices.size(); }
  bool operator==(const EncodedUpdate&) const = default;
};

// round 32 + client 32 + flags 8 + avg KL 32 + block count 32.
inline constexpr std::uint64_t kHeaderBits = 136;

struct BitCost {
  std::uint64_t payload_bits = 0;
  std::uint64_t location_bits = 0;
  std::uint64_t header_bits = 0;

  std::uint64_t total() const {
    return payload_bits + location_bits + header_bits;
  }
  double bpp(std::size_t dimension) const {
    return static_cast<double>(total()) / static_cast<double>(dimension);
  }
  double payload_bpp(std::size_t dimension) const {
    return static_cast<double>(payload_bits) /
           static_cast<double>(dimension);
  }
};

BitCost bit_cost(const EncodedUpdate& update, const CodecParams& params);

struct EncodeResult {
  EncodedUpdate update;
  BitCost cost;
  std::vector<double> selected;  // encoder-side samples, length d
};

// Stream keys: candidates for block m come from key_base + ("block", m); the
// selection uniform from key_base + ("block", m) + ("select", 0).
EncodeResult encode_update(const ProductDistribution& q,
                           const ProductDistribution& p,
                           const BlockPartition& partition,
                           const CodecParams& params, const StreamKey& key_base,
                           bool include_locations, MessageHeader header = {});

// Rebuilds the partition from update.block_lengths when present, otherwise
// uses the given partition. Validates every index before decoding anything.
std::vector<double> decode_update(const ProductDistribution& p,
                                  const BlockPartition& partition,
                                  const CodecParams& params,
                                  const StreamKey& key_base,
                                  const EncodedUpdate& update);

// True iff avg_kl > kl_max_threshold or avg_kl < kl_min_threshold.
bool should_update_partition(double avg_kl, const CodecParams& params);

}  // namespace klms
