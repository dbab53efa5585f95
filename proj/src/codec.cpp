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
#include "klms/codec.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace klms {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-coordinate log q(y) - log p(y) for the outcomes p can produce. Discrete
// kinds use a lookup table; Gaussians use the closed form.
class LogRatio {
 public:
  LogRatio(const ProductDistribution& q, const ProductDistribution& p,
           CoordRange range)
      : q_(q), p_(p), range_(range) {
    if (p.kind() == DistributionKind::kGaussian) return;
    const std::array<double, 3> values = outcome_values(p);
    table_.resize(range.size() * 3);
    for (std::size_t i = range.lo; i < range.hi; ++i) {
      for (std::size_t o = 0; o < outcome_count(p); ++o) {
        const double lq = q.log_mass_at(i, values[o]);
        const double lp = p.log_mass_at(i, values[o]);
        // Outcomes with zero mass under p are never drawn.
        table_[(i - range.lo) * 3 + o] = lp == kNegInf ? kNegInf : lq - lp;
      }
    }
  }

  double operator()(std::span<const double> y) const {
    double w = 0.0;
    if (p_.kind() == DistributionKind::kGaussian) {
      const double inv_two_var = 1.0 / (2.0 * p_.scale() * p_.scale());
      for (std::size_t j = 0; j < y.size(); ++j) {
        const std::size_t i = range_.lo + j;
        const double dp = y[j] - p_.primary()[i];
        const double dq = y[j] - q_.primary()[i];
        w += (dp * dp - dq * dq) * inv_two_var;
      }
      return w;
    }
    for (std::size_t j = 0; j < y.size(); ++j) {
      w += table_[j * 3 + outcome_of(y[j])];
    }
    return w;
  }

 private:
  static std::size_t outcome_count(const ProductDistribution& p) {
    return p.kind() == DistributionKind::kTernary ? 3 : 2;
  }

  static std::array<double, 3> outcome_values(const ProductDistribution& p) {
    switch (p.kind()) {
      case DistributionKind::kBernoulli: return {0.0, 1.0, 0.0};
      case DistributionKind::kTernary: return {-p.scale(), 0.0, p.scale()};
      default: return {-1.0, 1.0, 0.0};
    }
  }

  std::size_t outcome_of(double y) const {
    switch (p_.kind()) {
      case DistributionKind::kBernoulli: return y == 1.0 ? 1 : 0;
      case DistributionKind::kTernary: return y < 0.0 ? 0 : (y == 0.0 ? 1 : 2);
      default: return y > 0.0 ? 1 : 0;
    }
  }

  const ProductDistribution& q_;
  const ProductDistribution& p_;
  CoordRange range_;
  std::vector<double> table_;
};

std::uint64_t candidate_offset(const ProductDistribution& p, CoordRange range,
                               std::uint64_t k) {
  return k * range.size() * p.draws_per_coordinate();
}

StreamKey block_key(const StreamKey& base, std::size_t m) {
  return base.with("block", m);
}

void check_block_args(const ProductDistribution& p, CoordRange range,
                      std::uint64_t num_samples) {
  if (range.lo >= range.hi || range.hi > p.dimension()) {
    throw std::out_of_range("block range [" + std::to_string(range.lo) + ", " +
                            std::to_string(range.hi) + ") invalid");
  }
  if (num_samples == 0) {
    throw std::invalid_argument("block: number of samples must be >= 1");
  }
  if (num_samples > kMaxSamplesPerBlock) {
    throw std::length_error("block: " + std::to_string(num_samples) +
                            " samples exceeds the per-block limit");
  }
}

}  // namespace

BlockPartition::BlockPartition(std::vector<std::size_t> starts,
                               std::size_t dimension)
    : starts_(std::move(starts)), dimension_(dimension) {
  if (dimension_ == 0) {
    throw std::invalid_argument("BlockPartition: dimension must be >= 1");
  }
  if (starts_.empty() || starts_.front() != 0) {
    throw std::invalid_argument("BlockPartition: first start must be 0");
  }
  for (std::size_t m = 1; m < starts_.size(); ++m) {
    if (starts_[m] <= starts_[m - 1]) {
      throw std::invalid_argument(
          "BlockPartition: starts must be strictly increasing (index " +
          std::to_string(m) + ")");
    }
  }
  if (starts_.back() >= dimension_) {
    throw std::invalid_argument("BlockPartition: start " +
                                std::to_string(starts_.back()) +
                                " is not below dimension " +
                                std::to_string(dimension_));
  }
}

BlockPartition BlockPartition::from_lengths(
    std::span<const std::uint32_t> lengths) {
  std::vector<std::size_t> starts;
  starts.reserve(lengths.size());
  std::size_t pos = 0;
  for (std::uint32_t len : lengths) {
    if (len == 0) {
      throw std::invalid_argument("BlockPartition: block length must be >= 1");
    }
    starts.push_back(pos);
    pos += len;
  }
  return BlockPartition(std::move(starts), pos);
}

CoordRange BlockPartition::block(std::size_t m) const {
  if (m >= starts_.size()) {
    throw std::out_of_range("BlockPartition: block " + std::to_string(m) +
                            " of " + std::to_string(starts_.size()));
  }
  const std::size_t end =
      m + 1 < starts_.size() ? starts_[m + 1] : dimension_;
  return {starts_[m], end};
}

std::vector<std::uint32_t> BlockPartition::lengths() const {
  std::vector<std::uint32_t> out(starts_.size());
  for (std::size_t m = 0; m < starts_.size(); ++m) {
    out[m] = static_cast<std::uint32_t>(block(m).size());
  }
  return out;
}

std::size_t BlockPartition::max_length() const {
  std::size_t best = 0;
  for (std::size_t m = 0; m < starts_.size(); ++m) {
    best = std::max(best, block(m).size());
  }
  return best;
}

void BlockPartition::check_max_length(std::size_t max_block_size) const {
  if (max_length() > max_block_size) {
    throw std::invalid_argument("BlockPartition: block of length " +
                                std::to_string(max_length()) +
                                " exceeds max_block_size " +
                                std::to_string(max_block_size));
  }
}

void CodecParams::validate() const {
  if (!(d_kl_target > 0.0) || !std::isfinite(d_kl_target)) {
    throw std::invalid_argument("d_kl_target: must be finite and > 0");
  }
  if (!(overhead_r >= 0.0) || !std::isfinite(overhead_r)) {
    throw std::invalid_argument("overhead_r: must be finite and >= 0");
  }
  if (max_block_size == 0 || max_block_size > (std::size_t{1} << 31)) {
    throw std::invalid_argument("max_block_size: must be in [1, 2^31]");
  }
  if (!(kl_min_threshold <= d_kl_target)) {
    throw std::invalid_argument("kl_min_threshold: must be <= d_kl_target");
  }
  if (!(d_kl_target <= kl_max_threshold)) {
    throw std::invalid_argument("kl_max_threshold: must be >= d_kl_target");
  }
  if (samples_per_block(d_kl_target, *this).samples > kMaxSamplesPerBlock) {
    throw std::invalid_argument(
        "d_kl_target: d_kl_target + overhead_r needs more samples per block "
        "than supported");
  }
}

unsigned CodecParams::index_bits() const {
  return samples_per_block(d_kl_target, *this).bits;
}

unsigned CodecParams::length_field_bits() const {
  return static_cast<unsigned>(std::bit_width(max_block_size - 1));
}

SampleBudget samples_per_block(double block_kl, const CodecParams& params) {
  const double quotient = (block_kl + params.overhead_r) / std::numbers::ln2;
  double bits = std::ceil(quotient * (1.0 - 1e-12));
  bits = std::max(bits, 1.0);
  SampleBudget out;
  out.bits = bits >= 64.0 ? 64U : static_cast<unsigned>(bits);
  out.samples = out.bits >= 64 ? std::numeric_limits<std::uint64_t>::max()
                               : (std::uint64_t{1} << out.bits);
  return out;
}

std::vector<double> softmax_weights(std::span<const double> log_weights) {
  double max_w = kNegInf;
  for (double w : log_weights) max_w = std::max(max_w, w);
  if (max_w == kNegInf) {
    throw std::domain_error(
        "importance weights: every candidate has zero mass under q");
  }
  std::vector<double> out(log_weights.size());
  double total = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::exp(log_weights[k] - max_w);
    total += out[k];
  }
  for (double& w : out) w /= total;
  return out;
}

std::size_t select_index(std::span<const double> weights, double u) {
  double cumsum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    cumsum += weights[k];
    if (weights[k] > 0.0) {
      last_positive = k;
      if (u < cumsum) return k;
    }
  }
  return last_positive;
}

BlockEncoding encode_block(const ProductDistribution& q,
                           const ProductDistribution& p, CoordRange range,
                           std::uint64_t num_samples, SampleStream shared_stream,
                           SampleStream selector_stream) {
  check_block_args(p, range, num_samples);
  if (!kl_compatible(q, p)) {
    throw std::invalid_argument("encode_block: incompatible distributions");
  }
  const LogRatio log_ratio(q, p, range);
  const std::uint64_t start = shared_stream.position();
  std::vector<double> log_w(num_samples);
  std::vector<double> y(range.size());
  for (std::uint64_t k = 0; k < num_samples; ++k) {
    shared_stream.seek(start + candidate_offset(p, range, k));
    sample_into(p, range, shared_stream, y);
    log_w[k] = log_ratio(y);
  }
  const std::vector<double> pi = softmax_weights(log_w);
  BlockEncoding out;
  out.index = select_index(pi, selector_stream.next_uniform());
  shared_stream.seek(start + candidate_offset(p, range, out.index));
  out.sample.resize(range.size());
  sample_into(p, range, shared_stream, out.sample);
  return out;
}

std::vector<double> decode_block(const ProductDistribution& p, CoordRange range,
                                 std::uint64_t num_samples,
                                 SampleStream shared_stream,
                                 std::uint64_t index) {
  check_block_args(p, range, num_samples);
  if (index >= num_samples) {
    throw std::out_of_range("decode_block: index " + std::to_string(index) +
                            " >= K = " + std::to_string(num_samples));
  }
  shared_stream.seek(shared_stream.position() +
                     candidate_offset(p, range, index));
  std::vector<double> y(range.size());
  sample_into(p, range, shared_stream, y);
  return y;
}

BlockPartition split_blocks_adaptive(std::span<const double> kl,
                                     const CodecParams& params) {
  if (kl.empty()) {
    throw std::invalid_argument("split_blocks_adaptive: empty KL sequence");
  }
  if (params.max_block_size == 0) {
    throw std::invalid_argument("split_blocks_adaptive: max_block_size is 0");
  }
  std::vector<std::size_t> starts{0};
  double running = 0.0;
  std::size_t block_start = 0;
  for (std::size_t i = 0; i < kl.size(); ++i) {
    if (!(kl[i] >= 0.0)) {
      throw std::invalid_argument("split_blocks_adaptive: KL[" +
                                  std::to_string(i) + "] is negative or NaN");
    }
    running += kl[i];
    const std::size_t length = i + 1 - block_start;
    if ((running >= params.d_kl_target || length == params.max_block_size) &&
        i + 1 < kl.size()) {
      block_start = i + 1;
      starts.push_back(block_start);
      running = 0.0;
    }
  }
  return BlockPartition(std::move(starts), kl.size());
}

BlockPartition split_blocks_fixed(std::size_t dimension,
                                  std::size_t block_size) {
  if (block_size == 0) {
    throw std::invalid_argument("split_blocks_fixed: block size must be >= 1");
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < dimension; s += block_size) starts.push_back(s);
  return BlockPartition(std::move(starts), dimension);
}

BlockPartition aggregate_block_locations(
    std::span<const BlockPartition> client_partitions,
    std::size_t max_block_size) {
  if (client_partitions.empty()) {
    throw std::invalid_argument("aggregate_block_locations: no partitions");
  }
  if (max_block_size == 0) {
    throw std::invalid_argument("aggregate_block_locations: max_block_size 0");
  }
  const std::size_t d = client_partitions.front().dimension();
  std::size_t longest = 0;
  for (const auto& part : client_partitions) {
    if (part.dimension() != d) {
      throw std::invalid_argument(
          "aggregate_block_locations: partitions differ in dimension");
    }
    longest = std::max(longest, part.num_blocks());
  }

  std::vector<std::size_t> averaged;
  averaged.reserve(longest);
  for (std::size_t m = 0; m < longest; ++m) {
    std::uint64_t sum = 0, count = 0;
    for (const auto& part : client_partitions) {
      if (part.num_blocks() > m) {
        sum += part.starts()[m];
        ++count;
      }
    }
    averaged.push_back(static_cast<std::size_t>((sum + count - 1) / count));
  }

  std::vector<std::size_t> starts{0};
  for (std::size_t s : averaged) {
    if (s > starts.back() && s < d) starts.push_back(s);
  }
  std::vector<std::size_t> capped;
  capped.reserve(starts.size());
  for (std::size_t m = 0; m < starts.size(); ++m) {
    const std::size_t end = m + 1 < starts.size() ? starts[m + 1] : d;
    for (std::size_t s = starts[m]; s < end; s += max_block_size) {
      capped.push_back(s);
    }
  }
  return BlockPartition(std::move(capped), d);
}

BitCost bit_cost(const EncodedUpdate& update, const CodecParams& params) {
  BitCost cost;
  cost.header_bits = kHeaderBits;
  cost.payload_bits =
      static_cast<std::uint64_t>(update.num_blocks()) * params.index_bits();
  if (update.includes_locations) {
    cost.location_bits = static_cast<std::uint64_t>(update.num_blocks()) *
                         params.length_field_bits();
  }
  return cost;
}

EncodeResult encode_update(const ProductDistribution& q,
                           const ProductDistribution& p,
                           const BlockPartition& partition,
                           const CodecParams& params, const StreamKey& key_base,
                           bool include_locations, MessageHeader header) {
  if (q.dimension() != p.dimension() ||
      partition.dimension() != p.dimension()) {
    throw std::invalid_argument(
        "encode_update: q, p and partition must share a dimension");
  }
  if (include_locations) partition.check_max_length(params.max_block_size);
  const std::vector<double> kl = kl_per_coordinate(q, p);
  const SampleBudget budget = samples_per_block(params.d_kl_target, params);

  EncodeResult out;
  out.update.round = header.round;
  out.update.client_id = header.client_id;
  out.update.includes_locations = include_locations;
  out.update.indices.reserve(partition.num_blocks());
  out.selected.resize(p.dimension());

  double kl_sum = 0.0;
  for (std::size_t m = 0; m < partition.num_blocks(); ++m) {
    const CoordRange range = partition.block(m);
    for (std::size_t i = range.lo; i < range.hi; ++i) kl_sum += kl[i];
    const StreamKey key = block_key(key_base, m);
    BlockEncoding enc =
        encode_block(q, p, range, budget.samples, derive_stream(key),
                     derive_stream(key.with("select", 0)));
    out.update.indices.push_back(enc.index);
    std::copy(enc.sample.begin(), enc.sample.end(),
              out.selected.begin() + static_cast<std::ptrdiff_t>(range.lo));
  }
  out.update.avg_block_kl = static_cast<float>(
      kl_sum / static_cast<double>(partition.num_blocks()));
  if (include_locations) out.update.block_lengths = partition.lengths();
  out.cost = bit_cost(out.update, params);
  return out;
}

std::vector<double> decode_update(const ProductDistribution& p,
                                  const BlockPartition& partition,
                                  const CodecParams& params,
                                  const StreamKey& key_base,
                                  const EncodedUpdate& update) {
  const BlockPartition layout =
      update.includes_locations
          ? BlockPartition::from_lengths(update.block_lengths)
          : partition;
  if (layout.dimension() != p.dimension()) {
    throw std::invalid_argument("decode_update: partition covers " +
                                std::to_string(layout.dimension()) +
                                " coordinates, model has " +
                                std::to_string(p.dimension()));
  }
  if (layout.num_blocks() != update.num_blocks()) {
    throw std::invalid_argument("decode_update: " +
                                std::to_string(update.num_blocks()) +
                                " indices for " +
                                std::to_string(layout.num_blocks()) + " blocks");
  }
  const SampleBudget budget = samples_per_block(params.d_kl_target, params);
  for (std::size_t m = 0; m < update.num_blocks(); ++m) {
    if (update.indices[m] >= budget.samples) {
      throw std::out_of_range("decode_update: index " +
                              std::to_string(update.indices[m]) +
                              " of block " + std::to_string(m) +
                              " >= K = " + std::to_string(budget.samples));
    }
  }
  std::vector<double> out(p.dimension());
  for (std::size_t m = 0; m < layout.num_blocks(); ++m) {
    const CoordRange range = layout.block(m);
    const std::vector<double> y =
        decode_block(p, range, budget.samples,
                     derive_stream(block_key(key_base, m)), update.indices[m]);
    std::copy(y.begin(), y.end(),
              out.begin() + static_cast<std::ptrdiff_t>(range.lo));
  }
  return out;
}

bool should_update_partition(double avg_kl, const CodecParams& params) {
  return avg_kl > params.kl_max_threshold || avg_kl < params.kl_min_threshold;
}

}  // namespace klms
