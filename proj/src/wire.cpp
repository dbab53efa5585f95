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
#include "klms/wire.hpp"

#include <bit>
#include <limits>

namespace klms {

void BitWriter::write(std::uint64_t value, unsigned width) {
  for (unsigned b = width; b-- > 0;) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if ((value >> b) & 1U) {
      bytes_.back() |= static_cast<std::uint8_t>(0x80U >> (bits_ % 8));
    }
    ++bits_;
  }
}

std::vector<std::uint8_t> BitWriter::finish() && { return std::move(bytes_); }

std::uint64_t BitReader::read(unsigned width) {
  if (width > remaining()) {
    throw ParseError("truncated message: need " + std::to_string(width) +
                         " bits, " + std::to_string(remaining()) + " left",
                     static_cast<std::size_t>(pos_ / 8));
  }
  std::uint64_t value = 0;
  for (unsigned b = 0; b < width; ++b, ++pos_) {
    const unsigned bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1U;
    value = (value << 1) | bit;
  }
  return value;
}

std::vector<std::uint8_t> serialize(const EncodedUpdate& update,
                                    const CodecParams& params) {
  return serialize_message(update, params).bytes;
}

WireMessage serialize_message(const EncodedUpdate& update,
                              const CodecParams& params) {
  const unsigned index_bits = params.index_bits();
  const unsigned length_bits = params.length_field_bits();
  if (update.num_blocks() > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("serialize: too many blocks");
  }
  if (update.includes_locations &&
      update.block_lengths.size() != update.num_blocks()) {
    throw std::invalid_argument("serialize: block_lengths size != M");
  }
  BitWriter w;
  w.write(update.round, 32);
  w.write(update.client_id, 32);
  w.write(update.includes_locations ? 1U : 0U, 8);
  w.write(std::bit_cast<std::uint32_t>(update.avg_block_kl), 32);
  w.write(update.num_blocks(), 32);
  if (update.includes_locations) {
    for (std::uint32_t len : update.block_lengths) {
      if (len == 0 || len > params.max_block_size) {
        throw std::invalid_argument("serialize: block length " +
                                    std::to_string(len) + " out of range");
      }
      w.write(len - 1, length_bits);
    }
  }
  for (std::uint64_t idx : update.indices) {
    if (index_bits < 64 && (idx >> index_bits) != 0) {
      throw std::invalid_argument("serialize: index " + std::to_string(idx) +
                                  " does not fit in " +
                                  std::to_string(index_bits) + " bits");
    }
    w.write(idx, index_bits);
  }
  WireMessage out;
  out.bit_count = w.bit_count();
  out.bytes = std::move(w).finish();
  return out;
}

EncodedUpdate deserialize(std::span<const std::uint8_t> bytes,
                          const CodecParams& params) {
  const unsigned index_bits = params.index_bits();
  const unsigned length_bits = params.length_field_bits();
  BitReader r(bytes);
  EncodedUpdate u;
  u.round = static_cast<std::uint32_t>(r.read(32));
  u.client_id = static_cast<std::uint32_t>(r.read(32));
  const std::uint64_t flags = r.read(8);
  if (flags & ~std::uint64_t{1}) {
    throw ParseError("unknown flag bits", 8);
  }
  u.includes_locations = (flags & 1U) != 0;
  u.avg_block_kl =
      std::bit_cast<float>(static_cast<std::uint32_t>(r.read(32)));
  const std::uint64_t m = r.read(32);
  const std::uint64_t body_bits =
      m * ((u.includes_locations ? length_bits : 0U) + index_bits);
  if (body_bits > r.remaining()) {
    throw ParseError("truncated message: " + std::to_string(m) +
                         " blocks need " + std::to_string(body_bits) +
                         " bits, " + std::to_string(r.remaining()) + " left",
                     bytes.size());
  }
  if (u.includes_locations) {
    u.block_lengths.reserve(m);
    for (std::uint64_t i = 0; i < m; ++i) {
      u.block_lengths.push_back(static_cast<std::uint32_t>(r.read(length_bits) + 1));
    }
  }
  u.indices.reserve(m);
  for (std::uint64_t i = 0; i < m; ++i) u.indices.push_back(r.read(index_bits));

  const std::uint64_t used = r.position();
  const std::uint64_t expected_bytes = (used + 7) / 8;
  if (bytes.size() > expected_bytes) {
    throw ParseError("trailing bytes after message",
                     static_cast<std::size_t>(expected_bytes));
  }
  if (r.remaining() > 0 && r.read(static_cast<unsigned>(r.remaining())) != 0) {
    throw ParseError("non-zero padding bits",
                     static_cast<std::size_t>(used / 8));
  }
  return u;
}

}  // namespace klms
