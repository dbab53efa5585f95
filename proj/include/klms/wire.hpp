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
#include <stdexcept>
#include <string>
#include <vector>

#include "klms/codec.hpp"

namespace klms {

// MSB-first bit packing into bytes. The final byte is zero-padded.
class BitWriter {
 public:
  void write(std::uint64_t value, unsigned width);
  std::uint64_t bit_count() const { return bits_; }
  std::vector<std::uint8_t> finish() &&;

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) +
                           ")"),
        offset_(byte_offset) {}
  std::size_t byte_offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Throws ParseError when fewer than width bits remain.
  std::uint64_t read(unsigned width);
  std::uint64_t position() const { return pos_; }
  std::uint64_t remaining() const { return bytes_.size() * 8 - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
};

// Wire layout, MSB first, zero-padded to a byte boundary:
//   round:32 | client_id:32 | flags:8 (bit0 = includes_locations)
//   | avg_block_kl: IEEE-754 binary32, big-endian | M:32
//   | [M x length_field_bits: block length - 1, if bit0]
//   | M x index_bits: sample indices
// index_bits and max_block_size come from CodecParams, not from the message.
std::vector<std::uint8_t> serialize(const EncodedUpdate& update,
                                    const CodecParams& params);

struct WireMessage {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bit_count = 0;  // before padding
};
WireMessage serialize_message(const EncodedUpdate& update,
                              const CodecParams& params);

// Throws ParseError on truncated input, trailing bytes, non-zero padding,
// unknown flag bits, or out-of-range fields.
EncodedUpdate deserialize(std::span<const std::uint8_t> bytes,
                          const CodecParams& params);

}  // namespace klms
