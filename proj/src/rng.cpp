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
#include "klms/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace klms {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t absorb(std::uint64_t h, std::uint64_t word) {
  return mix64(h ^ mix64(word + kGolden));
}

std::uint64_t absorb_string(std::uint64_t h, const std::string& s) {
  // Length first so ("ab","c") and ("a","bc") differ.
  h = absorb(h, s.size());
  std::uint64_t word = 0;
  int filled = 0;
  for (unsigned char c : s) {
    word |= static_cast<std::uint64_t>(c) << (8 * filled);
    if (++filled == 8) {
      h = absorb(h, word);
      word = 0;
      filled = 0;
    }
  }
  if (filled > 0) h = absorb(h, word);
  return h;
}

}  // namespace

StreamKey StreamKey::with(std::string tag, std::uint64_t value) const {
  StreamKey k = *this;
  k.labels.emplace_back(std::move(tag), value);
  return k;
}

std::uint64_t hash_key(const StreamKey& key) {
  if (key.labels.empty()) {
    throw std::invalid_argument("StreamKey: label list must be non-empty");
  }
  std::uint64_t h = absorb(0x6a09e667f3bcc909ULL, key.root_seed);
  h = absorb(h, key.labels.size());
  for (const auto& [tag, value] : key.labels) {
    h = absorb_string(h, tag);
    h = absorb(h, value);
  }
  return h;
}

SampleStream derive_stream(const StreamKey& key) {
  return SampleStream(hash_key(key));
}

std::uint64_t SampleStream::next_u64() {
  // Two rounds of mixing decorrelate neighbouring keys as well as
  // neighbouring counters.
  const std::uint64_t x = key_ + kGolden * (counter_ + 1);
  ++counter_;
  return mix64(mix64(x) ^ key_);
}

double SampleStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SampleStream::next_gaussian() {
  const double u1 = 1.0 - next_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SampleStream::next_below(std::uint64_t n) {
  __extension__ using u128 = unsigned __int128;
  const u128 wide = static_cast<u128>(next_u64()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

}  // namespace klms
