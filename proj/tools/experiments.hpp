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
#include <vector>

#include "config.hpp"

namespace klms::app {

struct ToyRow {
  double r = 0.0;
  std::size_t n = 0;
  double eta = 0.0;
  double mean_abs_gap = 0.0;
  double std_gap = 0.0;
  double mean_gap = 0.0;
  double mean_bits = 0.0;  // realized index bits per client
};

// One row per (r, N, eta) cell in grid order. Each client n of run j has
// q = N(mu + u_n, 1), u_n ~ Unif[-eta, eta], p = N(0, 1), and sends one
// scalar with K = 2^ceil((KL + r) / ln 2) candidates. The gap is the mean of
// the decoded scalars minus the mean of the client means. Streams do not
// depend on r, so cells that differ only in r share their randomness.
std::vector<ToyRow> run_toy(const ToyConfig& config);

// Header r,N,eta,mean_abs_gap,std_gap.
std::string toy_csv(const std::vector<ToyRow>& rows);
// Per-cell realized bits and mean signed gap.
nlohmann::json toy_sidecar(const std::vector<ToyRow>& rows);

struct BenchReport {
  std::size_t coordinates = 0;
  std::size_t blocks = 0;
  double encode_coords_per_sec = 0.0;
  double decode_coords_per_sec = 0.0;
  std::size_t mismatches = 0;
  std::uint64_t checksum = 0;
};

// Encodes and decodes 10^6 Bernoulli coordinates at a 3-nat block target.
BenchReport codec_bench(std::uint64_t seed, std::size_t coordinates = 1000000);

}  // namespace klms::app
