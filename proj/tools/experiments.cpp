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
#include "experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "klms/codec.hpp"
#include "klms/wire.hpp"

namespace klms::app {

std::vector<ToyRow> run_toy(const ToyConfig& config) {
  std::vector<ToyRow> rows;
  const auto p = ProductDistribution::gaussian({0.0}, 1.0);
  for (std::size_t ei = 0; ei < config.eta_grid.size(); ++ei) {
    const double eta = config.eta_grid[ei];
    for (std::size_t n : config.n_grid) {
      for (double r : config.r_grid) {
        CodecParams params;
        params.overhead_r = r;
        ToyRow row;
        row.r = r;
        row.n = n;
        row.eta = eta;
        std::vector<double> gaps(config.runs);
        double bits = 0.0;
        for (std::size_t run = 0; run < config.runs; ++run) {
          const StreamKey run_key(config.seed,
                                  {{"toy", 0}, {"eta", ei}, {"run", run}});
          double estimate = 0.0, truth = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            const StreamKey key = run_key.with("client", c);
            SampleStream het = derive_stream(key.with("heterogeneity", 0));
            const double mu_c =
                config.mu + eta * (2.0 * het.next_uniform() - 1.0);
            const auto q = ProductDistribution::gaussian({mu_c}, 1.0);
            const SampleBudget budget =
                samples_per_block(0.5 * mu_c * mu_c, params);
            const BlockEncoding enc = encode_block(
                q, p, {0, 1}, budget.samples, derive_stream(key.with("shared", 0)),
                derive_stream(key.with("select", 0)));
            estimate += enc.sample[0];
            truth += mu_c;
            bits += budget.bits;
          }
          gaps[run] = (estimate - truth) / static_cast<double>(n);
        }
        double sum = 0.0, abs_sum = 0.0;
        for (double g : gaps) {
          sum += g;
          abs_sum += std::abs(g);
        }
        const double runs = static_cast<double>(config.runs);
        row.mean_gap = sum / runs;
        row.mean_abs_gap = abs_sum / runs;
        double ss = 0.0;
        for (double g : gaps) ss += (g - row.mean_gap) * (g - row.mean_gap);
        row.std_gap = config.runs > 1 ? std::sqrt(ss / (runs - 1.0)) : 0.0;
        row.mean_bits = bits / (runs * static_cast<double>(n));
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string toy_csv(const std::vector<ToyRow>& rows) {
  std::string out = "r,N,eta,mean_abs_gap,std_gap\n";
  char buf[160];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%g,%zu,%g,%.9g,%.9g\n", row.r, row.n,
                  row.eta, row.mean_abs_gap, row.std_gap);
    out += buf;
  }
  return out;
}

nlohmann::json toy_sidecar(const std::vector<ToyRow>& rows) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& row : rows) {
    cells.push_back({{"r", row.r},
                     {"N", row.n},
                     {"eta", row.eta},
                     {"mean_realized_bits", row.mean_bits},
                     {"mean_gap", row.mean_gap}});
  }
  return {{"cells", cells}};
}

BenchReport codec_bench(std::uint64_t seed, std::size_t coordinates) {
  using clock = std::chrono::steady_clock;
  SampleStream s = derive_stream(StreamKey(seed, {{"bench", 0}}));
  std::vector<double> qp(coordinates), pp(coordinates);
  for (std::size_t i = 0; i < coordinates; ++i) {
    pp[i] = 0.2 + 0.6 * s.next_uniform();
    qp[i] = std::clamp(pp[i] + 0.3 * (s.next_uniform() - 0.5), 0.01, 0.99);
  }
  const auto q = ProductDistribution::bernoulli(qp);
  const auto p = ProductDistribution::bernoulli(pp);
  CodecParams params;
  params.d_kl_target = 3.0;
  params.kl_min_threshold = 1.5;
  params.kl_max_threshold = 6.0;
  const StreamKey key(seed, {{"bench", 1}});

  const auto t0 = clock::now();
  const BlockPartition part = split_blocks_adaptive(kl_per_coordinate(q, p), params);
  const EncodeResult enc = encode_update(q, p, part, params, key, true);
  const std::vector<std::uint8_t> bytes = serialize(enc.update, params);
  const auto t1 = clock::now();
  const EncodedUpdate parsed = deserialize(bytes, params);
  const std::vector<double> dec = decode_update(p, part, params, key, parsed);
  const auto t2 = clock::now();

  BenchReport r;
  r.coordinates = coordinates;
  r.blocks = part.num_blocks();
  const double te = std::chrono::duration<double>(t1 - t0).count();
  const double td = std::chrono::duration<double>(t2 - t1).count();
  r.encode_coords_per_sec = static_cast<double>(coordinates) / std::max(te, 1e-9);
  r.decode_coords_per_sec = static_cast<double>(coordinates) / std::max(td, 1e-9);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < coordinates; ++i) {
    if (dec[i] != enc.selected[i]) ++r.mismatches;
    h = (h ^ (dec[i] != 0.0 ? 1U : 0U)) * 0x100000001b3ULL;
  }
  r.checksum = h;
  return r;
}

}  // namespace klms::app
