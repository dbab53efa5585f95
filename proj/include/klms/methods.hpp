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
#include <utility>
#include <vector>

#include "klms/data.hpp"
#include "klms/distributions.hpp"
#include "klms/model.hpp"
#include "klms/rng.hpp"

namespace klms {

double sigmoid(double x);
// Inverse sigmoid; +-infinity at 1 and 0.
double logit(double p);

struct LocalTrainHyper {
  double lr = 0.1;
  std::size_t batch_size = 128;
  std::size_t epochs = 3;
};

// Plain minibatch SGD over the shard. Each epoch visits the shard in a fresh
// random order, in batches of min(batch_size, shard size).
std::vector<double> sgd_local_train(const ModelShape& shape,
                                    std::span<const double> w0,
                                    const Dataset& data,
                                    std::span<const std::size_t> shard,
                                    const LocalTrainHyper& hyper,
                                    SampleStream& stream);

// ---- FedPM ----------------------------------------------------------------

struct FedPMState {
  std::vector<double> theta;   // global mask probabilities
  std::vector<double> alpha;   // Beta posterior
  std::vector<double> beta;
  double lambda0 = 1.0;
  std::vector<double> frozen_weights;
  std::uint32_t prior_reset_every = 0;  // 0: never reset
};

FedPMState fedpm_init(std::vector<double> frozen_weights,
                      std::span<const double> initial_scores, double lambda0,
                      std::uint32_t prior_reset_every);

// Score training with a fresh Bernoulli(sigmoid(s)) mask per step; the loss
// gradient w.r.t. the masked weights is passed straight through the sampling
// to the scores. Returns sigmoid of the final scores.
std::vector<double> fedpm_local_train(std::span<const double> scores,
                                      const ModelShape& shape,
                                      std::span<const double> frozen_weights,
                                      const Dataset& data,
                                      std::span<const std::size_t> shard,
                                      const LocalTrainHyper& hyper,
                                      SampleStream& stream);

// Beta-Bernoulli aggregation. When prior_reset_every > 0 and round is a
// multiple of it, alpha and beta restart from lambda0. theta is the Beta
// mode (alpha - 1) / (alpha + beta - 2) clamped to [0, 1]; where the mode is
// undefined (alpha + beta <= 2) the mean alpha / (alpha + beta) is used.
// Throws std::invalid_argument on non-binary entries or length mismatch.
void bayes_agg(std::span<const std::vector<double>> masks, FedPMState& state,
               std::uint32_t round);

// Frozen weights times one mask drawn from Bern(theta).
std::vector<double> fedpm_sample_weights(const FedPMState& state,
                                         SampleStream& stream);

// Ideal order-0 code length of a binary mask: ceil(d * H2(ones / d)).
std::uint64_t mask_entropy_bits(std::span<const double> mask);

// ---- QSGD -------------------------------------------------------------------

struct QsgdParams {
  std::uint32_t quant_levels = 1;
  double server_lr = 1.0;
  void validate() const;
};

// s = 1 ternary law: P(+) = max(v_i, 0)/|v|, P(-) = max(-v_i, 0)/|v|,
// P(0) = 1 - |v_i|/|v|, magnitude |v|. A zero vector gives P(0) = 1 with
// magnitude 1.
ProductDistribution qsgd_client_distribution(std::span<const double> v);

struct QsgdQuantized {
  std::vector<double> values;
  std::vector<std::uint32_t> levels;
  double norm = 0.0;
};

// Unbiased two-point rounding of s|v_i|/|v| to a neighbouring integer level.
// One uniform draw per coordinate.
QsgdQuantized qsgd_quantize(std::span<const double> v,
                            std::uint32_t quant_levels, SampleStream& stream);

// sum_i (2 floor(log2(x_i + 1)) + 1) + 32 norm bits + 1 sign bit per
// non-zero level.
std::uint64_t elias_gamma_bits(std::span<const std::uint32_t> levels);

// Per-coordinate frequencies of {-1, 0, +1} across the patterns, with one
// pseudo-count per symbol. No patterns gives (1/3, 1/3, 1/3). Magnitude 1.
ProductDistribution qsgd_klms_global_distribution(
    std::span<const std::vector<double>> patterns, std::size_t dimension);

// (1 - eps) * dist + eps * uniform over the three symbols. Ternary only.
ProductDistribution mix_with_uniform(const ProductDistribution& ternary,
                                     double eps);

// ---- SignSGD ----------------------------------------------------------------

struct SignParams {
  double temperature = 1.0;  // M
  double server_lr = 1.0;
  void validate() const;
};

// P(+1) = sigmoid(v_i / M).
ProductDistribution signsgd_client_distribution(std::span<const double> v,
                                                const SignParams& params);

// ---- SGLD -------------------------------------------------------------------

struct SgldParams {
  double step = 1e-3;        // gamma
  double server_lr = 1e-3;   // eta_S
  double noise_std = 1.0;    // sigma_s, per client
  void validate() const;
};

// sigma_s that makes eta_S * mean of C independent N(0, sigma_s^2) draws
// have variance 2 gamma: sqrt(2 gamma C) / eta_S.
double sgld_default_noise_std(double step, double server_lr,
                              std::size_t clients);

// q = N(H, sigma_s^2 I), p = N(0, sigma_s^2 I).
std::pair<ProductDistribution, ProductDistribution> sgld_client_distributions(
    std::span<const double> H, const SgldParams& params);

// w - lr * mean(updates). Throws std::invalid_argument on an empty list or a
// dimension mismatch.
std::vector<double> server_mean_step(std::span<const double> w,
                                     std::span<const std::vector<double>> updates,
                                     double lr);

// theta - eta_S * mean(decoded).
std::vector<double> sgld_server_step(std::span<const double> theta,
                                     std::span<const std::vector<double>> decoded,
                                     const SgldParams& params);

}  // namespace klms
