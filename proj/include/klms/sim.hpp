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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "klms/codec.hpp"
#include "klms/data.hpp"
#include "klms/methods.hpp"
#include "klms/model.hpp"

namespace klms {

enum class Method { kNone, kFedPM, kQsgd, kSignSgd, kSgld };
enum class Variant { kBaseline, kKlms };

const char* to_string(Method m);
const char* to_string(Variant v);

struct MethodHyper {
  LocalTrainHyper local;
  double server_lr = 1.0;       // SGLD: 0 selects step * num_clients
  std::uint32_t quant_levels = 1;
  double sign_temperature = 1.0;
  double sgld_step = 1e-3;
  double sgld_noise_std = 0.0;  // 0 selects sgld_default_noise_std
  double sgld_prior_precision = 1.0;
  double fedpm_lambda0 = 1.0;
  std::uint32_t fedpm_prior_reset_every = 0;
  double fedpm_prob_floor = 1e-4;  // coding keeps probabilities in [f, 1 - f]
  double fedpm_score_init = 0.5;   // initial scores ~ Unif[-a, a]
  double qsgd_mix = 1e-3;          // uniform mixture weight for QSGD-KLMS
};

// Per-method defaults for desk-scale runs.
MethodHyper default_hyper(Method m);

struct SimConfig {
  Method method = Method::kFedPM;
  Variant variant = Variant::kKlms;
  ModelKind model = ModelKind::kLogistic;
  std::size_t hidden = 0;
  std::size_t num_clients = 10;
  std::size_t clients_per_round = 10;
  std::size_t rounds = 100;
  SplitMode split = SplitMode::kIid;
  std::optional<std::size_t> c_max;
  CodecParams codec;
  std::size_t initial_block_size = 256;
  MethodHyper hyper;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct RoundMetrics {
  std::uint32_t round = 0;
  double bpp_payload = 0.0;
  double bpp_total = 0.0;
  double accuracy = 0.0;
  double mean_kl_per_param = 0.0;  // KLMS only; 0 for baselines
  bool partition_updated = false;
  std::uint64_t payload_bits = 0;
  std::uint64_t total_bits = 0;
};

class Simulator {
 public:
  Simulator(SimConfig config, const Dataset& train, const Dataset& test);

  RoundMetrics run_round();

  // Accuracy of the current global model. FedPM samples its mask from a
  // fixed evaluation stream.
  double evaluate(const Dataset& data) const;

  std::vector<double> effective_weights() const;
  const ModelShape& shape() const { return shape_; }
  std::size_t dimension() const { return shape_.parameter_count(); }
  std::uint32_t round() const { return round_; }
  const BlockPartition& partition() const { return partition_; }
  const FedPMState& fedpm_state() const { return fedpm_; }
  const std::vector<std::vector<std::size_t>>& shards() const {
    return shards_.shards;
  }
  // Running totals of serialized message bits and of BitCost::total().
  std::uint64_t serialized_bits() const { return serialized_bits_; }
  std::uint64_t accounted_bits() const { return accounted_bits_; }

 private:
  struct ClientOutput;

  StreamKey round_key(std::string tag) const;
  StreamKey client_key(std::size_t client, std::string tag) const;
  std::vector<std::size_t> sample_participants();
  ClientOutput run_client(std::size_t client);

  SimConfig cfg_;
  const Dataset& train_;
  const Dataset& test_;
  ModelShape shape_;
  DataPartition shards_;
  std::vector<double> w_;  // global weights (not FedPM)
  FedPMState fedpm_;
  std::optional<ProductDistribution> qsgd_global_;
  SgldParams sgld_;
  BlockPartition partition_;
  bool update_partition_ = true;
  std::uint32_t round_ = 0;
  std::uint64_t serialized_bits_ = 0;
  std::uint64_t accounted_bits_ = 0;
};

struct ExperimentSummary {
  std::size_t rounds = 0;
  std::size_t dimension = 0;
  double initial_accuracy = 0.0;
  double final_accuracy = 0.0;
  double mean_bpp_payload = 0.0;
  double mean_bpp_total = 0.0;
  std::uint64_t total_bits = 0;
  std::size_t partition_updates = 0;
};

struct ExperimentResult {
  std::vector<RoundMetrics> rounds;
  ExperimentSummary summary;
};

ExperimentResult run_experiment(const SimConfig& config, const Dataset& train,
                                const Dataset& test);

// CSV with header round,bpp_payload,bpp_total,accuracy,mean_kl_per_param,
// partition_updated.
std::string metrics_csv(std::span<const RoundMetrics> rounds);

}  // namespace klms
