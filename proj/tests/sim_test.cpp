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
#include "klms/sim.hpp"

#include <gtest/gtest.h>

#include <set>
#include <string>
#include <vector>

namespace klms {
namespace {

Dataset separable(std::size_t n, std::uint64_t seed) {
  SeparableSpec spec;
  spec.samples = n;
  SampleStream s = derive_stream(StreamKey(seed, {{"sim_test", 0}}));
  return make_separable(spec, s);
}

SimConfig config_for(Method m, Variant v, std::size_t rounds) {
  SimConfig c;
  c.method = m;
  c.variant = v;
  c.hyper = default_hyper(m);
  c.num_clients = 4;
  c.clients_per_round = 4;
  c.rounds = rounds;
  if (m == Method::kFedPM) {
    c.model = ModelKind::kMlp;
    c.hidden = 32;
  }
  return c;
}

const Dataset kEmpty;

const Method kMethods[] = {Method::kFedPM, Method::kQsgd, Method::kSignSgd,
                           Method::kSgld};

TEST(SimConfig, ValidationNamesField) {
  SimConfig c;
  c.clients_per_round = 20;
  try {
    c.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("clients_per_round"), std::string::npos);
  }
  SimConfig d;
  d.codec.d_kl_target = -1.0;
  try {
    d.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_EQ(std::string(e.what()).rfind("codec.", 0), 0u) << e.what();
  }
}

TEST(Simulator, SameSeedGivesIdenticalCsv) {
  Dataset train = separable(200, 1);
  for (Method m : kMethods) {
    SimConfig c = config_for(m, Variant::kKlms, 5);
    const std::string a = metrics_csv(run_experiment(c, train, kEmpty).rounds);
    const std::string b = metrics_csv(run_experiment(c, train, kEmpty).rounds);
    EXPECT_EQ(a, b) << to_string(m);
    c.seed = 2;
    EXPECT_NE(a, metrics_csv(run_experiment(c, train, kEmpty).rounds)) << to_string(m);
  }
}

TEST(Simulator, CsvHeader) {
  const std::string csv = metrics_csv({});
  EXPECT_EQ(csv,
            "round,bpp_payload,bpp_total,accuracy,mean_kl_per_param,"
            "partition_updated\n");
}

TEST(Simulator, SignSgdBaselineIsOneBitPerParameter) {
  Dataset train = separable(200, 2);
  ExperimentResult r =
      run_experiment(config_for(Method::kSignSgd, Variant::kBaseline, 3), train, kEmpty);
  for (const auto& m : r.rounds) {
    EXPECT_EQ(m.bpp_payload, 1.0);
    EXPECT_EQ(m.bpp_total, 1.0);
  }
}

TEST(Simulator, UncompressedIs32Bits) {
  Dataset train = separable(200, 3);
  ExperimentResult r =
      run_experiment(config_for(Method::kNone, Variant::kBaseline, 3), train, kEmpty);
  for (const auto& m : r.rounds) EXPECT_EQ(m.bpp_total, 32.0);
}

TEST(Simulator, FedPMKlmsFirstRoundSendsPartition) {
  Dataset train = separable(200, 4);
  SimConfig c = config_for(Method::kFedPM, Variant::kKlms, 2);
  Simulator sim(c, train, kEmpty);
  RoundMetrics first = sim.run_round();
  EXPECT_TRUE(first.partition_updated);
  EXPECT_GT(first.total_bits, first.payload_bits);
  EXPECT_GT(first.payload_bits, 0u);
}

TEST(Simulator, ZeroRoundsSummarizesInitialModel) {
  Dataset train = separable(100, 5);
  ExperimentResult r =
      run_experiment(config_for(Method::kQsgd, Variant::kKlms, 0), train, kEmpty);
  EXPECT_TRUE(r.rounds.empty());
  EXPECT_EQ(r.summary.rounds, 0u);
  EXPECT_EQ(r.summary.final_accuracy, r.summary.initial_accuracy);
  EXPECT_EQ(r.summary.total_bits, 0u);
}

TEST(Simulator, AccountingMatchesSerializedBits) {
  Dataset train = separable(200, 6);
  for (Method m : kMethods) {
    Simulator sim(config_for(m, Variant::kKlms, 6), train, kEmpty);
    for (int t = 0; t < 6; ++t) {
      RoundMetrics r = sim.run_round();
      EXPECT_GE(r.bpp_total, r.bpp_payload);
      EXPECT_GE(r.bpp_payload, 0.0);
    }
    EXPECT_GT(sim.serialized_bits(), 0u);
    EXPECT_EQ(sim.serialized_bits(), sim.accounted_bits()) << to_string(m);
  }
}

TEST(Simulator, MatchingDistributionsHaveZeroKl) {
  Dataset train = separable(200, 7);
  SimConfig c = config_for(Method::kSignSgd, Variant::kKlms, 3);
  c.hyper.sign_temperature = 1e12;  // q is uniform over signs, as is p
  for (const auto& m : run_experiment(c, train, kEmpty).rounds) {
    EXPECT_LT(m.mean_kl_per_param, 1e-12);
  }
}

TEST(Simulator, PartialParticipation) {
  Dataset train = separable(200, 8);
  SimConfig c = config_for(Method::kSignSgd, Variant::kBaseline, 2);
  c.num_clients = 5;
  c.clients_per_round = 2;
  Simulator sim(c, train, kEmpty);
  RoundMetrics r = sim.run_round();
  EXPECT_EQ(r.payload_bits, 2 * sim.dimension());
}

TEST(Simulator, NonIidSplitRuns) {
  Dataset train = separable(400, 9);
  SimConfig c = config_for(Method::kQsgd, Variant::kKlms, 2);
  c.split = SplitMode::kNonIid;
  c.c_max = 1;
  Simulator sim(c, train, kEmpty);
  for (const auto& shard : sim.shards()) {
    std::set<std::uint32_t> labels;
    for (std::size_t i : shard) labels.insert(train.labels[i]);
    EXPECT_EQ(labels.size(), 1u);
  }
  sim.run_round();
}

TEST(Simulator, EveryMethodFitsSeparableData) {
  Dataset train = separable(400, 10);
  std::vector<std::pair<Method, Variant>> runs{{Method::kNone, Variant::kBaseline}};
  for (Method m : kMethods) {
    runs.push_back({m, Variant::kBaseline});
    runs.push_back({m, Variant::kKlms});
  }
  for (auto [m, v] : runs) {
    ExperimentResult r = run_experiment(config_for(m, v, 200), train, kEmpty);
    EXPECT_GE(r.summary.final_accuracy, 0.95)
        << to_string(m) << "-" << to_string(v);
  }
}

}  // namespace
}  // namespace klms
