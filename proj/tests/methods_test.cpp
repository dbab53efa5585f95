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
#include "klms/methods.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

namespace klms {
namespace {

SampleStream stream_for(std::uint64_t seed, const char* tag) {
  return derive_stream(StreamKey(seed, {{tag, 0}}));
}

FedPMState flat_state(std::size_t d, double lambda0 = 1.0,
                      std::uint32_t reset = 0) {
  std::vector<double> scores(d, 0.0);
  return fedpm_init(std::vector<double>(d, 1.0), scores, lambda0, reset);
}

// Two points, one per class, separable along the first feature.
Dataset two_points() {
  Dataset d;
  d.num_features = 2;
  d.num_classes = 2;
  const double a[2] = {1.0, 0.5};
  const double b[2] = {-1.0, 0.5};
  d.push_back(a, 1);
  d.push_back(b, 0);
  return d;
}

TEST(Sigmoid, Values) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(1.0), 0.7311, 1e-4);
  EXPECT_NEAR(logit(sigmoid(2.5)), 2.5, 1e-12);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
}

// ---- BayesAgg

TEST(BayesAgg, ModeRuleHandExample) {
  FedPMState st = flat_state(3);
  std::vector<std::vector<double>> masks{{1, 0, 1}, {1, 0, 1}, {0, 0, 1}};
  bayes_agg(masks, st, 1);
  EXPECT_EQ(st.alpha, (std::vector<double>{3, 1, 4}));
  EXPECT_EQ(st.beta, (std::vector<double>{2, 4, 1}));
  EXPECT_NEAR(st.theta[0], 2.0 / 3.0, 1e-15);
  EXPECT_EQ(st.theta[1], 0.0);
  EXPECT_EQ(st.theta[2], 1.0);
}

TEST(BayesAgg, NoClientsLeavesThetaUnchanged) {
  FedPMState st = flat_state(4);
  const std::vector<double> before = st.theta;
  bayes_agg({}, st, 1);
  EXPECT_EQ(st.theta, before);
}

TEST(BayesAgg, AllOnesGivesOne) {
  FedPMState st = flat_state(5);
  std::vector<std::vector<double>> masks(4, std::vector<double>(5, 1.0));
  bayes_agg(masks, st, 1);
  for (double t : st.theta) EXPECT_EQ(t, 1.0);
}

TEST(BayesAgg, RejectsNonBinaryAndWrongLength) {
  FedPMState st = flat_state(2);
  std::vector<std::vector<double>> bad{{0.5, 1.0}};
  EXPECT_THROW(bayes_agg(bad, st, 1), std::invalid_argument);
  std::vector<std::vector<double>> shortm{{1.0}};
  EXPECT_THROW(bayes_agg(shortm, st, 1), std::invalid_argument);
}

TEST(BayesAgg, PriorResetSchedule) {
  FedPMState st = flat_state(1, 1.0, 2);
  std::vector<std::vector<double>> ones{{1.0}};
  bayes_agg(ones, st, 1);
  EXPECT_EQ(st.alpha[0], 2.0);
  bayes_agg(ones, st, 2);  // reset before adding
  EXPECT_EQ(st.alpha[0], 2.0);
  bayes_agg(ones, st, 3);
  EXPECT_EQ(st.alpha[0], 3.0);
}

TEST(BayesAgg, ThetaStaysInUnitIntervalFuzz) {
  SampleStream s = stream_for(11, "fuzz");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + s.next_below(8);
    const double lambda0 = 0.1 + 3.0 * s.next_uniform();
    FedPMState st = flat_state(d, lambda0, static_cast<std::uint32_t>(s.next_below(4)));
    for (std::uint32_t t = 1; t <= 6; ++t) {
      std::vector<std::vector<double>> masks(s.next_below(5));
      for (auto& m : masks) {
        m.resize(d);
        for (double& x : m) x = static_cast<double>(s.next_below(2));
      }
      bayes_agg(masks, st, t);
      for (std::size_t i = 0; i < d; ++i) {
        ASSERT_GE(st.theta[i], 0.0);
        ASSERT_LE(st.theta[i], 1.0);
        ASSERT_GT(st.alpha[i], 0.0);
        ASSERT_GT(st.beta[i], 0.0);
      }
    }
  }
}

TEST(MaskEntropyBits, Values) {
  EXPECT_EQ(mask_entropy_bits(std::vector<double>{0, 0, 0, 0}), 0u);
  EXPECT_EQ(mask_entropy_bits(std::vector<double>{1, 0, 1, 0, 1, 0, 1, 0}), 8u);
  EXPECT_EQ(mask_entropy_bits(std::vector<double>{1, 0, 0, 0}), 4u);
}

TEST(FedPMSampleWeights, AllOnesGivesFrozenWeights) {
  FedPMState st = fedpm_init({0.3, -1.2, 2.0}, std::vector<double>(3, 0.0), 1.0, 0);
  st.theta.assign(3, 1.0);
  SampleStream s = stream_for(3, "eval");
  EXPECT_EQ(fedpm_sample_weights(st, s), st.frozen_weights);
}

// ---- FedPM local training

TEST(FedPMLocalTrain, ZeroStepReturnsSigmoidOfScores) {
  Dataset d = two_points();
  ModelShape shape{ModelKind::kLogistic, 2, 2, 0};
  std::vector<double> scores{-1.0, 0.0, 0.5, 2.0, -0.3, 0.7};
  std::vector<double> frozen{1, -1, 0.5, 2, 1, 1};
  LocalTrainHyper h;
  h.lr = 0.0;
  std::vector<std::size_t> shard{0, 1};
  SampleStream s = stream_for(1, "train");
  std::vector<double> phi = fedpm_local_train(scores, shape, frozen, d, shard, h, s);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    EXPECT_DOUBLE_EQ(phi[i], sigmoid(scores[i]));
  }
}

TEST(FedPMLocalTrain, SaturatedScoresStayAtOne) {
  Dataset d = two_points();
  ModelShape shape{ModelKind::kLogistic, 2, 2, 0};
  std::vector<double> scores(6, 20.0);
  std::vector<double> frozen{1, -1, 0.5, 2, 1, 1};
  std::vector<std::size_t> shard{0, 1};
  SampleStream s = stream_for(2, "train");
  std::vector<double> phi =
      fedpm_local_train(scores, shape, frozen, d, shard, LocalTrainHyper{}, s);
  for (double p : phi) EXPECT_NEAR(p, 1.0, 1e-8);
}

TEST(FedPMLocalTrain, OneStepDecreasesShardLoss) {
  Dataset d = two_points();
  ModelShape shape{ModelKind::kLogistic, 2, 2, 0};
  // class 1 row uses +1 on feature 0, class 0 row uses -1: all helpful
  std::vector<double> frozen{-1, 0, 1, 0, 0, 0};
  std::vector<double> scores(6, 0.0);
  std::vector<std::size_t> shard{0, 1};
  LocalTrainHyper h;
  h.lr = 1.0;
  h.epochs = 1;
  h.batch_size = 2;
  auto mean_field_loss = [&](std::span<const double> phi) {
    std::vector<double> w(phi.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = frozen[i] * phi[i];
    return loss_and_grad(shape, w, d, shard, {});
  };
  std::vector<double> phi0(6, 0.5);
  SampleStream s = stream_for(3, "train");
  std::vector<double> phi1 = fedpm_local_train(scores, shape, frozen, d, shard, h, s);
  EXPECT_LT(mean_field_loss(phi1), mean_field_loss(phi0));
}

TEST(SgdLocalTrain, DecreasesLoss) {
  Dataset d = two_points();
  ModelShape shape{ModelKind::kLogistic, 2, 2, 0};
  std::vector<double> w0(shape.parameter_count(), 0.0);
  std::vector<std::size_t> shard{0, 1};
  SampleStream s = stream_for(4, "train");
  std::vector<double> w = sgd_local_train(shape, w0, d, shard, LocalTrainHyper{}, s);
  EXPECT_LT(loss_and_grad(shape, w, d, shard, {}),
            loss_and_grad(shape, w0, d, shard, {}));
}

// ---- QSGD

TEST(QsgdClientDistribution, HandExample) {
  std::vector<double> v{0.6, -0.8};
  ProductDistribution q = qsgd_client_distribution(v);
  EXPECT_NEAR(q.scale(), 1.0, 1e-15);
  EXPECT_NEAR(q.p_neg()[0], 0.0, 1e-15);
  EXPECT_NEAR(q.p_zero()[0], 0.4, 1e-15);
  EXPECT_NEAR(q.p_pos()[0], 0.6, 1e-15);
  EXPECT_NEAR(q.p_neg()[1], 0.8, 1e-15);
  EXPECT_NEAR(q.p_zero()[1], 0.2, 1e-15);
  EXPECT_NEAR(q.p_pos()[1], 0.0, 1e-15);
}

TEST(QsgdClientDistribution, ExtremeCoordinateAndExpectation) {
  std::vector<double> e{3.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(qsgd_client_distribution(e).p_pos()[0], 1.0);

  SampleStream s = stream_for(5, "v");
  std::vector<double> v(16);
  for (double& x : v) x = s.next_gaussian();
  ProductDistribution q = qsgd_client_distribution(v);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_NEAR(q.p_neg()[i] + q.p_zero()[i] + q.p_pos()[i], 1.0, 1e-15);
    EXPECT_NEAR((q.p_pos()[i] - q.p_neg()[i]) * q.scale(), v[i], 1e-12);
  }
}

TEST(QsgdClientDistribution, ZeroVectorIsAllZero) {
  ProductDistribution q = qsgd_client_distribution(std::vector<double>(3, 0.0));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(q.p_zero()[i], 1.0);
}

TEST(QsgdQuantize, IntegerLevelsAreDeterministic) {
  std::vector<double> v{0.6, -0.8, 0.0};
  SampleStream s = stream_for(6, "q");
  // s = 5: 5 * 0.6 = 3 and 5 * 0.8 = 4 exactly up to rounding
  for (int k = 0; k < 20; ++k) {
    QsgdQuantized r = qsgd_quantize(v, 5, s);
    EXPECT_NEAR(r.values[0], 0.6, 1e-12);
    EXPECT_NEAR(r.values[1], -0.8, 1e-12);
    EXPECT_EQ(r.values[2], 0.0);
  }
}

TEST(QsgdQuantize, MonteCarloMeanAndSigns) {
  std::vector<double> v{0.6, -0.8};
  SampleStream s = stream_for(7, "q");
  std::vector<double> mean(2, 0.0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    QsgdQuantized r = qsgd_quantize(v, 1, s);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_TRUE(r.values[i] == 0.0 || (r.values[i] > 0) == (v[i] > 0));
      mean[i] += r.values[i] / n;
    }
  }
  EXPECT_NEAR(mean[0], 0.6, 0.01);
  EXPECT_NEAR(mean[1], -0.8, 0.01);
}

TEST(QsgdQuantize, UnbiasedWithinThreeStandardErrors) {
  SampleStream s = stream_for(8, "q");
  std::vector<double> v(16);
  for (double& x : v) x = s.next_gaussian();
  for (std::uint32_t levels : {1u, 4u}) {
    const int n = 100000;
    std::vector<double> sum(16, 0.0), sq(16, 0.0);
    for (int k = 0; k < n; ++k) {
      QsgdQuantized r = qsgd_quantize(v, levels, s);
      for (std::size_t i = 0; i < 16; ++i) {
        sum[i] += r.values[i];
        sq[i] += r.values[i] * r.values[i];
      }
    }
    for (std::size_t i = 0; i < 16; ++i) {
      const double m = sum[i] / n;
      const double var = sq[i] / n - m * m;
      const double se = std::sqrt(std::max(var, 0.0) / n);
      EXPECT_LE(std::abs(m - v[i]), 3.0 * se + 1e-12) << "levels " << levels;
    }
  }
}

TEST(EliasGammaBits, Values) {
  EXPECT_EQ(elias_gamma_bits(std::vector<std::uint32_t>{0, 0, 0, 0}), 36u);
  // gamma(2) is 3 bits plus one sign bit plus the norm
  EXPECT_EQ(elias_gamma_bits(std::vector<std::uint32_t>{1}), 32u + 3 + 1);
  EXPECT_EQ(elias_gamma_bits(std::vector<std::uint32_t>{7}), 32u + 7 + 1);
}

TEST(QsgdGlobalDistribution, FirstRoundUniform) {
  ProductDistribution p = qsgd_klms_global_distribution({}, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(p.p_neg()[i], 1.0 / 3);
    EXPECT_DOUBLE_EQ(p.p_zero()[i], 1.0 / 3);
    EXPECT_DOUBLE_EQ(p.p_pos()[i], 1.0 / 3);
  }
}

TEST(QsgdGlobalDistribution, LaplaceSmoothing) {
  std::vector<std::vector<double>> patterns(10, std::vector<double>{0.0, 1.0});
  patterns[0][1] = -1.0;
  ProductDistribution p = qsgd_klms_global_distribution(patterns, 2);
  EXPECT_DOUBLE_EQ(p.p_neg()[0], 1.0 / 13);
  EXPECT_DOUBLE_EQ(p.p_zero()[0], 11.0 / 13);
  EXPECT_DOUBLE_EQ(p.p_pos()[0], 1.0 / 13);
  EXPECT_DOUBLE_EQ(p.p_neg()[1], 2.0 / 13);
  EXPECT_DOUBLE_EQ(p.p_pos()[1], 10.0 / 13);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(p.p_neg()[i] + p.p_zero()[i] + p.p_pos()[i], 1.0, 1e-15);
  }
}

TEST(MixWithUniform, KeepsMassAndFloorsZeros) {
  ProductDistribution q = qsgd_client_distribution(std::vector<double>{0.6, -0.8});
  ProductDistribution m = mix_with_uniform(q, 0.03);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(m.p_neg()[i] + m.p_zero()[i] + m.p_pos()[i], 1.0, 1e-15);
    EXPECT_GE(m.p_neg()[i], 0.01 - 1e-15);
    EXPECT_GE(m.p_pos()[i], 0.01 - 1e-15);
  }
  EXPECT_NEAR(m.p_pos()[0], 0.97 * 0.6 + 0.01, 1e-15);
}

// ---- SignSGD

TEST(SignSgdDistribution, Values) {
  SignParams params;
  params.temperature = 0.5;
  std::vector<double> v{0.0, 0.5, 1e6};
  ProductDistribution q = signsgd_client_distribution(v, params);
  EXPECT_DOUBLE_EQ(q.primary()[0], 0.5);
  EXPECT_NEAR(q.primary()[1], 0.7311, 1e-4);
  EXPECT_DOUBLE_EQ(q.primary()[2], 1.0);
}

TEST(SignSgdDistribution, SampledSignAgreesWhenConfident) {
  SignParams params;
  params.temperature = 0.2;
  std::vector<double> v{1.0, -1.0, 3.0};  // |v| / M >= 5
  ProductDistribution q = signsgd_client_distribution(v, params);
  SampleStream s = stream_for(9, "sign");
  std::vector<int> agree(3, 0);
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < 3; ++i) {
      if ((q.sample_at(i, s) > 0) == (v[i] > 0)) ++agree[i];
    }
  }
  for (int a : agree) EXPECT_GE(a, 0.99 * n);
}

// ---- SGLD

TEST(SgldDistributions, KlClosedForm) {
  SgldParams params;
  params.noise_std = 0.5;
  auto [q0, p0] = sgld_client_distributions(std::vector<double>{0.0, 0.0}, params);
  for (double k : kl_per_coordinate(q0, p0)) EXPECT_EQ(k, 0.0);

  auto [q1, p1] = sgld_client_distributions(std::vector<double>{0.5}, params);
  const double kl = kl_per_coordinate(q1, p1)[0];
  EXPECT_NEAR(kl, 0.5, 1e-12);

  params.noise_std = 1.0;
  auto [q2, p2] = sgld_client_distributions(std::vector<double>{0.5}, params);
  EXPECT_NEAR(kl_per_coordinate(q2, p2)[0], kl / 4, 1e-12);
}

TEST(SgldServerStep, NoiselessSteps) {
  SgldParams params;
  params.server_lr = 0.1;
  std::vector<double> theta{1.0, -2.0};
  std::vector<std::vector<double>> zero(3, std::vector<double>(2, 0.0));
  EXPECT_EQ(sgld_server_step(theta, zero, params), theta);
  std::vector<std::vector<double>> one{{4.0, -1.0}};
  std::vector<double> next = sgld_server_step(theta, one, params);
  EXPECT_NEAR(next[0], 0.6, 1e-15);
  EXPECT_NEAR(next[1], -1.9, 1e-15);
  std::vector<std::vector<double>> bad{{1.0}};
  EXPECT_THROW(sgld_server_step(theta, bad, params), std::invalid_argument);
}

TEST(SgldServerStep, AggregateNoiseVariance) {
  const std::size_t C = 4;
  SgldParams params;
  params.step = 1e-3;
  params.server_lr = 0.05;
  params.noise_std = sgld_default_noise_std(params.step, params.server_lr, C);
  const std::vector<double> theta(1, 0.0), H(1, 0.3);
  SampleStream s = stream_for(10, "sgld");
  const int n = 10000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < n; ++k) {
    std::vector<std::vector<double>> decoded(C, std::vector<double>(1));
    for (auto& h : decoded) h[0] = H[0] + params.noise_std * s.next_gaussian();
    const double x = sgld_server_step(theta, decoded, params)[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  const double expect = params.server_lr * params.server_lr *
                        params.noise_std * params.noise_std / C;
  EXPECT_NEAR(expect, 2 * params.step, 1e-15);
  EXPECT_NEAR(var / expect, 1.0, 0.05);
}

TEST(ServerMeanStep, MeanAndErrors) {
  std::vector<double> w{1.0, 1.0};
  std::vector<std::vector<double>> u{{1.0, 0.0}, {3.0, 2.0}};
  std::vector<double> next = server_mean_step(w, u, 0.5);
  EXPECT_DOUBLE_EQ(next[0], 0.0);
  EXPECT_DOUBLE_EQ(next[1], 0.5);
  EXPECT_THROW(server_mean_step(w, {}, 0.5), std::invalid_argument);
}

}  // namespace
}  // namespace klms
