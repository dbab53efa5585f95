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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "klms/wire.hpp"

namespace klms {

namespace {

std::invalid_argument field_error(const std::string& field,
                                  const std::string& what) {
  return std::invalid_argument(field + ": " + what);
}

std::vector<double> clamp_probs(std::span<const double> p, double floor) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = std::clamp(p[i], floor, 1.0 - floor);
  }
  return out;
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::kNone: return "none";
    case Method::kFedPM: return "fedpm";
    case Method::kQsgd: return "qsgd";
    case Method::kSignSgd: return "signsgd";
    case Method::kSgld: return "sgld";
  }
  return "?";
}

const char* to_string(Variant v) {
  return v == Variant::kKlms ? "klms" : "baseline";
}

MethodHyper default_hyper(Method m) {
  MethodHyper h;
  switch (m) {
    case Method::kFedPM:
      h.local.lr = 300.0;
      h.local.epochs = 3;
      h.fedpm_prior_reset_every = 1;
      break;
    case Method::kSgld:
      h.local.epochs = 1;
      h.server_lr = 0.0;
      break;
    case Method::kSignSgd:
      h.sign_temperature = 0.01;
      h.server_lr = 0.01;
      break;
    default:
      break;
  }
  return h;
}

void SimConfig::validate() const {
  if (num_clients == 0) throw field_error("num_clients", "must be >= 1");
  if (clients_per_round == 0 || clients_per_round > num_clients) {
    throw field_error("clients_per_round", "must be in [1, num_clients]");
  }
  if (model == ModelKind::kMlp && hidden == 0) {
    throw field_error("model.hidden", "must be >= 1 for mlp");
  }
  if (c_max && *c_max < 1) throw field_error("c_max", "must be >= 1");
  if (initial_block_size == 0) {
    throw field_error("codec.initial_block_size", "must be >= 1");
  }
  try {
    codec.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("codec.") + e.what());
  }
  if (!(hyper.local.lr >= 0.0)) throw field_error("hyper.local_lr", "must be >= 0");
  if (hyper.local.batch_size == 0) throw field_error("hyper.batch_size", "must be >= 1");
  if (!(hyper.server_lr >= 0.0)) throw field_error("hyper.server_lr", "must be >= 0");
  if (method != Method::kSgld && !(hyper.server_lr > 0.0)) {
    throw field_error("hyper.server_lr", "must be > 0");
  }
  if (hyper.quant_levels < 1) throw field_error("hyper.quant_levels", "must be >= 1");
  if (!(hyper.sign_temperature > 0.0)) {
    throw field_error("hyper.sign_temperature", "must be > 0");
  }
  if (!(hyper.sgld_step > 0.0)) throw field_error("hyper.sgld_step", "must be > 0");
  if (!(hyper.sgld_noise_std >= 0.0)) {
    throw field_error("hyper.sgld_noise_std", "must be >= 0");
  }
  if (!(hyper.sgld_prior_precision >= 0.0)) {
    throw field_error("hyper.sgld_prior_precision", "must be >= 0");
  }
  if (!(hyper.fedpm_lambda0 > 0.0)) throw field_error("hyper.fedpm_lambda0", "must be > 0");
  if (!(hyper.fedpm_prob_floor > 0.0 && hyper.fedpm_prob_floor < 0.5)) {
    throw field_error("hyper.fedpm_prob_floor", "must be in (0, 0.5)");
  }
  if (!(hyper.fedpm_score_init >= 0.0)) {
    throw field_error("hyper.fedpm_score_init", "must be >= 0");
  }
  if (!(hyper.qsgd_mix > 0.0 && hyper.qsgd_mix < 1.0)) {
    throw field_error("hyper.qsgd_mix", "must be in (0, 1)");
  }
}

struct Simulator::ClientOutput {
  std::vector<double> update;      // what the server aggregates
  std::vector<double> pattern;     // QSGD-KLMS ternary pattern
  std::uint64_t payload_bits = 0;
  std::uint64_t total_bits = 0;
  double kl_per_param = 0.0;
  float avg_block_kl = 0.0f;
  std::optional<BlockPartition> sent_partition;
};

Simulator::Simulator(SimConfig config, const Dataset& train,
                     const Dataset& test)
    : cfg_(std::move(config)), train_(train), test_(test) {
  cfg_.validate();
  if (train_.size() == 0) throw std::invalid_argument("train set is empty");
  shape_.kind = cfg_.model;
  shape_.inputs = train_.num_features;
  shape_.classes = std::max<std::size_t>(
      2, std::max(train_.num_classes, test_.num_classes));
  shape_.hidden = cfg_.hidden;
  shape_.validate();
  if (test_.size() > 0 && test_.num_features != train_.num_features) {
    throw std::invalid_argument("test set feature count differs from train");
  }

  SampleStream split_stream =
      derive_stream(StreamKey(cfg_.seed, {{"partition", 0}}));
  shards_ = partition_data(train_, cfg_.num_clients, cfg_.split, cfg_.c_max,
                           split_stream);
  for (std::size_t c = 0; c < shards_.shards.size(); ++c) {
    if (shards_.shards[c].empty()) {
      throw std::invalid_argument("client " + std::to_string(c) +
                                  " received no data; use fewer clients");
    }
  }

  SampleStream init = derive_stream(StreamKey(cfg_.seed, {{"init", 0}}));
  const std::size_t d = shape_.parameter_count();
  if (cfg_.method == Method::kFedPM) {
    std::vector<double> frozen = init_parameters(shape_, init, true);
    SampleStream score_stream =
        derive_stream(StreamKey(cfg_.seed, {{"scores", 0}}));
    std::vector<double> scores(d);
    for (double& s : scores) {
      s = cfg_.hyper.fedpm_score_init * (2.0 * score_stream.next_uniform() - 1.0);
    }
    fedpm_ = fedpm_init(std::move(frozen), scores, cfg_.hyper.fedpm_lambda0,
                        cfg_.hyper.fedpm_prior_reset_every);
  } else {
    w_ = init_parameters(shape_, init, false);
  }
  if (cfg_.method == Method::kQsgd) {
    qsgd_global_ = qsgd_klms_global_distribution({}, d);
  }
  if (cfg_.method == Method::kSgld) {
    sgld_.step = cfg_.hyper.sgld_step;
    sgld_.server_lr = cfg_.hyper.server_lr > 0.0
                          ? cfg_.hyper.server_lr
                          : cfg_.hyper.sgld_step *
                                static_cast<double>(cfg_.num_clients);
    sgld_.noise_std = cfg_.hyper.sgld_noise_std > 0.0
                          ? cfg_.hyper.sgld_noise_std
                          : sgld_default_noise_std(sgld_.step, sgld_.server_lr,
                                                   cfg_.clients_per_round);
  }
  partition_ = split_blocks_fixed(
      d, std::min(cfg_.initial_block_size, cfg_.codec.max_block_size));
}

StreamKey Simulator::round_key(std::string tag) const {
  return StreamKey(cfg_.seed, {{"round", round_}, {std::move(tag), 0}});
}

StreamKey Simulator::client_key(std::size_t client, std::string tag) const {
  return StreamKey(cfg_.seed,
                   {{"round", round_}, {"client", client}, {std::move(tag), 0}});
}

std::vector<std::size_t> Simulator::sample_participants() {
  SampleStream s = derive_stream(round_key("participants"));
  std::vector<std::size_t> ids = permutation(cfg_.num_clients, s);
  ids.resize(cfg_.clients_per_round);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<double> Simulator::effective_weights() const {
  if (cfg_.method != Method::kFedPM) return w_;
  SampleStream s = derive_stream(StreamKey(cfg_.seed, {{"eval", 0}}));
  return fedpm_sample_weights(fedpm_, s);
}

double Simulator::evaluate(const Dataset& data) const {
  return accuracy(shape_, effective_weights(), data);
}

Simulator::ClientOutput Simulator::run_client(std::size_t client) {
  const std::size_t d = dimension();
  const auto& shard = shards_.shards[client];
  SampleStream train_stream = derive_stream(client_key(client, "train"));
  SampleStream quant_stream = derive_stream(client_key(client, "quant"));
  const bool klms = cfg_.variant == Variant::kKlms;
  const MethodHyper& h = cfg_.hyper;
  ClientOutput out;

  std::optional<ProductDistribution> q, p;
  double norm = 0.0;  // QSGD-KLMS: sent separately as a float

  switch (cfg_.method) {
    case Method::kNone: {
      const auto local = sgd_local_train(shape_, w_, train_, shard, h.local,
                                         train_stream);
      out.update.resize(d);
      for (std::size_t i = 0; i < d; ++i) out.update[i] = w_[i] - local[i];
      out.payload_bits = out.total_bits = 32ULL * d;
      return out;
    }
    case Method::kFedPM: {
      const std::vector<double> theta = clamp_probs(fedpm_.theta, h.fedpm_prob_floor);
      std::vector<double> scores(d);
      for (std::size_t i = 0; i < d; ++i) scores[i] = logit(theta[i]);
      const std::vector<double> phi =
          clamp_probs(fedpm_local_train(scores, shape_, fedpm_.frozen_weights,
                                        train_, shard, h.local, train_stream),
                      h.fedpm_prob_floor);
      q = ProductDistribution::bernoulli(phi);
      if (!klms) {
        out.update = sample(*q, {0, d}, quant_stream);
        out.payload_bits = out.total_bits = mask_entropy_bits(out.update);
        return out;
      }
      p = ProductDistribution::bernoulli(theta);
      break;
    }
    case Method::kQsgd:
    case Method::kSignSgd: {
      const auto local = sgd_local_train(shape_, w_, train_, shard, h.local,
                                         train_stream);
      std::vector<double> v(d);
      for (std::size_t i = 0; i < d; ++i) v[i] = w_[i] - local[i];
      if (cfg_.method == Method::kSignSgd) {
        q = signsgd_client_distribution(v, {h.sign_temperature, h.server_lr});
        if (!klms) {
          out.update = sample(*q, {0, d}, quant_stream);
          out.payload_bits = out.total_bits = d;
          return out;
        }
        p = ProductDistribution::uniform_sign(d);
        break;
      }
      if (!klms) {
        QsgdQuantized qv = qsgd_quantize(v, h.quant_levels, quant_stream);
        out.payload_bits = out.total_bits = elias_gamma_bits(qv.levels);
        out.update = std::move(qv.values);
        return out;
      }
      const ProductDistribution exact = qsgd_client_distribution(v);
      norm = static_cast<float>(exact.scale());
      q = mix_with_uniform(exact, h.qsgd_mix);
      p = *qsgd_global_;
      break;
    }
    case Method::kSgld: {
      const std::size_t b = std::min(h.local.batch_size, shard.size());
      const std::vector<std::size_t> order = permutation(shard.size(), train_stream);
      std::vector<std::size_t> batch(b);
      for (std::size_t i = 0; i < b; ++i) batch[i] = shard[order[i]];
      std::vector<double> H(d);
      loss_and_grad(shape_, w_, train_, batch, H);
      const double scale = static_cast<double>(shard.size());
      const double prior = h.sgld_prior_precision /
                           static_cast<double>(cfg_.num_clients);
      for (std::size_t i = 0; i < d; ++i) H[i] = scale * H[i] + prior * w_[i];
      if (!klms) {
        QsgdQuantized qv = qsgd_quantize(H, h.quant_levels, quant_stream);
        out.payload_bits = out.total_bits = elias_gamma_bits(qv.levels);
        out.update = std::move(qv.values);
        return out;
      }
      auto [qq, pp] = sgld_client_distributions(H, sgld_);
      q = std::move(qq);
      p = std::move(pp);
      break;
    }
  }

  // KLMS path: encode, serialize, parse back and decode as the server would.
  const std::vector<double> kl = kl_per_coordinate(*q, *p);
  double kl_total = 0.0;
  for (double k : kl) kl_total += k;
  out.kl_per_param = kl_total / static_cast<double>(d);

  BlockPartition part = partition_;
  if (update_partition_) part = split_blocks_adaptive(kl, cfg_.codec);
  const StreamKey key = client_key(client, "codec");
  const EncodeResult enc =
      encode_update(*q, *p, part, cfg_.codec, key, update_partition_,
                    {round_, static_cast<std::uint32_t>(client)});
  const WireMessage msg = serialize_message(enc.update, cfg_.codec);
  serialized_bits_ += msg.bit_count;
  accounted_bits_ += enc.cost.total();
  if (msg.bit_count != enc.cost.total()) {
    throw std::logic_error("bit accounting disagrees with the wire format");
  }
  const EncodedUpdate received = deserialize(msg.bytes, cfg_.codec);
  std::vector<double> y = decode_update(*p, partition_, cfg_.codec, key, received);

  out.payload_bits = enc.cost.payload_bits;
  out.total_bits = enc.cost.total();
  out.avg_block_kl = received.avg_block_kl;
  if (received.includes_locations) {
    out.sent_partition = BlockPartition::from_lengths(received.block_lengths);
  }
  if (cfg_.method == Method::kQsgd) {
    out.payload_bits += 32;
    out.total_bits += 32;
    out.pattern = y;
    const double scale = norm / (1.0 - h.qsgd_mix);
    for (double& v : y) v *= scale;
  }
  out.update = std::move(y);
  return out;
}

RoundMetrics Simulator::run_round() {
  ++round_;
  const std::vector<std::size_t> ids = sample_participants();
  const std::size_t d = dimension();
  const bool klms = cfg_.variant == Variant::kKlms && cfg_.method != Method::kNone;

  std::vector<ClientOutput> outs;
  outs.reserve(ids.size());
  for (std::size_t c : ids) outs.push_back(run_client(c));

  RoundMetrics m;
  m.round = round_;
  std::vector<std::vector<double>> updates;
  updates.reserve(outs.size());
  double kl_sum = 0.0;
  for (auto& o : outs) {
    m.payload_bits += o.payload_bits;
    m.total_bits += o.total_bits;
    kl_sum += o.kl_per_param;
    updates.push_back(std::move(o.update));
  }
  const double denom = static_cast<double>(outs.size() * d);
  m.bpp_payload = static_cast<double>(m.payload_bits) / denom;
  m.bpp_total = static_cast<double>(m.total_bits) / denom;
  m.mean_kl_per_param = kl_sum / static_cast<double>(outs.size());

  if (klms) {
    if (update_partition_) {
      std::vector<BlockPartition> sent;
      for (const auto& o : outs) sent.push_back(*o.sent_partition);
      partition_ = aggregate_block_locations(sent, cfg_.codec.max_block_size);
      update_partition_ = false;
      m.partition_updated = true;
    } else {
      double avg = 0.0;
      for (const auto& o : outs) avg += static_cast<double>(o.avg_block_kl);
      avg /= static_cast<double>(outs.size());
      update_partition_ = should_update_partition(avg, cfg_.codec);
    }
  }

  switch (cfg_.method) {
    case Method::kFedPM:
      bayes_agg(updates, fedpm_, round_);
      break;
    case Method::kNone:
    case Method::kQsgd:
    case Method::kSignSgd:
      w_ = server_mean_step(w_, updates, cfg_.hyper.server_lr);
      break;
    case Method::kSgld:
      w_ = sgld_server_step(w_, updates, sgld_);
      if (!klms) {
        SampleStream noise = derive_stream(round_key("langevin"));
        const double s = std::sqrt(2.0 * sgld_.step);
        for (double& v : w_) v += s * noise.next_gaussian();
      }
      break;
  }
  if (cfg_.method == Method::kQsgd && klms) {
    std::vector<std::vector<double>> patterns;
    for (const auto& o : outs) patterns.push_back(o.pattern);
    qsgd_global_ = qsgd_klms_global_distribution(patterns, d);
  }
  m.accuracy = test_.size() > 0 ? evaluate(test_) : evaluate(train_);
  return m;
}

ExperimentResult run_experiment(const SimConfig& config, const Dataset& train,
                                const Dataset& test) {
  Simulator sim(config, train, test);
  ExperimentResult res;
  const Dataset& eval = test.size() > 0 ? test : train;
  res.summary.dimension = sim.dimension();
  res.summary.initial_accuracy = sim.evaluate(eval);
  res.summary.final_accuracy = res.summary.initial_accuracy;
  for (std::size_t t = 0; t < config.rounds; ++t) {
    res.rounds.push_back(sim.run_round());
  }
  res.summary.rounds = res.rounds.size();
  for (const auto& r : res.rounds) {
    res.summary.mean_bpp_payload += r.bpp_payload;
    res.summary.mean_bpp_total += r.bpp_total;
    res.summary.total_bits += r.total_bits;
    res.summary.partition_updates += r.partition_updated ? 1 : 0;
  }
  if (!res.rounds.empty()) {
    const double n = static_cast<double>(res.rounds.size());
    res.summary.mean_bpp_payload /= n;
    res.summary.mean_bpp_total /= n;
    res.summary.final_accuracy = res.rounds.back().accuracy;
  }
  return res;
}

std::string metrics_csv(std::span<const RoundMetrics> rounds) {
  std::string out =
      "round,bpp_payload,bpp_total,accuracy,mean_kl_per_param,partition_updated\n";
  char buf[256];
  for (const auto& r : rounds) {
    std::snprintf(buf, sizeof(buf), "%u,%.9g,%.9g,%.6f,%.9g,%d\n", r.round,
                  r.bpp_payload, r.bpp_total, r.accuracy, r.mean_kl_per_param,
                  r.partition_updated ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace klms
