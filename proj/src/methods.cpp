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

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace klms {

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

template <typename Step>
void for_each_batch(std::span<const std::size_t> shard,
                    const LocalTrainHyper& hyper, SampleStream& stream,
                    Step step) {
  if (shard.empty()) throw std::invalid_argument("local training: empty shard");
  if (hyper.batch_size == 0) {
    throw std::invalid_argument("local training: batch_size must be >= 1");
  }
  const std::size_t b = std::min(hyper.batch_size, shard.size());
  std::vector<std::size_t> batch;
  for (std::size_t e = 0; e < hyper.epochs; ++e) {
    const std::vector<std::size_t> order = permutation(shard.size(), stream);
    for (std::size_t lo = 0; lo < order.size(); lo += b) {
      const std::size_t hi = std::min(order.size(), lo + b);
      batch.clear();
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(shard[order[i]]);
      step(std::span<const std::size_t>(batch));
    }
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

std::vector<double> sgd_local_train(const ModelShape& shape,
                                    std::span<const double> w0,
                                    const Dataset& data,
                                    std::span<const std::size_t> shard,
                                    const LocalTrainHyper& hyper,
                                    SampleStream& stream) {
  std::vector<double> w(w0.begin(), w0.end());
  std::vector<double> grad(w.size());
  for_each_batch(shard, hyper, stream, [&](std::span<const std::size_t> batch) {
    loss_and_grad(shape, w, data, batch, grad);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= hyper.lr * grad[i];
  });
  return w;
}

FedPMState fedpm_init(std::vector<double> frozen_weights,
                      std::span<const double> initial_scores, double lambda0,
                      std::uint32_t prior_reset_every) {
  if (frozen_weights.size() != initial_scores.size()) {
    throw std::invalid_argument("fedpm_init: scores and weights differ in size");
  }
  if (!(lambda0 > 0.0)) throw std::invalid_argument("fedpm_init: lambda0 <= 0");
  FedPMState s;
  s.theta.resize(initial_scores.size());
  for (std::size_t i = 0; i < s.theta.size(); ++i) {
    s.theta[i] = sigmoid(initial_scores[i]);
  }
  s.alpha.assign(s.theta.size(), lambda0);
  s.beta.assign(s.theta.size(), lambda0);
  s.lambda0 = lambda0;
  s.frozen_weights = std::move(frozen_weights);
  s.prior_reset_every = prior_reset_every;
  return s;
}

std::vector<double> fedpm_local_train(std::span<const double> scores,
                                      const ModelShape& shape,
                                      std::span<const double> frozen_weights,
                                      const Dataset& data,
                                      std::span<const std::size_t> shard,
                                      const LocalTrainHyper& hyper,
                                      SampleStream& stream) {
  const std::size_t d = scores.size();
  if (frozen_weights.size() != d) {
    throw std::invalid_argument("fedpm_local_train: size mismatch");
  }
  std::vector<double> s(scores.begin(), scores.end());
  std::vector<double> phi(d), masked(d), grad(d);
  for_each_batch(shard, hyper, stream, [&](std::span<const std::size_t> batch) {
    for (std::size_t i = 0; i < d; ++i) {
      phi[i] = sigmoid(s[i]);
      masked[i] = stream.next_uniform() < phi[i] ? frozen_weights[i] : 0.0;
    }
    loss_and_grad(shape, masked, data, batch, grad);
    for (std::size_t i = 0; i < d; ++i) {
      s[i] -= hyper.lr * grad[i] * frozen_weights[i] * phi[i] * (1.0 - phi[i]);
    }
  });
  for (std::size_t i = 0; i < d; ++i) phi[i] = sigmoid(s[i]);
  return phi;
}

void bayes_agg(std::span<const std::vector<double>> masks, FedPMState& state,
               std::uint32_t round) {
  const std::size_t d = state.theta.size();
  for (const auto& m : masks) {
    if (m.size() != d) throw std::invalid_argument("bayes_agg: mask length");
    for (double x : m) {
      if (x != 0.0 && x != 1.0) {
        throw std::invalid_argument("bayes_agg: mask entries must be 0 or 1");
      }
    }
  }
  if (masks.empty()) return;
  if (state.prior_reset_every > 0 && round % state.prior_reset_every == 0) {
    std::fill(state.alpha.begin(), state.alpha.end(), state.lambda0);
    std::fill(state.beta.begin(), state.beta.end(), state.lambda0);
  }
  const double C = static_cast<double>(masks.size());
  for (std::size_t i = 0; i < d; ++i) {
    double agg = 0.0;
    for (const auto& m : masks) agg += m[i];
    state.alpha[i] += agg;
    state.beta[i] += C - agg;
    const double denom = state.alpha[i] + state.beta[i] - 2.0;
    const double t = denom > 0.0
                         ? (state.alpha[i] - 1.0) / denom
                         : state.alpha[i] / (state.alpha[i] + state.beta[i]);
    state.theta[i] = std::clamp(t, 0.0, 1.0);
  }
}

std::vector<double> fedpm_sample_weights(const FedPMState& state,
                                         SampleStream& stream) {
  std::vector<double> w(state.theta.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = stream.next_uniform() < state.theta[i] ? state.frozen_weights[i] : 0.0;
  }
  return w;
}

std::uint64_t mask_entropy_bits(std::span<const double> mask) {
  if (mask.empty()) return 0;
  std::size_t ones = 0;
  for (double x : mask) ones += x != 0.0 ? 1 : 0;
  if (ones == 0 || ones == mask.size()) return 0;
  const double n = static_cast<double>(mask.size());
  const double p = static_cast<double>(ones) / n;
  const double h = -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
  return static_cast<std::uint64_t>(std::ceil(n * h));
}

void QsgdParams::validate() const {
  if (quant_levels < 1) throw std::invalid_argument("quant_levels: must be >= 1");
  if (!(server_lr > 0.0)) throw std::invalid_argument("server_lr: must be > 0");
}

ProductDistribution qsgd_client_distribution(std::span<const double> v) {
  const std::size_t d = v.size();
  std::vector<double> neg(d, 0.0), zero(d, 1.0), pos(d, 0.0);
  const double norm = l2_norm(v);
  if (norm == 0.0) return ProductDistribution::ternary(neg, zero, pos, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double a = std::min(std::abs(v[i]) / norm, 1.0);
    if (v[i] > 0) pos[i] = a;
    if (v[i] < 0) neg[i] = a;
    zero[i] = 1.0 - a;
  }
  return ProductDistribution::ternary(neg, zero, pos, norm);
}

QsgdQuantized qsgd_quantize(std::span<const double> v,
                            std::uint32_t quant_levels, SampleStream& stream) {
  if (quant_levels < 1) throw std::invalid_argument("qsgd: quant_levels < 1");
  QsgdQuantized out;
  out.values.assign(v.size(), 0.0);
  out.levels.assign(v.size(), 0);
  out.norm = l2_norm(v);
  const double s = quant_levels;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double u = stream.next_uniform();
    if (out.norm == 0.0) continue;
    const double r = std::min(std::abs(v[i]) * s / out.norm, s);
    const double fl = std::floor(r);
    const double level = u < r - fl ? fl + 1.0 : fl;
    out.levels[i] = static_cast<std::uint32_t>(level);
    const double sign = v[i] < 0 ? -1.0 : 1.0;
    out.values[i] = out.norm * sign * level / s;
  }
  return out;
}

std::uint64_t elias_gamma_bits(std::span<const std::uint32_t> levels) {
  std::uint64_t bits = 32;
  for (std::uint32_t x : levels) {
    const std::uint64_t n = std::uint64_t{x} + 1;
    bits += 2 * (std::bit_width(n) - 1) + 1;
    if (x != 0) bits += 1;
  }
  return bits;
}

ProductDistribution qsgd_klms_global_distribution(
    std::span<const std::vector<double>> patterns, std::size_t dimension) {
  std::vector<double> neg(dimension, 1.0), zero(dimension, 1.0),
      pos(dimension, 1.0);
  for (const auto& pat : patterns) {
    if (pat.size() != dimension) {
      throw std::invalid_argument("qsgd global distribution: pattern length");
    }
    for (std::size_t i = 0; i < dimension; ++i) {
      if (pat[i] > 0) {
        pos[i] += 1.0;
      } else if (pat[i] < 0) {
        neg[i] += 1.0;
      } else {
        zero[i] += 1.0;
      }
    }
  }
  const double total = static_cast<double>(patterns.size()) + 3.0;
  for (std::size_t i = 0; i < dimension; ++i) {
    neg[i] /= total;
    pos[i] /= total;
    zero[i] = 1.0 - neg[i] - pos[i];
  }
  return ProductDistribution::ternary(neg, zero, pos, 1.0);
}

ProductDistribution mix_with_uniform(const ProductDistribution& ternary,
                                     double eps) {
  if (ternary.kind() != DistributionKind::kTernary) {
    throw std::invalid_argument("mix_with_uniform: ternary distribution only");
  }
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw std::invalid_argument("mix_with_uniform: eps must be in [0, 1]");
  }
  const std::size_t d = ternary.dimension();
  std::vector<double> neg(d), zero(d), pos(d);
  for (std::size_t i = 0; i < d; ++i) {
    neg[i] = (1.0 - eps) * ternary.p_neg()[i] + eps / 3.0;
    pos[i] = (1.0 - eps) * ternary.p_pos()[i] + eps / 3.0;
    zero[i] = 1.0 - neg[i] - pos[i];
  }
  return ProductDistribution::ternary(neg, zero, pos, ternary.scale());
}

void SignParams::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature: must be > 0");
  if (!(server_lr > 0.0)) throw std::invalid_argument("server_lr: must be > 0");
}

ProductDistribution signsgd_client_distribution(std::span<const double> v,
                                                const SignParams& params) {
  params.validate();
  std::vector<double> p(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    p[i] = sigmoid(v[i] / params.temperature);
  }
  return ProductDistribution::binary_sign(std::move(p));
}

void SgldParams::validate() const {
  if (!(step > 0.0)) throw std::invalid_argument("step: must be > 0");
  if (!(server_lr > 0.0)) throw std::invalid_argument("server_lr: must be > 0");
  if (!(noise_std > 0.0)) throw std::invalid_argument("noise_std: must be > 0");
}

double sgld_default_noise_std(double step, double server_lr,
                              std::size_t clients) {
  return std::sqrt(2.0 * step * static_cast<double>(clients)) / server_lr;
}

std::pair<ProductDistribution, ProductDistribution> sgld_client_distributions(
    std::span<const double> H, const SgldParams& params) {
  params.validate();
  return {ProductDistribution::gaussian({H.begin(), H.end()}, params.noise_std),
          ProductDistribution::gaussian(std::vector<double>(H.size(), 0.0),
                                        params.noise_std)};
}

std::vector<double> server_mean_step(std::span<const double> w,
                                     std::span<const std::vector<double>> updates,
                                     double lr) {
  if (updates.empty()) throw std::invalid_argument("server step: no updates");
  std::vector<double> mean(w.size(), 0.0);
  for (const auto& u : updates) {
    if (u.size() != w.size()) {
      throw std::invalid_argument("server step: update has dimension " +
                                  std::to_string(u.size()) + ", model has " +
                                  std::to_string(w.size()));
    }
    for (std::size_t i = 0; i < w.size(); ++i) mean[i] += u[i];
  }
  const double scale = lr / static_cast<double>(updates.size());
  std::vector<double> out(w.begin(), w.end());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] -= scale * mean[i];
  return out;
}

std::vector<double> sgld_server_step(std::span<const double> theta,
                                     std::span<const std::vector<double>> decoded,
                                     const SgldParams& params) {
  return server_mean_step(theta, decoded, params.server_lr);
}

}  // namespace klms
