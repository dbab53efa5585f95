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
#include "klms/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace klms {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_probs(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw std::invalid_argument(std::string(what) +
                                  ": probabilities must lie in [0, 1]");
    }
  }
}

void check_dimension(std::size_t d, const char* what) {
  if (d == 0) {
    throw std::invalid_argument(std::string(what) + ": dimension must be >= 1");
  }
}

void check_range(const ProductDistribution& dist, CoordRange range) {
  if (range.lo > range.hi || range.hi > dist.dimension()) {
    throw std::out_of_range("coordinate range [" + std::to_string(range.lo) +
                            ", " + std::to_string(range.hi) +
                            ") invalid for dimension " +
                            std::to_string(dist.dimension()));
  }
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// a * ln(a / b) with the 0 ln 0 = 0 convention.
double kl_term(double a, double b) {
  if (a == 0.0) return 0.0;
  if (b == 0.0) {
    throw std::domain_error(
        "KL undefined: q has mass on an outcome where p has none");
  }
  return a * std::log(a / b);
}

bool is_sign_kind(DistributionKind k) {
  return k == DistributionKind::kBinarySign ||
         k == DistributionKind::kUniformSign;
}

double plus_prob(const ProductDistribution& d, std::size_t i) {
  return d.kind() == DistributionKind::kUniformSign ? 0.5 : d.primary()[i];
}

}  // namespace

const char* to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::kBernoulli: return "bernoulli";
    case DistributionKind::kTernary: return "ternary";
    case DistributionKind::kBinarySign: return "binary_sign";
    case DistributionKind::kGaussian: return "gaussian";
    case DistributionKind::kUniformSign: return "uniform_sign";
  }
  return "unknown";
}

ProductDistribution ProductDistribution::bernoulli(std::vector<double> probs) {
  check_dimension(probs.size(), "bernoulli");
  check_probs(probs, "bernoulli");
  ProductDistribution d(DistributionKind::kBernoulli, probs.size());
  d.a_ = std::move(probs);
  return d;
}

ProductDistribution ProductDistribution::ternary(std::vector<double> p_neg,
                                                 std::vector<double> p_zero,
                                                 std::vector<double> p_pos,
                                                 double scale) {
  check_dimension(p_pos.size(), "ternary");
  if (p_neg.size() != p_pos.size() || p_zero.size() != p_pos.size()) {
    throw std::invalid_argument("ternary: parameter arrays differ in length");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("ternary: scale must be finite and > 0");
  }
  check_probs(p_neg, "ternary");
  check_probs(p_zero, "ternary");
  check_probs(p_pos, "ternary");
  for (std::size_t i = 0; i < p_pos.size(); ++i) {
    if (std::abs(p_neg[i] + p_zero[i] + p_pos[i] - 1.0) > 1e-12) {
      throw std::invalid_argument("ternary: coordinate " + std::to_string(i) +
                                  " does not sum to 1");
    }
  }
  ProductDistribution d(DistributionKind::kTernary, p_pos.size());
  d.a_ = std::move(p_pos);
  d.b_ = std::move(p_neg);
  d.c_ = std::move(p_zero);
  d.scale_ = scale;
  return d;
}

ProductDistribution ProductDistribution::binary_sign(
    std::vector<double> p_plus) {
  check_dimension(p_plus.size(), "binary_sign");
  check_probs(p_plus, "binary_sign");
  ProductDistribution d(DistributionKind::kBinarySign, p_plus.size());
  d.a_ = std::move(p_plus);
  return d;
}

ProductDistribution ProductDistribution::gaussian(std::vector<double> means,
                                                  double sigma) {
  check_dimension(means.size(), "gaussian");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("gaussian: sigma must be finite and > 0");
  }
  ProductDistribution d(DistributionKind::kGaussian, means.size());
  d.a_ = std::move(means);
  d.scale_ = sigma;
  return d;
}

ProductDistribution ProductDistribution::uniform_sign(std::size_t dimension) {
  check_dimension(dimension, "uniform_sign");
  return ProductDistribution(DistributionKind::kUniformSign, dimension);
}

unsigned ProductDistribution::draws_per_coordinate() const {
  return kind_ == DistributionKind::kGaussian ? 2U : 1U;
}

double ProductDistribution::log_mass_at(std::size_t i, double x) const {
  switch (kind_) {
    case DistributionKind::kBernoulli:
      if (x == 1.0) return safe_log(a_[i]);
      if (x == 0.0) return safe_log(1.0 - a_[i]);
      return kNegInf;
    case DistributionKind::kTernary:
      if (x > 0.0) return safe_log(a_[i]);
      if (x < 0.0) return safe_log(b_[i]);
      if (x == 0.0) return safe_log(c_[i]);
      return kNegInf;
    case DistributionKind::kBinarySign:
      if (x == 1.0) return safe_log(a_[i]);
      if (x == -1.0) return safe_log(1.0 - a_[i]);
      return kNegInf;
    case DistributionKind::kUniformSign:
      return (x == 1.0 || x == -1.0) ? -std::numbers::ln2 : kNegInf;
    case DistributionKind::kGaussian: {
      const double z = (x - a_[i]) / scale_;
      return -0.5 * z * z - std::log(scale_) -
             0.5 * std::log(2.0 * std::numbers::pi);
    }
  }
  return kNegInf;
}

double ProductDistribution::sample_at(std::size_t i,
                                      SampleStream& stream) const {
  switch (kind_) {
    case DistributionKind::kBernoulli:
      return stream.next_uniform() < a_[i] ? 1.0 : 0.0;
    case DistributionKind::kBinarySign:
      return stream.next_uniform() < a_[i] ? 1.0 : -1.0;
    case DistributionKind::kUniformSign:
      return stream.next_uniform() < 0.5 ? 1.0 : -1.0;
    case DistributionKind::kTernary: {
      const double u = stream.next_uniform();
      if (u < b_[i]) return -scale_;
      if (u < b_[i] + c_[i]) return 0.0;
      // Rounding can leave u above the last cumulative bucket; never return
      // an outcome with zero mass.
      if (a_[i] > 0.0) return scale_;
      return c_[i] > 0.0 ? 0.0 : -scale_;
    }
    case DistributionKind::kGaussian:
      return a_[i] + scale_ * stream.next_gaussian();
  }
  return 0.0;
}

void sample_into(const ProductDistribution& dist, CoordRange range,
                 SampleStream& stream, std::span<double> out) {
  check_range(dist, range);
  if (out.size() != range.size()) {
    throw std::invalid_argument("sample_into: output length mismatch");
  }
  for (std::size_t i = range.lo; i < range.hi; ++i) {
    out[i - range.lo] = dist.sample_at(i, stream);
  }
}

std::vector<double> sample(const ProductDistribution& dist, CoordRange range,
                           SampleStream& stream) {
  check_range(dist, range);
  if (range.lo == range.hi) {
    throw std::out_of_range("sample: empty coordinate range");
  }
  std::vector<double> out(range.size());
  sample_into(dist, range, stream, out);
  return out;
}

double log_mass(const ProductDistribution& dist, CoordRange range,
                std::span<const double> x) {
  check_range(dist, range);
  if (x.size() != range.size()) {
    throw std::invalid_argument("log_mass: value length " +
                                std::to_string(x.size()) +
                                " != range length " +
                                std::to_string(range.size()));
  }
  double total = 0.0;
  for (std::size_t i = range.lo; i < range.hi; ++i) {
    const double lm = dist.log_mass_at(i, x[i - range.lo]);
    if (lm == kNegInf) return kNegInf;
    total += lm;
  }
  return total;
}

bool kl_compatible(const ProductDistribution& q,
                   const ProductDistribution& p) {
  if (q.dimension() != p.dimension()) return false;
  if (is_sign_kind(q.kind()) && is_sign_kind(p.kind())) return true;
  if (q.kind() != p.kind()) return false;
  if (q.kind() == DistributionKind::kGaussian) {
    return std::abs(q.scale() - p.scale()) <= 1e-12 * p.scale();
  }
  return true;
}

namespace {

double kl_coordinate(const ProductDistribution& q, const ProductDistribution& p,
                     std::size_t i) {
  switch (q.kind()) {
    case DistributionKind::kBernoulli: {
      const double a = q.primary()[i], b = p.primary()[i];
      return kl_term(a, b) + kl_term(1.0 - a, 1.0 - b);
    }
    case DistributionKind::kTernary:
      return kl_term(q.p_neg()[i], p.p_neg()[i]) +
             kl_term(q.p_zero()[i], p.p_zero()[i]) +
             kl_term(q.p_pos()[i], p.p_pos()[i]);
    case DistributionKind::kBinarySign:
    case DistributionKind::kUniformSign: {
      const double a = plus_prob(q, i), b = plus_prob(p, i);
      return kl_term(a, b) + kl_term(1.0 - a, 1.0 - b);
    }
    case DistributionKind::kGaussian: {
      const double diff = q.primary()[i] - p.primary()[i];
      return diff * diff / (2.0 * p.scale() * p.scale());
    }
  }
  return 0.0;
}

void require_compatible(const ProductDistribution& q,
                        const ProductDistribution& p) {
  if (!kl_compatible(q, p)) {
    throw std::invalid_argument(
        std::string("KL: incompatible distributions (") + to_string(q.kind()) +
        " d=" + std::to_string(q.dimension()) + " vs " + to_string(p.kind()) +
        " d=" + std::to_string(p.dimension()) + ")");
  }
}

}  // namespace

std::vector<double> kl_per_coordinate(const ProductDistribution& q,
                                      const ProductDistribution& p) {
  require_compatible(q, p);
  std::vector<double> out(q.dimension());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::max(kl_coordinate(q, p, i), 0.0);
  }
  return out;
}

double kl_block(const ProductDistribution& q, const ProductDistribution& p,
                CoordRange range) {
  require_compatible(q, p);
  check_range(q, range);
  double total = 0.0;
  for (std::size_t i = range.lo; i < range.hi; ++i) {
    total += std::max(kl_coordinate(q, p, i), 0.0);
  }
  return total;
}

}  // namespace klms
