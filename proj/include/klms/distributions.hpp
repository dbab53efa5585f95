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
#include <span>
#include <vector>

#include "klms/rng.hpp"

namespace klms {

enum class DistributionKind {
  kBernoulli,
  kTernary,
  kBinarySign,
  kGaussian,
  kUniformSign,
};

const char* to_string(DistributionKind kind);

// Half-open coordinate range [lo, hi).
struct CoordRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t size() const { return hi - lo; }
  bool operator==(const CoordRange&) const = default;
};

// Factorized distribution over R^d. Immutable after construction.
//
//   Bernoulli    support {0, 1},        param P(1) per coordinate
//   Ternary      support {-s, 0, +s},   (P(-), P(0), P(+)) per coordinate,
//                                       magnitude s > 0 shared
//   BinarySign   support {-1, +1},      param P(+1) per coordinate
//   Gaussian     N(mu_i, sigma^2),      shared sigma > 0
//   UniformSign  support {-1, +1},      P(+1) = 1/2
//
// Ternary masses are evaluated on the sign pattern of a value, so they do not
// depend on the magnitude s of either the value or the distribution.
class ProductDistribution {
 public:
  static ProductDistribution bernoulli(std::vector<double> probs);
  static ProductDistribution ternary(std::vector<double> p_neg,
                                     std::vector<double> p_zero,
                                     std::vector<double> p_pos,
                                     double scale = 1.0);
  static ProductDistribution binary_sign(std::vector<double> p_plus);
  static ProductDistribution gaussian(std::vector<double> means, double sigma);
  static ProductDistribution uniform_sign(std::size_t dimension);

  DistributionKind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }

  // Bernoulli: P(1). BinarySign: P(+1). Gaussian: means. Ternary: P(+).
  std::span<const double> primary() const { return a_; }
  // Ternary only.
  std::span<const double> p_neg() const { return b_; }
  std::span<const double> p_zero() const { return c_; }
  std::span<const double> p_pos() const { return a_; }
  // Ternary magnitude or Gaussian sigma; 1 otherwise.
  double scale() const { return scale_; }

  // Uniform draws consumed per coordinate by sample(): 2 for Gaussian, else 1.
  unsigned draws_per_coordinate() const;

  // Log mass (log density for Gaussian) of value x at coordinate i, in nats.
  // Values with zero mass give -infinity.
  double log_mass_at(std::size_t i, double x) const;

  // One draw for coordinate i.
  double sample_at(std::size_t i, SampleStream& stream) const;

 private:
  ProductDistribution(DistributionKind kind, std::size_t dimension)
      : kind_(kind), dimension_(dimension) {}

  DistributionKind kind_;
  std::size_t dimension_;
  std::vector<double> a_, b_, c_;
  double scale_ = 1.0;
};

// Independent per-coordinate draws over range. Throws std::out_of_range for
// an invalid range.
std::vector<double> sample(const ProductDistribution& dist, CoordRange range,
                           SampleStream& stream);
void sample_into(const ProductDistribution& dist, CoordRange range,
                 SampleStream& stream, std::span<double> out);

// Sum of per-coordinate log masses over range, in nats. Returns -infinity if
// any coordinate of x has zero mass. Throws std::invalid_argument when
// x.size() != range.size().
double log_mass(const ProductDistribution& dist, CoordRange range,
                std::span<const double> x);

// True when kl_per_coordinate(q, p) is defined for the two kinds.
bool kl_compatible(const ProductDistribution& q, const ProductDistribution& p);

// Coordinate-wise KL(q_i || p_i) in nats. Throws std::invalid_argument for
// incompatible kinds, dimensions, or Gaussian sigmas, and std::domain_error
// when q puts mass where p has none.
std::vector<double> kl_per_coordinate(const ProductDistribution& q,
                                      const ProductDistribution& p);

// Sum of kl_per_coordinate over range.
double kl_block(const ProductDistribution& q, const ProductDistribution& p,
                CoordRange range);

}  // namespace klms
