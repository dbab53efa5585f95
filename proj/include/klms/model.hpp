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

#include "klms/data.hpp"
#include "klms/rng.hpp"

namespace klms {

enum class ModelKind { kLogistic, kMlp };

// Flat parameter layouts:
//   logistic  W[classes x inputs], b[classes]
//   mlp       W1[hidden x inputs], b1[hidden], W2[classes x hidden], b2[classes]
// The mlp hidden layer uses tanh. Both end in softmax cross-entropy.
struct ModelShape {
  ModelKind kind = ModelKind::kLogistic;
  std::size_t inputs = 0;
  std::size_t classes = 0;
  std::size_t hidden = 0;

  std::size_t parameter_count() const;
  void validate() const;
};

// Gaussian weights with std 1/sqrt(fan_in). Biases get the same scale when
// random_bias is set, otherwise zero.
std::vector<double> init_parameters(const ModelShape& shape,
                                    SampleStream& stream, bool random_bias);

// Logits for one input row.
void forward(const ModelShape& shape, std::span<const double> w,
             std::span<const double> x, std::span<double> logits);

// Mean cross-entropy over the batch (indices into data). When grad is
// non-empty it receives the gradient of that mean w.r.t. w.
double loss_and_grad(const ModelShape& shape, std::span<const double> w,
                     const Dataset& data, std::span<const std::size_t> batch,
                     std::span<double> grad);

std::size_t predict(const ModelShape& shape, std::span<const double> w,
                    std::span<const double> x);

// Top-1 accuracy. Throws std::invalid_argument on an empty dataset.
double accuracy(const ModelShape& shape, std::span<const double> w,
                const Dataset& data);

}  // namespace klms
