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
#include "klms/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace klms {

namespace {

void check_sizes(const ModelShape& shape, std::span<const double> w,
                 std::size_t inputs) {
  if (w.size() != shape.parameter_count()) {
    throw std::invalid_argument("model: expected " +
                                std::to_string(shape.parameter_count()) +
                                " parameters, got " + std::to_string(w.size()));
  }
  if (inputs != shape.inputs) {
    throw std::invalid_argument("model: expected " +
                                std::to_string(shape.inputs) +
                                " inputs, got " + std::to_string(inputs));
  }
}

// out = W x + b, W row-major [rows x cols].
void affine(const double* W, const double* b, std::span<const double> x,
            std::size_t rows, double* out) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = W + r * cols;
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

// In place: logits -> probabilities. Returns log-sum-exp.
double softmax_inplace(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : z) v /= total;
  return mx + std::log(total);
}

}  // namespace

std::size_t ModelShape::parameter_count() const {
  if (kind == ModelKind::kLogistic) return classes * inputs + classes;
  return hidden * inputs + hidden + classes * hidden + classes;
}

void ModelShape::validate() const {
  if (inputs == 0) throw std::invalid_argument("model: inputs must be >= 1");
  if (classes < 2) throw std::invalid_argument("model: classes must be >= 2");
  if (kind == ModelKind::kMlp && hidden == 0) {
    throw std::invalid_argument("model: mlp needs hidden >= 1");
  }
}

std::vector<double> init_parameters(const ModelShape& shape,
                                    SampleStream& stream, bool random_bias) {
  shape.validate();
  std::vector<double> w(shape.parameter_count(), 0.0);
  auto fill = [&](std::size_t offset, std::size_t count, double std) {
    for (std::size_t i = 0; i < count; ++i) {
      w[offset + i] = std * stream.next_gaussian();
    }
  };
  if (shape.kind == ModelKind::kLogistic) {
    const double s = 1.0 / std::sqrt(static_cast<double>(shape.inputs));
    fill(0, shape.classes * shape.inputs, s);
    if (random_bias) fill(shape.classes * shape.inputs, shape.classes, s);
    return w;
  }
  const double s1 = 1.0 / std::sqrt(static_cast<double>(shape.inputs));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  const std::size_t w1 = shape.hidden * shape.inputs;
  const std::size_t w2 = w1 + shape.hidden;
  fill(0, w1, s1);
  if (random_bias) fill(w1, shape.hidden, s1);
  fill(w2, shape.classes * shape.hidden, s2);
  if (random_bias) fill(w2 + shape.classes * shape.hidden, shape.classes, s2);
  return w;
}

void forward(const ModelShape& shape, std::span<const double> w,
             std::span<const double> x, std::span<double> logits) {
  check_sizes(shape, w, x.size());
  if (shape.kind == ModelKind::kLogistic) {
    affine(w.data(), w.data() + shape.classes * shape.inputs, x,
           shape.classes, logits.data());
    return;
  }
  std::vector<double> h(shape.hidden);
  const std::size_t w1 = shape.hidden * shape.inputs;
  affine(w.data(), w.data() + w1, x, shape.hidden, h.data());
  for (double& v : h) v = std::tanh(v);
  const std::size_t w2 = w1 + shape.hidden;
  affine(w.data() + w2, w.data() + w2 + shape.classes * shape.hidden, h,
         shape.classes, logits.data());
}

double loss_and_grad(const ModelShape& shape, std::span<const double> w,
                     const Dataset& data, std::span<const std::size_t> batch,
                     std::span<double> grad) {
  check_sizes(shape, w, data.num_features);
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  const bool want_grad = !grad.empty();
  if (want_grad) {
    if (grad.size() != w.size()) {
      throw std::invalid_argument("loss_and_grad: gradient size mismatch");
    }
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const std::size_t C = shape.classes, D = shape.inputs, H = shape.hidden;
  std::vector<double> z(C), h(H), dh(H);
  double loss = 0.0;

  for (std::size_t idx : batch) {
    const std::span<const double> x = data.row(idx);
    const std::uint32_t y = data.labels[idx];
    if (y >= C) throw std::out_of_range("loss_and_grad: label >= classes");
    if (shape.kind == ModelKind::kLogistic) {
      affine(w.data(), w.data() + C * D, x, C, z.data());
    } else {
      affine(w.data(), w.data() + H * D, x, H, h.data());
      for (double& v : h) v = std::tanh(v);
      const std::size_t o2 = H * D + H;
      affine(w.data() + o2, w.data() + o2 + C * H, h, C, z.data());
    }
    const double zy = z[y];
    const double lse = softmax_inplace(z);
    loss += (lse - zy) * inv_b;
    if (!want_grad) continue;
    z[y] -= 1.0;  // dL/dlogits
    if (shape.kind == ModelKind::kLogistic) {
      for (std::size_t c = 0; c < C; ++c) {
        const double g = z[c] * inv_b;
        double* gr = grad.data() + c * D;
        for (std::size_t j = 0; j < D; ++j) gr[j] += g * x[j];
        grad[C * D + c] += g;
      }
      continue;
    }
    const std::size_t o2 = H * D + H;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      const double g = z[c] * inv_b;
      const double* w2 = w.data() + o2 + c * H;
      double* g2 = grad.data() + o2 + c * H;
      for (std::size_t k = 0; k < H; ++k) {
        g2[k] += g * h[k];
        dh[k] += g * w2[k];
      }
      grad[o2 + C * H + c] += g;
    }
    for (std::size_t k = 0; k < H; ++k) {
      const double g = dh[k] * (1.0 - h[k] * h[k]);
      double* g1 = grad.data() + k * D;
      for (std::size_t j = 0; j < D; ++j) g1[j] += g * x[j];
      grad[H * D + k] += g;
    }
  }
  return loss;
}

std::size_t predict(const ModelShape& shape, std::span<const double> w,
                    std::span<const double> x) {
  std::vector<double> z(shape.classes);
  forward(shape, w, x, z);
  return static_cast<std::size_t>(
      std::max_element(z.begin(), z.end()) - z.begin());
}

double accuracy(const ModelShape& shape, std::span<const double> w,
                const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  std::size_t correct = 0;
  std::vector<double> z(shape.classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(shape, w, data.row(i), z);
    const auto best = static_cast<std::size_t>(
        std::max_element(z.begin(), z.end()) - z.begin());
    correct += best == data.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace klms
