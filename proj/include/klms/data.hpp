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
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "klms/rng.hpp"

namespace klms {

// Dense row-major feature matrix with integer class labels.
struct Dataset {
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;      // size() * num_features
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
  void push_back(std::span<const double> x, std::uint32_t label);
};

// One row per sample: label first, then the features. A header line is
// skipped when its first field is not numeric. num_classes = max label + 1.
Dataset load_csv(const std::filesystem::path& path);

// IDX image and label files (the MNIST container format). Pixels are scaled
// to [0, 1].
Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels);

struct SeparableSpec {
  std::size_t samples = 400;
  std::size_t features = 20;
  double margin = 0.5;   // minimum |<x, u>| after filtering
  double shift = 1.5;    // class offset along u
};

// Two classes: x = z + (2y - 1) * shift * u with z ~ N(0, I) and a fixed
// random unit vector u. Points closer than margin to the hyperplane <x,u>=0
// are redrawn, so the set is linearly separable.
Dataset make_separable(const SeparableSpec& spec, SampleStream& stream);

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

enum class SplitMode { kIid, kNonIid };

struct DataPartition {
  std::vector<std::vector<std::size_t>> shards;  // indices into the dataset
};

// iid: shuffle and deal out equal shards (the first size % N shards get one
// extra sample). non-iid: shard n gets a share j_n / sum(j) of the data with
// j_n ~ Unif{10..100}, drawn from at most c_max randomly chosen classes; a
// shard whose classes run out of samples stays short.
DataPartition partition_data(const Dataset& data, std::size_t num_shards,
                             SplitMode mode, std::optional<std::size_t> c_max,
                             SampleStream& stream);

// Uniform random permutation of 0..n-1 (Fisher-Yates).
std::vector<std::size_t> permutation(std::size_t n, SampleStream& stream);

}  // namespace klms
