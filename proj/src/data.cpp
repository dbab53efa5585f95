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
#include "klms/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace klms {

namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error(path.string() + ": truncated IDX header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  return in;
}

bool parse_double(const std::string& field, double& out) {
  const char* begin = field.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\r' || *end == '\t')) ++end;
  return end != begin && end && *end == '\0';
}

}  // namespace

void Dataset::push_back(std::span<const double> x, std::uint32_t label) {
  if (x.size() != num_features) {
    throw std::invalid_argument("Dataset: feature count mismatch");
  }
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
  num_classes = std::max<std::size_t>(num_classes, label + 1);
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string field;
    row.clear();
    bool numeric = true;
    while (std::getline(ss, field, ',')) {
      double v = 0.0;
      if (!parse_double(field, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (line_no == 1) continue;
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": non-numeric field '" + field + "'");
    }
    if (row.size() < 2) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": need a label and at least one feature");
    }
    if (data.size() == 0 && data.num_features == 0) {
      data.num_features = row.size() - 1;
    }
    if (row.size() - 1 != data.num_features) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected " +
                               std::to_string(data.num_features + 1) +
                               " fields, got " + std::to_string(row.size()));
    }
    const double label = row[0];
    if (label < 0 || label != std::floor(label) || label > 1e6) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": label must be a non-negative integer");
    }
    data.push_back(std::span<const double>(row).subspan(1),
                   static_cast<std::uint32_t>(label));
  }
  if (data.size() == 0) throw std::runtime_error(path.string() + ": no rows");
  return data;
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels) {
  std::ifstream img = open_binary(images);
  std::ifstream lab = open_binary(labels);
  if (read_be32(img, images) != 0x00000803) {
    throw std::runtime_error(images.string() + ": not an IDX image file");
  }
  if (read_be32(lab, labels) != 0x00000801) {
    throw std::runtime_error(labels.string() + ": not an IDX label file");
  }
  const std::uint32_t n = read_be32(img, images);
  const std::uint32_t rows = read_be32(img, images);
  const std::uint32_t cols = read_be32(img, images);
  if (read_be32(lab, labels) != n) {
    throw std::runtime_error(labels.string() + ": count differs from images");
  }
  Dataset data;
  data.num_features = std::size_t{rows} * cols;
  std::vector<unsigned char> pixels(data.num_features);
  std::vector<double> x(data.num_features);
  for (std::uint32_t i = 0; i < n; ++i) {
    char label = 0;
    if (!img.read(reinterpret_cast<char*>(pixels.data()),
                  static_cast<std::streamsize>(pixels.size()))) {
      throw std::runtime_error(images.string() + ": truncated at image " +
                               std::to_string(i));
    }
    if (!lab.get(label)) {
      throw std::runtime_error(labels.string() + ": truncated at label " +
                               std::to_string(i));
    }
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = pixels[j] / 255.0;
    data.push_back(x, static_cast<unsigned char>(label));
  }
  return data;
}

Dataset make_separable(const SeparableSpec& spec, SampleStream& stream) {
  if (spec.samples == 0 || spec.features == 0) {
    throw std::invalid_argument("make_separable: empty spec");
  }
  if (!(spec.margin >= 0.0) || !(spec.shift > spec.margin)) {
    throw std::invalid_argument("make_separable: need 0 <= margin < shift");
  }
  std::vector<double> u(spec.features);
  double norm = 0.0;
  for (double& v : u) {
    v = stream.next_gaussian();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : u) v /= norm;

  Dataset data;
  data.num_features = spec.features;
  data.num_classes = 2;
  std::vector<double> x(spec.features);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::uint32_t y = static_cast<std::uint32_t>(stream.next_below(2));
    const double sign = y == 1 ? 1.0 : -1.0;
    while (true) {
      double proj = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        x[j] = stream.next_gaussian() + sign * spec.shift * u[j];
        proj += x[j] * u[j];
      }
      if (sign * proj >= spec.margin) break;
    }
    data.push_back(x, y);
  }
  return data;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_features = data.num_features;
  out.num_classes = data.num_classes;
  out.features.reserve(indices.size() * data.num_features);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= data.size()) throw std::out_of_range("subset: index out of range");
    out.push_back(data.row(i), data.labels[i]);
  }
  out.num_classes = data.num_classes;
  return out;
}

std::vector<std::size_t> permutation(std::size_t n, SampleStream& stream) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::swap(p[i - 1], p[stream.next_below(i)]);
  }
  return p;
}

DataPartition partition_data(const Dataset& data, std::size_t num_shards,
                             SplitMode mode, std::optional<std::size_t> c_max,
                             SampleStream& stream) {
  if (num_shards == 0) {
    throw std::invalid_argument("partition_data: need at least one shard");
  }
  if (data.size() == 0) throw std::invalid_argument("partition_data: empty data");
  if (c_max && *c_max < 1) {
    throw std::invalid_argument("partition_data: c_max must be >= 1");
  }
  DataPartition out;
  out.shards.resize(num_shards);
  const std::size_t n = data.size();

  if (mode == SplitMode::kIid) {
    const std::vector<std::size_t> order = permutation(n, stream);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < num_shards; ++s) {
      const std::size_t len = n / num_shards + (s < n % num_shards ? 1 : 0);
      out.shards[s].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                           order.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    }
    return out;
  }

  std::vector<std::vector<std::size_t>> pools(data.num_classes);
  for (std::size_t i : permutation(n, stream)) {
    pools[data.labels[i]].push_back(i);
  }
  std::vector<std::uint64_t> weight(num_shards);
  std::uint64_t total_weight = 0;
  for (auto& w : weight) {
    w = 10 + stream.next_below(91);
    total_weight += w;
  }
  const std::size_t cap = c_max.value_or(data.num_classes);
  for (std::size_t s = 0; s < num_shards; ++s) {
    const std::size_t target =
        std::max<std::size_t>(1, n * weight[s] / total_weight);
    std::vector<std::size_t> live;
    for (std::size_t c : permutation(pools.size(), stream)) {
      if (!pools[c].empty() && live.size() < cap) live.push_back(c);
    }
    auto& shard = out.shards[s];
    while (shard.size() < target && !live.empty()) {
      const std::size_t pick = stream.next_below(live.size());
      auto& pool = pools[live[pick]];
      shard.push_back(pool.back());
      pool.pop_back();
      if (pool.empty()) live.erase(live.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  return out;
}

}  // namespace klms
