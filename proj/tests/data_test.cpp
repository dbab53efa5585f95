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

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <vector>

namespace klms {
namespace {

SampleStream stream_for(std::uint64_t seed) {
  return derive_stream(StreamKey(seed, {{"data_test", 0}}));
}

Dataset labelled(std::size_t n, std::size_t classes) {
  Dataset d;
  d.num_features = 1;
  d.num_classes = classes;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i);
    d.push_back({&x, 1}, static_cast<std::uint32_t>(i % classes));
  }
  return d;
}

void expect_disjoint(const DataPartition& p, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& s : p.shards) {
    for (std::size_t i : s) {
      ASSERT_LT(i, n);
      ++seen[i];
    }
  }
  for (int c : seen) EXPECT_LE(c, 1);
}

TEST(PartitionData, SingleShardIsWholeDataset) {
  Dataset d = labelled(37, 3);
  SampleStream s = stream_for(1);
  DataPartition p = partition_data(d, 1, SplitMode::kIid, std::nullopt, s);
  ASSERT_EQ(p.shards.size(), 1u);
  std::vector<std::size_t> got = p.shards[0];
  std::sort(got.begin(), got.end());
  for (std::size_t i = 0; i < 37; ++i) EXPECT_EQ(got[i], i);
}

TEST(PartitionData, IidEqualShards) {
  Dataset d = labelled(1000, 10);
  SampleStream s = stream_for(2);
  DataPartition p = partition_data(d, 10, SplitMode::kIid, std::nullopt, s);
  ASSERT_EQ(p.shards.size(), 10u);
  for (const auto& shard : p.shards) EXPECT_EQ(shard.size(), 100u);
  expect_disjoint(p, 1000);
}

TEST(PartitionData, IidRemainderGoesToFirstShards) {
  Dataset d = labelled(23, 2);
  SampleStream s = stream_for(3);
  DataPartition p = partition_data(d, 5, SplitMode::kIid, std::nullopt, s);
  std::vector<std::size_t> sizes;
  for (const auto& shard : p.shards) sizes.push_back(shard.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{5, 5, 5, 4, 4}));
}

TEST(PartitionData, NonIidRespectsClassCap) {
  Dataset d = labelled(2000, 10);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SampleStream s = stream_for(seed);
    DataPartition p = partition_data(d, 10, SplitMode::kNonIid, 2, s);
    ASSERT_EQ(p.shards.size(), 10u);
    expect_disjoint(p, d.size());
    for (const auto& shard : p.shards) {
      EXPECT_FALSE(shard.empty());
      std::set<std::uint32_t> classes;
      for (std::size_t i : shard) classes.insert(d.labels[i]);
      EXPECT_LE(classes.size(), 2u);
    }
  }
}

TEST(PartitionData, NonIidWithoutCapCoversMostData) {
  Dataset d = labelled(1000, 10);
  SampleStream s = stream_for(9);
  DataPartition p = partition_data(d, 8, SplitMode::kNonIid, std::nullopt, s);
  std::size_t total = 0;
  for (const auto& shard : p.shards) total += shard.size();
  expect_disjoint(p, d.size());
  EXPECT_GE(total, 990u);
}

TEST(PartitionData, RejectsBadArguments) {
  Dataset d = labelled(10, 2);
  SampleStream s = stream_for(4);
  EXPECT_THROW(partition_data(d, 2, SplitMode::kNonIid, 0, s),
               std::invalid_argument);
  EXPECT_THROW(partition_data(d, 0, SplitMode::kIid, std::nullopt, s),
               std::invalid_argument);
  Dataset empty;
  EXPECT_THROW(partition_data(empty, 1, SplitMode::kIid, std::nullopt, s),
               std::invalid_argument);
}

TEST(Permutation, IsAPermutation) {
  SampleStream s = stream_for(5);
  std::vector<std::size_t> p = permutation(500, s);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(MakeSeparable, IsLinearlySeparableWithMargin) {
  SeparableSpec spec;
  SampleStream s = stream_for(6);
  Dataset d = make_separable(spec, s);
  ASSERT_EQ(d.size(), spec.samples);
  ASSERT_EQ(d.num_features, spec.features);
  EXPECT_EQ(d.num_classes, 2u);
  // perceptron
  std::vector<double> w(spec.features + 1, 0.0);
  bool clean = false;
  for (int epoch = 0; epoch < 1000 && !clean; ++epoch) {
    clean = true;
    for (std::size_t i = 0; i < d.size(); ++i) {
      auto x = d.row(i);
      double a = w.back();
      for (std::size_t k = 0; k < x.size(); ++k) a += w[k] * x[k];
      const double y = d.labels[i] == 1 ? 1.0 : -1.0;
      if (y * a <= 0) {
        clean = false;
        for (std::size_t k = 0; k < x.size(); ++k) w[k] += y * x[k];
        w.back() += y;
      }
    }
  }
  EXPECT_TRUE(clean);
}

TEST(LoadCsv, ReadsLabelFirstAndSkipsHeader) {
  const auto path = std::filesystem::temp_directory_path() / "klms_data_test.csv";
  {
    std::ofstream f(path);
    f << "label,a,b\n2,0.5,1.5\n0,-1,3\n";
  }
  Dataset d = load_csv(path);
  std::filesystem::remove(path);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.num_features, 2u);
  EXPECT_EQ(d.num_classes, 3u);
  EXPECT_EQ(d.labels[0], 2u);
  EXPECT_DOUBLE_EQ(d.row(1)[1], 3.0);
}

TEST(LoadCsv, MissingFileThrows) {
  EXPECT_ANY_THROW(load_csv("/nonexistent/klms.csv"));
}

TEST(LoadIdx, ReadsBundledSubset) {
  const std::filesystem::path dir = KLMS_DATA_DIR "/mnist_subset";
  Dataset d = load_idx(dir / "t10k-images-idx3-ubyte",
                       dir / "t10k-labels-idx1-ubyte");
  EXPECT_EQ(d.size(), 1000u);
  EXPECT_EQ(d.num_features, 784u);
  EXPECT_EQ(d.num_classes, 10u);
  const auto [lo, hi] = std::minmax_element(d.features.begin(), d.features.end());
  EXPECT_GE(*lo, 0.0);
  EXPECT_LE(*hi, 1.0);
}

}  // namespace
}  // namespace klms
