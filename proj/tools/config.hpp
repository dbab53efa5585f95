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

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "klms/data.hpp"
#include "klms/sim.hpp"

namespace klms::app {

// Bad or inconsistent configuration. The message starts with the field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DataKind { kSynthetic, kCsv, kIdx };

struct DataSpec {
  DataKind kind = DataKind::kSynthetic;
  SeparableSpec synthetic;
  std::size_t test_samples = 0;   // synthetic: extra points drawn for testing
  std::filesystem::path train;    // csv
  std::filesystem::path test;     // csv, optional
  std::filesystem::path train_images, train_labels;  // idx
  std::filesystem::path test_images, test_labels;    // idx, optional
};

struct ExperimentConfig {
  SimConfig sim;
  DataSpec data;
  std::filesystem::path metrics_csv = "metrics.csv";
  std::filesystem::path summary_json = "summary.json";
};

struct ToyConfig {
  double mu = 0.8;
  std::vector<double> r_grid{0.0, 2.0, 4.0, 6.0};
  std::vector<std::size_t> n_grid{1, 5, 10, 50, 100};
  std::vector<double> eta_grid{0.0};
  std::size_t runs = 100;
  std::uint64_t seed = 1;
  std::filesystem::path output_csv = "toy.csv";
};

// Relative paths resolve against base_dir. Throws ConfigError.
ExperimentConfig parse_experiment(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir);
ToyConfig parse_toy(const nlohmann::json& j);

nlohmann::json to_json(const ExperimentConfig& c);
nlohmann::json to_json(const ToyConfig& c);

// Reads and parses a JSON file. Throws ConfigError naming the file when it is
// missing or malformed.
nlohmann::json read_json_file(const std::filesystem::path& path);

// True when the document describes a toy run ("type": "toy").
bool is_toy_config(const nlohmann::json& j);

struct LoadedData {
  Dataset train;
  Dataset test;
};
LoadedData load_data(const DataSpec& spec, std::uint64_t seed);

nlohmann::json summary_json(const ExperimentConfig& config,
                            const ExperimentSummary& summary);

}  // namespace klms::app
