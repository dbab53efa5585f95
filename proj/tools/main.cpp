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
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "config.hpp"
#include "experiments.hpp"
#include "klms/sim.hpp"

namespace {

using klms::app::ConfigError;
namespace fs = std::filesystem;

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

fs::path with_suffix(fs::path p, const std::string& ext) {
  return p.replace_extension(ext);
}

int cmd_train(const std::string& file, std::optional<std::uint64_t> seed,
              const std::string& out) {
  const fs::path path(file);
  klms::app::ExperimentConfig cfg = klms::app::parse_experiment(
      klms::app::read_json_file(path), path.parent_path());
  if (seed) cfg.sim.seed = *seed;
  if (!out.empty()) {
    cfg.metrics_csv = out;
    cfg.summary_json = with_suffix(out, ".json");
  }
  const auto data = klms::app::load_data(cfg.data, cfg.sim.seed);
  const auto result = klms::run_experiment(cfg.sim, data.train, data.test);
  write_file(cfg.metrics_csv, klms::metrics_csv(result.rounds));
  write_file(cfg.summary_json,
             klms::app::summary_json(cfg, result.summary).dump(2) + "\n");
  std::printf("%s-%s: %zu rounds, final accuracy %.4f, payload %.4f bpp, "
              "total %.4f bpp\n",
              klms::to_string(cfg.sim.method), klms::to_string(cfg.sim.variant),
              result.summary.rounds, result.summary.final_accuracy,
              result.summary.mean_bpp_payload, result.summary.mean_bpp_total);
  return 0;
}

int cmd_toy(const std::string& file, std::optional<std::uint64_t> seed,
            const std::string& out) {
  klms::app::ToyConfig cfg;
  if (!file.empty()) {
    cfg = klms::app::parse_toy(klms::app::read_json_file(file));
    if (!fs::path(cfg.output_csv).is_absolute()) {
      cfg.output_csv = fs::path(file).parent_path() / cfg.output_csv;
    }
  }
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.output_csv = out;
  const auto rows = klms::app::run_toy(cfg);
  write_file(cfg.output_csv, klms::app::toy_csv(rows));
  write_file(with_suffix(cfg.output_csv, ".bits.json"),
             klms::app::toy_sidecar(rows).dump(2) + "\n");
  std::printf("wrote %zu cells to %s\n", rows.size(),
              cfg.output_csv.string().c_str());
  return 0;
}

int cmd_bench(std::optional<std::uint64_t> seed, const std::string& out) {
  const auto r = klms::app::codec_bench(seed.value_or(1));
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "coordinates %zu\nblocks %zu\nencode_rate %.0f coords/s\n"
                "decode_rate %.0f coords/s\nmismatches %zu\n"
                "checksum %016llx\n",
                r.coordinates, r.blocks, r.encode_coords_per_sec,
                r.decode_coords_per_sec, r.mismatches,
                static_cast<unsigned long long>(r.checksum));
  std::fputs(buf, stdout);
  if (!out.empty()) {
    const nlohmann::json j = {{"coordinates", r.coordinates},
                              {"blocks", r.blocks},
                              {"encode_coords_per_sec", r.encode_coords_per_sec},
                              {"decode_coords_per_sec", r.decode_coords_per_sec},
                              {"mismatches", r.mismatches},
                              {"checksum", r.checksum}};
    write_file(out, j.dump(2) + "\n");
  }
  return r.mismatches == 0 ? 0 : kRuntimeError;
}

int cmd_validate(const std::string& file) {
  const fs::path path(file);
  const nlohmann::json j = klms::app::read_json_file(path);
  if (klms::app::is_toy_config(j)) {
    klms::app::parse_toy(j);
  } else {
    klms::app::parse_experiment(j, path.parent_path());
  }
  std::puts("OK");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KL-minimizing side-information codec for federated learning"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
  app.add_option("--seed", seed, "Override the root seed");
  app.add_option("--out", out, "Override the output path");

  auto* train = app.add_subcommand("train", "Run a federated experiment");
  train->add_option("config", config, "Experiment config (JSON)")->required();
  auto* toy = app.add_subcommand("toy", "Gaussian mean-estimation study");
  toy->add_option("config", config, "Toy config (JSON); defaults if omitted");
  auto* bench = app.add_subcommand("codec-bench", "Codec throughput check");
  auto* validate = app.add_subcommand("validate", "Check a config file");
  validate->add_option("config", config, "Config file (JSON)")->required();
  for (auto* sub : {train, toy, bench, validate}) {
    sub->add_option("--seed", seed, "Override the root seed");
    sub->add_option("--out", out, "Override the output path");
  }

  if (argc > 1 && argv[1][0] != '-') {
    const std::string sub = argv[1];
    if (sub != "train" && sub != "toy" && sub != "codec-bench" &&
        sub != "validate") {
      std::cerr << "unknown subcommand '" << sub << "'\n\n" << app.help();
      return kConfigError;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kConfigError;
  }

  try {
    if (*train) return cmd_train(config, seed, out);
    if (*toy) return cmd_toy(config, seed, out);
    if (*bench) return cmd_bench(seed, out);
    if (*validate) return cmd_validate(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kConfigError;
}
