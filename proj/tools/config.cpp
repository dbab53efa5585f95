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
#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace klms::app {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed access to one JSON object. Every key read is recorded so finish()
// can reject the ones nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError((path_.empty() ? "config" : path_) +
                        ": expected an object");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(join(path_, key) + ": expected a number");
    return v.get<double>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ConfigError(join(path_, key) + ": expected a non-negative integer");
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(join(path_, key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key,
                              std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array() || v.empty()) {
      throw ConfigError(join(path_, key) + ": expected a non-empty array");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        throw ConfigError(join(path_, key) + "[" + std::to_string(i) +
                          "]: expected a number");
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  Fields child(const std::string& key) {
    static const json empty = json::object();
    return Fields(has(key) ? j_.at(key) : empty, join(path_, key));
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError(join(path_, it.key()) + ": unknown field");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Method parse_method(const std::string& s) {
  if (s == "none") return Method::kNone;
  if (s == "fedpm") return Method::kFedPM;
  if (s == "qsgd") return Method::kQsgd;
  if (s == "signsgd") return Method::kSignSgd;
  if (s == "sgld") return Method::kSgld;
  throw ConfigError("method: unknown method '" + s +
                    "' (none, fedpm, qsgd, signsgd, sgld)");
}

Variant parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::kBaseline;
  if (s == "klms") return Variant::kKlms;
  throw ConfigError("variant: unknown variant '" + s + "' (baseline, klms)");
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void require_file(const std::filesystem::path& p, const std::string& field) {
  if (!std::filesystem::is_regular_file(p)) {
    throw ConfigError(field + ": file not found: " + p.string());
  }
}

const char* data_kind_name(DataKind k) {
  switch (k) {
    case DataKind::kSynthetic: return "synthetic";
    case DataKind::kCsv: return "csv";
    case DataKind::kIdx: return "idx";
  }
  return "?";
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

bool is_toy_config(const json& j) {
  return j.is_object() && j.contains("type") && j.at("type") == "toy";
}

ExperimentConfig parse_experiment(const json& j,
                                  const std::filesystem::path& base_dir) {
  Fields root(j, "");
  const std::string type = root.text("type", "experiment");
  if (type != "experiment") {
    throw ConfigError("type: expected \"experiment\" or \"toy\"");
  }
  ExperimentConfig c;
  SimConfig& s = c.sim;
  s.method = parse_method(root.text("method", "fedpm"));
  s.variant = parse_variant(root.text("variant", "klms"));
  s.hyper = default_hyper(s.method);
  s.rounds = root.count("rounds", s.rounds);
  s.num_clients = root.count("num_clients", s.num_clients);
  s.clients_per_round = root.count("clients_per_round", s.num_clients);
  const std::string split = root.text("split", "iid");
  if (split == "iid") {
    s.split = SplitMode::kIid;
  } else if (split == "non-iid") {
    s.split = SplitMode::kNonIid;
  } else {
    throw ConfigError("split: expected \"iid\" or \"non-iid\"");
  }
  if (root.has("c_max")) s.c_max = root.count("c_max", 0);
  s.seed = root.count("seed", s.seed);

  {
    Fields m = root.child("model");
    const std::string kind = m.text("kind", "logistic");
    if (kind == "logistic") {
      s.model = ModelKind::kLogistic;
    } else if (kind == "mlp") {
      s.model = ModelKind::kMlp;
    } else {
      throw ConfigError("model.kind: expected \"logistic\" or \"mlp\"");
    }
    s.hidden = m.count("hidden", s.model == ModelKind::kMlp ? 32 : 0);
    m.finish();
  }
  {
    Fields k = root.child("codec");
    s.codec.d_kl_target = k.number("d_kl_target", s.codec.d_kl_target);
    s.codec.overhead_r = k.number("overhead_r", s.codec.overhead_r);
    s.codec.max_block_size = k.count("max_block_size", s.codec.max_block_size);
    s.codec.kl_max_threshold = k.number("kl_max_threshold", s.codec.kl_max_threshold);
    s.codec.kl_min_threshold = k.number("kl_min_threshold", s.codec.kl_min_threshold);
    s.initial_block_size = k.count("initial_block_size", s.initial_block_size);
    k.finish();
  }
  {
    Fields h = root.child("hyper");
    MethodHyper& y = s.hyper;
    y.local.lr = h.number("local_lr", y.local.lr);
    y.local.batch_size = h.count("batch_size", y.local.batch_size);
    y.local.epochs = h.count("local_epochs", y.local.epochs);
    y.server_lr = h.number("server_lr", y.server_lr);
    const std::uint64_t levels = h.count("quant_levels", y.quant_levels);
    if (levels > 1u << 20) throw ConfigError("hyper.quant_levels: too large");
    y.quant_levels = static_cast<std::uint32_t>(levels);
    y.sign_temperature = h.number("sign_temperature", y.sign_temperature);
    y.sgld_step = h.number("sgld_step", y.sgld_step);
    y.sgld_noise_std = h.number("sgld_noise_std", y.sgld_noise_std);
    y.sgld_prior_precision = h.number("sgld_prior_precision", y.sgld_prior_precision);
    y.fedpm_lambda0 = h.number("fedpm_lambda0", y.fedpm_lambda0);
    const std::uint64_t reset = h.count("fedpm_prior_reset_every", y.fedpm_prior_reset_every);
    if (reset > 0xffffffffu) throw ConfigError("hyper.fedpm_prior_reset_every: too large");
    y.fedpm_prior_reset_every = static_cast<std::uint32_t>(reset);
    y.fedpm_prob_floor = h.number("fedpm_prob_floor", y.fedpm_prob_floor);
    y.fedpm_score_init = h.number("fedpm_score_init", y.fedpm_score_init);
    y.qsgd_mix = h.number("qsgd_mix", y.qsgd_mix);
    h.finish();
  }
  {
    Fields d = root.child("data");
    const std::string kind = d.text("kind", "synthetic");
    DataSpec& ds = c.data;
    if (kind == "synthetic") {
      ds.kind = DataKind::kSynthetic;
      ds.synthetic.samples = d.count("samples", ds.synthetic.samples);
      ds.synthetic.features = d.count("features", ds.synthetic.features);
      ds.synthetic.margin = d.number("margin", ds.synthetic.margin);
      ds.synthetic.shift = d.number("shift", ds.synthetic.shift);
      ds.test_samples = d.count("test_samples", 0);
      if (ds.synthetic.samples == 0) throw ConfigError("data.samples: must be >= 1");
      if (ds.synthetic.features == 0) throw ConfigError("data.features: must be >= 1");
      if (!(ds.synthetic.margin >= 0.0 && ds.synthetic.shift > ds.synthetic.margin)) {
        throw ConfigError("data.shift: must exceed data.margin >= 0");
      }
    } else if (kind == "csv") {
      ds.kind = DataKind::kCsv;
      if (!d.has("train")) throw ConfigError("data.train: required for csv data");
      ds.train = resolve(base_dir, d.text("train", ""));
      require_file(ds.train, "data.train");
      if (d.has("test")) {
        ds.test = resolve(base_dir, d.text("test", ""));
        require_file(ds.test, "data.test");
      }
    } else if (kind == "idx") {
      ds.kind = DataKind::kIdx;
      for (const char* key : {"train_images", "train_labels"}) {
        if (!d.has(key)) throw ConfigError(d.path(key) + ": required for idx data");
      }
      ds.train_images = resolve(base_dir, d.text("train_images", ""));
      ds.train_labels = resolve(base_dir, d.text("train_labels", ""));
      require_file(ds.train_images, "data.train_images");
      require_file(ds.train_labels, "data.train_labels");
      if (d.has("test_images") != d.has("test_labels")) {
        throw ConfigError("data.test_labels: give both test_images and test_labels");
      }
      if (d.has("test_images")) {
        ds.test_images = resolve(base_dir, d.text("test_images", ""));
        ds.test_labels = resolve(base_dir, d.text("test_labels", ""));
        require_file(ds.test_images, "data.test_images");
        require_file(ds.test_labels, "data.test_labels");
      }
    } else {
      throw ConfigError("data.kind: expected \"synthetic\", \"csv\" or \"idx\"");
    }
    d.finish();
  }
  {
    Fields o = root.child("output");
    c.metrics_csv = resolve(base_dir, o.text("metrics_csv", "metrics.csv"));
    c.summary_json = resolve(base_dir, o.text("summary_json", "summary.json"));
    o.finish();
  }
  root.finish();
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ToyConfig parse_toy(const json& j) {
  Fields root(j, "");
  if (root.text("type", "toy") != "toy") throw ConfigError("type: expected \"toy\"");
  ToyConfig c;
  c.mu = root.number("mu", c.mu);
  c.r_grid = root.numbers("r_grid", c.r_grid);
  std::vector<double> ns(c.n_grid.begin(), c.n_grid.end());
  ns = root.numbers("n_grid", ns);
  c.n_grid.clear();
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] >= 1.0) || ns[i] != static_cast<double>(static_cast<std::size_t>(ns[i]))) {
      throw ConfigError("n_grid[" + std::to_string(i) + "]: expected an integer >= 1");
    }
    c.n_grid.push_back(static_cast<std::size_t>(ns[i]));
  }
  c.eta_grid = root.numbers("eta_grid", c.eta_grid);
  c.runs = root.count("runs", c.runs);
  c.seed = root.count("seed", c.seed);
  {
    Fields o = root.child("output");
    c.output_csv = o.text("csv", c.output_csv.string());
    o.finish();
  }
  root.finish();
  if (!std::isfinite(c.mu)) throw ConfigError("mu: must be finite");
  if (c.runs < 1) throw ConfigError("runs: must be >= 1");
  for (std::size_t i = 0; i < c.r_grid.size(); ++i) {
    if (!(c.r_grid[i] >= 0.0 && c.r_grid[i] <= 16.0)) {
      throw ConfigError("r_grid[" + std::to_string(i) + "]: must be in [0, 16]");
    }
  }
  for (std::size_t i = 0; i < c.eta_grid.size(); ++i) {
    if (!(c.eta_grid[i] >= 0.0 && c.eta_grid[i] <= 4.0)) {
      throw ConfigError("eta_grid[" + std::to_string(i) + "]: must be in [0, 4]");
    }
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  const SimConfig& s = c.sim;
  json j;
  j["type"] = "experiment";
  j["method"] = to_string(s.method);
  j["variant"] = to_string(s.variant);
  j["rounds"] = s.rounds;
  j["num_clients"] = s.num_clients;
  j["clients_per_round"] = s.clients_per_round;
  j["split"] = s.split == SplitMode::kIid ? "iid" : "non-iid";
  if (s.c_max) j["c_max"] = *s.c_max;
  j["seed"] = s.seed;
  j["model"] = {{"kind", s.model == ModelKind::kMlp ? "mlp" : "logistic"},
                {"hidden", s.hidden}};
  j["codec"] = {{"d_kl_target", s.codec.d_kl_target},
                {"overhead_r", s.codec.overhead_r},
                {"max_block_size", s.codec.max_block_size},
                {"kl_max_threshold", s.codec.kl_max_threshold},
                {"kl_min_threshold", s.codec.kl_min_threshold},
                {"initial_block_size", s.initial_block_size}};
  const MethodHyper& y = s.hyper;
  j["hyper"] = {{"local_lr", y.local.lr},
                {"batch_size", y.local.batch_size},
                {"local_epochs", y.local.epochs},
                {"server_lr", y.server_lr},
                {"quant_levels", y.quant_levels},
                {"sign_temperature", y.sign_temperature},
                {"sgld_step", y.sgld_step},
                {"sgld_noise_std", y.sgld_noise_std},
                {"sgld_prior_precision", y.sgld_prior_precision},
                {"fedpm_lambda0", y.fedpm_lambda0},
                {"fedpm_prior_reset_every", y.fedpm_prior_reset_every},
                {"fedpm_prob_floor", y.fedpm_prob_floor},
                {"fedpm_score_init", y.fedpm_score_init},
                {"qsgd_mix", y.qsgd_mix}};
  json d;
  d["kind"] = data_kind_name(c.data.kind);
  switch (c.data.kind) {
    case DataKind::kSynthetic:
      d["samples"] = c.data.synthetic.samples;
      d["features"] = c.data.synthetic.features;
      d["margin"] = c.data.synthetic.margin;
      d["shift"] = c.data.synthetic.shift;
      d["test_samples"] = c.data.test_samples;
      break;
    case DataKind::kCsv:
      d["train"] = c.data.train.string();
      if (!c.data.test.empty()) d["test"] = c.data.test.string();
      break;
    case DataKind::kIdx:
      d["train_images"] = c.data.train_images.string();
      d["train_labels"] = c.data.train_labels.string();
      if (!c.data.test_images.empty()) {
        d["test_images"] = c.data.test_images.string();
        d["test_labels"] = c.data.test_labels.string();
      }
      break;
  }
  j["data"] = d;
  j["output"] = {{"metrics_csv", c.metrics_csv.string()},
                 {"summary_json", c.summary_json.string()}};
  return j;
}

json to_json(const ToyConfig& c) {
  return {{"type", "toy"},          {"mu", c.mu},
          {"r_grid", c.r_grid},     {"n_grid", c.n_grid},
          {"eta_grid", c.eta_grid}, {"runs", c.runs},
          {"seed", c.seed},         {"output", {{"csv", c.output_csv.string()}}}};
}

LoadedData load_data(const DataSpec& spec, std::uint64_t seed) {
  LoadedData out;
  switch (spec.kind) {
    case DataKind::kSynthetic: {
      SeparableSpec all = spec.synthetic;
      all.samples += spec.test_samples;
      SampleStream s = derive_stream(StreamKey(seed, {{"synthetic", 0}}));
      Dataset full = make_separable(all, s);
      std::vector<std::size_t> tr(spec.synthetic.samples), te(spec.test_samples);
      for (std::size_t i = 0; i < tr.size(); ++i) tr[i] = i;
      for (std::size_t i = 0; i < te.size(); ++i) te[i] = tr.size() + i;
      out.train = subset(full, tr);
      out.test = subset(full, te);
      break;
    }
    case DataKind::kCsv:
      out.train = load_csv(spec.train);
      if (!spec.test.empty()) out.test = load_csv(spec.test);
      break;
    case DataKind::kIdx:
      out.train = load_idx(spec.train_images, spec.train_labels);
      if (!spec.test_images.empty()) {
        out.test = load_idx(spec.test_images, spec.test_labels);
      }
      break;
  }
  if (out.test.size() == 0) out.test.num_features = out.train.num_features;
  return out;
}

json summary_json(const ExperimentConfig& config,
                  const ExperimentSummary& s) {
  return {{"method", to_string(config.sim.method)},
          {"variant", to_string(config.sim.variant)},
          {"seed", config.sim.seed},
          {"rounds", s.rounds},
          {"dimension", s.dimension},
          {"initial_accuracy", s.initial_accuracy},
          {"final_accuracy", s.final_accuracy},
          {"mean_bpp_payload", s.mean_bpp_payload},
          {"mean_bpp_total", s.mean_bpp_total},
          {"total_bits", s.total_bits},
          {"partition_updates", s.partition_updates}};
}

}  // namespace klms::app
