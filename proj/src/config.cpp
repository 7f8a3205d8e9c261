#include "nhp/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <istream>
#include <map>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "nhp/error.hpp"

namespace nhp {

namespace {

using Setter = std::function<void(RunConfig&, std::string_view)>;

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw Error(ErrorKind::kInvalidArgument,
              fmt::format("config key '{}': '{}' is not {}", key, value, want));
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t comma = value.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? value.size() : comma;
    const std::string item(csv::trim(value.substr(start, end - start)));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(std::string_view key, std::string_view value) {
  double v = 0.0;
  if (!csv::parse_double(value, v)) bad_value(key, value, "a finite number");
  return v;
}

double to_positive(std::string_view key, std::string_view value) {
  const double v = to_double(key, value);
  if (!(v > 0.0)) bad_value(key, value, "a positive number");
  return v;
}

std::uint64_t to_uint(std::string_view key, std::string_view value) {
  long long v = 0;
  if (!csv::parse_int(value, v) || v < 0) bad_value(key, value, "a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

std::size_t to_count(std::string_view key, std::string_view value) {
  const std::uint64_t v = to_uint(key, value);
  if (v == 0) bad_value(key, value, "a positive integer");
  return static_cast<std::size_t>(v);
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "a boolean");
}

std::vector<double> to_positive_list(std::string_view key, std::string_view value) {
  std::vector<double> out;
  for (const std::string& item : split_list(value)) out.push_back(to_positive(key, item));
  if (out.empty()) bad_value(key, value, "a nonempty list");
  return out;
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"events", [](RunConfig& c, std::string_view v) { c.events = v; }},
      {"land_use", [](RunConfig& c, std::string_view v) { c.land_use = v; }},
      {"stations", [](RunConfig& c, std::string_view v) { c.stations = v; }},
      {"features", [](RunConfig& c, std::string_view v) { c.features = v; }},
      {"output_dir",
       [](RunConfig& c, std::string_view v) {
         if (v.empty()) bad_value("output_dir", v, "a path");
         c.output_dir = v;
       }},
      {"seed", [](RunConfig& c, std::string_view v) { c.set_seed(to_uint("seed", v)); }},
      {"grid.bbox",
       [](RunConfig& c, std::string_view v) {
         const auto items = split_list(v);
         if (items.size() != 4) bad_value("grid.bbox", v, "lat_min,lon_min,lat_max,lon_max");
         BoundingBox b{{to_double("grid.bbox", items[0]), to_double("grid.bbox", items[1])},
                       {to_double("grid.bbox", items[2]), to_double("grid.bbox", items[3])}};
         if (!(b.min.lat < b.max.lat) || !(b.min.lon < b.max.lon)) {
           bad_value("grid.bbox", v, "a box with min < max");
         }
         c.bbox = b;
       }},
      {"grid.cells", [](RunConfig& c, std::string_view v) { c.grid_cells = to_count("grid.cells", v); }},
      {"background.window_days",
       [](RunConfig& c, std::string_view v) {
         c.pipeline.background.window_days = to_positive("background.window_days", v);
       }},
      {"background.bandwidth_cells",
       [](RunConfig& c, std::string_view v) {
         c.pipeline.background.bandwidth_cells = to_positive("background.bandwidth_cells", v);
       }},
      {"kernel.diff_mode",
       [](RunConfig& c, std::string_view v) {
         if (v == "signed") {
           c.pipeline.kernel.diff_mode = FeatureDiffMode::kSigned;
         } else if (v == "absolute") {
           c.pipeline.kernel.diff_mode = FeatureDiffMode::kAbsolute;
         } else {
           bad_value("kernel.diff_mode", v, "'signed' or 'absolute'");
         }
       }},
      {"kernel.clamp",
       [](RunConfig& c, std::string_view v) { c.pipeline.kernel.clamp = to_bool("kernel.clamp", v); }},
      {"train.learning_rate",
       [](RunConfig& c, std::string_view v) {
         c.pipeline.train.learning_rate = to_positive("train.learning_rate", v);
       }},
      {"train.momentum",
       [](RunConfig& c, std::string_view v) {
         const double m = to_double("train.momentum", v);
         if (m < 0.0 || m >= 1.0) bad_value("train.momentum", v, "in [0, 1)");
         c.pipeline.train.momentum = m;
       }},
      {"train.lambda_beta",
       [](RunConfig& c, std::string_view v) {
         const double l = to_double("train.lambda_beta", v);
         if (l < 0.0) bad_value("train.lambda_beta", v, "nonnegative");
         c.pipeline.train.lambda_beta = l;
       }},
      {"train.iterations",
       [](RunConfig& c, std::string_view v) {
         c.pipeline.train.iterations = static_cast<std::size_t>(to_uint("train.iterations", v));
       }},
      {"train.seed",
       [](RunConfig& c, std::string_view v) { c.pipeline.train.seed = to_uint("train.seed", v); }},
      {"train.log_every",
       [](RunConfig& c, std::string_view v) {
         c.pipeline.train.log_every = to_count("train.log_every", v);
       }},
      {"train.floor_c",
       [](RunConfig& c, std::string_view v) { c.pipeline.train.floor_c = to_positive("train.floor_c", v); }},
      {"train.floor_d",
       [](RunConfig& c, std::string_view v) { c.pipeline.train.floor_d = to_positive("train.floor_d", v); }},
      {"eval.resolutions",
       [](RunConfig& c, std::string_view v) {
         std::vector<std::size_t> r;
         for (const std::string& item : split_list(v)) r.push_back(to_count("eval.resolutions", item));
         if (r.empty()) bad_value("eval.resolutions", v, "a nonempty list");
         c.resolutions = r;
       }},
      {"baselines.window_days",
       [](RunConfig& c, std::string_view v) {
         c.pipeline.tuning.window_days = to_positive_list("baselines.window_days", v);
       }},
      {"baselines.bandwidth_cells",
       [](RunConfig& c, std::string_view v) {
         c.pipeline.tuning.bandwidth_cells = to_positive_list("baselines.bandwidth_cells", v);
       }},
      {"features.subtypes",
       [](RunConfig& c, std::string_view v) { c.schema.subtypes = split_list(v); }},
      {"features.residential",
       [](RunConfig& c, std::string_view v) { c.schema.residential = split_list(v); }},
      {"synth.seed", [](RunConfig& c, std::string_view v) { c.synth.seed = to_uint("synth.seed", v); }},
      {"synth.cols", [](RunConfig& c, std::string_view v) { c.synth.cols = to_count("synth.cols", v); }},
      {"synth.rows", [](RunConfig& c, std::string_view v) { c.synth.rows = to_count("synth.rows", v); }},
      {"synth.feature_dims",
       [](RunConfig& c, std::string_view v) {
         const auto j = static_cast<std::size_t>(to_uint("synth.feature_dims", v));
         c.synth.feature_dims = j;
         c.synth.theta_true.beta.resize(j + 1, 0.0);
       }},
      {"synth.background_events",
       [](RunConfig& c, std::string_view v) {
         c.synth.background_events = to_count("synth.background_events", v);
       }},
      {"synth.time_span_days",
       [](RunConfig& c, std::string_view v) {
         c.synth.time_span_days = to_positive("synth.time_span_days", v);
       }},
      {"synth.series", [](RunConfig& c, std::string_view v) { c.synth.series = to_count("synth.series", v); }},
      {"synth.hits_per_series",
       [](RunConfig& c, std::string_view v) {
         c.synth.hits_per_series = to_count("synth.hits_per_series", v);
       }},
      {"synth.temperature",
       [](RunConfig& c, std::string_view v) { c.synth.temperature = to_positive("synth.temperature", v); }},
      {"synth.theta_c",
       [](RunConfig& c, std::string_view v) { c.synth.theta_true.c = to_positive("synth.theta_c", v); }},
      {"synth.theta_d",
       [](RunConfig& c, std::string_view v) { c.synth.theta_true.d = to_positive("synth.theta_d", v); }},
      {"synth.theta_beta",
       [](RunConfig& c, std::string_view v) {
         std::vector<double> beta;
         for (const std::string& item : split_list(v)) beta.push_back(to_double("synth.theta_beta", item));
         if (beta.empty()) bad_value("synth.theta_beta", v, "a nonempty list");
         c.synth.theta_true.beta = beta;
         c.synth.feature_dims = beta.size() - 1;
       }},
      {"synth.null_signal",
       [](RunConfig& c, std::string_view v) { c.synth_null_signal = to_bool("synth.null_signal", v); }},
  };
  return table;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) {
    throw Error(ErrorKind::kInvalidArgument, fmt::format("unknown config key '{}'", key));
  }
  it->second(*this, csv::trim(value));
}

void RunConfig::set_seed(std::uint64_t seed) {
  pipeline.train.seed = seed;
  synth.seed = seed;
}

void RunConfig::validate() const {
  pipeline.train.validate();
  if (resolutions.empty()) throw Error(ErrorKind::kInvalidArgument, "eval.resolutions is empty");
  if (pipeline.tuning.window_days.empty() || pipeline.tuning.bandwidth_cells.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "baseline tuning grids must be nonempty");
  }
  effective_synth().validate();
}

SynthSpec RunConfig::effective_synth() const {
  SynthSpec spec = synth;
  if (synth_null_signal) {
    std::fill(spec.theta_true.beta.begin() + (spec.theta_true.beta.empty() ? 0 : 1),
              spec.theta_true.beta.end(), 0.0);
  }
  return spec;
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text(csv::trim(line));
    if (text.empty()) continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kParse, fmt::format("config line {}: expected 'key = value'", number));
    }
    try {
      base.set(csv::trim(std::string_view(text).substr(0, eq)), std::string_view(text).substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("config line {}: {}", number, e.what()));
    }
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kNotFound, fmt::format("cannot open config '{}'", path));
  return parse_config(in, std::move(base));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, setter] : setters()) keys.push_back(key);
  return keys;
}

}  // namespace nhp
