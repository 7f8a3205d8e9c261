#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "nhp/background_risk.hpp"
#include "nhp/baselines.hpp"
#include "nhp/config.hpp"
#include "nhp/error.hpp"
#include "nhp/event_store.hpp"
#include "nhp/evaluator.hpp"
#include "nhp/geo_grid.hpp"
#include "nhp/pipeline.hpp"
#include "nhp/risk_model.hpp"
#include "nhp/synthgen.hpp"
#include "nhp/trainer.hpp"
#include "nhp/trigger_kernel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using nhp::Error;
using nhp::ErrorKind;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> resolution;
  std::optional<std::string> output_dir;
  std::vector<std::string> defines;
};

nhp::RunConfig resolve(const Flags& flags) {
  nhp::RunConfig cfg = flags.config.empty() ? nhp::RunConfig{} : nhp::load_config(flags.config);
  for (const std::string& d : flags.defines) {
    const std::size_t eq = d.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalidArgument, fmt::format("-D expects key=value, got '{}'", d));
    }
    cfg.set(d.substr(0, eq), d.substr(eq + 1));
  }
  if (flags.seed) cfg.set_seed(*flags.seed);
  if (flags.output_dir) cfg.set("output_dir", *flags.output_dir);
  if (flags.resolution && *flags.resolution == 0) {
    throw Error(ErrorKind::kInvalidArgument, "--resolution must be positive");
  }
  cfg.validate();
  return cfg;
}

fs::path out_path(const nhp::RunConfig& cfg, const std::string& name) {
  return fs::path(cfg.output_dir) / name;
}

std::string input_path(const nhp::RunConfig& cfg, const std::string& configured,
                       const std::string& fallback) {
  return configured.empty() ? out_path(cfg, fallback).string() : configured;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kNotFound, fmt::format("cannot open '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, fmt::format("'{}': {}", path, e.what()));
  }
}

// Output is staged in memory so nothing is written before every input is validated.
struct Outputs {
  std::vector<std::pair<fs::path, std::string>> files;

  void add(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ostringstream buf;
    body(buf);
    files.emplace_back(path, buf.str());
  }
  void add_json(const fs::path& path, const json& j) {
    files.emplace_back(path, j.dump(2) + "\n");
  }
  void commit() const {
    for (const auto& [path, text] : files) {
      std::error_code ec;
      if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
      if (ec) throw Error(ErrorKind::kIo, fmt::format("cannot create '{}': {}", path.parent_path().string(), ec.message()));
      std::ofstream out(path, std::ios::binary);
      out << text;
      if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write '{}'", path.string()));
    }
  }
};

json region_json(const nhp::BoundingBox& b) {
  return {{"bbox_min", {{"lat", b.min.lat}, {"lon", b.min.lon}}},
          {"bbox_max", {{"lat", b.max.lat}, {"lon", b.max.lon}}}};
}

nhp::BoundingBox region(const nhp::RunConfig& cfg) {
  if (cfg.bbox) return *cfg.bbox;
  const fs::path path = out_path(cfg, "region.json");
  if (!fs::exists(path)) {
    throw Error(ErrorKind::kInvalidArgument,
                fmt::format("grid.bbox is not set and '{}' does not exist", path.string()));
  }
  const json j = read_json(path.string());
  try {
    return {{j.at("bbox_min").at("lat").get<double>(), j.at("bbox_min").at("lon").get<double>()},
            {j.at("bbox_max").at("lat").get<double>(), j.at("bbox_max").at("lon").get<double>()}};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, fmt::format("'{}': {}", path.string(), e.what()));
  }
}

std::size_t cells_for(const Flags& flags, const nhp::RunConfig& cfg) {
  return flags.resolution.value_or(cfg.grid_cells);
}

std::vector<nhp::EventRecord> load_events(const nhp::RunConfig& cfg,
                                          std::vector<nhp::Rejection>* rejections) {
  const std::string path = input_path(cfg, cfg.events, "events.csv");
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kNotFound, fmt::format("cannot open events '{}'", path));
  return nhp::read_events_csv(in, rejections);
}

// Raw features for any grid over the region: re-aggregated from land use when
// configured, otherwise read from a feature CSV and resampled if its grid differs.
std::function<nhp::FeatureMatrix(const nhp::GeoGrid&)> feature_source(const nhp::RunConfig& cfg,
                                                                      const nhp::BoundingBox& box) {
  if (!cfg.land_use.empty()) {
    auto records = std::make_shared<std::vector<nhp::LandUseRecord>>(
        nhp::parse_land_use_geojson(read_text(cfg.land_use)).records);
    auto stations = std::make_shared<std::vector<nhp::GeoPoint>>();
    if (!cfg.stations.empty()) *stations = nhp::parse_stations_geojson(read_text(cfg.stations));
    const nhp::FeatureSchema schema = cfg.schema;
    return [records, stations, schema](const nhp::GeoGrid& grid) {
      return nhp::aggregate_features(grid, *records, *stations, schema).features;
    };
  }
  const std::string path = input_path(cfg, cfg.features, "features.csv");
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kNotFound, fmt::format("cannot open features '{}'", path));
  auto table = std::make_shared<nhp::FeatureTable>(nhp::read_feature_csv(in));
  auto source = std::make_shared<nhp::GeoGrid>(nhp::GeoGrid::build(box.min, box.max, table->cols, table->rows));
  return [table, source](const nhp::GeoGrid& grid) {
    if (grid.cols() == source->cols() && grid.rows() == source->rows()) return table->features;
    return nhp::resample_features(*source, table->features, grid);
  };
}

nhp::Dataset load_dataset(const nhp::RunConfig& cfg, std::vector<nhp::Rejection>* rejections) {
  const nhp::BoundingBox box = region(cfg);
  nhp::Dataset data;
  data.bbox_min = box.min;
  data.bbox_max = box.max;
  data.events = load_events(cfg, rejections);
  data.raw_features = feature_source(cfg, box);
  return data;
}

struct Bound {
  std::shared_ptr<const nhp::RiskContext> context;
  nhp::EventStore store;
  std::vector<nhp::Rejection> rejections;
};

Bound bind_dataset(const nhp::Dataset& data, std::size_t cells, const nhp::RunConfig& cfg,
           std::vector<nhp::Rejection> parse_rejections) {
  Bound b;
  nhp::GeoGrid grid = nhp::build_grid_with_cells(data.bbox_min, data.bbox_max, cells);
  b.rejections = std::move(parse_rejections);
  b.store = nhp::EventStore::from_records(grid, data.events, &b.rejections);
  std::sort(b.rejections.begin(), b.rejections.end(),
            [](const nhp::Rejection& a, const nhp::Rejection& c) { return a.row < c.row; });
  nhp::FeatureMatrix features = nhp::standardize(data.raw_features(grid));
  b.context = std::make_shared<const nhp::RiskContext>(std::move(grid), std::move(features),
                                                       cfg.pipeline.kernel);
  return b;
}

void print_summary(const json& j) { std::cout << j.dump() << '\n'; }

// --- subcommands -------------------------------------------------------------

void cmd_synth(const Flags& flags) {
  const nhp::RunConfig cfg = resolve(flags);
  const nhp::SynthSpec spec = cfg.effective_synth();
  const nhp::SynthCity city = nhp::gen_city(spec);
  const nhp::SynthData data = nhp::gen_events_and_series(spec, city);

  Outputs out;
  out.add(out_path(cfg, "events.csv"), [&](std::ostream& o) { nhp::write_events_csv(o, data.records); });
  out.add(out_path(cfg, "features.csv"),
          [&](std::ostream& o) { nhp::write_feature_csv(o, city.grid, city.features); });
  out.add_json(out_path(cfg, "theta_true.json"),
               nhp::params_to_json(spec.theta_true, city.features.names(), spec.options));
  out.add_json(out_path(cfg, "region.json"), region_json({spec.bbox_min, spec.bbox_max}));
  out.commit();
  print_summary({{"events", data.records.size()},
                 {"series", data.store.series_count()},
                 {"cells", city.grid.size()},
                 {"output_dir", cfg.output_dir}});
}

void cmd_featurize(const Flags& flags) {
  const nhp::RunConfig cfg = resolve(flags);
  if (cfg.land_use.empty()) throw Error(ErrorKind::kInvalidArgument, "featurize needs 'land_use'");
  const nhp::BoundingBox box = region(cfg);
  const nhp::GeoGrid grid = nhp::build_grid_with_cells(box.min, box.max, cells_for(flags, cfg));
  const nhp::LandUseLoad load = nhp::parse_land_use_geojson(read_text(cfg.land_use));
  std::vector<nhp::GeoPoint> stations;
  if (!cfg.stations.empty()) stations = nhp::parse_stations_geojson(read_text(cfg.stations));
  const nhp::FeatureAggregation agg = nhp::aggregate_features(grid, load.records, stations, cfg.schema);

  json rejected = json::array();
  for (const auto& [index, reason] : load.rejected) rejected.push_back({{"feature", index}, {"reason", reason}});
  Outputs out;
  out.add(out_path(cfg, "features.csv"), [&](std::ostream& o) { nhp::write_feature_csv(o, grid, agg.features); });
  out.add_json(out_path(cfg, "region.json"), region_json(box));
  out.commit();
  print_summary({{"cells", grid.size()},
                 {"cols", grid.cols()},
                 {"rows", grid.rows()},
                 {"features", agg.features.names()},
                 {"records", load.records.size()},
                 {"rejected_geometries", rejected},
                 {"rejected_subtypes", agg.rejected_records}});
}

void cmd_ingest(const Flags& flags) {
  const nhp::RunConfig cfg = resolve(flags);
  const nhp::BoundingBox box = region(cfg);
  const nhp::GeoGrid grid = nhp::build_grid_with_cells(box.min, box.max, cells_for(flags, cfg));
  std::vector<nhp::Rejection> rejections;
  const std::vector<nhp::EventRecord> records = load_events(cfg, &rejections);
  const nhp::EventStore store = nhp::EventStore::from_records(grid, records, &rejections);
  std::sort(rejections.begin(), rejections.end(),
            [](const nhp::Rejection& a, const nhp::Rejection& b) { return a.row < b.row; });
  const nhp::TrainTestSplit split = nhp::split_train_test(store);

  json tests = json::array();
  for (const nhp::TestCase& tc : split.tests) tests.push_back({{"series", tc.series}, {"id", tc.crime.id}});
  const json report = {{"crimes", store.size()},
                       {"rejected", rejections.size()},
                       {"series", store.series_count()},
                       {"singletons", store.singletons().size()},
                       {"train_crimes", split.train.size()},
                       {"tests", tests},
                       {"excluded_series", split.excluded_series}};
  Outputs out;
  out.add(out_path(cfg, "rejections.jsonl"), [&](std::ostream& o) { nhp::write_rejections_jsonl(o, rejections); });
  out.add_json(out_path(cfg, "split.json"), report);
  out.commit();
  print_summary({{"crimes", store.size()}, {"rejected", rejections.size()}, {"tests", split.tests.size()}});
}

void cmd_train(const Flags& flags) {
  const nhp::RunConfig cfg = resolve(flags);
  std::vector<nhp::Rejection> parse_rejections;
  const nhp::Dataset data = load_dataset(cfg, &parse_rejections);
  const Bound b = bind_dataset(data, cells_for(flags, cfg), cfg, std::move(parse_rejections));
  const nhp::RiskContext& ctx = *b.context;
  const nhp::TrainTestSplit split = nhp::split_train_test(b.store);
  const nhp::TrainingSet set = nhp::TrainingSet::build(split.train, b.store, ctx.grid(), cfg.pipeline.background);
  if (set.examples().empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no training examples: no series has two training crimes");
  }
  const nhp::TrainResult result = nhp::train(cfg.pipeline.train, set, ctx);

  Outputs out;
  out.add_json(out_path(cfg, "theta.json"),
               nhp::params_to_json(result.params, ctx.features().names(), ctx.options()));
  out.add(out_path(cfg, "train_log.jsonl"), [&](std::ostream& o) { nhp::write_train_log_jsonl(o, result.log); });
  out.commit();
  print_summary({{"examples", set.examples().size()},
                 {"cells", ctx.cells()},
                 {"iterations", cfg.pipeline.train.iterations},
                 {"c", result.params.c},
                 {"d", result.params.d},
                 {"beta", result.params.beta}});
}

void cmd_predict(const Flags& flags, int series, const std::string& theta_path) {
  const nhp::RunConfig cfg = resolve(flags);
  const nhp::LoadedParams theta =
      nhp::params_from_json(read_json(theta_path.empty() ? out_path(cfg, "theta.json").string() : theta_path));
  std::vector<nhp::Rejection> parse_rejections;
  const nhp::Dataset data = load_dataset(cfg, &parse_rejections);
  nhp::RunConfig bound_cfg = cfg;
  bound_cfg.pipeline.kernel = theta.options;
  const Bound b = bind_dataset(data, cells_for(flags, cfg), bound_cfg, std::move(parse_rejections));
  const nhp::RiskContext& ctx = *b.context;
  if (theta.feature_names != ctx.features().names()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("model features [{}] do not match data features [{}]",
                            fmt::join(theta.feature_names, ","), fmt::join(ctx.features().names(), ",")));
  }
  if (!b.store.has_series(series)) {
    throw Error(ErrorKind::kNotFound, fmt::format("unknown series id '{}'", series));
  }
  std::vector<nhp::CrimeInstance> crimes;
  for (std::size_t i : b.store.series(series)) crimes.push_back(b.store.crimes()[i]);
  const double t = nhp::prediction_time(crimes);
  const nhp::BackgroundField bg =
      nhp::fit_background(ctx.grid(), b.store, t, cfg.pipeline.background.window_days,
                          cfg.pipeline.background.bandwidth_m(ctx.grid()));
  const nhp::RiskMap map = nhp::risk_map(bg, theta.params, ctx, nhp::to_priors(crimes), t, series);

  Outputs out;
  out.add(out_path(cfg, fmt::format("risk_{}.csv", series)),
          [&](std::ostream& o) { nhp::write_risk_csv(o, ctx.grid(), map); });
  out.add_json(out_path(cfg, fmt::format("risk_{}.geojson", series)), nhp::risk_geojson(ctx.grid(), map));
  out.commit();
  print_summary({{"series", series}, {"t", t}, {"priors", crimes.size()}, {"cells", ctx.cells()}});
}

void cmd_evaluate(const Flags& flags) {
  const nhp::RunConfig cfg = resolve(flags);
  std::vector<nhp::Rejection> parse_rejections;
  const nhp::Dataset data = load_dataset(cfg, &parse_rejections);
  std::vector<std::size_t> resolutions = cfg.resolutions;
  if (flags.resolution) resolutions = {*flags.resolution};
  const std::vector<nhp::ResolutionRun> runs = nhp::resolution_sweep(data, resolutions, cfg.pipeline);
  const std::vector<nhp::EvalReport> reports = nhp::collect_reports(runs);

  Outputs out;
  out.add_json(out_path(cfg, "report.json"), nhp::report_json(reports));
  out.add(out_path(cfg, "ranks.csv"), [&](std::ostream& o) { nhp::write_cases_csv(o, reports); });
  out.commit();
  json summary = json::array();
  for (const nhp::EvalReport& r : reports) {
    summary.push_back({{"model", r.model}, {"resolution", r.resolution}, {"mean", r.summary.mean},
                       {"median", r.summary.median}, {"cases", r.summary.count}});
  }
  print_summary(summary);
}

void cmd_tune(const Flags& flags) {
  const nhp::RunConfig cfg = resolve(flags);
  std::vector<nhp::Rejection> parse_rejections;
  const nhp::Dataset data = load_dataset(cfg, &parse_rejections);
  const Bound b = bind_dataset(data, cells_for(flags, cfg), cfg, std::move(parse_rejections));
  const nhp::TrainTestSplit split = nhp::split_train_test(b.store);
  const nhp::BaselineTuning tuned = nhp::tune_baselines(b.context->grid(), b.store, split, cfg.pipeline);

  const json result = {
      {"resolution", b.context->cells()},
      {"validation_cases", tuned.validation_cases},
      {"series_kde",
       {{"bandwidth_cells", tuned.series_kde.best[0]}, {"score", tuned.series_kde.best_score}}},
      {"background_window",
       {{"window_days", tuned.background_window.best[0]},
        {"bandwidth_cells", tuned.background_window.best[1]},
        {"score", tuned.background_window.best_score}}}};
  Outputs out;
  out.add_json(out_path(cfg, "tuned_baselines.json"), result);
  out.commit();
  print_summary(result);
}

void print_error(std::string_view kind, std::string_view message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Next-hit prediction for crime series"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  app.add_option("--config", flags.config, "key = value config file");
  app.add_option("--seed", flags.seed, "seed for training and generation");
  app.add_option("--resolution", flags.resolution, "number of grid cells");
  app.add_option("--output-dir", flags.output_dir, "directory for inputs and artifacts");
  app.add_option("-D,--set", flags.defines, "config override key=value (repeatable)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* featurize = app.add_subcommand("featurize", "land use to feature CSV");
  auto* ingest = app.add_subcommand("ingest", "validate events and report the split");
  auto* train = app.add_subcommand("train", "fit the kernel parameters");
  auto* predict = app.add_subcommand("predict", "risk map for one series");
  auto* evaluate = app.add_subcommand("evaluate", "rank held-out hits for every model");
  auto* tune = app.add_subcommand("tune-baselines", "pick baseline hyperparameters");

  int series = 0;
  std::string theta_path;
  predict->add_option("--series", series, "series label")->required();
  predict->add_option("--theta", theta_path, "parameter JSON (default <output-dir>/theta.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("invalid_argument", e.what());
    return 2;
  }

  try {
    if (*synth) cmd_synth(flags);
    else if (*featurize) cmd_featurize(flags);
    else if (*ingest) cmd_ingest(flags);
    else if (*train) cmd_train(flags);
    else if (*predict) cmd_predict(flags, series, theta_path);
    else if (*evaluate) cmd_evaluate(flags);
    else if (*tune) cmd_tune(flags);
  } catch (const Error& e) {
    print_error(nhp::to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
