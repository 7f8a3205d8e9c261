#include "nhp/pipeline.hpp"

#include "nhp/error.hpp"

namespace nhp {

Dataset synthetic_dataset(const SynthSpec& spec, std::vector<EventRecord> events) {
  Dataset data;
  data.bbox_min = spec.bbox_min;
  data.bbox_max = spec.bbox_max;
  data.events = std::move(events);
  data.raw_features = [spec](const GeoGrid& grid) { return synth_features(spec, grid); };
  return data;
}

namespace {

std::vector<Candidate> one_dim(std::span<const double> values) {
  std::vector<Candidate> out;
  for (double v : values) out.push_back({v});
  return out;
}

std::vector<Candidate> two_dim(std::span<const double> a, std::span<const double> b) {
  std::vector<Candidate> out;
  for (double x : a) {
    for (double y : b) out.push_back({x, y});
  }
  return out;
}

}  // namespace

BaselineTuning tune_baselines(const GeoGrid& grid, const EventStore& history,
                              const TrainTestSplit& split, const PipelineConfig& config) {
  const TrainTestSplit inner = split_train_test(split.train);
  const std::vector<PredictionCase> validation =
      build_cases(inner.train, inner.tests, history, grid, config.background).cases;

  std::vector<Candidate> kde_candidates = one_dim(config.tuning.bandwidth_cells);
  std::vector<Candidate> window_candidates =
      two_dim(config.tuning.window_days, config.tuning.bandwidth_cells);
  if (validation.empty()) {
    kde_candidates = {{config.background.bandwidth_cells}};
    window_candidates = {{config.background.window_days, config.background.bandwidth_cells}};
  }
  BaselineTuning out;
  out.validation_cases = validation.size();
  out.series_kde = tune_baseline(
      kde_candidates,
      [&](const Candidate& c) { return std::make_unique<SeriesKdeModel>(grid, c[0]); }, validation,
      grid.size());
  out.background_window = tune_baseline(
      window_candidates,
      [&](const Candidate& c) {
        return std::make_unique<BackgroundWindowModel>(grid, history, c[0], c[1]);
      },
      validation, grid.size());
  return out;
}

ResolutionRun run_resolution(const Dataset& data, std::size_t cells, const PipelineConfig& config,
                             std::span<const ExtraModel> extras) {
  config.train.validate();
  if (!data.raw_features) throw Error(ErrorKind::kInvalidArgument, "dataset has no feature source");

  ResolutionRun run;
  GeoGrid grid = build_grid_with_cells(data.bbox_min, data.bbox_max, cells);
  run.cells = grid.size();
  run.store = EventStore::from_records(grid, data.events, &run.rejections);
  FeatureMatrix features = standardize(data.raw_features(grid));
  run.context = std::make_shared<const RiskContext>(std::move(grid), std::move(features), config.kernel);
  const RiskContext& ctx = *run.context;
  const GeoGrid& g = ctx.grid();

  run.split = split_train_test(run.store);
  const TrainingSet set = TrainingSet::build(run.split.train, run.store, g, config.background);

  run.nhp = train(config.train, set, ctx);
  TrainConfig frozen = config.train;
  frozen.train_beta = false;
  frozen.init = KernelParams::initial(ctx.features().dims());
  run.ablation = train(frozen, set, ctx);

  CaseBuild built = build_cases(run.split.train, run.split.tests, run.store, g, config.background);
  run.cases = std::move(built.cases);
  run.skipped_series = std::move(built.skipped_series);

  const BaselineTuning tuned = tune_baselines(g, run.store, run.split, config);
  run.series_kde = tuned.series_kde;
  run.background_window = tuned.background_window;

  std::vector<std::unique_ptr<RiskModel>> models;
  models.push_back(std::make_unique<NhpModel>(run.nhp.params, run.context));
  models.push_back(std::make_unique<AblationModel>(run.ablation.params.c, run.ablation.params.d,
                                                   run.context));
  models.push_back(std::make_unique<SeriesKdeModel>(g, run.series_kde.best[0]));
  models.push_back(std::make_unique<NearestNeighborModel>(g));
  models.push_back(std::make_unique<BackgroundWindowModel>(
      g, run.store, run.background_window.best[0], run.background_window.best[1]));
  for (const ExtraModel& make : extras) models.push_back(make(ctx));

  for (const auto& m : models) run.reports.push_back(evaluate(*m, run.cases, run.cells));
  return run;
}

std::vector<ResolutionRun> resolution_sweep(const Dataset& data, std::span<const std::size_t> cells,
                                            const PipelineConfig& config,
                                            std::span<const ExtraModel> extras) {
  if (cells.empty()) throw Error(ErrorKind::kInvalidArgument, "no resolutions to sweep");
  std::vector<ResolutionRun> runs;
  for (std::size_t n : cells) runs.push_back(run_resolution(data, n, config, extras));
  return runs;
}

std::vector<EvalReport> collect_reports(std::span<const ResolutionRun> runs) {
  std::vector<EvalReport> out;
  for (const ResolutionRun& r : runs) out.insert(out.end(), r.reports.begin(), r.reports.end());
  return out;
}

}  // namespace nhp
