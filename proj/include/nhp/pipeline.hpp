#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "nhp/baselines.hpp"
#include "nhp/evaluator.hpp"
#include "nhp/event_store.hpp"
#include "nhp/geo_grid.hpp"
#include "nhp/risk_model.hpp"
#include "nhp/synthgen.hpp"
#include "nhp/trainer.hpp"

namespace nhp {

/// Everything needed to rerun the protocol at any resolution: the region,
/// the raw event records and a way to produce raw features for a grid.
struct Dataset {
  GeoPoint bbox_min;
  GeoPoint bbox_max;
  std::vector<EventRecord> events;
  /// Unstandardized features at the cells of the given grid.
  std::function<FeatureMatrix(const GeoGrid&)> raw_features;
};

/// Synthetic dataset whose features are the generator's continuous fields.
Dataset synthetic_dataset(const SynthSpec& spec, std::vector<EventRecord> events);

struct PipelineConfig {
  BackgroundSpec background;
  TrainConfig train;
  KernelOptions kernel;
  TuningGrid tuning;
};

/// Extra model evaluated next to the built-in ones (e.g. an oracle).
using ExtraModel = std::function<std::unique_ptr<RiskModel>(const RiskContext&)>;

struct ResolutionRun {
  std::size_t cells = 0;
  std::shared_ptr<const RiskContext> context;
  EventStore store;
  std::vector<Rejection> rejections;
  TrainTestSplit split;
  TrainResult nhp;
  TrainResult ablation;
  TuneResult series_kde;
  TuneResult background_window;
  std::vector<PredictionCase> cases;
  std::vector<int> skipped_series;
  std::vector<EvalReport> reports;  // nhp, ablation, series_kde, nearest_neighbor, background_window, extras
};

struct BaselineTuning {
  TuneResult series_kde;
  TuneResult background_window;
  std::size_t validation_cases = 0;
};

/// Picks baseline hyperparameters on hits held out from the training
/// crimes of `split` (never on its test hits). With no validation cases the
/// configured background defaults are kept.
BaselineTuning tune_baselines(const GeoGrid& grid, const EventStore& history,
                              const TrainTestSplit& split, const PipelineConfig& config);

/// Grid with `cells` cells, features, both trained kernels, tuned baselines
/// and one report per model on the held-out hits.
ResolutionRun run_resolution(const Dataset& data, std::size_t cells, const PipelineConfig& config,
                             std::span<const ExtraModel> extras = {});

std::vector<ResolutionRun> resolution_sweep(const Dataset& data, std::span<const std::size_t> cells,
                                            const PipelineConfig& config,
                                            std::span<const ExtraModel> extras = {});

/// Reports of every run, in run order.
std::vector<EvalReport> collect_reports(std::span<const ResolutionRun> runs);

}  // namespace nhp
