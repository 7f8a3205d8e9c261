#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nhp/background_risk.hpp"
#include "nhp/event_store.hpp"
#include "nhp/geo_grid.hpp"
#include "nhp/trigger_kernel.hpp"

namespace nhp {

/// Gaussian component of the background intensity. Position is given as a
/// fraction of the bbox extent; the center moves by `drift_*` meters per day.
struct Hotspot {
  double fx = 0.5;
  double fy = 0.5;
  double sigma_m = 500.0;
  double weight = 1.0;
  double drift_x_m_per_day = 0.0;
  double drift_y_m_per_day = 0.0;
};

struct SynthSpec {
  std::uint64_t seed = 7;
  GeoPoint bbox_min{42.3600, -71.1300};
  GeoPoint bbox_max{42.4005, -71.0752};
  std::size_t cols = 30;
  std::size_t rows = 30;

  std::size_t feature_dims = 4;
  std::size_t waves_per_feature = 3;

  std::size_t background_events = 2000;
  double time_span_days = 1460.0;
  std::vector<Hotspot> hotspots{{0.3, 0.35, 450.0, 1.0}, {0.7, 0.65, 600.0, 1.0},
                                {0.55, 0.2, 350.0, 0.6}};
  double uniform_weight = 0.25;

  std::size_t series = 40;
  std::size_t hits_per_series = 6;
  KernelParams theta_true{1.0, 1.0, {3.0, 3.0, -2.25, 1.8, 1.5}};
  double temperature = 0.1;
  KernelOptions options;

  /// Desk-scale defaults with geographic signal in Θ_true.
  static SynthSpec desk_default();
  /// Same as desk_default with β₁..β_J = 0.
  static SynthSpec null_signal();

  void validate() const;
};

/// Standardized smooth random feature fields sampled at the cell centers of
/// `grid`. The fields are continuous in space and fixed by the seed, so any
/// grid over the same bbox sees the same underlying surfaces.
FeatureMatrix synth_features(const SynthSpec& spec, const GeoGrid& grid);

struct SynthCity {
  GeoGrid grid;
  FeatureMatrix features;  // standardized
};

SynthCity gen_city(const SynthSpec& spec);

/// Normalized true background intensity at cell centers at time t.
BackgroundField true_background(const SynthSpec& spec, const GeoGrid& grid, double t);

/// Softmax of risk / τ, computed relative to the maximum.
std::vector<double> choice_probabilities(std::span<const double> risk, double temperature);

struct SynthData {
  std::vector<EventRecord> records;  // singletons first, then series hits
  EventStore store;
};

/// Singleton events from the background intensity, then each series grown
/// hit by hit: the next cell is drawn with probability ∝ exp(r_l / τ) under
/// Θ_true, one day after the previous hit, at a uniform point in the cell.
/// The first hit of a series is drawn from the background intensity.
SynthData gen_events_and_series(const SynthSpec& spec, const SynthCity& city);

}  // namespace nhp
