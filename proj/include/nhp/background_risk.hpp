#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "nhp/event_store.hpp"
#include "nhp/geo_grid.hpp"

namespace nhp {

inline constexpr double kDefaultWindowDays = 730.0;
inline constexpr double kDefaultBandwidthCells = 2.0;

/// Cohort-wide risk per cell, normalized to sum 1.
struct BackgroundField {
  std::vector<double> mu;
  double t = 0.0;
  double window_days = kDefaultWindowDays;
  double bandwidth_m = 0.0;

  std::size_t size() const noexcept { return mu.size(); }
};

/// Unnormalized Gaussian KDE at every cell center:
/// sum_k exp(-|center_l - p_k|^2 / (2 h^2)).
std::vector<double> kde_intensity(const GeoGrid& grid, std::span<const Vec2> points,
                                  double bandwidth_m);

/// kde_intensity normalized to sum 1; uniform when there are no points or
/// every term underflows.
std::vector<double> kde_field(const GeoGrid& grid, std::span<const Vec2> points,
                              double bandwidth_m);

/// KDE over crimes in [t - window_days, t). A crime whose id equals
/// `exclude_id` is left out (the target of the prediction).
BackgroundField fit_background(const GeoGrid& grid, const EventStore& history, double t,
                               double window_days, double bandwidth_m,
                               std::string_view exclude_id = {});

/// Throws kInvalidArgument for an out-of-range cell.
double eval_background(const BackgroundField& field, CellIndex l);

/// CSV `row,col,mu`.
void write_background_csv(std::ostream& out, const GeoGrid& grid, const BackgroundField& field);

}  // namespace nhp
