#include "nhp/background_risk.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "nhp/error.hpp"
#include "nhp/simd/kernels.hpp"

namespace nhp {

std::vector<double> kde_intensity(const GeoGrid& grid, std::span<const Vec2> points,
                                  double bandwidth_m) {
  if (!(bandwidth_m > 0.0) || !std::isfinite(bandwidth_m)) {
    throw Error(ErrorKind::kInvalidArgument, "KDE bandwidth must be positive");
  }
  const auto xs = grid.col_centers_m();
  const auto ys = grid.row_centers_m();
  const double inv = 1.0 / (2.0 * bandwidth_m * bandwidth_m);
  std::vector<double> out(grid.size(), 0.0);
  std::vector<double> fx(xs.size()), fy(ys.size());
  // The isotropic Gaussian factorizes over the lattice of cell centers.
  for (const Vec2& p : points) {
    for (std::size_t c = 0; c < xs.size(); ++c) {
      const double d = xs[c] - p.x;
      fx[c] = std::exp(-d * d * inv);
    }
    for (std::size_t r = 0; r < ys.size(); ++r) {
      const double d = ys[r] - p.y;
      fy[r] = std::exp(-d * d * inv);
    }
    simd::outer_accumulate(out, 1.0, fy, fx);
  }
  return out;
}

std::vector<double> kde_field(const GeoGrid& grid, std::span<const Vec2> points,
                              double bandwidth_m) {
  std::vector<double> field = kde_intensity(grid, points, bandwidth_m);
  double total = 0.0;
  for (double v : field) total += v;
  if (!(total > 0.0)) {
    field.assign(grid.size(), 1.0 / static_cast<double>(grid.size()));
    return field;
  }
  for (double& v : field) v /= total;
  return field;
}

BackgroundField fit_background(const GeoGrid& grid, const EventStore& history, double t,
                               double window_days, double bandwidth_m,
                               std::string_view exclude_id) {
  if (!(window_days > 0.0)) throw Error(ErrorKind::kInvalidArgument, "window must be positive");
  if (!(bandwidth_m > 0.0)) throw Error(ErrorKind::kInvalidArgument, "bandwidth must be positive");
  std::vector<Vec2> points;
  for (const CrimeInstance& c : history.window(t - window_days, t)) {
    if (!exclude_id.empty() && c.id == exclude_id) continue;
    points.push_back(c.position_m);
  }
  return {kde_field(grid, points, bandwidth_m), t, window_days, bandwidth_m};
}

double eval_background(const BackgroundField& field, CellIndex l) {
  if (l >= field.mu.size()) {
    throw Error(ErrorKind::kInvalidArgument, fmt::format("cell {} out of range", l));
  }
  return field.mu[l];
}

void write_background_csv(std::ostream& out, const GeoGrid& grid, const BackgroundField& field) {
  if (field.size() != grid.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "background field does not match grid");
  }
  out << "row,col,mu\n";
  for (CellIndex l = 0; l < grid.size(); ++l) {
    const CellCoord rc = grid.coord(l);
    out << rc.row << ',' << rc.col << ',' << fmt::format("{}", field.mu[l]) << '\n';
  }
}

}  // namespace nhp
