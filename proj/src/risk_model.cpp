#include "nhp/risk_model.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "nhp/error.hpp"
#include "nhp/simd/kernels.hpp"

namespace nhp {

std::vector<PriorHit> to_priors(std::span<const CrimeInstance> crimes) {
  std::vector<PriorHit> out;
  out.reserve(crimes.size());
  for (const CrimeInstance& c : crimes) out.push_back({c.cell, c.t, c.position_m});
  return out;
}

RiskContext::RiskContext(GeoGrid grid, FeatureMatrix standardized_features, KernelOptions options)
    : grid_(std::move(grid)), features_(std::move(standardized_features)), options_(options) {
  if (features_.cells() != grid_.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("feature matrix has {} cells, grid has {}", features_.cells(), grid_.size()));
  }
}

double RiskContext::center_distance_km(CellIndex a, CellIndex b) const {
  const auto xs = grid_.centers_x_km();
  const auto ys = grid_.centers_y_km();
  const double dx = xs[a] - xs[b];
  const double dy = ys[a] - ys[b];
  return std::sqrt(dx * dx + dy * dy);
}

std::vector<double> RiskContext::feature_difference(CellIndex l, CellIndex g) const {
  std::vector<double> dw(features_.dims());
  for (std::size_t j = 0; j < dw.size(); ++j) {
    const double diff = features_.at(l, j) - features_.at(g, j);
    dw[j] = options_.diff_mode == FeatureDiffMode::kSigned ? diff : std::fabs(diff);
  }
  return dw;
}

namespace {

void check_cell(const RiskContext& ctx, CellIndex l) {
  if (l >= ctx.cells()) throw Error(ErrorKind::kInvalidArgument, fmt::format("cell {} out of range", l));
}

void check_priors(const RiskContext& ctx, const KernelParams& params,
                  std::span<const PriorHit> priors, double t) {
  if (params.feature_dims() != ctx.features().dims()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("model has {} feature weights, data has {} features",
                            params.feature_dims(), ctx.features().dims()));
  }
  for (const PriorHit& p : priors) {
    check_cell(ctx, p.cell);
    if (!(p.t < t)) {
      throw Error(ErrorKind::kInvalidArgument,
                  fmt::format("prior crime at t={} is not before evaluation time {}", p.t, t));
    }
  }
}

}  // namespace

TriggerInput trigger_input(const RiskContext& ctx, CellIndex l, const PriorHit& prior, double t,
                           std::vector<double>& dw_storage) {
  dw_storage = ctx.feature_difference(l, prior.cell);
  return {ctx.center_distance_km(l, prior.cell), t - prior.t, dw_storage};
}

double risk_cell(const BackgroundField& background, const KernelParams& params,
                 const RiskContext& ctx, std::span<const PriorHit> priors, double t, CellIndex l) {
  check_cell(ctx, l);
  check_priors(ctx, params, priors, t);
  double r = eval_background(background, l);
  std::vector<double> dw;
  for (const PriorHit& p : priors) {
    r += kernel_eval(params, trigger_input(ctx, l, p, t, dw), ctx.options().clamp);
  }
  return r;
}

void add_triggered(std::span<double> out, const KernelParams& params, const RiskContext& ctx,
                   std::span<const PriorHit> priors, double t) {
  if (out.size() != ctx.cells()) throw Error(ErrorKind::kDimensionMismatch, "risk buffer size");
  check_priors(ctx, params, priors, t);
  if (!std::isfinite(params.c) || !std::isfinite(params.d)) {
    throw Error(ErrorKind::kInvalidArgument, "kernel offsets must be finite");
  }
  const FeatureMatrix& f = ctx.features();
  const bool absolute = ctx.options().diff_mode == FeatureDiffMode::kAbsolute;
  std::vector<double> numer(ctx.cells());
  for (const PriorHit& p : priors) {
    std::fill(numer.begin(), numer.end(), params.beta[0]);
    for (std::size_t j = 0; j < f.dims(); ++j) {
      const double ref = f.at(p.cell, j);
      if (absolute) {
        simd::abs_diff_axpy(numer, params.beta[j + 1], f.column(j), ref);
      } else {
        simd::diff_axpy(numer, params.beta[j + 1], f.column(j), ref);
      }
    }
    const double tt = (t - p.t) + params.c;
    const double s_min = params.d;
    if (!(tt > 0.0) || !(s_min > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "kernel denominator must be positive");
    }
    const simd::TriggerGeometry geom{ctx.grid().centers_x_km(), ctx.grid().centers_y_km(),
                                     ctx.grid().centers_x_km()[p.cell],
                                     ctx.grid().centers_y_km()[p.cell]};
    simd::trigger_accumulate(out, numer, geom, params.d, tt * tt, ctx.options().clamp);
  }
}

RiskMap risk_map(const BackgroundField& background, const KernelParams& params,
                 const RiskContext& ctx, std::span<const PriorHit> priors, double t, int series) {
  if (background.size() != ctx.cells()) {
    throw Error(ErrorKind::kDimensionMismatch, "background field does not match grid");
  }
  RiskMap map{series, t, background.mu};
  add_triggered(map.values, params, ctx, priors, t);
  return map;
}

double add_risk_grad(const KernelParams& params, const RiskContext& ctx,
                     std::span<const PriorHit> priors, double t, CellIndex l, double weight,
                     std::span<double> grad) {
  check_cell(ctx, l);
  check_priors(ctx, params, priors, t);
  double sum = 0.0;
  std::vector<double> dw;
  for (const PriorHit& p : priors) {
    sum += add_kernel_grad(params, trigger_input(ctx, l, p, t, dw), weight, grad,
                           ctx.options().clamp);
  }
  return sum;
}

std::size_t rank_true_cell(std::span<const double> risk, CellIndex l_true) {
  if (l_true >= risk.size()) {
    throw Error(ErrorKind::kInvalidArgument, fmt::format("true cell {} out of range", l_true));
  }
  // Counts l_true itself, which supplies the leading 1.
  return simd::count_at_least(risk, risk[l_true]);
}

void write_risk_csv(std::ostream& out, const GeoGrid& grid, const RiskMap& map) {
  if (map.values.size() != grid.size()) throw Error(ErrorKind::kDimensionMismatch, "risk map size");
  out << "row,col,center_lat,center_lon,risk\n";
  for (CellIndex l = 0; l < grid.size(); ++l) {
    const CellCoord rc = grid.coord(l);
    const GeoPoint c = grid.center(l);
    out << rc.row << ',' << rc.col << ',' << fmt::format("{},{},{}", c.lat, c.lon, map.values[l])
        << '\n';
  }
}

nlohmann::json risk_geojson(const GeoGrid& grid, const RiskMap& map) {
  if (map.values.size() != grid.size()) throw Error(ErrorKind::kDimensionMismatch, "risk map size");
  using nlohmann::json;
  json features = json::array();
  const GeoPoint lo = grid.bbox_min();
  const GeoPoint hi = grid.bbox_max();
  const double dlat = (hi.lat - lo.lat) / static_cast<double>(grid.rows());
  const double dlon = (hi.lon - lo.lon) / static_cast<double>(grid.cols());
  for (CellIndex l = 0; l < grid.size(); ++l) {
    const CellCoord rc = grid.coord(l);
    const double lat0 = lo.lat + static_cast<double>(rc.row) * dlat;
    const double lon0 = lo.lon + static_cast<double>(rc.col) * dlon;
    json ring = json::array({json::array({lon0, lat0}), json::array({lon0 + dlon, lat0}),
                             json::array({lon0 + dlon, lat0 + dlat}),
                             json::array({lon0, lat0 + dlat}), json::array({lon0, lat0})});
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                        {"properties", {{"row", rc.row}, {"col", rc.col}, {"risk", map.values[l]}}}});
  }
  return {{"type", "FeatureCollection"},
          {"properties", {{"series", map.series}, {"t", map.t}}},
          {"features", features}};
}

}  // namespace nhp
