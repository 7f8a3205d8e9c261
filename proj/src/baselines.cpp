#include "nhp/baselines.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "nhp/error.hpp"
#include "nhp/simd/kernels.hpp"

namespace nhp {

std::vector<double> ablation_risk_map(double c, double d, const BackgroundField& background,
                                      const RiskContext& ctx, std::span<const PriorHit> priors,
                                      double t) {
  KernelParams params = KernelParams::initial(ctx.features().dims());
  params.c = c;
  params.d = d;
  return risk_map(background, params, ctx, priors, t).values;
}

std::vector<double> series_kde_map(const GeoGrid& grid, std::span<const PriorHit> priors,
                                   double bandwidth_m) {
  if (priors.empty()) throw Error(ErrorKind::kInvalidArgument, "series KDE needs at least one prior");
  std::vector<Vec2> points;
  points.reserve(priors.size());
  for (const PriorHit& p : priors) points.push_back(p.position_m);
  return kde_field(grid, points, bandwidth_m);
}

std::vector<double> nearest_neighbor_map(const GeoGrid& grid, std::span<const PriorHit> priors) {
  if (priors.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "nearest-neighbor score needs at least one prior");
  }
  std::vector<double> score(grid.size(), 0.0);
  for (const PriorHit& p : priors) {
    const simd::TriggerGeometry geom{grid.centers_x_km(), grid.centers_y_km(),
                                     p.position_m.x / 1000.0, p.position_m.y / 1000.0};
    simd::distance_accumulate(score, geom, -1.0);
  }
  return score;
}

std::vector<double> background_window_map(const GeoGrid& grid, const EventStore& history,
                                          double t, double window_days, double bandwidth_m,
                                          std::string_view exclude_id) {
  return fit_background(grid, history, t, window_days, bandwidth_m, exclude_id).mu;
}

// ---------------------------------------------------------------------------

NhpModel::NhpModel(KernelParams params, std::shared_ptr<const RiskContext> ctx, std::string name)
    : params_(std::move(params)), ctx_(std::move(ctx)), name_(std::move(name)) {
  if (params_.feature_dims() != ctx_->features().dims()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("model has {} feature weights, data has {} features",
                            params_.feature_dims(), ctx_->features().dims()));
  }
}

nlohmann::json NhpModel::params() const {
  return params_to_json(params_, ctx_->features().names(), ctx_->options());
}

std::vector<double> NhpModel::risk(const PredictionCase& c) const {
  return risk_map(*c.background, params_, *ctx_, c.priors, c.t, c.series).values;
}

AblationModel::AblationModel(double c, double d, std::shared_ptr<const RiskContext> ctx)
    : c_(c), d_(d), ctx_(std::move(ctx)) {}

nlohmann::json AblationModel::params() const { return {{"c", c_}, {"d", d_}}; }

std::vector<double> AblationModel::risk(const PredictionCase& c) const {
  return ablation_risk_map(c_, d_, *c.background, *ctx_, c.priors, c.t);
}

SeriesKdeModel::SeriesKdeModel(const GeoGrid& grid, double bandwidth_cells)
    : grid_(&grid), bandwidth_cells_(bandwidth_cells) {
  if (!(bandwidth_cells > 0.0)) throw Error(ErrorKind::kInvalidArgument, "bandwidth must be positive");
}

nlohmann::json SeriesKdeModel::params() const {
  return {{"bandwidth_cells", bandwidth_cells_}, {"bandwidth_m", bandwidth_cells_ * grid_->cell_side_m()}};
}

std::vector<double> SeriesKdeModel::risk(const PredictionCase& c) const {
  return series_kde_map(*grid_, c.priors, bandwidth_cells_ * grid_->cell_side_m());
}

std::vector<double> NearestNeighborModel::risk(const PredictionCase& c) const {
  return nearest_neighbor_map(*grid_, c.priors);
}

BackgroundWindowModel::BackgroundWindowModel(const GeoGrid& grid, const EventStore& history,
                                             double window_days, double bandwidth_cells)
    : grid_(&grid), history_(&history), window_days_(window_days), bandwidth_cells_(bandwidth_cells) {
  if (!(window_days > 0.0)) throw Error(ErrorKind::kInvalidArgument, "window must be positive");
  if (!(bandwidth_cells > 0.0)) throw Error(ErrorKind::kInvalidArgument, "bandwidth must be positive");
}

nlohmann::json BackgroundWindowModel::params() const {
  return {{"window_days", window_days_},
          {"bandwidth_cells", bandwidth_cells_},
          {"bandwidth_m", bandwidth_cells_ * grid_->cell_side_m()}};
}

std::vector<double> BackgroundWindowModel::risk(const PredictionCase& c) const {
  return background_window_map(*grid_, *history_, c.t, window_days_,
                               bandwidth_cells_ * grid_->cell_side_m(), c.target_id);
}

// ---------------------------------------------------------------------------

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kAblationKernel:
      return "ablation";
    case BaselineKind::kSeriesKde:
      return "series_kde";
    case BaselineKind::kNearestNeighbor:
      return "nearest_neighbor";
    case BaselineKind::kBackgroundWindow:
      return "background_window";
  }
  return "unknown";
}

TuneResult tune_baseline(std::vector<Candidate> candidates, const ModelFactory& factory,
                         std::span<const PredictionCase> validation, std::size_t cells) {
  if (candidates.empty()) throw Error(ErrorKind::kInvalidArgument, "no tuning candidates");
  std::sort(candidates.begin(), candidates.end());
  TuneResult result;
  if (candidates.size() == 1) {
    result.best = candidates.front();
    result.best_score = validation.empty()
                            ? 0.0
                            : mean_normalized_rank(*factory(candidates.front()), validation, cells);
    result.scores.push_back(result.best_score);
    return result;
  }
  if (validation.empty()) throw Error(ErrorKind::kInvalidArgument, "no validation cases for tuning");
  for (const Candidate& cand : candidates) {
    const double score = mean_normalized_rank(*factory(cand), validation, cells);
    result.scores.push_back(score);
    if (result.best.empty() || score < result.best_score) {
      result.best = cand;
      result.best_score = score;
    }
  }
  return result;
}

}  // namespace nhp
