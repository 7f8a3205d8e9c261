#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nhp/background_risk.hpp"
#include "nhp/evaluator.hpp"
#include "nhp/risk_model.hpp"

namespace nhp {

// --- risk maps -------------------------------------------------------------

/// Self-exciting risk with the kernel numerator fixed to 1.
std::vector<double> ablation_risk_map(double c, double d, const BackgroundField& background,
                                      const RiskContext& ctx, std::span<const PriorHit> priors,
                                      double t);

/// Gaussian KDE over the exact prior locations, normalized over cells.
/// Throws kInvalidArgument when there are no priors.
std::vector<double> series_kde_map(const GeoGrid& grid, std::span<const PriorHit> priors,
                                   double bandwidth_m);

/// −Σ_i ‖center_l − s_i‖ in km. Throws kInvalidArgument when there are no priors.
std::vector<double> nearest_neighbor_map(const GeoGrid& grid, std::span<const PriorHit> priors);

/// Background KDE over the trailing T days.
std::vector<double> background_window_map(const GeoGrid& grid, const EventStore& history,
                                          double t, double window_days, double bandwidth_m,
                                          std::string_view exclude_id = {});

// --- models ----------------------------------------------------------------

/// The full self-exciting model with learned Θ.
class NhpModel : public RiskModel {
 public:
  NhpModel(KernelParams params, std::shared_ptr<const RiskContext> ctx,
           std::string name = "nhp");
  std::string name() const override { return name_; }
  nlohmann::json params() const override;
  std::vector<double> risk(const PredictionCase& c) const override;
  const KernelParams& kernel() const noexcept { return params_; }

 private:
  KernelParams params_;
  std::shared_ptr<const RiskContext> ctx_;
  std::string name_;
};

class AblationModel : public RiskModel {
 public:
  AblationModel(double c, double d, std::shared_ptr<const RiskContext> ctx);
  std::string name() const override { return "ablation"; }
  nlohmann::json params() const override;
  std::vector<double> risk(const PredictionCase& c) const override;

 private:
  double c_, d_;
  std::shared_ptr<const RiskContext> ctx_;
};

class SeriesKdeModel : public RiskModel {
 public:
  SeriesKdeModel(const GeoGrid& grid, double bandwidth_cells);
  std::string name() const override { return "series_kde"; }
  nlohmann::json params() const override;
  std::vector<double> risk(const PredictionCase& c) const override;

 private:
  const GeoGrid* grid_;
  double bandwidth_cells_;
};

class NearestNeighborModel : public RiskModel {
 public:
  explicit NearestNeighborModel(const GeoGrid& grid) : grid_(&grid) {}
  std::string name() const override { return "nearest_neighbor"; }
  std::vector<double> risk(const PredictionCase& c) const override;

 private:
  const GeoGrid* grid_;
};

class BackgroundWindowModel : public RiskModel {
 public:
  BackgroundWindowModel(const GeoGrid& grid, const EventStore& history, double window_days,
                        double bandwidth_cells);
  std::string name() const override { return "background_window"; }
  nlohmann::json params() const override;
  std::vector<double> risk(const PredictionCase& c) const override;

 private:
  const GeoGrid* grid_;
  const EventStore* history_;
  double window_days_;
  double bandwidth_cells_;
};

// --- tuning ----------------------------------------------------------------

enum class BaselineKind { kAblationKernel, kSeriesKde, kNearestNeighbor, kBackgroundWindow };

std::string to_string(BaselineKind kind);

/// Candidate parameter searched during tuning.
using Candidate = std::vector<double>;
using ModelFactory = std::function<std::unique_ptr<RiskModel>(const Candidate&)>;

struct TuneResult {
  Candidate best;
  double best_score = 0.0;  // mean normalized rank on the validation cases
  std::vector<double> scores;  // per candidate, in sorted candidate order
};

/// Minimizes mean normalized rank over candidates; a candidate replaces the
/// incumbent only on a strict improvement, and candidates are visited in
/// increasing lexicographic order, so ties resolve to the smallest.
TuneResult tune_baseline(std::vector<Candidate> candidates, const ModelFactory& factory,
                         std::span<const PredictionCase> validation, std::size_t cells);

struct TuningGrid {
  std::vector<double> window_days{30.0, 90.0, 180.0, 365.0, 730.0};
  std::vector<double> bandwidth_cells{0.5, 1.0, 2.0, 4.0};
};

}  // namespace nhp
