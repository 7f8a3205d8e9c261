#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "nhp/background_risk.hpp"
#include "nhp/event_store.hpp"
#include "nhp/geo_grid.hpp"
#include "nhp/trigger_kernel.hpp"

namespace nhp {

/// A previous offense of the series as seen by the risk model.
struct PriorHit {
  CellIndex cell = 0;
  double t = 0.0;
  Vec2 position_m;  // exact location; used by the location-based baselines
};

std::vector<PriorHit> to_priors(std::span<const CrimeInstance> crimes);

/// Grid plus standardized cell features: everything the triggered term
/// needs besides Θ. Immutable.
class RiskContext {
 public:
  RiskContext(GeoGrid grid, FeatureMatrix standardized_features, KernelOptions options = {});

  const GeoGrid& grid() const noexcept { return grid_; }
  const FeatureMatrix& features() const noexcept { return features_; }
  const KernelOptions& options() const noexcept { return options_; }
  std::size_t cells() const noexcept { return grid_.size(); }

  /// Δs in km between the centers of cells a and b.
  double center_distance_km(CellIndex a, CellIndex b) const;

  /// Δω between candidate cell l and prior cell g under the diff mode.
  std::vector<double> feature_difference(CellIndex l, CellIndex g) const;

 private:
  GeoGrid grid_;
  FeatureMatrix features_;
  KernelOptions options_;
};

struct RiskMap {
  int series = 0;
  double t = 0.0;
  std::vector<double> values;
};

/// Kernel input for the contribution of `prior` to cell l at time t.
/// The returned span in `dw_storage` must outlive the input.
TriggerInput trigger_input(const RiskContext& ctx, CellIndex l, const PriorHit& prior, double t,
                           std::vector<double>& dw_storage);

/// μ_l + Σ_i κ(Δs(l, g_i), t − t_i, Δω(l, g_i)). Requires every prior
/// strictly before t.
double risk_cell(const BackgroundField& background, const KernelParams& params,
                 const RiskContext& ctx, std::span<const PriorHit> priors, double t, CellIndex l);

/// risk_cell for every cell; bitwise equal to it cell by cell.
RiskMap risk_map(const BackgroundField& background, const KernelParams& params,
                 const RiskContext& ctx, std::span<const PriorHit> priors, double t,
                 int series = 0);

/// Triggered part only (no background), added onto `out`.
void add_triggered(std::span<double> out, const KernelParams& params, const RiskContext& ctx,
                   std::span<const PriorHit> priors, double t);

/// grad += weight * ∂r_l/∂Θ; returns the triggered sum at l.
double add_risk_grad(const KernelParams& params, const RiskContext& ctx,
                     std::span<const PriorHit> priors, double t, CellIndex l, double weight,
                     std::span<double> grad);

/// 1 + #{l ≠ true : r_l ≥ r_true} (ties count against the model).
std::size_t rank_true_cell(std::span<const double> risk, CellIndex l_true);

/// CSV `row,col,center_lat,center_lon,risk`.
void write_risk_csv(std::ostream& out, const GeoGrid& grid, const RiskMap& map);

/// FeatureCollection of cell polygons with `row`, `col`, `risk` properties.
nlohmann::json risk_geojson(const GeoGrid& grid, const RiskMap& map);

}  // namespace nhp
