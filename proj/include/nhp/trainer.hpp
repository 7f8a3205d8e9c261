#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nhp/background_risk.hpp"
#include "nhp/event_store.hpp"
#include "nhp/risk_model.hpp"
#include "nhp/trigger_kernel.hpp"

namespace nhp {

using Rng = std::mt19937_64;

struct BackgroundSpec {
  double window_days = kDefaultWindowDays;
  double bandwidth_cells = kDefaultBandwidthCells;

  double bandwidth_m(const GeoGrid& grid) const { return bandwidth_cells * grid.cell_side_m(); }
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double lambda_beta = 0.01;
  std::size_t iterations = 50000;
  std::uint64_t seed = 1;
  double floor_c = kOffsetFloor;
  double floor_d = kOffsetFloor;
  /// Starting Θ; KernelParams::initial(J) when unset.
  std::optional<KernelParams> init;
  /// false freezes β (the ablation model learns only c and d).
  bool train_beta = true;
  std::size_t log_every = 1000;

  void validate() const;
};

/// One ranking instance: a series crime with a nonempty set of earlier
/// crimes from the same series, evaluated at one day after the latest of them.
struct TrainingExample {
  int series = 0;
  std::string crime_id;
  std::vector<PriorHit> priors;
  double t = 0.0;
  CellIndex true_cell = 0;
  BackgroundField background;
};

class TrainingSet {
 public:
  /// Every series crime of `train` with at least one strictly earlier crime
  /// in its series becomes an example. Backgrounds come from `history`
  /// (all known crimes) with the example's own crime left out.
  static TrainingSet build(const EventStore& train, const EventStore& history,
                           const GeoGrid& grid, const BackgroundSpec& background);

  static TrainingSet from_examples(std::vector<TrainingExample> examples, std::size_t cells);

  const std::vector<TrainingExample>& examples() const noexcept { return examples_; }
  /// Example indices grouped per series (series with no examples omitted).
  const std::vector<std::vector<std::size_t>>& groups() const noexcept { return groups_; }
  std::size_t cells() const noexcept { return cells_; }
  /// Number of (example, cell ≠ true cell) hinge terms in the objective.
  std::size_t hinge_terms() const noexcept { return examples_.size() * (cells_ - 1); }

 private:
  std::vector<TrainingExample> examples_;
  std::vector<std::vector<std::size_t>> groups_;
  std::size_t cells_ = 0;
};

/// max(0, r_l − r_star).
double hinge_loss(double r_l, double r_star);

/// Σ_examples Σ_{l ≠ true} max(0, r_l − r_*) + λ Σ_{j≥1} β_j².
double full_objective(const KernelParams& params, const TrainingSet& set, const RiskContext& ctx,
                      double lambda_beta);

struct Triple {
  std::size_t example = 0;
  CellIndex cell = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

/// Series uniformly, then one of its examples uniformly, then a cell
/// uniformly among all cells except the example's true cell.
Triple sample_triple(Rng& rng, const TrainingSet& set);

/// Hinge value of the triple; grad += its subgradient (0 at and below the kink).
double add_triple_gradient(const KernelParams& params, const TrainingSet& set,
                           const RiskContext& ctx, const Triple& triple, std::span<double> grad);

struct TrainState {
  KernelParams params;
  std::vector<double> velocity;
  std::size_t iteration = 0;
  double loss_ma = 0.0;

  static TrainState start(const KernelParams& params);
};

/// One momentum step on one triple, followed by projection of c and d.
/// Throws kNumerical on a non-finite gradient.
void sgd_step(TrainState& state, const TrainConfig& config, const Triple& triple,
              const TrainingSet& set, const RiskContext& ctx);

struct TrainLogEntry {
  std::size_t iter = 0;
  double sampled_loss_ma = 0.0;
  double c = 0.0;
  double d = 0.0;
  double beta_norm = 0.0;  // ‖β₁..β_J‖
};

struct TrainResult {
  KernelParams params;
  std::vector<TrainLogEntry> log;
};

TrainResult train(const TrainConfig& config, const TrainingSet& set, const RiskContext& ctx);

void write_train_log_jsonl(std::ostream& out, std::span<const TrainLogEntry> log);

}  // namespace nhp
