#include "nhp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "nhp/error.hpp"

namespace nhp {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kInvalidArgument, "learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "momentum must be in [0, 1)");
  }
  if (!(lambda_beta >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "lambda must be >= 0");
  if (!(floor_c > 0.0) || !(floor_d > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "projection floors must be > 0");
  }
}

// ---------------------------------------------------------------------------

TrainingSet TrainingSet::from_examples(std::vector<TrainingExample> examples, std::size_t cells) {
  TrainingSet set;
  set.cells_ = cells;
  set.examples_ = std::move(examples);
  std::map<int, std::vector<std::size_t>> by_series;
  for (std::size_t i = 0; i < set.examples_.size(); ++i) {
    const TrainingExample& ex = set.examples_[i];
    if (ex.priors.empty()) throw Error(ErrorKind::kInvalidArgument, "training example without priors");
    if (ex.true_cell >= cells || ex.background.size() != cells) {
      throw Error(ErrorKind::kDimensionMismatch, "training example does not match grid");
    }
    by_series[ex.series].push_back(i);
  }
  for (auto& [p, idx] : by_series) set.groups_.push_back(std::move(idx));
  return set;
}

TrainingSet TrainingSet::build(const EventStore& train, const EventStore& history,
                               const GeoGrid& grid, const BackgroundSpec& background) {
  std::vector<TrainingExample> examples;
  const double bandwidth = background.bandwidth_m(grid);
  for (int p : train.labels()) {
    for (std::size_t idx : train.series(p)) {
      const CrimeInstance& crime = train.crimes()[idx];
      std::vector<CrimeInstance> prior = priors_before(train, p, crime.t);
      if (prior.empty()) continue;  // first crime: r does not depend on Θ
      TrainingExample ex;
      ex.series = p;
      ex.crime_id = crime.id;
      ex.priors = to_priors(prior);
      ex.t = prediction_time(prior);
      ex.true_cell = crime.cell;
      ex.background = fit_background(grid, history, ex.t, background.window_days, bandwidth, crime.id);
      examples.push_back(std::move(ex));
    }
  }
  return from_examples(std::move(examples), grid.size());
}

// ---------------------------------------------------------------------------

double hinge_loss(double r_l, double r_star) { return std::max(0.0, r_l - r_star); }

double full_objective(const KernelParams& params, const TrainingSet& set, const RiskContext& ctx,
                      double lambda_beta) {
  double total = 0.0;
  for (const TrainingExample& ex : set.examples()) {
    const RiskMap map = risk_map(ex.background, params, ctx, ex.priors, ex.t);
    const double r_star = map.values[ex.true_cell];
    for (CellIndex l = 0; l < map.values.size(); ++l) {
      if (l != ex.true_cell) total += hinge_loss(map.values[l], r_star);
    }
  }
  double reg = 0.0;
  for (std::size_t j = 1; j < params.beta.size(); ++j) reg += params.beta[j] * params.beta[j];
  return total + lambda_beta * reg;
}

Triple sample_triple(Rng& rng, const TrainingSet& set) {
  if (set.groups().empty()) throw Error(ErrorKind::kInvalidArgument, "no eligible training crimes");
  if (set.cells() < 2) throw Error(ErrorKind::kInvalidArgument, "ranking needs at least two cells");
  const auto& groups = set.groups();
  std::uniform_int_distribution<std::size_t> pick_series(0, groups.size() - 1);
  const auto& group = groups[pick_series(rng)];
  std::uniform_int_distribution<std::size_t> pick_example(0, group.size() - 1);
  const std::size_t example = group[pick_example(rng)];
  std::uniform_int_distribution<std::size_t> pick_cell(0, set.cells() - 2);
  CellIndex l = pick_cell(rng);
  if (l >= set.examples()[example].true_cell) ++l;
  return {example, l};
}

double add_triple_gradient(const KernelParams& params, const TrainingSet& set,
                           const RiskContext& ctx, const Triple& triple, std::span<double> grad) {
  const TrainingExample& ex = set.examples().at(triple.example);
  const double r_l = risk_cell(ex.background, params, ctx, ex.priors, ex.t, triple.cell);
  const double r_star = risk_cell(ex.background, params, ctx, ex.priors, ex.t, ex.true_cell);
  const double loss = hinge_loss(r_l, r_star);
  if (loss > 0.0) {
    add_risk_grad(params, ctx, ex.priors, ex.t, triple.cell, 1.0, grad);
    add_risk_grad(params, ctx, ex.priors, ex.t, ex.true_cell, -1.0, grad);
  }
  return loss;
}

TrainState TrainState::start(const KernelParams& params) {
  return {params, std::vector<double>(params.flat_size(), 0.0), 0, 0.0};
}

void sgd_step(TrainState& state, const TrainConfig& config, const Triple& triple,
              const TrainingSet& set, const RiskContext& ctx) {
  KernelParams& p = state.params;
  std::vector<double> grad(p.flat_size(), 0.0);
  const double loss = add_triple_gradient(p, set, ctx, triple, grad);

  if (config.lambda_beta > 0.0) {
    const double scale = 2.0 * config.lambda_beta / static_cast<double>(set.hinge_terms());
    for (std::size_t j = 1; j < p.beta.size(); ++j) grad[kParamBeta0 + j] += scale * p.beta[j];
  }
  if (!config.train_beta) {
    std::fill(grad.begin() + kParamBeta0, grad.end(), 0.0);
  }
  for (std::size_t k = 0; k < grad.size(); ++k) {
    if (!std::isfinite(grad[k])) {
      throw Error(ErrorKind::kNumerical,
                  fmt::format("non-finite gradient component {} at iteration {} (example {}, cell {}, "
                              "c={}, d={})",
                              k, state.iteration, triple.example, triple.cell, p.c, p.d));
    }
  }

  std::vector<double> theta = p.flatten();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    state.velocity[k] = config.momentum * state.velocity[k] - config.learning_rate * grad[k];
    theta[k] += state.velocity[k];
  }
  p = KernelParams::unflatten(theta);
  project_offsets(p, config.floor_c, config.floor_d);

  constexpr double kDecay = 0.99;
  state.loss_ma = state.iteration == 0 ? loss : kDecay * state.loss_ma + (1.0 - kDecay) * loss;
  ++state.iteration;
}

namespace {

double feature_weight_norm(const KernelParams& p) {
  double acc = 0.0;
  for (std::size_t j = 1; j < p.beta.size(); ++j) acc += p.beta[j] * p.beta[j];
  return std::sqrt(acc);
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainingSet& set, const RiskContext& ctx) {
  config.validate();
  const std::size_t dims = ctx.features().dims();
  KernelParams init = config.init.value_or(KernelParams::initial(dims));
  if (init.feature_dims() != dims) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("initial parameters have {} feature weights, data has {} features",
                            init.feature_dims(), dims));
  }
  project_offsets(init, config.floor_c, config.floor_d);

  Rng rng(config.seed);
  TrainState state = TrainState::start(init);
  TrainResult result;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const Triple triple = sample_triple(rng, set);
    sgd_step(state, config, triple, set, ctx);
    const bool last = it + 1 == config.iterations;
    if ((config.log_every > 0 && state.iteration % config.log_every == 0) || last) {
      result.log.push_back({state.iteration, state.loss_ma, state.params.c, state.params.d,
                            feature_weight_norm(state.params)});
    }
  }
  result.params = state.params;
  return result;
}

void write_train_log_jsonl(std::ostream& out, std::span<const TrainLogEntry> log) {
  for (const TrainLogEntry& e : log) {
    out << nlohmann::json{{"iter", e.iter},
                          {"sampled_loss_ma", e.sampled_loss_ma},
                          {"c", e.c},
                          {"d", e.d},
                          {"beta_norm", e.beta_norm}}
               .dump()
        << '\n';
  }
}

}  // namespace nhp
