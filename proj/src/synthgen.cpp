#include "nhp/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "nhp/error.hpp"
#include "nhp/risk_model.hpp"

namespace nhp {

namespace {

using Rng = std::mt19937_64;

constexpr std::uint64_t kCityStream = 1;
constexpr std::uint64_t kBackgroundStream = 2;
constexpr std::uint64_t kSeriesStreamBase = 1000;

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

struct Wave {
  double amplitude, kx, ky, phase;
};

std::vector<std::vector<Wave>> feature_waves(const SynthSpec& spec) {
  Rng rng = make_stream(spec.seed, kCityStream);
  std::normal_distribution<double> amp(0.0, 1.0);
  std::uniform_real_distribution<double> freq(0.3, 1.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::bernoulli_distribution flip(0.5);
  std::vector<std::vector<Wave>> waves(spec.feature_dims);
  for (auto& dim : waves) {
    for (std::size_t k = 0; k < spec.waves_per_feature; ++k) {
      Wave w{amp(rng), freq(rng), freq(rng), phase(rng)};
      if (flip(rng)) w.kx = -w.kx;
      if (flip(rng)) w.ky = -w.ky;
      dim.push_back(w);
    }
  }
  return waves;
}

// Hotspot center in projected meters at time t.
Vec2 hotspot_center(const Hotspot& h, const RectM& box, double t) {
  return {box.x0 + h.fx * (box.x1 - box.x0) + h.drift_x_m_per_day * t,
          box.y0 + h.fy * (box.y1 - box.y0) + h.drift_y_m_per_day * t};
}

bool inside(const RectM& box, Vec2 p) {
  return p.x >= box.x0 && p.x <= box.x1 && p.y >= box.y0 && p.y <= box.y1;
}

// Uniform point strictly inside cell l that locates back to l.
GeoPoint point_in_cell(const GeoGrid& grid, CellIndex l, Rng& rng) {
  const RectM r = grid.cell_rect_m(l);
  std::uniform_real_distribution<double> ux(r.x0, r.x1), uy(r.y0, r.y1);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const GeoPoint p = grid.unproject({ux(rng), uy(rng)});
    if (grid.try_locate(p) == l) return p;
  }
  return grid.center(l);
}

}  // namespace

SynthSpec SynthSpec::desk_default() { return SynthSpec{}; }

SynthSpec SynthSpec::null_signal() {
  SynthSpec spec;
  std::fill(spec.theta_true.beta.begin() + 1, spec.theta_true.beta.end(), 0.0);
  return spec;
}

void SynthSpec::validate() const {
  if (cols == 0 || rows == 0) throw Error(ErrorKind::kInvalidArgument, "synth grid needs cells");
  if (background_events == 0 || series == 0 || hits_per_series == 0) {
    throw Error(ErrorKind::kInvalidArgument, "synth counts must be >= 1");
  }
  if (!(temperature > 0.0)) throw Error(ErrorKind::kInvalidArgument, "temperature must be > 0");
  if (!(time_span_days > static_cast<double>(hits_per_series) + 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "time span too short for the series length");
  }
  if (theta_true.feature_dims() != feature_dims) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("theta_true has {} feature weights, spec has {} features",
                            theta_true.feature_dims(), feature_dims));
  }
  if (!(theta_true.c > 0.0) || !(theta_true.d > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "theta_true offsets must be positive");
  }
  double total = uniform_weight;
  for (const Hotspot& h : hotspots) {
    if (!(h.sigma_m > 0.0) || h.weight < 0.0) {
      throw Error(ErrorKind::kInvalidArgument, "hotspots need positive sigma and weight >= 0");
    }
    total += h.weight;
  }
  if (uniform_weight < 0.0 || !(total > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "background mixture has no mass");
  }
}

FeatureMatrix synth_features(const SynthSpec& spec, const GeoGrid& grid) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < spec.feature_dims; ++j) names.push_back(fmt::format("f{}", j + 1));
  FeatureMatrix raw(grid.size(), names);
  const auto waves = feature_waves(spec);
  const RectM box = grid.bbox_m();
  const double two_pi = 2.0 * std::numbers::pi;
  for (CellIndex l = 0; l < grid.size(); ++l) {
    const Vec2 c = grid.center_m(l);
    const double u = (c.x - box.x0) / (box.x1 - box.x0);
    const double v = (c.y - box.y0) / (box.y1 - box.y0);
    for (std::size_t j = 0; j < spec.feature_dims; ++j) {
      double f = 0.0;
      for (const Wave& w : waves[j]) f += w.amplitude * std::cos(two_pi * (w.kx * u + w.ky * v) + w.phase);
      raw.at(l, j) = f;
    }
  }
  return standardize(raw);
}

SynthCity gen_city(const SynthSpec& spec) {
  spec.validate();
  GeoGrid grid = GeoGrid::build(spec.bbox_min, spec.bbox_max, spec.cols, spec.rows);
  FeatureMatrix features = synth_features(spec, grid);
  return {std::move(grid), std::move(features)};
}

BackgroundField true_background(const SynthSpec& spec, const GeoGrid& grid, double t) {
  const RectM box = grid.bbox_m();
  const double area = (box.x1 - box.x0) * (box.y1 - box.y0);
  double total_weight = spec.uniform_weight;
  for (const Hotspot& h : spec.hotspots) total_weight += h.weight;
  std::vector<double> mu(grid.size(), 0.0);
  for (CellIndex l = 0; l < grid.size(); ++l) {
    const Vec2 c = grid.center_m(l);
    double density = spec.uniform_weight / area;
    for (const Hotspot& h : spec.hotspots) {
      const Vec2 m = hotspot_center(h, box, t);
      const double dx = c.x - m.x, dy = c.y - m.y;
      const double s2 = h.sigma_m * h.sigma_m;
      density += h.weight * std::exp(-(dx * dx + dy * dy) / (2.0 * s2)) / (2.0 * std::numbers::pi * s2);
    }
    mu[l] = density / total_weight;
  }
  double sum = 0.0;
  for (double v : mu) sum += v;
  for (double& v : mu) v /= sum;
  return {std::move(mu), t, 0.0, 0.0};
}

std::vector<double> choice_probabilities(std::span<const double> risk, double temperature) {
  if (risk.empty()) throw Error(ErrorKind::kInvalidArgument, "empty risk map");
  if (!(temperature > 0.0)) throw Error(ErrorKind::kInvalidArgument, "temperature must be > 0");
  const double top = *std::max_element(risk.begin(), risk.end());
  std::vector<double> p(risk.size());
  double sum = 0.0;
  for (std::size_t l = 0; l < risk.size(); ++l) {
    p[l] = std::exp((risk[l] - top) / temperature);
    sum += p[l];
  }
  for (double& v : p) v /= sum;
  return p;
}

SynthData gen_events_and_series(const SynthSpec& spec, const SynthCity& city) {
  spec.validate();
  const GeoGrid& grid = city.grid;
  const RectM box = grid.bbox_m();
  SynthData data;

  // Singleton background events.
  {
    Rng rng = make_stream(spec.seed, kBackgroundStream);
    std::uniform_real_distribution<double> time(0.0, spec.time_span_days);
    std::uniform_real_distribution<double> ux(box.x0, box.x1), uy(box.y0, box.y1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> weights{spec.uniform_weight};
    for (const Hotspot& h : spec.hotspots) weights.push_back(h.weight);
    std::discrete_distribution<std::size_t> component(weights.begin(), weights.end());
    for (std::size_t k = 0; k < spec.background_events; ++k) {
      const double t = time(rng);
      const std::size_t comp = component(rng);
      Vec2 p{ux(rng), uy(rng)};
      if (comp > 0) {
        const Hotspot& h = spec.hotspots[comp - 1];
        const Vec2 m = hotspot_center(h, box, t);
        // Truncated to the region by rejection.
        for (int attempt = 0; attempt < 1000; ++attempt) {
          p = {m.x + h.sigma_m * gauss(rng), m.y + h.sigma_m * gauss(rng)};
          if (inside(box, p)) break;
          p = {ux(rng), uy(rng)};
        }
      }
      GeoPoint g = grid.unproject(p);
      g.lat = std::clamp(g.lat, grid.bbox_min().lat, grid.bbox_max().lat);
      g.lon = std::clamp(g.lon, grid.bbox_min().lon, grid.bbox_max().lon);
      data.records.push_back({fmt::format("b{:05d}", k), 0, g, t, 0});
    }
  }

  // Series, each from its own stream.
  const RiskContext ctx(grid, city.features, spec.options);
  const double last_start = spec.time_span_days - static_cast<double>(spec.hits_per_series);
  for (std::size_t s = 0; s < spec.series; ++s) {
    const int label = static_cast<int>(s + 1);
    Rng rng = make_stream(spec.seed, kSeriesStreamBase + s);
    std::uniform_real_distribution<double> start(0.25 * spec.time_span_days, last_start);
    double t = start(rng);
    std::vector<PriorHit> priors;
    for (std::size_t h = 0; h < spec.hits_per_series; ++h) {
      const BackgroundField mu = true_background(spec, grid, t);
      std::vector<double> probs;
      if (priors.empty()) {
        probs = mu.mu;
      } else {
        const RiskMap r = risk_map(mu, spec.theta_true, ctx, priors, t, label);
        probs = choice_probabilities(r.values, spec.temperature);
      }
      std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
      const CellIndex cell = pick(rng);
      const GeoPoint loc = point_in_cell(grid, cell, rng);
      data.records.push_back({fmt::format("s{:03d}-{}", label, h), label, loc, t, 0});
      priors.push_back({cell, t, grid.project(loc)});
      t += 1.0;
    }
  }

  data.store = EventStore::from_records(grid, data.records);
  return data;
}

}  // namespace nhp
