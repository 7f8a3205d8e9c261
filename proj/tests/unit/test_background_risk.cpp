#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "nhp/background_risk.hpp"
#include "nhp/error.hpp"
#include "oracles.hpp"

using namespace nhp;

namespace {

GeoGrid city(std::size_t n) { return build_grid_with_cells({42.3610, -71.1430}, {42.3956, -71.0749}, n); }

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

EventStore events_at(const GeoGrid& g, const std::vector<std::pair<CellIndex, double>>& at) {
  std::vector<EventRecord> r;
  for (std::size_t k = 0; k < at.size(); ++k) {
    r.push_back({fmt::format("e{}", k), 0, g.center(at[k].first), at[k].second, 0});
  }
  return EventStore::from_records(g, r);
}

}  // namespace

TEST(Background, EmptyWindowIsUniform) {
  const GeoGrid g = city(100);
  const EventStore s = events_at(g, {{5, 10.0}});
  const BackgroundField f = fit_background(g, s, 500.0, 30.0, 100.0);
  for (double m : f.mu) EXPECT_DOUBLE_EQ(m, 0.01);
  EXPECT_EQ(f.t, 500.0);
}

TEST(Background, SinglePointPeaksAtItsCell) {
  const GeoGrid g = city(100);
  const EventStore s = events_at(g, {{37, 10.0}});
  const BackgroundField f = fit_background(g, s, 20.0, 30.0, g.cell_side_m());
  const auto top = std::max_element(f.mu.begin(), f.mu.end()) - f.mu.begin();
  EXPECT_EQ(static_cast<CellIndex>(top), 37u);
  EXPECT_NEAR(sum(f.mu), 1.0, 1e-12);
}

TEST(Background, WindowIsHalfOpenAndExcludesTarget) {
  const GeoGrid g = city(100);
  const EventStore s = events_at(g, {{10, 5.0}, {90, 15.0}, {50, 20.0}});
  // Only the event at t=15 lies in [10, 20).
  const BackgroundField f = fit_background(g, s, 20.0, 10.0, 50.0);
  const EventStore one = events_at(g, {{90, 15.0}});
  EXPECT_EQ(f.mu, fit_background(g, one, 20.0, 10.0, 50.0).mu);
  // Excluding it leaves nothing: uniform.
  const BackgroundField ex = fit_background(g, s, 20.0, 10.0, 50.0, "e1");
  for (double m : ex.mu) EXPECT_DOUBLE_EQ(m, 0.01);
}

TEST(Background, MatchesBruteForceOracle) {
  const GeoGrid g = city(1100);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<CellIndex> cell(0, g.size() - 1);
  std::uniform_real_distribution<double> when(0.0, 100.0);
  std::vector<std::pair<CellIndex, double>> at;
  for (int k = 0; k < 60; ++k) at.emplace_back(cell(rng), when(rng));
  const EventStore s = events_at(g, at);
  const double h = 2.0 * g.cell_side_m();
  const BackgroundField f = fit_background(g, s, 80.0, 50.0, h);
  std::vector<Vec2> pts;
  for (const auto& c : s.window(30.0, 80.0)) pts.push_back(c.position_m);
  const auto want = oracle::normalized(oracle::kde(g, pts, h));
  for (CellIndex l = 0; l < g.size(); ++l) EXPECT_NEAR(f.mu[l], want[l], 1e-12);
}

TEST(Background, PropertyNormalizedAndNonnegative) {
  std::mt19937_64 rng(9);
  for (std::size_t n : {50u, 1100u, 2200u, 4400u}) {
    const GeoGrid g = city(n);
    std::uniform_int_distribution<CellIndex> cell(0, g.size() - 1);
    std::uniform_real_distribution<double> when(0.0, 1000.0), band(0.3, 6.0), win(10.0, 900.0);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::pair<CellIndex, double>> at;
      const int m = trial * 7;
      for (int k = 0; k < m; ++k) at.emplace_back(cell(rng), when(rng));
      const EventStore s = events_at(g, at);
      const BackgroundField f = fit_background(g, s, 1000.0, win(rng), band(rng) * g.cell_side_m());
      for (double v : f.mu) ASSERT_GE(v, 0.0);
      EXPECT_NEAR(sum(f.mu), 1.0, 1e-9);
    }
  }
}

TEST(Background, TinyBandwidthUnderflowFallsBackToUniform) {
  const GeoGrid g = city(100);
  const std::vector<Vec2> far{{1e9, 1e9}};
  const auto f = kde_field(g, far, 1.0);
  for (double v : f) EXPECT_DOUBLE_EQ(v, 0.01);
}

TEST(Background, InvalidArguments) {
  const GeoGrid g = city(100);
  const EventStore s;
  EXPECT_THROW(fit_background(g, s, 1.0, 0.0, 10.0), Error);
  EXPECT_THROW(fit_background(g, s, 1.0, 10.0, -1.0), Error);
  const BackgroundField f = fit_background(g, s, 1.0, 10.0, 10.0);
  EXPECT_EQ(eval_background(f, 3), f.mu[3]);
  EXPECT_THROW(eval_background(f, 100), Error);
}

TEST(Background, CsvHasOneRowPerCell) {
  const GeoGrid g = GeoGrid::build({0, 0}, {1, 1}, 3, 2);
  const BackgroundField f = fit_background(g, EventStore{}, 1.0, 1.0, 1.0);
  std::stringstream s;
  write_background_csv(s, g, f);
  std::string line;
  std::getline(s, line);
  EXPECT_EQ(line, "row,col,mu");
  int rows = 0;
  while (std::getline(s, line)) ++rows;
  EXPECT_EQ(rows, 6);
}
