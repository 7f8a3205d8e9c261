#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "nhp/error.hpp"
#include "nhp/geo_grid.hpp"
#include "oracles.hpp"

using namespace nhp;

namespace {

GeoGrid unit_grid(std::size_t n = 10) { return GeoGrid::build({0.0, 0.0}, {1.0, 1.0}, n, n); }

// Roughly 5.6 km x 3.85 km around Cambridge, MA.
constexpr GeoPoint kCityMin{42.3610, -71.1430};
constexpr GeoPoint kCityMax{42.3956, -71.0749};

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no nhp::Error thrown";
  return ErrorKind::kIo;
}

Ring rect(const GeoGrid& g, double x0, double y0, double x1, double y1) {
  return {g.unproject({x0, y0}), g.unproject({x1, y0}), g.unproject({x1, y1}), g.unproject({x0, y1})};
}

}  // namespace

TEST(GeoGrid, BuildCountsCells) {
  EXPECT_EQ(unit_grid().size(), 100u);
  const GeoGrid one = GeoGrid::build({0, 0}, {1, 1}, 1, 1);
  EXPECT_EQ(one.size(), 1u);
  EXPECT_EQ(one.locate({0.37, 0.81}), 0u);
  EXPECT_EQ(one.locate({1.0, 1.0}), 0u);
}

TEST(GeoGrid, RejectsDegenerateInputs) {
  EXPECT_EQ(kind_of([] { GeoGrid::build({0, 0}, {0, 1}, 2, 2); }), ErrorKind::kInvalidGeometry);
  EXPECT_EQ(kind_of([] { GeoGrid::build({0, 0}, {1, 0}, 2, 2); }), ErrorKind::kInvalidGeometry);
  EXPECT_THROW(GeoGrid::build({0, 0}, {1, 1}, 0, 2), Error);
}

TEST(GeoGrid, CitySizedGridHasSeventyMeterCells) {
  const GeoGrid g = build_grid_with_cells(kCityMin, kCityMax, 4400);
  EXPECT_EQ(g.size(), 4400u);
  EXPECT_NEAR(g.cell_side_m(), 70.0, 2.0);
  EXPECT_NEAR(g.cell_width_m() / g.cell_height_m(), 1.0, 0.05);
}

TEST(GeoGrid, ShapeIsExactForEveryResolution) {
  for (std::size_t n : {1u, 7u, 900u, 1100u, 2200u, 4400u}) {
    const auto [cols, rows] = choose_grid_shape(kCityMin, kCityMax, n);
    EXPECT_EQ(cols * rows, n);
  }
  const auto [cols, rows] = choose_grid_shape(kCityMin, kCityMax, 4400);
  EXPECT_GT(cols, rows);  // the box is wider than tall
}

TEST(GeoGrid, LocateFirstCellAndBoundaries) {
  const GeoGrid g = unit_grid();
  EXPECT_EQ(g.coord(g.locate({0.05, 0.05})), (CellCoord{0, 0}));
  // Interior edge at lon 0.1 goes to the lower column.
  EXPECT_EQ(g.coord(g.locate({0.05, 0.1})).col, 0u);
  EXPECT_EQ(g.coord(g.locate({0.1, 0.05})).row, 0u);
  EXPECT_EQ(g.locate({0.0, 0.0}), 0u);
  EXPECT_EQ(g.locate({1.0, 1.0}), 99u);
}

TEST(GeoGrid, LocateOutsideIsOutOfRegion) {
  const GeoGrid g = unit_grid();
  EXPECT_EQ(kind_of([&] { g.locate({1.5, 0.5}); }), ErrorKind::kOutOfRegion);
  EXPECT_FALSE(g.try_locate({0.5, -0.01}).has_value());
}

TEST(GeoGrid, CenterRoundTripAtEveryResolution) {
  for (std::size_t n : {1u, 100u, 1100u, 2200u, 4400u}) {
    const GeoGrid g = build_grid_with_cells(kCityMin, kCityMax, n);
    for (CellIndex l = 0; l < g.size(); ++l) ASSERT_EQ(g.locate(g.center(l)), l) << n;
  }
}

TEST(GeoGrid, ProjectionRoundTrip) {
  const GeoGrid g = build_grid_with_cells(kCityMin, kCityMax, 100);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lat(kCityMin.lat, kCityMax.lat), lon(kCityMin.lon, kCityMax.lon);
  for (int k = 0; k < 1000; ++k) {
    const GeoPoint p{lat(rng), lon(rng)};
    const GeoPoint q = g.unproject(g.project(p));
    EXPECT_NEAR(p.lat, q.lat, 1e-12);
    EXPECT_NEAR(p.lon, q.lon, 1e-12);
  }
}

TEST(PolygonOverlap, ContainedPolygonIsWhollyInOneCell) {
  const GeoGrid g = unit_grid();
  const RectM c = g.cell_rect_m(g.index({3, 4}));
  const double w = c.x1 - c.x0, h = c.y1 - c.y0;
  const auto ov = polygon_cell_overlap(g, rect(g, c.x0 + 0.2 * w, c.y0 + 0.2 * h, c.x0 + 0.7 * w, c.y0 + 0.6 * h));
  ASSERT_EQ(ov.size(), 1u);
  EXPECT_EQ(ov[0].cell, g.index({3, 4}));
  EXPECT_NEAR(ov[0].fraction, 1.0, 1e-12);
}

TEST(PolygonOverlap, SymmetricStraddleSplitsInHalf) {
  const GeoGrid g = unit_grid();
  const RectM a = g.cell_rect_m(g.index({2, 2}));
  const double w = a.x1 - a.x0, h = a.y1 - a.y0;
  const auto ov = polygon_cell_overlap(g, rect(g, a.x1 - 0.25 * w, a.y0 + 0.25 * h, a.x1 + 0.25 * w, a.y0 + 0.75 * h));
  ASSERT_EQ(ov.size(), 2u);
  EXPECT_EQ(ov[0].cell, g.index({2, 2}));
  EXPECT_EQ(ov[1].cell, g.index({2, 3}));
  EXPECT_NEAR(ov[0].fraction, 0.5, 1e-9);
  EXPECT_NEAR(ov[1].fraction, 0.5, 1e-9);
}

TEST(PolygonOverlap, IrregularPolygonAgreesWithMonteCarlo) {
  const GeoGrid g = unit_grid();
  const RectM a = g.cell_rect_m(g.index({4, 4}));
  const double w = a.x1 - a.x0, h = a.y1 - a.y0;
  // Concave pentagon around the corner shared by four cells.
  const Ring ring = {g.unproject({a.x1 - 0.6 * w, a.y1 - 0.5 * h}), g.unproject({a.x1 + 0.7 * w, a.y1 - 0.7 * h}),
                     g.unproject({a.x1 + 0.2 * w, a.y1 + 0.1 * h}), g.unproject({a.x1 + 0.5 * w, a.y1 + 0.8 * h}),
                     g.unproject({a.x1 - 0.4 * w, a.y1 + 0.4 * h})};
  const auto ov = polygon_cell_overlap(g, ring);
  EXPECT_EQ(ov.size(), 4u);
  const auto mc = oracle::monte_carlo_overlap(g, ring, 100000, 11);
  for (const CellOverlap& o : ov) EXPECT_NEAR(o.fraction, mc[o.cell], 0.02);
}

TEST(PolygonOverlap, PropertyFractionsConserveAndAreasAddUp) {
  const GeoGrid g = build_grid_with_cells(kCityMin, kCityMax, 1100);
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    const Ring ring = oracle::random_polygon_in_bbox(g, rng);
    const auto ov = polygon_cell_overlap(g, ring);
    double frac = 0.0, area = 0.0;
    for (const CellOverlap& o : ov) {
      EXPECT_GE(o.fraction, 0.0);
      EXPECT_LE(o.fraction, 1.0 + 1e-12);
      frac += o.fraction;
      area += o.area_m2;
    }
    EXPECT_NEAR(frac, 1.0, 1e-6);
    EXPECT_NEAR(area / ring_area_m2(g, ring), 1.0, 1e-6);
    EXPECT_TRUE(std::is_sorted(ov.begin(), ov.end(), [](auto& a, auto& b) { return a.cell < b.cell; }));
  }
}

TEST(PolygonOverlap, PartlyOutsideCountsOnlyTheInsidePart) {
  const GeoGrid g = unit_grid();
  const RectM box = g.bbox_m();
  const double w = g.cell_width_m(), h = g.cell_height_m();
  const auto ov = polygon_cell_overlap(g, rect(g, box.x0 - 0.5 * w, box.y0, box.x0 + 0.5 * w, box.y0 + h));
  double frac = 0.0;
  for (const auto& o : ov) frac += o.fraction;
  EXPECT_NEAR(frac, 0.5, 1e-9);
}

TEST(PolygonOverlap, SelfIntersectionIsInvalidGeometry) {
  const GeoGrid g = unit_grid();
  const Ring bowtie = {{0.1, 0.1}, {0.3, 0.3}, {0.1, 0.3}, {0.3, 0.1}};
  EXPECT_EQ(kind_of([&] { polygon_cell_overlap(g, bowtie); }), ErrorKind::kInvalidGeometry);
  const Ring two = {{0.1, 0.1}, {0.3, 0.3}};
  EXPECT_EQ(kind_of([&] { polygon_cell_overlap(g, two); }), ErrorKind::kInvalidGeometry);
}

TEST(Features, ContainedBuildingCountsOnce) {
  const GeoGrid g = unit_grid();
  const CellIndex a = g.index({1, 1});
  const RectM c = g.cell_rect_m(a);
  const double w = c.x1 - c.x0;
  const LandUseRecord rec{rect(g, c.x0 + 0.1 * w, c.y0 + 0.1 * w, c.x0 + 0.5 * w, c.y0 + 0.5 * w), "commercial", {}};
  const auto agg = aggregate_features(g, std::span(&rec, 1), {}, FeatureSchema::defaults());
  const auto& names = agg.features.names();
  const std::size_t j = std::find(names.begin(), names.end(), "count_commercial") - names.begin();
  ASSERT_LT(j, names.size());
  for (CellIndex l = 0; l < g.size(); ++l) EXPECT_NEAR(agg.features.at(l, j), l == a ? 1.0 : 0.0, 1e-12);
  EXPECT_EQ(std::count(names.begin(), names.end(), "station_distance"), 0);
}

TEST(Features, AssetValueSplitsWithOverlap) {
  const GeoGrid g = unit_grid();
  const RectM a = g.cell_rect_m(g.index({5, 5}));
  const double w = a.x1 - a.x0, h = a.y1 - a.y0;
  const LandUseRecord rec{rect(g, a.x1 - 0.3 * w, a.y0 + 0.2 * h, a.x1 + 0.3 * w, a.y0 + 0.6 * h),
                          "single_family", 400000.0};
  const auto agg = aggregate_features(g, std::span(&rec, 1), {}, FeatureSchema::defaults());
  const auto& names = agg.features.names();
  const std::size_t j = std::find(names.begin(), names.end(), "asset_value") - names.begin();
  EXPECT_NEAR(agg.features.at(g.index({5, 5}), j), 200000.0, 1e-6);
  EXPECT_NEAR(agg.features.at(g.index({5, 6}), j), 200000.0, 1e-6);
}

TEST(Features, StationDistanceIsZeroAtItsCellAndOneSideAway) {
  const GeoGrid g = unit_grid();
  const CellIndex a = g.index({4, 4});
  const GeoPoint st = g.center(a);
  const auto agg = aggregate_features(g, {}, std::span(&st, 1), FeatureSchema::defaults());
  const std::size_t j = agg.features.dims() - 1;
  ASSERT_EQ(agg.features.names()[j], "station_distance");
  EXPECT_NEAR(agg.features.at(a, j), 0.0, 1e-6);
  EXPECT_NEAR(agg.features.at(g.index({4, 5}), j), g.cell_width_m(), 1e-6);
  EXPECT_NEAR(agg.features.at(g.index({5, 4}), j), g.cell_height_m(), 1e-6);
}

TEST(Features, UnknownSubtypeIsCountedAsRejected) {
  const GeoGrid g = unit_grid();
  const LandUseRecord rec{rect(g, 10, 10, 200, 200), "castle", {}};
  const auto agg = aggregate_features(g, std::span(&rec, 1), {}, FeatureSchema::defaults());
  EXPECT_EQ(agg.rejected_records, 1u);
}

TEST(Features, PropertyPermutationInvariant) {
  const GeoGrid g = build_grid_with_cells(kCityMin, kCityMax, 200);
  std::mt19937_64 rng(8);
  const FeatureSchema schema = FeatureSchema::defaults();
  std::vector<LandUseRecord> recs;
  std::uniform_int_distribution<std::size_t> pick(0, schema.subtypes.size() - 1);
  std::uniform_real_distribution<double> value(1e5, 9e5);
  for (int k = 0; k < 60; ++k) {
    LandUseRecord r{oracle::random_polygon_in_bbox(g, rng), schema.subtypes[pick(rng)], {}};
    if (schema.is_residential(r.subtype)) r.asset_value = value(rng);
    recs.push_back(std::move(r));
  }
  const std::vector<GeoPoint> stations{g.center(3), g.center(150)};
  const FeatureMatrix base = aggregate_features(g, recs, stations, schema).features;
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(recs.begin(), recs.end(), rng);
    EXPECT_TRUE(aggregate_features(g, recs, stations, schema).features == base);
  }
}

TEST(Features, StandardizeMomentsAndFixedPoint) {
  std::mt19937_64 rng(2);
  std::gamma_distribution<double> skewed(0.5, 1000.0);
  FeatureMatrix raw(500, {"a", "b", "flat"});
  for (CellIndex l = 0; l < 500; ++l) {
    raw.at(l, 0) = skewed(rng);
    raw.at(l, 1) = static_cast<double>(l % 7);
    raw.at(l, 2) = 4.0;
  }
  const FeatureMatrix z = standardize(raw);
  for (std::size_t j = 0; j < 2; ++j) {
    double m = 0.0, v = 0.0;
    for (double x : z.column(j)) m += x;
    m /= 500.0;
    for (double x : z.column(j)) v += (x - m) * (x - m);
    v /= 500.0;
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(v, 1.0, 1e-9);
  }
  for (double x : z.column(2)) EXPECT_EQ(x, 0.0);
  const FeatureMatrix zz = standardize(z);
  for (std::size_t j = 0; j < 3; ++j) {
    for (CellIndex l = 0; l < 500; ++l) EXPECT_NEAR(zz.at(l, j), z.at(l, j), 1e-9);
  }
}

TEST(Features, CsvRoundTrip) {
  const GeoGrid g = GeoGrid::build({0, 0}, {1, 1}, 4, 3);
  FeatureMatrix f(g.size(), {"x", "y"});
  for (CellIndex l = 0; l < g.size(); ++l) {
    f.at(l, 0) = 0.1 * static_cast<double>(l);
    f.at(l, 1) = -1.0 / (1.0 + static_cast<double>(l));
  }
  std::stringstream s;
  write_feature_csv(s, g, f);
  EXPECT_EQ(s.str().substr(0, s.str().find('\n')), "row,col,x,y");
  const FeatureTable t = read_feature_csv(s);
  EXPECT_EQ(t.cols, 4u);
  EXPECT_EQ(t.rows, 3u);
  EXPECT_TRUE(t.features == f);
}

TEST(Features, ResampleOntoFinerGridKeepsValues) {
  const GeoGrid coarse = GeoGrid::build({0, 0}, {1, 1}, 2, 2);
  const GeoGrid fine = GeoGrid::build({0, 0}, {1, 1}, 4, 4);
  FeatureMatrix f(4, {"v"});
  for (CellIndex l = 0; l < 4; ++l) f.at(l, 0) = static_cast<double>(l);
  const FeatureMatrix r = resample_features(coarse, f, fine);
  for (CellIndex l = 0; l < fine.size(); ++l) {
    EXPECT_EQ(r.at(l, 0), static_cast<double>(coarse.locate(fine.center(l))));
  }
}

TEST(LandUseJson, ParsesPolygonsAndRejectsHolesPerFeature) {
  const std::string text = R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{"subtype":"apartment","asset_value":5},
     "geometry":{"type":"Polygon","coordinates":[[[0.1,0.1],[0.2,0.1],[0.2,0.2],[0.1,0.1]]]}},
    {"type":"Feature","properties":{"subtype":"apartment"},
     "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]],[[0.1,0.1],[0.2,0.1],[0.2,0.2],[0.1,0.1]]]}},
    {"type":"Feature","properties":{"subtype":"commercial"},
     "geometry":{"type":"Point","coordinates":[0.5,0.5]}}]})";
  const LandUseLoad load = parse_land_use_geojson(text);
  ASSERT_EQ(load.records.size(), 1u);
  EXPECT_EQ(load.records[0].subtype, "apartment");
  EXPECT_EQ(load.records[0].asset_value, 5.0);
  EXPECT_EQ(load.records[0].polygon[0], (GeoPoint{0.1, 0.1}));
  ASSERT_EQ(load.rejected.size(), 2u);
  EXPECT_EQ(load.rejected[0].first, 1u);
  EXPECT_EQ(load.rejected[1].first, 2u);
}

TEST(LandUseJson, StationsAreLonLatPoints) {
  const auto st = parse_stations_geojson(
      R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{},"geometry":{"type":"Point","coordinates":[-71.1,42.37]}}]})");
  ASSERT_EQ(st.size(), 1u);
  EXPECT_EQ(st[0], (GeoPoint{42.37, -71.1}));
  EXPECT_THROW(parse_stations_geojson("[1,2]"), Error);
}
