#include "nhp/geo_grid.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "csv_util.hpp"
#include "nhp/error.hpp"

namespace nhp {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool finite_point(GeoPoint p) { return std::isfinite(p.lat) && std::isfinite(p.lon); }

// Index of the cell along one axis: boundary values go to the lower cell.
std::size_t axis_index(double value, double lo, double hi, std::size_t n) {
  const double f = (value - lo) / (hi - lo) * static_cast<double>(n);
  const double k = std::ceil(f) - 1.0;
  if (k < 0.0) return 0;
  if (k >= static_cast<double>(n)) return n - 1;
  return static_cast<std::size_t>(k);
}

}  // namespace

// ---------------------------------------------------------------------------
// GeoGrid

GeoGrid GeoGrid::build(GeoPoint bbox_min, GeoPoint bbox_max, std::size_t cols, std::size_t rows) {
  if (cols == 0 || rows == 0) {
    throw Error(ErrorKind::kInvalidArgument, "grid needs at least one cell along each axis");
  }
  if (!finite_point(bbox_min) || !finite_point(bbox_max)) {
    throw Error(ErrorKind::kInvalidGeometry, "bbox has non-finite coordinates");
  }
  if (!(bbox_max.lat > bbox_min.lat) || !(bbox_max.lon > bbox_min.lon)) {
    throw Error(ErrorKind::kInvalidGeometry, "bbox must have positive width and height");
  }
  if (bbox_min.lat < -90.0 || bbox_max.lat > 90.0) {
    throw Error(ErrorKind::kInvalidGeometry, "bbox latitude outside [-90, 90]");
  }

  GeoGrid g;
  g.min_ = bbox_min;
  g.max_ = bbox_max;
  g.origin_ = {0.5 * (bbox_min.lat + bbox_max.lat), 0.5 * (bbox_min.lon + bbox_max.lon)};
  g.cols_ = cols;
  g.rows_ = rows;
  g.cos_lat0_ = std::cos(g.origin_.lat * kDegToRad);

  const Vec2 lo = g.project(bbox_min);
  const Vec2 hi = g.project(bbox_max);
  g.bbox_m_ = {lo.x, lo.y, hi.x, hi.y};
  g.cell_w_ = (hi.x - lo.x) / static_cast<double>(cols);
  g.cell_h_ = (hi.y - lo.y) / static_cast<double>(rows);

  g.col_x_.resize(cols);
  g.row_y_.resize(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    g.col_x_[c] = lo.x + (static_cast<double>(c) + 0.5) * g.cell_w_;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    g.row_y_[r] = lo.y + (static_cast<double>(r) + 0.5) * g.cell_h_;
  }
  g.centers_x_km_.resize(cols * rows);
  g.centers_y_km_.resize(cols * rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      g.centers_x_km_[r * cols + c] = g.col_x_[c] / 1000.0;
      g.centers_y_km_[r * cols + c] = g.row_y_[r] / 1000.0;
    }
  }
  return g;
}

Vec2 GeoGrid::project(GeoPoint p) const noexcept {
  return {kEarthRadiusM * cos_lat0_ * (p.lon - origin_.lon) * kDegToRad,
          kEarthRadiusM * (p.lat - origin_.lat) * kDegToRad};
}

GeoPoint GeoGrid::unproject(Vec2 p) const noexcept {
  return {origin_.lat + p.y / kEarthRadiusM / kDegToRad,
          origin_.lon + p.x / (kEarthRadiusM * cos_lat0_) / kDegToRad};
}

bool GeoGrid::contains(GeoPoint p) const noexcept {
  return finite_point(p) && p.lat >= min_.lat && p.lat <= max_.lat && p.lon >= min_.lon &&
         p.lon <= max_.lon;
}

std::optional<CellIndex> GeoGrid::try_locate(GeoPoint p) const noexcept {
  if (!contains(p)) return std::nullopt;
  const std::size_t col = axis_index(p.lon, min_.lon, max_.lon, cols_);
  const std::size_t row = axis_index(p.lat, min_.lat, max_.lat, rows_);
  return row * cols_ + col;
}

CellIndex GeoGrid::locate(GeoPoint p) const {
  if (auto l = try_locate(p)) return *l;
  throw Error(ErrorKind::kOutOfRegion,
              fmt::format("point ({}, {}) is outside the region bbox", p.lat, p.lon));
}

CellCoord GeoGrid::coord(CellIndex l) const {
  if (l >= size()) throw Error(ErrorKind::kInvalidArgument, fmt::format("cell {} out of range", l));
  return {l / cols_, l % cols_};
}

CellIndex GeoGrid::index(CellCoord rc) const {
  if (rc.row >= rows_ || rc.col >= cols_) {
    throw Error(ErrorKind::kInvalidArgument,
                fmt::format("cell (row {}, col {}) out of range", rc.row, rc.col));
  }
  return rc.row * cols_ + rc.col;
}

Vec2 GeoGrid::center_m(CellIndex l) const {
  const CellCoord rc = coord(l);
  return {col_x_[rc.col], row_y_[rc.row]};
}

GeoPoint GeoGrid::center(CellIndex l) const {
  const CellCoord rc = coord(l);
  const double fc = (static_cast<double>(rc.col) + 0.5) / static_cast<double>(cols_);
  const double fr = (static_cast<double>(rc.row) + 0.5) / static_cast<double>(rows_);
  return {min_.lat + fr * (max_.lat - min_.lat), min_.lon + fc * (max_.lon - min_.lon)};
}

RectM GeoGrid::cell_rect_m(CellIndex l) const {
  const CellCoord rc = coord(l);
  const double x0 = bbox_m_.x0 + static_cast<double>(rc.col) * cell_w_;
  const double y0 = bbox_m_.y0 + static_cast<double>(rc.row) * cell_h_;
  return {x0, y0, x0 + cell_w_, y0 + cell_h_};
}

double GeoGrid::cell_side_m() const noexcept { return std::sqrt(cell_w_ * cell_h_); }

std::pair<std::size_t, std::size_t> choose_grid_shape(GeoPoint bbox_min, GeoPoint bbox_max,
                                                      std::size_t n_cells) {
  if (n_cells == 0) throw Error(ErrorKind::kInvalidArgument, "cell count must be positive");
  const GeoGrid probe = GeoGrid::build(bbox_min, bbox_max, 1, 1);
  const double width = probe.cell_width_m();
  const double height = probe.cell_height_m();
  std::pair<std::size_t, std::size_t> best{n_cells, 1};
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t cols = 1; cols <= n_cells; ++cols) {
    if (n_cells % cols != 0) continue;
    const std::size_t rows = n_cells / cols;
    const double aspect = (width / static_cast<double>(cols)) / (height / static_cast<double>(rows));
    const double score = std::fabs(std::log(aspect));
    if (score < best_score) {
      best_score = score;
      best = {cols, rows};
    }
  }
  return best;
}

GeoGrid build_grid_with_cells(GeoPoint bbox_min, GeoPoint bbox_max, std::size_t n_cells) {
  const auto [cols, rows] = choose_grid_shape(bbox_min, bbox_max, n_cells);
  return GeoGrid::build(bbox_min, bbox_max, cols, rows);
}

// ---------------------------------------------------------------------------
// Polygons

namespace {

std::vector<Vec2> project_ring(const GeoGrid& grid, const Ring& ring) {
  std::vector<Vec2> pts;
  pts.reserve(ring.size());
  for (const GeoPoint& p : ring) {
    if (!finite_point(p)) throw Error(ErrorKind::kInvalidGeometry, "non-finite polygon vertex");
    pts.push_back(grid.project(p));
  }
  if (pts.size() >= 2 && ring.front() == ring.back()) pts.pop_back();
  return pts;
}

double signed_area(const std::vector<Vec2>& pts) {
  double acc = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

double cross(Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool on_segment(Vec2 p, Vec2 a, Vec2 b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const int d1 = sign(cross(c, d, a));
  const int d2 = sign(cross(c, d, b));
  const int d3 = sign(cross(a, b, c));
  const int d4 = sign(cross(a, b, d));
  if (d1 != d2 && d3 != d4 && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0) return true;
  if (d1 == 0 && on_segment(a, c, d)) return true;
  if (d2 == 0 && on_segment(b, c, d)) return true;
  if (d3 == 0 && on_segment(c, a, b)) return true;
  if (d4 == 0 && on_segment(d, a, b)) return true;
  return false;
}

void validate_projected(const std::vector<Vec2>& pts) {
  const std::size_t n = pts.size();
  if (n < 3) throw Error(ErrorKind::kInvalidGeometry, "polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[(i + 1) % n];
    if (a.x == b.x && a.y == b.y) {
      throw Error(ErrorKind::kInvalidGeometry, "polygon has repeated consecutive vertices");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = pts[i];
    const Vec2 b = pts[(i + 1) % n];
    // Adjacent edge folding back on this one.
    const Vec2 c = pts[(i + 2) % n];
    if (sign(cross(a, b, c)) == 0 && ((c.x - b.x) * (a.x - b.x) + (c.y - b.y) * (a.y - b.y)) > 0.0) {
      throw Error(ErrorKind::kInvalidGeometry, "polygon edges overlap");
    }
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // shares vertex 0
      if (segments_intersect(a, b, pts[j], pts[(j + 1) % n])) {
        throw Error(ErrorKind::kInvalidGeometry, "polygon is self-intersecting");
      }
    }
  }
  if (signed_area(pts) == 0.0) throw Error(ErrorKind::kInvalidGeometry, "polygon has zero area");
}

// Clips against one half-plane: keep points with inside(p) true.
template <typename Inside, typename Intersect>
std::vector<Vec2> clip_edge(const std::vector<Vec2>& in, Inside inside, Intersect intersect) {
  std::vector<Vec2> out;
  if (in.empty()) return out;
  out.reserve(in.size() + 4);
  Vec2 prev = in.back();
  bool prev_in = inside(prev);
  for (const Vec2& cur : in) {
    const bool cur_in = inside(cur);
    if (cur_in) {
      if (!prev_in) out.push_back(intersect(prev, cur));
      out.push_back(cur);
    } else if (prev_in) {
      out.push_back(intersect(prev, cur));
    }
    prev = cur;
    prev_in = cur_in;
  }
  return out;
}

Vec2 at_x(Vec2 a, Vec2 b, double x) {
  const double t = (x - a.x) / (b.x - a.x);
  return {x, a.y + t * (b.y - a.y)};
}

Vec2 at_y(Vec2 a, Vec2 b, double y) {
  const double t = (y - a.y) / (b.y - a.y);
  return {a.x + t * (b.x - a.x), y};
}

std::vector<Vec2> clip_to_rect(const std::vector<Vec2>& poly, const RectM& r) {
  auto out = clip_edge(poly, [&](Vec2 p) { return p.x >= r.x0; },
                       [&](Vec2 a, Vec2 b) { return at_x(a, b, r.x0); });
  out = clip_edge(out, [&](Vec2 p) { return p.x <= r.x1; },
                  [&](Vec2 a, Vec2 b) { return at_x(a, b, r.x1); });
  out = clip_edge(out, [&](Vec2 p) { return p.y >= r.y0; },
                  [&](Vec2 a, Vec2 b) { return at_y(a, b, r.y0); });
  out = clip_edge(out, [&](Vec2 p) { return p.y <= r.y1; },
                  [&](Vec2 a, Vec2 b) { return at_y(a, b, r.y1); });
  return out;
}

// Range of cells along one axis overlapped by [lo, hi].
std::pair<std::size_t, std::size_t> cell_span(double lo, double hi, double origin, double step,
                                              std::size_t n) {
  const double flo = std::floor((lo - origin) / step);
  const double fhi = std::floor((hi - origin) / step);
  const auto clampi = [n](double f) {
    if (f < 0.0) return std::size_t{0};
    if (f >= static_cast<double>(n)) return n - 1;
    return static_cast<std::size_t>(f);
  };
  return {clampi(flo), clampi(fhi)};
}

}  // namespace

double ring_area_m2(const GeoGrid& grid, const Ring& ring) {
  return std::fabs(signed_area(project_ring(grid, ring)));
}

void validate_ring(const GeoGrid& grid, const Ring& ring) { validate_projected(project_ring(grid, ring)); }

std::vector<CellOverlap> polygon_cell_overlap(const GeoGrid& grid, const Ring& ring) {
  const std::vector<Vec2> pts = project_ring(grid, ring);
  validate_projected(pts);
  const double total = std::fabs(signed_area(pts));

  double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
  for (const Vec2& p : pts) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const RectM box = grid.bbox_m();
  std::vector<CellOverlap> result;
  if (xmax < box.x0 || xmin > box.x1 || ymax < box.y0 || ymin > box.y1) return result;

  const auto [c0, c1] = cell_span(xmin, xmax, box.x0, grid.cell_width_m(), grid.cols());
  const auto [r0, r1] = cell_span(ymin, ymax, box.y0, grid.cell_height_m(), grid.rows());
  for (std::size_t r = r0; r <= r1; ++r) {
    for (std::size_t c = c0; c <= c1; ++c) {
      const CellIndex l = r * grid.cols() + c;
      const std::vector<Vec2> piece = clip_to_rect(pts, grid.cell_rect_m(l));
      if (piece.size() < 3) continue;
      const double area = std::fabs(signed_area(piece));
      if (area <= 0.0) continue;
      result.push_back({l, area / total, area});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Features

FeatureSchema FeatureSchema::defaults() {
  return {{"open_space", "single_family", "two_family", "commercial", "apartment",
           "transportation"},
          {"single_family", "two_family", "apartment"}};
}

bool FeatureSchema::is_known(const std::string& subtype) const {
  return std::find(subtypes.begin(), subtypes.end(), subtype) != subtypes.end();
}

bool FeatureSchema::is_residential(const std::string& subtype) const {
  return std::find(residential.begin(), residential.end(), subtype) != residential.end();
}

FeatureMatrix::FeatureMatrix(std::size_t cells, std::vector<std::string> names)
    : cells_(cells), names_(std::move(names)), data_(cells_ * names_.size(), 0.0) {}

std::vector<double> FeatureMatrix::row(CellIndex l) const {
  std::vector<double> out(dims());
  for (std::size_t j = 0; j < dims(); ++j) out[j] = at(l, j);
  return out;
}

FeatureAggregation aggregate_features(const GeoGrid& grid, std::span<const LandUseRecord> records,
                                      std::span<const GeoPoint> stations,
                                      const FeatureSchema& schema) {
  std::vector<std::string> names;
  for (const auto& s : schema.subtypes) names.push_back("area_" + s);
  for (const auto& s : schema.subtypes) names.push_back("count_" + s);
  names.emplace_back("asset_value");
  if (!stations.empty()) names.emplace_back("station_distance");

  FeatureAggregation result{FeatureMatrix(grid.size(), names), 0};
  FeatureMatrix& m = result.features;
  const std::size_t n_sub = schema.subtypes.size();
  const std::size_t asset_col = 2 * n_sub;

  // Canonical accumulation order makes the sums independent of input order.
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto key = [&](std::size_t i) {
    const LandUseRecord& r = records[i];
    return std::tie(r.subtype, r.asset_value);
  };
  const auto vertex_less = [&](std::size_t a, std::size_t b) {
    const Ring& ra = records[a].polygon;
    const Ring& rb = records[b].polygon;
    return std::lexicographical_compare(
        ra.begin(), ra.end(), rb.begin(), rb.end(),
        [](const GeoPoint& p, const GeoPoint& q) { return std::tie(p.lat, p.lon) < std::tie(q.lat, q.lon); });
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (key(a) != key(b)) return key(a) < key(b);
    return vertex_less(a, b);
  });

  for (std::size_t idx : order) {
    const LandUseRecord& rec = records[idx];
    const auto it = std::find(schema.subtypes.begin(), schema.subtypes.end(), rec.subtype);
    if (it == schema.subtypes.end()) {
      ++result.rejected_records;
      continue;
    }
    if (rec.asset_value && !(*rec.asset_value >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "asset_value must be nonnegative");
    }
    const std::size_t s = static_cast<std::size_t>(it - schema.subtypes.begin());
    const bool residential = schema.is_residential(rec.subtype) && rec.asset_value.has_value();
    for (const CellOverlap& ov : polygon_cell_overlap(grid, rec.polygon)) {
      m.at(ov.cell, s) += ov.area_m2;
      m.at(ov.cell, n_sub + s) += ov.fraction;
      if (residential) m.at(ov.cell, asset_col) += *rec.asset_value * ov.fraction;
    }
  }

  if (!stations.empty()) {
    std::vector<Vec2> st;
    st.reserve(stations.size());
    for (const GeoPoint& p : stations) st.push_back(grid.project(p));
    const std::size_t col = asset_col + 1;
    for (CellIndex l = 0; l < grid.size(); ++l) {
      const Vec2 c = grid.center_m(l);
      double best = std::numeric_limits<double>::infinity();
      for (const Vec2& p : st) best = std::min(best, std::hypot(c.x - p.x, c.y - p.y));
      m.at(l, col) = best;
    }
  }
  return result;
}

FeatureMatrix standardize(const FeatureMatrix& raw) {
  FeatureMatrix out(raw.cells(), raw.names());
  const double n = static_cast<double>(raw.cells());
  for (std::size_t j = 0; j < raw.dims(); ++j) {
    const auto col = raw.column(j);
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    var /= n;
    auto dst = out.column(j);
    if (!(var > 0.0)) continue;  // zero-variance column stays 0
    const double sd = std::sqrt(var);
    for (std::size_t l = 0; l < col.size(); ++l) dst[l] = (col[l] - mean) / sd;
  }
  return out;
}

FeatureMatrix resample_features(const GeoGrid& source_grid, const FeatureMatrix& source,
                                const GeoGrid& target_grid) {
  if (source.cells() != source_grid.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "feature matrix does not match its grid");
  }
  FeatureMatrix out(target_grid.size(), source.names());
  const GeoPoint lo = source_grid.bbox_min();
  const GeoPoint hi = source_grid.bbox_max();
  for (CellIndex l = 0; l < target_grid.size(); ++l) {
    GeoPoint p = target_grid.center(l);
    p.lat = std::clamp(p.lat, lo.lat, hi.lat);
    p.lon = std::clamp(p.lon, lo.lon, hi.lon);
    const CellIndex src = source_grid.locate(p);
    for (std::size_t j = 0; j < source.dims(); ++j) out.at(l, j) = source.at(src, j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// I/O

namespace {

using nlohmann::json;

Ring parse_ring(const json& coords) {
  Ring ring;
  for (const json& pt : coords) {
    if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number()) {
      throw Error(ErrorKind::kParse, "malformed coordinate");
    }
    ring.push_back({pt[1].get<double>(), pt[0].get<double>()});
  }
  return ring;
}

json parse_collection(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("GeoJSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array()) {
    throw Error(ErrorKind::kParse, "GeoJSON: expected a FeatureCollection");
  }
  return doc;
}

}  // namespace

LandUseLoad parse_land_use_geojson(const std::string& text) {
  const json doc = parse_collection(text);
  LandUseLoad out;
  const json& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const json& f = features[i];
    try {
      if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object()) {
        throw Error(ErrorKind::kParse, "feature without geometry");
      }
      const json& geom = f["geometry"];
      if (geom.value("type", "") != "Polygon") {
        throw Error(ErrorKind::kInvalidGeometry, "only Polygon geometries are supported");
      }
      const json& rings = geom.at("coordinates");
      if (!rings.is_array() || rings.empty()) throw Error(ErrorKind::kParse, "empty polygon");
      if (rings.size() > 1) throw Error(ErrorKind::kInvalidGeometry, "polygons with holes are not supported");
      const json props = f.value("properties", json::object());
      if (!props.contains("subtype") || !props["subtype"].is_string()) {
        throw Error(ErrorKind::kParse, "missing string property 'subtype'");
      }
      LandUseRecord rec;
      rec.polygon = parse_ring(rings[0]);
      rec.subtype = props["subtype"].get<std::string>();
      if (props.contains("asset_value") && !props["asset_value"].is_null()) {
        if (!props["asset_value"].is_number()) throw Error(ErrorKind::kParse, "asset_value must be a number");
        const double v = props["asset_value"].get<double>();
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw Error(ErrorKind::kInvalidArgument, "asset_value must be finite and nonnegative");
        }
        rec.asset_value = v;
      }
      out.records.push_back(std::move(rec));
    } catch (const Error& e) {
      out.rejected.emplace_back(i, e.what());
    } catch (const json::exception& e) {
      out.rejected.emplace_back(i, e.what());
    }
  }
  return out;
}

std::vector<GeoPoint> parse_stations_geojson(const std::string& text) {
  const json doc = parse_collection(text);
  std::vector<GeoPoint> out;
  for (const json& f : doc["features"]) {
    const json& geom = f.at("geometry");
    if (geom.value("type", "") != "Point") {
      throw Error(ErrorKind::kInvalidGeometry, "stations must be Point features");
    }
    const json& c = geom.at("coordinates");
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
      throw Error(ErrorKind::kParse, "malformed station coordinate");
    }
    out.push_back({c[1].get<double>(), c[0].get<double>()});
  }
  return out;
}

void write_feature_csv(std::ostream& out, const GeoGrid& grid, const FeatureMatrix& features) {
  if (features.cells() != grid.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "feature matrix does not match grid");
  }
  out << "row,col";
  for (const auto& name : features.names()) out << ',' << csv::escape(name);
  out << '\n';
  for (CellIndex l = 0; l < grid.size(); ++l) {
    const CellCoord rc = grid.coord(l);
    out << rc.row << ',' << rc.col;
    for (std::size_t j = 0; j < features.dims(); ++j) out << ',' << fmt::format("{}", features.at(l, j));
    out << '\n';
  }
}

FeatureTable read_feature_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kParse, "feature CSV is empty");
  const auto header = csv::split_line(line);
  if (header.size() < 2 || csv::trim(header[0]) != "row" || csv::trim(header[1]) != "col") {
    throw Error(ErrorKind::kParse, "feature CSV header must start with row,col");
  }
  std::vector<std::string> names(header.begin() + 2, header.end());
  struct Row {
    std::size_t row, col;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  std::size_t max_row = 0, max_col = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::kParse, fmt::format("feature CSV line {}: wrong field count", line_no));
    }
    long long r = 0, c = 0;
    if (!csv::parse_int(fields[0], r) || !csv::parse_int(fields[1], c) || r < 0 || c < 0) {
      throw Error(ErrorKind::kParse, fmt::format("feature CSV line {}: bad row/col", line_no));
    }
    Row row{static_cast<std::size_t>(r), static_cast<std::size_t>(c), {}};
    for (std::size_t j = 2; j < fields.size(); ++j) {
      double v = 0.0;
      if (!csv::parse_double(fields[j], v)) {
        throw Error(ErrorKind::kParse, fmt::format("feature CSV line {}: bad value", line_no));
      }
      row.values.push_back(v);
    }
    max_row = std::max(max_row, row.row);
    max_col = std::max(max_col, row.col);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::kParse, "feature CSV has no data rows");
  FeatureTable table{max_col + 1, max_row + 1, {}};
  if (rows.size() != table.cols * table.rows) {
    throw Error(ErrorKind::kParse, "feature CSV does not cover a full grid");
  }
  table.features = FeatureMatrix(rows.size(), names);
  std::vector<bool> seen(rows.size(), false);
  for (const Row& row : rows) {
    const std::size_t l = row.row * table.cols + row.col;
    if (seen[l]) throw Error(ErrorKind::kParse, "feature CSV has duplicate cells");
    seen[l] = true;
    for (std::size_t j = 0; j < names.size(); ++j) table.features.at(l, j) = row.values[j];
  }
  return table;
}

}  // namespace nhp
