#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nhp {

/// Geographic coordinate in degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Point in the grid's local projected plane, meters east/north of the
/// projection origin.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

using CellIndex = std::size_t;

struct CellCoord {
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const CellCoord&, const CellCoord&) = default;
};

struct RectM {
  double x0, y0, x1, y1;
};

inline constexpr double kEarthRadiusM = 6371008.8;

/// Region of interest discretized into `cols` x `rows` equal cells.
///
/// Columns run west to east along longitude, rows south to north along
/// latitude; cell index is `row * cols + col`. Metric quantities use a local
/// equirectangular projection about the bbox center. A point on an interior
/// cell edge belongs to the lower-indexed cell; the bbox minimum edge belongs
/// to the first cell and the maximum edge to the last.
class GeoGrid {
 public:
  /// `cols` = u (longitude axis), `rows` = v (latitude axis).
  static GeoGrid build(GeoPoint bbox_min, GeoPoint bbox_max, std::size_t cols, std::size_t rows);

  std::size_t cols() const noexcept { return cols_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return cols_ * rows_; }

  GeoPoint bbox_min() const noexcept { return min_; }
  GeoPoint bbox_max() const noexcept { return max_; }
  GeoPoint origin() const noexcept { return origin_; }

  Vec2 project(GeoPoint p) const noexcept;
  GeoPoint unproject(Vec2 p) const noexcept;

  bool contains(GeoPoint p) const noexcept;

  /// Throws Error(kOutOfRegion) for points outside the bbox.
  CellIndex locate(GeoPoint p) const;
  std::optional<CellIndex> try_locate(GeoPoint p) const noexcept;

  CellCoord coord(CellIndex l) const;
  CellIndex index(CellCoord rc) const;

  Vec2 center_m(CellIndex l) const;
  GeoPoint center(CellIndex l) const;
  RectM cell_rect_m(CellIndex l) const;
  RectM bbox_m() const noexcept { return bbox_m_; }

  double cell_width_m() const noexcept { return cell_w_; }
  double cell_height_m() const noexcept { return cell_h_; }
  /// Geometric mean of cell width and height.
  double cell_side_m() const noexcept;

  /// x of each column center and y of each row center, meters.
  std::span<const double> col_centers_m() const noexcept { return col_x_; }
  std::span<const double> row_centers_m() const noexcept { return row_y_; }

  /// Cell-center coordinates for every cell in kilometers, indexed by cell.
  std::span<const double> centers_x_km() const noexcept { return centers_x_km_; }
  std::span<const double> centers_y_km() const noexcept { return centers_y_km_; }

 private:
  GeoGrid() = default;

  GeoPoint min_{}, max_{}, origin_{};
  std::size_t cols_ = 0, rows_ = 0;
  double cos_lat0_ = 1.0;
  RectM bbox_m_{};
  double cell_w_ = 0.0, cell_h_ = 0.0;
  std::vector<double> col_x_, row_y_;
  std::vector<double> centers_x_km_, centers_y_km_;
};

/// Picks (cols, rows) with cols * rows == n_cells whose cells are closest to
/// square for the given bbox.
std::pair<std::size_t, std::size_t> choose_grid_shape(GeoPoint bbox_min, GeoPoint bbox_max,
                                                      std::size_t n_cells);

GeoGrid build_grid_with_cells(GeoPoint bbox_min, GeoPoint bbox_max, std::size_t n_cells);

// --------------------------------------------------------------------------
// Polygons

/// Simple ring; a closing vertex equal to the first is optional.
using Ring = std::vector<GeoPoint>;

struct CellOverlap {
  CellIndex cell = 0;
  double fraction = 0.0;  // area(polygon ∩ cell) / area(polygon)
  double area_m2 = 0.0;   // area(polygon ∩ cell)
};

double ring_area_m2(const GeoGrid& grid, const Ring& ring);

/// Throws Error(kInvalidGeometry) for fewer than three distinct vertices,
/// zero area, or self-intersection.
void validate_ring(const GeoGrid& grid, const Ring& ring);

/// Overlap of a polygon with every cell it touches, sorted by cell index.
std::vector<CellOverlap> polygon_cell_overlap(const GeoGrid& grid, const Ring& ring);

// --------------------------------------------------------------------------
// Features

struct LandUseRecord {
  Ring polygon;
  std::string subtype;
  std::optional<double> asset_value;
};

/// Which land-use subtypes become features, and which count as residential
/// for the asset-value feature.
struct FeatureSchema {
  std::vector<std::string> subtypes;
  std::vector<std::string> residential;

  static FeatureSchema defaults();
  bool is_known(const std::string& subtype) const;
  bool is_residential(const std::string& subtype) const;
};

/// Per-cell feature vectors, stored column-major: column j is contiguous.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t cells, std::vector<std::string> names);

  std::size_t cells() const noexcept { return cells_; }
  std::size_t dims() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  double at(CellIndex l, std::size_t j) const { return data_[j * cells_ + l]; }
  double& at(CellIndex l, std::size_t j) { return data_[j * cells_ + l]; }

  std::span<const double> column(std::size_t j) const {
    return {data_.data() + j * cells_, cells_};
  }
  std::span<double> column(std::size_t j) { return {data_.data() + j * cells_, cells_}; }

  std::vector<double> row(CellIndex l) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t cells_ = 0;
  std::vector<std::string> names_;
  std::vector<double> data_;
};

struct FeatureAggregation {
  FeatureMatrix features;          // raw, nonnegative
  std::size_t rejected_records = 0;  // unknown subtype
};

/// Per subtype s: `area_<s>` (m²) and `count_<s>` (fractional buildings);
/// then `asset_value` over residential subtypes; then `station_distance` (m)
/// when `stations` is nonempty. Invariant to record order.
FeatureAggregation aggregate_features(const GeoGrid& grid, std::span<const LandUseRecord> records,
                                      std::span<const GeoPoint> stations,
                                      const FeatureSchema& schema);

/// Z-score per column (population variance); zero-variance columns map to 0.
FeatureMatrix standardize(const FeatureMatrix& raw);

/// Nearest-cell resampling of a feature matrix onto another grid over the
/// same region. Target centers outside the source bbox are clamped.
FeatureMatrix resample_features(const GeoGrid& source_grid, const FeatureMatrix& source,
                                const GeoGrid& target_grid);

// --------------------------------------------------------------------------
// I/O

struct LandUseLoad {
  std::vector<LandUseRecord> records;
  std::vector<std::pair<std::size_t, std::string>> rejected;  // feature index, reason
};

/// GeoJSON FeatureCollection of Polygon features with properties `subtype`
/// and optional `asset_value`. Polygons with holes and non-polygon
/// geometries are rejected per feature.
LandUseLoad parse_land_use_geojson(const std::string& text);
std::vector<GeoPoint> parse_stations_geojson(const std::string& text);

/// Header `row,col,<feature names…>`.
void write_feature_csv(std::ostream& out, const GeoGrid& grid, const FeatureMatrix& features);

struct FeatureTable {
  std::size_t cols = 0;
  std::size_t rows = 0;
  FeatureMatrix features;
};

FeatureTable read_feature_csv(std::istream& in);

}  // namespace nhp
