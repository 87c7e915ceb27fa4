#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slidepp {

// Missing cells are stored as quiet NaN; the file-level NODATA sentinel is
// kept separately on each grid so it survives a write/read cycle.
inline constexpr double kNoData = std::numeric_limits<double>::quiet_NaN();
inline bool is_nodata(double v) { return std::isnan(v); }

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

struct CellIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const CellIndex&) const = default;
};

struct Range {
  double min = 0.0;
  double max = 0.0;
  bool contains(double v) const { return v >= min && v <= max; }
  bool operator==(const Range&) const = default;
};

// Placement and shape of a regular grid in planar metres. Row 0 is the
// northern row; (origin_x, origin_y) is the lower-left corner.
class GridGeometry {
 public:
  GridGeometry() = default;
  GridGeometry(double origin_x, double origin_y, std::size_t n_rows,
               std::size_t n_cols, double cell_size);

  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  double cell_size() const { return cell_size_; }
  double cell_area() const { return cell_size_ * cell_size_; }
  std::size_t cell_count() const { return n_rows_ * n_cols_; }
  double width() const { return static_cast<double>(n_cols_) * cell_size_; }
  double height() const { return static_cast<double>(n_rows_) * cell_size_; }

  std::size_t index(std::size_t row, std::size_t col) const { return row * n_cols_ + col; }
  CellIndex cell(std::size_t index) const { return {index / n_cols_, index % n_cols_}; }

  // Lower-left corner of a cell.
  double cell_min_x(std::size_t col) const {
    return origin_x_ + static_cast<double>(col) * cell_size_;
  }
  double cell_min_y(std::size_t row) const {
    return origin_y_ + static_cast<double>(n_rows_ - 1 - row) * cell_size_;
  }
  Point cell_center(std::size_t row, std::size_t col) const {
    return {cell_min_x(col) + 0.5 * cell_size_, cell_min_y(row) + 0.5 * cell_size_};
  }

  // Cell owning p under half-open [x, x+cell) x [y, y+cell) semantics.
  std::optional<CellIndex> locate(Point p) const;

  bool operator==(const GridGeometry&) const = default;

 private:
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  std::size_t n_rows_ = 1;
  std::size_t n_cols_ = 1;
  double cell_size_ = 1.0;
};

// A grid geometry plus a per-cell validity mask. Used both for the modelling
// window W and for derived masks (range masks, selection masks).
class Window {
 public:
  Window() = default;
  explicit Window(GridGeometry geometry);  // all cells valid
  Window(GridGeometry geometry, std::vector<std::uint8_t> valid);

  const GridGeometry& geometry() const { return geometry_; }
  bool valid(std::size_t index) const { return valid_[index] != 0; }
  bool valid(std::size_t row, std::size_t col) const { return valid(geometry_.index(row, col)); }
  std::span<const std::uint8_t> mask() const { return valid_; }

  std::size_t valid_count() const;
  double area() const { return static_cast<double>(valid_count()) * geometry_.cell_area(); }
  bool empty() const { return valid_count() == 0; }

  // Valid cell containing p, if any.
  std::optional<CellIndex> locate_valid(Point p) const;
  bool contains(Point p) const { return locate_valid(p).has_value(); }

  // Cell-wise AND; geometries must match.
  Window intersect(const Window& other) const;
  bool subset_of(const Window& other) const;

  bool operator==(const Window&) const = default;

 private:
  GridGeometry geometry_;
  std::vector<std::uint8_t> valid_ = {1};
};

class RasterGrid {
 public:
  static constexpr double kDefaultNoDataValue = -9999.0;

  RasterGrid() = default;
  explicit RasterGrid(GridGeometry geometry, double fill = kNoData,
                      double nodata_value = kDefaultNoDataValue);
  RasterGrid(GridGeometry geometry, std::vector<double> values,
             double nodata_value = kDefaultNoDataValue);

  const GridGeometry& geometry() const { return geometry_; }
  double nodata_value() const { return nodata_value_; }
  void set_nodata_value(double v) { nodata_value_ = v; }

  double operator[](std::size_t index) const { return values_[index]; }
  double& operator[](std::size_t index) { return values_[index]; }
  double at(std::size_t row, std::size_t col) const { return values_[geometry_.index(row, col)]; }
  double& at(std::size_t row, std::size_t col) { return values_[geometry_.index(row, col)]; }
  std::span<const double> values() const { return values_; }

  bool valid(std::size_t index) const { return !is_nodata(values_[index]); }
  std::size_t valid_count() const;
  Window window() const;

  // Min/max over valid cells; nullopt when every cell is NODATA.
  std::optional<Range> range() const;

  // Cell-wise identity; NODATA matches NODATA.
  bool operator==(const RasterGrid& other) const;

 private:
  GridGeometry geometry_;
  std::vector<double> values_ = {kNoData};
  double nodata_value_ = kDefaultNoDataValue;
};

// Named rasters sharing one geometry.
class CovariateStack {
 public:
  CovariateStack() = default;
  explicit CovariateStack(GridGeometry geometry) : geometry_(geometry), has_geometry_(true) {}

  const GridGeometry& geometry() const { return geometry_; }
  void add(const std::string& name, RasterGrid grid);
  bool contains(const std::string& name) const { return grids_.count(name) != 0; }
  const RasterGrid& get(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t size() const { return grids_.size(); }

  // Cells valid in every member grid (or in the listed ones).
  Window window() const;
  Window window(std::span<const std::string> names) const;

 private:
  GridGeometry geometry_;
  bool has_geometry_ = false;
  std::map<std::string, RasterGrid> grids_;
};

class PointPattern {
 public:
  PointPattern() = default;
  // Every point must be finite and inside a valid cell of the window.
  PointPattern(Window window, std::vector<Point> points);

  // Keeps points inside valid cells, reporting the rest through `rejected`
  // and a warning.
  static PointPattern filtered(Window window, std::span<const Point> points,
                               std::vector<Point>* rejected = nullptr);

  const Window& window() const { return window_; }
  std::span<const Point> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

 private:
  Window window_;
  std::vector<Point> points_;
};

struct CovariateSample {
  std::map<std::string, double> values;  // present covariates only
  std::vector<std::string> missing;      // covariates with NODATA at p
};

// Value of each covariate in the cell containing p. Throws DataError when p
// lies outside the grid extent.
CovariateSample covariate_at(const CovariateStack& stack, Point p);

// Cells where every named covariate is present and inside its closed range.
Window range_mask(const CovariateStack& stack, const std::map<std::string, Range>& ranges);

// ---- file I/O ----

RasterGrid read_ascii_grid(const std::filesystem::path& path);
void write_ascii_grid(const RasterGrid& grid, const std::filesystem::path& path);

// CSV with header `x,y`.
std::vector<Point> read_points_csv(const std::filesystem::path& path);
void write_points_csv(std::span<const Point> points, const std::filesystem::path& path);

// Loads every *.asc in a directory, keyed by file stem.
CovariateStack read_stack_dir(const std::filesystem::path& dir);
void write_stack_dir(const CovariateStack& stack, const std::filesystem::path& dir);

}  // namespace slidepp
