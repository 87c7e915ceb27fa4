#include "slidepp/raster.hpp"

#include <algorithm>
#include <sstream>

#include "slidepp/error.hpp"
#include "slidepp/log.hpp"

namespace slidepp {

GridGeometry::GridGeometry(double origin_x, double origin_y, std::size_t n_rows,
                           std::size_t n_cols, double cell_size)
    : origin_x_(origin_x), origin_y_(origin_y), n_rows_(n_rows), n_cols_(n_cols),
      cell_size_(cell_size) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw DataError("grid cell size must be positive and finite");
  }
  if (n_rows == 0 || n_cols == 0) throw DataError("grid must have at least one row and column");
  if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
    throw DataError("grid origin must be finite");
  }
}

std::optional<CellIndex> GridGeometry::locate(Point p) const {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
  if (p.x < origin_x_ || p.y < origin_y_) return std::nullopt;
  double fx = std::floor((p.x - origin_x_) / cell_size_);
  double fy = std::floor((p.y - origin_y_) / cell_size_);
  if (fx >= static_cast<double>(n_cols_) + 1.0 || fy >= static_cast<double>(n_rows_) + 1.0) {
    return std::nullopt;
  }
  auto col = static_cast<long long>(fx);
  auto from_bottom = static_cast<long long>(fy);
  // The division can land one cell off near an edge; settle against the exact
  // cell bounds.
  auto min_x = [&](long long c) { return origin_x_ + static_cast<double>(c) * cell_size_; };
  auto min_y = [&](long long r) { return origin_y_ + static_cast<double>(r) * cell_size_; };
  if (col > 0 && min_x(col) > p.x) --col;
  if (min_x(col + 1) <= p.x) ++col;
  if (from_bottom > 0 && min_y(from_bottom) > p.y) --from_bottom;
  if (min_y(from_bottom + 1) <= p.y) ++from_bottom;
  if (col < 0 || from_bottom < 0 || col >= static_cast<long long>(n_cols_) ||
      from_bottom >= static_cast<long long>(n_rows_)) {
    return std::nullopt;
  }
  return CellIndex{n_rows_ - 1 - static_cast<std::size_t>(from_bottom),
                   static_cast<std::size_t>(col)};
}

Window::Window(GridGeometry geometry)
    : geometry_(geometry), valid_(geometry.cell_count(), 1) {}

Window::Window(GridGeometry geometry, std::vector<std::uint8_t> valid)
    : geometry_(geometry), valid_(std::move(valid)) {
  if (valid_.size() != geometry_.cell_count()) {
    throw DataError("validity mask size does not match grid shape");
  }
  for (auto& v : valid_) v = v ? 1 : 0;
}

std::size_t Window::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

std::optional<CellIndex> Window::locate_valid(Point p) const {
  auto cell = geometry_.locate(p);
  if (!cell || !valid(cell->row, cell->col)) return std::nullopt;
  return cell;
}

Window Window::intersect(const Window& other) const {
  if (!(geometry_ == other.geometry_)) throw DataError("cannot intersect windows of different geometry");
  std::vector<std::uint8_t> out(valid_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = valid_[i] & other.valid_[i];
  return Window(geometry_, std::move(out));
}

bool Window::subset_of(const Window& other) const {
  if (!(geometry_ == other.geometry_)) return false;
  for (std::size_t i = 0; i < valid_.size(); ++i) {
    if (valid_[i] && !other.valid_[i]) return false;
  }
  return true;
}

RasterGrid::RasterGrid(GridGeometry geometry, double fill, double nodata_value)
    : geometry_(geometry), values_(geometry.cell_count(), fill), nodata_value_(nodata_value) {}

RasterGrid::RasterGrid(GridGeometry geometry, std::vector<double> values, double nodata_value)
    : geometry_(geometry), values_(std::move(values)), nodata_value_(nodata_value) {
  if (values_.size() != geometry_.cell_count()) {
    throw DataError("raster value count does not match grid shape");
  }
}

std::size_t RasterGrid::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](double v) { return !is_nodata(v); }));
}

Window RasterGrid::window() const {
  std::vector<std::uint8_t> mask(values_.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = is_nodata(values_[i]) ? 0 : 1;
  return Window(geometry_, std::move(mask));
}

std::optional<Range> RasterGrid::range() const {
  std::optional<Range> r;
  for (double v : values_) {
    if (is_nodata(v)) continue;
    if (!r) {
      r = Range{v, v};
    } else {
      r->min = std::min(r->min, v);
      r->max = std::max(r->max, v);
    }
  }
  return r;
}

bool RasterGrid::operator==(const RasterGrid& other) const {
  if (!(geometry_ == other.geometry_) || values_.size() != other.values_.size()) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double a = values_[i];
    const double b = other.values_[i];
    if (is_nodata(a) != is_nodata(b)) return false;
    if (!is_nodata(a) && a != b) return false;
  }
  return true;
}

void CovariateStack::add(const std::string& name, RasterGrid grid) {
  if (name.empty()) throw ConfigError("covariate name must not be empty");
  if (!has_geometry_) {
    geometry_ = grid.geometry();
    has_geometry_ = true;
  }
  if (!(grid.geometry() == geometry_)) {
    throw DataError("covariate '" + name + "' is not aligned with the stack grid");
  }
  grids_.insert_or_assign(name, std::move(grid));
}

const RasterGrid& CovariateStack::get(const std::string& name) const {
  auto it = grids_.find(name);
  if (it == grids_.end()) throw ConfigError("unknown covariate '" + name + "'");
  return it->second;
}

std::vector<std::string> CovariateStack::names() const {
  std::vector<std::string> out;
  out.reserve(grids_.size());
  for (const auto& [name, grid] : grids_) out.push_back(name);
  return out;
}

Window CovariateStack::window() const {
  auto all = names();
  return window(all);
}

Window CovariateStack::window(std::span<const std::string> names) const {
  std::vector<std::uint8_t> mask(geometry_.cell_count(), 1);
  for (const auto& name : names) {
    const auto& grid = get(name);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!grid.valid(i)) mask[i] = 0;
    }
  }
  return Window(geometry_, std::move(mask));
}

namespace {

void check_point(Point p) {
  if (std::isnan(p.x) || std::isnan(p.y)) throw DataError("point has NaN coordinate");
}

std::string describe(Point p) {
  std::ostringstream os;
  os.precision(17);
  os << '(' << p.x << ", " << p.y << ')';
  return os.str();
}

}  // namespace

PointPattern::PointPattern(Window window, std::vector<Point> points)
    : window_(std::move(window)), points_(std::move(points)) {
  for (const auto& p : points_) {
    check_point(p);
    if (!window_.contains(p)) {
      throw DataError("point " + describe(p) + " is not inside a valid cell of the window");
    }
  }
}

PointPattern PointPattern::filtered(Window window, std::span<const Point> points,
                                    std::vector<Point>* rejected) {
  std::vector<Point> kept;
  std::size_t dropped = 0;
  for (const auto& p : points) {
    if (!std::isnan(p.x) && !std::isnan(p.y) && window.contains(p)) {
      kept.push_back(p);
    } else {
      ++dropped;
      if (rejected) rejected->push_back(p);
    }
  }
  if (dropped > 0) {
    warn(std::to_string(dropped) + " point(s) outside valid covariate cells were rejected");
  }
  return PointPattern(std::move(window), std::move(kept));
}

CovariateSample covariate_at(const CovariateStack& stack, Point p) {
  auto cell = stack.geometry().locate(p);
  if (!cell) throw DataError("point " + describe(p) + " lies outside the grid");
  const std::size_t idx = stack.geometry().index(cell->row, cell->col);
  CovariateSample out;
  for (const auto& name : stack.names()) {
    const double v = stack.get(name)[idx];
    if (is_nodata(v)) {
      out.missing.push_back(name);
    } else {
      out.values.emplace(name, v);
    }
  }
  return out;
}

Window range_mask(const CovariateStack& stack, const std::map<std::string, Range>& ranges) {
  std::vector<const RasterGrid*> grids;
  std::vector<Range> bounds;
  for (const auto& [name, r] : ranges) {
    grids.push_back(&stack.get(name));
    bounds.push_back(r);
  }
  std::vector<std::uint8_t> mask(stack.geometry().cell_count(), 1);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    for (std::size_t k = 0; k < grids.size(); ++k) {
      const double v = (*grids[k])[i];
      if (is_nodata(v) || !bounds[k].contains(v)) {
        mask[i] = 0;
        break;
      }
    }
  }
  return Window(stack.geometry(), std::move(mask));
}

}  // namespace slidepp
