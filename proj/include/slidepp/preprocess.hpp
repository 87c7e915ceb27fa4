#pragma once

#include <set>
#include <string>
#include <vector>

#include "slidepp/raster.hpp"

namespace slidepp {

struct FilterSpec {
  double sigma = 100.0;  // metres
  double radius = 10.0;  // metres; weights vanish beyond this centre distance
};

// Per-cell category labels. kNoLabel marks NODATA; every other label indexes
// `levels`.
class CategoricalGrid {
 public:
  static constexpr int kNoLabel = -1;

  CategoricalGrid() = default;
  CategoricalGrid(GridGeometry geometry, std::vector<int> labels, std::vector<std::string> levels);

  // Integer-coded raster (e.g. land-use codes) to categories, one level per
  // distinct code in ascending order, named by the decimal code.
  static CategoricalGrid from_codes(const RasterGrid& codes);

  const GridGeometry& geometry() const { return geometry_; }
  std::span<const int> labels() const { return labels_; }
  int operator[](std::size_t index) const { return labels_[index]; }
  const std::vector<std::string>& levels() const { return levels_; }

  // Labels as doubles, NODATA where unlabeled.
  RasterGrid to_raster() const;

 private:
  GridGeometry geometry_;
  std::vector<int> labels_;
  std::vector<std::string> levels_;
};

struct FilterResult {
  RasterGrid grid;
  std::size_t empty_neighbourhoods = 0;  // valid cells left NODATA
};

// Truncated, renormalised Gaussian smoothing. Cells whose centre lies within
// `radius` contribute with weight exp(-d^2 / (2 sigma^2)); NODATA neighbours
// are excluded from both sums.
FilterResult gaussian_filter(const RasterGrid& grid, const FilterSpec& spec);

// 0 where value <= threshold, 1 above.
CategoricalGrid binarize_twi(const RasterGrid& grid, double threshold = 9.0);

// 0 negative, 1 zero (|v| <= zero_tol), 2 positive.
CategoricalGrid curvature_sign(const RasterGrid& grid, double zero_tol = 1e-6);

// Collapses land-use codes into Natural (0) / Anthropic (1).
CategoricalGrid merge_dusaf(const CategoricalGrid& grid, const std::set<int>& natural_codes,
                            const std::set<int>& anthropic_codes);

}  // namespace slidepp
