#include "slidepp/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "slidepp/error.hpp"
#include "slidepp/log.hpp"

namespace slidepp {

CategoricalGrid::CategoricalGrid(GridGeometry geometry, std::vector<int> labels,
                                 std::vector<std::string> levels)
    : geometry_(geometry), labels_(std::move(labels)), levels_(std::move(levels)) {
  if (labels_.size() != geometry_.cell_count()) {
    throw DataError("label count does not match grid shape");
  }
  for (int l : labels_) {
    if (l != kNoLabel && (l < 0 || static_cast<std::size_t>(l) >= levels_.size())) {
      throw DataError("label " + std::to_string(l) + " has no declared level");
    }
  }
}

CategoricalGrid CategoricalGrid::from_codes(const RasterGrid& codes) {
  std::set<long long> distinct;
  for (double v : codes.values()) {
    if (is_nodata(v)) continue;
    if (v != std::floor(v)) throw DataError("categorical raster holds non-integer code " + std::to_string(v));
    distinct.insert(static_cast<long long>(v));
  }
  std::map<long long, int> index;
  std::vector<std::string> levels;
  for (long long c : distinct) {
    index[c] = static_cast<int>(levels.size());
    levels.push_back(std::to_string(c));
  }
  std::vector<int> labels(codes.geometry().cell_count(), kNoLabel);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (codes.valid(i)) labels[i] = index[static_cast<long long>(codes[i])];
  }
  return CategoricalGrid(codes.geometry(), std::move(labels), std::move(levels));
}

RasterGrid CategoricalGrid::to_raster() const {
  RasterGrid out(geometry_);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != kNoLabel) out[i] = labels_[i];
  }
  return out;
}

FilterResult gaussian_filter(const RasterGrid& grid, const FilterSpec& spec) {
  if (!(spec.sigma > 0.0) || !(spec.radius > 0.0)) {
    throw ConfigError("gaussian filter sigma and radius must be positive");
  }
  const auto& g = grid.geometry();
  const double cs = g.cell_size();
  const auto reach = static_cast<long long>(std::floor(spec.radius / cs));

  struct Tap {
    long long dr, dc;
    double w;
  };
  std::vector<Tap> taps;
  const double two_sigma2 = 2.0 * spec.sigma * spec.sigma;
  for (long long dr = -reach; dr <= reach; ++dr) {
    for (long long dc = -reach; dc <= reach; ++dc) {
      const double d2 = cs * cs * static_cast<double>(dr * dr + dc * dc);
      if (d2 <= spec.radius * spec.radius) taps.push_back({dr, dc, std::exp(-d2 / two_sigma2)});
    }
  }

  FilterResult result{RasterGrid(g, kNoData, grid.nodata_value()), 0};
  const auto rows = static_cast<long long>(g.n_rows());
  const auto cols = static_cast<long long>(g.n_cols());
  for (long long r = 0; r < rows; ++r) {
    for (long long c = 0; c < cols; ++c) {
      if (is_nodata(grid.at(r, c))) continue;
      double num = 0.0;
      double den = 0.0;
      for (const auto& t : taps) {
        const long long rr = r + t.dr;
        const long long cc = c + t.dc;
        if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
        const double v = grid.at(rr, cc);
        if (is_nodata(v)) continue;
        num += t.w * v;
        den += t.w;
      }
      if (den > 0.0) {
        result.grid.at(r, c) = num / den;
      } else {
        ++result.empty_neighbourhoods;
      }
    }
  }
  if (result.empty_neighbourhoods > 0) {
    warn(std::to_string(result.empty_neighbourhoods) +
         " cell(s) had no valid filter neighbours and were set to NODATA");
  }
  return result;
}

CategoricalGrid binarize_twi(const RasterGrid& grid, double threshold) {
  std::vector<int> labels(grid.geometry().cell_count(), CategoricalGrid::kNoLabel);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (grid.valid(i)) labels[i] = grid[i] > threshold ? 1 : 0;
  }
  return CategoricalGrid(grid.geometry(), std::move(labels), {"low", "high"});
}

CategoricalGrid curvature_sign(const RasterGrid& grid, double zero_tol) {
  if (!(zero_tol >= 0.0)) throw ConfigError("curvature zero tolerance must be non-negative");
  std::vector<int> labels(grid.geometry().cell_count(), CategoricalGrid::kNoLabel);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!grid.valid(i)) continue;
    const double v = grid[i];
    labels[i] = v < -zero_tol ? 0 : (v > zero_tol ? 2 : 1);
  }
  return CategoricalGrid(grid.geometry(), std::move(labels), {"negative", "zero", "positive"});
}

CategoricalGrid merge_dusaf(const CategoricalGrid& grid, const std::set<int>& natural_codes,
                            const std::set<int>& anthropic_codes) {
  for (int c : natural_codes) {
    if (anthropic_codes.count(c)) {
      throw ConfigError("land-use code " + std::to_string(c) + " is listed as both natural and anthropic");
    }
  }
  // Level -> merged label; -2 for levels never observed in the grid.
  std::vector<int> mapping(grid.levels().size(), -2);
  std::vector<bool> used(grid.levels().size(), false);
  for (int l : grid.labels()) {
    if (l != CategoricalGrid::kNoLabel) used[static_cast<std::size_t>(l)] = true;
  }
  for (std::size_t k = 0; k < mapping.size(); ++k) {
    if (!used[k]) continue;
    const auto& name = grid.levels()[k];
    int code = 0;
    auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), code);
    if (ec != std::errc{} || ptr != name.data() + name.size()) {
      throw DataError("land-use level '" + name + "' is not an integer code");
    }
    if (natural_codes.count(code)) {
      mapping[k] = 0;
    } else if (anthropic_codes.count(code)) {
      mapping[k] = 1;
    } else {
      throw DataError("land-use code " + name + " is not mapped to Natural or Anthropic");
    }
  }
  std::vector<int> labels(grid.labels().size(), CategoricalGrid::kNoLabel);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = grid[i];
    if (l != CategoricalGrid::kNoLabel) labels[i] = mapping[static_cast<std::size_t>(l)];
  }
  return CategoricalGrid(grid.geometry(), std::move(labels), {"Natural", "Anthropic"});
}

}  // namespace slidepp
