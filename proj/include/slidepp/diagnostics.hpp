#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slidepp/ppm.hpp"
#include "slidepp/rng.hpp"

namespace slidepp {

// Coarse subareas laid from the lower-left corner of the grid; the last row
// and column may be partial. A fine cell belongs to the subarea containing its
// centre.
struct ErrorGrid {
  GridGeometry coarse;
  double subarea = 0.0;
  std::vector<double> area;      // valid area per subarea
  std::vector<double> expected;  // sum of lambda * cell area
  std::vector<std::size_t> observed;
  std::vector<double> error;     // expected - observed
  std::size_t points_outside = 0;  // points on cells without intensity
  double total_expected = 0.0;
  std::size_t total_observed = 0;

  bool has_cells(std::size_t i) const { return area[i] > 0.0; }
  // Error values of subareas that contain valid cells, in raster order.
  std::vector<double> errors() const;
  RasterGrid error_raster() const;
};

ErrorGrid raw_errors(const IntensityMap& map, const PointPattern& pattern, double subarea = 250.0);

struct SummaryRow {
  std::string label;
  double min = 0.0, q1 = 0.0, median = 0.0, mean = 0.0, q3 = 0.0, max = 0.0;
};

// Linear interpolation between order statistics (h = (n - 1) p).
double quantile_type7(std::vector<double> values, double p);

// Rows for e(A) and |e(A)|.
std::vector<SummaryRow> residual_summary(const ErrorGrid& grid);
std::string format_summary(const std::vector<SummaryRow>& rows);

struct LurkingCurve {
  std::string covariate;
  std::vector<double> z;
  std::vector<double> observed;  // observed - expected cumulative residual
  std::vector<double> lo;
  std::vector<double> hi;
  double total_residual = 0.0;
};

struct SimulationOptions {
  int nsim = 39;
  int threads = 1;
  int thresholds = 200;
  bool pearson = false;  // QQ only
};

LurkingCurve lurking_curve(const FittedModel& model, const PointPattern& pattern, const CovariateStack& stack,
                           const std::string& covariate, std::uint64_t seed, const SimulationOptions& options = {});

struct QQData {
  std::vector<double> observed;   // sorted subarea residuals
  std::vector<double> simulated;  // mean of sorted simulated residuals
  std::vector<double> lo;
  std::vector<double> hi;
};

QQData qq_data(const FittedModel& model, const PointPattern& pattern, const CovariateStack& stack, double subarea,
               std::uint64_t seed, const SimulationOptions& options = {});

void write_error_grid_csv(const ErrorGrid& grid, const std::filesystem::path& path);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);
void write_lurking_csv(const LurkingCurve& curve, const std::filesystem::path& path);
void write_qq_csv(const QQData& qq, const std::filesystem::path& path);

// Minimal static SVG renderings.
std::string lurking_svg(const LurkingCurve& curve);
std::string qq_svg(const QQData& qq);
std::string raster_svg(const RasterGrid& grid, const std::string& title, bool diverging = false);
// Panels side by side, each a raster_svg body.
std::string panels_svg(const std::vector<std::pair<const RasterGrid*, std::string>>& panels);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace slidepp
