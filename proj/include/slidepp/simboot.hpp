#pragma once

#include <cstdint>
#include <optional>

#include "slidepp/ppm.hpp"
#include "slidepp/raster.hpp"
#include "slidepp/rng.hpp"

namespace slidepp {

// Largest expected count per cell that sample_pattern accepts.
inline constexpr double kMaxCellExpectation = 1e6;

// Poisson counts per valid cell, points uniform within the cell. Cells are
// visited in raster order.
PointPattern sample_pattern(const IntensityMap& map, SeededRng& rng);

// Per-cell Poisson counts only (same draws as sample_pattern without the
// point placement).
std::vector<std::uint64_t> sample_counts(const IntensityMap& map, SeededRng& rng);

// Sum of lambda * cell area over the region.
double expected_count(const IntensityMap& map, const Window& region);

struct BootstrapOptions {
  int replicates = 100;
  double alpha = 0.99;
  double dummy_spacing = 50.0;
  int threads = 1;
  double max_failure_fraction = 0.2;
  // Test hook: every replicate uses the same random stream.
  bool identical_streams = false;
};

struct BootstrapMaps {
  int replicates = 0;
  int effective = 0;  // successful refits
  int failures = 0;
  double alpha = 0.0;
  IntensityMap estimate;
  RasterGrid sd;
  RasterGrid percentile;
};

// Semiparametric bootstrap: sample from the fitted intensity over the
// training stack, refit the coefficients with the original dummy nodes and
// smoothing parameters, and predict. Maps are produced on `target` (the
// training stack when absent).
BootstrapMaps semiparametric_bootstrap(const FittedModel& model, const CovariateStack& stack,
                                       const BootstrapOptions& options, std::uint64_t seed,
                                       const CovariateStack* target = nullptr);

// Value at 1-based order statistic ceil(alpha * n) of a sample.
double upper_order_statistic(std::vector<double> values, double alpha);

}  // namespace slidepp
