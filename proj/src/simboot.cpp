#include "slidepp/simboot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slidepp/error.hpp"
#include "slidepp/log.hpp"
#include "slidepp/numeric.hpp"
#include "slidepp/parallel.hpp"

namespace slidepp {

namespace {

double cell_mean(const IntensityMap& map, std::size_t i) {
  const double lambda = map[i];
  if (lambda < 0.0 || std::isinf(lambda)) throw NumericalError("intensity must be finite and non-negative");
  const double mean = lambda * map.geometry().cell_area();
  if (mean > kMaxCellExpectation) {
    throw NumericalError("expected count " + std::to_string(mean) + " in one cell exceeds the simulation limit");
  }
  return mean;
}

// Keeps a uniform offset strictly inside its half-open cell [lo, hi).
double place(double lo, double hi, double u) {
  const double v = lo + u * (hi - lo);
  return v < hi ? v : std::nextafter(hi, lo);
}

}  // namespace

std::vector<std::uint64_t> sample_counts(const IntensityMap& map, SeededRng& rng) {
  std::vector<std::uint64_t> counts(map.geometry().cell_count(), 0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (map.valid(i)) counts[i] = rng.poisson(cell_mean(map, i));
  }
  return counts;
}

PointPattern sample_pattern(const IntensityMap& map, SeededRng& rng) {
  const auto& g = map.geometry();
  std::vector<Point> points;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (!map.valid(i)) continue;
    const std::uint64_t n = rng.poisson(cell_mean(map, i));
    const CellIndex c = g.cell(i);
    const double x0 = g.cell_min_x(c.col);
    const double x1 = g.origin_x() + static_cast<double>(c.col + 1) * g.cell_size();
    const double y0 = g.cell_min_y(c.row);
    const double y1 = g.origin_y() + static_cast<double>(g.n_rows() - c.row) * g.cell_size();
    for (std::uint64_t k = 0; k < n; ++k) {
      const double x = place(x0, x1, rng.uniform());
      const double y = place(y0, y1, rng.uniform());
      points.push_back({x, y});
    }
  }
  return PointPattern(map.window(), std::move(points));
}

double expected_count(const IntensityMap& map, const Window& region) {
  const auto& g = map.geometry();
  if (!(region.geometry() == g)) throw DataError("region grid does not match the intensity grid");
  CompensatedSum s;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (region.valid(i) && map.valid(i)) s += map[i] * g.cell_area();
  }
  return s.value();
}

double upper_order_statistic(std::vector<double> values, double alpha) {
  if (values.empty()) return kNoData;
  const auto n = values.size();
  auto k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1), values.end());
  return values[k - 1];
}

BootstrapMaps semiparametric_bootstrap(const FittedModel& model, const CovariateStack& stack,
                                       const BootstrapOptions& options, std::uint64_t seed,
                                       const CovariateStack* target) {
  if (options.replicates < 2) throw ConfigError("bootstrap needs at least two replicates");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("bootstrap alpha must lie in (0, 1)");
  const CovariateStack& out_stack = target ? *target : stack;

  const QuadratureScheme base =
      make_quadrature(PointPattern(stack.window(), {}), stack, options.dummy_spacing);
  // Replicates are drawn only where every stack covariate is present, so the
  // sampled points are valid data nodes for the refit.
  IntensityMap fitted = predict_intensity(model, stack, options.threads);
  for (std::size_t i = 0; i < fitted.geometry().cell_count(); ++i) {
    if (!base.window().valid(i)) fitted[i] = kNoData;
  }

  BootstrapMaps out;
  out.replicates = options.replicates;
  out.alpha = options.alpha;
  out.estimate = predict_intensity(model, out_stack, options.threads);
  const auto& g = out.estimate.geometry();

  const auto B = static_cast<std::size_t>(options.replicates);
  std::vector<std::vector<double>> maps(B);
  std::vector<std::uint8_t> ok(B, 0);
  const SeededRng root(seed);
  parallel_for(B, options.threads, [&](std::size_t r) {
    SeededRng rng = root.derive(options.identical_streams ? 0 : r);
    try {
      const PointPattern replicate = sample_pattern(fitted, rng);
      const QuadratureScheme quad = base.with_pattern(PointPattern(stack.window(),
                                                                   {replicate.points().begin(),
                                                                    replicate.points().end()}));
      const FittedModel refit = refit_coefficients(model, quad, stack);
      if (!refit.diagnostics.converged) return;
      const IntensityMap m = predict_intensity(refit, out_stack, 1);
      maps[r].assign(m.values().begin(), m.values().end());
      ok[r] = 1;
    } catch (const NumericalError&) {
    } catch (const DataError&) {
    }
  });

  std::vector<std::size_t> good;
  for (std::size_t r = 0; r < B; ++r) {
    if (ok[r]) good.push_back(r);
  }
  out.effective = static_cast<int>(good.size());
  out.failures = options.replicates - out.effective;
  if (out.failures > 0) warn(std::to_string(out.failures) + " bootstrap refit(s) failed and were excluded");
  if (static_cast<double>(out.failures) > options.max_failure_fraction * static_cast<double>(B)) {
    throw NumericalError(std::to_string(out.failures) + " of " + std::to_string(B) +
                         " bootstrap refits failed; the model is too unstable for the bootstrap");
  }
  if (good.size() < 2) throw NumericalError("fewer than two successful bootstrap replicates");

  out.sd = RasterGrid(g);
  out.percentile = RasterGrid(g);
  std::vector<double> column(good.size());
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (!out.estimate.valid(i)) continue;
    CompensatedSum sum;
    for (std::size_t j = 0; j < good.size(); ++j) {
      column[j] = maps[good[j]][i];
      sum += column[j];
    }
    const double mean = sum.value() / static_cast<double>(good.size());
    CompensatedSum ss;
    for (double v : column) ss += (v - mean) * (v - mean);
    out.sd[i] = std::sqrt(ss.value() / static_cast<double>(good.size() - 1));
    out.percentile[i] = upper_order_statistic(column, options.alpha);
  }
  return out;
}

}  // namespace slidepp
