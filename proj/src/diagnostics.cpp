#include "slidepp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "slidepp/error.hpp"
#include "slidepp/numeric.hpp"
#include "slidepp/parallel.hpp"
#include "slidepp/simboot.hpp"

namespace slidepp {

std::vector<double> ErrorGrid::errors() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < error.size(); ++i) {
    if (has_cells(i)) out.push_back(error[i]);
  }
  return out;
}

RasterGrid ErrorGrid::error_raster() const {
  RasterGrid g(coarse);
  for (std::size_t i = 0; i < error.size(); ++i) {
    if (has_cells(i)) g[i] = error[i];
  }
  return g;
}

namespace {

std::size_t tiles_along(double length, double size) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(length / size - 1e-9)));
}

}  // namespace

ErrorGrid raw_errors(const IntensityMap& map, const PointPattern& pattern, double subarea) {
  const auto& g = map.geometry();
  if (!(subarea >= g.cell_size()) || !std::isfinite(subarea)) {
    throw ConfigError("subarea size must be at least the cell size");
  }
  if (!(pattern.window().geometry() == g)) throw DataError("pattern grid does not match the intensity grid");
  const std::size_t nc = tiles_along(g.width(), subarea);
  const std::size_t nr = tiles_along(g.height(), subarea);
  ErrorGrid out;
  out.coarse = GridGeometry(g.origin_x(), g.origin_y(), nr, nc, subarea);
  out.subarea = subarea;
  const std::size_t n = nr * nc;
  out.area.assign(n, 0.0);
  out.observed.assign(n, 0);
  std::vector<CompensatedSum> expected(n);
  CompensatedSum total;

  auto tile_of = [&](std::size_t row, std::size_t col) {
    const Point c = g.cell_center(row, col);
    const auto tx = std::min(nc - 1, static_cast<std::size_t>(std::floor((c.x - g.origin_x()) / subarea)));
    const auto ty = std::min(nr - 1, static_cast<std::size_t>(std::floor((c.y - g.origin_y()) / subarea)));
    return (nr - 1 - ty) * nc + tx;
  };

  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (!map.valid(i)) continue;
    const CellIndex c = g.cell(i);
    const std::size_t t = tile_of(c.row, c.col);
    const double e = map[i] * g.cell_area();
    expected[t] += e;
    total += e;
    out.area[t] += g.cell_area();
  }
  for (const auto& p : pattern.points()) {
    auto cell = g.locate(p);
    if (!cell || !map.valid(g.index(cell->row, cell->col))) {
      ++out.points_outside;
      continue;
    }
    ++out.observed[tile_of(cell->row, cell->col)];
    ++out.total_observed;
  }
  out.expected.resize(n);
  out.error.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    out.expected[t] = expected[t].value();
    out.error[t] = out.expected[t] - static_cast<double>(out.observed[t]);
  }
  out.total_expected = total.value();
  return out;
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

SummaryRow summarize(const std::string& label, std::vector<double> v) {
  SummaryRow r;
  r.label = label;
  std::sort(v.begin(), v.end());
  r.min = v.front();
  r.max = v.back();
  r.q1 = quantile_type7(v, 0.25);
  r.median = quantile_type7(v, 0.5);
  r.q3 = quantile_type7(v, 0.75);
  CompensatedSum s;
  for (double x : v) s += x;
  r.mean = s.value() / static_cast<double>(v.size());
  return r;
}

}  // namespace

std::vector<SummaryRow> residual_summary(const ErrorGrid& grid) {
  std::vector<double> e = grid.errors();
  if (e.empty()) throw DataError("error grid has no subareas with valid cells");
  std::vector<double> a(e.size());
  std::transform(e.begin(), e.end(), a.begin(), [](double x) { return std::abs(x); });
  return {summarize("Raw residuals", e), summarize("Absolute raw residuals", a)};
}

std::string format_summary(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %10s %10s %10s %10s %10s %10s\n", "", "Min.", "1st Qu.", "Median", "Mean",
                "3rd Qu.", "Max.");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-24s %10.4f %10.4f %10.4f %10.4f %10.4f %10.4f\n", r.label.c_str(), r.min, r.q1,
                  r.median, r.mean, r.q3, r.max);
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------- lurking

namespace {

struct SortedCells {
  std::vector<std::size_t> order;  // cell indices sorted by covariate value
  std::vector<double> z;           // covariate value in that order
  std::vector<double> cum_expected;
};

std::vector<double> curve_from_counts(const SortedCells& cells, const std::vector<std::uint64_t>& counts,
                                      const std::vector<double>& thresholds) {
  std::vector<double> out(thresholds.size());
  std::size_t k = 0;
  std::uint64_t observed = 0;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    while (k < cells.order.size() && cells.z[k] <= thresholds[t]) {
      observed += counts[cells.order[k]];
      ++k;
    }
    const double expected = k ? cells.cum_expected[k - 1] : 0.0;
    out[t] = static_cast<double>(observed) - expected;
  }
  return out;
}

}  // namespace

LurkingCurve lurking_curve(const FittedModel& model, const PointPattern& pattern, const CovariateStack& stack,
                           const std::string& covariate, std::uint64_t seed, const SimulationOptions& options) {
  if (options.nsim < 2) throw ConfigError("lurking envelope needs at least two simulations");
  if (options.thresholds < 2) throw ConfigError("lurking curve needs at least two thresholds");
  const auto& zgrid = stack.get(covariate);
  IntensityMap lambda = predict_intensity(model, stack, options.threads);
  const auto& g = lambda.geometry();
  if (!(pattern.window().geometry() == g)) throw DataError("pattern grid does not match the covariate grid");

  SortedCells cells;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (lambda.valid(i) && zgrid.valid(i)) {
      cells.order.push_back(i);
    } else {
      lambda[i] = kNoData;
    }
  }
  if (cells.order.empty()) throw DataError("no cells carry both the intensity and covariate '" + covariate + "'");
  std::stable_sort(cells.order.begin(), cells.order.end(),
                   [&](std::size_t a, std::size_t b) { return zgrid[a] < zgrid[b]; });
  CompensatedSum cum;
  for (std::size_t i : cells.order) {
    cells.z.push_back(zgrid[i]);
    cum += lambda[i] * g.cell_area();
    cells.cum_expected.push_back(cum.value());
  }

  LurkingCurve curve;
  curve.covariate = covariate;
  const double zmin = cells.z.front();
  const double zmax = cells.z.back();
  if (zmin == zmax) {
    curve.z = {zmin};
  } else {
    const auto T = static_cast<std::size_t>(options.thresholds);
    for (std::size_t t = 0; t < T; ++t) {
      curve.z.push_back(t + 1 == T ? zmax : zmin + (zmax - zmin) * static_cast<double>(t) / static_cast<double>(T - 1));
    }
  }

  std::vector<std::uint64_t> counts(g.cell_count(), 0);
  for (const auto& p : pattern.points()) {
    auto cell = g.locate(p);
    if (cell && lambda.valid(g.index(cell->row, cell->col))) ++counts[g.index(cell->row, cell->col)];
  }
  curve.observed = curve_from_counts(cells, counts, curve.z);
  curve.total_residual = curve.observed.back();

  const auto nsim = static_cast<std::size_t>(options.nsim);
  std::vector<std::vector<double>> sims(nsim);
  const SeededRng root(seed);
  parallel_for(nsim, options.threads, [&](std::size_t s) {
    SeededRng rng = root.derive(s);
    sims[s] = curve_from_counts(cells, sample_counts(lambda, rng), curve.z);
  });
  curve.lo = sims[0];
  curve.hi = sims[0];
  for (std::size_t s = 1; s < nsim; ++s) {
    for (std::size_t t = 0; t < curve.z.size(); ++t) {
      curve.lo[t] = std::min(curve.lo[t], sims[s][t]);
      curve.hi[t] = std::max(curve.hi[t], sims[s][t]);
    }
  }
  return curve;
}

// ---------------------------------------------------------------- QQ

namespace {

std::vector<double> sorted_residuals(const ErrorGrid& grid, bool pearson) {
  std::vector<double> out;
  for (std::size_t i = 0; i < grid.error.size(); ++i) {
    if (!grid.has_cells(i)) continue;
    double e = grid.error[i];
    if (pearson) e = grid.expected[i] > 0.0 ? e / std::sqrt(grid.expected[i]) : 0.0;
    out.push_back(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

QQData qq_data(const FittedModel& model, const PointPattern& pattern, const CovariateStack& stack, double subarea,
               std::uint64_t seed, const SimulationOptions& options) {
  if (options.nsim < 2) throw ConfigError("QQ envelope needs at least two simulations");
  const IntensityMap lambda = predict_intensity(model, stack, options.threads);
  for (std::size_t i = 0; i < lambda.geometry().cell_count(); ++i) {
    if (lambda.valid(i) && !(lambda[i] > 0.0)) throw NumericalError("QQ data needs a strictly positive intensity");
  }
  QQData qq;
  qq.observed = sorted_residuals(raw_errors(lambda, pattern, subarea), options.pearson);
  const auto nsim = static_cast<std::size_t>(options.nsim);
  std::vector<std::vector<double>> sims(nsim);
  const SeededRng root(seed);
  parallel_for(nsim, options.threads, [&](std::size_t s) {
    SeededRng rng = root.derive(s);
    const PointPattern sim = sample_pattern(lambda, rng);
    const PointPattern on_grid(pattern.window(), {sim.points().begin(), sim.points().end()});
    sims[s] = sorted_residuals(raw_errors(lambda, on_grid, subarea), options.pearson);
  });
  const std::size_t m = qq.observed.size();
  qq.simulated.assign(m, 0.0);
  qq.lo.assign(m, 0.0);
  qq.hi.assign(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    CompensatedSum s;
    qq.lo[k] = sims[0][k];
    qq.hi[k] = sims[0][k];
    for (std::size_t r = 0; r < nsim; ++r) {
      s += sims[r][k];
      qq.lo[k] = std::min(qq.lo[k], sims[r][k]);
      qq.hi[k] = std::max(qq.hi[k], sims[r][k]);
    }
    qq.simulated[k] = s.value() / static_cast<double>(nsim);
  }
  return qq;
}

// ---------------------------------------------------------------- output

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  return out;
}

}  // namespace

void write_error_grid_csv(const ErrorGrid& grid, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "row,col,x_min,y_min,area,expected,observed,error\n";
  const auto& c = grid.coarse;
  for (std::size_t i = 0; i < grid.error.size(); ++i) {
    if (!grid.has_cells(i)) continue;
    const CellIndex ci = c.cell(i);
    out << ci.row << ',' << ci.col << ',' << c.cell_min_x(ci.col) << ',' << c.cell_min_y(ci.row) << ','
        << grid.area[i] << ',' << grid.expected[i] << ',' << grid.observed[i] << ',' << grid.error[i] << '\n';
  }
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "statistic,min,q1,median,mean,q3,max\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.min << ',' << r.q1 << ',' << r.median << ',' << r.mean << ',' << r.q3 << ','
        << r.max << '\n';
  }
}

void write_lurking_csv(const LurkingCurve& curve, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "z,residual,lo,hi\n";
  for (std::size_t t = 0; t < curve.z.size(); ++t) {
    out << curve.z[t] << ',' << curve.observed[t] << ',' << curve.lo[t] << ',' << curve.hi[t] << '\n';
  }
}

void write_qq_csv(const QQData& qq, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "simulated,observed,lo,hi\n";
  for (std::size_t k = 0; k < qq.observed.size(); ++k) {
    out << qq.simulated[k] << ',' << qq.observed[k] << ',' << qq.lo[k] << ',' << qq.hi[k] << '\n';
  }
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------- SVG

namespace {

constexpr double kW = 480, kH = 320, kPad = 40;

struct Scale {
  double lo, hi;
  double operator()(double v, double a, double b) const {
    return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : 0.5 * (a + b);
  }
};

Scale span_of(std::initializer_list<const std::vector<double>*> series) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto* s : series) {
    for (double v : *s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  return {lo, hi};
}

std::string polyline(const std::vector<double>& x, const std::vector<double>& y, const Scale& sx, const Scale& sy,
                     const char* style) {
  std::ostringstream os;
  os << "<polyline fill=\"none\" " << style << " points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) {
    os << sx(x[i], kPad, kW - kPad) << ',' << sy(y[i], kH - kPad, kPad) << ' ';
  }
  os << "\"/>\n";
  return os.str();
}

std::string frame(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
     << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad << "\" height=\""
     << kH - 2 * kPad << "\" fill=\"white\" stroke=\"black\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel
     << "</text>\n"
     << "<text x=\"12\" y=\"" << kH / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << kH / 2 << ")\">"
     << ylabel << "</text>\n";
  return os.str();
}

std::string color(double t, bool diverging) {
  t = std::clamp(t, 0.0, 1.0);
  int r, g, b;
  if (diverging) {
    if (t < 0.5) {
      const double s = t / 0.5;
      r = static_cast<int>(40 + s * 215);
      g = static_cast<int>(90 + s * 165);
      b = 255;
    } else {
      const double s = (t - 0.5) / 0.5;
      r = 255;
      g = static_cast<int>(255 - s * 200);
      b = static_cast<int>(255 - s * 215);
    }
  } else {
    r = static_cast<int>(68 + t * (253 - 68));
    g = static_cast<int>(1 + t * (231 - 1));
    b = static_cast<int>(84 + t * (37 - 84));
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string raster_group(const RasterGrid& grid, const std::string& title, bool diverging, double x0) {
  const auto& g = grid.geometry();
  const std::size_t stride = std::max<std::size_t>(1, std::max(g.n_rows(), g.n_cols()) / 200 + 1);
  const double size = 300.0;
  const double cell = size / static_cast<double>(std::max(g.n_rows(), g.n_cols()));
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (!grid.valid(i)) continue;
    lo = std::min(lo, grid[i]);
    hi = std::max(hi, grid[i]);
  }
  if (diverging && std::isfinite(lo)) {
    const double m = std::max(std::abs(lo), std::abs(hi));
    lo = -m;
    hi = m;
  }
  std::ostringstream os;
  os << "<g transform=\"translate(" << x0 << ",30)\">\n"
     << "<text x=\"" << size / 2 << "\" y=\"-10\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  for (std::size_t r = 0; r < g.n_rows(); r += stride) {
    for (std::size_t c = 0; c < g.n_cols(); c += stride) {
      const double v = grid.at(r, c);
      if (is_nodata(v)) continue;
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
      os << "<rect x=\"" << static_cast<double>(c) * cell << "\" y=\"" << static_cast<double>(r) * cell
         << "\" width=\"" << cell * static_cast<double>(stride) << "\" height=\"" << cell * static_cast<double>(stride)
         << "\" fill=\"" << color(t, diverging) << "\"/>\n";
    }
  }
  os << "<text x=\"0\" y=\"" << size + 16 << "\" font-size=\"11\">min " << lo << "  max " << hi << "</text>\n";
  os << "</g>\n";
  return os.str();
}

}  // namespace

std::string lurking_svg(const LurkingCurve& curve) {
  const Scale sx = span_of({&curve.z});
  const Scale sy = span_of({&curve.observed, &curve.lo, &curve.hi});
  std::string s = frame("Lurking variable plot: " + curve.covariate, curve.covariate, "cumulative raw residual");
  s += polyline(curve.z, curve.lo, sx, sy, "stroke=\"grey\" stroke-dasharray=\"4 3\"");
  s += polyline(curve.z, curve.hi, sx, sy, "stroke=\"grey\" stroke-dasharray=\"4 3\"");
  s += polyline(curve.z, curve.observed, sx, sy, "stroke=\"black\" stroke-width=\"1.5\"");
  return s + "</svg>\n";
}

std::string qq_svg(const QQData& qq) {
  const Scale sx = span_of({&qq.simulated});
  const Scale sy = span_of({&qq.observed, &qq.lo, &qq.hi});
  std::string s = frame("QQ plot of subarea residuals", "mean simulated quantile", "observed quantile");
  s += polyline(qq.simulated, qq.lo, sx, sy, "stroke=\"grey\" stroke-dasharray=\"4 3\"");
  s += polyline(qq.simulated, qq.hi, sx, sy, "stroke=\"grey\" stroke-dasharray=\"4 3\"");
  s += polyline(qq.simulated, qq.simulated, sx, sy, "stroke=\"red\"");
  s += polyline(qq.simulated, qq.observed, sx, sy, "stroke=\"black\" stroke-width=\"1.5\"");
  return s + "</svg>\n";
}

std::string raster_svg(const RasterGrid& grid, const std::string& title, bool diverging) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"340\" height=\"370\">\n"
     << raster_group(grid, title, diverging, 20) << "</svg>\n";
  return os.str();
}

std::string panels_svg(const std::vector<std::pair<const RasterGrid*, std::string>>& panels) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 20 + 330 * panels.size()
     << "\" height=\"370\">\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    os << raster_group(*panels[i].first, panels[i].second, false, 20 + 330 * static_cast<double>(i));
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace slidepp
