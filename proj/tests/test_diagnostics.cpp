#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "slidepp/diagnostics.hpp"
#include "slidepp/error.hpp"
#include "slidepp/simboot.hpp"
#include "support.hpp"

using namespace slidepp;

namespace {

PointPattern random_points(const Window& w, std::size_t n, std::mt19937_64& gen) {
  const auto& g = w.geometry();
  std::uniform_real_distribution<double> ux(g.origin_x(), g.origin_x() + g.width());
  std::uniform_real_distribution<double> uy(g.origin_y(), g.origin_y() + g.height());
  std::vector<Point> pts;
  while (pts.size() < n) {
    const Point p{ux(gen), uy(gen)};
    if (w.contains(p)) pts.push_back(p);
  }
  return PointPattern(w, std::move(pts));
}

struct Fitted {
  GridGeometry g;
  CovariateStack stack;
  PointPattern pattern;
  FittedModel model;
};

// Pattern drawn from exp(b0 + b1 x) with x a west-east gradient, and the
// matching log-linear fit.
Fitted fitted_loglinear(std::uint64_t seed, std::size_t side = 40) {
  Fitted f{GridGeometry(0, 0, side, side, 10.0), CovariateStack(), PointPattern(), FittedModel()};
  f.stack = CovariateStack(f.g);
  RasterGrid x(f.g), y(f.g);
  for (std::size_t i = 0; i < f.g.cell_count(); ++i) {
    x[i] = static_cast<double>(f.g.cell(i).col) / static_cast<double>(side);
    y[i] = static_cast<double>(f.g.cell(i).row) / static_cast<double>(side);
  }
  f.stack.add("x", x);
  f.stack.add("y", y);
  IntensityMap truth(f.g);
  for (std::size_t i = 0; i < f.g.cell_count(); ++i) truth[i] = 1e-3 * std::exp(1.2 * x[i]);
  SeededRng rng(seed);
  f.pattern = sample_pattern(truth, rng);
  f.model = fit_model(parse_model_spec("ll", "x:linear"), f.pattern, f.stack, make_quadrature(f.pattern, f.stack, 10.0));
  return f;
}

}  // namespace

TEST_CASE("the worked raw-error example") {
  const GridGeometry g(0, 0, 50, 50, 5.0);
  const IntensityMap m(g, 1e-4);
  const PointPattern p(Window(g), {{10, 10}, {100, 200}, {249, 1}, {0, 249.9}});
  const ErrorGrid e = raw_errors(m, p, 250.0);
  REQUIRE(e.error.size() == 1);
  CHECK(e.expected[0] == 6.25);
  CHECK(e.observed[0] == 4);
  CHECK(e.error[0] == 2.25);
  CHECK(e.area[0] == 62500.0);
}

TEST_CASE("raw errors match a per-subarea enumeration") {
  std::mt19937_64 gen(2);
  for (int rep = 0; rep < 10; ++rep) {
    const GridGeometry g(500.0, 1000.0, 37 + rep, 53 - rep, 5.0);
    IntensityMap m = testing::random_grid(g, gen, 0.0, 2e-3);
    std::bernoulli_distribution hole(0.1);
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
      if (hole(gen)) m[i] = kNoData;
    }
    const Window w = m.window();
    const PointPattern p = random_points(w, 80, gen);
    const double sub = 50.0 + 10.0 * rep;
    const ErrorGrid e = raw_errors(m, p, sub);

    const auto nx = static_cast<std::size_t>(std::ceil(g.width() / sub - 1e-9));
    const auto ny = static_cast<std::size_t>(std::ceil(g.height() / sub - 1e-9));
    REQUIRE(e.error.size() == nx * ny);
    std::vector<long double> expected(nx * ny, 0.0L);
    std::vector<std::size_t> observed(nx * ny, 0);
    std::vector<double> area(nx * ny, 0.0);
    // Coarse row 0 is the northern row.
    auto coarse_of = [&](double cx, double cy) {
      const auto tx = static_cast<std::size_t>(std::floor((cx - g.origin_x()) / sub));
      const auto ty = static_cast<std::size_t>(std::floor((cy - g.origin_y()) / sub));
      return (ny - 1 - ty) * nx + tx;
    };
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
      if (!m.valid(i)) continue;
      const Point c = g.cell_center(g.cell(i).row, g.cell(i).col);
      const auto k = coarse_of(c.x, c.y);
      expected[k] += static_cast<long double>(m[i]) * 25.0L;
      area[k] += 25.0;
    }
    for (const Point& pt : p.points()) {
      const auto cell = g.locate(pt);
      const Point c = g.cell_center(cell->row, cell->col);
      ++observed[coarse_of(c.x, c.y)];
    }
    for (std::size_t k = 0; k < nx * ny; ++k) {
      CHECK(e.area[k] == area[k]);
      CHECK(e.observed[k] == observed[k]);
      CHECK(std::abs(e.expected[k] - static_cast<double>(expected[k])) <= 1e-12 * std::max(1.0, static_cast<double>(expected[k])));
      CHECK(e.error[k] == e.expected[k] - static_cast<double>(e.observed[k]));
    }
    // Additivity: the errors sum to the total residual.
    long double total = 0.0L;
    for (double v : e.error) total += v;
    const double integral = expected_count(m, w);
    CHECK(std::abs(static_cast<double>(total) - (integral - 80.0)) <= 1e-9 * std::max(1.0, integral));
    CHECK(e.total_observed == 80);
    CHECK(std::abs(e.total_expected - integral) <= 1e-9 * integral);
  }
}

TEST_CASE("empty pattern and enumeration order") {
  const GridGeometry g(0, 0, 20, 20, 5.0);
  std::mt19937_64 gen(3);
  const IntensityMap m = testing::random_grid(g, gen, 0.0, 1e-3);
  const ErrorGrid e = raw_errors(m, PointPattern(Window(g), {}), 25.0);
  for (std::size_t k = 0; k < e.error.size(); ++k) CHECK(e.error[k] == e.expected[k]);

  // Point order does not matter.
  PointPattern p = random_points(Window(g), 30, gen);
  std::vector<Point> rev(p.points().rbegin(), p.points().rend());
  const ErrorGrid a = raw_errors(m, p, 25.0);
  const ErrorGrid b = raw_errors(m, PointPattern(Window(g), rev), 25.0);
  CHECK(a.error == b.error);
  CHECK_THROWS_AS(raw_errors(m, p, 4.0), ConfigError);
}

TEST_CASE("residual summary") {
  SUBCASE("constant errors") {
    ErrorGrid e;
    e.error = {-1.5, -1.5, -1.5};
    e.area = {1.0, 1.0, 1.0};
    const auto rows = residual_summary(e);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].label == "Raw residuals");
    CHECK(rows[1].label == "Absolute raw residuals");
    for (double v : {rows[0].min, rows[0].q1, rows[0].median, rows[0].mean, rows[0].q3, rows[0].max}) CHECK(v == -1.5);
    for (double v : {rows[1].min, rows[1].q1, rows[1].median, rows[1].mean, rows[1].q3, rows[1].max}) CHECK(v == 1.5);
  }
  SUBCASE("random vectors against a sort oracle") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 50; ++rep) {
      ErrorGrid e;
      const std::size_t n = 1 + static_cast<std::size_t>(rep) * 7;
      for (std::size_t i = 0; i < n; ++i) {
        e.error.push_back(nd(gen));
        e.area.push_back(1.0);
      }
      // Subareas without cells are ignored.
      e.error.push_back(1e6);
      e.area.push_back(0.0);
      const auto rows = residual_summary(e);
      oracle::Vec v(e.error.begin(), e.error.end() - 1), a;
      for (double x : v) a.push_back(std::abs(x));
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
      CHECK(std::abs(rows[0].min - *std::min_element(v.begin(), v.end())) <= 1e-12);
      CHECK(std::abs(rows[0].q1 - oracle::quantile(v, 0.25)) <= 1e-12);
      CHECK(std::abs(rows[0].median - oracle::quantile(v, 0.5)) <= 1e-12);
      CHECK(std::abs(rows[0].mean - mean) <= 1e-12);
      CHECK(std::abs(rows[0].q3 - oracle::quantile(v, 0.75)) <= 1e-12);
      CHECK(std::abs(rows[0].max - *std::max_element(v.begin(), v.end())) <= 1e-12);
      CHECK(std::abs(rows[1].median - oracle::quantile(a, 0.5)) <= 1e-12);
      CHECK(std::abs(rows[1].q3 - oracle::quantile(a, 0.75)) <= 1e-12);
    }
  }
  SUBCASE("table layout") {
    const std::vector<SummaryRow> rows = {{"Raw residuals", -1.264, -0.5374, -0.2197, 0.1432, 0.5246, 5.637},
                                          {"Absolute raw residuals", 0.0011, 0.2, 0.3, 0.4, 0.5, 5.637}};
    const std::string text = format_summary(rows);
    CHECK(text ==
          "                               Min.    1st Qu.     Median       Mean    3rd Qu.       Max.\n"
          "Raw residuals               -1.2640    -0.5374    -0.2197     0.1432     0.5246     5.6370\n"
          "Absolute raw residuals       0.0011     0.2000     0.3000     0.4000     0.5000     5.6370\n");
    CHECK_THROWS_AS(residual_summary(ErrorGrid{}), DataError);
  }
}

TEST_CASE("in-sample total residual vanishes for a fit with an intercept") {
  const Fitted f = fitted_loglinear(5);
  const IntensityMap m = predict_intensity(f.model, f.stack);
  const ErrorGrid e = raw_errors(m, f.pattern, 100.0);
  // One dummy per cell makes the quadrature integral pixel-exact.
  CHECK(std::abs(e.total_expected - static_cast<double>(e.total_observed)) <= 1e-6);
  const auto rows = residual_summary(e);
  CHECK(std::abs(rows[0].mean) <= 1e-6);
}

TEST_CASE("lurking curve") {
  const Fitted f = fitted_loglinear(6);
  SimulationOptions o;
  o.threads = 4;
  const LurkingCurve c = lurking_curve(f.model, f.pattern, f.stack, "y", 1, o);
  REQUIRE(c.z.size() == 200);
  CHECK(c.z.front() == 0.0);
  CHECK(c.z.back() == 39.0 / 40.0);
  CHECK(std::is_sorted(c.z.begin(), c.z.end()));
  const double integral = expected_count(predict_intensity(f.model, f.stack), f.stack.window());
  CHECK(c.observed.back() == doctest::Approx(static_cast<double>(f.pattern.size()) - integral).epsilon(1e-9));
  CHECK(std::abs(c.total_residual) <= 1e-6);
  for (std::size_t t = 0; t < c.z.size(); ++t) CHECK(c.lo[t] <= c.hi[t]);

  SUBCASE("direct evaluation at every threshold") {
    const IntensityMap m = predict_intensity(f.model, f.stack);
    const auto& y = f.stack.get("y");
    for (std::size_t t = 0; t < c.z.size(); t += 17) {
      long double expect = 0.0L;
      for (std::size_t i = 0; i < f.g.cell_count(); ++i) {
        if (y[i] <= c.z[t]) expect += static_cast<long double>(m[i]) * 100.0L;
      }
      std::size_t n = 0;
      for (const Point& p : f.pattern.points()) {
        const auto cell = f.g.locate(p);
        n += y[f.g.index(cell->row, cell->col)] <= c.z[t];
      }
      CHECK(std::abs(c.observed[t] - (static_cast<double>(n) - static_cast<double>(expect))) <= 1e-9 * static_cast<double>(n + 1));
    }
  }
  SUBCASE("constant covariate is a single step") {
    CovariateStack s = f.stack;
    s.add("k", RasterGrid(f.g, 3.0));
    const LurkingCurve k = lurking_curve(f.model, f.pattern, s, "k", 1, o);
    REQUIRE(k.z.size() == 1);
    CHECK(k.z[0] == 3.0);
  }
  SUBCASE("reproducible") {
    const LurkingCurve again = lurking_curve(f.model, f.pattern, f.stack, "y", 1, SimulationOptions{39, 1, 200, false});
    CHECK(again.lo == c.lo);
    CHECK(again.hi == c.hi);
  }
  SUBCASE("errors") {
    o.nsim = 1;
    CHECK_THROWS_AS(lurking_curve(f.model, f.pattern, f.stack, "y", 1, o), ConfigError);
    o.nsim = 39;
    CHECK_THROWS_AS(lurking_curve(f.model, f.pattern, f.stack, "nope", 1, o), ConfigError);
  }
}

TEST_CASE("well-specified models stay inside the lurking envelope") {
  double inside = 0.0, total = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const Fitted f = fitted_loglinear(100 + trial, 30);
    SimulationOptions o;
    o.threads = 4;
    const LurkingCurve c = lurking_curve(f.model, f.pattern, f.stack, "x", trial, o);
    for (std::size_t t = 0; t < c.z.size(); ++t) {
      inside += c.observed[t] >= c.lo[t] && c.observed[t] <= c.hi[t];
      total += 1.0;
    }
  }
  CHECK(inside / total >= 0.9);
}

TEST_CASE("QQ data") {
  const Fitted f = fitted_loglinear(7);
  SimulationOptions o;
  o.threads = 4;
  const QQData q = qq_data(f.model, f.pattern, f.stack, 100.0, 3, o);
  REQUIRE(q.observed.size() == 16);
  CHECK(q.simulated.size() == 16);
  CHECK(std::is_sorted(q.observed.begin(), q.observed.end()));
  CHECK(std::is_sorted(q.simulated.begin(), q.simulated.end()));
  for (std::size_t i = 0; i < 16; ++i) CHECK(q.lo[i] <= q.hi[i]);

  SUBCASE("self-simulated data lie near the diagonal") {
    // Replace the observed pattern by a draw from the fitted model itself.
    SeededRng rng(77);
    const PointPattern self = sample_pattern(predict_intensity(f.model, f.stack), rng);
    const QQData s = qq_data(f.model, self, f.stack, 100.0, 4, o);
    double dev = 0.0, half = 0.0;
    for (std::size_t i = 0; i < s.observed.size(); ++i) {
      dev += std::abs(s.observed[i] - s.simulated[i]);
      half += 0.5 * (s.hi[i] - s.lo[i]);
    }
    CHECK(dev < half);
  }
  SUBCASE("one subarea gives one pair") {
    const QQData one = qq_data(f.model, f.pattern, f.stack, 1000.0, 3, o);
    CHECK(one.observed.size() == 1);
    CHECK(one.simulated.size() == 1);
  }
  SUBCASE("pearson residuals") {
    o.pearson = true;
    const QQData p = qq_data(f.model, f.pattern, f.stack, 100.0, 3, o);
    CHECK(p.observed.size() == 16);
    CHECK(p.observed != q.observed);
  }
}

TEST_CASE("CSV and SVG outputs") {
  const GridGeometry g(0, 0, 10, 10, 5.0);
  const IntensityMap m(g, 1e-3);
  const PointPattern p(Window(g), {{1, 1}, {30, 30}});
  const ErrorGrid e = raw_errors(m, p, 25.0);
  testing::TempDir dir;
  write_error_grid_csv(e, dir / "errors.csv");
  const std::string csv = testing::read_file(dir / "errors.csv");
  CHECK(csv.rfind("row,col,x_min,y_min,area,expected,observed,error\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  write_summary_csv(residual_summary(e), dir / "summary.csv");
  CHECK(testing::read_file(dir / "summary.csv").rfind("statistic,min,q1,median,mean,q3,max\n", 0) == 0);

  const std::string svg = raster_svg(m, "intensity");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("intensity") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  const RasterGrid sd(g, 2e-4), pct(g, 3e-3);
  const std::string panels = panels_svg({{&m, "intensity"}, {&sd, "bootstrap sd"}, {&pct, "99th percentile"}});
  const auto left = panels.find("intensity");
  const auto centre = panels.find("bootstrap sd");
  const auto right = panels.find("99th percentile");
  CHECK(left < centre);
  CHECK(centre < right);
  CHECK(right != std::string::npos);
}
