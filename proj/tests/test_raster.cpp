#include <doctest.h>

#include <cmath>
#include <random>

#include "slidepp/error.hpp"
#include "slidepp/log.hpp"
#include "slidepp/raster.hpp"
#include "support.hpp"

using namespace slidepp;

namespace {

const char* kSmallHeader =
    "NCOLS 2\n"
    "NROWS 3\n"
    "XLLCORNER 100\n"
    "YLLCORNER 200\n"
    "CELLSIZE 5\n"
    "NODATA_VALUE -9999\n";

}  // namespace

TEST_CASE("smallest legal grid file") {
  testing::TempDir dir;
  testing::write_file(dir / "a.asc",
                      "NCOLS 1\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 5\nNODATA_VALUE -9999\n3.0\n");
  const RasterGrid g = read_ascii_grid(dir / "a.asc");
  CHECK(g.geometry().n_rows() == 1);
  CHECK(g.geometry().n_cols() == 1);
  CHECK(g.geometry().cell_size() == 5.0);
  CHECK(g[0] == 3.0);
}

TEST_CASE("NODATA cells are masked") {
  testing::TempDir dir;
  testing::write_file(dir / "a.asc", std::string(kSmallHeader) + "1 2\n3 -9999\n5 6\n");
  const RasterGrid g = read_ascii_grid(dir / "a.asc");
  CHECK(g.valid_count() == 5);
  CHECK_FALSE(g.valid(g.geometry().index(1, 1)));
  CHECK(g.at(0, 0) == 1.0);
  CHECK(g.at(2, 1) == 6.0);
  const Window w = g.window();
  int count = 0;
  for (auto v : w.mask()) count += v;
  CHECK(count == 5);
}

TEST_CASE("header keys are case-insensitive and centre origins are converted") {
  testing::TempDir dir;
  testing::write_file(dir / "a.asc", "ncols 1\nnrows 1\nxllcenter 2.5\nyllcenter 2.5\ncellsize 5\nnodata_value -1\n4\n");
  const RasterGrid g = read_ascii_grid(dir / "a.asc");
  CHECK(g.geometry().origin_x() == 0.0);
  CHECK(g.geometry().origin_y() == 0.0);
}

TEST_CASE("malformed files report the line") {
  testing::TempDir dir;
  auto message = [&](const std::string& text) {
    testing::write_file(dir / "bad.asc", text);
    try {
      read_ascii_grid(dir / "bad.asc");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("NCOLS 2\nNROWS x\n").find(":2:") != std::string::npos);
  CHECK(message(std::string(kSmallHeader) + "1 2\n3\n5 6\n").find(":8:") != std::string::npos);
  CHECK(message(std::string(kSmallHeader) + "1 2\n3 abc\n5 6\n").find(":8:") != std::string::npos);
  CHECK(message(std::string(kSmallHeader) + "1 2\n3 4\n").find("bad.asc") != std::string::npos);
  CHECK(message("NCOLS 1\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 5\n1\n").find("NODATA_VALUE") !=
        std::string::npos);
}

TEST_CASE("write then read is the identity") {
  testing::TempDir dir;
  std::mt19937_64 gen(7);

  SUBCASE("random 10x10 grid with a few NODATA cells") {
    RasterGrid g = testing::random_grid(GridGeometry(500000.0, 5100000.0, 10, 10, 5.0), gen, -1e3, 1e3);
    g[3] = kNoData;
    g[57] = kNoData;
    write_ascii_grid(g, dir / "g.asc");
    const RasterGrid back = read_ascii_grid(dir / "g.asc");
    CHECK(back == g);
    CHECK(back.geometry() == g.geometry());
    for (std::size_t i = 0; i < g.geometry().cell_count(); ++i) {
      if (g.valid(i)) CHECK(back[i] == g[i]);
    }
  }
  SUBCASE("5 m cells") {
    const RasterGrid g = testing::random_grid(GridGeometry(1234.5, 678.25, 4, 6, 5.0), gen);
    write_ascii_grid(g, dir / "g.asc");
    const std::string first = testing::read_file(dir / "g.asc");
    const RasterGrid back = read_ascii_grid(dir / "g.asc");
    CHECK(back == g);
    write_ascii_grid(back, dir / "h.asc");
    CHECK(testing::read_file(dir / "h.asc") == first);
  }
  SUBCASE("tiny intensity value") {
    const RasterGrid g(GridGeometry(0, 0, 1, 1, 5.0), 7.45e-6);
    write_ascii_grid(g, dir / "g.asc");
    CHECK(read_ascii_grid(dir / "g.asc")[0] == 7.45e-6);
  }
  SUBCASE("all NODATA") {
    const RasterGrid g(GridGeometry(0, 0, 2, 3, 5.0));
    write_ascii_grid(g, dir / "g.asc");
    const std::string text = testing::read_file(dir / "g.asc");
    CHECK(text.find("-9999 -9999 -9999\n-9999 -9999 -9999") != std::string::npos);
    const RasterGrid back = read_ascii_grid(dir / "g.asc");
    CHECK(back.valid_count() == 0);
  }
}

TEST_CASE("write refuses an unwritable path") {
  const RasterGrid g(GridGeometry(0, 0, 1, 1, 5.0), 1.0);
  CHECK_THROWS_AS(write_ascii_grid(g, "/nonexistent_dir/x/y.asc"), DataError);
}

TEST_CASE("valid plus NODATA counts cover the grid") {
  std::mt19937_64 gen(3);
  std::bernoulli_distribution hole(0.3);
  for (int t = 0; t < 20; ++t) {
    RasterGrid g = testing::random_grid(GridGeometry(0, 0, 7, 9, 2.0), gen);
    std::size_t holes = 0;
    for (std::size_t i = 0; i < g.geometry().cell_count(); ++i) {
      if (hole(gen)) {
        g[i] = kNoData;
        ++holes;
      }
    }
    CHECK(g.valid_count() + holes == 63);
  }
}

TEST_CASE("point lookup uses half-open cells") {
  const GridGeometry geom(0, 0, 2, 2, 10.0);
  RasterGrid a(geom, std::vector<double>{1, 2, 3, 4});  // row 0 is north
  RasterGrid s(geom, std::vector<double>{10, kNoData, 30, 40});
  CovariateStack stack;
  stack.add("a", a);
  stack.add("slope", s);

  SUBCASE("cell centre") {
    const auto v = covariate_at(stack, {5.0, 5.0});  // south-west cell = row 1 col 0
    CHECK(v.values.at("a") == 3.0);
    CHECK(v.missing.empty());
  }
  SUBCASE("boundary goes to the cell starting there") {
    CHECK(covariate_at(stack, {10.0, 5.0}).values.at("a") == 4.0);
    CHECK(covariate_at(stack, {5.0, 10.0}).values.at("a") == 1.0);
    CHECK(covariate_at(stack, {0.0, 0.0}).values.at("a") == 3.0);
  }
  SUBCASE("NODATA covariate flagged") {
    const auto v = covariate_at(stack, {15.0, 15.0});
    CHECK(v.values.at("a") == 2.0);
    REQUIRE(v.missing.size() == 1);
    CHECK(v.missing[0] == "slope");
  }
  SUBCASE("outside the grid") {
    CHECK_THROWS_AS(covariate_at(stack, {20.0, 5.0}), DataError);
    CHECK_THROWS_AS(covariate_at(stack, {-0.1, 5.0}), DataError);
  }
}

TEST_CASE("lookup at every cell centre returns the stored value") {
  std::mt19937_64 gen(11);
  const GridGeometry geom(-123.0, 456.0, 13, 17, 5.0);
  CovariateStack stack;
  stack.add("z", testing::random_grid(geom, gen));
  const auto& z = stack.get("z");
  for (std::size_t r = 0; r < geom.n_rows(); ++r) {
    for (std::size_t c = 0; c < geom.n_cols(); ++c) {
      CHECK(covariate_at(stack, geom.cell_center(r, c)).values.at("z") == z.at(r, c));
    }
  }
}

TEST_CASE("stack members must share geometry") {
  CovariateStack stack;
  stack.add("a", RasterGrid(GridGeometry(0, 0, 2, 2, 5.0), 1.0));
  CHECK_THROWS(stack.add("b", RasterGrid(GridGeometry(0, 0, 2, 3, 5.0), 1.0)));
  CHECK_THROWS_AS(stack.get("nope"), ConfigError);
}

TEST_CASE("range masks") {
  std::mt19937_64 gen(5);
  const GridGeometry geom(0, 0, 2, 2, 1.0);

  SUBCASE("own ranges reproduce the validity mask") {
    CovariateStack stack;
    RasterGrid a = testing::random_grid(GridGeometry(0, 0, 6, 6, 1.0), gen);
    a[4] = kNoData;
    stack.add("a", a);
    stack.add("b", testing::random_grid(GridGeometry(0, 0, 6, 6, 1.0), gen));
    std::map<std::string, Range> ranges;
    for (const auto& n : stack.names()) ranges[n] = *stack.get(n).range();
    CHECK(range_mask(stack, ranges) == stack.window());
  }
  SUBCASE("constant covariate outside its range") {
    CovariateStack stack;
    stack.add("c", RasterGrid(geom, 5.0));
    CHECK(range_mask(stack, {{"c", {0.0, 4.0}}}).empty());
  }
  SUBCASE("exhaustive two-covariate check") {
    CovariateStack stack;
    stack.add("a", RasterGrid(geom, std::vector<double>{0.0, 1.0, 2.0, kNoData}));
    stack.add("b", RasterGrid(geom, std::vector<double>{5.0, -1.0, 3.0, 3.0}));
    const std::map<std::string, Range> ranges = {{"a", {0.5, 2.0}}, {"b", {-1.0, 4.0}}};
    const Window m = range_mask(stack, ranges);
    const auto& a = stack.get("a");
    const auto& b = stack.get("b");
    for (std::size_t i = 0; i < 4; ++i) {
      const bool expect = a.valid(i) && b.valid(i) && a[i] >= 0.5 && a[i] <= 2.0 && b[i] >= -1.0 && b[i] <= 4.0;
      CHECK(m.valid(i) == expect);
    }
  }
  SUBCASE("unknown covariate") {
    CovariateStack stack;
    stack.add("a", RasterGrid(geom, 1.0));
    CHECK_THROWS_AS(range_mask(stack, {{"zz", {0.0, 1.0}}}), ConfigError);
  }
}

TEST_CASE("shrinking a range never adds cells") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  const GridGeometry geom(0, 0, 8, 8, 1.0);
  CovariateStack stack;
  stack.add("a", testing::random_grid(geom, gen));
  stack.add("b", testing::random_grid(geom, gen));
  for (int t = 0; t < 50; ++t) {
    const Range ra{-1.0 + u(gen), 1.0 - u(gen)};
    const Range rb{-1.0 + u(gen), 1.0 - u(gen)};
    const Range ra2{ra.min + u(gen) * 0.5, ra.max - u(gen) * 0.5};
    const Window wide = range_mask(stack, {{"a", ra}, {"b", rb}});
    const Window narrow = range_mask(stack, {{"a", ra2}, {"b", rb}});
    CHECK(narrow.subset_of(wide));
  }
}

TEST_CASE("point patterns validate their points") {
  const GridGeometry geom(0, 0, 2, 2, 10.0);
  const Window w(geom, std::vector<std::uint8_t>{1, 1, 1, 0});
  CHECK_NOTHROW(PointPattern(w, {{1.0, 1.0}, {19.0, 19.0}}));
  CHECK_THROWS_AS(PointPattern(w, {{15.0, 5.0}}), DataError);
  CHECK_THROWS_AS(PointPattern(w, {{std::nan(""), 5.0}}), DataError);
  CHECK_THROWS_AS(PointPattern(w, {{25.0, 5.0}}), DataError);

  std::vector<std::string> warnings;
  auto old = set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
  std::vector<Point> rejected;
  const std::vector<Point> pts = {{1.0, 1.0}, {15.0, 5.0}, {5.0, 15.0}};
  const PointPattern p = PointPattern::filtered(w, pts, &rejected);
  set_warning_sink(old);
  CHECK(p.size() == 2);
  CHECK(rejected.size() == 1);
  CHECK(warnings.size() == 1);
}

TEST_CASE("point CSV round trip") {
  testing::TempDir dir;
  const std::vector<Point> pts = {{0.1, 0.2}, {123456.789, -98765.4321}, {1e-9, 3.0}};
  write_points_csv(pts, dir / "p.csv");
  CHECK(read_points_csv(dir / "p.csv") == pts);
  testing::write_file(dir / "bad.csv", "x,y\n1,2\n3;4\n");
  CHECK_THROWS_AS(read_points_csv(dir / "bad.csv"), DataError);
  testing::write_file(dir / "bad2.csv", "a,b\n1,2\n");
  CHECK_THROWS_AS(read_points_csv(dir / "bad2.csv"), DataError);
}

TEST_CASE("stack directories") {
  testing::TempDir dir;
  std::mt19937_64 gen(2);
  const GridGeometry geom(10, 20, 3, 4, 5.0);
  CovariateStack stack;
  stack.add("slope", testing::random_grid(geom, gen));
  stack.add("dtm", testing::random_grid(geom, gen));
  write_stack_dir(stack, dir / "s");
  const CovariateStack back = read_stack_dir(dir / "s");
  CHECK(back.names() == std::vector<std::string>{"dtm", "slope"});
  CHECK(back.get("slope") == stack.get("slope"));
}
