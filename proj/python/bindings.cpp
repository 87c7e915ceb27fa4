#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "slidepp/app/commands.hpp"
#include "slidepp/app/config.hpp"
#include "slidepp/diagnostics.hpp"
#include "slidepp/error.hpp"
#include "slidepp/ppm.hpp"
#include "slidepp/preprocess.hpp"
#include "slidepp/rfimportance.hpp"
#include "slidepp/simboot.hpp"
#include "slidepp/synth.hpp"

namespace py = pybind11;
using namespace slidepp;

namespace {

using Array2 = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> grid_values(const RasterGrid& g) {
  const auto& geo = g.geometry();
  py::array_t<double> out({geo.n_rows(), geo.n_cols()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

RasterGrid make_grid(const Array2& values, double origin_x, double origin_y, double cell_size) {
  if (values.ndim() != 2) throw ConfigError("grid values must be a 2-d array");
  const GridGeometry geo(origin_x, origin_y, static_cast<std::size_t>(values.shape(0)),
                         static_cast<std::size_t>(values.shape(1)), cell_size);
  return RasterGrid(geo, std::vector<double>(values.data(), values.data() + values.size()));
}

std::vector<Point> to_points(const Array2& xy) {
  if (xy.size() == 0) return {};
  if (xy.ndim() != 2 || xy.shape(1) != 2) throw ConfigError("points must be an (n, 2) array");
  std::vector<Point> pts;
  for (py::ssize_t i = 0; i < xy.shape(0); ++i) pts.push_back({xy.at(i, 0), xy.at(i, 1)});
  return pts;
}

py::array_t<double> from_points(std::span<const Point> pts) {
  py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  auto a = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    a(static_cast<py::ssize_t>(i), 0) = pts[i].x;
    a(static_cast<py::ssize_t>(i), 1) = pts[i].y;
  }
  return out;
}

PointPattern pattern_on(const CovariateStack& stack, const Array2& xy) {
  return PointPattern::filtered(stack.window(), to_points(xy));
}

py::dict fit_summary(const FittedModel& m) {
  py::dict d;
  d["converged"] = m.diagnostics.converged;
  d["iterations"] = m.diagnostics.iterations;
  d["loglik"] = m.diagnostics.loglik;
  d["penalized_loglik"] = m.diagnostics.penalized_loglik;
  d["edf"] = m.diagnostics.edf;
  d["ubre"] = m.diagnostics.ubre;
  return d;
}

}  // namespace

PYBIND11_MODULE(_slidepp, m) {
  m.doc() = "Point-process models of landslide crowns";
  m.attr("__version__") = app::kVersion;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  py::class_<RasterGrid>(m, "Grid")
      .def(py::init(&make_grid), py::arg("values"), py::arg("origin_x") = 0.0, py::arg("origin_y") = 0.0,
           py::arg("cell_size") = 1.0)
      .def_property_readonly("values", &grid_values, "Copy of the cell values, NaN for NODATA, row 0 north")
      .def_property_readonly("shape", [](const RasterGrid& g) {
        return py::make_tuple(g.geometry().n_rows(), g.geometry().n_cols());
      })
      .def_property_readonly("origin_x", [](const RasterGrid& g) { return g.geometry().origin_x(); })
      .def_property_readonly("origin_y", [](const RasterGrid& g) { return g.geometry().origin_y(); })
      .def_property_readonly("cell_size", [](const RasterGrid& g) { return g.geometry().cell_size(); })
      .def("__eq__", [](const RasterGrid& a, const RasterGrid& b) { return a == b; });

  m.def("read_grid", &read_ascii_grid, py::arg("path"));
  m.def("write_grid", &write_ascii_grid, py::arg("grid"), py::arg("path"));

  py::class_<CovariateStack>(m, "Stack")
      .def(py::init([](const std::map<std::string, RasterGrid>& grids) {
             if (grids.empty()) throw ConfigError("a stack needs at least one grid");
             CovariateStack s(grids.begin()->second.geometry());
             for (const auto& [name, g] : grids) s.add(name, g);
             return s;
           }),
           py::arg("grids"))
      .def("names", &CovariateStack::names)
      .def("__getitem__", &CovariateStack::get, py::return_value_policy::copy)
      .def("__contains__", &CovariateStack::contains)
      .def("__len__", &CovariateStack::size);
  m.def("read_stack", &read_stack_dir, py::arg("directory"));
  m.def("read_points", [](const std::filesystem::path& p) { return from_points(read_points_csv(p)); },
        py::arg("path"));

  py::class_<FittedModel>(m, "Model")
      .def_property_readonly("name", [](const FittedModel& f) { return f.spec.name; })
      .def_property_readonly("terms", [](const FittedModel& f) { return format_model_terms(f.spec); })
      .def_property_readonly("beta", [](const FittedModel& f) { return std::vector<double>(f.beta.begin(), f.beta.end()); })
      .def_property_readonly("gammas", [](const FittedModel& f) { return f.gammas; })
      .def_property_readonly("diagnostics", &fit_summary)
      .def("to_json", &model_to_json)
      .def("save", &save_model, py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "fit",
      [](const CovariateStack& stack, const Array2& points, const std::string& terms, const std::string& name,
         double spacing, std::optional<std::vector<double>> gammas) {
        const PointPattern p = pattern_on(stack, points);
        FitOptions o;
        if (gammas) o.gammas = gam::GammaChoice::fixed(*gammas);
        py::gil_scoped_release release;
        return fit_model(parse_model_spec(name, terms), p, stack, make_quadrature(p, stack, spacing), o);
      },
      py::arg("stack"), py::arg("points"), py::arg("terms"), py::arg("name") = "model", py::arg("spacing") = 50.0,
      py::arg("gammas") = py::none(),
      "Fit a point-process model. Terms look like 'slope:smooth, ndvi:linear, dusaf:categorical'.");

  m.def("predict", &predict_intensity, py::arg("model"), py::arg("stack"), py::arg("threads") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "in_range_mask",
      [](const FittedModel& f, const CovariateStack& s) {
        const Window w = in_range_mask_for(f, s);
        RasterGrid g(w.geometry(), 0.0);
        for (std::size_t i = 0; i < w.geometry().cell_count(); ++i) g[i] = w.valid(i) ? 1.0 : 0.0;
        return g;
      },
      py::arg("model"), py::arg("stack"));
  m.def(
      "loglik",
      [](const FittedModel& f, const CovariateStack& s, const Array2& points) {
        const PointPattern p = pattern_on(s, points);
        const LoglikResult r = loglik(f, p, s, in_range_mask_for(f, s));
        return py::make_tuple(r.value, r.points_used, r.points_excluded);
      },
      py::arg("model"), py::arg("stack"), py::arg("points"),
      "Log-likelihood on the model's in-range cells: (value, points_used, points_excluded).");
  m.def(
      "select",
      [](const std::vector<FittedModel>& models, const CovariateStack& s, const Array2& points) {
        const SelectionResult r = select_model(models, pattern_on(s, points), s);
        py::list out;
        for (const auto& e : r.ranking) out.append(py::make_tuple(e.name, e.loglik, e.points_used, e.points_excluded));
        return out;
      },
      py::arg("models"), py::arg("stack"), py::arg("points"));

  m.def(
      "simulate",
      [](const RasterGrid& intensity, std::uint64_t seed) {
        SeededRng rng(seed);
        return from_points(sample_pattern(intensity, rng).points());
      },
      py::arg("intensity"), py::arg("seed"));
  m.def(
      "bootstrap",
      [](const FittedModel& f, const CovariateStack& s, int replicates, double alpha, double spacing,
         std::uint64_t seed, int threads) {
        BootstrapOptions o;
        o.replicates = replicates;
        o.alpha = alpha;
        o.dummy_spacing = spacing;
        o.threads = threads;
        BootstrapMaps b;
        {
          py::gil_scoped_release release;
          b = semiparametric_bootstrap(f, s, o, seed);
        }
        py::dict d;
        d["estimate"] = b.estimate;
        d["sd"] = b.sd;
        d["percentile"] = b.percentile;
        d["failures"] = b.failures;
        return d;
      },
      py::arg("model"), py::arg("stack"), py::arg("replicates") = 100, py::arg("alpha") = 0.99,
      py::arg("spacing") = 50.0, py::arg("seed") = 1, py::arg("threads") = 1);

  m.def(
      "gaussian_filter",
      [](const RasterGrid& g, double sigma, double radius) { return gaussian_filter(g, {sigma, radius}).grid; },
      py::arg("grid"), py::arg("sigma") = 100.0, py::arg("radius") = 10.0);
  m.def(
      "binarize_twi",
      [](const RasterGrid& g, double threshold) {
        const CategoricalGrid c = binarize_twi(g, threshold);
        RasterGrid out(g.geometry());
        for (std::size_t i = 0; i < g.geometry().cell_count(); ++i) {
          if (c[i] != CategoricalGrid::kNoLabel) out[i] = c[i];
        }
        return out;
      },
      py::arg("grid"), py::arg("threshold") = 9.0);

  m.def(
      "raw_errors",
      [](const RasterGrid& intensity, const Array2& points, double subarea) {
        const PointPattern p = PointPattern::filtered(intensity.window(), to_points(points));
        const ErrorGrid e = raw_errors(intensity, p, subarea);
        py::dict d;
        d["errors"] = e.errors();
        d["total_expected"] = e.total_expected;
        d["total_observed"] = e.total_observed;
        py::dict summary;
        for (const auto& r : residual_summary(e)) {
          summary[py::str(r.label)] = py::make_tuple(r.min, r.q1, r.median, r.mean, r.q3, r.max);
        }
        d["summary"] = summary;
        return d;
      },
      py::arg("intensity"), py::arg("points"), py::arg("subarea") = 250.0);

  m.def(
      "importance",
      [](const CovariateStack& s, const Array2& points, double spacing, int trees, std::uint64_t seed, int threads) {
        const rf::LabeledTable t = rf::build_rf_dataset(pattern_on(s, points), s, spacing);
        rf::ForestConfig c;
        c.trees = trees;
        c.seed = seed;
        c.threads = threads;
        rf::ImportanceRanking r;
        {
          py::gil_scoped_release release;
          r = rf::gini_importance(rf::fit_forest(t, c), t);
        }
        py::list ranking;
        for (const auto& e : r.entries) ranking.append(py::make_tuple(e.covariate, e.importance));
        return py::make_tuple(ranking, r.top_block());
      },
      py::arg("stack"), py::arg("points"), py::arg("spacing") = 25.0, py::arg("trees") = 500, py::arg("seed") = 1,
      py::arg("threads") = 1, "Gini importance ranking and its first block.");

  m.def(
      "synth_valley",
      [](std::uint64_t seed, double expected_points) {
        synth::ValleySpec spec = synth::default_valley_spec();
        spec.expected_points = expected_points;
        synth::Valley v = synth::generate_valley(spec, seed);
        py::dict d;
        d["stack"] = v.stack;
        d["intensity"] = v.intensity;
        d["points"] = from_points(v.crowns.points());
        d["truth"] = synth::truth_to_json(v.truth);
        return d;
      },
      py::arg("seed"), py::arg("expected_points") = 200.0);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "slidepp");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        py::gil_scoped_release release;
        return app::run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Run a command-line invocation in process; returns the exit code.");
}
