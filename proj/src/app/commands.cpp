#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "common.hpp"
#include "slidepp/diagnostics.hpp"
#include "slidepp/error.hpp"
#include "slidepp/preprocess.hpp"
#include "slidepp/rfimportance.hpp"
#include "slidepp/simboot.hpp"
#include "slidepp/synth.hpp"

namespace slidepp::app {

namespace {

std::set<int> code_set(const Config& c, const std::string& key, const std::vector<double>& fallback) {
  std::set<int> out;
  for (double v : c.get_double_list(key, fallback)) {
    if (v != std::floor(v)) throw ConfigError(key + ": '" + format_number(v) + "' is not an integer code");
    out.insert(static_cast<int>(v));
  }
  return out;
}

void require_present(const CovariateStack& stack, const std::string& name, const std::string& what) {
  if (!stack.contains(name)) {
    throw DataError(what + " expects covariate '" + name + "', which is not among the input grids");
  }
}

std::vector<std::string> union_covariates(const std::vector<FittedModel>& models) {
  std::vector<std::string> out;
  for (const auto& m : models) {
    for (const auto& n : m.spec.covariates()) {
      if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    }
  }
  return out;
}

std::string ranking_text(const rf::ImportanceRanking& ranking, double oob) {
  std::vector<std::string> names;
  for (const auto& e : ranking.entries) names.push_back(e.covariate);
  std::ostringstream os;
  os << "ranking = " << join(names) << '\n';
  os << "top_block = " << join(ranking.top_block()) << '\n';
  os << "oob_error = " << format_number(oob) << '\n';
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- preprocess

void cmd_preprocess(const RunContext& ctx) {
  const Config& c = ctx.config;
  const auto input = c.get_path("input");
  const auto transforms = c.get_list("transforms", {});
  std::set<std::string> seen;
  for (const auto& t : transforms) {
    if (t != "filter" && t != "twi" && t != "curvature" && t != "dusaf") {
      throw ConfigError("unknown transform '" + t + "' (expected filter, twi, curvature or dusaf)");
    }
    if (!seen.insert(t).second) throw ConfigError("transform '" + t + "' is listed twice");
  }
  Outputs out(ctx);
  if (std::filesystem::weakly_canonical(ctx.out / "covariates") == input) {
    throw ConfigError("output covariates directory would overwrite the input");
  }
  const CovariateStack stack = read_stack_dir(input);

  std::map<std::string, RasterGrid> changed;
  auto current = [&](const std::string& n) -> const RasterGrid& {
    auto it = changed.find(n);
    return it != changed.end() ? it->second : stack.get(n);
  };
  std::ostringstream log;
  log << "input = " << input.string() << '\n';
  log << "transforms = " << join(transforms) << '\n';

  for (const auto& t : transforms) {
    if (t == "filter") {
      FilterSpec spec;
      spec.sigma = c.get_double("filter.sigma", 100.0);
      spec.radius = c.get_double("filter.radius", 10.0);
      std::vector<std::string> names;
      if (c.has("filter.covariates")) {
        names = c.get_list("filter.covariates", {});
        for (const auto& n : names) require_present(stack, n, "filter");
      } else {
        for (const char* n : {"dtm", "slope", "northness", "eastness", "twi", "ndvi"}) {
          if (stack.contains(n)) names.push_back(n);
        }
        c.get_list("filter.covariates", names);
      }
      for (const auto& n : names) {
        FilterResult r = gaussian_filter(current(n), spec);
        log << "filter " << n << ": empty neighbourhoods " << r.empty_neighbourhoods << '\n';
        changed[n] = std::move(r.grid);
      }
    } else if (t == "twi") {
      const auto src = c.get_string("twi.covariate", "twi");
      const auto dst = c.get_string("twi.output", "twi_b");
      const double threshold = c.get_double("twi.threshold", 9.0);
      require_present(stack, src, "twi");
      changed[dst] = binarize_twi(current(src), threshold).to_raster();
      log << "twi " << src << " -> " << dst << ": 0 where <= " << format_number(threshold) << ", 1 above\n";
    } else if (t == "curvature") {
      const auto names = c.get_list("curvature.covariates", {"plc", "prc"});
      const double tol = c.get_double("curvature.zero_tolerance", 1e-6);
      for (const auto& n : names) {
        require_present(stack, n, "curvature");
        changed[n] = curvature_sign(current(n), tol).to_raster();
        log << "curvature " << n << ": 0 negative, 1 zero, 2 positive\n";
      }
    } else if (t == "dusaf") {
      const auto name = c.get_string("dusaf.covariate", "dusaf");
      const auto natural = code_set(c, "dusaf.natural", {1, 2, 3, 4, 5, 6, 7});
      const auto anthropic = code_set(c, "dusaf.anthropic", {8, 9, 10, 11});
      require_present(stack, name, "dusaf");
      changed[name] = merge_dusaf(CategoricalGrid::from_codes(current(name)), natural, anthropic).to_raster();
      log << "dusaf " << name << ": 0 Natural, 1 Anthropic\n";
    }
  }

  for (const auto& n : stack.names()) {
    if (changed.count(n)) continue;
    const std::string rel = "covariates/" + n + ".asc";
    std::filesystem::copy_file(input / (n + ".asc"), out.file(rel),
                               std::filesystem::copy_options::overwrite_existing);
  }
  for (const auto& [n, g] : changed) out.grid("covariates/" + n + ".asc", g);
  out.text("preprocess_log.txt", log.str());
  out.finish();
}

// ---------------------------------------------------------------- importance

void cmd_importance(const RunContext& ctx) {
  const Config& c = ctx.config;
  const auto cov_dir = c.get_path("covariates");
  const auto points = c.get_path("points");
  const double spacing = c.get_double("importance.spacing", 25.0);
  rf::ForestConfig fc;
  fc.trees = c.get_int("importance.trees", 500);
  fc.mtry = c.get_int("importance.mtry", 0);
  fc.min_node_size = c.get_int("importance.min_node_size", 5);
  fc.class_weighted = c.get_bool("importance.class_weighted", true);
  fc.seed = ctx.seed;
  fc.threads = ctx.threads;
  const auto exclude = c.get_list("importance.exclude", {});
  Outputs out(ctx);

  const CovariateStack stack = read_stack_dir(cov_dir);
  std::vector<std::string> names;
  for (const auto& n : stack.names()) {
    if (std::find(exclude.begin(), exclude.end(), n) == exclude.end()) names.push_back(n);
  }
  if (names.empty()) throw ConfigError("every covariate is excluded from the importance ranking");
  const CovariateStack sub = substack(stack, names, "importance");
  const PointPattern pattern = load_pattern(points, sub.window());
  const auto table = rf::build_rf_dataset(pattern, sub, spacing);
  const auto forest = rf::fit_forest(table, fc);
  const auto ranking = rf::gini_importance(forest, table);
  rf::write_ranking_csv(ranking, out.file("importance.csv"));
  out.text("importance.txt", ranking_text(ranking, forest.oob_error));
  out.finish();
}

// ---------------------------------------------------------------- fit

void cmd_fit(const RunContext& ctx) {
  const Config& c = ctx.config;
  const auto cov_dir = c.get_path("covariates");
  const auto points = c.get_path("points");
  const ModelSpec spec = parse_model_spec(c.get_string("model.name", "model"), c.get_string("model.terms", ""));
  const double spacing = c.get_double("quadrature.spacing", 50.0);
  FitOptions opts;
  if (c.has("fit.gammas")) opts.gammas = gam::GammaChoice::fixed(c.get_double_list("fit.gammas", {}));
  opts.pirls.max_iter = c.get_int("fit.max_iter", 200);
  opts.pirls.rel_tol = c.get_double("fit.rel_tol", 1e-8);
  Outputs out(ctx);

  const CovariateStack stack = read_stack_dir(cov_dir);
  const CovariateStack sub = substack(stack, spec.covariates(), "model '" + spec.name + "'");
  const PointPattern pattern = load_pattern(points, sub.window());
  const QuadratureScheme quad = make_quadrature(pattern, sub, spacing);
  const FittedModel model = fit_model(spec, pattern, sub, quad, opts);
  save_model(model, out.file("model.json"));

  std::ostringstream os;
  os << "model = " << spec.name << '\n'
     << "terms = " << format_model_terms(spec) << '\n'
     << "points = " << pattern.size() << '\n'
     << "quadrature_nodes = " << quad.nodes().size() << '\n'
     << "converged = " << (model.diagnostics.converged ? "true" : "false") << '\n'
     << "iterations = " << model.diagnostics.iterations << '\n'
     << "loglik = " << format_number(model.diagnostics.loglik) << '\n'
     << "penalized_loglik = " << format_number(model.diagnostics.penalized_loglik) << '\n'
     << "edf = " << format_number(model.diagnostics.edf) << '\n';
  std::vector<std::string> g;
  for (double v : model.gammas) g.push_back(format_number(v));
  os << "gammas = " << join(g) << '\n';
  out.text("fit.txt", os.str());
  out.finish();
}

// ---------------------------------------------------------------- predict

void cmd_predict(const RunContext& ctx) {
  const Config& c = ctx.config;
  const FittedModel model = load_model(c.get_path("model"));
  const auto cov_dir = c.get_path("covariates");
  Outputs out(ctx);

  const CovariateStack stack = read_stack_dir(cov_dir);
  const CovariateStack sub = substack(stack, model.spec.covariates(), "model '" + model.spec.name + "'");
  const IntensityMap map = predict_intensity(model, sub, ctx.threads);
  const Window in_range = in_range_mask_for(model, sub);
  RasterGrid mask(sub.geometry(), 0.0);
  for (std::size_t i = 0; i < mask.geometry().cell_count(); ++i) mask[i] = in_range.valid(i) ? 1.0 : 0.0;
  out.grid("intensity.asc", map);
  out.grid("in_range.asc", mask);

  std::ostringstream os;
  os << "model = " << model.spec.name << '\n'
     << "predicted_cells = " << map.valid_count() << '\n'
     << "in_range_cells = " << in_range.valid_count() << '\n'
     << "expected_count = " << format_number(expected_count(map, map.window())) << '\n';
  out.text("predict.txt", os.str());
  out.finish();
}

// ---------------------------------------------------------------- simulate

void cmd_simulate(const RunContext& ctx) {
  const Config& c = ctx.config;
  IntensityMap map;
  if (c.has("intensity")) {
    map = read_ascii_grid(c.get_path("intensity"));
  } else {
    const FittedModel model = load_model(c.get_path("model"));
    const CovariateStack stack = read_stack_dir(c.get_path("covariates"));
    map = predict_intensity(model, substack(stack, model.spec.covariates(), "model"), ctx.threads);
  }
  const int count = c.get_int("simulate.count", 1);
  if (count < 1) throw ConfigError("simulate.count must be at least 1");
  Outputs out(ctx);

  const SeededRng root(ctx.seed);
  std::ostringstream os;
  os << "expected_count = " << format_number(expected_count(map, map.window())) << '\n';
  for (int i = 0; i < count; ++i) {
    SeededRng rng = root.derive(static_cast<std::uint64_t>(i));
    const PointPattern p = sample_pattern(map, rng);
    char name[64];
    std::snprintf(name, sizeof name, "patterns/pattern_%03d.csv", i + 1);
    write_points_csv(p.points(), out.file(name));
    os << name << " = " << p.size() << '\n';
  }
  out.text("simulate.txt", os.str());
  out.finish();
}

// ---------------------------------------------------------------- bootstrap

void cmd_bootstrap(const RunContext& ctx) {
  const Config& c = ctx.config;
  const FittedModel model = load_model(c.get_path("model"));
  const auto cov_dir = c.get_path("covariates");
  std::optional<std::filesystem::path> target_dir;
  if (c.has("target")) target_dir = c.get_path("target");
  BootstrapOptions opts;
  opts.replicates = c.get_int("bootstrap.replicates", 100);
  opts.alpha = c.get_double("bootstrap.alpha", 0.99);
  opts.dummy_spacing = c.get_double("quadrature.spacing", 50.0);
  opts.threads = ctx.threads;
  Outputs out(ctx);

  const auto names = model.spec.covariates();
  const CovariateStack train = substack(read_stack_dir(cov_dir), names, "model '" + model.spec.name + "'");
  std::optional<CovariateStack> target;
  if (target_dir) target = substack(read_stack_dir(*target_dir), names, "model '" + model.spec.name + "'");
  const BootstrapMaps maps = semiparametric_bootstrap(model, train, opts, ctx.seed, target ? &*target : nullptr);

  out.grid("estimate.asc", maps.estimate);
  out.grid("sd.asc", maps.sd);
  out.grid("percentile.asc", maps.percentile);
  const std::string pct = format_number(100.0 * maps.alpha) + "% percentile";
  out.text("maps.svg", panels_svg({{&maps.estimate, "intensity"}, {&maps.sd, "bootstrap sd"}, {&maps.percentile, pct}}));
  std::ostringstream os;
  os << "replicates = " << maps.replicates << '\n'
     << "effective = " << maps.effective << '\n'
     << "failures = " << maps.failures << '\n'
     << "alpha = " << format_number(maps.alpha) << '\n';
  out.text("bootstrap.txt", os.str());
  out.finish();
}

// ---------------------------------------------------------------- validate

void cmd_validate(const RunContext& ctx) {
  const Config& c = ctx.config;
  std::vector<FittedModel> models;
  for (const auto& p : c.get_path_list("models")) models.push_back(load_model(p));
  const auto cov_dir = c.get_path("covariates");
  const auto points = c.get_path("points");
  Outputs out(ctx);

  const CovariateStack stack = substack(read_stack_dir(cov_dir), union_covariates(models), "validation");
  const PointPattern pattern = load_pattern(points, stack.window());
  const SelectionResult sel = select_model(models, pattern, stack);
  std::ostringstream csv;
  csv << "rank,model,loglik,terms,points_used,points_excluded\n";
  for (std::size_t r = 0; r < sel.ranking.size(); ++r) {
    const auto& m = sel.ranking[r];
    csv << r + 1 << ',' << m.name << ',' << format_number(m.loglik) << ',' << m.term_count << ','
        << m.points_used << ',' << m.points_excluded << '\n';
  }
  out.text("ranking.csv", csv.str());
  out.text("ranking.txt", selection_table(sel, stack.geometry().cell_area()));
  RasterGrid mask(stack.geometry(), 0.0);
  for (std::size_t i = 0; i < mask.geometry().cell_count(); ++i) mask[i] = sel.common_mask.valid(i) ? 1.0 : 0.0;
  out.grid("common_mask.asc", mask);
  out.finish();
}

std::string selection_table(const SelectionResult& sel, double cell_area) {
  std::ostringstream os;
  const std::size_t cells = sel.common_mask.valid_count();
  os << "Validation log-likelihood on the common in-range mask (" << cells << " cells, "
     << format_number(static_cast<double>(cells) * cell_area) << " m2)\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-4s %-20s %16s %6s %8s %8s\n", "rank", "model", "loglik", "terms", "points",
                "excluded");
  os << line;
  for (std::size_t r = 0; r < sel.ranking.size(); ++r) {
    const auto& m = sel.ranking[r];
    std::snprintf(line, sizeof line, "%-4zu %-20s %16.4f %6zu %8zu %8zu\n", r + 1, m.name.c_str(), m.loglik,
                  m.term_count, m.points_used, m.points_excluded);
    os << line;
  }
  os << "selected = " << sel.ranking.front().name << '\n';
  return os.str();
}

// ---------------------------------------------------------------- diagnose

void cmd_diagnose(const RunContext& ctx) {
  const Config& c = ctx.config;
  const FittedModel model = load_model(c.get_path("model"));
  const auto cov_dir = c.get_path("covariates");
  const auto points = c.get_path("points");
  const double subarea = c.get_double("diagnostics.subarea", 250.0);
  SimulationOptions sim;
  sim.nsim = c.get_int("diagnostics.nsim", 39);
  sim.thresholds = c.get_int("diagnostics.thresholds", 200);
  sim.pearson = c.get_bool("diagnostics.pearson", false);
  sim.threads = ctx.threads;
  std::vector<std::string> continuous;
  for (const auto& t : model.spec.terms) {
    if (t.kind != gam::TermKind::categorical) continuous.push_back(t.covariate);
  }
  const auto lurking = c.get_list("diagnostics.lurking", continuous);
  const bool qq = c.get_bool("diagnostics.qq", true);
  Outputs out(ctx);

  const CovariateStack all = read_stack_dir(cov_dir);
  const CovariateStack stack = substack(all, model.spec.covariates(), "model '" + model.spec.name + "'");
  const PointPattern pattern = load_pattern(points, stack.window());
  const IntensityMap map = predict_intensity(model, stack, ctx.threads);
  const ErrorGrid eg = raw_errors(map, pattern, subarea);
  write_error_grid_csv(eg, out.file("errors.csv"));
  const RasterGrid er = eg.error_raster();
  out.grid("errors.asc", er);
  out.text("errors.svg", raster_svg(er, "raw errors", true));
  const auto rows = residual_summary(eg);
  write_summary_csv(rows, out.file("summary.csv"));
  out.text("summary.txt", format_summary(rows));

  for (const auto& cov : lurking) {
    // Lurking covariates may be outside the model; they still need a grid.
    if (!all.contains(cov)) throw ConfigError("lurking covariate '" + cov + "' is not in the stack");
    CovariateStack with = stack;
    if (!with.contains(cov)) with.add(cov, all.get(cov));
    const auto curve = lurking_curve(model, pattern, with, cov, sub_seed(ctx.seed, "lurking:" + cov), sim);
    write_lurking_csv(curve, out.file("lurking_" + cov + ".csv"));
    out.text("lurking_" + cov + ".svg", lurking_svg(curve));
  }
  if (qq) {
    const auto q = qq_data(model, pattern, stack, subarea, sub_seed(ctx.seed, "qq"), sim);
    write_qq_csv(q, out.file("qq.csv"));
    out.text("qq.svg", qq_svg(q));
  }
  out.finish();
}

// ---------------------------------------------------------------- synth

namespace {

synth::EffectSpec parse_effect(const std::string& item, const std::map<std::string, synth::FieldSpec>& fields) {
  std::vector<std::string> parts;
  std::stringstream ss(item);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  auto num = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("truth effect '" + item + "': '" + s + "' is not a number");
    return v;
  };
  if (parts.size() < 3) throw ConfigError("truth effect '" + item + "' must be covariate:kind:coef[:centre:scale]");
  synth::EffectSpec e;
  e.covariate = parts[0];
  auto f = fields.find(e.covariate);
  if (f == fields.end()) throw ConfigError("truth effect names unknown field '" + e.covariate + "'");
  if (parts[1] == "factor") {
    e.kind = synth::EffectKind::factor;
    std::stringstream ls(parts[2]);
    std::string tok;
    while (ls >> tok) e.level_effects.push_back(num(tok));
    if (parts.size() != 3) throw ConfigError("factor effect '" + item + "' must be covariate:factor:e1 e2 ...");
    if (static_cast<int>(e.level_effects.size()) != f->second.classes) {
      throw ConfigError("factor effect '" + item + "' needs one value per class of '" + e.covariate + "'");
    }
    return e;
  }
  e.kind = parts[1] == "linear" ? synth::EffectKind::linear
         : parts[1] == "quadratic" ? synth::EffectKind::quadratic
                                   : throw ConfigError("unknown effect kind '" + parts[1] + "'");
  e.coef = num(parts[2]);
  e.centre = f->second.mean;
  e.scale = f->second.sd;
  if (parts.size() == 5) {
    e.centre = num(parts[3]);
    e.scale = num(parts[4]);
  } else if (parts.size() != 3) {
    throw ConfigError("truth effect '" + item + "' must be covariate:kind:coef[:centre:scale]");
  }
  return e;
}

}  // namespace

void cmd_synth(const RunContext& ctx) {
  const Config& c = ctx.config;
  synth::ValleySpec spec;
  spec.rows = static_cast<std::size_t>(c.get_int("synth.rows", 100));
  spec.cols = static_cast<std::size_t>(c.get_int("synth.cols", 100));
  spec.cell_size = c.get_double("synth.cell_size", 5.0);
  spec.origin_x = c.get_double("synth.origin_x", 0.0);
  spec.origin_y = c.get_double("synth.origin_y", 0.0);
  spec.expected_points = c.get_double("synth.expected_points", 200.0);
  const double amplitude = c.get_double("synth.amplitude", 1.0);
  const auto names = c.get_list("synth.fields", {"dtm", "slope", "northness", "eastness", "twi", "ndvi", "plc",
                                                 "prc", "dusaf"});
  std::map<std::string, synth::FieldSpec> by_name;
  for (const auto& n : names) {
    synth::FieldSpec f = synth::default_field(n);
    const std::string p = "synth." + n + ".";
    f.mean = c.get_double(p + "mean", f.mean);
    f.sd = c.get_double(p + "sd", f.sd);
    f.classes = c.get_int(p + "classes", f.classes);
    f.bumps = c.get_int(p + "bumps", f.bumps);
    f.bump_scale = c.get_double(p + "bump_scale", f.bump_scale);
    f.amplitude = c.get_double(p + "amplitude", amplitude);
    if (f.classes < 0 || f.bumps < 0 || !(f.bump_scale > 0.0)) throw ConfigError("bad field parameters for '" + n + "'");
    spec.fields.push_back(f);
    by_name[n] = f;
  }
  const auto effects = c.get_list("synth.effects", {"slope:quadratic:-0.6:25:10", "ndvi:linear:-0.5:0.5:0.15",
                                                    "twi:linear:0.4:8:2"});
  for (const auto& e : effects) spec.effects.push_back(parse_effect(e, by_name));
  const auto valleys = c.get_list("synth.valleys", {});
  Outputs out(ctx);

  auto emit = [&](const std::string& prefix, std::uint64_t seed) {
    const synth::Valley v = synth::generate_valley(spec, seed);
    for (const auto& n : v.stack.names()) out.grid(prefix + "covariates/" + n + ".asc", v.stack.get(n));
    write_points_csv(v.crowns.points(), out.file(prefix + "crowns.csv"));
    out.grid(prefix + "truth_intensity.asc", v.intensity);
    out.text(prefix + "truth.json", synth::truth_to_json(v.truth));
  };
  if (valleys.empty()) {
    emit("", ctx.seed);
  } else {
    std::set<std::string> seen;
    for (const auto& v : valleys) {
      if (!seen.insert(v).second) throw ConfigError("valley '" + v + "' listed twice");
      emit(v + "/", sub_seed(ctx.seed, "valley:" + v));
    }
    if (seen.count("train") && seen.count("validate") && seen.count("test")) {
      std::ostringstream os;
      os << "# workflow inputs for the generated valleys\n";
      for (const char* r : {"train", "validate", "test"}) {
        os << r << ".covariates = " << r << "/covariates\n" << r << ".points = " << r << "/crowns.csv\n";
      }
      out.text("workflow.conf", os.str());
    }
  }
  out.finish();
}

}  // namespace slidepp::app
