#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "common.hpp"
#include "slidepp/diagnostics.hpp"
#include "slidepp/error.hpp"
#include "slidepp/log.hpp"
#include "slidepp/rfimportance.hpp"
#include "slidepp/simboot.hpp"

namespace slidepp::app {

namespace {

struct Valley {
  std::string role;
  std::filesystem::path covariates;
  std::filesystem::path points;
};

// Every read of valley data goes through here so the order is auditable.
class AccessLog {
 public:
  void stage(const std::string& name) { text_ << "stage " << name << '\n'; }
  void note(const std::string& line) { text_ << line << '\n'; }
  CovariateStack stack(const Valley& v) {
    text_ << "read " << v.role << " covariates " << v.covariates.string() << '\n';
    return read_stack_dir(v.covariates);
  }
  PointPattern points(const Valley& v, const Window& window) {
    text_ << "read " << v.role << " points " << v.points.string() << '\n';
    return load_pattern(v.points, window);
  }
  std::string str() const { return text_.str(); }

 private:
  std::ostringstream text_;
};

template <typename E>
[[noreturn]] void rethrow_in_stage(const std::string& stage, const E& e) {
  throw E("workflow stage '" + stage + "': " + e.what());
}

// Integer codes with few distinct values.
bool looks_categorical(const RasterGrid& g, int max_levels) {
  std::set<double> levels;
  for (double v : g.values()) {
    if (is_nodata(v)) continue;
    if (v != std::floor(v)) return false;
    levels.insert(v);
    if (static_cast<int>(levels.size()) > max_levels) return false;
  }
  return !levels.empty();
}

gam::TermSpec term_for(const std::string& covariate, const std::vector<std::string>& categorical,
                       const std::vector<std::string>& linear, int basis_dim) {
  auto in = [&](const std::vector<std::string>& v) { return std::find(v.begin(), v.end(), covariate) != v.end(); };
  gam::TermSpec t;
  t.covariate = covariate;
  t.kind = in(categorical) ? gam::TermKind::categorical : in(linear) ? gam::TermKind::linear : gam::TermKind::smooth;
  t.basis_dim = basis_dim;
  return t;
}

}  // namespace

void cmd_workflow(const RunContext& ctx) {
  const Config& c = ctx.config;
  std::vector<Valley> valleys;
  for (const char* role : {"train", "validate", "test"}) {
    const std::string r(role);
    valleys.push_back({r, c.get_path(r + ".covariates"), c.get_path(r + ".points")});
  }
  for (std::size_t a = 0; a < valleys.size(); ++a) {
    for (std::size_t b = a + 1; b < valleys.size(); ++b) {
      if (valleys[a].covariates == valleys[b].covariates || valleys[a].points == valleys[b].points) {
        throw ConfigError("the " + valleys[a].role + " and " + valleys[b].role + " valleys share input files");
      }
    }
  }
  const Valley& train = valleys[0];
  const Valley& validate = valleys[1];
  const Valley& test = valleys[2];

  const double rf_spacing = c.get_double("importance.spacing", 25.0);
  rf::ForestConfig fc;
  fc.trees = c.get_int("importance.trees", 500);
  fc.mtry = c.get_int("importance.mtry", 0);
  fc.min_node_size = c.get_int("importance.min_node_size", 5);
  fc.class_weighted = c.get_bool("importance.class_weighted", true);
  fc.seed = sub_seed(ctx.seed, "importance");
  fc.threads = ctx.threads;
  const auto exclude = c.get_list("importance.exclude", {});
  const auto orientation = c.get_list("models.orientation", {"northness", "eastness"});
  const auto categorical_keys = c.get_list("models.categorical", {"auto"});
  const int max_levels = c.get_int("models.max_levels", 12);
  const auto linear = c.get_list("models.linear", {});
  const int basis_dim = c.get_int("models.basis_dim", 10);
  std::vector<ModelSpec> extra;
  for (const auto& key : c.keys_with_prefix("candidate.")) {
    extra.push_back(parse_model_spec(key.substr(10), c.get_string(key)));
  }
  const double spacing = c.get_double("quadrature.spacing", 50.0);
  BootstrapOptions bopts;
  bopts.replicates = c.get_int("bootstrap.replicates", 100);
  bopts.alpha = c.get_double("bootstrap.alpha", 0.99);
  bopts.dummy_spacing = spacing;
  bopts.threads = ctx.threads;
  const double subarea = c.get_double("diagnostics.subarea", 250.0);
  Outputs out(ctx);

  AccessLog access;
  std::string stage;
  try {
    // ---- importance on the training valley
    stage = "importance";
    access.stage(stage);
    const CovariateStack train_all = access.stack(train);
    std::vector<std::string> names;
    for (const auto& n : train_all.names()) {
      if (std::find(exclude.begin(), exclude.end(), n) == exclude.end()) names.push_back(n);
    }
    const CovariateStack train_stack = substack(train_all, names, "importance");
    const PointPattern train_points = access.points(train, train_stack.window());
    const auto table = rf::build_rf_dataset(train_points, train_stack, rf_spacing);
    const auto forest = rf::fit_forest(table, fc);
    const auto ranking = rf::gini_importance(forest, table);
    rf::write_ranking_csv(ranking, out.file("importance.csv"));

    // ---- candidate models
    stage = "models";
    access.stage(stage);
    std::vector<std::string> categorical;
    for (const auto& n : names) {
      const bool listed = std::find(categorical_keys.begin(), categorical_keys.end(), n) != categorical_keys.end();
      const bool automatic = std::find(categorical_keys.begin(), categorical_keys.end(), "auto") != categorical_keys.end();
      if (listed || (automatic && looks_categorical(train_stack.get(n), max_levels))) categorical.push_back(n);
    }
    std::vector<std::string> ranked, top = ranking.top_block(), reduced;
    for (const auto& e : ranking.entries) ranked.push_back(e.covariate);
    for (const auto& n : top) {
      if (std::find(orientation.begin(), orientation.end(), n) == orientation.end()) reduced.push_back(n);
    }
    auto make = [&](const std::string& name, const std::vector<std::string>& covs) {
      ModelSpec s;
      s.name = name;
      for (const auto& n : covs) s.terms.push_back(term_for(n, categorical, linear, basis_dim));
      return s;
    };
    std::vector<ModelSpec> specs = {make("GAM-all", ranked), make("GAM-selected", top)};
    if (reduced.empty()) {
      warn("GAM-reduced is empty (the top block holds only orientation covariates) and is skipped");
    } else {
      specs.push_back(make("GAM-reduced", reduced));
    }
    for (auto& s : extra) {
      for (const auto& n : s.covariates()) {
        if (!train_stack.contains(n)) throw ConfigError("candidate '" + s.name + "' uses unknown covariate '" + n + "'");
      }
      specs.push_back(std::move(s));
    }
    std::set<std::string> spec_names;
    for (const auto& s : specs) {
      if (!spec_names.insert(s.name).second) throw ConfigError("candidate model name '" + s.name + "' is used twice");
    }

    // ---- fit every candidate on one training quadrature
    stage = "fit";
    access.stage(stage);
    const QuadratureScheme quad = make_quadrature(train_points, train_stack, spacing);
    std::vector<FittedModel> models;
    for (const auto& s : specs) {
      models.push_back(fit_model(s, train_points, train_stack, quad));
      save_model(models.back(), out.file("models/" + s.name + ".json"));
    }

    // ---- selection on the validation valley
    stage = "selection";
    access.stage(stage);
    const CovariateStack val_stack = substack(access.stack(validate), names, "validation");
    const PointPattern val_points = access.points(validate, val_stack.window());
    const SelectionResult sel = select_model(models, val_points, val_stack);
    {
      std::ostringstream csv;
      csv << "rank,model,loglik,terms,points_used,points_excluded\n";
      for (std::size_t r = 0; r < sel.ranking.size(); ++r) {
        const auto& m = sel.ranking[r];
        csv << r + 1 << ',' << m.name << ',' << format_number(m.loglik) << ',' << m.term_count << ','
            << m.points_used << ',' << m.points_excluded << '\n';
      }
      out.text("ranking.csv", csv.str());
    }
    const FittedModel& best = models[sel.ranking.front().input_index];
    access.note("selection complete: " + best.spec.name);

    // ---- test valley
    stage = "test";
    access.stage(stage);
    const auto best_covs = best.spec.covariates();
    const CovariateStack test_stack = substack(access.stack(test), best_covs, "model '" + best.spec.name + "'");
    const PointPattern test_points = access.points(test, test_stack.window());

    stage = "bootstrap";
    access.stage(stage);
    const CovariateStack best_train = substack(train_stack, best_covs, "model '" + best.spec.name + "'");
    const BootstrapMaps maps =
        semiparametric_bootstrap(best, best_train, bopts, sub_seed(ctx.seed, "bootstrap"), &test_stack);
    out.grid("intensity.asc", maps.estimate);
    out.grid("sd.asc", maps.sd);
    out.grid("percentile.asc", maps.percentile);
    const std::string pct = format_number(100.0 * maps.alpha) + "% percentile";
    out.text("maps.svg",
             panels_svg({{&maps.estimate, "intensity"}, {&maps.sd, "bootstrap sd"}, {&maps.percentile, pct}}));

    stage = "errors";
    access.stage(stage);
    const ErrorGrid eg = raw_errors(maps.estimate, test_points, subarea);
    write_error_grid_csv(eg, out.file("errors.csv"));
    const RasterGrid er = eg.error_raster();
    out.grid("errors.asc", er);
    out.text("errors.svg", raster_svg(er, "raw errors", true));
    const auto rows = residual_summary(eg);
    write_summary_csv(rows, out.file("summary.csv"));
    const Window in_range = in_range_mask_for(best, test_stack).intersect(maps.estimate.window());
    std::optional<LoglikResult> test_ll;
    if (!in_range.empty()) test_ll = loglik(maps.estimate, test_points, in_range);

    // ---- report
    stage = "report";
    std::ostringstream rep;
    rep << "slidepp workflow report\n\n";
    rep << "seed = " << ctx.seed << '\n';
    rep << "train = " << train.covariates.parent_path().string() << '\n';
    rep << "validate = " << validate.covariates.parent_path().string() << '\n';
    rep << "test = " << test.covariates.parent_path().string() << "\n\n";

    rep << "Covariate importance (training valley, " << table.class_count(1) << " crowns, " << table.class_count(0)
        << " dummies, OOB error " << fixed(forest.oob_error, 4) << ")\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-16s %12s %6s\n", "rank", "covariate", "importance", "block");
    rep << line;
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
      std::snprintf(line, sizeof line, "%-4zu %-16s %12.6f %6d\n", i + 1, ranking.entries[i].covariate.c_str(),
                    ranking.entries[i].importance, i < ranking.boundary ? 1 : 2);
      rep << line;
    }
    rep << "\nCandidate models (fitted on the training valley)\n";
    for (const auto& m : models) {
      rep << "  " << m.spec.name << ": " << (m.spec.terms.empty() ? "intercept only" : format_model_terms(m.spec))
          << " (edf " << fixed(m.diagnostics.edf, 2) << ", " << (m.diagnostics.converged ? "converged" : "NOT converged")
          << ")\n";
    }
    rep << "\nModel ranking. " << selection_table(sel, val_stack.geometry().cell_area());

    rep << "\nTest valley, model " << best.spec.name << '\n';
    rep << "  observed crowns = " << test_points.size() << '\n';
    rep << "  expected crowns = " << fixed(eg.total_expected, 4) << '\n';
    rep << "  cells in training range = " << in_range.valid_count() << " of " << maps.estimate.valid_count() << '\n';
    if (test_ll) rep << "  log-likelihood on in-range cells = " << fixed(test_ll->value, 4) << '\n';
    rep << "  bootstrap replicates = " << maps.effective << " of " << maps.replicates << " (alpha "
        << format_number(maps.alpha) << ")\n";
    rep << "\nResidual summary. Raw residuals over " << format_number(subarea) << " m subareas\n" << format_summary(rows);
    rep << "\nMaps: maps.svg (intensity left, bootstrap sd centre, " << pct << " right)\n";
    rep << "Error grid: errors.csv, errors.asc, errors.svg\n";
    out.text("report.txt", rep.str());
  } catch (const ConfigError& e) {
    out.text("access_log.txt", access.str());
    out.abort(stage);
    rethrow_in_stage(stage, e);
  } catch (const DataError& e) {
    out.text("access_log.txt", access.str());
    out.abort(stage);
    rethrow_in_stage(stage, e);
  } catch (const NumericalError& e) {
    out.text("access_log.txt", access.str());
    out.abort(stage);
    rethrow_in_stage(stage, e);
  } catch (...) {
    out.text("access_log.txt", access.str());
    out.abort(stage);
    throw;
  }
  out.text("access_log.txt", access.str());
  out.finish();
}

}  // namespace slidepp::app
