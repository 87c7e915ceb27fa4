#include "slidepp/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "slidepp/error.hpp"
#include "slidepp/log.hpp"
#include "slidepp/numeric.hpp"
#include "slidepp/parallel.hpp"

namespace slidepp {

std::vector<std::string> ModelSpec::covariates() const {
  std::vector<std::string> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(t.covariate);
  return out;
}

// ---------------------------------------------------------------- quadrature

std::size_t QuadratureScheme::data_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const QuadratureNode& n) { return n.is_data; }));
}

double QuadratureScheme::total_weight() const {
  CompensatedSum s;
  for (const auto& n : nodes_) s += n.weight;
  return s.value();
}

namespace {

std::size_t tile_of(const GridGeometry& g, double spacing, std::size_t tiles_x, std::size_t tiles_y,
                    CellIndex cell) {
  const Point c = g.cell_center(cell.row, cell.col);
  auto tx = static_cast<std::size_t>(std::floor((c.x - g.origin_x()) / spacing));
  auto ty = static_cast<std::size_t>(std::floor((c.y - g.origin_y()) / spacing));
  tx = std::min(tx, tiles_x - 1);
  ty = std::min(ty, tiles_y - 1);
  return ty * tiles_x + tx;
}

}  // namespace

void QuadratureScheme::add_data(const PointPattern& pattern) {
  const auto& g = window_.geometry();
  std::vector<std::string> offending;
  for (const auto& p : pattern.points()) {
    auto cell = window_.locate_valid(p);
    if (!cell) {
      std::ostringstream os;
      os.precision(17);
      os << '(' << p.x << ", " << p.y << ')';
      offending.push_back(os.str());
      continue;
    }
    QuadratureNode node;
    node.location = p;
    node.cell = *cell;
    node.tile = tile_of(g, spacing_, tiles_x_, tiles_y_, *cell);
    node.is_data = true;
    nodes_.push_back(node);
  }
  if (!offending.empty()) {
    std::string msg = std::to_string(offending.size()) + " point(s) lie on cells with missing covariates:";
    const std::size_t shown = std::min<std::size_t>(offending.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) msg += " " + offending[i];
    if (shown < offending.size()) msg += " ...";
    throw DataError(msg);
  }
}

void QuadratureScheme::assign_weights() {
  std::vector<std::size_t> count(tile_area_.size(), 0);
  for (const auto& n : nodes_) ++count[n.tile];
  for (auto& n : nodes_) n.weight = tile_area_[n.tile] / static_cast<double>(count[n.tile]);
}

QuadratureScheme QuadratureScheme::with_pattern(const PointPattern& pattern) const {
  if (!(pattern.window().geometry() == window_.geometry())) {
    throw DataError("pattern grid does not match the quadrature grid");
  }
  QuadratureScheme q = *this;
  std::erase_if(q.nodes_, [](const QuadratureNode& n) { return n.is_data; });
  q.add_data(pattern);
  q.assign_weights();
  return q;
}

QuadratureScheme make_quadrature(const PointPattern& pattern, const CovariateStack& stack,
                                 double dummy_spacing) {
  const auto& g = stack.geometry();
  if (!(pattern.window().geometry() == g)) throw DataError("pattern grid does not match the covariate grid");
  if (!(dummy_spacing >= g.cell_size()) || !std::isfinite(dummy_spacing)) {
    throw ConfigError("dummy spacing must be at least the cell size");
  }
  QuadratureScheme q;
  q.window_ = stack.window().intersect(pattern.window());
  if (q.window_.empty()) throw DataError("quadrature window has no valid cells");
  q.spacing_ = dummy_spacing;
  q.tiles_x_ = static_cast<std::size_t>(std::max(1.0, std::ceil(g.width() / dummy_spacing)));
  q.tiles_y_ = static_cast<std::size_t>(std::max(1.0, std::ceil(g.height() / dummy_spacing)));
  const std::size_t n_tiles = q.tiles_x_ * q.tiles_y_;
  q.tile_area_.assign(n_tiles, 0.0);

  auto tile_center = [&](std::size_t t) {
    const double tx = static_cast<double>(t % q.tiles_x_);
    const double ty = static_cast<double>(t / q.tiles_x_);
    return Point{g.origin_x() + (tx + 0.5) * dummy_spacing, g.origin_y() + (ty + 0.5) * dummy_spacing};
  };

  // Valid area per tile, and the valid cell nearest each tile centre as a
  // fallback dummy location when the centre itself is unusable.
  std::vector<std::size_t> nearest(n_tiles, g.cell_count());
  std::vector<double> nearest_d2(n_tiles, 0.0);
  std::vector<CompensatedSum> area(n_tiles);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (!q.window_.valid(i)) continue;
    const CellIndex cell = g.cell(i);
    const std::size_t t = tile_of(g, dummy_spacing, q.tiles_x_, q.tiles_y_, cell);
    area[t] += g.cell_area();
    const Point c = g.cell_center(cell.row, cell.col);
    const Point tc = tile_center(t);
    const double d2 = (c.x - tc.x) * (c.x - tc.x) + (c.y - tc.y) * (c.y - tc.y);
    if (nearest[t] == g.cell_count() || d2 < nearest_d2[t]) {
      nearest[t] = i;
      nearest_d2[t] = d2;
    }
  }
  for (std::size_t t = 0; t < n_tiles; ++t) q.tile_area_[t] = area[t].value();

  for (std::size_t t = 0; t < n_tiles; ++t) {
    if (nearest[t] == g.cell_count()) continue;
    QuadratureNode node;
    node.tile = t;
    const Point tc = tile_center(t);
    // A centre on a cell edge (even cells per tile) is nudged into the cell on
    // alternating sides, so dummy covariate values carry no net offset.
    auto nudge = [&](double v, double origin, std::size_t parity) {
      const double f = (v - origin) / g.cell_size();
      if (f != std::round(f)) return v;
      return v + (parity % 2 == 0 ? -0.25 : 0.25) * g.cell_size();
    };
    const Point probe{nudge(tc.x, g.origin_x(), t % q.tiles_x_), nudge(tc.y, g.origin_y(), t / q.tiles_x_)};
    auto cell = q.window_.locate_valid(probe);
    if (cell && tile_of(g, dummy_spacing, q.tiles_x_, q.tiles_y_, *cell) == t) {
      node.location = tc;
      node.cell = *cell;
    } else {
      node.cell = g.cell(nearest[t]);
      node.location = g.cell_center(node.cell.row, node.cell.col);
    }
    q.nodes_.push_back(node);
  }
  q.add_data(pattern);
  q.assign_weights();
  return q;
}

// ---------------------------------------------------------------- fitting

gam::ColumnMap node_columns(const QuadratureScheme& quad, const CovariateStack& stack,
                            std::span<const std::string> names) {
  const auto& g = stack.geometry();
  gam::ColumnMap cols;
  for (const auto& name : names) {
    const auto& grid = stack.get(name);
    std::vector<double> v;
    v.reserve(quad.nodes().size());
    for (const auto& n : quad.nodes()) v.push_back(grid[g.index(n.cell.row, n.cell.col)]);
    cols.emplace(name, std::move(v));
  }
  return cols;
}

namespace {

void check_stack_has(const ModelSpec& spec, const CovariateStack& stack) {
  for (const auto& t : spec.terms) {
    if (!stack.contains(t.covariate)) {
      throw ConfigError("model '" + spec.name + "' uses covariate '" + t.covariate + "' missing from the stack");
    }
  }
}

gam::PoissonRows quadrature_rows(const QuadratureScheme& quad, Eigen::MatrixXd X) {
  gam::PoissonRows rows;
  const auto n = static_cast<Eigen::Index>(quad.nodes().size());
  rows.X = std::move(X);
  rows.y.resize(n);
  rows.w.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& node = quad.nodes()[static_cast<std::size_t>(i)];
    rows.w(i) = node.weight;
    rows.y(i) = node.is_data ? 1.0 / node.weight : 0.0;
  }
  return rows;
}

gam::ColumnMap columns_or_count(const QuadratureScheme& quad, const CovariateStack& stack,
                                const std::vector<std::string>& names) {
  gam::ColumnMap cols = node_columns(quad, stack, names);
  if (cols.empty()) {
    // Intercept-only designs still need the row count.
    cols.emplace("", std::vector<double>(quad.nodes().size(), 0.0));
  }
  return cols;
}

FitDiagnostics diagnostics_of(const gam::PirlsResult& r) {
  return {r.iterations, r.converged, r.penalized_loglik, r.loglik, r.edf, r.ubre, r.gradient_norm};
}

}  // namespace

double FittedModel::linear_predictor(std::span<const double> block_values) const {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(beta.size());
  if (!gam::design_row(blocks, block_values, row)) return std::numeric_limits<double>::quiet_NaN();
  return row.dot(beta);
}

FittedModel fit_model(const ModelSpec& spec, const PointPattern& pattern, const CovariateStack& stack,
                      const QuadratureScheme& quad, const FitOptions& options) {
  check_stack_has(spec, stack);
  if (!(quad.window().geometry() == stack.geometry())) {
    throw DataError("quadrature was built on a different grid than the covariate stack");
  }
  if (quad.data_count() != pattern.size()) {
    throw DataError("quadrature data nodes do not match the point pattern");
  }
  const auto names = spec.covariates();
  const gam::ColumnMap cols = columns_or_count(quad, stack, names);

  FittedModel model;
  model.spec = spec;
  model.blocks = gam::make_design(spec.terms, cols);
  gam::PoissonRows rows = quadrature_rows(quad, gam::design_matrix(model.blocks, cols));
  const gam::PirlsResult r = gam::pirls_fit(model.blocks, rows, options.gammas, options.pirls);
  if (!r.converged) warn("fit of model '" + spec.name + "' did not converge");
  model.beta = r.beta;
  model.gammas = r.gammas;
  model.diagnostics = diagnostics_of(r);
  model.training_geometry = stack.geometry();
  model.training_points = pattern.size();
  for (const auto& name : names) {
    const auto& v = cols.at(name);
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    model.training_ranges[name] = Range{*lo, *hi};
  }
  return model;
}

FittedModel refit_coefficients(const FittedModel& model, const QuadratureScheme& quad,
                               const CovariateStack& stack) {
  check_stack_has(model.spec, stack);
  const auto names = model.spec.covariates();
  const gam::ColumnMap cols = columns_or_count(quad, stack, names);
  gam::PoissonRows rows = quadrature_rows(quad, gam::design_matrix(model.blocks, cols));
  const gam::PirlsResult r = gam::pirls_fit(model.blocks, rows, gam::GammaChoice::fixed(model.gammas));
  FittedModel out = model;
  out.beta = r.beta;
  out.diagnostics = diagnostics_of(r);
  out.training_points = quad.data_count();
  return out;
}

// ---------------------------------------------------------------- prediction

IntensityMap predict_intensity(const FittedModel& model, const CovariateStack& stack, int threads) {
  check_stack_has(model.spec, stack);
  const auto& g = stack.geometry();
  std::vector<const RasterGrid*> grids(model.blocks.size(), nullptr);
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    if (model.blocks[b].kind != gam::TermKind::intercept) grids[b] = &stack.get(model.blocks[b].covariate);
  }
  IntensityMap out(g);
  parallel_for(g.n_rows(), threads, [&](std::size_t r) {
    std::vector<double> values(model.blocks.size(), 0.0);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(model.beta.size());
    for (std::size_t c = 0; c < g.n_cols(); ++c) {
      const std::size_t idx = g.index(r, c);
      for (std::size_t b = 0; b < grids.size(); ++b) values[b] = grids[b] ? (*grids[b])[idx] : 0.0;
      if (gam::design_row(model.blocks, values, row)) out[idx] = std::exp(row.dot(model.beta));
    }
  });
  return out;
}

LoglikResult loglik(const IntensityMap& intensity, const PointPattern& pattern, const Window& mask) {
  const auto& g = intensity.geometry();
  if (!(mask.geometry() == g) || !(pattern.window().geometry() == g)) {
    throw DataError("intensity, pattern and mask grids differ");
  }
  LoglikResult out;
  CompensatedSum integral;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (!mask.valid(i)) continue;
    if (!intensity.valid(i)) throw DataError("mask includes a cell where the intensity is undefined");
    integral += intensity[i] * g.cell_area();
    ++out.cells;
  }
  CompensatedSum points;
  for (const auto& p : pattern.points()) {
    auto cell = mask.locate_valid(p);
    if (!cell) {
      ++out.points_excluded;
      continue;
    }
    points += std::log(intensity.at(cell->row, cell->col));
    ++out.points_used;
  }
  out.value = points.value() - integral.value();
  return out;
}

LoglikResult loglik(const FittedModel& model, const PointPattern& pattern, const CovariateStack& stack,
                    const Window& mask) {
  return loglik(predict_intensity(model, stack), pattern, mask);
}

Window in_range_mask_for(const FittedModel& model, const CovariateStack& stack) {
  check_stack_has(model.spec, stack);
  std::map<std::string, Range> ranges;
  for (const auto& name : model.spec.covariates()) ranges[name] = model.training_ranges.at(name);
  Window mask = range_mask(stack, ranges);
  std::vector<std::uint8_t> cells(mask.mask().begin(), mask.mask().end());
  for (const auto& b : model.blocks) {
    if (b.kind != gam::TermKind::categorical) continue;
    const auto& grid = stack.get(b.covariate);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i] && std::find(b.levels.begin(), b.levels.end(), grid[i]) == b.levels.end()) cells[i] = 0;
    }
  }
  return Window(stack.geometry(), std::move(cells));
}

SelectionResult select_model(std::span<const FittedModel> models, const PointPattern& pattern,
                             const CovariateStack& stack) {
  if (models.size() < 2) throw ConfigError("model selection needs at least two models");
  SelectionResult out;
  out.common_mask = Window(stack.geometry());
  for (const auto& m : models) out.common_mask = out.common_mask.intersect(in_range_mask_for(m, stack));
  if (out.common_mask.empty()) {
    throw DataError("the in-range masks of the candidate models do not intersect; "
                    "inspect the covariate ranges of the training and validation areas");
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    const LoglikResult ll = loglik(models[i], pattern, stack, out.common_mask);
    out.ranking.push_back({i, models[i].spec.name, ll.value, models[i].term_count(), ll.points_used,
                           ll.points_excluded});
  }
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [](const RankedModel& a, const RankedModel& b) {
    if (a.loglik != b.loglik) return a.loglik > b.loglik;
    return a.term_count < b.term_count;
  });
  return out;
}

// ---------------------------------------------------------------- specs

ModelSpec parse_model_spec(const std::string& name, const std::string& terms) {
  ModelSpec spec;
  spec.name = name;
  std::stringstream ss(terms);
  std::string item;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream is(item);
    std::string part;
    while (std::getline(is, part, ':')) parts.push_back(trim(part));
    if (parts.size() < 2 || parts.size() > 3 || parts[0].empty()) {
      throw ConfigError("model '" + name + "': term '" + item + "' must be covariate:kind[:basis_dim]");
    }
    gam::TermSpec t;
    t.covariate = parts[0];
    t.kind = gam::term_kind_from_string(parts[1]);
    if (t.kind == gam::TermKind::intercept) throw ConfigError("the intercept is implicit in model specs");
    if (parts.size() == 3) {
      if (t.kind != gam::TermKind::smooth) throw ConfigError("basis dimension is only valid for smooth terms");
      try {
        t.basis_dim = std::stoi(parts[2]);
      } catch (const std::exception&) {
        throw ConfigError("model '" + name + "': bad basis dimension '" + parts[2] + "'");
      }
    }
    spec.terms.push_back(t);
  }
  std::set<std::string> seen;
  for (const auto& t : spec.terms) {
    if (!seen.insert(t.covariate).second) {
      throw ConfigError("model '" + name + "' lists covariate '" + t.covariate + "' twice");
    }
  }
  return spec;
}

std::string format_model_terms(const ModelSpec& spec) {
  std::string out;
  for (const auto& t : spec.terms) {
    if (!out.empty()) out += ", ";
    out += t.covariate + ":" + gam::to_string(t.kind);
    if (t.kind == gam::TermKind::smooth) out += ":" + std::to_string(t.basis_dim);
  }
  return out;
}

}  // namespace slidepp
