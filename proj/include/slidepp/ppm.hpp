#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slidepp/gamcore.hpp"
#include "slidepp/raster.hpp"

namespace slidepp {

// Intercept plus one term per covariate.
struct ModelSpec {
  std::string name;
  std::vector<gam::TermSpec> terms;

  std::vector<std::string> covariates() const;
  bool operator==(const ModelSpec&) const = default;
};

// Intensity surface in points per square metre.
using IntensityMap = RasterGrid;

struct QuadratureNode {
  Point location;
  CellIndex cell;
  std::size_t tile = 0;
  double weight = 0.0;
  bool is_data = false;
};

// Dummy-plus-data quadrature for the point-process likelihood. The window is
// split into dummy_spacing squares ("tiles"); every tile with valid area gets
// one dummy node, and the nodes of a tile share its valid area equally.
class QuadratureScheme {
 public:
  const Window& window() const { return window_; }
  double dummy_spacing() const { return spacing_; }
  std::span<const QuadratureNode> nodes() const { return nodes_; }
  std::size_t data_count() const;
  std::size_t dummy_count() const { return nodes_.size() - data_count(); }
  double total_weight() const;

  // Same dummy nodes, data nodes taken from another pattern on the same window.
  QuadratureScheme with_pattern(const PointPattern& pattern) const;

 private:
  friend QuadratureScheme make_quadrature(const PointPattern&, const CovariateStack&, double);
  void add_data(const PointPattern& pattern);
  void assign_weights();

  Window window_;
  double spacing_ = 0.0;
  std::size_t tiles_x_ = 0;
  std::size_t tiles_y_ = 0;
  std::vector<double> tile_area_;
  std::vector<QuadratureNode> nodes_;
};

// Throws DataError listing any pattern point that falls on a cell where some
// stack covariate is NODATA.
QuadratureScheme make_quadrature(const PointPattern& pattern, const CovariateStack& stack,
                                 double dummy_spacing = 50.0);

struct FitDiagnostics {
  int iterations = 0;
  bool converged = false;
  double penalized_loglik = 0.0;
  double loglik = 0.0;
  double edf = 0.0;
  double ubre = 0.0;
  double gradient_norm = 0.0;
};

struct FittedModel {
  ModelSpec spec;
  std::vector<gam::DesignBlock> blocks;
  Eigen::VectorXd beta;
  std::vector<double> gammas;
  std::map<std::string, Range> training_ranges;
  GridGeometry training_geometry;
  std::size_t training_points = 0;
  FitDiagnostics diagnostics;

  std::size_t term_count() const { return spec.terms.size(); }
  // Linear predictor for per-block covariate values; NaN if not predictable.
  double linear_predictor(std::span<const double> block_values) const;
};

struct FitOptions {
  gam::GammaChoice gammas = gam::GammaChoice::automatic_selection();
  gam::PirlsOptions pirls;
};

FittedModel fit_model(const ModelSpec& spec, const PointPattern& pattern, const CovariateStack& stack,
                      const QuadratureScheme& quad, const FitOptions& options = {});

// Re-estimates coefficients on a new quadrature while keeping the model's
// bases, centring and smoothing parameters.
FittedModel refit_coefficients(const FittedModel& model, const QuadratureScheme& quad,
                               const CovariateStack& stack);

// Covariate columns over quadrature nodes.
gam::ColumnMap node_columns(const QuadratureScheme& quad, const CovariateStack& stack,
                            std::span<const std::string> names);

IntensityMap predict_intensity(const FittedModel& model, const CovariateStack& stack, int threads = 1);

struct LoglikResult {
  double value = 0.0;
  std::size_t points_used = 0;
  std::size_t points_excluded = 0;  // points on cells outside the mask
  std::size_t cells = 0;
};

// sum over points in mask of log lambda - sum over mask cells of lambda * area.
LoglikResult loglik(const FittedModel& model, const PointPattern& pattern, const CovariateStack& stack,
                    const Window& mask);
LoglikResult loglik(const IntensityMap& intensity, const PointPattern& pattern, const Window& mask);

// Cells where every model covariate lies inside its training range (and
// categorical values are training levels).
Window in_range_mask_for(const FittedModel& model, const CovariateStack& stack);

struct RankedModel {
  std::size_t input_index = 0;
  std::string name;
  double loglik = 0.0;
  std::size_t term_count = 0;
  std::size_t points_used = 0;
  std::size_t points_excluded = 0;
};

struct SelectionResult {
  Window common_mask;
  std::vector<RankedModel> ranking;  // best first
};

SelectionResult select_model(std::span<const FittedModel> models, const PointPattern& pattern,
                             const CovariateStack& stack);

// Versioned JSON model document.
std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text);
void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

// Compact term list, e.g. "slope:smooth, dtm:smooth:8, twi_b:categorical".
// An empty list is the homogeneous (intercept-only) model.
ModelSpec parse_model_spec(const std::string& name, const std::string& terms);
std::string format_model_terms(const ModelSpec& spec);

}  // namespace slidepp
