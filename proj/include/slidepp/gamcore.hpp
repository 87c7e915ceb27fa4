#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace slidepp::gam {

// Cubic regression spline parameterised by its values at the knots, with
// natural end conditions (zero second derivative at the boundary knots).
class SplineBasis {
 public:
  SplineBasis(std::string covariate, std::vector<double> knots);

  const std::string& covariate() const { return covariate_; }
  const std::vector<double>& knots() const { return knots_; }
  int dim() const { return static_cast<int>(knots_.size()); }

  // Basis functions evaluated at x. Beyond the boundary knots each function
  // continues linearly with its boundary value and slope.
  Eigen::VectorXd row(double x) const;

  // (j, a) = second derivative of basis function a at knot j.
  const Eigen::MatrixXd& knot_curvature() const { return curvature_; }

 private:
  std::string covariate_;
  std::vector<double> knots_;
  Eigen::MatrixXd curvature_;
};

// Knots at equally spaced quantiles of the distinct sample values; the end
// knots are the sample min and max.
SplineBasis build_basis(const std::string& covariate, std::span<const double> values, int k = 10);

// S(a, b) = integral of B_a'' B_b'' over the knot span.
Eigen::MatrixXd penalty_matrix(const SplineBasis& basis);

// Integral of f''^2 for the spline with knot values `coefs`, computed from the
// second divided differences (zero whenever they vanish exactly).
double roughness(const SplineBasis& basis, const Eigen::VectorXd& coefs);

double evaluate_smooth(const SplineBasis& basis, const Eigen::VectorXd& coefs, double x);

enum class TermKind { intercept, linear, smooth, categorical };

const char* to_string(TermKind kind);
TermKind term_kind_from_string(const std::string& s);

struct TermSpec {
  std::string covariate;
  TermKind kind = TermKind::linear;
  int basis_dim = 10;  // smooth terms only
  bool operator==(const TermSpec&) const = default;
};

// A contiguous group of design columns belonging to one model term.
//
// Smooth blocks are centred on their training rows and drop the last basis
// column, so the raw coefficient vector is (beta_block, 0) and the effect is
// f(x) = sum_a c_a B_a(x) - c . basis_means, which sums to zero over the
// training rows. `penalty` is the matching corner of penalty_matrix() times
// `penalty_scale`, a normalisation that puts smoothing parameters on a
// data-relative scale.
struct DesignBlock {
  TermKind kind = TermKind::intercept;
  std::string covariate;
  Eigen::Index first_col = 0;
  Eigen::Index n_cols = 0;
  std::optional<SplineBasis> basis;
  Eigen::VectorXd basis_means;
  double penalty_scale = 1.0;
  Eigen::MatrixXd penalty;
  std::vector<double> levels;  // categorical codes; levels[0] is the reference

  bool penalized() const { return kind == TermKind::smooth; }
  std::string label() const;
};

using ColumnMap = std::map<std::string, std::vector<double>>;
using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

// Lays out an intercept block followed by one block per term, fitting bases,
// centring and categorical levels from the training columns.
std::vector<DesignBlock> make_design(std::span<const TermSpec> terms, const ColumnMap& training);

Eigen::Index design_width(std::span<const DesignBlock> blocks);

// Rebuilds a smooth block's penalty from its basis (used after
// deserialisation).
void attach_penalty(DesignBlock& block);

// One design row from per-block covariate values (values[b] is ignored for
// the intercept). Returns false when a value is NODATA or a categorical level
// was not seen in training.
bool design_row(std::span<const DesignBlock> blocks, std::span<const double> values,
                RowRef out);

// Design matrix for whole columns; throws DataError on missing values.
Eigen::MatrixXd design_matrix(std::span<const DesignBlock> blocks, const ColumnMap& columns);

// Full-length spline coefficients for a smooth block (last entry zero).
Eigen::VectorXd smooth_coefficients(const DesignBlock& block, const Eigen::VectorXd& beta);

// Centred contribution of a smooth block at covariate value x.
double smooth_effect(const DesignBlock& block, const Eigen::VectorXd& beta, double x);

// beta_j' S_j beta_j for one penalised block.
double block_curvature(const DesignBlock& block, const Eigen::VectorXd& beta);

// Weighted Poisson rows (quadrature form): response y, prior weight w.
struct PoissonRows {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd w;
};

struct GammaChoice {
  bool automatic = true;
  std::vector<double> values;  // one per smooth block when fixed

  static GammaChoice automatic_selection() { return {}; }
  static GammaChoice fixed(std::vector<double> v) { return {false, std::move(v)}; }
};

struct PirlsOptions {
  double rel_tol = 1e-8;
  int max_iter = 200;
  double log10_gamma_min = -8.0;
  double log10_gamma_max = 8.0;
  int grid_points = 33;
  double golden_tol = 0.02;  // in log10(gamma)
  int sweeps = 2;
};

struct PirlsTrace {
  double penalized_loglik;
  double loglik;
};

struct PirlsResult {
  Eigen::VectorXd beta;
  std::vector<double> gammas;
  bool converged = false;
  int iterations = 0;
  double penalized_loglik = 0.0;
  double loglik = 0.0;
  double edf = 0.0;
  double ubre = 0.0;
  double gradient_norm = 0.0;
  std::vector<PirlsTrace> trace;  // accepted iterates of the final fit
};

// Maximises sum_i w_i (y_i eta_i - exp(eta_i)) - 1/2 sum_j gamma_j b_j' S_j b_j
// with eta = X beta. Automatic smoothing parameters minimise the UBRE score
// (scale fixed at 1) by coordinate-wise log-grid search plus golden-section
// refinement.
PirlsResult pirls_fit(std::span<const DesignBlock> blocks, const PoissonRows& rows,
                      const GammaChoice& gammas, const PirlsOptions& options = {});

double penalized_objective(std::span<const DesignBlock> blocks, const PoissonRows& rows,
                           const Eigen::VectorXd& beta, std::span<const double> gammas);

Eigen::VectorXd penalized_gradient(std::span<const DesignBlock> blocks, const PoissonRows& rows,
                                   const Eigen::VectorXd& beta, std::span<const double> gammas);

std::size_t smooth_count(std::span<const DesignBlock> blocks);

}  // namespace slidepp::gam
