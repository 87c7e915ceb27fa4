#include <algorithm>
#include <cmath>
#include <set>

#include "slidepp/error.hpp"
#include "slidepp/gamcore.hpp"

namespace slidepp::gam {

const char* to_string(TermKind kind) {
  switch (kind) {
    case TermKind::intercept: return "intercept";
    case TermKind::linear: return "linear";
    case TermKind::smooth: return "smooth";
    case TermKind::categorical: return "categorical";
  }
  return "?";
}

TermKind term_kind_from_string(const std::string& s) {
  if (s == "intercept") return TermKind::intercept;
  if (s == "linear") return TermKind::linear;
  if (s == "smooth") return TermKind::smooth;
  if (s == "categorical") return TermKind::categorical;
  throw ConfigError("unknown term kind '" + s + "'");
}

std::string DesignBlock::label() const {
  if (kind == TermKind::intercept) return "intercept";
  return std::string(to_string(kind)) + "(" + covariate + ")";
}

namespace {

const std::vector<double>& column_for(const ColumnMap& columns, const std::string& name) {
  auto it = columns.find(name);
  if (it == columns.end()) throw ConfigError("no column for covariate '" + name + "'");
  return it->second;
}

void scale_penalty(DesignBlock& block, const Eigen::MatrixXd& centred) {
  const double s_norm = block.penalty.norm();
  const auto n = static_cast<double>(std::max<Eigen::Index>(centred.rows(), 1));
  const double x_norm = centred.squaredNorm() / n;
  block.penalty_scale = (s_norm > 0.0 && x_norm > 0.0) ? x_norm / s_norm : 1.0;
  block.penalty *= block.penalty_scale;
}

}  // namespace

void attach_penalty(DesignBlock& block) {
  if (block.kind != TermKind::smooth || !block.basis) return;
  const auto k = block.basis->dim();
  block.penalty = penalty_matrix(*block.basis).topLeftCorner(k - 1, k - 1) * block.penalty_scale;
}

std::vector<DesignBlock> make_design(std::span<const TermSpec> terms, const ColumnMap& training) {
  std::set<std::string> seen;
  for (const auto& t : terms) {
    if (t.kind == TermKind::intercept) throw ConfigError("the intercept is implicit; do not list it as a term");
    if (!seen.insert(t.covariate).second) {
      throw ConfigError("covariate '" + t.covariate + "' appears in more than one term");
    }
  }
  std::vector<DesignBlock> blocks;
  DesignBlock intercept;
  intercept.kind = TermKind::intercept;
  intercept.first_col = 0;
  intercept.n_cols = 1;
  blocks.push_back(intercept);
  Eigen::Index col = 1;

  for (const auto& t : terms) {
    const auto& values = column_for(training, t.covariate);
    for (double v : values) {
      if (!std::isfinite(v)) throw DataError("training column '" + t.covariate + "' has missing values");
    }
    DesignBlock b;
    b.kind = t.kind;
    b.covariate = t.covariate;
    b.first_col = col;
    switch (t.kind) {
      case TermKind::linear:
        b.n_cols = 1;
        break;
      case TermKind::smooth: {
        SplineBasis basis = build_basis(t.covariate, values, t.basis_dim);
        const int k = basis.dim();
        Eigen::MatrixXd raw(static_cast<Eigen::Index>(values.size()), k);
        for (std::size_t i = 0; i < values.size(); ++i) raw.row(static_cast<Eigen::Index>(i)) = basis.row(values[i]).transpose();
        b.basis_means = values.empty() ? Eigen::VectorXd::Zero(k) : Eigen::VectorXd(raw.colwise().mean().transpose());
        raw.rowwise() -= b.basis_means.transpose();
        b.n_cols = k - 1;
        b.basis = std::move(basis);
        b.penalty_scale = 1.0;
        attach_penalty(b);
        scale_penalty(b, raw.leftCols(k - 1));
        break;
      }
      case TermKind::categorical: {
        std::set<double> levels(values.begin(), values.end());
        b.levels.assign(levels.begin(), levels.end());
        if (b.levels.size() < 2) {
          throw DataError("categorical term '" + t.covariate + "' has fewer than two levels in training data");
        }
        b.n_cols = static_cast<Eigen::Index>(b.levels.size()) - 1;
        break;
      }
      case TermKind::intercept:
        break;
    }
    col += b.n_cols;
    blocks.push_back(std::move(b));
  }
  return blocks;
}

Eigen::Index design_width(std::span<const DesignBlock> blocks) {
  Eigen::Index w = 0;
  for (const auto& b : blocks) w = std::max(w, b.first_col + b.n_cols);
  return w;
}

bool design_row(std::span<const DesignBlock> blocks, std::span<const double> values,
                RowRef out) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.kind == TermKind::intercept) {
      out(b.first_col) = 1.0;
      continue;
    }
    const double v = values[i];
    if (!std::isfinite(v)) return false;
    switch (b.kind) {
      case TermKind::linear:
        out(b.first_col) = v;
        break;
      case TermKind::smooth: {
        Eigen::VectorXd r = b.basis->row(v);
        out.segment(b.first_col, b.n_cols) =
            (r.head(b.n_cols) - b.basis_means.head(b.n_cols)).transpose();
        break;
      }
      case TermKind::categorical: {
        auto it = std::find(b.levels.begin(), b.levels.end(), v);
        if (it == b.levels.end()) return false;
        out.segment(b.first_col, b.n_cols).setZero();
        const auto level = it - b.levels.begin();
        if (level > 0) out(b.first_col + level - 1) = 1.0;
        break;
      }
      case TermKind::intercept:
        break;
    }
  }
  return true;
}

Eigen::MatrixXd design_matrix(std::span<const DesignBlock> blocks, const ColumnMap& columns) {
  std::vector<const std::vector<double>*> cols(blocks.size(), nullptr);
  std::size_t n = 0;
  bool have_n = false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].kind == TermKind::intercept) continue;
    cols[i] = &column_for(columns, blocks[i].covariate);
    if (have_n && cols[i]->size() != n) throw DataError("design columns differ in length");
    n = cols[i]->size();
    have_n = true;
  }
  if (!have_n) {
    if (columns.empty()) throw ConfigError("cannot infer row count for an intercept-only design");
    n = columns.begin()->second.size();
  }
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), design_width(blocks));
  std::vector<double> values(blocks.size(), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < blocks.size(); ++i) values[i] = cols[i] ? (*cols[i])[r] : 0.0;
    if (!design_row(blocks, values, X.row(static_cast<Eigen::Index>(r)))) {
      throw DataError("row " + std::to_string(r) + " has a missing covariate or unseen level");
    }
  }
  return X;
}

Eigen::VectorXd smooth_coefficients(const DesignBlock& block, const Eigen::VectorXd& beta) {
  if (block.kind != TermKind::smooth) throw ConfigError(block.label() + " is not a smooth term");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(block.n_cols + 1);
  c.head(block.n_cols) = beta.segment(block.first_col, block.n_cols);
  return c;
}

double smooth_effect(const DesignBlock& block, const Eigen::VectorXd& beta, double x) {
  Eigen::VectorXd c = smooth_coefficients(block, beta);
  return evaluate_smooth(*block.basis, c, x) - c.dot(block.basis_means);
}

double block_curvature(const DesignBlock& block, const Eigen::VectorXd& beta) {
  if (!block.penalized()) return 0.0;
  Eigen::VectorXd b = beta.segment(block.first_col, block.n_cols);
  return b.dot(block.penalty * b);
}

std::size_t smooth_count(std::span<const DesignBlock> blocks) {
  return static_cast<std::size_t>(
      std::count_if(blocks.begin(), blocks.end(), [](const DesignBlock& b) { return b.penalized(); }));
}

}  // namespace slidepp::gam
