#include <algorithm>
#include <cmath>

#include "slidepp/error.hpp"
#include "slidepp/gamcore.hpp"

namespace slidepp::gam {

SplineBasis::SplineBasis(std::string covariate, std::vector<double> knots)
    : covariate_(std::move(covariate)), knots_(std::move(knots)) {
  const auto k = static_cast<Eigen::Index>(knots_.size());
  if (k < 3) throw ConfigError("spline basis for '" + covariate_ + "' needs at least 3 knots");
  for (Eigen::Index j = 0; j + 1 < k; ++j) {
    if (!(knots_[j] < knots_[j + 1]) || !std::isfinite(knots_[j])) {
      throw ConfigError("spline knots for '" + covariate_ + "' must be finite and strictly increasing");
    }
  }

  // Interior second derivatives solve B delta = D beta (natural spline).
  const Eigen::Index m = k - 2;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m, k);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double h0 = knots_[i + 1] - knots_[i];
    const double h1 = knots_[i + 2] - knots_[i + 1];
    D(i, i) = 1.0 / h0;
    D(i, i + 1) = -1.0 / h0 - 1.0 / h1;
    D(i, i + 2) = 1.0 / h1;
    B(i, i) = (h0 + h1) / 3.0;
    if (i + 1 < m) {
      B(i, i + 1) = h1 / 6.0;
      B(i + 1, i) = h1 / 6.0;
    }
  }
  curvature_ = Eigen::MatrixXd::Zero(k, k);
  curvature_.middleRows(1, m) = B.ldlt().solve(D);
}

Eigen::VectorXd SplineBasis::row(double x) const {
  const auto k = static_cast<Eigen::Index>(knots_.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
  const auto& F = curvature_;

  auto interval_row = [&](Eigen::Index j, double t) {
    const double x0 = knots_[j];
    const double x1 = knots_[j + 1];
    const double h = x1 - x0;
    const double am = (x1 - t) / h;
    const double ap = (t - x0) / h;
    const double cm = ((x1 - t) * (x1 - t) * (x1 - t) / h - h * (x1 - t)) / 6.0;
    const double cp = ((t - x0) * (t - x0) * (t - x0) / h - h * (t - x0)) / 6.0;
    Eigen::VectorXd r = cm * F.row(j).transpose() + cp * F.row(j + 1).transpose();
    r(j) += am;
    r(j + 1) += ap;
    return r;
  };

  if (x < knots_.front()) {
    // value + slope * (x - x0) at the left end; natural end => delta_0 = 0.
    const double h = knots_[1] - knots_[0];
    Eigen::VectorXd slope = -(h / 3.0) * F.row(0).transpose() - (h / 6.0) * F.row(1).transpose();
    slope(0) -= 1.0 / h;
    slope(1) += 1.0 / h;
    Eigen::VectorXd value = Eigen::VectorXd::Zero(k);
    value(0) = 1.0;
    return value + slope * (x - knots_.front());
  }
  if (x > knots_.back()) {
    const Eigen::Index j = k - 2;
    const double h = knots_[j + 1] - knots_[j];
    Eigen::VectorXd slope = (h / 6.0) * F.row(j).transpose() + (h / 3.0) * F.row(j + 1).transpose();
    slope(j) -= 1.0 / h;
    slope(j + 1) += 1.0 / h;
    Eigen::VectorXd value = Eigen::VectorXd::Zero(k);
    value(k - 1) = 1.0;
    return value + slope * (x - knots_.back());
  }
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  auto j = static_cast<Eigen::Index>(it - knots_.begin()) - 1;
  j = std::clamp<Eigen::Index>(j, 0, k - 2);
  out = interval_row(j, x);
  return out;
}

SplineBasis build_basis(const std::string& covariate, std::span<const double> values, int k) {
  if (k < 3) throw ConfigError("basis dimension for '" + covariate + "' must be at least 3");
  std::vector<double> u;
  u.reserve(values.size());
  for (double v : values) {
    if (std::isfinite(v)) u.push_back(v);
  }
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  if (u.size() < static_cast<std::size_t>(k)) {
    throw DataError("covariate '" + covariate + "' has " + std::to_string(u.size()) +
                    " distinct values, fewer than basis dimension " + std::to_string(k));
  }
  std::vector<double> knots(static_cast<std::size_t>(k));
  const double n1 = static_cast<double>(u.size() - 1);
  for (int j = 0; j < k; ++j) {
    const double pos = n1 * static_cast<double>(j) / static_cast<double>(k - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    knots[j] = lo + 1 < u.size() ? u[lo] + frac * (u[lo + 1] - u[lo]) : u[lo];
  }
  knots.front() = u.front();
  knots.back() = u.back();
  return SplineBasis(covariate, std::move(knots));
}

Eigen::MatrixXd penalty_matrix(const SplineBasis& basis) {
  // Second derivatives are linear between knots, so the integral of their
  // product over [x_j, x_j+1] is h/6 (2 u_j v_j + u_j v_j+1 + u_j+1 v_j + 2 u_j+1 v_j+1).
  const auto& x = basis.knots();
  const auto k = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index j = 0; j + 1 < k; ++j) {
    const double h = x[j + 1] - x[j];
    M(j, j) += h / 3.0;
    M(j + 1, j + 1) += h / 3.0;
    M(j, j + 1) += h / 6.0;
    M(j + 1, j) += h / 6.0;
  }
  const auto& F = basis.knot_curvature();
  Eigen::MatrixXd S = F.transpose() * M * F;
  return 0.5 * (S + S.transpose());
}

double roughness(const SplineBasis& basis, const Eigen::VectorXd& coefs) {
  const auto& x = basis.knots();
  const auto k = static_cast<Eigen::Index>(x.size());
  if (coefs.size() != k) throw ConfigError("coefficient vector length does not match basis");
  const Eigen::Index m = k - 2;
  Eigen::VectorXd d(m);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, m);
  bool flat = true;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double h0 = x[i + 1] - x[i];
    const double h1 = x[i + 2] - x[i + 1];
    d(i) = (coefs(i + 2) - coefs(i + 1)) / h1 - (coefs(i + 1) - coefs(i)) / h0;
    flat = flat && d(i) == 0.0;
    B(i, i) = (h0 + h1) / 3.0;
    if (i + 1 < m) B(i, i + 1) = B(i + 1, i) = h1 / 6.0;
  }
  if (flat) return 0.0;
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(k);
  delta.segment(1, m) = B.ldlt().solve(d);
  long double total = 0.0L;
  for (Eigen::Index j = 0; j + 1 < k; ++j) {
    const double h = x[j + 1] - x[j];
    total += h / 6.0 * (2.0 * delta(j) * delta(j) + 2.0 * delta(j) * delta(j + 1) + 2.0 * delta(j + 1) * delta(j + 1));
  }
  return static_cast<double>(total);
}

double evaluate_smooth(const SplineBasis& basis, const Eigen::VectorXd& coefs, double x) {
  if (coefs.size() != basis.dim()) throw ConfigError("coefficient vector length does not match basis");
  return basis.row(x).dot(coefs);
}

}  // namespace slidepp::gam
