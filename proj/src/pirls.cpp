#include <algorithm>
#include <cmath>
#include <limits>

#include "slidepp/error.hpp"
#include "slidepp/gamcore.hpp"

namespace slidepp::gam {
namespace {

Eigen::MatrixXd total_penalty(std::span<const DesignBlock> blocks, std::span<const double> gammas,
                              Eigen::Index p) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
  std::size_t j = 0;
  for (const auto& b : blocks) {
    if (!b.penalized()) continue;
    S.block(b.first_col, b.first_col, b.n_cols, b.n_cols) += gammas[j] * b.penalty;
    ++j;
  }
  return S;
}

void check_gammas(std::span<const DesignBlock> blocks, std::span<const double> gammas) {
  if (gammas.size() != smooth_count(blocks)) {
    throw ConfigError("expected " + std::to_string(smooth_count(blocks)) + " smoothing parameters, got " +
                      std::to_string(gammas.size()));
  }
  for (double g : gammas) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("smoothing parameters must be finite and >= 0");
  }
}

double poisson_loglik(const PoissonRows& rows, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    ll += rows.w(i) * (rows.y(i) * eta(i) - std::exp(eta(i)));
  }
  return ll;
}

// Solves H x = g with symmetric diagonal scaling.
Eigen::VectorXd scaled_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g) {
  const Eigen::Index p = H.rows();
  Eigen::VectorXd d(p);
  for (Eigen::Index i = 0; i < p; ++i) d(i) = H(i, i) > 0.0 ? 1.0 / std::sqrt(H(i, i)) : 1.0;
  Eigen::MatrixXd Hs = d.asDiagonal() * H * d.asDiagonal();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Hs);
  Eigen::VectorXd x = ldlt.solve(d.asDiagonal() * g);
  if (ldlt.info() != Eigen::Success || !x.allFinite()) {
    Hs.diagonal().array() += 1e-10;
    x = Hs.ldlt().solve(d.asDiagonal() * g);
  }
  // Two refinement passes; large smoothing parameters make Hs ill-conditioned.
  for (int r = 0; r < 2; ++r) x += ldlt.solve(d.asDiagonal() * g - Hs * x);
  return d.asDiagonal() * x;
}

Eigen::MatrixXd weighted_crossprod(const Eigen::MatrixXd& X, const Eigen::VectorXd& v) {
  Eigen::MatrixXd Xw = X.array().colwise() * v.array().sqrt();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(X.cols(), X.cols());
  H.selfadjointView<Eigen::Lower>().rankUpdate(Xw.transpose());
  return H.selfadjointView<Eigen::Lower>();
}

struct FixedFit {
  Eigen::VectorXd beta;
  double penalized = 0.0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<PirlsTrace> trace;
};

FixedFit fit_fixed(const PoissonRows& rows, const Eigen::MatrixXd& S, Eigen::VectorXd beta,
                   const PirlsOptions& opt) {
  FixedFit fit;
  Eigen::VectorXd eta = rows.X * beta;
  double ll = poisson_loglik(rows, eta);
  double pen = ll - 0.5 * beta.dot(S * beta);
  if (!std::isfinite(pen)) {
    // Fall back to a flat start when the warm start overflows.
    beta.setZero();
    eta = rows.X * beta;
    ll = poisson_loglik(rows, eta);
    pen = ll;
  }
  fit.trace.push_back({pen, ll});

  for (int it = 1; it <= opt.max_iter; ++it) {
    fit.iterations = it;
    Eigen::VectorXd mu = eta.array().exp();
    Eigen::VectorXd g = rows.X.transpose() * (rows.w.array() * (rows.y - mu).array()).matrix() - S * beta;
    Eigen::MatrixXd H = weighted_crossprod(rows.X, (rows.w.array() * mu.array()).matrix()) + S;
    Eigen::VectorXd delta = scaled_solve(H, g);
    const double decrement = g.dot(delta);
    const double scale = std::abs(pen) + 0.1;

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial_beta, trial_eta;
    double trial_ll = 0.0, trial_pen = 0.0;
    for (int halving = 0; halving < 50; ++halving) {
      trial_beta = beta + step * delta;
      trial_eta = rows.X * trial_beta;
      trial_ll = poisson_loglik(rows, trial_eta);
      trial_pen = trial_ll - 0.5 * trial_beta.dot(S * trial_beta);
      if (std::isfinite(trial_pen) && trial_pen > pen) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No representable ascent step left. With stiff penalties the gradient
      // itself is only accurate to a few digits, so the decrement is judged
      // against a precision-limited tolerance.
      fit.converged = 0.5 * std::abs(decrement) <= std::sqrt(opt.rel_tol) * scale;
      break;
    }
    const double change = trial_pen - pen;
    beta = std::move(trial_beta);
    eta = std::move(trial_eta);
    ll = trial_ll;
    pen = trial_pen;
    fit.trace.push_back({pen, ll});
    if (change <= opt.rel_tol * (std::abs(pen) + 0.1) &&
        (step == 1.0 || 0.5 * std::abs(decrement) <= opt.rel_tol * scale)) {
      fit.converged = true;
      break;
    }
  }
  fit.beta = std::move(beta);
  fit.penalized = pen;
  fit.loglik = ll;
  return fit;
}

struct Scored {
  FixedFit fit;
  double edf = 0.0;
  double ubre = 0.0;
};

Scored score(const PoissonRows& rows, const Eigen::MatrixXd& S, const FixedFit& fit) {
  Scored s{fit, 0.0, 0.0};
  const Eigen::VectorXd eta = rows.X * fit.beta;
  const Eigen::VectorXd mu = eta.array().exp();
  Eigen::MatrixXd H = weighted_crossprod(rows.X, (rows.w.array() * mu.array()).matrix()) + S;
  const Eigen::Index p = H.rows();
  double trace_pen = 0.0;
  if (S.squaredNorm() > 0.0) {
    Eigen::VectorXd d(p);
    for (Eigen::Index i = 0; i < p; ++i) d(i) = H(i, i) > 0.0 ? 1.0 / std::sqrt(H(i, i)) : 1.0;
    Eigen::MatrixXd Hs = d.asDiagonal() * H * d.asDiagonal();
    Eigen::MatrixXd Ss = d.asDiagonal() * S * d.asDiagonal();
    trace_pen = Hs.ldlt().solve(Ss).trace();
  }
  s.edf = static_cast<double>(p) - trace_pen;
  double deviance = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double y = rows.y(i);
    const double m = mu(i);
    deviance += 2.0 * rows.w(i) * ((y > 0.0 ? y * std::log(y / m) : 0.0) - (y - m));
  }
  const auto n = static_cast<double>(eta.size());
  s.ubre = deviance / n + 2.0 * s.edf / n - 1.0;
  if (!std::isfinite(s.ubre)) s.ubre = std::numeric_limits<double>::infinity();
  return s;
}

void check_rank(std::span<const DesignBlock> blocks, const PoissonRows& rows) {
  Eigen::MatrixXd A = rows.X.array().colwise() * rows.w.array().sqrt();
  for (Eigen::Index c = 0; c < A.cols(); ++c) {
    const double n = A.col(c).norm();
    if (n > 0.0) A.col(c) /= n;
  }
  auto rank_of = [&](Eigen::Index cols) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.leftCols(cols));
    qr.setThreshold(1e-9);
    return qr.rank();
  };
  if (rank_of(A.cols()) == A.cols()) return;
  for (const auto& b : blocks) {
    const Eigen::Index end = b.first_col + b.n_cols;
    if (rank_of(end) < end) {
      throw DataError("design is rank deficient at term " + b.label());
    }
  }
  throw DataError("design is rank deficient");
}

Eigen::VectorXd initial_beta(std::span<const DesignBlock> blocks, const PoissonRows& rows) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(rows.X.cols());
  const double total = rows.w.dot(rows.y);
  if (!(total > 0.0)) throw NumericalError("no positive responses: the Poisson MLE does not exist");
  const double level = std::log(total / rows.w.sum());
  for (const auto& b : blocks) {
    if (b.kind == TermKind::intercept) beta(b.first_col) = level;
  }
  return beta;
}

void validate_rows(std::span<const DesignBlock> blocks, const PoissonRows& rows) {
  const Eigen::Index n = rows.X.rows();
  if (rows.y.size() != n || rows.w.size() != n) throw ConfigError("response/weight length mismatch");
  if (rows.X.cols() != design_width(blocks)) throw ConfigError("design width does not match blocks");
  if (n == 0) throw DataError("no rows to fit");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(rows.w(i) > 0.0)) throw DataError("quadrature weights must be positive");
    if (!(rows.y(i) >= 0.0) || !std::isfinite(rows.y(i))) throw DataError("responses must be finite and >= 0");
  }
  if (!rows.X.allFinite()) throw DataError("design matrix has non-finite entries");
}

PirlsResult to_result(const Scored& s, std::vector<double> gammas, const PoissonRows& rows,
                      std::span<const DesignBlock> blocks) {
  PirlsResult r;
  r.beta = s.fit.beta;
  r.gammas = std::move(gammas);
  r.converged = s.fit.converged;
  r.iterations = s.fit.iterations;
  r.penalized_loglik = s.fit.penalized;
  r.loglik = s.fit.loglik;
  r.edf = s.edf;
  r.ubre = s.ubre;
  r.gradient_norm = penalized_gradient(blocks, rows, r.beta, r.gammas).lpNorm<Eigen::Infinity>();
  r.trace = s.fit.trace;
  return r;
}

}  // namespace

double penalized_objective(std::span<const DesignBlock> blocks, const PoissonRows& rows,
                           const Eigen::VectorXd& beta, std::span<const double> gammas) {
  check_gammas(blocks, gammas);
  const Eigen::MatrixXd S = total_penalty(blocks, gammas, rows.X.cols());
  return poisson_loglik(rows, rows.X * beta) - 0.5 * beta.dot(S * beta);
}

Eigen::VectorXd penalized_gradient(std::span<const DesignBlock> blocks, const PoissonRows& rows,
                                   const Eigen::VectorXd& beta, std::span<const double> gammas) {
  check_gammas(blocks, gammas);
  const Eigen::MatrixXd S = total_penalty(blocks, gammas, rows.X.cols());
  const Eigen::VectorXd mu = (rows.X * beta).array().exp();
  return rows.X.transpose() * (rows.w.array() * (rows.y - mu).array()).matrix() - S * beta;
}

PirlsResult pirls_fit(std::span<const DesignBlock> blocks, const PoissonRows& rows,
                      const GammaChoice& gammas, const PirlsOptions& options) {
  validate_rows(blocks, rows);
  check_rank(blocks, rows);
  const Eigen::Index p = rows.X.cols();
  const Eigen::VectorXd start = initial_beta(blocks, rows);
  const std::size_t m = smooth_count(blocks);

  if (!gammas.automatic || m == 0) {
    std::vector<double> g = gammas.automatic ? std::vector<double>{} : gammas.values;
    check_gammas(blocks, g);
    const Eigen::MatrixXd S = total_penalty(blocks, g, p);
    return to_result(score(rows, S, fit_fixed(rows, S, start, options)), std::move(g), rows, blocks);
  }

  const double lo = options.log10_gamma_min;
  const double hi = options.log10_gamma_max;
  const int G = std::max(options.grid_points, 2);
  const double step = (hi - lo) / (G - 1);

  std::vector<double> log_gamma(m, 0.0);
  auto evaluate = [&](const std::vector<double>& lg, const Eigen::VectorXd& warm) {
    std::vector<double> g(m);
    for (std::size_t j = 0; j < m; ++j) g[j] = std::pow(10.0, lg[j]);
    const Eigen::MatrixXd S = total_penalty(blocks, g, p);
    return score(rows, S, fit_fixed(rows, S, warm, options));
  };

  Scored best = evaluate(log_gamma, start);
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    const std::vector<double> before = log_gamma;
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> trial = log_gamma;
      Eigen::VectorXd warm = best.fit.beta;
      int best_index = -1;
      Scored grid_best;
      for (int i = 0; i < G; ++i) {
        trial[j] = lo + step * i;
        Scored s = evaluate(trial, warm);
        if (s.fit.beta.allFinite()) warm = s.fit.beta;
        if (best_index < 0 || s.ubre < grid_best.ubre) {
          best_index = i;
          grid_best = std::move(s);
        }
      }
      double best_lg = lo + step * best_index;

      // Golden-section refinement in the bracket around the best grid point.
      double a = std::max(lo, best_lg - step);
      double b = std::min(hi, best_lg + step);
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = b - phi * (b - a);
      double x2 = a + phi * (b - a);
      trial[j] = x1;
      Scored s1 = evaluate(trial, grid_best.fit.beta);
      trial[j] = x2;
      Scored s2 = evaluate(trial, grid_best.fit.beta);
      while (b - a > options.golden_tol) {
        if (s1.ubre <= s2.ubre) {
          b = x2;
          x2 = x1;
          s2 = std::move(s1);
          x1 = b - phi * (b - a);
          trial[j] = x1;
          s1 = evaluate(trial, s2.fit.beta);
        } else {
          a = x1;
          x1 = x2;
          s1 = std::move(s2);
          x2 = a + phi * (b - a);
          trial[j] = x2;
          s2 = evaluate(trial, s1.fit.beta);
        }
      }
      if (s1.ubre < grid_best.ubre || s2.ubre < grid_best.ubre) {
        if (s1.ubre <= s2.ubre) {
          best_lg = x1;
          grid_best = std::move(s1);
        } else {
          best_lg = x2;
          grid_best = std::move(s2);
        }
      }
      log_gamma[j] = best_lg;
      best = std::move(grid_best);
    }
    if (log_gamma == before) break;
  }

  // Final fit from a cold start so the trace reflects a clean P-IRLS run.
  std::vector<double> g(m);
  for (std::size_t j = 0; j < m; ++j) g[j] = std::pow(10.0, log_gamma[j]);
  const Eigen::MatrixXd S = total_penalty(blocks, g, p);
  return to_result(score(rows, S, fit_fixed(rows, S, start, options)), std::move(g), rows, blocks);
}

}  // namespace slidepp::gam
