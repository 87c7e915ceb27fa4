#pragma once

// Reference computations written independently of the library code paths they
// check: plain dense linear algebra, textbook formulas, brute-force loops.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major

// Gaussian elimination with partial pivoting.
inline Vec solve(Mat A, Vec b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(A[i][k]) > std::abs(A[piv][k])) piv = i;
    }
    std::swap(A[k], A[piv]);
    std::swap(b[k], b[piv]);
    if (A[k][k] == 0.0) throw std::runtime_error("singular system");
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = A[i][k] / A[k][k];
      for (std::size_t j = k; j < n; ++j) A[i][j] -= f * A[k][j];
      b[i] -= f * b[k];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
    x[i] = s / A[i][i];
  }
  return x;
}

// Maximises sum_i w_i (y_i x_i'b - exp(x_i'b)) by undamped Newton from the
// log-mean intercept, halving only if the objective would fall.
inline Vec poisson_newton(const Mat& X, const Vec& y, const Vec& w, int max_iter = 200) {
  const std::size_t n = X.size();
  const std::size_t p = X[0].size();
  auto objective = [&](const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < p; ++j) eta += X[i][j] * b[j];
      s += w[i] * (y[i] * eta - std::exp(eta));
    }
    return s;
  };
  double sy = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sy += w[i] * y[i];
    sw += w[i];
  }
  Vec b(p, 0.0);
  b[0] = std::log(sy / sw);
  double f = objective(b);
  for (int it = 0; it < max_iter; ++it) {
    Vec g(p, 0.0);
    Mat H(p, Vec(p, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < p; ++j) eta += X[i][j] * b[j];
      const double mu = std::exp(eta);
      for (std::size_t j = 0; j < p; ++j) {
        g[j] += w[i] * (y[i] - mu) * X[i][j];
        for (std::size_t k = 0; k < p; ++k) H[j][k] += w[i] * mu * X[i][j] * X[i][k];
      }
    }
    const Vec d = solve(H, g);
    double step = 1.0;
    Vec nb(p);
    double nf = 0.0;
    for (int h = 0; h < 60; ++h) {
      for (std::size_t j = 0; j < p; ++j) nb[j] = b[j] + step * d[j];
      nf = objective(nb);
      if (nf >= f) break;
      step *= 0.5;
    }
    double dmax = 0.0;
    for (std::size_t j = 0; j < p; ++j) dmax = std::max(dmax, std::abs(nb[j] - b[j]));
    b = nb;
    f = nf;
    if (dmax < 1e-13) break;
  }
  return b;
}

// Textbook natural cubic spline through (x_i, y_i): returns the second
// derivatives M_i from the tridiagonal system (Thomas algorithm).
inline Vec natural_spline_second_derivatives(const Vec& x, const Vec& y) {
  const std::size_t n = x.size();
  Vec M(n, 0.0);
  if (n < 3) return M;
  const std::size_t m = n - 2;
  Vec a(m), b(m), c(m), d(m);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1];
    const double h1 = x[i + 1] - x[i];
    a[i - 1] = h0 / 6.0;
    b[i - 1] = (h0 + h1) / 3.0;
    c[i - 1] = h1 / 6.0;
    d[i - 1] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
  }
  for (std::size_t i = 1; i < m; ++i) {
    const double f = a[i] / b[i - 1];
    b[i] -= f * c[i - 1];
    d[i] -= f * d[i - 1];
  }
  M[m] = d[m - 1] / b[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) M[i + 1] = (d[i] - c[i] * M[i + 2]) / b[i];
  return M;
}

inline double natural_spline_eval(const Vec& x, const Vec& y, const Vec& M, double t) {
  const std::size_t n = x.size();
  if (t < x[0]) {
    const double h = x[1] - x[0];
    const double slope = (y[1] - y[0]) / h - h * (2.0 * M[0] + M[1]) / 6.0;
    return y[0] + slope * (t - x[0]);
  }
  if (t > x[n - 1]) {
    const double h = x[n - 1] - x[n - 2];
    const double slope = (y[n - 1] - y[n - 2]) / h + h * (M[n - 2] + 2.0 * M[n - 1]) / 6.0;
    return y[n - 1] + slope * (t - x[n - 1]);
  }
  std::size_t j = 0;
  while (j + 2 < n && t > x[j + 1]) ++j;
  const double h = x[j + 1] - x[j];
  const double A = (x[j + 1] - t) / h;
  const double B = (t - x[j]) / h;
  return A * y[j] + B * y[j + 1] + ((A * A * A - A) * M[j] + (B * B * B - B) * M[j + 1]) * h * h / 6.0;
}

// Sample quantile by linear interpolation of order statistics.
inline double quantile(Vec v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

}  // namespace oracle
