#pragma once

// Oracles that need library types but none of the code paths they check.

#include <cmath>

#include "oracles.hpp"
#include "slidepp/gamcore.hpp"
#include "slidepp/raster.hpp"

namespace oracle {

// Direct convolution over every pair of cells, using geometric cell centres.
inline slidepp::RasterGrid brute_force_filter(const slidepp::RasterGrid& in, double sigma, double radius) {
  const auto& g = in.geometry();
  slidepp::RasterGrid out(g);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (!in.valid(i)) continue;
    const slidepp::Point ci = g.cell_center(g.cell(i).row, g.cell(i).col);
    long double num = 0.0L, den = 0.0L;
    for (std::size_t j = 0; j < g.cell_count(); ++j) {
      if (!in.valid(j)) continue;
      const slidepp::Point cj = g.cell_center(g.cell(j).row, g.cell(j).col);
      const double d = std::hypot(ci.x - cj.x, ci.y - cj.y);
      if (d > radius + 1e-9) continue;
      const long double w = std::exp(-(long double)(d * d) / (2.0L * sigma * sigma));
      num += w * in[j];
      den += w;
    }
    if (den > 0) out[i] = static_cast<double>(num / den);
  }
  return out;
}

// Integral of f''^2 for f = slidepp::gam::evaluate_smooth: on each knot interval the
// function is recovered as the cubic through four interior samples, and the
// square of its (linear) second derivative is integrated by composite Simpson.
inline double simpson_roughness(const slidepp::gam::SplineBasis& basis, const Eigen::VectorXd& c, int panels = 64) {
  const auto& x = basis.knots();
  long double total = 0.0L;
  for (std::size_t j = 0; j + 1 < x.size(); ++j) {
    const double a = x[j], b = x[j + 1], h = b - a;
    const double t[4] = {a + 0.2 * h, a + 0.4 * h, a + 0.6 * h, a + 0.8 * h};
    double f[4];
    for (int i = 0; i < 4; ++i) f[i] = slidepp::gam::evaluate_smooth(basis, c, t[i]);
    // Cubic through the samples in the local variable s = (x - a) / h.
    Mat V(4, Vec(4));
    for (int i = 0; i < 4; ++i) {
      const double s = (t[i] - a) / h;
      V[i] = {1.0, s, s * s, s * s * s};
    }
    const Vec q = solve(V, {f[0], f[1], f[2], f[3]});
    auto second = [&](double xx) {
      const double s = (xx - a) / h;
      return (2.0 * q[2] + 6.0 * q[3] * s) / (h * h);
    };
    const double step = h / panels;
    long double piece = 0.0L;
    for (int p = 0; p < panels; ++p) {
      const double l = a + p * step, r = l + step, m = 0.5 * (l + r);
      const double fl = second(l), fm = second(m), fr = second(r);
      piece += step / 6.0 * (fl * fl + 4.0 * fm * fm + fr * fr);
    }
    total += piece;
  }
  return static_cast<double>(total);
}

}  // namespace oracle
