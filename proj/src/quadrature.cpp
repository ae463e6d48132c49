#include "cjm/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cjm/errors.hpp"

namespace cjm {

namespace {

struct Gl15Rule {
  std::array<double, 15> nodes{};
  std::array<double, 15> weights{};

  // Golub–Welsch-free construction: Newton iteration on P_15 from the
  // Chebyshev-angle initial guess; weights w = 2 / ((1-x^2) P'_n(x)^2).
  Gl15Rule() {
    constexpr int n = 15;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      weights[i] = w;
      weights[n - 1 - i] = w;
    }
  }
};

const Gl15Rule& rule() {
  static const Gl15Rule r;
  return r;
}

}  // namespace

const double* gl15_nodes() { return rule().nodes.data(); }
const double* gl15_weights() { return rule().weights.data(); }

QuadratureGrid composite_gl15_grid(double a, double b, const std::vector<double>& breakpoints) {
  QuadratureGrid grid;
  if (!(b > a)) {
    return grid;  // empty integral
  }
  std::vector<double> edges;
  edges.push_back(a);
  for (double bp : breakpoints) {
    if (bp > a && bp < b) edges.push_back(bp);
  }
  edges.push_back(b);
  std::sort(edges.begin(), edges.end());

  const double* nodes = gl15_nodes();
  const double* weights = gl15_weights();
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double lo = edges[i];
    const double hi = edges[i + 1];
    const double len = hi - lo;
    if (len <= 0.0) continue;
    const int parts = std::max(1, static_cast<int>(std::ceil(len / kMaxPieceYears)));
    for (int p = 0; p < parts; ++p) {
      const double plo = lo + len * static_cast<double>(p) / parts;
      const double phi = lo + len * static_cast<double>(p + 1) / parts;
      const double half = 0.5 * (phi - plo);
      const double mid = 0.5 * (phi + plo);
      for (int j = 0; j < kGaussLegendreNodes; ++j) {
        grid.points.push_back(mid + half * nodes[j]);
        grid.weights.push_back(half * weights[j]);
      }
    }
  }
  return grid;
}

double integrate_composite_gl15(const std::function<double(double)>& f, double a, double b,
                                const std::vector<double>& breakpoints) {
  const QuadratureGrid grid = composite_gl15_grid(a, b, breakpoints);
  double total = 0.0;
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const double v = f(grid.points[i]);
    if (!std::isfinite(v)) {
      throw NumericalError("non-finite integrand in hazard quadrature");
    }
    total += grid.weights[i] * v;
  }
  return total;
}

}  // namespace cjm
