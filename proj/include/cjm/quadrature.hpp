#pragma once

#include <functional>
#include <vector>

namespace cjm {

/// Shared hazard-integration contract: composite 15-node Gauss–Legendre with
/// subintervals split at the spline interior knots, long pieces further
/// subdivided so no piece exceeds kMaxPieceYears. Simulator and model use the
/// same rule so their cumulative hazards agree exactly.
inline constexpr int kGaussLegendreNodes = 15;
inline constexpr double kMaxPieceYears = 2.0;

/// 15-point Gauss–Legendre abscissae/weights on [-1, 1].
const double* gl15_nodes();
const double* gl15_weights();

/// Node positions and weights for integrating over [a, b] with breakpoints.
/// Breakpoints outside (a, b) are ignored; output weights include all piece
/// scaling, so integral = sum_i weights[i] * f(points[i]).
struct QuadratureGrid {
  std::vector<double> points;
  std::vector<double> weights;
};
QuadratureGrid composite_gl15_grid(double a, double b, const std::vector<double>& breakpoints);

double integrate_composite_gl15(const std::function<double(double)>& f, double a, double b,
                                const std::vector<double>& breakpoints);

}  // namespace cjm
