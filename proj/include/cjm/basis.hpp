#pragma once

#include <Eigen/Dense>
#include <vector>

namespace cjm {

/// Natural cubic spline basis (truncated-power construction): columns span
/// {t, N_1(t), ..., N_{K-2}(t)} for knots xi_1 < ... < xi_K, giving `df`
/// columns for K = df + 1 knots. Second derivatives vanish at and beyond the
/// boundary knots, so evaluation extrapolates linearly outside [low, high].
///
/// Evaluation goes through a per-interval cubic coefficient table (Taylor
/// coefficients at each interval start), not the raw truncated powers.
class NaturalSplineBasis {
 public:
  NaturalSplineBasis() = default;

  int df() const { return df_; }
  const std::vector<double>& interior_knots() const { return interior_knots_; }
  double boundary_low() const { return boundary_low_; }
  double boundary_high() const { return boundary_high_; }
  const std::vector<double>& all_knots() const { return knots_; }

  Eigen::VectorXd eval(double t) const;

  friend NaturalSplineBasis ns_fit(const std::vector<double>& times, int df);

 private:
  int df_ = 0;
  double boundary_low_ = 0.0;
  double boundary_high_ = 0.0;
  std::vector<double> interior_knots_;
  std::vector<double> knots_;  // boundary + interior, ascending
  // coeff_[interval](j, c): c-th Taylor coefficient of basis j at the interval
  // start; intervals are (-inf, xi_1], [xi_1, xi_2], ..., [xi_K, inf).
  std::vector<Eigen::MatrixXd> coeff_;
};

/// Boundary knots at min/max of `times`, interior knots at the df-1 equally
/// spaced quantiles (linear-interpolation convention).
NaturalSplineBasis ns_fit(const std::vector<double>& times, int df);

inline Eigen::VectorXd ns_eval(const NaturalSplineBasis& basis, double t) {
  return basis.eval(t);
}

/// Clamped B-spline basis on [low, high] with equally spaced interior knots.
/// Arguments outside the span are clamped onto it before evaluation.
class BSplineBasis {
 public:
  BSplineBasis() = default;
  BSplineBasis(double low, double high, int n_basis, int degree = 3);

  int n_basis() const { return n_basis_; }
  int degree() const { return degree_; }
  const std::vector<double>& knot_vector() const { return knots_; }
  double low() const { return knots_.empty() ? 0.0 : knots_.front(); }
  double high() const { return knots_.empty() ? 0.0 : knots_.back(); }
  /// Interior knots (useful as quadrature breakpoints).
  std::vector<double> interior_knots() const;

  Eigen::VectorXd eval(double t) const;

 private:
  int degree_ = 3;
  int n_basis_ = 0;
  std::vector<double> knots_;
};

inline Eigen::VectorXd bspline_eval(const BSplineBasis& basis, double t) {
  return basis.eval(t);
}

/// P-spline roughness penalty: D2' * D2 for the second-order difference
/// operator D2 (Eilers–Marx). Requires n_basis >= 3.
Eigen::MatrixXd second_difference_penalty(int n_basis);

/// Full design row of the `deriv`-th derivative of every degree-`degree`
/// B-spline on an arbitrary nondecreasing knot vector. `x` must lie within
/// [knots[degree], knots[size-degree-1]]; the right endpoint uses the last
/// nondegenerate span (left-sided values).
Eigen::VectorXd bspline_design_row(const std::vector<double>& knots, int degree, double x,
                                   int deriv = 0);

/// Natural cubic spline regression columns in the B-spline convention:
/// a clamped cubic B-spline design (intercept column dropped) projected onto
/// the null space of the boundary second-derivative constraints via
/// LINPACK-style Householder QR. This is the construction regression software
/// conventionally calls ns(); the longitudinal time trend uses it, so fitted
/// coefficients are directly comparable with the generating values.
/// Outside the boundary knots the columns extrapolate linearly.
class NaturalSplineDesign {
 public:
  NaturalSplineDesign() = default;

  int df() const { return df_; }
  double boundary_low() const { return lo_; }
  double boundary_high() const { return hi_; }
  const std::vector<double>& interior_knots() const { return interior_; }

  Eigen::VectorXd eval(double t) const;

  friend NaturalSplineDesign ns_design_from_knots(double low, double high,
                                                  const std::vector<double>& interior);

 private:
  int df_ = 0;
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<double> interior_;
  std::vector<double> aknots_;  // boundary knots repeated degree+1 times
  Eigen::MatrixXd qnull_;       // m × df null-space transform
  Eigen::VectorXd lo_val_, lo_slope_, hi_val_, hi_slope_;
};

/// Boundary knots at min/max of `times`, interior knots at equally spaced
/// quantiles (same placement rule as ns_fit).
NaturalSplineDesign ns_design_fit(const std::vector<double>& times, int df);

/// Same construction from explicit knots (df = interior count + 1).
NaturalSplineDesign ns_design_from_knots(double low, double high,
                                         const std::vector<double>& interior);

}  // namespace cjm
