#include "cjm/basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cjm/errors.hpp"

namespace cjm {

namespace {

double quantile_linear(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

NaturalSplineBasis ns_fit(const std::vector<double>& times, int df) {
  if (df < 1) {
    throw NumericalError("natural spline requires df >= 1");
  }
  if (times.empty()) {
    throw NumericalError("natural spline requires observation times");
  }
  std::vector<double> sorted(times);
  std::sort(sorted.begin(), sorted.end());
  const std::set<double> distinct(sorted.begin(), sorted.end());
  if (distinct.size() < static_cast<std::size_t>(df) + 1) {
    throw NumericalError("natural spline with df=" + std::to_string(df) + " needs at least " +
                         std::to_string(df + 1) + " distinct times, got " +
                         std::to_string(distinct.size()));
  }

  NaturalSplineBasis basis;
  basis.df_ = df;
  basis.boundary_low_ = sorted.front();
  basis.boundary_high_ = sorted.back();
  for (int k = 1; k < df; ++k) {
    basis.interior_knots_.push_back(
        quantile_linear(sorted, static_cast<double>(k) / static_cast<double>(df)));
  }
  basis.knots_.push_back(basis.boundary_low_);
  basis.knots_.insert(basis.knots_.end(), basis.interior_knots_.begin(),
                      basis.interior_knots_.end());
  basis.knots_.push_back(basis.boundary_high_);
  for (std::size_t i = 1; i < basis.knots_.size(); ++i) {
    if (!(basis.knots_[i] > basis.knots_[i - 1])) {
      throw NumericalError("natural spline knots not strictly increasing (ties in quantiles)");
    }
  }

  // Basis columns: {t, N_1, ..., N_{K-2}} with N_k = d_k - d_{K-1} and
  // d_k(t) = [ (t-xi_k)_+^3 - (t-xi_K)_+^3 ] / (xi_K - xi_k).
  //
  // Each column is piecewise cubic with breaks at the knots. Precompute the
  // Taylor coefficients (c0..c3) of every column at each interval start using
  // right-sided derivatives of the truncated powers: for base point a, the
  // term (t-xi)_+^3 contributes ((a-xi)^3, 3(a-xi)^2, 3(a-xi), 1) iff xi <= a.
  const std::size_t K = basis.knots_.size();
  const double xi_last = basis.knots_[K - 1];

  const auto trunc_coeffs = [](double a, double xi, double out[4]) {
    if (xi <= a) {
      const double u = a - xi;
      out[0] = u * u * u;
      out[1] = 3.0 * u * u;
      out[2] = 3.0 * u;  // f''(a)/2!
      out[3] = 1.0;      // f'''(a)/3!
    } else {
      out[0] = out[1] = out[2] = out[3] = 0.0;
    }
  };

  // Table index 0 is the left tail (base xi_1, everything inactive);
  // index i in 1..K has base knots_[i-1].
  basis.coeff_.resize(K + 1);
  for (std::size_t table = 0; table <= K; ++table) {
    const double a = (table == 0) ? basis.knots_.front() : basis.knots_[table - 1];
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(df, 4);
    c(0, 0) = a;  // linear column
    c(0, 1) = 1.0;
    if (table > 0) {
      double last_term[4];
      double prev_term[4];  // d_{K-1}
      trunc_coeffs(a, xi_last, last_term);
      trunc_coeffs(a, basis.knots_[K - 2], prev_term);
      for (int j = 1; j < df; ++j) {
        const double xi_k = basis.knots_[static_cast<std::size_t>(j - 1)];
        double term[4];
        trunc_coeffs(a, xi_k, term);
        for (int d = 0; d < 4; ++d) {
          const double d_k = (term[d] - last_term[d]) / (xi_last - xi_k);
          const double d_prev = (prev_term[d] - last_term[d]) / (xi_last - basis.knots_[K - 2]);
          c(j, d) = d_k - d_prev;
        }
      }
    }
    basis.coeff_[table] = std::move(c);
  }
  return basis;
}

Eigen::VectorXd NaturalSplineBasis::eval(double t) const {
  // table index = number of knots <= t (0 means left of the first knot)
  const std::size_t table = static_cast<std::size_t>(
      std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
  const double a = (table == 0) ? knots_.front() : knots_[table - 1];
  const double u = t - a;
  const Eigen::MatrixXd& c = coeff_[table];
  Eigen::VectorXd out(df_);
  for (int j = 0; j < df_; ++j) {
    out[j] = ((c(j, 3) * u + c(j, 2)) * u + c(j, 1)) * u + c(j, 0);
  }
  return out;
}

BSplineBasis::BSplineBasis(double low, double high, int n_basis, int degree)
    : degree_(degree), n_basis_(n_basis) {
  if (n_basis < degree + 1) {
    throw NumericalError("B-spline basis needs at least degree+1 functions");
  }
  if (!(high > low)) {
    throw NumericalError("B-spline span must have high > low");
  }
  const int n_interior = n_basis - degree - 1;
  for (int i = 0; i <= degree; ++i) knots_.push_back(low);
  for (int i = 1; i <= n_interior; ++i) {
    knots_.push_back(low + (high - low) * static_cast<double>(i) /
                               static_cast<double>(n_interior + 1));
  }
  for (int i = 0; i <= degree; ++i) knots_.push_back(high);
}

std::vector<double> BSplineBasis::interior_knots() const {
  std::vector<double> res;
  for (std::size_t i = static_cast<std::size_t>(degree_) + 1;
       i + static_cast<std::size_t>(degree_) + 1 < knots_.size(); ++i) {
    res.push_back(knots_[i]);
  }
  return res;
}

Eigen::VectorXd BSplineBasis::eval(double t) const {
  t = std::clamp(t, knots_.front(), knots_.back());
  return bspline_design_row(knots_, degree_, t, 0);
}

Eigen::MatrixXd second_difference_penalty(int n_basis) {
  if (n_basis < 3) {
    throw NumericalError("second-difference penalty needs n_basis >= 3");
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n_basis - 2, n_basis);
  for (int r = 0; r < n_basis - 2; ++r) {
    d(r, r) = 1.0;
    d(r, r + 1) = -2.0;
    d(r, r + 2) = 1.0;
  }
  return d.transpose() * d;
}

namespace {

// Guarded de Boor triangular scheme; returns the degree+1 possibly nonzero
// values B_{span-degree..span} for a span with knots[span] <= x < knots[span+1].
void de_boor_values(const std::vector<double>& knots, int degree, double x, int span,
                    double* out) {
  out[0] = 1.0;
  std::vector<double> left(static_cast<std::size_t>(degree) + 1);
  std::vector<double> right(static_cast<std::size_t>(degree) + 1);
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - knots[span + 1 - j];
    right[j] = knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double tmp = (denom != 0.0) ? out[r] / denom : 0.0;
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
}

int find_span(const std::vector<double>& knots, int degree, double x) {
  const int n_basis = static_cast<int>(knots.size()) - degree - 1;
  if (x >= knots[knots.size() - static_cast<std::size_t>(degree) - 1]) {
    // last nondegenerate span, so the right endpoint evaluates left-sided
    int s = n_basis - 1;
    while (s > degree && knots[s] == knots[s + 1]) --s;
    return s;
  }
  int s = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), x) - knots.begin()) - 1;
  return std::clamp(s, degree, n_basis - 1);
}

}  // namespace

Eigen::VectorXd bspline_design_row(const std::vector<double>& knots, int degree, double x,
                                   int deriv) {
  const int n_basis = static_cast<int>(knots.size()) - degree - 1;
  if (degree < 0 || degree > 7) {
    throw NumericalError("bspline_design_row supports degrees 0..7");
  }
  if (deriv == 0) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n_basis);
    const int span = find_span(knots, degree, x);
    double vals[8];
    de_boor_values(knots, degree, x, span, vals);
    for (int r = 0; r <= degree; ++r) {
      const int idx = span - degree + r;
      if (idx >= 0 && idx < n_basis) row[idx] = vals[r];
    }
    return row;
  }
  // dB_{i,p}/dx = p [ B_{i,p-1}/(t_{i+p}-t_i) - B_{i+1,p-1}/(t_{i+p+1}-t_{i+1}) ]
  const Eigen::VectorXd lower = bspline_design_row(knots, degree - 1, x, deriv - 1);
  Eigen::VectorXd row(n_basis);
  for (int i = 0; i < n_basis; ++i) {
    const double dl = knots[i + degree] - knots[i];
    const double dr = knots[i + degree + 1] - knots[i + 1];
    const double a = (dl > 0.0) ? lower[i] / dl : 0.0;
    const double b = (dr > 0.0) ? lower[i + 1] / dr : 0.0;
    row[i] = degree * (a - b);
  }
  return row;
}

NaturalSplineDesign ns_design_fit(const std::vector<double>& times, int df) {
  if (df < 1) {
    throw NumericalError("natural spline design requires df >= 1");
  }
  if (times.empty()) {
    throw NumericalError("natural spline design requires observation times");
  }
  std::vector<double> sorted(times);
  std::sort(sorted.begin(), sorted.end());
  const std::set<double> distinct(sorted.begin(), sorted.end());
  if (distinct.size() < static_cast<std::size_t>(df) + 1) {
    throw NumericalError("natural spline design with df=" + std::to_string(df) +
                         " needs at least " + std::to_string(df + 1) + " distinct times");
  }
  std::vector<double> interior;
  for (int k = 1; k < df; ++k) {
    interior.push_back(quantile_linear(sorted, static_cast<double>(k) / static_cast<double>(df)));
  }
  return ns_design_from_knots(sorted.front(), sorted.back(), interior);
}

NaturalSplineDesign ns_design_from_knots(double low, double high,
                                         const std::vector<double>& interior) {
  const int df = static_cast<int>(interior.size()) + 1;
  if (!(high > low)) {
    throw NumericalError("natural spline design needs high > low boundary knots");
  }
  double prev = low;
  for (double k : interior) {
    if (!(k > prev) || !(k < high)) {
      throw NumericalError("natural spline interior knots must be increasing inside bounds");
    }
    prev = k;
  }

  NaturalSplineDesign d;
  d.df_ = df;
  d.lo_ = low;
  d.hi_ = high;
  d.interior_ = interior;
  constexpr int kDegree = 3;
  for (int i = 0; i <= kDegree; ++i) d.aknots_.push_back(d.lo_);
  d.aknots_.insert(d.aknots_.end(), d.interior_.begin(), d.interior_.end());
  for (int i = 0; i <= kDegree; ++i) d.aknots_.push_back(d.hi_);

  const int full = static_cast<int>(d.aknots_.size()) - kDegree - 1;  // intercept included
  const int m = full - 1;                                             // intercept dropped
  if (m < df + 2) {
    throw NumericalError("natural spline design is over-constrained");
  }

  // Boundary second-derivative constraints, intercept column dropped; QR of
  // the m×2 transpose with LINPACK dqrdc Householder conventions, Q columns
  // 3..m spanning the constraint null space.
  Eigen::MatrixXd ct(m, 2);
  const Eigen::VectorXd c_lo = bspline_design_row(d.aknots_, kDegree, d.lo_, 2);
  const Eigen::VectorXd c_hi = bspline_design_row(d.aknots_, kDegree, d.hi_, 2);
  ct.col(0) = c_lo.tail(m);
  ct.col(1) = c_hi.tail(m);

  Eigen::Vector2d qraux = Eigen::Vector2d::Zero();
  for (int j = 0; j < 2; ++j) {
    double nrm = ct.col(j).tail(m - j).norm();
    if (nrm == 0.0) continue;
    if (ct(j, j) != 0.0) nrm = std::copysign(nrm, ct(j, j));
    ct.col(j).tail(m - j) /= nrm;
    ct(j, j) += 1.0;
    for (int k = j + 1; k < 2; ++k) {
      const double t = -ct.col(j).tail(m - j).dot(ct.col(k).tail(m - j)) / ct(j, j);
      ct.col(k).tail(m - j) += t * ct.col(j).tail(m - j);
    }
    qraux[j] = ct(j, j);
  }

  d.qnull_.resize(m, df);
  for (int c = 0; c < df; ++c) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    v[c + 2] = 1.0;
    for (int j = 1; j >= 0; --j) {
      if (qraux[j] == 0.0) continue;
      Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
      u[j] = qraux[j];
      u.tail(m - j - 1) = ct.col(j).tail(m - j - 1);
      v -= u * (u.dot(v) / qraux[j]);
    }
    d.qnull_.col(c) = v;
  }

  const auto project = [&](double x, int deriv) -> Eigen::VectorXd {
    const Eigen::VectorXd row = bspline_design_row(d.aknots_, kDegree, x, deriv);
    return d.qnull_.transpose() * row.tail(m);
  };
  d.lo_val_ = project(d.lo_, 0);
  d.lo_slope_ = project(d.lo_, 1);
  d.hi_val_ = project(d.hi_, 0);
  d.hi_slope_ = project(d.hi_, 1);
  return d;
}

Eigen::VectorXd NaturalSplineDesign::eval(double t) const {
  if (t < lo_) {
    return lo_val_ + (t - lo_) * lo_slope_;
  }
  if (t > hi_) {
    return hi_val_ + (t - hi_) * hi_slope_;
  }
  const Eigen::VectorXd row = bspline_design_row(aknots_, 3, t, 0);
  return qnull_.transpose() * row.tail(row.size() - 1);
}

}  // namespace cjm
