#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cjm/basis.hpp"
#include "cjm/errors.hpp"
#include "cjm/rng.hpp"

using namespace cjm;

namespace {

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) {
    v.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
  }
  return v;
}

// Oracle: direct truncated-power natural-spline construction (ESL eq. 5.4-5.5
// style), columns {t, N_1, ..., N_{K-2}}.
Eigen::VectorXd truncated_power_ns(const std::vector<double>& knots, double t) {
  const std::size_t K = knots.size();
  const auto cube_plus = [](double x) { return x > 0.0 ? x * x * x : 0.0; };
  const auto d = [&](std::size_t k) {
    return (cube_plus(t - knots[k]) - cube_plus(t - knots[K - 1])) / (knots[K - 1] - knots[k]);
  };
  Eigen::VectorXd out(K - 1);
  out[0] = t;
  for (std::size_t k = 0; k + 2 < K; ++k) {
    out[static_cast<Eigen::Index>(k) + 1] = d(k) - d(K - 2);
  }
  return out;
}

// Oracle: naive recursive Cox-de Boor.
double cox_de_boor(const std::vector<double>& knots, std::size_t i, int p, double t) {
  if (p == 0) {
    return (knots[i] <= t && t < knots[i + 1]) ? 1.0 : 0.0;
  }
  double left = 0.0;
  double right = 0.0;
  const double dl = knots[i + p] - knots[i];
  const double dr = knots[i + p + 1] - knots[i + 1];
  if (dl > 0.0) left = (t - knots[i]) / dl * cox_de_boor(knots, i, p - 1, t);
  if (dr > 0.0) right = (knots[i + p + 1] - t) / dr * cox_de_boor(knots, i + 1, p - 1, t);
  return left + right;
}

}  // namespace

TEST_CASE("ns_fit places boundary knots at min/max and interior knots at quantiles") {
  const auto times = grid(0.0, 7.0, 211);
  const auto basis = ns_fit(times, 3);
  CHECK(basis.df() == 3);
  CHECK(basis.boundary_low() == doctest::Approx(0.0));
  CHECK(basis.boundary_high() == doctest::Approx(7.0));
  REQUIRE(basis.interior_knots().size() == 2);
  CHECK(basis.interior_knots()[0] == doctest::Approx(7.0 / 3.0).epsilon(1e-9));
  CHECK(basis.interior_knots()[1] == doctest::Approx(14.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("ns_fit with df=1 has no interior knots") {
  const auto basis = ns_fit(grid(0.0, 5.0, 50), 1);
  CHECK(basis.interior_knots().empty());
  CHECK(basis.eval(2.5).size() == 1);
}

TEST_CASE("ns_fit rejects degenerate times") {
  CHECK_THROWS_AS(ns_fit(std::vector<double>(20, 3.0), 3), NumericalError);
}

TEST_CASE("ns_eval output length equals df") {
  for (int df : {1, 2, 3, 4}) {
    const auto basis = ns_fit(grid(0.0, 7.0, 100), df);
    CHECK(basis.eval(1.7).size() == df);
  }
}

TEST_CASE("ns_eval is linear beyond the upper boundary") {
  const auto basis = ns_fit(grid(0.0, 7.0, 100), 3);
  const double b = basis.boundary_high();
  const Eigen::VectorXd f1 = basis.eval(b + 1.0);
  const Eigen::VectorXd f2 = basis.eval(b + 2.0);
  const Eigen::VectorXd f3 = basis.eval(b + 3.0);
  const Eigen::VectorXd second_diff = f1 - 2.0 * f2 + f3;
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(second_diff[j]) < 1e-8);
  }
  // and below the lower boundary
  const Eigen::VectorXd g1 = basis.eval(-1.0);
  const Eigen::VectorXd g2 = basis.eval(-2.0);
  const Eigen::VectorXd g3 = basis.eval(-3.0);
  const Eigen::VectorXd sd2 = g1 - 2.0 * g2 + g3;
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(sd2[j]) < 1e-8);
  }
}

TEST_CASE("ns_eval matches the truncated-power oracle at 100 random points") {
  Rng rng(2024);
  for (int df : {2, 3, 5}) {
    const auto basis = ns_fit(grid(0.0, 7.0, 300), df);
    for (int rep = 0; rep < 100; ++rep) {
      const double t = rng.uniform(-2.0, 9.0);
      const Eigen::VectorXd got = basis.eval(t);
      const Eigen::VectorXd want = truncated_power_ns(basis.all_knots(), t);
      REQUIRE(got.size() == want.size());
      for (int j = 0; j < got.size(); ++j) {
        CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("ns_eval has continuous value and first two derivatives at interior knots") {
  const auto basis = ns_fit(grid(0.0, 7.0, 300), 4);
  const double h = 1e-5;
  for (double knot : basis.interior_knots()) {
    for (int j = 0; j < basis.df(); ++j) {
      const auto f = [&](double t) { return basis.eval(t)[j]; };
      // one-sided second derivatives by finite differences
      const double d2l = (f(knot - 3 * h) - 2 * f(knot - 2 * h) + f(knot - h)) / (h * h);
      const double d2r = (f(knot + h) - 2 * f(knot + 2 * h) + f(knot + 3 * h)) / (h * h);
      const double d1l = (f(knot - h) - f(knot - 2 * h)) / h;
      const double d1r = (f(knot + 2 * h) - f(knot + h)) / h;
      const double scale = std::max({1.0, std::abs(d2l), std::abs(d2r)});
      CHECK(std::abs(d2l - d2r) / scale < 1e-3);  // 2nd deriv: FD noise dominates
      CHECK(std::abs(d1l - d1r) / std::max(1.0, std::abs(d1l)) < 1e-3);
      CHECK(f(knot - 1e-9) == doctest::Approx(f(knot + 1e-9)).epsilon(1e-6));
    }
  }
}

TEST_CASE("bspline_eval: partition of unity over the whole span") {
  const BSplineBasis basis(0.0, 7.0, 15);
  Rng rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const double t = rng.uniform(-1.0, 8.0);  // outside values clamp to span
    const Eigen::VectorXd v = basis.eval(t);
    CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(v.minCoeff() >= 0.0);
  }
}

TEST_CASE("bspline_eval: full-multiplicity boundary knots give a single 1") {
  const BSplineBasis basis(0.0, 7.0, 15);
  const Eigen::VectorXd at_low = basis.eval(0.0);
  CHECK(at_low[0] == doctest::Approx(1.0));
  CHECK(at_low.sum() == doctest::Approx(1.0));
  CHECK(at_low.maxCoeff() == doctest::Approx(1.0));
  const Eigen::VectorXd at_high = basis.eval(7.0);
  CHECK(at_high[14] == doctest::Approx(1.0));
  CHECK(at_high.sum() == doctest::Approx(1.0));
}

TEST_CASE("bspline_eval matches a naive recursive Cox-de Boor oracle") {
  const BSplineBasis basis(0.0, 7.0, 15);
  const auto& knots = basis.knot_vector();
  Rng rng(99);
  for (int rep = 0; rep < 100; ++rep) {
    const double t = rng.uniform(1e-6, 7.0 - 1e-6);
    const Eigen::VectorXd got = basis.eval(t);
    for (int i = 0; i < basis.n_basis(); ++i) {
      const double want = cox_de_boor(knots, static_cast<std::size_t>(i), basis.degree(), t);
      CHECK(got[i] == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("second_difference_penalty matches explicit difference-matrix product") {
  const Eigen::MatrixXd p3 = second_difference_penalty(3);
  Eigen::MatrixXd d(1, 3);
  d << 1.0, -2.0, 1.0;
  const Eigen::MatrixXd want = d.transpose() * d;
  CHECK((p3 - want).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(p3(0, 0) == doctest::Approx(1.0));
  CHECK(p3(1, 1) == doctest::Approx(4.0));

  const Eigen::MatrixXd p6 = second_difference_penalty(6);
  Eigen::MatrixXd d6 = Eigen::MatrixXd::Zero(4, 6);
  for (int r = 0; r < 4; ++r) {
    d6(r, r) = 1.0;
    d6(r, r + 1) = -2.0;
    d6(r, r + 2) = 1.0;
  }
  CHECK((p6 - d6.transpose() * d6).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("penalty annihilates linear coefficient vectors and is symmetric PSD") {
  const int n = 15;
  const Eigen::MatrixXd p = second_difference_penalty(n);
  Eigen::VectorXd lin(n);
  for (int i = 0; i < n; ++i) lin[i] = 0.3 - 1.7 * i;
  CHECK(std::abs(lin.dot(p * lin)) < 1e-10);
  CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("second_difference_penalty requires n_basis >= 3") {
  CHECK_THROWS_AS(second_difference_penalty(2), NumericalError);
}

TEST_CASE("ns_design_fit df=1 reproduces the hand-derived null-space column") {
  // On [0,1] the boundary second-derivative constraints leave the null vector
  // (1,2,3)/sqrt(14) over (B1,B2,B3), so the single column is
  // (3x(1-x)^2 + 6x^2(1-x) + 3x^3)/sqrt(14).
  const auto d = ns_design_fit(grid(0.0, 1.0, 11), 1);
  const double s14 = std::sqrt(14.0);
  CHECK(d.eval(0.0)[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.eval(0.5)[0] == doctest::Approx(1.5 / s14).epsilon(1e-12));
  CHECK(d.eval(1.0)[0] == doctest::Approx(3.0 / s14).epsilon(1e-12));
}

TEST_CASE("ns_design columns satisfy the natural constraints") {
  const auto d = ns_design_fit(grid(0.0, 7.0, 300), 3);
  const double h = 1e-4;
  for (double b : {0.0, 7.0}) {
    for (int j = 0; j < 3; ++j) {
      const auto f = [&](double t) { return d.eval(t)[j]; };
      const double inside = (b == 0.0) ? 1.0 : -1.0;
      const double d2 = (f(b) - 2.0 * f(b + inside * h) + f(b + 2.0 * inside * h)) / (h * h);
      CHECK(std::abs(d2) < 1e-4);
    }
  }
  // linear extrapolation outside the boundaries
  const Eigen::VectorXd sd_hi = d.eval(8.0) - 2.0 * d.eval(9.0) + d.eval(10.0);
  const Eigen::VectorXd sd_lo = d.eval(-1.0) - 2.0 * d.eval(-2.0) + d.eval(-3.0);
  CHECK(sd_hi.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sd_lo.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ns_design spans the same space as the truncated-power basis") {
  // Each design column must be an affine combination of {1, truncated-power
  // columns} sharing the design's knots; fit on a dense grid and check the
  // residual.
  const auto times = grid(0.0, 7.0, 400);
  const auto d = ns_design_fit(times, 3);
  std::vector<double> knots = {d.boundary_low()};
  knots.insert(knots.end(), d.interior_knots().begin(), d.interior_knots().end());
  knots.push_back(d.boundary_high());

  const int n = 101;
  Eigen::MatrixXd tp(n, 4);  // 1, t, N_1, N_2
  Eigen::MatrixXd target(n, 3);
  for (int i = 0; i < n; ++i) {
    const double t = 7.0 * i / (n - 1);
    const Eigen::VectorXd v = truncated_power_ns(knots, t);
    REQUIRE(v.size() == 3);
    tp(i, 0) = 1.0;
    tp.row(i).tail(3) = v.transpose();
    target.row(i) = d.eval(t).transpose();
  }
  const Eigen::MatrixXd coefs = tp.colPivHouseholderQr().solve(target);
  const double resid = (tp * coefs - target).cwiseAbs().maxCoeff();
  CHECK(resid < 1e-8);
}
