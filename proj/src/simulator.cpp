#include "cjm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cjm/csv.hpp"
#include "cjm/errors.hpp"
#include "cjm/quadrature.hpp"
#include "cjm/rng.hpp"

namespace cjm {

namespace {

constexpr double kEventHorizonYears = 1e3;
constexpr double kInversionTol = 1e-9;  // on the survival (u) scale

Eigen::Matrix4d default_sigma_b() {
  Eigen::Matrix4d m;
  // Printed upper triangle, symmetrized.
  m << 0.71, 0.33, 0.07, 1.26,
       0.33, 2.68, 3.81, 4.35,
       0.07, 3.81, 7.62, 5.40,
       1.26, 4.35, 5.40, 8.00;
  return m;
}

double linear_predictor(const SimulationParams& params, const Eigen::Vector4d& b,
                        const NaturalSplineDesign& ns, double t) {
  const Eigen::VectorXd s = ns.eval(t);
  double eta = params.beta[0] + b[0];
  for (int j = 0; j < 3; ++j) {
    eta += (params.beta[j + 1] + b[j + 1]) * s[j];
  }
  return eta;
}

}  // namespace

void SimulationParams::validate() const {
  if (!(sigma_y > 0.0)) throw NumericalError("sigma_y must be > 0");
  if (!(sigma0 > 0.0)) throw NumericalError("sigma0 must be > 0");
  if (!(phi0 > 0.0)) throw NumericalError("phi0 must be > 0");
  if (!(t_max > 0.0)) throw NumericalError("t_max must be > 0");
  if (n_i < 1) throw NumericalError("n_i must be >= 1");
  if (!sigma_b.isApprox(sigma_b.transpose(), 1e-12)) {
    throw NumericalError("sigma_b must be symmetric");
  }
  const Eigen::LLT<Eigen::Matrix4d> llt(sigma_b);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("sigma_b must be positive definite");
  }
}

SimulationParams default_params() {
  SimulationParams p;
  p.sigma_b = default_sigma_b();
  p.phi0 = std::exp(-9.0);
  return p;
}

double cumulative_hazard(const SimulationParams& params, const SubjectCovariates& cov,
                         const Eigen::Vector4d& b, const NaturalSplineDesign& ns, double t) {
  if (t < 0.0) throw NumericalError("cumulative hazard needs t >= 0");
  if (t == 0.0) return 0.0;
  const double fixed_part = params.gamma_sex * cov.sex + params.gamma_age * cov.age;
  const auto integrand = [&](double s) {
    const double h0 = params.phi0 * params.sigma0 * std::pow(s, params.sigma0 - 1.0);
    return h0 * std::exp(fixed_part + params.alpha * linear_predictor(params, b, ns, s));
  };
  return integrate_composite_gl15(integrand, 0.0, t, ns.interior_knots());
}

double invert_survival(const SimulationParams& params, const SubjectCovariates& cov,
                       const Eigen::Vector4d& b, const NaturalSplineDesign& ns, double u) {
  if (!(u > 0.0) || !(u < 1.0)) {
    throw NumericalError("invert_survival requires u in (0, 1)");
  }
  const double target = -std::log(u);

  // Bracket: try [0, t_max] first, widen geometrically to the horizon.
  double hi = params.t_max;
  double h_hi = cumulative_hazard(params, cov, b, ns, hi);
  while (h_hi < target && hi < kEventHorizonYears) {
    hi = std::min(hi * 2.0, kEventHorizonYears);
    h_hi = cumulative_hazard(params, cov, b, ns, hi);
  }
  if (h_hi < target) {
    return std::numeric_limits<double>::infinity();  // event beyond horizon
  }

  double lo = 0.0;
  double mid = 0.5 * hi;
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double h_mid = cumulative_hazard(params, cov, b, ns, mid);
    const bool u_ok = std::abs(std::exp(-h_mid) - u) <= kInversionTol;
    const bool bracket_ok = (hi - lo) <= 1e-6 * std::max(1.0, mid);
    if (u_ok && bracket_ok) {
      return mid;
    }
    if (h_mid < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

std::pair<JointDataset, SimulatedTruth> simulate_dataset(const SimulationParams& params, int n,
                                                         std::uint64_t seed) {
  if (n < 1) throw UsageError("simulate requires n >= 1");
  params.validate();

  const Eigen::Matrix4d chol_b = Eigen::LLT<Eigen::Matrix4d>(params.sigma_b).matrixL();

  struct Draws {
    Eigen::Vector4d b;
    std::vector<double> times;
    std::vector<double> eps;
    double age = 0.0;
    double sex = 0.0;
    double u = 0.0;
  };

  // Steps 1-2, 5, 7-9: all subject-level randomness from per-subject streams.
  std::vector<Draws> raw(static_cast<std::size_t>(n));
  std::vector<double> pooled_times;
  pooled_times.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(params.n_i));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {stream::kSimulate, static_cast<std::uint64_t>(i)}));
    Draws& d = raw[static_cast<std::size_t>(i)];
    Eigen::Vector4d z;
    for (int j = 0; j < 4; ++j) z[j] = rng.normal();
    d.b = chol_b * z;
    d.times.push_back(0.0);
    for (int j = 1; j < params.n_i; ++j) {
      d.times.push_back(rng.uniform(0.0, params.t_max));
    }
    std::sort(d.times.begin(), d.times.end());
    for (int j = 0; j < params.n_i; ++j) {
      d.eps.push_back(rng.normal(0.0, params.sigma_y));
    }
    d.age = rng.uniform(30.0, 70.0);
    d.sex = rng.bernoulli(0.5) ? 1.0 : 0.0;
    d.u = rng.uniform_open();
    pooled_times.insert(pooled_times.end(), d.times.begin(), d.times.end());
  }

  // Step 3: one generating basis from the pooled planned visiting times.
  const NaturalSplineDesign ns = ns_design_fit(pooled_times, 3);

  JointDataset ds;
  ds.surv_covariate_names = {"sex", "age"};
  SimulatedTruth truth;
  truth.params = params;
  truth.seed = seed;
  truth.ns = ns;

  const int width = static_cast<int>(std::to_string(n).size());
  for (int i = 0; i < n; ++i) {
    const Draws& d = raw[static_cast<std::size_t>(i)];
    const SubjectCovariates cov{d.sex, d.age};

    // Steps 10-13: event time by inverting the survival function.
    const double t_star = invert_survival(params, cov, d.b, ns, d.u);
    const double t_obs = std::min(t_star, params.t_max);
    const int event = (t_star <= params.t_max) ? 1 : 0;

    Subject subj;
    std::string idx = std::to_string(i + 1);
    subj.id = "S" + std::string(static_cast<std::size_t>(width) - idx.size(), '0') + idx;
    subj.survival.observed_time = t_obs;
    subj.survival.event = event;
    subj.survival.covariates = {d.sex, d.age};

    // Steps 4-6 and 14: responses at the planned times, truncated at t_obs.
    for (int j = 0; j < params.n_i; ++j) {
      if (d.times[static_cast<std::size_t>(j)] > t_obs) continue;
      LongitudinalRecord rec;
      rec.time = d.times[static_cast<std::size_t>(j)];
      rec.value = linear_predictor(params, d.b, ns, rec.time) + d.eps[static_cast<std::size_t>(j)];
      subj.longitudinal.push_back(rec);
    }
    ds.subjects.push_back(std::move(subj));

    truth.subjects.push_back({d.b, t_star});
  }

  ds.validate();
  return {std::move(ds), std::move(truth)};
}

void write_truth_csv(const std::string& path, const JointDataset& dataset,
                     const SimulatedTruth& truth) {
  std::vector<std::vector<std::string>> rows;
  const auto param_row = [&rows](const std::string& name, double value) {
    rows.push_back({"param", "", name, format_double(value)});
  };
  const SimulationParams& p = truth.params;
  param_row("beta0", p.beta[0]);
  param_row("beta_ns1", p.beta[1]);
  param_row("beta_ns2", p.beta[2]);
  param_row("beta_ns3", p.beta[3]);
  param_row("sigma_y", p.sigma_y);
  param_row("phi0", p.phi0);
  param_row("sigma0", p.sigma0);
  param_row("gamma_sex", p.gamma_sex);
  param_row("gamma_age", p.gamma_age);
  param_row("alpha", p.alpha);
  param_row("n_i", p.n_i);
  param_row("t_max", p.t_max);
  param_row("seed", static_cast<double>(truth.seed));
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c <= r; ++c) {
      param_row("sigma_b_" + std::to_string(r + 1) + std::to_string(c + 1), p.sigma_b(r, c));
    }
  }
  for (std::size_t i = 0; i < truth.subjects.size(); ++i) {
    const auto& st = truth.subjects[i];
    const std::string& id = dataset.subjects[i].id;
    for (int j = 0; j < 4; ++j) {
      rows.push_back({"subject", id, "b" + std::to_string(j), format_double(st.b[j])});
    }
    rows.push_back({"subject", id, "t_star", format_double(st.true_event_time)});
  }
  write_csv(path, {"kind", "id", "name", "value"}, rows);
}

}  // namespace cjm
