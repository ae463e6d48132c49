#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cjm/basis.hpp"
#include "cjm/data.hpp"

namespace cjm {

/// Generating parameters for the simulation study.
struct SimulationParams {
  Eigen::Vector4d beta{6.94, 1.30, 1.84, 1.82};  // (beta0, beta_ns1, beta_ns2, beta_ns3)
  double sigma_y = 0.6;
  Eigen::Matrix4d sigma_b;  // random-effects covariance
  double phi0 = 0.0;        // Weibull scale, default exp(-9)
  double sigma0 = 2.0;      // Weibull shape
  double gamma_sex = 0.5;
  double gamma_age = 0.05;
  double alpha = 0.5;
  int n_i = 11;       // planned measurements per subject (before truncation)
  double t_max = 7.0; // administrative censoring time (years)

  void validate() const;  // throws NumericalError on broken invariants
};

SimulationParams default_params();

struct SubjectTruth {
  Eigen::Vector4d b;
  double true_event_time = 0.0;  // +inf when the event lies beyond the horizon
};

struct SimulatedTruth {
  SimulationParams params;
  std::uint64_t seed = 0;
  std::vector<SubjectTruth> subjects;
  NaturalSplineDesign ns;  // the generating basis (fit on pooled planned times)
};

/// Fixed per-subject quantities entering the hazard.
struct SubjectCovariates {
  double sex = 0.0;  // 1 = male
  double age = 0.0;
};

/// H_i(t) = ∫_0^t h0(s) exp(γ_sex sex + γ_age age + α η_i(s)) ds by the shared
/// composite Gauss–Legendre contract, with η_i(s) from the generating spline.
double cumulative_hazard(const SimulationParams& params, const SubjectCovariates& cov,
                         const Eigen::Vector4d& b, const NaturalSplineDesign& ns, double t);

/// Root of exp(-H_i(t)) = u. Returns +inf when H stays below -log(u) out to a
/// generous horizon (1e3 years).
double invert_survival(const SimulationParams& params, const SubjectCovariates& cov,
                       const Eigen::Vector4d& b, const NaturalSplineDesign& ns, double u);

/// The full 14-step generation recipe. Deterministic given (params, n, seed);
/// per-subject streams are split from the seed, so any evaluation order gives
/// the same dataset.
std::pair<JointDataset, SimulatedTruth> simulate_dataset(const SimulationParams& params, int n,
                                                         std::uint64_t seed);

void write_truth_csv(const std::string& path, const JointDataset& dataset,
                     const SimulatedTruth& truth);

}  // namespace cjm
