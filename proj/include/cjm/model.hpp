#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cjm/basis.hpp"
#include "cjm/data.hpp"

namespace cjm {

enum class BaselineKind { kWeibull, kPspline };

/// Prior hyperparameters. Regression blocks carry independent normals; the
/// variance components carry conjugate families (inverse-gamma / inverse-
/// Wishart) so the sampler's Gibbs steps are exact; the P-spline coefficients
/// carry the Eilers-Marx random-walk prior with precision tau*D2'D2 + ridge*I
/// and a Gamma hyperprior on tau.
struct PriorConfig {
  double sd_beta = 10.0;
  double sd_gamma = 10.0;
  double sd_alpha = 10.0;
  double sd_weibull_log = 2.0;  // on log phi and log sigma0
  double sigma2_shape = 1.0;    // IG prior on sigma_y^2
  double sigma2_scale = 0.1;
  double wishart_df_delta = 2.0;  // nu0 = q + delta, Psi0 = I
  double pspline_tau_shape = 1.0;
  double pspline_tau_rate = 0.005;
  double pspline_ridge = 1e-6;
};

/// What to fit: fixed design is intercept + ns(df) of time + named
/// longitudinal covariates; random design is a named subset of fixed columns
/// (default intercept + all spline columns); hazard uses the named survival
/// covariates and the current-value association alpha * eta_i(t).
struct ModelSpec {
  int ns_df = 3;
  std::vector<std::string> long_covariates;
  std::vector<std::string> surv_covariates;
  std::vector<std::string> random_effects;  // empty = intercept + ns columns
  BaselineKind baseline = BaselineKind::kPspline;
  int pspline_basis = 15;
  bool longitudinal_only = false;  // drop the survival submodel (LMM sub-case)
  PriorConfig priors;

  // Optional pinned spline supports. The fit pipeline pins these from the
  // full dataset before splitting so every subsample shares one design and
  // subposterior draws are parameter-for-parameter comparable.
  bool has_fixed_time_basis = false;
  double time_low = 0.0;
  double time_high = 0.0;
  std::vector<double> time_interior_knots;
  double baseline_time_high = 0.0;  // 0 = derive from data

  /// Copy of this spec with the spline supports pinned from `data`.
  ModelSpec with_pinned_design(const JointDataset& data) const;
};

/// Fixed ordering of the unconstrained parameter vector:
///   beta | [gamma | alpha] | log_sigma_y | log-Cholesky(Sigma_b)
///   | [baseline: (log_phi, log_sigma0) or (bs coefficients..., log_tau)]
/// The log-Cholesky block stores the q log-diagonal entries first, then the
/// strict lower triangle column-major.
struct ParamLayout {
  int p_beta = 0;
  int p_gamma = 0;
  int q = 0;
  int n_bs = 0;
  BaselineKind baseline = BaselineKind::kWeibull;
  bool longitudinal_only = false;

  int beta_off = 0;
  int gamma_off = 0;
  int alpha_off = 0;
  int lsig_off = 0;
  int chol_off = 0;
  int base_off = 0;
  int total = 0;

  std::vector<std::string> names;              // unconstrained-scale names
  std::vector<std::string> constrained_names;  // back-transformed summary names

  int n_chol() const { return q * (q + 1) / 2; }
  int size() const { return total; }
};

/// Constrained-scale parameter state.
struct Params {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  double alpha = 0.0;
  double sigma_y = 1.0;
  Eigen::MatrixXd sigma_b;
  Eigen::MatrixXd sigma_b_chol;  // lower factor, kept alongside sigma_b
  double log_phi = 0.0;
  double log_sigma0 = 0.0;
  Eigen::VectorXd bs_coef;
  double log_tau = 0.0;
};

Params decode_params(const ParamLayout& layout, const Eigen::VectorXd& theta);
Eigen::VectorXd encode_params(const ParamLayout& layout, const Params& params);

/// Back-transform one unconstrained draw into the constrained summary vector
/// (order given by layout.constrained_names).
Eigen::VectorXd constrain_draw(const ParamLayout& layout, const Eigen::VectorXd& theta);

/// The joint model bound to a dataset: design matrices, per-subject hazard
/// quadrature grids, likelihoods, power-scaled prior, posterior. All
/// evaluation methods are const and safe to call concurrently.
class JointModel {
 public:
  JointModel(const ModelSpec& spec, const JointDataset& data);

  const ModelSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  const NaturalSplineDesign& time_basis() const { return ns_; }
  const BSplineBasis& baseline_basis() const { return baseline_bs_; }
  int n_subjects() const { return static_cast<int>(subjects_.size()); }
  int n_obs() const { return static_cast<int>(y_.size()); }
  int n_random() const { return layout_.q; }

  double loglik_longitudinal(const Params& p, const Eigen::MatrixXd& b) const;
  double loglik_longitudinal_subject(int i, const Params& p, const Eigen::VectorXd& b_i) const;
  double loglik_survival(const Params& p, const Eigen::MatrixXd& b) const;
  double loglik_survival_subject(int i, const Params& p, const Eigen::VectorXd& b_i) const;
  /// Sum_i log N(b_i | 0, Sigma_b).
  double log_re_density(const Params& p, const Eigen::MatrixXd& b) const;
  double log_re_density_subject(const Params& p, const Eigen::VectorXd& b_i) const;
  /// (1/S) * sum of component log-priors, evaluated on the constrained scale.
  double log_prior(const Params& p, int n_splits) const;
  double log_posterior(const Params& p, const Eigen::MatrixXd& b, int n_splits) const;

  /// Squared residual sum at the current state (conjugate sigma_y^2 update).
  double sum_squared_residuals(const Params& p, const Eigen::MatrixXd& b) const;

  /// P-spline pieces needed by the smoothing-parameter update.
  double pspline_quadform(const Eigen::VectorXd& coef) const;  // c' D2'D2 c
  double log_prior_pspline_coef(const Eigen::VectorXd& coef, double tau) const;
  const Eigen::VectorXd& penalty_eigenvalues() const { return penalty_eigs_; }

  /// Least-squares/moment starting state; chains differ by an N(0, 0.1^2)
  /// jitter on the unconstrained scale drawn from `jitter_seed`.
  std::pair<Params, Eigen::MatrixXd> initialize(std::uint64_t jitter_seed) const;

 private:
  struct SubjectData {
    int row_begin = 0;
    int row_end = 0;
    Eigen::VectorXd w_cov;  // survival covariates
    int event = 0;
    double t_event = 0.0;
    // event-time design
    double log_t_event = 0.0;
    Eigen::VectorXd x_event, z_event, bs_event;
    // quadrature grid over [0, t_event]
    Eigen::VectorXd quad_w, quad_log_t;
    Eigen::MatrixXd quad_x, quad_z, quad_bs;
  };

  Eigen::VectorXd fixed_design_row(double t, const Eigen::VectorXd& covs) const;

  ModelSpec spec_;
  ParamLayout layout_;
  NaturalSplineDesign ns_;
  BSplineBasis baseline_bs_;
  Eigen::MatrixXd penalty_;
  Eigen::VectorXd penalty_eigs_;
  std::vector<int> random_cols_;
  std::vector<std::string> fixed_names_;

  Eigen::MatrixXd x_, z_;
  Eigen::VectorXd y_;
  std::vector<SubjectData> subjects_;
};

}  // namespace cjm
