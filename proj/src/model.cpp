#include "cjm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cjm/errors.hpp"
#include "cjm/quadrature.hpp"
#include "cjm/rng.hpp"

namespace cjm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal_density(double x, double sd) {
  const double z = x / sd;
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

// log Gamma_q(a), the multivariate log-gamma.
double lmgamma(int q, double a) {
  double out = 0.25 * q * (q - 1) * std::log(M_PI);
  for (int j = 1; j <= q; ++j) {
    out += std::lgamma(a + 0.5 * (1 - j));
  }
  return out;
}

ParamLayout build_layout(const ModelSpec& spec, const std::vector<std::string>& fixed_names,
                         const std::vector<std::string>& surv_names, int q,
                         const std::vector<std::string>& random_names) {
  ParamLayout lay;
  lay.p_beta = static_cast<int>(fixed_names.size());
  lay.p_gamma = spec.longitudinal_only ? 0 : static_cast<int>(surv_names.size());
  lay.q = q;
  lay.baseline = spec.baseline;
  lay.n_bs = (spec.baseline == BaselineKind::kPspline) ? spec.pspline_basis : 0;
  lay.longitudinal_only = spec.longitudinal_only;

  int off = 0;
  lay.beta_off = off;
  off += lay.p_beta;
  lay.gamma_off = off;
  off += lay.p_gamma;
  lay.alpha_off = off;
  if (!spec.longitudinal_only) off += 1;
  lay.lsig_off = off;
  off += 1;
  lay.chol_off = off;
  off += lay.n_chol();
  lay.base_off = off;
  if (!spec.longitudinal_only) {
    off += (spec.baseline == BaselineKind::kWeibull) ? 2 : lay.n_bs + 1;
  }
  lay.total = off;

  for (const auto& n : fixed_names) lay.names.push_back("beta_" + n);
  if (!spec.longitudinal_only) {
    for (const auto& n : surv_names) lay.names.push_back("gamma_" + n);
    lay.names.push_back("alpha");
  }
  lay.names.push_back("log_sigma_y");
  for (int k = 0; k < q; ++k) {
    lay.names.push_back("re_chol_log_d" + std::to_string(k + 1));
  }
  for (int c = 0; c < q; ++c) {
    for (int r = c + 1; r < q; ++r) {
      lay.names.push_back("re_chol_" + std::to_string(r + 1) + "_" + std::to_string(c + 1));
    }
  }
  if (!spec.longitudinal_only) {
    if (spec.baseline == BaselineKind::kWeibull) {
      lay.names.push_back("h0_log_phi");
      lay.names.push_back("h0_log_sigma0");
    } else {
      for (int k = 0; k < lay.n_bs; ++k) {
        lay.names.push_back("h0_bs" + std::to_string(k + 1));
      }
      lay.names.push_back("h0_log_tau");
    }
  }

  for (const auto& n : fixed_names) lay.constrained_names.push_back("beta_" + n);
  if (!spec.longitudinal_only) {
    for (const auto& n : surv_names) lay.constrained_names.push_back("gamma_" + n);
    lay.constrained_names.push_back("alpha");
  }
  lay.constrained_names.push_back("sigma_y");
  for (int c = 0; c < q; ++c) {
    for (int r = c; r < q; ++r) {
      lay.constrained_names.push_back("sigma_b_" + std::to_string(r + 1) + "_" +
                                      std::to_string(c + 1));
    }
  }
  if (!spec.longitudinal_only) {
    if (spec.baseline == BaselineKind::kWeibull) {
      lay.constrained_names.push_back("h0_phi");
      lay.constrained_names.push_back("h0_sigma0");
    } else {
      for (int k = 0; k < lay.n_bs; ++k) {
        lay.constrained_names.push_back("h0_bs" + std::to_string(k + 1));
      }
      lay.constrained_names.push_back("h0_tau");
    }
  }
  return lay;
}

}  // namespace

ModelSpec ModelSpec::with_pinned_design(const JointDataset& data) const {
  ModelSpec pinned = *this;
  std::vector<double> pooled;
  double max_time = 0.0;
  for (const auto& subj : data.subjects) {
    for (const auto& rec : subj.longitudinal) pooled.push_back(rec.time);
    max_time = std::max(max_time, subj.survival.observed_time);
  }
  const NaturalSplineDesign fitted = [&] {
    const std::set<double> distinct(pooled.begin(), pooled.end());
    if (distinct.size() >= static_cast<std::size_t>(ns_df) + 1) {
      return ns_design_fit(pooled, ns_df);
    }
    const double hi = std::max(max_time, 1.0);
    std::vector<double> fallback;
    for (int i = 0; i <= 40; ++i) fallback.push_back(hi * i / 40.0);
    return ns_design_fit(fallback, ns_df);
  }();
  pinned.has_fixed_time_basis = true;
  pinned.time_low = fitted.boundary_low();
  pinned.time_high = fitted.boundary_high();
  pinned.time_interior_knots = fitted.interior_knots();
  pinned.baseline_time_high = std::max(max_time, 1e-8);
  return pinned;
}

Params decode_params(const ParamLayout& lay, const Eigen::VectorXd& theta) {
  if (theta.size() != lay.size()) {
    throw NumericalError("parameter vector has wrong length");
  }
  Params p;
  p.beta = theta.segment(lay.beta_off, lay.p_beta);
  if (!lay.longitudinal_only) {
    p.gamma = theta.segment(lay.gamma_off, lay.p_gamma);
    p.alpha = theta[lay.alpha_off];
  } else {
    p.gamma.resize(0);
  }
  p.sigma_y = std::exp(theta[lay.lsig_off]);

  const int q = lay.q;
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(q, q);
  for (int k = 0; k < q; ++k) {
    chol(k, k) = std::exp(theta[lay.chol_off + k]);
  }
  int idx = lay.chol_off + q;
  for (int c = 0; c < q; ++c) {
    for (int r = c + 1; r < q; ++r) {
      chol(r, c) = theta[idx++];
    }
  }
  p.sigma_b_chol = chol;
  p.sigma_b = chol * chol.transpose();

  if (!lay.longitudinal_only) {
    if (lay.baseline == BaselineKind::kWeibull) {
      p.log_phi = theta[lay.base_off];
      p.log_sigma0 = theta[lay.base_off + 1];
    } else {
      p.bs_coef = theta.segment(lay.base_off, lay.n_bs);
      p.log_tau = theta[lay.base_off + lay.n_bs];
    }
  }
  return p;
}

Eigen::VectorXd encode_params(const ParamLayout& lay, const Params& p) {
  Eigen::VectorXd theta(lay.size());
  theta.segment(lay.beta_off, lay.p_beta) = p.beta;
  if (!lay.longitudinal_only) {
    theta.segment(lay.gamma_off, lay.p_gamma) = p.gamma;
    theta[lay.alpha_off] = p.alpha;
  }
  theta[lay.lsig_off] = std::log(p.sigma_y);

  Eigen::MatrixXd chol = p.sigma_b_chol;
  if (chol.size() == 0) {
    const Eigen::LLT<Eigen::MatrixXd> llt(p.sigma_b);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("sigma_b is not positive definite");
    }
    chol = llt.matrixL();
  }
  for (int k = 0; k < lay.q; ++k) {
    theta[lay.chol_off + k] = std::log(chol(k, k));
  }
  int idx = lay.chol_off + lay.q;
  for (int c = 0; c < lay.q; ++c) {
    for (int r = c + 1; r < lay.q; ++r) {
      theta[idx++] = chol(r, c);
    }
  }
  if (!lay.longitudinal_only) {
    if (lay.baseline == BaselineKind::kWeibull) {
      theta[lay.base_off] = p.log_phi;
      theta[lay.base_off + 1] = p.log_sigma0;
    } else {
      theta.segment(lay.base_off, lay.n_bs) = p.bs_coef;
      theta[lay.base_off + lay.n_bs] = p.log_tau;
    }
  }
  return theta;
}

Eigen::VectorXd constrain_draw(const ParamLayout& lay, const Eigen::VectorXd& theta) {
  const Params p = decode_params(lay, theta);
  Eigen::VectorXd out(static_cast<Eigen::Index>(lay.constrained_names.size()));
  int k = 0;
  for (int j = 0; j < lay.p_beta; ++j) out[k++] = p.beta[j];
  if (!lay.longitudinal_only) {
    for (int j = 0; j < lay.p_gamma; ++j) out[k++] = p.gamma[j];
    out[k++] = p.alpha;
  }
  out[k++] = p.sigma_y;
  for (int c = 0; c < lay.q; ++c) {
    for (int r = c; r < lay.q; ++r) out[k++] = p.sigma_b(r, c);
  }
  if (!lay.longitudinal_only) {
    if (lay.baseline == BaselineKind::kWeibull) {
      out[k++] = std::exp(p.log_phi);
      out[k++] = std::exp(p.log_sigma0);
    } else {
      for (int j = 0; j < lay.n_bs; ++j) out[k++] = p.bs_coef[j];
      out[k++] = std::exp(p.log_tau);
    }
  }
  return out;
}

Eigen::VectorXd JointModel::fixed_design_row(double t, const Eigen::VectorXd& covs) const {
  Eigen::VectorXd row(layout_.p_beta);
  row[0] = 1.0;
  const Eigen::VectorXd s = ns_.eval(t);
  row.segment(1, spec_.ns_df) = s;
  for (int c = 0; c < covs.size(); ++c) {
    row[1 + spec_.ns_df + c] = covs[c];
  }
  return row;
}

JointModel::JointModel(const ModelSpec& spec, const JointDataset& data) : spec_(spec) {
  // resolve covariate names
  std::vector<int> long_cov_idx;
  for (const auto& name : spec.long_covariates) {
    const auto it =
        std::find(data.long_covariate_names.begin(), data.long_covariate_names.end(), name);
    if (it == data.long_covariate_names.end()) {
      throw DataError("longitudinal covariate '" + name + "' not present in dataset");
    }
    long_cov_idx.push_back(static_cast<int>(it - data.long_covariate_names.begin()));
  }
  std::vector<int> surv_cov_idx;
  for (const auto& name : spec.surv_covariates) {
    const auto it =
        std::find(data.surv_covariate_names.begin(), data.surv_covariate_names.end(), name);
    if (it == data.surv_covariate_names.end()) {
      throw DataError("survival covariate '" + name + "' not present in dataset");
    }
    surv_cov_idx.push_back(static_cast<int>(it - data.surv_covariate_names.begin()));
  }

  fixed_names_.push_back("intercept");
  for (int j = 1; j <= spec.ns_df; ++j) fixed_names_.push_back("ns" + std::to_string(j));
  for (const auto& name : spec.long_covariates) fixed_names_.push_back(name);

  // random-effect design: named subset of fixed columns
  std::vector<std::string> random_names = spec.random_effects;
  if (random_names.empty()) {
    random_names.push_back("intercept");
    for (int j = 1; j <= spec.ns_df; ++j) random_names.push_back("ns" + std::to_string(j));
  }
  for (const auto& name : random_names) {
    const auto it = std::find(fixed_names_.begin(), fixed_names_.end(), name);
    if (it == fixed_names_.end()) {
      throw DataError("random-effect column '" + name + "' is not a fixed-design column");
    }
    random_cols_.push_back(static_cast<int>(it - fixed_names_.begin()));
  }

  // time basis: pinned knots when provided, otherwise fit on pooled observed
  // times (grid fallback for datasets too small to place quantile knots)
  std::vector<double> pooled;
  std::set<double> distinct;
  double max_time = 0.0;
  for (const auto& subj : data.subjects) {
    for (const auto& rec : subj.longitudinal) {
      pooled.push_back(rec.time);
      distinct.insert(rec.time);
    }
    max_time = std::max(max_time, subj.survival.observed_time);
  }
  bool basis_set = false;
  if (spec.has_fixed_time_basis) {
    ns_ = ns_design_from_knots(spec.time_low, spec.time_high, spec.time_interior_knots);
    if (static_cast<int>(spec.time_interior_knots.size()) + 1 != spec.ns_df) {
      throw DataError("pinned time basis does not match ns_df");
    }
    basis_set = true;
  } else if (distinct.size() >= static_cast<std::size_t>(spec.ns_df) + 1) {
    try {
      ns_ = ns_design_fit(pooled, spec.ns_df);
      basis_set = true;
    } catch (const NumericalError&) {
      // quantile knots collided (heavily tied times); fall through to the grid
    }
  }
  if (!basis_set) {
    const double hi = std::max(max_time, 1.0);
    std::vector<double> fallback;
    for (int i = 0; i <= 40; ++i) fallback.push_back(hi * i / 40.0);
    ns_ = ns_design_fit(fallback, spec.ns_df);
  }

  std::vector<double> quad_breaks = ns_.interior_knots();
  if (!spec.longitudinal_only && spec.baseline == BaselineKind::kPspline) {
    const double bs_hi = (spec.baseline_time_high > 0.0) ? spec.baseline_time_high
                                                         : std::max(max_time, 1e-8);
    baseline_bs_ = BSplineBasis(0.0, bs_hi, spec.pspline_basis);
    penalty_ = second_difference_penalty(spec.pspline_basis);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(penalty_);
    penalty_eigs_ = es.eigenvalues().cwiseMax(0.0);
    for (double k : baseline_bs_.interior_knots()) quad_breaks.push_back(k);
  }
  std::sort(quad_breaks.begin(), quad_breaks.end());

  layout_ = build_layout(spec, fixed_names_, spec.surv_covariates,
                         static_cast<int>(random_cols_.size()), random_names);

  // flatten the longitudinal data, rows grouped by subject
  const int n_obs = static_cast<int>(data.n_longitudinal_records());
  x_.resize(n_obs, layout_.p_beta);
  z_.resize(n_obs, layout_.q);
  y_.resize(n_obs);
  int row = 0;
  for (const auto& subj : data.subjects) {
    SubjectData sd;
    sd.row_begin = row;
    Eigen::VectorXd covs(static_cast<Eigen::Index>(long_cov_idx.size()));
    for (const auto& rec : subj.longitudinal) {
      for (std::size_t c = 0; c < long_cov_idx.size(); ++c) {
        covs[static_cast<Eigen::Index>(c)] = rec.covariates[long_cov_idx[c]];
      }
      const Eigen::VectorXd xrow = fixed_design_row(rec.time, covs);
      x_.row(row) = xrow.transpose();
      for (std::size_t c = 0; c < random_cols_.size(); ++c) {
        z_(row, static_cast<Eigen::Index>(c)) = xrow[random_cols_[c]];
      }
      y_[row] = rec.value;
      ++row;
    }
    sd.row_end = row;

    // hazard pieces; time-varying longitudinal covariates are frozen at the
    // subject's first record for evaluation at arbitrary t
    Eigen::VectorXd base_covs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(long_cov_idx.size()));
    if (!subj.longitudinal.empty()) {
      for (std::size_t c = 0; c < long_cov_idx.size(); ++c) {
        base_covs[static_cast<Eigen::Index>(c)] =
            subj.longitudinal.front().covariates[long_cov_idx[c]];
      }
    }
    sd.event = subj.survival.event;
    sd.t_event = subj.survival.observed_time;
    sd.w_cov.resize(static_cast<Eigen::Index>(surv_cov_idx.size()));
    for (std::size_t c = 0; c < surv_cov_idx.size(); ++c) {
      sd.w_cov[static_cast<Eigen::Index>(c)] = subj.survival.covariates[surv_cov_idx[c]];
    }

    if (!spec.longitudinal_only) {
      sd.log_t_event = std::log(sd.t_event);
      const Eigen::VectorXd xe = fixed_design_row(sd.t_event, base_covs);
      sd.x_event = xe;
      sd.z_event.resize(layout_.q);
      for (std::size_t c = 0; c < random_cols_.size(); ++c) {
        sd.z_event[static_cast<Eigen::Index>(c)] = xe[random_cols_[c]];
      }
      if (spec.baseline == BaselineKind::kPspline) {
        sd.bs_event = baseline_bs_.eval(sd.t_event);
      }

      const QuadratureGrid grid = composite_gl15_grid(0.0, sd.t_event, quad_breaks);
      const int m = static_cast<int>(grid.points.size());
      sd.quad_w.resize(m);
      sd.quad_log_t.resize(m);
      sd.quad_x.resize(m, layout_.p_beta);
      sd.quad_z.resize(m, layout_.q);
      if (spec.baseline == BaselineKind::kPspline) sd.quad_bs.resize(m, layout_.n_bs);
      for (int j = 0; j < m; ++j) {
        const double t = grid.points[j];
        sd.quad_w[j] = grid.weights[j];
        sd.quad_log_t[j] = std::log(t);
        const Eigen::VectorXd xq = fixed_design_row(t, base_covs);
        sd.quad_x.row(j) = xq.transpose();
        for (std::size_t c = 0; c < random_cols_.size(); ++c) {
          sd.quad_z(j, static_cast<Eigen::Index>(c)) = xq[random_cols_[c]];
        }
        if (spec.baseline == BaselineKind::kPspline) {
          sd.quad_bs.row(j) = baseline_bs_.eval(t).transpose();
        }
      }
    }
    subjects_.push_back(std::move(sd));
  }
}

double JointModel::loglik_longitudinal(const Params& p, const Eigen::MatrixXd& b) const {
  double ll = 0.0;
  for (int i = 0; i < n_subjects(); ++i) {
    ll += loglik_longitudinal_subject(i, p, b.row(i).transpose());
  }
  return ll;
}

double JointModel::loglik_longitudinal_subject(int i, const Params& p,
                                               const Eigen::VectorXd& b_i) const {
  const SubjectData& sd = subjects_[static_cast<std::size_t>(i)];
  const int m = sd.row_end - sd.row_begin;
  if (m == 0) return 0.0;
  const auto xb = x_.middleRows(sd.row_begin, m) * p.beta;
  const auto zb = z_.middleRows(sd.row_begin, m) * b_i;
  const Eigen::VectorXd resid = y_.segment(sd.row_begin, m) - xb - zb;
  const double s2 = p.sigma_y * p.sigma_y;
  return -0.5 * m * (kLog2Pi + std::log(s2)) - 0.5 * resid.squaredNorm() / s2;
}

double JointModel::loglik_survival(const Params& p, const Eigen::MatrixXd& b) const {
  double ll = 0.0;
  for (int i = 0; i < n_subjects(); ++i) {
    ll += loglik_survival_subject(i, p, b.row(i).transpose());
  }
  return ll;
}

double JointModel::loglik_survival_subject(int i, const Params& p,
                                           const Eigen::VectorXd& b_i) const {
  if (spec_.longitudinal_only) return 0.0;
  const SubjectData& sd = subjects_[static_cast<std::size_t>(i)];
  const double wg = (sd.w_cov.size() > 0) ? sd.w_cov.dot(p.gamma) : 0.0;

  Eigen::VectorXd log_h0_nodes;
  double log_h0_event;
  if (layout_.baseline == BaselineKind::kWeibull) {
    const double sigma0 = std::exp(p.log_sigma0);
    log_h0_nodes = (p.log_phi + p.log_sigma0) +
                   ((sigma0 - 1.0) * sd.quad_log_t.array());
    log_h0_event = p.log_phi + p.log_sigma0 + (sigma0 - 1.0) * sd.log_t_event;
  } else {
    log_h0_nodes = sd.quad_bs * p.bs_coef;
    log_h0_event = sd.bs_event.dot(p.bs_coef);
  }

  const Eigen::VectorXd eta_nodes = sd.quad_x * p.beta + sd.quad_z * b_i;
  const double hazard_cum =
      (sd.quad_w.array() * (log_h0_nodes.array() + wg + p.alpha * eta_nodes.array()).exp())
          .sum();
  if (!std::isfinite(hazard_cum)) {
    throw NumericalError("non-finite cumulative hazard");
  }
  double ll = -hazard_cum;
  if (sd.event == 1) {
    const double eta_event = sd.x_event.dot(p.beta) + sd.z_event.dot(b_i);
    ll += log_h0_event + wg + p.alpha * eta_event;
  }
  return ll;
}

double JointModel::log_re_density(const Params& p, const Eigen::MatrixXd& b) const {
  double ll = 0.0;
  for (int i = 0; i < n_subjects(); ++i) {
    ll += log_re_density_subject(p, b.row(i).transpose());
  }
  return ll;
}

double JointModel::log_re_density_subject(const Params& p, const Eigen::VectorXd& b_i) const {
  const int q = layout_.q;
  const Eigen::VectorXd u = p.sigma_b_chol.triangularView<Eigen::Lower>().solve(b_i);
  double log_det = 0.0;
  for (int k = 0; k < q; ++k) log_det += std::log(p.sigma_b_chol(k, k));
  return -0.5 * q * kLog2Pi - log_det - 0.5 * u.squaredNorm();
}

double JointModel::pspline_quadform(const Eigen::VectorXd& coef) const {
  return coef.dot(penalty_ * coef);
}

double JointModel::log_prior_pspline_coef(const Eigen::VectorXd& coef, double tau) const {
  // Gaussian with precision K = tau * D2'D2 + ridge * I
  const double ridge = spec_.priors.pspline_ridge;
  double log_det = 0.0;
  for (int k = 0; k < penalty_eigs_.size(); ++k) {
    log_det += std::log(tau * penalty_eigs_[k] + ridge);
  }
  const double quad = tau * pspline_quadform(coef) + ridge * coef.squaredNorm();
  return -0.5 * layout_.n_bs * kLog2Pi + 0.5 * log_det - 0.5 * quad;
}

double JointModel::log_prior(const Params& p, int n_splits) const {
  if (n_splits < 1) throw UsageError("n_splits must be >= 1");
  const PriorConfig& pr = spec_.priors;
  double lp = 0.0;
  for (int j = 0; j < p.beta.size(); ++j) lp += log_normal_density(p.beta[j], pr.sd_beta);
  if (!layout_.longitudinal_only) {
    for (int j = 0; j < p.gamma.size(); ++j) lp += log_normal_density(p.gamma[j], pr.sd_gamma);
    lp += log_normal_density(p.alpha, pr.sd_alpha);
  }

  // sigma_y^2 ~ inverse-gamma(shape, scale)
  const double s2 = p.sigma_y * p.sigma_y;
  lp += pr.sigma2_shape * std::log(pr.sigma2_scale) - std::lgamma(pr.sigma2_shape) -
        (pr.sigma2_shape + 1.0) * std::log(s2) - pr.sigma2_scale / s2;

  // Sigma_b ~ inverse-Wishart(nu0, I)
  const int q = layout_.q;
  const double nu0 = q + pr.wishart_df_delta;
  double log_det_sigma = 0.0;
  for (int k = 0; k < q; ++k) log_det_sigma += 2.0 * std::log(p.sigma_b_chol(k, k));
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(q, q);
  const double trace_inv =
      p.sigma_b_chol.triangularView<Eigen::Lower>()
          .solve(identity)
          .squaredNorm();  // tr(Sigma^-1) = ||L^-1||_F^2
  lp += -0.5 * nu0 * q * std::log(2.0) - lmgamma(q, 0.5 * nu0) -
        0.5 * (nu0 + q + 1.0) * log_det_sigma - 0.5 * trace_inv;

  if (!layout_.longitudinal_only) {
    if (layout_.baseline == BaselineKind::kWeibull) {
      lp += log_normal_density(p.log_phi, pr.sd_weibull_log);
      lp += log_normal_density(p.log_sigma0, pr.sd_weibull_log);
    } else {
      const double tau = std::exp(p.log_tau);
      lp += log_prior_pspline_coef(p.bs_coef, tau);
      lp += pr.pspline_tau_shape * std::log(pr.pspline_tau_rate) -
            std::lgamma(pr.pspline_tau_shape) + (pr.pspline_tau_shape - 1.0) * std::log(tau) -
            pr.pspline_tau_rate * tau;
    }
  }
  return lp / static_cast<double>(n_splits);
}

double JointModel::log_posterior(const Params& p, const Eigen::MatrixXd& b, int n_splits) const {
  double lp = loglik_longitudinal(p, b);
  if (!layout_.longitudinal_only) lp += loglik_survival(p, b);
  lp += log_re_density(p, b);
  lp += log_prior(p, n_splits);
  return lp;
}

double JointModel::sum_squared_residuals(const Params& p, const Eigen::MatrixXd& b) const {
  double ssr = 0.0;
  for (int i = 0; i < n_subjects(); ++i) {
    const SubjectData& sd = subjects_[static_cast<std::size_t>(i)];
    const int m = sd.row_end - sd.row_begin;
    if (m == 0) continue;
    const Eigen::VectorXd resid = y_.segment(sd.row_begin, m) -
                                  x_.middleRows(sd.row_begin, m) * p.beta -
                                  z_.middleRows(sd.row_begin, m) * b.row(i).transpose();
    ssr += resid.squaredNorm();
  }
  return ssr;
}

std::pair<Params, Eigen::MatrixXd> JointModel::initialize(std::uint64_t jitter_seed) const {
  Params p;
  const int n = n_subjects();
  const int q = layout_.q;

  if (n_obs() > 0) {
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(x_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() < layout_.p_beta || sv[sv.size() - 1] <= 1e-10 * sv[0]) {
      throw NumericalError("singular fixed-effect design (collinear columns)");
    }
    p.beta = svd.solve(y_);
    const Eigen::VectorXd resid = y_ - x_ * p.beta;
    const double dof = std::max(1, n_obs() - layout_.p_beta);
    p.sigma_y = std::max(1e-3, std::sqrt(resid.squaredNorm() / dof));
  } else {
    p.beta = Eigen::VectorXd::Zero(layout_.p_beta);
    p.sigma_y = 1.0;
  }

  p.gamma = Eigen::VectorXd::Zero(layout_.longitudinal_only ? 0 : layout_.p_gamma);
  p.alpha = 0.0;
  p.sigma_b = Eigen::MatrixXd::Identity(q, q);
  p.sigma_b_chol = Eigen::MatrixXd::Identity(q, q);

  if (!layout_.longitudinal_only) {
    // censored-Weibull moment fit with unit shape: rate = events / exposure
    double events = 0.0;
    double exposure = 0.0;
    for (const auto& sd : subjects_) {
      events += sd.event;
      exposure += sd.t_event;
    }
    const double rate = std::max(events, 0.5) / std::max(exposure, 1e-8);
    if (layout_.baseline == BaselineKind::kWeibull) {
      p.log_phi = std::log(rate);
      p.log_sigma0 = 0.0;
    } else {
      p.bs_coef = Eigen::VectorXd::Constant(layout_.n_bs, std::log(rate));
      p.log_tau = 0.0;
    }
  }

  Eigen::VectorXd theta = encode_params(layout_, p);
  Rng rng(jitter_seed);
  for (int k = 0; k < theta.size(); ++k) {
    theta[k] += 0.1 * rng.normal();
  }
  return {decode_params(layout_, theta), Eigen::MatrixXd::Zero(n, q)};
}

}  // namespace cjm
