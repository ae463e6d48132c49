#include "cjm/sampler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "cjm/csv.hpp"
#include "cjm/errors.hpp"
#include "cjm/rng.hpp"

namespace cjm {

namespace {

constexpr std::uint64_t kInitStream = 0xA11;
constexpr std::uint64_t kWalkStream = 0xB22;

/// Random-walk Metropolis block with warmup-only adaptation: Robbins-Monro
/// scale steps toward the target acceptance rate every `window` iterations,
/// plus a running-covariance proposal shape (Haario style) for
/// multidimensional blocks.
class AdaptiveRwmBlock {
 public:
  AdaptiveRwmBlock() = default;
  AdaptiveRwmBlock(int dim, double init_scale, int window)
      : dim_(dim),
        target_(dim > 1 ? 0.234 : 0.44),
        log_scale_(std::log(init_scale)),
        window_(window),
        shape_(Eigen::MatrixXd::Identity(dim, dim)),
        mean_(Eigen::VectorXd::Zero(dim)),
        m2_(Eigen::MatrixXd::Zero(dim, dim)) {}

  Eigen::VectorXd propose(const Eigen::VectorXd& current, Rng& rng) const {
    Eigen::VectorXd z(dim_);
    for (int j = 0; j < dim_; ++j) z[j] = rng.normal();
    return current + std::exp(log_scale_) * (shape_ * z);
  }

  void record(bool accepted, const Eigen::VectorXd& state) {
    if (frozen_) {
      post_n_ += 1;
      post_acc_ += accepted ? 1 : 0;
      return;
    }
    batch_n_ += 1;
    batch_acc_ += accepted ? 1 : 0;
    // running covariance of visited states
    n_ += 1;
    const Eigen::VectorXd delta = state - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (state - mean_).transpose();
    if (batch_n_ >= window_) {
      batch_count_ += 1;
      const double rate = static_cast<double>(batch_acc_) / batch_n_;
      const double step = std::min(0.5, 2.0 / std::sqrt(static_cast<double>(batch_count_)));
      log_scale_ += step * (rate - target_);
      batch_n_ = 0;
      batch_acc_ = 0;
      if (dim_ > 1 && n_ > 10 * dim_) {
        const Eigen::MatrixXd cov = m2_ / static_cast<double>(n_ - 1) +
                                    1e-8 * Eigen::MatrixXd::Identity(dim_, dim_);
        const Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) {
          shape_ = llt.matrixL();
          // renormalize so the scale keeps its meaning across shape updates
          const double norm = shape_.diagonal().maxCoeff();
          if (norm > 0.0) shape_ /= norm;
        }
      }
    }
  }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  double scale() const { return std::exp(log_scale_); }
  double post_rate() const {
    return post_n_ > 0 ? static_cast<double>(post_acc_) / post_n_ : 0.0;
  }

 private:
  int dim_ = 1;
  double target_ = 0.234;
  double log_scale_ = 0.0;
  int window_ = 50;
  Eigen::MatrixXd shape_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
  long n_ = 0;
  int batch_n_ = 0;
  int batch_acc_ = 0;
  int batch_count_ = 0;
  bool frozen_ = false;
  long post_n_ = 0;
  long post_acc_ = 0;
};

/// Per-subject scalar scale adaptation for the random-effect updates; the
/// proposal shape is the current Cholesky factor of Sigma_b.
class SubjectScales {
 public:
  SubjectScales(int n, double target, int window)
      : target_(target), window_(window), log_scale_(n, -1.0), acc_(n, 0), cnt_(n, 0),
        batch_count_(n, 0) {}

  double scale(int i) const { return std::exp(log_scale_[static_cast<std::size_t>(i)]); }

  void record(int i, bool accepted) {
    const auto u = static_cast<std::size_t>(i);
    if (frozen_) {
      post_n_ += 1;
      post_acc_ += accepted ? 1 : 0;
      return;
    }
    cnt_[u] += 1;
    acc_[u] += accepted ? 1 : 0;
    if (cnt_[u] >= window_) {
      batch_count_[u] += 1;
      const double rate = static_cast<double>(acc_[u]) / cnt_[u];
      const double step = std::min(0.5, 2.0 / std::sqrt(static_cast<double>(batch_count_[u])));
      log_scale_[u] += step * (rate - target_);
      cnt_[u] = 0;
      acc_[u] = 0;
    }
  }

  void freeze() { frozen_ = true; }
  double post_rate() const {
    return post_n_ > 0 ? static_cast<double>(post_acc_) / post_n_ : 0.0;
  }
  double mean_scale() const {
    double s = 0.0;
    for (double ls : log_scale_) s += std::exp(ls);
    return log_scale_.empty() ? 0.0 : s / static_cast<double>(log_scale_.size());
  }

 private:
  double target_;
  int window_;
  std::vector<double> log_scale_;
  std::vector<int> acc_, cnt_;
  std::vector<int> batch_count_;
  bool frozen_ = false;
  long post_n_ = 0;
  long post_acc_ = 0;
};

/// W ~ Wishart(df, scale) via Bartlett decomposition; returns the draw.
Eigen::MatrixXd wishart_draw(Rng& rng, double df, const Eigen::MatrixXd& scale_chol) {
  const int q = static_cast<int>(scale_chol.rows());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(df - i));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd l = scale_chol * a;
  return l * l.transpose();
}

/// Sigma ~ inverse-Wishart(df, psi).
Eigen::MatrixXd inverse_wishart_draw(Rng& rng, double df, const Eigen::MatrixXd& psi) {
  const int q = static_cast<int>(psi.rows());
  if (df <= q - 1) {
    throw NumericalError("inverse-Wishart draw needs df > q-1 (too many splits for the data?)");
  }
  const Eigen::MatrixXd psi_inv = Eigen::LLT<Eigen::MatrixXd>(psi).solve(
      Eigen::MatrixXd::Identity(q, q));
  const Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (psi_inv + psi_inv.transpose()));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("inverse-Wishart scale is not positive definite");
  }
  const Eigen::MatrixXd w = wishart_draw(rng, df, llt.matrixL());
  const Eigen::MatrixXd sigma = Eigen::LLT<Eigen::MatrixXd>(w).solve(
      Eigen::MatrixXd::Identity(q, q));
  return 0.5 * (sigma + sigma.transpose());
}

struct ChainState {
  Params params;
  Eigen::MatrixXd b;            // n x q
  Eigen::VectorXd ll_long_i;    // per-subject longitudinal loglik
  Eigen::VectorXd ll_surv_i;    // per-subject survival loglik
  double lp_prior = 0.0;        // log_prior at current params (given S)

  double ll_long() const { return ll_long_i.sum(); }
  double ll_surv() const { return ll_surv_i.sum(); }
};

void refresh_subject_logliks(const JointModel& model, ChainState& st) {
  const int n = model.n_subjects();
  st.ll_long_i.resize(n);
  st.ll_surv_i.resize(n);
  for (int i = 0; i < n; ++i) {
    st.ll_long_i[i] = model.loglik_longitudinal_subject(i, st.params, st.b.row(i).transpose());
    st.ll_surv_i[i] = model.loglik_survival_subject(i, st.params, st.b.row(i).transpose());
  }
}

}  // namespace

double draw_sigma2_conditional(Rng& rng, const PriorConfig& prior, int n_splits, double ssr,
                               int n_obs) {
  const double shape = (prior.sigma2_shape + 1.0) / n_splits + 0.5 * n_obs - 1.0;
  const double scale = prior.sigma2_scale / n_splits + 0.5 * ssr;
  if (!(shape > 0.0)) {
    throw NumericalError("sigma_y^2 conditional is improper (no data and S > shape+1)");
  }
  return rng.inverse_gamma(shape, scale);
}

Eigen::MatrixXd draw_sigma_b_conditional(Rng& rng, const PriorConfig& prior, int n_splits,
                                         const Eigen::MatrixXd& b) {
  const int q = static_cast<int>(b.cols());
  const double nu0 = q + prior.wishart_df_delta;
  const double df = (nu0 + q + 1.0) / n_splits - q - 1.0 + static_cast<double>(b.rows());
  Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(q, q) / n_splits;
  psi.noalias() += b.transpose() * b;
  return inverse_wishart_draw(rng, df, psi);
}

void ChainConfig::validate() const {
  if (n_chains < 1) throw UsageError("n_chains must be >= 1");
  if (n_warmup < 0 || n_warmup >= n_iter) throw UsageError("need 0 <= n_warmup < n_iter");
  if (thin < 1) throw UsageError("thin must be >= 1");
  if (adapt_window < 1) throw UsageError("adapt_window must be >= 1");
}

ChainDraws run_chain(const JointModel& model, const ChainConfig& cfg, int subsample, int chain,
                     int n_splits) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const ParamLayout& lay = model.layout();
  const std::uint64_t chain_seed =
      derive_seed(cfg.seed, {stream::kChain, static_cast<std::uint64_t>(subsample),
                             static_cast<std::uint64_t>(chain)});

  ChainState st;
  {
    auto [p0, b0] = model.initialize(derive_seed(chain_seed, {kInitStream}));
    st.params = std::move(p0);
    st.b = std::move(b0);
  }
  refresh_subject_logliks(model, st);
  st.lp_prior = model.log_prior(st.params, n_splits);
  {
    const double lp0 = st.ll_long() + st.ll_surv() + model.log_re_density(st.params, st.b) +
                       st.lp_prior;
    if (!std::isfinite(lp0)) {
      throw NumericalError("non-finite posterior at initialization (subsample " +
                           std::to_string(subsample) + ", chain " + std::to_string(chain) + ")");
    }
  }

  Rng rng(derive_seed(chain_seed, {kWalkStream}));
  const int n = model.n_subjects();
  const int q = lay.q;
  const PriorConfig& prior = model.spec().priors;
  const bool survival = !lay.longitudinal_only;
  const bool pspline = survival && lay.baseline == BaselineKind::kPspline;

  // blocks; with no data the posterior is the prior, so start proposals at
  // the prior scale instead of the likelihood-informed default
  const bool no_data = model.n_obs() == 0 && n == 0;
  const double beta_scale0 =
      no_data ? prior.sd_beta * 2.38 / std::sqrt(static_cast<double>(lay.p_beta)) : 0.1;
  AdaptiveRwmBlock beta_block(lay.p_beta, beta_scale0, cfg.adapt_window);
  const int ga_dim = survival ? lay.p_gamma + 1 : 0;
  const double ga_scale0 =
      no_data ? prior.sd_gamma * 2.38 / std::sqrt(static_cast<double>(std::max(ga_dim, 1)))
              : 0.1;
  AdaptiveRwmBlock ga_block(std::max(ga_dim, 1), ga_scale0, cfg.adapt_window);
  const int base_dim = survival ? (pspline ? lay.n_bs : 2) : 0;
  const double base_scale0 = no_data ? prior.sd_weibull_log : 0.1;
  AdaptiveRwmBlock base_block(std::max(base_dim, 1), base_scale0, cfg.adapt_window);
  AdaptiveRwmBlock tau_block(1, 0.5, cfg.adapt_window);
  SubjectScales re_scales(std::max(n, 1), q > 1 ? 0.234 : 0.44, cfg.adapt_window);

  const int n_kept = cfg.n_kept();
  ChainDraws out;
  out.subsample = subsample;
  out.chain = chain;
  out.param_names = lay.names;
  out.draws.resize(n_kept, lay.size());
  if (cfg.save_random_effects && n > 0) {
    out.re_draws.resize(n_kept, n * q);
  }

  Eigen::VectorXd theta = encode_params(lay, st.params);
  int kept = 0;

  const auto try_block = [&](AdaptiveRwmBlock& block, int offset, int dim, bool affects_long,
                             bool affects_surv, bool tau_jacobian) {
    const Eigen::VectorXd cur = theta.segment(offset, dim);
    const Eigen::VectorXd prop = block.propose(cur, rng);
    Eigen::VectorXd theta_prop = theta;
    theta_prop.segment(offset, dim) = prop;

    Params p_prop;
    try {
      p_prop = decode_params(lay, theta_prop);
    } catch (const NumericalError&) {
      block.record(false, cur);
      return;
    }

    double ll_long_new = 0.0;
    Eigen::VectorXd ll_long_new_i, ll_surv_new_i;
    double ll_surv_new = 0.0;
    bool finite = true;
    if (affects_long) {
      ll_long_new_i.resize(n);
      for (int i = 0; i < n && finite; ++i) {
        ll_long_new_i[i] = model.loglik_longitudinal_subject(i, p_prop, st.b.row(i).transpose());
        finite = std::isfinite(ll_long_new_i[i]);
      }
      ll_long_new = finite ? ll_long_new_i.sum() : 0.0;
    } else {
      ll_long_new = st.ll_long();
    }
    if (survival && affects_surv && finite) {
      ll_surv_new_i.resize(n);
      try {
        for (int i = 0; i < n && finite; ++i) {
          ll_surv_new_i[i] = model.loglik_survival_subject(i, p_prop, st.b.row(i).transpose());
          finite = std::isfinite(ll_surv_new_i[i]);
        }
      } catch (const NumericalError&) {
        finite = false;
      }
      ll_surv_new = finite ? ll_surv_new_i.sum() : 0.0;
    } else {
      ll_surv_new = st.ll_surv();
    }

    bool accepted = false;
    if (finite) {
      const double lp_prior_new = model.log_prior(p_prop, n_splits);
      double log_ratio = (ll_long_new + ll_surv_new + lp_prior_new) -
                         (st.ll_long() + st.ll_surv() + st.lp_prior);
      if (tau_jacobian) {
        log_ratio += theta_prop[offset] - theta[offset];  // d tau / d log tau
      }
      if (std::isfinite(log_ratio) && std::log(rng.uniform_open()) < log_ratio) {
        accepted = true;
        theta = theta_prop;
        st.params = p_prop;
        st.lp_prior = lp_prior_new;
        if (affects_long) st.ll_long_i = ll_long_new_i;
        if (survival && affects_surv) st.ll_surv_i = ll_surv_new_i;
      }
    }
    block.record(accepted, theta.segment(offset, dim));
  };

  for (int it = 0; it < cfg.n_iter; ++it) {
    // 1. regression blocks
    try_block(beta_block, lay.beta_off, lay.p_beta, /*affects_long=*/true,
              /*affects_surv=*/true, /*tau_jacobian=*/false);
    if (survival && ga_dim > 0) {
      try_block(ga_block, lay.gamma_off, ga_dim, false, true, false);
    }
    if (survival) {
      if (pspline) {
        try_block(base_block, lay.base_off, lay.n_bs, false, true, false);
        // tau enters only the prior; the jacobian term carries log tau
        try_block(tau_block, lay.base_off + lay.n_bs, 1, false, false, true);
      } else {
        try_block(base_block, lay.base_off, 2, false, true, false);
      }
    }

    // 2. per-subject random effects
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd z(q);
      for (int j = 0; j < q; ++j) z[j] = rng.normal();
      const Eigen::VectorXd b_cur = st.b.row(i).transpose();
      const Eigen::VectorXd b_prop =
          b_cur + re_scales.scale(i) * (st.params.sigma_b_chol * z);
      double ll_long_new = 0.0;
      double ll_surv_new = 0.0;
      bool finite = true;
      try {
        ll_long_new = model.loglik_longitudinal_subject(i, st.params, b_prop);
        ll_surv_new = model.loglik_survival_subject(i, st.params, b_prop);
        finite = std::isfinite(ll_long_new) && std::isfinite(ll_surv_new);
      } catch (const NumericalError&) {
        finite = false;
      }
      bool accepted = false;
      if (finite) {
        const double log_ratio =
            (ll_long_new + ll_surv_new + model.log_re_density_subject(st.params, b_prop)) -
            (st.ll_long_i[i] + st.ll_surv_i[i] +
             model.log_re_density_subject(st.params, b_cur));
        if (std::isfinite(log_ratio) && std::log(rng.uniform_open()) < log_ratio) {
          accepted = true;
          st.b.row(i) = b_prop.transpose();
          st.ll_long_i[i] = ll_long_new;
          st.ll_surv_i[i] = ll_surv_new;
        }
      }
      re_scales.record(i, accepted);
    }

    // 3. conjugate sigma_y^2 | residuals, prior power-scaled by 1/S
    {
      const double ssr = model.sum_squared_residuals(st.params, st.b);
      const double shape = (prior.sigma2_shape + 1.0) / n_splits + 0.5 * model.n_obs() - 1.0;
      if (shape > 0.0) {
        const double s2 = draw_sigma2_conditional(rng, prior, n_splits, ssr, model.n_obs());
        st.params.sigma_y = std::sqrt(s2);
        theta[lay.lsig_off] = std::log(st.params.sigma_y);
        for (int i = 0; i < n; ++i) {
          st.ll_long_i[i] =
              model.loglik_longitudinal_subject(i, st.params, st.b.row(i).transpose());
        }
        st.lp_prior = model.log_prior(st.params, n_splits);
      }
    }

    // 4. conjugate Sigma_b | b, prior power-scaled by 1/S
    if (q > 0) {
      const Eigen::MatrixXd sigma = draw_sigma_b_conditional(rng, prior, n_splits, st.b);
      st.params.sigma_b = sigma;
      st.params.sigma_b_chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
      const Eigen::VectorXd enc = encode_params(lay, st.params);
      theta.segment(lay.chol_off, lay.n_chol()) = enc.segment(lay.chol_off, lay.n_chol());
      st.lp_prior = model.log_prior(st.params, n_splits);
    }

    if (it == cfg.n_warmup - 1) {
      beta_block.freeze();
      ga_block.freeze();
      base_block.freeze();
      tau_block.freeze();
      re_scales.freeze();
    }
    if (it >= cfg.n_warmup && (it - cfg.n_warmup) % cfg.thin == 0) {
      out.draws.row(kept) = theta.transpose();
      if (out.re_draws.size() > 0) {
        for (int i = 0; i < n; ++i) {
          out.re_draws.row(kept).segment(i * q, q) = st.b.row(i);
        }
      }
      ++kept;
    }
  }

  out.accept_rates["beta"] = beta_block.post_rate();
  out.proposal_scales["beta"] = beta_block.scale();
  if (survival && ga_dim > 0) {
    out.accept_rates["gamma_alpha"] = ga_block.post_rate();
    out.proposal_scales["gamma_alpha"] = ga_block.scale();
  }
  if (survival) {
    out.accept_rates["baseline"] = base_block.post_rate();
    out.proposal_scales["baseline"] = base_block.scale();
    if (pspline) {
      out.accept_rates["log_tau"] = tau_block.post_rate();
      out.proposal_scales["log_tau"] = tau_block.scale();
    }
  }
  if (n > 0) {
    out.accept_rates["random_effects"] = re_scales.post_rate();
    out.proposal_scales["random_effects"] = re_scales.mean_scale();
  }
  for (const auto& [name, rate] : out.accept_rates) {
    if (rate == 0.0 && cfg.n_iter > cfg.n_warmup + 50) {
      std::fprintf(stderr,
                   "warning: block '%s' accepted nothing after adaptation "
                   "(subsample %d, chain %d)\n",
                   name.c_str(), subsample, chain);
    }
  }

  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

std::vector<ChainDraws> run_subsample(const JointModel& model, const ChainConfig& cfg,
                                      int subsample, int n_splits, int core_cap,
                                      TimingReport* timing) {
  JobPlan plan;
  plan.core_cap = core_cap;
  for (int k = 0; k < cfg.n_chains; ++k) {
    plan.jobs.push_back({subsample, k, cfg.seed});
  }
  const std::function<ChainDraws(const ChainJob&)> runner = [&](const ChainJob& job) {
    return run_chain(model, cfg, job.subsample, job.chain, n_splits);
  };
  auto [report, outcomes] = schedule<ChainDraws>(plan, runner);
  std::vector<ChainDraws> result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].ok) {
      throw NumericalError("chain " + std::to_string(plan.jobs[i].chain) + " of subsample " +
                           std::to_string(subsample) + " failed: " + outcomes[i].error);
    }
    result.push_back(std::move(outcomes[i].value));
  }
  if (timing != nullptr) *timing = report;
  return result;
}

void write_chain_draws_csv(const std::string& path, const ChainDraws& draws) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(draws.draws.rows()));
  for (int r = 0; r < draws.draws.rows(); ++r) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(draws.draws.cols()));
    for (int c = 0; c < draws.draws.cols(); ++c) {
      row.push_back(format_double(draws.draws(r, c)));
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, draws.param_names, rows);
}

ChainDraws read_chain_draws_csv(const std::string& path, int subsample, int chain) {
  const CsvTable table = read_csv(path);
  ChainDraws draws;
  draws.subsample = subsample;
  draws.chain = chain;
  draws.param_names = table.header;
  draws.draws.resize(static_cast<Eigen::Index>(table.rows.size()),
                     static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      draws.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_double(table, r, c);
    }
  }
  return draws;
}

}  // namespace cjm
