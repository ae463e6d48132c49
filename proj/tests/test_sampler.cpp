#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <cmath>
#include <thread>

#include "cjm/model.hpp"
#include "cjm/rng.hpp"
#include "cjm/sampler.hpp"
#include "cjm/simulator.hpp"
#include "cjm/stats.hpp"

using namespace cjm;

namespace {

ModelSpec weibull_spec() {
  ModelSpec spec;
  spec.baseline = BaselineKind::kWeibull;
  spec.surv_covariates = {"sex", "age"};
  return spec;
}

JointDataset small_sim(int n, std::uint64_t seed) {
  return simulate_dataset(default_params(), n, seed).first;
}

int param_index(const ChainDraws& d, const std::string& name) {
  for (std::size_t i = 0; i < d.param_names.size(); ++i) {
    if (d.param_names[i] == name) return static_cast<int>(i);
  }
  FAIL("parameter not found: ", name);
  return -1;
}

}  // namespace

TEST_CASE("run_chain: fixed seed gives bit-identical draws") {
  const JointDataset ds = small_sim(25, 11);
  const JointModel model(weibull_spec(), ds);
  ChainConfig cfg;
  cfg.n_iter = 300;
  cfg.n_warmup = 100;
  cfg.seed = 777;
  const ChainDraws a = run_chain(model, cfg, 0, 0, 1);
  const ChainDraws b = run_chain(model, cfg, 0, 0, 1);
  CHECK(a.draws == b.draws);
  const ChainDraws c = run_chain(model, cfg, 0, 1, 1);  // different chain stream
  CHECK(a.draws != c.draws);
}

TEST_CASE("run_chain: every retained row survives the transform round trip") {
  const JointDataset ds = small_sim(20, 21);
  ModelSpec spec = weibull_spec();
  spec.baseline = BaselineKind::kPspline;
  spec.pspline_basis = 8;
  const JointModel model(spec, ds);
  ChainConfig cfg;
  cfg.n_iter = 200;
  cfg.n_warmup = 80;
  cfg.seed = 5;
  const ChainDraws d = run_chain(model, cfg, 0, 0, 2);
  REQUIRE(d.draws.rows() == cfg.n_kept());
  for (int r = 0; r < d.draws.rows(); ++r) {
    const Eigen::VectorXd theta = d.draws.row(r).transpose();
    const Params p = decode_params(model.layout(), theta);
    const Eigen::VectorXd back = encode_params(model.layout(), p);
    CHECK((back - theta).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("run_chain: post-warmup proposal scales are frozen at the warmup state") {
  const JointDataset ds = small_sim(20, 33);
  const JointModel model(weibull_spec(), ds);
  ChainConfig short_cfg;
  short_cfg.n_iter = 320;
  short_cfg.n_warmup = 300;
  short_cfg.seed = 99;
  ChainConfig long_cfg = short_cfg;
  long_cfg.n_iter = 1500;
  // identical warmup stream, so the frozen scales must agree no matter how
  // long the post-warmup phase runs
  const ChainDraws a = run_chain(model, short_cfg, 0, 0, 1);
  const ChainDraws b = run_chain(model, long_cfg, 0, 0, 1);
  for (const auto& [name, scale] : a.proposal_scales) {
    CHECK(b.proposal_scales.at(name) == doctest::Approx(scale).epsilon(1e-12));
  }
}

TEST_CASE("run_subsample: default config yields 3 chains of 3000 retained draws") {
  const JointDataset ds = small_sim(12, 2);
  const JointModel model(weibull_spec(), ds);
  ChainConfig cfg;  // defaults: 3 chains, 3500 iterations, 500 warmup
  cfg.seed = 4;
  const auto draws = run_subsample(model, cfg, 0, 1, 0);
  REQUIRE(draws.size() == 3);
  for (const auto& d : draws) {
    CHECK(d.draws.rows() == 3000);
    CHECK(d.draws.cols() == model.layout().size());
  }

  ChainConfig cfg1 = cfg;
  cfg1.n_chains = 1;
  cfg1.n_iter = 400;
  cfg1.n_warmup = 100;
  const auto single = run_subsample(model, cfg1, 0, 1, 0);
  REQUIRE(single.size() == 1);
  const ChainDraws direct = run_chain(model, cfg1, 0, 0, 1);
  CHECK(single[0].draws == direct.draws);
}

TEST_CASE("run_subsample: wall time is close to the max chain time given cores") {
  if (std::thread::hardware_concurrency() < 3) {
    MESSAGE("skipped: needs >= 3 hardware cores, found ",
            std::thread::hardware_concurrency());
    return;
  }
  const JointDataset ds = small_sim(60, 3);
  const JointModel model(weibull_spec(), ds);
  ChainConfig cfg;
  cfg.n_iter = 600;
  cfg.n_warmup = 200;
  cfg.seed = 6;
  TimingReport timing;
  const auto draws = run_subsample(model, cfg, 0, 1, 0, &timing);
  double sum = 0.0;
  double mx = 0.0;
  for (const auto& d : draws) {
    sum += d.wall_seconds;
    mx = std::max(mx, d.wall_seconds);
  }
  CHECK(timing.total_wall_seconds < 1.5 * mx);
  CHECK(timing.total_wall_seconds < 0.9 * sum);
}

TEST_CASE("conjugate sigma_y^2 update matches the analytic inverse-gamma posterior") {
  PriorConfig prior;
  const double ssr = 37.5;
  const int n_obs = 120;
  const int n_splits = 1;
  const double shape = prior.sigma2_shape + 0.5 * n_obs;
  const double scale = prior.sigma2_scale + 0.5 * ssr;
  const boost::math::inverse_gamma_distribution<double> ref(shape, scale);

  Rng rng(910);
  const int m = 40000;
  std::vector<double> draws(m);
  for (int i = 0; i < m; ++i) {
    draws[i] = draw_sigma2_conditional(rng, prior, n_splits, ssr, n_obs);
  }
  std::sort(draws.begin(), draws.end());
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const double got = quantile_linear_sorted(draws, p);
    const double want = boost::math::quantile(ref, p);
    // MC error of an empirical quantile: sqrt(p(1-p)/m) / density at the quantile
    const double dens = boost::math::pdf(ref, want);
    const double se = std::sqrt(p * (1.0 - p) / m) / dens;
    CHECK(std::abs(got - want) < 4.0 * se + 1e-12);
  }

  // power scaling moves the conditional's hyperparameters
  Rng rng2(911);
  const int S = 5;
  const double shape5 = (prior.sigma2_shape + 1.0) / S + 0.5 * n_obs - 1.0;
  const double scale5 = prior.sigma2_scale / S + 0.5 * ssr;
  const boost::math::inverse_gamma_distribution<double> ref5(shape5, scale5);
  std::vector<double> draws5(m);
  for (int i = 0; i < m; ++i) {
    draws5[i] = draw_sigma2_conditional(rng2, prior, S, ssr, n_obs);
  }
  std::sort(draws5.begin(), draws5.end());
  const double got_med = quantile_linear_sorted(draws5, 0.5);
  const double want_med = boost::math::quantile(ref5, 0.5);
  const double se_med = std::sqrt(0.25 / m) / boost::math::pdf(ref5, want_med);
  CHECK(std::abs(got_med - want_med) < 4.0 * se_med);
}

TEST_CASE("conjugate Sigma_b update matches the analytic inverse-Wishart posterior") {
  PriorConfig prior;
  const int q = 3;
  const int n = 40;
  Rng data_rng(14);
  Eigen::MatrixXd b(n, q);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < q; ++j) b(i, j) = data_rng.normal(0.0, 1.0 + 0.3 * j);
  }
  const double nu0 = q + prior.wishart_df_delta;
  const double df = nu0 + n;  // S = 1
  const Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(q, q) + b.transpose() * b;

  Rng rng(15);
  const int m = 20000;
  Eigen::MatrixXd mean_draw = Eigen::MatrixXd::Zero(q, q);
  std::vector<double> diag0(m);
  for (int i = 0; i < m; ++i) {
    const Eigen::MatrixXd s = draw_sigma_b_conditional(rng, prior, 1, b);
    mean_draw += s;
    diag0[static_cast<std::size_t>(i)] = s(0, 0);
  }
  mean_draw /= m;

  // closed-form mean of IW(df, psi)
  const Eigen::MatrixXd want_mean = psi / (df - q - 1.0);
  CHECK((mean_draw - want_mean).cwiseAbs().maxCoeff() <
        0.05 * want_mean.cwiseAbs().maxCoeff());

  // marginal of a diagonal entry: sigma_00 ~ IG((df - q + 1)/2, psi_00 / 2)
  const boost::math::inverse_gamma_distribution<double> ref(0.5 * (df - q + 1.0),
                                                            0.5 * psi(0, 0));
  std::sort(diag0.begin(), diag0.end());
  for (double p : {0.1, 0.5, 0.9}) {
    const double got = quantile_linear_sorted(diag0, p);
    const double want = boost::math::quantile(ref, p);
    const double se = std::sqrt(p * (1.0 - p) / m) / boost::math::pdf(ref, want);
    CHECK(std::abs(got - want) < 4.0 * se);
  }
}

TEST_CASE("degenerate chain with no data and S=1 samples the prior") {
  JointDataset empty;
  ModelSpec spec;
  spec.baseline = BaselineKind::kWeibull;
  const JointModel model(spec, empty);
  ChainConfig cfg;
  cfg.n_iter = 12000;
  cfg.n_warmup = 1500;
  cfg.seed = 1234;
  const ChainDraws d = run_chain(model, cfg, 0, 0, 1);

  const int idx = param_index(d, "beta_intercept");
  const Eigen::VectorXd beta0 = d.draws.col(idx);
  const double ess = effective_sample_size(beta0);
  CHECK(ess > 50.0);
  CHECK(std::abs(beta0.mean()) < 3.0 * 10.0 / std::sqrt(ess));
  const double sd = std::sqrt(sample_variance(beta0));
  CHECK(sd > 6.0);
  CHECK(sd < 14.0);
}

TEST_CASE("LMM sub-case agrees with an independent conjugate Gibbs reference") {
  // alpha fixed at 0 and survival dropped: our Metropolis-within-Gibbs chain
  // must match a fully conjugate Gibbs sampler on the same posterior.
  auto gen = default_params();
  gen.alpha = 0.0;
  gen.gamma_sex = 0.0;
  gen.gamma_age = 0.0;
  const auto [ds, truth] = simulate_dataset(gen, 200, 616);

  ModelSpec spec;
  spec.longitudinal_only = true;
  const JointModel model(spec, ds);
  const ParamLayout& lay = model.layout();
  ChainConfig cfg;
  cfg.n_iter = 4000;
  cfg.n_warmup = 1000;
  cfg.seed = 55;
  const ChainDraws ours = run_chain(model, cfg, 0, 0, 1);

  // posterior mean of sigma_y within 3 posterior SDs of the truth 0.6
  const int sig_idx = param_index(ours, "log_sigma_y");
  const Eigen::VectorXd sigma_draws = ours.draws.col(sig_idx).array().exp();
  const double sig_mean = sigma_draws.mean();
  const double sig_sd = std::sqrt(sample_variance(sigma_draws));
  CHECK(std::abs(sig_mean - 0.6) < 3.0 * sig_sd);

  // ---- reference: all-conjugate Gibbs on the same design ----
  const int n = model.n_subjects();
  const int q = model.n_random();
  const int p = lay.p_beta;
  Eigen::MatrixXd x(ds.n_longitudinal_records(), p);
  Eigen::VectorXd y(x.rows());
  std::vector<std::pair<int, int>> spans;  // row range per subject
  {
    int row = 0;
    for (const auto& subj : ds.subjects) {
      const int begin = row;
      for (const auto& rec : subj.longitudinal) {
        const Eigen::VectorXd s = model.time_basis().eval(rec.time);
        x(row, 0) = 1.0;
        x.row(row).segment(1, s.size()) = s.transpose();
        y[row] = rec.value;
        ++row;
      }
      spans.emplace_back(begin, row);
    }
  }

  Rng rng(77);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, q);
  double sigma2 = 1.0;
  Eigen::MatrixXd sigma_b = Eigen::MatrixXd::Identity(q, q);
  const PriorConfig& prior = spec.priors;

  const auto mvn_from_precision = [&](const Eigen::MatrixXd& prec,
                                      const Eigen::VectorXd& lin) -> Eigen::VectorXd {
    const Eigen::LLT<Eigen::MatrixXd> llt(prec);
    const Eigen::VectorXd mu = llt.solve(lin);
    Eigen::VectorXd z(prec.rows());
    for (int j = 0; j < z.size(); ++j) z[j] = rng.normal();
    return mu + llt.matrixU().solve(z);
  };

  const int iters = 4000;
  const int warm = 1000;
  std::vector<double> ref_sigma;
  std::vector<double> ref_beta0;
  for (int it = 0; it < iters; ++it) {
    // beta | b, sigma2
    Eigen::VectorXd resid_b = y;
    for (int i = 0; i < n; ++i) {
      const auto [lo, hi] = spans[static_cast<std::size_t>(i)];
      resid_b.segment(lo, hi - lo) -=
          x.middleRows(lo, hi - lo).leftCols(q) * b.row(i).transpose();
    }
    Eigen::MatrixXd prec = x.transpose() * x / sigma2 +
                           Eigen::MatrixXd::Identity(p, p) / (prior.sd_beta * prior.sd_beta);
    beta = mvn_from_precision(prec, x.transpose() * resid_b / sigma2);

    // b_i | beta, sigma2, sigma_b
    const Eigen::MatrixXd sigma_b_inv =
        Eigen::LLT<Eigen::MatrixXd>(sigma_b).solve(Eigen::MatrixXd::Identity(q, q));
    for (int i = 0; i < n; ++i) {
      const auto [lo, hi] = spans[static_cast<std::size_t>(i)];
      const auto zi = x.middleRows(lo, hi - lo).leftCols(q);
      const Eigen::VectorXd ri = y.segment(lo, hi - lo) - x.middleRows(lo, hi - lo) * beta;
      const Eigen::MatrixXd prec_i = zi.transpose() * zi / sigma2 + sigma_b_inv;
      b.row(i) = mvn_from_precision(prec_i, zi.transpose() * ri / sigma2).transpose();
    }

    // sigma2 | beta, b
    double ssr = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto [lo, hi] = spans[static_cast<std::size_t>(i)];
      ssr += (y.segment(lo, hi - lo) - x.middleRows(lo, hi - lo) * beta -
              x.middleRows(lo, hi - lo).leftCols(q) * b.row(i).transpose())
                 .squaredNorm();
    }
    sigma2 = rng.inverse_gamma(prior.sigma2_shape + 0.5 * static_cast<double>(y.size()),
                               prior.sigma2_scale + 0.5 * ssr);

    // sigma_b | b
    sigma_b = draw_sigma_b_conditional(rng, prior, 1, b);

    if (it >= warm) {
      ref_sigma.push_back(std::sqrt(sigma2));
      ref_beta0.push_back(beta[0]);
    }
  }

  const auto mean_of_vec = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x_ : v) s += x_;
    return s / static_cast<double>(v.size());
  };
  const double ref_sig_mean = mean_of_vec(ref_sigma);
  const double ref_beta0_mean = mean_of_vec(ref_beta0);

  Eigen::Map<const Eigen::VectorXd> ref_sig_vec(ref_sigma.data(),
                                                static_cast<Eigen::Index>(ref_sigma.size()));
  const double se_ref = std::sqrt(sample_variance(ref_sig_vec) /
                                  effective_sample_size(ref_sig_vec));
  const double se_ours =
      std::sqrt(sample_variance(sigma_draws) / effective_sample_size(sigma_draws));
  const double tol_sigma = 4.0 * std::sqrt(se_ref * se_ref + se_ours * se_ours) + 1e-4;
  CHECK(std::abs(sig_mean - ref_sig_mean) < tol_sigma);

  const int b0_idx = param_index(ours, "beta_intercept");
  const Eigen::VectorXd our_beta0 = ours.draws.col(b0_idx);
  Eigen::Map<const Eigen::VectorXd> ref_b0_vec(ref_beta0.data(),
                                               static_cast<Eigen::Index>(ref_beta0.size()));
  const double se_b0 = 4.0 * std::sqrt(sample_variance(our_beta0) /
                                           effective_sample_size(our_beta0) +
                                       sample_variance(ref_b0_vec) /
                                           effective_sample_size(ref_b0_vec)) +
                       1e-3;
  CHECK(std::abs(our_beta0.mean() - ref_beta0_mean) < se_b0);
}
