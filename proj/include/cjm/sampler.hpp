#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cjm/executor.hpp"
#include "cjm/model.hpp"
#include "cjm/rng.hpp"

namespace cjm {

struct ChainConfig {
  int n_chains = 3;
  int n_iter = 3500;
  int n_warmup = 500;
  int thin = 1;
  std::uint64_t seed = 0;
  int adapt_window = 50;
  bool save_random_effects = false;

  int n_kept() const { return (n_iter - n_warmup + thin - 1) / thin; }
  void validate() const;
};

/// Post-warm-up draws of one (subsample, chain) pair on the unconstrained
/// scale, one row per retained iteration.
struct ChainDraws {
  int subsample = 0;
  int chain = 0;
  std::vector<std::string> param_names;
  Eigen::MatrixXd draws;     // D x P
  Eigen::MatrixXd re_draws;  // D x (n*q) when saved, else 0 x 0
  std::map<std::string, double> accept_rates;
  std::map<std::string, double> proposal_scales;  // frozen post-warmup scales
  double wall_seconds = 0.0;
};

/// Metropolis-within-Gibbs on the unconstrained scale:
///   1. adaptive random-walk Metropolis blocks for beta, (gamma, alpha) and
///      the baseline parameters (plus log tau for the P-spline smoothing),
///      scales adapted toward 0.234 (0.44 for scalars) during warmup only;
///   2. per-subject adaptive random-walk updates of b_i, shaped by the
///      current Cholesky factor of Sigma_b;
///   3. conjugate inverse-gamma draw of sigma_y^2 (power-scaled prior);
///   4. conjugate inverse-Wishart draw of Sigma_b (power-scaled prior).
/// Proposal scales freeze at the end of warmup, so the post-warmup kernel is
/// time-homogeneous. The chain seed derives from (config seed, subsample,
/// chain); a fixed seed reproduces the draws bit for bit.
ChainDraws run_chain(const JointModel& model, const ChainConfig& config, int subsample, int chain,
                     int n_splits);

/// K chains of one subsample, run concurrently under the executor's core
/// budget (core_cap <= 0 = one core per chain). Throws NumericalError naming
/// the failed (subsample, chain) if any chain fails.
std::vector<ChainDraws> run_subsample(const JointModel& model, const ChainConfig& config,
                                      int subsample, int n_splits, int core_cap,
                                      TimingReport* timing = nullptr);

void write_chain_draws_csv(const std::string& path, const ChainDraws& draws);
ChainDraws read_chain_draws_csv(const std::string& path, int subsample, int chain);

/// Conjugate draw of sigma_y^2 given the residual sum of squares: the prior
/// IG(shape, scale) is power-scaled by 1/S, so the conditional is
/// IG((shape+1)/S + N/2 - 1, scale/S + SSR/2).
double draw_sigma2_conditional(Rng& rng, const PriorConfig& prior, int n_splits, double ssr,
                               int n_obs);

/// Conjugate draw of Sigma_b given the current random effects: the prior
/// IW(q + delta, I) power-scaled by 1/S gives
/// IW((nu0+q+1)/S - q - 1 + n, I/S + sum_i b_i b_i').
Eigen::MatrixXd draw_sigma_b_conditional(Rng& rng, const PriorConfig& prior, int n_splits,
                                         const Eigen::MatrixXd& b);

}  // namespace cjm
