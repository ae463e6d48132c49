#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cjm/sampler.hpp"

namespace cjm {

/// w[s][k][p]: weight of subsample s in chain k for parameter p.
/// For every (k, p) the weights over s sum to one.
struct WeightTable {
  int n_subsamples = 0;
  int n_chains = 0;
  int n_params = 0;
  std::string method;  // "equal" | "precision"
  std::vector<std::string> param_names;
  std::vector<double> w;

  double& at(int s, int k, int p) {
    return w[static_cast<std::size_t>((s * n_chains + k) * n_params + p)];
  }
  double at(int s, int k, int p) const {
    return w[static_cast<std::size_t>((s * n_chains + k) * n_params + p)];
  }
};

/// Merged draws: K chains, each (S*D) x P for union or D x P for the
/// weighted methods, plus provenance.
struct ConsensusResult {
  std::string method;  // "union" | "equal" | "precision"
  std::vector<std::string> param_names;
  std::vector<Eigen::MatrixXd> chains;
  WeightTable weights;  // weighted methods only (empty for union)
  int n_subsamples = 0;
  std::vector<std::string> source_files;
};

/// draws[s][k] must share K, D, P and the parameter ordering; otherwise a
/// DataError names the mismatch.
void validate_draw_grid(const std::vector<std::vector<ChainDraws>>& draws);

/// Chain k of the result concatenates chain k of every subsample (s ascending).
ConsensusResult combine_union(const std::vector<std::vector<ChainDraws>>& draws);

WeightTable equal_weights(int n_subsamples, int n_chains, int n_params);

/// Precision weights: w'_s = 1 / Var(theta^k_s,.) from the unbiased sample
/// variance of the D draws, normalized over subsamples per (chain, parameter).
/// Degenerate zero-variance chains get precision 1/(var + 1e-12) and a
/// warning in `warnings`.
WeightTable precision_weights(const std::vector<std::vector<ChainDraws>>& draws,
                              std::vector<std::string>* warnings = nullptr);

/// Chain-pooled variant (draws of all chains pooled per subsample before the
/// variance), used for the weight-convergence report.
WeightTable precision_weights_pooled(const std::vector<std::vector<ChainDraws>>& draws);

/// Consensus draw d = sum_s w[s][k][p] * theta^k_{s,d,p}, aligned by
/// retained-iteration index.
ConsensusResult combine_weighted(const std::vector<std::vector<ChainDraws>>& draws,
                                 const WeightTable& weights);

/// Product of S normal densities with means mu_s and precisions tau_s:
/// returns the (mean, variance) of the resulting normal. The analytic
/// full-data posterior for the Gaussian exactness checks.
std::pair<double, double> gaussian_product_oracle(const std::vector<double>& means,
                                                  const std::vector<double>& precisions);

void write_consensus_csv(const std::string& out_dir, const ConsensusResult& result);
void write_weights_csv(const std::string& path, const WeightTable& weights);

}  // namespace cjm
