#include "cjm/consensus.hpp"

#include <cmath>

#include "cjm/csv.hpp"
#include "cjm/errors.hpp"
#include "cjm/stats.hpp"

namespace cjm {

namespace {

constexpr double kDegenerateVarianceFloor = 1e-12;

void normalize_over_subsamples(WeightTable& table) {
  for (int k = 0; k < table.n_chains; ++k) {
    for (int p = 0; p < table.n_params; ++p) {
      double total = 0.0;
      for (int s = 0; s < table.n_subsamples; ++s) total += table.at(s, k, p);
      if (!(total > 0.0)) {
        throw NumericalError("precision weights do not normalize (zero total)");
      }
      for (int s = 0; s < table.n_subsamples; ++s) table.at(s, k, p) /= total;
    }
  }
}

}  // namespace

void validate_draw_grid(const std::vector<std::vector<ChainDraws>>& draws) {
  if (draws.empty() || draws.front().empty()) {
    throw DataError("no draws to combine");
  }
  const std::size_t n_chains = draws.front().size();
  const Eigen::Index d = draws.front().front().draws.rows();
  const auto& names = draws.front().front().param_names;
  for (std::size_t s = 0; s < draws.size(); ++s) {
    if (draws[s].size() != n_chains) {
      throw DataError("subsample " + std::to_string(s) + " has " +
                      std::to_string(draws[s].size()) + " chains, expected " +
                      std::to_string(n_chains));
    }
    for (std::size_t k = 0; k < n_chains; ++k) {
      const ChainDraws& cd = draws[s][k];
      if (cd.draws.rows() != d) {
        throw DataError("draw count mismatch in subsample " + std::to_string(s) + " chain " +
                        std::to_string(k));
      }
      if (cd.param_names != names) {
        throw DataError("parameter names mismatch in subsample " + std::to_string(s) +
                        " chain " + std::to_string(k));
      }
    }
  }
}

ConsensusResult combine_union(const std::vector<std::vector<ChainDraws>>& draws) {
  validate_draw_grid(draws);
  const int S = static_cast<int>(draws.size());
  const int K = static_cast<int>(draws.front().size());
  const Eigen::Index d = draws.front().front().draws.rows();
  const Eigen::Index p = draws.front().front().draws.cols();

  ConsensusResult result;
  result.method = "union";
  result.param_names = draws.front().front().param_names;
  result.n_subsamples = S;
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd merged(S * d, p);
    for (int s = 0; s < S; ++s) {
      merged.middleRows(s * d, d) = draws[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)].draws;
    }
    result.chains.push_back(std::move(merged));
  }
  return result;
}

WeightTable equal_weights(int n_subsamples, int n_chains, int n_params) {
  if (n_subsamples < 1) throw UsageError("equal_weights needs S >= 1");
  WeightTable table;
  table.n_subsamples = n_subsamples;
  table.n_chains = n_chains;
  table.n_params = n_params;
  table.method = "equal";
  table.w.assign(static_cast<std::size_t>(n_subsamples) * n_chains * n_params,
                 1.0 / n_subsamples);
  return table;
}

WeightTable precision_weights(const std::vector<std::vector<ChainDraws>>& draws,
                              std::vector<std::string>* warnings) {
  validate_draw_grid(draws);
  const int S = static_cast<int>(draws.size());
  const int K = static_cast<int>(draws.front().size());
  const int P = static_cast<int>(draws.front().front().draws.cols());
  if (draws.front().front().draws.rows() < 2) {
    throw DataError("precision weights need at least 2 draws per chain");
  }

  WeightTable table;
  table.n_subsamples = S;
  table.n_chains = K;
  table.n_params = P;
  table.method = "precision";
  table.param_names = draws.front().front().param_names;
  table.w.resize(static_cast<std::size_t>(S) * K * P);

  for (int s = 0; s < S; ++s) {
    for (int k = 0; k < K; ++k) {
      const Eigen::MatrixXd& m = draws[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)].draws;
      for (int p = 0; p < P; ++p) {
        const double var = sample_variance(m.col(p));
        if (var <= 0.0 && warnings != nullptr) {
          warnings->push_back("zero-variance draws for parameter '" + table.param_names[static_cast<std::size_t>(p)] +
                              "' in subsample " + std::to_string(s) + " chain " +
                              std::to_string(k) + "; using floored variance");
        }
        table.at(s, k, p) = 1.0 / (var + kDegenerateVarianceFloor);
      }
    }
  }
  normalize_over_subsamples(table);
  return table;
}

WeightTable precision_weights_pooled(const std::vector<std::vector<ChainDraws>>& draws) {
  validate_draw_grid(draws);
  const int S = static_cast<int>(draws.size());
  const int K = static_cast<int>(draws.front().size());
  const Eigen::Index d = draws.front().front().draws.rows();
  const int P = static_cast<int>(draws.front().front().draws.cols());

  WeightTable table;
  table.n_subsamples = S;
  table.n_chains = 1;  // pooled over chains
  table.n_params = P;
  table.method = "precision_pooled";
  table.param_names = draws.front().front().param_names;
  table.w.resize(static_cast<std::size_t>(S) * P);

  for (int s = 0; s < S; ++s) {
    Eigen::MatrixXd pooled(K * d, P);
    for (int k = 0; k < K; ++k) {
      pooled.middleRows(k * d, d) = draws[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)].draws;
    }
    for (int p = 0; p < P; ++p) {
      table.at(s, 0, p) = 1.0 / (sample_variance(pooled.col(p)) + kDegenerateVarianceFloor);
    }
  }
  normalize_over_subsamples(table);
  return table;
}

ConsensusResult combine_weighted(const std::vector<std::vector<ChainDraws>>& draws,
                                 const WeightTable& weights) {
  validate_draw_grid(draws);
  const int S = static_cast<int>(draws.size());
  const int K = static_cast<int>(draws.front().size());
  const Eigen::Index d = draws.front().front().draws.rows();
  const int P = static_cast<int>(draws.front().front().draws.cols());
  if (weights.n_subsamples != S || weights.n_chains != K || weights.n_params != P) {
    throw DataError("weight table dimensions do not match the draws");
  }
  for (int k = 0; k < K; ++k) {
    for (int p = 0; p < P; ++p) {
      double total = 0.0;
      for (int s = 0; s < S; ++s) total += weights.at(s, k, p);
      if (std::abs(total - 1.0) > 1e-12) {
        throw DataError("weights do not sum to one for chain " + std::to_string(k) +
                        ", parameter " + std::to_string(p));
      }
    }
  }

  ConsensusResult result;
  result.method = weights.method;
  result.param_names = draws.front().front().param_names;
  result.n_subsamples = S;
  result.weights = weights;
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd merged = Eigen::MatrixXd::Zero(d, P);
    for (int s = 0; s < S; ++s) {
      const Eigen::MatrixXd& m = draws[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)].draws;
      for (int p = 0; p < P; ++p) {
        merged.col(p) += weights.at(s, k, p) * m.col(p);
      }
    }
    result.chains.push_back(std::move(merged));
  }
  return result;
}

std::pair<double, double> gaussian_product_oracle(const std::vector<double>& means,
                                                  const std::vector<double>& precisions) {
  if (means.empty() || means.size() != precisions.size()) {
    throw UsageError("gaussian_product_oracle needs matching nonempty means/precisions");
  }
  double tau_total = 0.0;
  double weighted_mean = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (!(precisions[i] > 0.0)) {
      throw NumericalError("gaussian_product_oracle needs positive precisions");
    }
    tau_total += precisions[i];
    weighted_mean += precisions[i] * means[i];
  }
  return {weighted_mean / tau_total, 1.0 / tau_total};
}

void write_consensus_csv(const std::string& out_dir, const ConsensusResult& result) {
  for (std::size_t k = 0; k < result.chains.size(); ++k) {
    const Eigen::MatrixXd& m = result.chains[k];
    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<std::size_t>(m.rows()));
    for (int r = 0; r < m.rows(); ++r) {
      std::vector<std::string> row;
      row.reserve(static_cast<std::size_t>(m.cols()));
      for (int c = 0; c < m.cols(); ++c) row.push_back(format_double(m(r, c)));
      rows.push_back(std::move(row));
    }
    write_csv(out_dir + "/consensus_" + result.method + "_c" + std::to_string(k) + ".csv",
              result.param_names, rows);
  }
}

void write_weights_csv(const std::string& path, const WeightTable& weights) {
  std::vector<std::vector<std::string>> rows;
  for (int s = 0; s < weights.n_subsamples; ++s) {
    for (int k = 0; k < weights.n_chains; ++k) {
      for (int p = 0; p < weights.n_params; ++p) {
        rows.push_back({std::to_string(s), std::to_string(k),
                        weights.param_names.empty() ? std::to_string(p)
                                                    : weights.param_names[static_cast<std::size_t>(p)],
                        format_double(weights.at(s, k, p))});
      }
    }
  }
  write_csv(path, {"subsample", "chain", "parameter", "weight"}, rows);
}

}  // namespace cjm
