#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace cjm {

/// One marker measurement. Time-varying covariates share the dataset-level
/// name list (long_covariate_names) so records stay compact.
struct LongitudinalRecord {
  double time = 0.0;   // years since subject origin, >= 0
  double value = 0.0;  // marker measurement y_i(t)
  std::vector<double> covariates;
};

struct SurvivalRecord {
  double observed_time = 0.0;  // T_i, > 0
  int event = 0;               // delta_i in {0, 1}
  std::vector<double> covariates;
};

struct Subject {
  std::string id;
  std::vector<LongitudinalRecord> longitudinal;  // sorted by time
  SurvivalRecord survival;
};

/// Per-subject longitudinal + survival data. Immutable after construction and
/// safe to share across concurrent chain jobs.
struct JointDataset {
  std::vector<Subject> subjects;
  std::vector<std::string> long_covariate_names;
  std::vector<std::string> surv_covariate_names;

  std::size_t n_subjects() const { return subjects.size(); }
  std::size_t n_longitudinal_records() const;

  /// Checks every dataset invariant (unique ids, record ordering, finite
  /// values, longitudinal times within observed time). Throws DataError.
  void validate() const;
};

/// Assignment of whole subjects to S disjoint subsamples.
struct Partition {
  std::unordered_map<std::string, int> assignments;  // subject id -> subsample
  int n_splits = 1;
  std::uint64_t seed = 0;
};

JointDataset load_dataset(const std::string& longitudinal_path, const std::string& survival_path);

/// Shuffle subjects with a generator seeded from `seed`, then deal round-robin
/// so subsample sizes differ by at most one.
Partition make_partition(const JointDataset& dataset, int n_splits, std::uint64_t seed);

/// The sub-dataset holding exactly the subjects assigned to subsample s,
/// records intact, subject order preserved from the parent dataset.
JointDataset materialize(const JointDataset& dataset, const Partition& partition, int s);

void write_partition_csv(const std::string& path, const JointDataset& dataset,
                         const Partition& partition);

void write_dataset_csv(const JointDataset& dataset, const std::string& longitudinal_path,
                       const std::string& survival_path);

}  // namespace cjm
