#include "cjm/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "cjm/csv.hpp"
#include "cjm/errors.hpp"
#include "cjm/rng.hpp"

namespace cjm {

std::size_t JointDataset::n_longitudinal_records() const {
  std::size_t n = 0;
  for (const auto& subj : subjects) n += subj.longitudinal.size();
  return n;
}

void JointDataset::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& subj : subjects) {
    if (!seen.insert(subj.id).second) {
      throw DataError("duplicate subject id '" + subj.id + "'");
    }
    const auto& surv = subj.survival;
    if (!(surv.observed_time > 0.0) || !std::isfinite(surv.observed_time)) {
      throw DataError("subject '" + subj.id + "': observed_time must be finite and > 0");
    }
    if (surv.event != 0 && surv.event != 1) {
      throw DataError("subject '" + subj.id + "': event must be 0 or 1");
    }
    if (surv.covariates.size() != surv_covariate_names.size()) {
      throw DataError("subject '" + subj.id + "': survival covariate count mismatch");
    }
    double prev = -1.0;
    for (const auto& rec : subj.longitudinal) {
      if (!std::isfinite(rec.time) || rec.time < 0.0) {
        throw DataError("subject '" + subj.id + "': longitudinal time must be finite and >= 0");
      }
      if (!std::isfinite(rec.value)) {
        throw DataError("subject '" + subj.id + "': longitudinal value must be finite");
      }
      if (rec.time < prev) {
        throw DataError("subject '" + subj.id + "': longitudinal records not sorted by time");
      }
      if (rec.time > surv.observed_time) {
        throw DataError("subject '" + subj.id + "': longitudinal time " +
                        format_double(rec.time) + " exceeds observed time " +
                        format_double(surv.observed_time));
      }
      if (rec.covariates.size() != long_covariate_names.size()) {
        throw DataError("subject '" + subj.id + "': longitudinal covariate count mismatch");
      }
      prev = rec.time;
    }
  }
}

JointDataset load_dataset(const std::string& longitudinal_path, const std::string& survival_path) {
  const CsvTable lt = read_csv(longitudinal_path);
  const CsvTable st = read_csv(survival_path);

  const std::size_t l_id = lt.column("id");
  const std::size_t l_time = lt.column("time");
  const std::size_t l_y = lt.column("y");
  const std::size_t s_id = st.column("id");
  const std::size_t s_time = st.column("time");
  const std::size_t s_event = st.column("event");

  JointDataset ds;
  std::vector<std::size_t> l_cov_idx;
  for (std::size_t c = 0; c < lt.header.size(); ++c) {
    if (c == l_id || c == l_time || c == l_y) continue;
    ds.long_covariate_names.push_back(lt.header[c]);
    l_cov_idx.push_back(c);
  }
  std::vector<std::size_t> s_cov_idx;
  for (std::size_t c = 0; c < st.header.size(); ++c) {
    if (c == s_id || c == s_time || c == s_event) continue;
    ds.surv_covariate_names.push_back(st.header[c]);
    s_cov_idx.push_back(c);
  }

  // Survival file defines the subject set and its order.
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < st.rows.size(); ++r) {
    Subject subj;
    subj.id = st.rows[r][s_id];
    if (index.count(subj.id)) {
      throw DataError(survival_path + ": duplicate subject id '" + subj.id + "'");
    }
    subj.survival.observed_time = parse_double(st, r, s_time);
    const double ev = parse_double(st, r, s_event);
    if (ev != 0.0 && ev != 1.0) {
      throw DataError(survival_path + ": event must be 0 or 1 for subject '" + subj.id + "'");
    }
    subj.survival.event = static_cast<int>(ev);
    for (std::size_t c : s_cov_idx) {
      subj.survival.covariates.push_back(parse_double(st, r, c));
    }
    index.emplace(subj.id, ds.subjects.size());
    ds.subjects.push_back(std::move(subj));
  }

  for (std::size_t r = 0; r < lt.rows.size(); ++r) {
    const std::string& id = lt.rows[r][l_id];
    auto it = index.find(id);
    if (it == index.end()) {
      throw DataError(longitudinal_path + ": subject '" + id + "' absent from " + survival_path);
    }
    LongitudinalRecord rec;
    rec.time = parse_double(lt, r, l_time);
    rec.value = parse_double(lt, r, l_y);
    for (std::size_t c : l_cov_idx) {
      rec.covariates.push_back(parse_double(lt, r, c));
    }
    ds.subjects[it->second].longitudinal.push_back(std::move(rec));
  }

  for (auto& subj : ds.subjects) {
    std::stable_sort(subj.longitudinal.begin(), subj.longitudinal.end(),
                     [](const auto& a, const auto& b) { return a.time < b.time; });
  }
  ds.validate();
  return ds;
}

Partition make_partition(const JointDataset& dataset, int n_splits, std::uint64_t seed) {
  const std::size_t n = dataset.n_subjects();
  if (n_splits <= 0) {
    throw UsageError("number of splits must be positive");
  }
  if (static_cast<std::size_t>(n_splits) > n) {
    throw UsageError("more splits than subjects (" + std::to_string(n_splits) + " > " +
                     std::to_string(n) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {stream::kPartition}));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(order[i - 1], order[j]);
  }
  Partition part;
  part.n_splits = n_splits;
  part.seed = seed;
  for (std::size_t pos = 0; pos < n; ++pos) {
    part.assignments.emplace(dataset.subjects[order[pos]].id,
                             static_cast<int>(pos % static_cast<std::size_t>(n_splits)));
  }
  return part;
}

JointDataset materialize(const JointDataset& dataset, const Partition& partition, int s) {
  if (s < 0 || s >= partition.n_splits) {
    throw UsageError("subsample index " + std::to_string(s) + " out of range [0, " +
                     std::to_string(partition.n_splits) + ")");
  }
  JointDataset sub;
  sub.long_covariate_names = dataset.long_covariate_names;
  sub.surv_covariate_names = dataset.surv_covariate_names;
  for (const auto& subj : dataset.subjects) {
    auto it = partition.assignments.find(subj.id);
    if (it == partition.assignments.end()) {
      throw DataError("subject '" + subj.id + "' missing from partition");
    }
    if (it->second == s) sub.subjects.push_back(subj);
  }
  return sub;
}

void write_partition_csv(const std::string& path, const JointDataset& dataset,
                         const Partition& partition) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& subj : dataset.subjects) {
    rows.push_back({subj.id, std::to_string(partition.assignments.at(subj.id))});
  }
  write_csv(path, {"id", "subsample"}, rows);
}

void write_dataset_csv(const JointDataset& dataset, const std::string& longitudinal_path,
                       const std::string& survival_path) {
  std::vector<std::string> lh = {"id", "time", "y"};
  lh.insert(lh.end(), dataset.long_covariate_names.begin(), dataset.long_covariate_names.end());
  std::vector<std::vector<std::string>> lrows;
  for (const auto& subj : dataset.subjects) {
    for (const auto& rec : subj.longitudinal) {
      std::vector<std::string> row = {subj.id, format_double(rec.time), format_double(rec.value)};
      for (double c : rec.covariates) row.push_back(format_double(c));
      lrows.push_back(std::move(row));
    }
  }
  write_csv(longitudinal_path, lh, lrows);

  std::vector<std::string> sh = {"id", "time", "event"};
  sh.insert(sh.end(), dataset.surv_covariate_names.begin(), dataset.surv_covariate_names.end());
  std::vector<std::vector<std::string>> srows;
  for (const auto& subj : dataset.subjects) {
    std::vector<std::string> row = {subj.id, format_double(subj.survival.observed_time),
                                    std::to_string(subj.survival.event)};
    for (double c : subj.survival.covariates) row.push_back(format_double(c));
    srows.push_back(std::move(row));
  }
  write_csv(survival_path, sh, srows);
}

}  // namespace cjm
