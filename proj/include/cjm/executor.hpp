#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cjm {

/// One chain job: (subsample, chain) plus the seed it must use.
struct ChainJob {
  int subsample = 0;
  int chain = 0;
  std::uint64_t seed = 0;
};

/// A batch of jobs under a core budget. core_cap <= 0 means unlimited
/// (one core per job).
struct JobPlan {
  std::vector<ChainJob> jobs;
  int core_cap = 0;
};

struct JobTiming {
  int subsample = 0;
  int chain = 0;
  double start_seconds = 0.0;  // relative to dispatch start
  double end_seconds = 0.0;
  double seconds = 0.0;
  bool ok = true;
  std::string error;
};

struct TimingReport {
  std::vector<JobTiming> jobs;  // plan order
  double total_wall_seconds = 0.0;
  double max_job_seconds = 0.0;
  int peak_concurrency = 0;     // scheduler ledger; never exceeds the cap
  int initial_queue_depth = 0;  // jobs waiting when dispatch began
  std::map<int, double> subsample_max_seconds;
};

template <typename Result>
struct JobOutcome {
  bool ok = false;
  std::string error;
  Result value{};
};

namespace detail {
/// Greedy FIFO dispatch over a bounded worker pool: a job starts whenever a
/// core frees up. The type-erased core; use schedule() below.
TimingReport run_plan(const JobPlan& plan, const std::function<void(std::size_t)>& run_job,
                      std::vector<std::string>* errors);
}  // namespace detail

/// Run every job in FIFO order under the core budget. Results are collected
/// by plan index, so the output is deterministic regardless of completion
/// order; failed jobs are recorded and the remaining jobs continue.
template <typename Result>
std::pair<TimingReport, std::vector<JobOutcome<Result>>> schedule(
    const JobPlan& plan, const std::function<Result(const ChainJob&)>& runner) {
  std::vector<JobOutcome<Result>> outcomes(plan.jobs.size());
  std::vector<std::string> errors(plan.jobs.size());
  TimingReport report = detail::run_plan(
      plan,
      [&](std::size_t idx) {
        outcomes[idx].value = runner(plan.jobs[idx]);
        outcomes[idx].ok = true;
      },
      &errors);
  for (std::size_t i = 0; i < plan.jobs.size(); ++i) {
    if (!errors[i].empty()) {
      outcomes[i].ok = false;
      outcomes[i].error = errors[i];
    }
  }
  return {std::move(report), std::move(outcomes)};
}

/// One timing sample of a scenario cell.
struct TimingSample {
  int n = 0;
  int n_splits = 1;
  double seconds = 0.0;
};

struct SpeedupEntry {
  int n = 0;
  int n_splits = 1;
  double relative_median = 0.0;
  double relative_q1 = 0.0;
  double relative_q3 = 0.0;
  bool slower_than_baseline = false;  // flags entries above 1
};

/// Wall time of each split run relative to the full-data (S=1) baseline of
/// its n, paired by replica order. Throws DataError when a cell has no
/// matching baseline.
std::vector<SpeedupEntry> speedup_report(const std::vector<TimingSample>& samples);

void write_timing_csv(const std::string& path, const std::string& scenario, int n, int n_splits,
                      int core_cap, const TimingReport& report, bool append);
void write_speedup_csv(const std::string& path, const std::vector<SpeedupEntry>& entries);

}  // namespace cjm
