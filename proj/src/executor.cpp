#include "cjm/executor.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include "cjm/csv.hpp"
#include "cjm/errors.hpp"
#include "cjm/stats.hpp"

namespace cjm {

namespace detail {

TimingReport run_plan(const JobPlan& plan, const std::function<void(std::size_t)>& run_job,
                      std::vector<std::string>* errors) {
  const std::size_t n_jobs = plan.jobs.size();
  TimingReport report;
  report.jobs.resize(n_jobs);
  if (n_jobs == 0) return report;

  const int cap = (plan.core_cap <= 0) ? static_cast<int>(n_jobs)
                                       : std::min(plan.core_cap, static_cast<int>(n_jobs));
  report.initial_queue_depth = static_cast<int>(n_jobs) - cap;

  const auto t0 = std::chrono::steady_clock::now();
  const auto since_start = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  std::atomic<std::size_t> next{0};
  std::mutex ledger_mutex;
  int running = 0;
  int peak = 0;

  const auto worker = [&] {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= n_jobs) break;
      {
        std::lock_guard<std::mutex> lock(ledger_mutex);
        ++running;
        peak = std::max(peak, running);
        report.jobs[idx].start_seconds = since_start();
      }
      try {
        run_job(idx);
      } catch (const std::exception& e) {
        (*errors)[idx] = e.what();
      } catch (...) {
        (*errors)[idx] = "unknown job failure";
      }
      {
        std::lock_guard<std::mutex> lock(ledger_mutex);
        --running;
        report.jobs[idx].end_seconds = since_start();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(cap));
  for (int w = 0; w < cap; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  report.total_wall_seconds = since_start();
  report.peak_concurrency = peak;
  for (std::size_t i = 0; i < n_jobs; ++i) {
    JobTiming& jt = report.jobs[i];
    jt.subsample = plan.jobs[i].subsample;
    jt.chain = plan.jobs[i].chain;
    jt.seconds = jt.end_seconds - jt.start_seconds;
    jt.ok = (*errors)[i].empty();
    jt.error = (*errors)[i];
    report.max_job_seconds = std::max(report.max_job_seconds, jt.seconds);
    auto [it, inserted] = report.subsample_max_seconds.emplace(jt.subsample, jt.seconds);
    if (!inserted) it->second = std::max(it->second, jt.seconds);
  }
  return report;
}

}  // namespace detail

std::vector<SpeedupEntry> speedup_report(const std::vector<TimingSample>& samples) {
  std::map<int, std::vector<double>> baseline;  // n -> per-replica seconds, arrival order
  std::map<std::pair<int, int>, std::vector<double>> cells;
  for (const auto& s : samples) {
    if (!(s.seconds > 0.0)) {
      throw DataError("timing samples must be positive");
    }
    if (s.n_splits == 1) baseline[s.n].push_back(s.seconds);
    cells[{s.n, s.n_splits}].push_back(s.seconds);
  }
  std::vector<SpeedupEntry> out;
  for (const auto& [key, times] : cells) {
    const auto base_it = baseline.find(key.first);
    if (base_it == baseline.end()) {
      throw DataError("no full-data baseline recorded for n=" + std::to_string(key.first));
    }
    const auto& base = base_it->second;
    std::vector<double> ratios;
    for (std::size_t r = 0; r < times.size(); ++r) {
      ratios.push_back(times[r] / base[std::min(r, base.size() - 1)]);
    }
    SpeedupEntry e;
    e.n = key.first;
    e.n_splits = key.second;
    e.relative_median = quantile_linear(ratios, 0.5);
    e.relative_q1 = quantile_linear(ratios, 0.25);
    e.relative_q3 = quantile_linear(ratios, 0.75);
    e.slower_than_baseline = e.relative_median > 1.0;
    out.push_back(e);
  }
  return out;
}

void write_timing_csv(const std::string& path, const std::string& scenario, int n, int n_splits,
                      int core_cap, const TimingReport& report, bool append) {
  static const std::vector<std::string> header = {"scenario", "n",   "S",      "core_cap",
                                                  "job",      "seconds"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& jt : report.jobs) {
    rows.push_back({scenario, std::to_string(n), std::to_string(n_splits),
                    std::to_string(core_cap),
                    "s" + std::to_string(jt.subsample) + "_c" + std::to_string(jt.chain),
                    format_double(jt.seconds)});
  }
  if (append) {
    CsvTable existing = read_csv(path);
    for (auto& row : rows) existing.rows.push_back(row);
    write_csv(path, existing.header, existing.rows);
  } else {
    write_csv(path, header, rows);
  }
}

void write_speedup_csv(const std::string& path, const std::vector<SpeedupEntry>& entries) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : entries) {
    rows.push_back({std::to_string(e.n), std::to_string(e.n_splits),
                    format_double(e.relative_median), format_double(e.relative_q1),
                    format_double(e.relative_q3)});
  }
  write_csv(path, {"n", "S", "relative_median", "relative_q1", "relative_q3"}, rows);
}

}  // namespace cjm
