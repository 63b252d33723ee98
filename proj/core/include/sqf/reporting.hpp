#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sqf/cache_unit.hpp"
#include "sqf/simulator.hpp"

namespace sqf {

inline constexpr std::string_view kRawColumns =
    "policy,repeat,epoch,avg_response,pct_found,intercache_cost,relocations,duplication_gb,cache_faults";
inline constexpr std::string_view kSeriesColumns = "policy,metric,epoch,mean,stderr,repeats";
inline constexpr std::string_view kCompareColumns = "run,policy,metric,epoch,mean,stderr,repeats";

/// One aggregated series value as stored in series.csv.
struct ReportRow {
  std::string policy;
  std::string metric;
  std::size_t epoch = 0;
  double mean = 0.0;
  double stdError = 0.0;
  std::size_t repeats = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Per-repeat epoch values; repeats are 0-based, epochs 1-based, floats with
/// six decimals.
std::string write_raw_csv(const std::vector<RawRow>& raw);
std::string write_series_csv(const std::vector<SeriesRow>& series);

std::vector<ReportRow> to_report_rows(const std::vector<SeriesRow>& series);
/// Throws LoadError naming the offending data row (0-based).
std::vector<ReportRow> read_series_csv(std::string_view text);

struct CompareRow {
  std::string run;
  ReportRow row;
};

/// Merges named runs into one table sorted by metric, epoch, policy and run.
/// Throws ConfigError when there is nothing to compare.
std::vector<CompareRow> compare_runs(const std::vector<std::pair<std::string, std::vector<ReportRow>>>& runs);
std::string write_compare_csv(const std::vector<CompareRow>& rows);

/// Writes raw.csv and series.csv into `dir`, creating it if needed.
void write_run_outputs(const std::string& dir, const ExperimentResult& result);

/// Human-readable listing of cached queries, one block per object.
std::string render_cache_listing(const std::vector<CacheDumpRecord>& records);

}  // namespace sqf
