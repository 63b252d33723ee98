#include "sqf/reporting.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <tuple>

#include <fmt/format.h>

#include "sqf/errors.hpp"

namespace sqf {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? s.npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

template <typename T>
T field(std::string_view text, std::size_t row, std::string_view name) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || p != text.data() + text.size()) {
    throw LoadError(fmt::format("column {}: '{}' is not a number", name, text), row);
  }
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  out << content;
  if (!out) throw ConfigError(fmt::format("failed writing {}", path.string()));
}

template <typename Pairs>
std::string pairs_text(const Pairs& pairs) {
  if (pairs.empty()) return "-";
  std::string out;
  for (const auto& [k, v] : pairs) {
    if (!out.empty()) out += ", ";
    out += fmt::format("({}) {}", k, v);
  }
  return out;
}

}  // namespace

std::string write_raw_csv(const std::vector<RawRow>& raw) {
  std::string out = std::string(kRawColumns) + "\n";
  for (const auto& row : raw) {
    const auto& r = row.result;
    out += fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{},{:.6f},{}\n", to_string(row.policy), row.repeat, r.epoch,
                       r.avgResponseTicks, r.pctDataFound, r.interCacheCost, r.relocations, r.duplicationGB,
                       r.cacheFaults);
  }
  return out;
}

std::vector<ReportRow> to_report_rows(const std::vector<SeriesRow>& series) {
  std::vector<ReportRow> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    out.push_back({std::string(to_string(s.policy)), s.metric, s.epoch, s.mean, s.stdError, s.repeats});
  }
  return out;
}

std::string write_series_csv(const std::vector<SeriesRow>& series) {
  std::string out = std::string(kSeriesColumns) + "\n";
  for (const auto& s : series) {
    out += fmt::format("{},{},{},{:.6f},{:.6f},{}\n", to_string(s.policy), s.metric, s.epoch, s.mean, s.stdError,
                       s.repeats);
  }
  return out;
}

std::vector<ReportRow> read_series_csv(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines[0] != kSeriesColumns) {
    throw LoadError(fmt::format("expected header '{}'", kSeriesColumns), 0);
  }
  std::vector<ReportRow> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t row = i - 1;
    const auto cols = split(lines[i], ',');
    if (cols.size() != 6) throw LoadError(fmt::format("expected 6 columns, found {}", cols.size()), row);
    if (cols[0].empty() || cols[1].empty()) throw LoadError("empty policy or metric", row);
    out.push_back({std::string(cols[0]), std::string(cols[1]), field<std::size_t>(cols[2], row, "epoch"),
                   field<double>(cols[3], row, "mean"), field<double>(cols[4], row, "stderr"),
                   field<std::size_t>(cols[5], row, "repeats")});
  }
  return out;
}

std::vector<CompareRow> compare_runs(const std::vector<std::pair<std::string, std::vector<ReportRow>>>& runs) {
  std::vector<CompareRow> out;
  for (const auto& [name, rows] : runs) {
    for (const auto& r : rows) out.push_back({name, r});
  }
  if (out.empty()) throw ConfigError("nothing to compare: no runs or no rows");
  std::stable_sort(out.begin(), out.end(), [](const CompareRow& a, const CompareRow& b) {
    return std::tie(a.row.metric, a.row.epoch, a.row.policy, a.run) <
           std::tie(b.row.metric, b.row.epoch, b.row.policy, b.run);
  });
  return out;
}

std::string write_compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = std::string(kCompareColumns) + "\n";
  for (const auto& [run, r] : rows) {
    out += fmt::format("{},{},{},{},{:.6f},{:.6f},{}\n", run, r.policy, r.metric, r.epoch, r.mean, r.stdError,
                       r.repeats);
  }
  return out;
}

void write_run_outputs(const std::string& dir, const ExperimentResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError(fmt::format("cannot create output directory {}: {}", dir, ec.message()));
  write_file(std::filesystem::path(dir) / "raw.csv", write_raw_csv(result.raw));
  write_file(std::filesystem::path(dir) / "series.csv", write_series_csv(result.series));
}

std::string render_cache_listing(const std::vector<CacheDumpRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += fmt::format("cached query {}\n", r.id);
    out += fmt::format("  expression     {}\n", r.expr);
    out += fmt::format("  cache location {}\n", r.cloc);
    out += fmt::format("  volume (GB)    {}\n", r.volumeGB);
    out += fmt::format("  complexity     {}\n", r.complexity);
    out += fmt::format("  last used      {}\n", pairs_text(r.lastUsed));
    out += fmt::format("  frequency      {}\n", pairs_text(r.freq));
    out += fmt::format("  co-queried     {}\n", pairs_text(r.coQueried));
  }
  return out;
}

}  // namespace sqf
