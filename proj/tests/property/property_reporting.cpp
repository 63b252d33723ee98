#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "property.hpp"
#include "sqf/reporting.hpp"

using namespace sqf;
using namespace sqf::testing;

namespace {

SeriesRow random_series_row(Rng& rng) {
  SeriesRow r;
  r.policy = static_cast<PolicyKind>(uniform_int(rng, 0, 2));
  r.metric = pick(rng, series_metrics());
  r.epoch = static_cast<std::size_t>(uniform_int(rng, 1, 14));
  r.mean = uniform_int(rng, -100000, 100000) / 1000.0;
  r.stdError = uniform_int(rng, 0, 100000) / 1000.0;
  r.repeats = static_cast<std::size_t>(uniform_int(rng, 1, 12));
  return r;
}

}  // namespace

TEST_CASE("series CSV round-trips at six decimals") {
  for_all(61, [](Rng& rng, int) {
    std::vector<SeriesRow> rows(static_cast<std::size_t>(uniform_int(rng, 0, 20)));
    for (auto& r : rows) r = random_series_row(rng);
    const auto text = write_series_csv(rows);
    const auto back = read_series_csv(text);
    REQUIRE(back.size() == rows.size());
    const auto expected = to_report_rows(rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(back[i].policy == expected[i].policy);
      CHECK(back[i].metric == expected[i].metric);
      CHECK(back[i].epoch == expected[i].epoch);
      CHECK(std::abs(back[i].mean - expected[i].mean) <= 5e-7);
      CHECK(std::abs(back[i].stdError - expected[i].stdError) <= 5e-7);
      CHECK(back[i].repeats == expected[i].repeats);
    }
  });
}

TEST_CASE("aggregated series are means with non-negative standard errors") {
  for_all(62, [](Rng& rng, int) {
    std::vector<RawRow> raw;
    const auto repeats = static_cast<std::size_t>(uniform_int(rng, 1, 6));
    const auto epochs = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    for (std::size_t r = 0; r < repeats; ++r) {
      for (std::size_t e = 1; e <= epochs; ++e) {
        EpochResult res;
        res.epoch = e;
        res.avgResponseTicks = uniform_int(rng, 0, 1000) / 10.0;
        res.pctDataFound = uniform_int(rng, 0, 100);
        res.relocations = static_cast<std::size_t>(uniform_int(rng, 0, 5));
        raw.push_back({PolicyKind::SQF, r, res});
      }
    }
    const auto series = aggregate(raw);
    CHECK(series.size() == series_metrics().size() * epochs);
    for (const auto& s : series) {
      CHECK(s.stdError >= 0.0);
      CHECK(s.repeats == repeats);
      double sum = 0.0;
      for (const auto& row : raw) {
        if (row.result.epoch == s.epoch) sum += metric_value(row.result, s.metric);
      }
      CHECK(s.mean == doctest::Approx(sum / static_cast<double>(repeats)));
    }
  });
}

TEST_CASE("comparison output is sorted by metric, epoch, policy and run") {
  for_all(63, [](Rng& rng, int) {
    std::vector<std::pair<std::string, std::vector<ReportRow>>> runs;
    const int n = uniform_int(rng, 1, 3);
    for (int k = 0; k < n; ++k) {
      std::vector<SeriesRow> rows(static_cast<std::size_t>(uniform_int(rng, 1, 10)));
      for (auto& r : rows) r = random_series_row(rng);
      runs.emplace_back("run" + std::to_string(k), to_report_rows(rows));
    }
    const auto merged = compare_runs(runs);
    std::size_t total = 0;
    for (const auto& [name, rows] : runs) total += rows.size();
    CHECK(merged.size() == total);
    for (std::size_t i = 1; i < merged.size(); ++i) {
      const auto& a = merged[i - 1];
      const auto& b = merged[i];
      CHECK_FALSE(std::tie(b.row.metric, b.row.epoch, b.row.policy, b.run) <
                  std::tie(a.row.metric, a.row.epoch, a.row.policy, a.run));
    }
  });
}
