// sqfsim: generate workloads, run policy comparisons, merge run tables and
// inspect cache dumps.
//
// Configuration precedence: command-line flag > file value > built-in default.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sqf/cache_unit.hpp"
#include "sqf/errors.hpp"
#include "sqf/reporting.hpp"
#include "sqf/simulator.hpp"
#include "sqf/workload.hpp"

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sqf::ConfigError(fmt::format("cannot open {}", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sqf::ConfigError(fmt::format("cannot write {}", path));
  out << text;
}

std::vector<sqf::PolicyKind> parse_policies(const std::string& list) {
  std::vector<sqf::PolicyKind> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(sqf::parse_policy(item));
  }
  if (out.empty()) throw sqf::ConfigError("--policies needs at least one policy");
  return out;
}

struct GenerateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t epochs = 14;
};

int cmd_generate(const GenerateArgs& a) {
  auto config = sqf::load_config(a.config);
  if (a.seed) config.seed = *a.seed;
  const auto events = sqf::generate(config, a.epochs);
  write_text(a.out, sqf::write_workload(config, events));
  return 0;
}

struct RunArgs {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> repeats;
  std::optional<std::string> policies;
  std::optional<unsigned> threads;
  std::optional<std::string> dumpState;
};

int cmd_run(const RunArgs& a) {
  auto scenario = sqf::load_scenario(a.scenario);
  if (a.seed) scenario.baseSeed = *a.seed;
  if (a.epochs) scenario.epochs = *a.epochs;
  if (a.repeats) scenario.repeats = *a.repeats;
  if (a.policies) scenario.policies = parse_policies(*a.policies);
  if (a.threads) scenario.threads = *a.threads;
  if (scenario.epochs < 1 || scenario.repeats < 1) throw sqf::ConfigError("epochs and repeats must be at least 1");

  const auto result = sqf::run_experiment(scenario);
  sqf::write_run_outputs(a.out, result);

  if (a.dumpState) {
    // Final cache state of the first policy in the first repeat.
    auto config = scenario.workload;
    config.seed = scenario.baseSeed;
    const auto events = scenario.events ? *scenario.events : sqf::generate(config, scenario.epochs);
    sqf::CacheNetwork finalState;
    sqf::run_policy(scenario.policies.front(), scenario, events, &finalState);
    write_text(*a.dumpState, sqf::write_cache_dump(std::span<const sqf::CacheUnit>(finalState.units())));
  }
  return 0;
}

struct CompareArgs {
  std::vector<std::string> runs;
  std::string out;
};

int cmd_compare(const CompareArgs& a) {
  std::vector<std::pair<std::string, std::vector<sqf::ReportRow>>> runs;
  for (const auto& dir : a.runs) {
    const auto path = std::filesystem::path(dir) / "series.csv";
    auto name = std::filesystem::path(dir).lexically_normal().filename().string();
    if (name.empty()) name = std::filesystem::path(dir).lexically_normal().parent_path().filename().string();
    for (const auto& [existing, rows] : runs) {
      if (existing == name) name = dir;
    }
    try {
      runs.emplace_back(name, sqf::read_series_csv(read_text(path.string())));
    } catch (const sqf::LoadError& e) {
      throw sqf::ConfigError(fmt::format("{}: row {}: {}", path.string(), e.record(), e.what()));
    }
  }
  write_text(a.out, sqf::write_compare_csv(sqf::compare_runs(runs)));
  return 0;
}

int cmd_inspect(const std::string& dumpPath) {
  try {
    std::cout << sqf::render_cache_listing(sqf::read_cache_dump(read_text(dumpPath)));
  } catch (const sqf::LoadError& e) {
    throw sqf::ConfigError(fmt::format("{}: record {}: {}", dumpPath, e.record(), e.what()));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-query fragmentation cache simulator"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a workload file from a workload config");
  generate->add_option("config", gen.config, "Workload config JSON")->required();
  generate->add_option("--out", gen.out, "Output workload file ('-' for stdout)")->required();
  generate->add_option("--seed", gen.seed, "Override the config seed");
  generate->add_option("--epochs", gen.epochs, "Epochs to generate")->check(CLI::PositiveNumber);

  RunArgs run;
  auto* runCmd = app.add_subcommand("run", "Run a scenario and write raw.csv and series.csv");
  runCmd->add_option("scenario", run.scenario, "Scenario JSON")->required();
  runCmd->add_option("--out", run.out, "Output directory")->required();
  runCmd->add_option("--seed", run.seed, "Override the base seed");
  runCmd->add_option("--epochs", run.epochs, "Override the number of epochs");
  runCmd->add_option("--repeats", run.repeats, "Override the number of repeats");
  runCmd->add_option("--policies", run.policies, "Comma-separated subset of sqf,semantic,full_query");
  runCmd->add_option("--threads", run.threads, "Worker threads for repeats");
  runCmd->add_option("--dump-state", run.dumpState, "Write the final cache state of the first policy");

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Merge series.csv from several run directories");
  compare->add_option("runs", cmp.runs, "Run directories")->required();
  compare->add_option("--out", cmp.out, "Output CSV ('-' for stdout)")->required();

  std::string dumpPath;
  auto* inspect = app.add_subcommand("inspect-cache", "Print a cache state dump as a listing");
  inspect->add_option("dump", dumpPath, "Cache dump file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*runCmd) return cmd_run(run);
    if (*compare) return cmd_compare(cmp);
    if (*inspect) return cmd_inspect(dumpPath);
  } catch (const std::exception& e) {
    std::cerr << "sqfsim: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
