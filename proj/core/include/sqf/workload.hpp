#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sqf/ids.hpp"
#include "sqf/query_model.hpp"

namespace sqf {

enum class DistributionFamily : std::uint8_t { Uniform, Poisson, Exponential };

std::string_view to_string(DistributionFamily family);

/// Uniform(a, b), Poisson(lambda) or Exponential(lambda).
struct Distribution {
  DistributionFamily family = DistributionFamily::Uniform;
  double a = 1.0;
  double b = 1.0;
  double lambda = 1.0;

  static Distribution uniform(double a, double b) { return {DistributionFamily::Uniform, a, b, 1.0}; }
  static Distribution poisson(double lambda) { return {DistributionFamily::Poisson, 1.0, 1.0, lambda}; }
  static Distribution exponential(double lambda) { return {DistributionFamily::Exponential, 1.0, 1.0, lambda}; }

  /// Throws ConfigError for lambda ≤ 0 or a > b.
  void validate() const;
  friend bool operator==(const Distribution&, const Distribution&) = default;
};

/// Popularity rank in [1, k]: Uniform draws an integer in [a, b]; Poisson
/// gives 1 + draw; Exponential gives 1 + floor(draw). Clamped to [1, k].
std::size_t draw_rank(const Distribution& d, std::size_t k, std::mt19937_64& rng);

/// Gap between consecutive arrivals in ticks: Uniform is continuous on
/// [a, b], Poisson is an integer count, Exponential has rate lambda.
double draw_gap(const Distribution& d, std::mt19937_64& rng);

struct EpochOverride {
  /// 0-based epoch index at whose start the override applies.
  std::size_t epoch = 0;
  Distribution overlap;

  friend bool operator==(const EpochOverride&, const EpochOverride&) = default;
};

struct WorkloadConfig {
  int version = 1;
  double windowDuration = 1000.0;
  std::size_t queriesPerWindow = 714;
  /// Popularity of sub-queries (direct mode) or query templates.
  Distribution overlap = Distribution::uniform(1, 200);
  Distribution interArrival = Distribution::exponential(1.0);
  std::size_t complexityMin = 2;
  std::size_t complexityMax = 5;
  std::size_t universeSize = 200;
  std::vector<LocationId> userLocations{"uloc-1", "uloc-2", "uloc-3", "uloc-4",
                                        "uloc-5", "uloc-6", "uloc-7", "uloc-8"};
  double volumeMin = 0.5;
  double volumeMax = 4.0;
  std::uint64_t seed = 1;
  std::vector<EpochOverride> epochSchedule;
  /// Size of the query template pool; 0 draws every leaf independently.
  std::size_t templates = 0;
  /// Per-leaf probability of redrawing a template leaf.
  double jitter = 0.1;
  /// Probability that a template query comes from its home location.
  double locality = 0.8;
  /// Base relations in the synthetic schema.
  std::size_t relations = 8;
  std::size_t dataServers = 4;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  friend bool operator==(const WorkloadConfig&, const WorkloadConfig&) = default;
};

WorkloadConfig config_from_json(std::string_view text);
/// Single-line JSON with every field.
std::string config_to_json(const WorkloadConfig& config);
WorkloadConfig load_config(const std::string& path);

struct QueryEvent {
  QueryEvaluationTree tree;
  LocationId userLoc;
  Timestamp ts = 0.0;
};

/// Stateful Qgene stream: emits one epoch of events at a time.
class WorkloadGenerator {
 public:
  explicit WorkloadGenerator(WorkloadConfig config);

  const WorkloadConfig& config() const noexcept { return config_; }
  const Distribution& current_overlap() const noexcept { return overlap_; }
  std::size_t next_epoch_index() const noexcept { return epoch_; }
  /// Leaf nodes of the sub-query universe, `u1` … `uK`.
  const std::vector<NodePtr>& universe() const noexcept { return universe_; }

  /// Events of the next epoch; applies any scheduled override first.
  std::vector<QueryEvent> next_epoch();

  /// Switches to `overlap` and reshuffles which sub-queries and templates
  /// are popular.
  void mutate_at_epoch(std::size_t epoch, const Distribution& overlap);

 private:
  struct Template {
    std::vector<std::size_t> leaves;
    LocationId home;
  };

  NodePtr make_subquery(std::size_t index);
  std::size_t draw_universe_index();
  std::vector<std::size_t> draw_leaves(std::size_t count);
  QueryEvaluationTree build_tree(const std::vector<std::size_t>& leafIndices);
  NodePtr random_parallel(std::vector<NodePtr> nodes);
  void reshuffle();

  WorkloadConfig config_;
  std::mt19937_64 rng_;
  Distribution overlap_;
  std::vector<NodePtr> universe_;
  std::vector<std::size_t> rankToUniverse_;
  std::vector<Template> templates_;
  std::vector<std::size_t> rankToTemplate_;
  std::size_t epoch_ = 0;
  std::size_t emitted_ = 0;
  Timestamp clock_ = 0.0;
};

/// `epochs` epochs of `queriesPerWindow` events each.
std::vector<QueryEvent> generate(const WorkloadConfig& config, std::size_t epochs);

/// Text format:
///     sqf-workload 1
///     config {single-line json}
///     events N
///     event <index> <timestamp> <userLoc>
///     <plan document>
///     ...
std::string write_workload(const WorkloadConfig& config, const std::vector<QueryEvent>& events);

struct Workload {
  WorkloadConfig config;
  std::vector<QueryEvent> events;
};

/// Throws LoadError naming the offending event index.
Workload read_workload(std::string_view text);
void save_workload(const std::string& path, const WorkloadConfig& config, const std::vector<QueryEvent>& events);
Workload load_workload(const std::string& path);

}  // namespace sqf
