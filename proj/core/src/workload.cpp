#include "sqf/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sqf/errors.hpp"
#include "sqf/plan_format.hpp"

namespace sqf {

using nlohmann::json;

std::string_view to_string(DistributionFamily family) {
  switch (family) {
    case DistributionFamily::Uniform: return "uniform";
    case DistributionFamily::Poisson: return "poisson";
    case DistributionFamily::Exponential: return "exponential";
  }
  return "?";
}

void Distribution::validate() const {
  if (family == DistributionFamily::Uniform) {
    if (!std::isfinite(a) || !std::isfinite(b)) throw ConfigError("uniform bounds must be finite");
    if (a > b) throw ConfigError(fmt::format("uniform distribution needs a <= b, got a={} b={}", a, b));
  } else if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ConfigError(fmt::format("{} distribution needs lambda > 0, got {}", to_string(family), lambda));
  }
}

std::size_t draw_rank(const Distribution& d, std::size_t k, std::mt19937_64& rng) {
  if (k == 0) throw ContractError("rank drawn from an empty population");
  double rank = 1.0;
  switch (d.family) {
    case DistributionFamily::Uniform: {
      std::uniform_int_distribution<std::int64_t> pick(std::llround(std::ceil(d.a)), std::llround(std::floor(d.b)));
      rank = static_cast<double>(pick(rng));
      break;
    }
    case DistributionFamily::Poisson: rank = 1.0 + static_cast<double>(std::poisson_distribution<std::int64_t>(d.lambda)(rng)); break;
    case DistributionFamily::Exponential: rank = 1.0 + std::floor(std::exponential_distribution<double>(d.lambda)(rng)); break;
  }
  return static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(k)));
}

double draw_gap(const Distribution& d, std::mt19937_64& rng) {
  switch (d.family) {
    case DistributionFamily::Uniform: return std::uniform_real_distribution<double>(d.a, d.b)(rng);
    case DistributionFamily::Poisson: return static_cast<double>(std::poisson_distribution<std::int64_t>(d.lambda)(rng));
    case DistributionFamily::Exponential: return std::exponential_distribution<double>(d.lambda)(rng);
  }
  return 0.0;
}

void WorkloadConfig::validate() const {
  if (version != 1) throw ConfigError(fmt::format("unsupported workload config version {}", version));
  if (!(windowDuration > 0.0)) throw ConfigError("windowDuration must be positive");
  if (queriesPerWindow < 1) throw ConfigError("queriesPerWindow must be at least 1");
  overlap.validate();
  interArrival.validate();
  if (interArrival.family == DistributionFamily::Uniform && interArrival.a < 0.0) {
    throw ConfigError("inter-arrival gaps cannot be negative");
  }
  if (complexityMin < 1 || complexityMin > complexityMax) throw ConfigError("complexity range must satisfy 1 <= min <= max");
  if (universeSize < complexityMax) throw ConfigError("universeSize must be at least the maximum complexity");
  if (userLocations.empty()) throw ConfigError("at least one user location is required");
  if (!(volumeMin >= 0.0) || volumeMin > volumeMax) throw ConfigError("volume range must satisfy 0 <= min <= max");
  if (!(jitter >= 0.0 && jitter <= 1.0)) throw ConfigError("jitter must be in [0, 1]");
  if (!(locality >= 0.0 && locality <= 1.0)) throw ConfigError("locality must be in [0, 1]");
  if (relations < 2) throw ConfigError("at least two relations are required");
  if (dataServers < 1) throw ConfigError("at least one data server is required");
  for (const auto& o : epochSchedule) o.overlap.validate();
}

// -- config JSON --------------------------------------------------------------

namespace {

Distribution distribution_from_json(const json& j) {
  Distribution d;
  const auto family = j.at("family").get<std::string>();
  if (family == "uniform") {
    d = Distribution::uniform(j.at("a").get<double>(), j.at("b").get<double>());
  } else if (family == "poisson") {
    d = Distribution::poisson(j.at("lambda").get<double>());
  } else if (family == "exponential") {
    d = Distribution::exponential(j.at("lambda").get<double>());
  } else {
    throw ConfigError(fmt::format("unknown distribution family '{}'", family));
  }
  d.validate();
  return d;
}

json distribution_to_json(const Distribution& d) {
  if (d.family == DistributionFamily::Uniform) return {{"family", "uniform"}, {"a", d.a}, {"b", d.b}};
  return {{"family", std::string(to_string(d.family))}, {"lambda", d.lambda}};
}

std::pair<std::size_t, std::size_t> size_range(const json& j, std::string_view name) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(fmt::format("{} must be [min, max]", name));
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

WorkloadConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("workload config: {}", e.what()));
  }
  WorkloadConfig c;
  try {
    c.version = j.value("version", c.version);
    c.windowDuration = j.value("windowDuration", c.windowDuration);
    c.queriesPerWindow = j.value("queriesPerWindow", c.queriesPerWindow);
    if (j.contains("overlap")) c.overlap = distribution_from_json(j.at("overlap"));
    if (j.contains("interArrival")) c.interArrival = distribution_from_json(j.at("interArrival"));
    if (j.contains("complexity")) std::tie(c.complexityMin, c.complexityMax) = size_range(j.at("complexity"), "complexity");
    c.universeSize = j.value("universeSize", c.universeSize);
    c.userLocations = j.value("userLocations", c.userLocations);
    if (j.contains("volumeRange")) {
      const auto& v = j.at("volumeRange");
      if (!v.is_array() || v.size() != 2) throw ConfigError("volumeRange must be [min, max]");
      c.volumeMin = v[0].get<double>();
      c.volumeMax = v[1].get<double>();
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("epochSchedule")) {
      for (const auto& o : j.at("epochSchedule")) {
        c.epochSchedule.push_back({o.at("epoch").get<std::size_t>(), distribution_from_json(o.at("overlap"))});
      }
    }
    c.templates = j.value("templates", c.templates);
    c.jitter = j.value("jitter", c.jitter);
    c.locality = j.value("locality", c.locality);
    c.relations = j.value("relations", c.relations);
    c.dataServers = j.value("dataServers", c.dataServers);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("workload config: {}", e.what()));
  }
  c.validate();
  return c;
}

std::string config_to_json(const WorkloadConfig& c) {
  json schedule = json::array();
  for (const auto& o : c.epochSchedule) schedule.push_back({{"epoch", o.epoch}, {"overlap", distribution_to_json(o.overlap)}});
  json j = {{"version", c.version},
            {"windowDuration", c.windowDuration},
            {"queriesPerWindow", c.queriesPerWindow},
            {"overlap", distribution_to_json(c.overlap)},
            {"interArrival", distribution_to_json(c.interArrival)},
            {"complexity", {c.complexityMin, c.complexityMax}},
            {"universeSize", c.universeSize},
            {"userLocations", c.userLocations},
            {"volumeRange", {c.volumeMin, c.volumeMax}},
            {"seed", c.seed},
            {"epochSchedule", schedule},
            {"templates", c.templates},
            {"jitter", c.jitter},
            {"locality", c.locality},
            {"relations", c.relations},
            {"dataServers", c.dataServers}};
  return j.dump();
}

WorkloadConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open workload config {}", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

// -- generator ----------------------------------------------------------------

WorkloadGenerator::WorkloadGenerator(WorkloadConfig config)
    : config_(std::move(config)), rng_(config_.seed), overlap_(config_.overlap) {
  config_.validate();
  universe_.reserve(config_.universeSize);
  for (std::size_t i = 0; i < config_.universeSize; ++i) universe_.push_back(make_subquery(i));
  rankToUniverse_.resize(universe_.size());
  std::iota(rankToUniverse_.begin(), rankToUniverse_.end(), std::size_t{0});

  if (config_.templates > 0) {
    std::uniform_int_distribution<std::size_t> size(config_.complexityMin, config_.complexityMax);
    std::uniform_int_distribution<std::size_t> loc(0, config_.userLocations.size() - 1);
    std::uniform_int_distribution<std::size_t> any(0, universe_.size() - 1);
    for (std::size_t t = 0; t < config_.templates; ++t) {
      Template tpl;
      const auto m = size(rng_);
      while (tpl.leaves.size() < m) {
        const auto idx = any(rng_);
        if (std::find(tpl.leaves.begin(), tpl.leaves.end(), idx) == tpl.leaves.end()) tpl.leaves.push_back(idx);
      }
      tpl.home = config_.userLocations[loc(rng_)];
      templates_.push_back(std::move(tpl));
    }
    rankToTemplate_.resize(templates_.size());
    std::iota(rankToTemplate_.begin(), rankToTemplate_.end(), std::size_t{0});
  }
}

NodePtr WorkloadGenerator::make_subquery(std::size_t index) {
  std::uniform_int_distribution<std::size_t> relation(0, config_.relations - 1);
  std::uniform_int_distribution<int> attribute(0, 7);
  std::uniform_int_distribution<int> width(2, 3);
  std::uniform_int_distribution<std::int64_t> constant(0, 100);
  std::uniform_int_distribution<int> comparator(0, 4);
  std::bernoulli_distribution join(0.2);
  std::uniform_real_distribution<double> volume(config_.volumeMin, config_.volumeMax);

  auto relationRef = [&](std::size_t r) {
    return RelationRef{fmt::format("rel{}", r + 1), fmt::format("ds-{}", r % config_.dataServers + 1)};
  };
  auto attr = [&](std::size_t r, int a) { return AttributeRef{fmt::format("rel{}", r + 1), fmt::format("a{}", a)}; };

  SemanticDescriptor d;
  const auto r = relation(rng_);
  d.relations.push_back(relationRef(r));
  const int projected = width(rng_);
  for (int i = 0; i < projected; ++i) d.attributes.push_back(attr(r, attribute(rng_)));

  static constexpr Comparator kSelections[] = {Comparator::Lt, Comparator::Le, Comparator::Gt, Comparator::Ge,
                                               Comparator::Eq};
  const auto filtered = attr(r, attribute(rng_));
  d.predicates.push_back({filtered, kSelections[comparator(rng_)], Constant{constant(rng_)}});
  d.attributes.push_back(filtered);

  if (join(rng_)) {
    auto other = relation(rng_);
    if (other == r) other = (r + 1) % config_.relations;
    const int key = attribute(rng_);
    d.relations.push_back(relationRef(other));
    d.predicates.push_back({attr(r, key), Comparator::Eq, attr(other, key)});
    d.attributes.push_back(attr(r, key));
    d.attributes.push_back(attr(other, key));
  }
  d.resultVolumeGB = std::round(volume(rng_) * 100.0) / 100.0;
  d.resultHandle = fmt::format("qr:u{}", index + 1);
  return QetNode::leaf(fmt::format("u{}", index + 1), std::move(d));
}

std::size_t WorkloadGenerator::draw_universe_index() {
  return rankToUniverse_[draw_rank(overlap_, universe_.size(), rng_) - 1];
}

std::vector<std::size_t> WorkloadGenerator::draw_leaves(std::size_t count) {
  std::vector<std::size_t> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    std::size_t idx;
    if (attempts < 64 * count) {
      idx = draw_universe_index();
      ++attempts;
    } else {
      // A narrow distribution cannot supply enough distinct leaves.
      idx = std::uniform_int_distribution<std::size_t>(0, universe_.size() - 1)(rng_);
    }
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  return out;
}

NodePtr WorkloadGenerator::random_parallel(std::vector<NodePtr> nodes) {
  if (nodes.size() == 1) return nodes.front();
  const auto split = std::uniform_int_distribution<std::size_t>(1, nodes.size() - 1)(rng_);
  std::vector<NodePtr> left(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(split));
  std::vector<NodePtr> right(nodes.begin() + static_cast<std::ptrdiff_t>(split), nodes.end());
  return QetNode::combine(Operator::Parallel, {random_parallel(std::move(left)), random_parallel(std::move(right))});
}

QueryEvaluationTree WorkloadGenerator::build_tree(const std::vector<std::size_t>& leafIndices) {
  std::vector<NodePtr> nodes;
  nodes.reserve(leafIndices.size());
  for (const auto idx : leafIndices) nodes.push_back(universe_[idx]);
  QueryEvaluationTree t;
  t.queryId = fmt::format("Q{}", emitted_ + 1);
  if (nodes.size() <= 2) {
    t.root = random_parallel(std::move(nodes));
  } else {
    auto last = nodes.back();
    nodes.pop_back();
    t.root = QetNode::combine(Operator::Sequential, {random_parallel(std::move(nodes)), std::move(last)});
  }
  return t;
}

void WorkloadGenerator::reshuffle() {
  std::shuffle(rankToUniverse_.begin(), rankToUniverse_.end(), rng_);
  std::shuffle(rankToTemplate_.begin(), rankToTemplate_.end(), rng_);
}

void WorkloadGenerator::mutate_at_epoch(std::size_t epoch, const Distribution& overlap) {
  overlap.validate();
  overlap_ = overlap;
  reshuffle();
  epoch_ = std::max(epoch_, epoch);
}

std::vector<QueryEvent> WorkloadGenerator::next_epoch() {
  for (const auto& o : config_.epochSchedule) {
    if (o.epoch == epoch_) mutate_at_epoch(epoch_, o.overlap);
  }
  clock_ = std::max(clock_, static_cast<double>(epoch_) * config_.windowDuration);

  std::vector<QueryEvent> events;
  events.reserve(config_.queriesPerWindow);
  std::uniform_int_distribution<std::size_t> size(config_.complexityMin, config_.complexityMax);
  std::uniform_int_distribution<std::size_t> loc(0, config_.userLocations.size() - 1);
  std::bernoulli_distribution home(config_.locality);
  std::bernoulli_distribution redraw(config_.jitter);
  std::uniform_int_distribution<std::size_t> any(0, universe_.size() - 1);

  for (std::size_t q = 0; q < config_.queriesPerWindow; ++q) {
    clock_ += draw_gap(config_.interArrival, rng_);
    QueryEvent e;
    e.ts = clock_;
    std::vector<std::size_t> leafIndices;
    if (templates_.empty()) {
      leafIndices = draw_leaves(size(rng_));
      e.userLoc = config_.userLocations[loc(rng_)];
    } else {
      const auto& tpl = templates_[rankToTemplate_[draw_rank(overlap_, templates_.size(), rng_) - 1]];
      leafIndices = tpl.leaves;
      for (auto& idx : leafIndices) {
        if (!redraw(rng_)) continue;
        const auto replacement = any(rng_);
        if (std::find(leafIndices.begin(), leafIndices.end(), replacement) == leafIndices.end()) idx = replacement;
      }
      e.userLoc = home(rng_) ? tpl.home : config_.userLocations[loc(rng_)];
    }
    e.tree = build_tree(leafIndices);
    ++emitted_;
    events.push_back(std::move(e));
  }
  ++epoch_;
  return events;
}

std::vector<QueryEvent> generate(const WorkloadConfig& config, std::size_t epochs) {
  WorkloadGenerator gen(config);
  std::vector<QueryEvent> out;
  out.reserve(epochs * config.queriesPerWindow);
  for (std::size_t e = 0; e < epochs; ++e) {
    auto batch = gen.next_epoch();
    std::move(batch.begin(), batch.end(), std::back_inserter(out));
  }
  return out;
}

// -- workload file ------------------------------------------------------------

namespace {

constexpr std::string_view kWorkloadMagic = "sqf-workload 1";

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> words(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const auto start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && p == text.data() + text.size();
}

}  // namespace

std::string write_workload(const WorkloadConfig& config, const std::vector<QueryEvent>& events) {
  std::string out = fmt::format("{}\nconfig {}\nevents {}\n", kWorkloadMagic, config_to_json(config), events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    out += fmt::format("event {} {} {}\n", i, events[i].ts, events[i].userLoc);
    out += write_plan(events[i].tree);
  }
  return out;
}

Workload read_workload(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kWorkloadMagic) {
    throw LoadError(fmt::format("missing or unsupported header, expected '{}'", kWorkloadMagic), 0);
  }
  if (lines.size() < 3 || !lines[1].starts_with("config ")) throw LoadError("missing config line", 0);
  Workload w;
  try {
    w.config = config_from_json(lines[1].substr(7));
  } catch (const ConfigError& e) {
    throw LoadError(e.what(), 0);
  }
  const auto countWords = words(lines[2]);
  std::size_t count = 0;
  if (countWords.size() != 2 || countWords[0] != "events" || !parse_number(countWords[1], count)) {
    throw LoadError("malformed events line", 0);
  }
  w.events.reserve(count);
  std::size_t pos = 3;
  for (std::size_t i = 0; i < count; ++i) {
    while (pos < lines.size() && lines[pos].empty()) ++pos;
    if (pos >= lines.size()) throw LoadError(fmt::format("expected {} events, file ends after {}", count, i), i);
    const auto head = words(lines[pos]);
    std::size_t index = 0;
    QueryEvent e;
    if (head.size() != 4 || head[0] != "event" || !parse_number(head[1], index) || !parse_number(head[2], e.ts)) {
      throw LoadError(fmt::format("malformed event header '{}'", lines[pos]), i);
    }
    if (index != i) throw LoadError(fmt::format("event index {} out of sequence", index), i);
    if (!w.events.empty() && e.ts < w.events.back().ts) throw LoadError("timestamps must not decrease", i);
    e.userLoc = std::string(head[3]);
    ++pos;
    try {
      e.tree = parse_plan_lines(lines, pos, 0);
    } catch (const Error& err) {
      throw LoadError(fmt::format("bad plan: {}", err.what()), i);
    }
    w.events.push_back(std::move(e));
  }
  for (; pos < lines.size(); ++pos) {
    if (!lines[pos].empty()) throw LoadError("unexpected content after the last event", count);
  }
  return w;
}

void save_workload(const std::string& path, const WorkloadConfig& config, const std::vector<QueryEvent>& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write workload file {}", path));
  out << write_workload(config, events);
  if (!out) throw ConfigError(fmt::format("failed writing workload file {}", path));
}

Workload load_workload(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open workload file {}", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_workload(buf.str());
}

}  // namespace sqf
