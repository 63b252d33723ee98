#include "sqf/cache_unit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "sqf/errors.hpp"

namespace sqf {

namespace {

constexpr double kEpsilonGB = 1e-9;
constexpr std::size_t kNoChild = std::numeric_limits<std::size_t>::max();

bool contains(std::span<const CachedQueryId> ids, const CachedQueryId& id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

WindowStats fresh_window(std::size_t rootChildren) {
  WindowStats w;
  w.independentChildHits.assign(rootChildren, 0);
  w.childDemand.assign(rootChildren, {});
  return w;
}

}  // namespace

std::uint64_t WindowStats::accesses() const {
  std::uint64_t n = 0;
  for (const auto& [loc, count] : freq) n += count;
  return n;
}

std::uint64_t CachedQuery::total_frequency() const {
  std::uint64_t n = 0;
  for (const auto& [loc, count] : freq) n += count;
  return n;
}

std::optional<Timestamp> CachedQuery::last_used_by(const LocationId& loc) const {
  const auto it = lastUsed.find(loc);
  if (it == lastUsed.end()) return std::nullopt;
  return it->second;
}

std::optional<Timestamp> CachedQuery::most_recent_use() const {
  std::optional<Timestamp> best;
  for (const auto& [loc, ts] : lastUsed) {
    if (!best || ts > *best) best = ts;
  }
  return best;
}

CachedQuery make_cached_query(CachedQueryId id, QueryEvaluationTree expr, UnitId cloc) {
  if (!expr.root) throw ContractError("cached query without an expression");
  CachedQuery c;
  c.id = std::move(id);
  c.volumeGB = expr.root->volume();
  c.complexity = complexity(expr);
  c.cloc = std::move(cloc);

  // Breadth-first walk carrying the root-child index down each subtree.
  const auto& rootChildren = expr.root->children();
  std::vector<std::pair<const QetNode*, std::size_t>> order{{expr.root.get(), kNoChild}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto [node, child] = order[i];
    for (std::size_t k = 0; k < node->children().size(); ++k) {
      order.emplace_back(node->children()[k].get(), i == 0 ? k : child);
    }
  }
  c.rootChildOf.reserve(order.size());
  for (const auto& [node, child] : order) c.rootChildOf.push_back(child);
  c.window = fresh_window(rootChildren.size());
  c.expr = std::move(expr);
  return c;
}

void apply_access(CachedQuery& c, const LocationId& userLoc, Timestamp ts, std::span<const CachedQueryId> companions,
                  std::span<const std::size_t> touchedNodes) {
  for (const auto& [loc, last] : c.lastUsed) {
    if (ts < last) {
      throw ClockError(fmt::format("access to {} at {} precedes recorded use at {} from {}", c.id, ts, last, loc));
    }
  }
  std::vector<bool> touched(c.window.independentChildHits.size(), false);
  for (const auto idx : touchedNodes) {
    if (idx >= c.rootChildOf.size()) {
      throw ContractError(fmt::format("node index {} out of range for {}", idx, c.id));
    }
    if (c.rootChildOf[idx] == kNoChild) {
      std::fill(touched.begin(), touched.end(), true);
    } else {
      touched[c.rootChildOf[idx]] = true;
    }
  }

  c.lastUsed[userLoc] = ts;
  ++c.freq[userLoc];
  ++c.window.freq[userLoc];
  for (const auto& other : companions) {
    if (other == c.id) continue;
    ++c.coQueried[other];
    ++c.window.coQueried[other];
  }
  const auto touchedCount = static_cast<std::size_t>(std::count(touched.begin(), touched.end(), true));
  for (std::size_t k = 0; k < touched.size(); ++k) {
    if (!touched[k]) continue;
    ++c.window.childDemand[k][userLoc];
    if (touchedCount < touched.size()) ++c.window.independentChildHits[k];
  }
  c.evictionCandidate = false;
}

CachedQuery record_access(CachedQuery c, const LocationId& userLoc, Timestamp ts,
                          std::span<const CachedQueryId> companions, std::span<const std::size_t> touchedNodes) {
  apply_access(c, userLoc, ts, companions, touchedNodes);
  return c;
}

double eviction_score(const CachedQuery& c, Timestamp now, const EvictionPolicy& policy) {
  double score = 0.0;
  for (const auto& [loc, count] : c.freq) {
    const auto it = c.lastUsed.find(loc);
    const double age = it == c.lastUsed.end() ? 0.0 : std::max(0.0, now - it->second);
    score += static_cast<double>(count) * std::pow(policy.decay, age / policy.epochTicks);
  }
  return score;
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Fragment: return "fragment";
    case ActionKind::Aggregate: return "aggregate";
    case ActionKind::Evict: return "evict";
    case ActionKind::Relocate: return "relocate";
  }
  return "?";
}

CacheUnit::CacheUnit(UnitId id, LocationId location, double capacityGB, EvictionPolicy policy)
    : id_(std::move(id)), location_(std::move(location)), capacityGB_(capacityGB), policy_(policy) {
  if (!(capacityGB_ >= 0.0)) throw ConfigError(fmt::format("unit {} has negative capacity", id_));
  if (!(policy_.decay > 0.0 && policy_.decay <= 1.0)) throw ConfigError("eviction decay must be in (0, 1]");
  if (!(policy_.epochTicks > 0.0)) throw ConfigError("eviction epoch length must be positive");
}

const CachedQuery* CacheUnit::find(const CachedQueryId& id) const {
  const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const CachedQuery& c) { return c.id == id; });
  return it == entries_.end() ? nullptr : &*it;
}

std::vector<CachedQuery>::iterator CacheUnit::locate(const CachedQueryId& id) {
  return std::find_if(entries_.begin(), entries_.end(), [&](const CachedQuery& c) { return c.id == id; });
}

std::vector<CachedQueryId> CacheUnit::eviction_order(Timestamp now, std::span<const CachedQueryId> pinned) const {
  struct Ranked {
    bool candidate;
    double score;
    const CachedQueryId* id;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (contains(pinned, e.id)) continue;
    ranked.push_back({e.evictionCandidate, eviction_score(e, now, policy_), &e.id});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.candidate != b.candidate) return a.candidate;
    if (a.score != b.score) return a.score < b.score;
    return natural_less(*a.id, *b.id);
  });
  std::vector<CachedQueryId> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(*r.id);
  return out;
}

AdmissionResult CacheUnit::admit(CachedQuery c, Timestamp now, std::span<const CachedQueryId> pinned) {
  if (c.volumeGB > capacityGB_ + kEpsilonGB) {
    throw OversizeError(fmt::format("{} ({} GB) exceeds capacity of {} ({} GB)", c.id, c.volumeGB, id_, capacityGB_));
  }
  if (find(c.id) != nullptr) throw ContractError(fmt::format("{} already stored in {}", c.id, id_));

  AdmissionResult result;
  if (usedGB_ + c.volumeGB > capacityGB_ + kEpsilonGB) {
    const auto order = eviction_order(now, pinned);
    double reclaimable = capacityGB_ - usedGB_;
    std::size_t needed = 0;
    while (needed < order.size() && c.volumeGB > reclaimable + kEpsilonGB) {
      reclaimable += find(order[needed])->volumeGB;
      ++needed;
    }
    if (c.volumeGB > reclaimable + kEpsilonGB) return result;
    for (std::size_t i = 0; i < needed; ++i) result.evicted.push_back(*remove(order[i]));
  }
  c.cloc = id_;
  usedGB_ += c.volumeGB;
  entries_.push_back(std::move(c));
  result.stored = true;
  return result;
}

std::optional<CachedQuery> CacheUnit::remove(const CachedQueryId& id) {
  const auto it = locate(id);
  if (it == entries_.end()) return std::nullopt;
  CachedQuery out = std::move(*it);
  entries_.erase(it);
  usedGB_ -= out.volumeGB;
  if (entries_.empty() || usedGB_ < 0.0) usedGB_ = entries_.empty() ? 0.0 : std::max(0.0, usedGB_);
  return out;
}

void CacheUnit::record_access(const CachedQueryId& id, const LocationId& userLoc, Timestamp ts,
                              std::span<const CachedQueryId> companions, std::span<const std::size_t> touchedNodes) {
  const auto it = locate(id);
  if (it == entries_.end()) throw ContractError(fmt::format("{} is not stored in {}", id, id_));
  apply_access(*it, userLoc, ts, companions, touchedNodes);
}

std::vector<MaintenanceAction> CacheUnit::maintenance_pass(const MaintenanceParams& params, IdAllocator& ids,
                                                           const NearestUnitFn& nearestUnit) {
  std::vector<MaintenanceAction> actions;
  std::set<CachedQueryId> fresh;

  // Fragment: split an object at its root when one of the root's children
  // was hit on its own often enough. Sub-queries are never split below a leaf.
  std::vector<CachedQuery> next;
  next.reserve(entries_.size());
  for (auto& e : entries_) {
    const auto& hits = e.window.independentChildHits;
    const bool hot = std::any_of(hits.begin(), hits.end(), [&](std::uint64_t h) { return h >= params.thetaFreq; });
    if (e.expr.root->is_leaf() || !hot) {
      next.push_back(std::move(e));
      continue;
    }
    MaintenanceAction action{ActionKind::Fragment, {e.id}, {}, {}, {}, {}};
    const auto& children = e.expr.root->children();
    for (std::size_t k = 0; k < children.size(); ++k) {
      auto id = ids.allocate();
      auto part = make_cached_query(id, QueryEvaluationTree{id, children[k]}, id_);
      part.lastUsed = e.lastUsed;
      part.freq = e.freq;
      part.coQueried = e.coQueried;
      part.window.freq = e.window.childDemand[k];
      action.results.push_back(id);
      fresh.insert(id);
      next.push_back(std::move(part));
    }
    actions.push_back(std::move(action));
  }
  entries_ = std::move(next);

  // Evict: anything without accesses in the window becomes a candidate.
  for (auto& e : entries_) {
    e.evictionCandidate = e.window.accesses() == 0;
    if (e.evictionCandidate) actions.push_back({ActionKind::Evict, {e.id}, {}, {}, {}, {}});
  }

  // Aggregate: merge pairs queried together often enough into one object.
  // An object taking part in several pairs is duplicated into each.
  std::vector<const CachedQuery*> eligible;
  for (const auto& e : entries_) {
    if (!e.evictionCandidate && !fresh.contains(e.id)) eligible.push_back(&e);
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const CachedQuery* a, const CachedQuery* b) { return natural_less(a->id, b->id); });
  std::vector<std::pair<const CachedQuery*, const CachedQuery*>> pairs;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    for (std::size_t j = i + 1; j < eligible.size(); ++j) {
      const auto it = eligible[i]->window.coQueried.find(eligible[j]->id);
      if (it != eligible[i]->window.coQueried.end() && it->second >= params.thetaAssoc) {
        pairs.emplace_back(eligible[i], eligible[j]);
      }
    }
  }
  if (!pairs.empty()) {
    // Drop trailing pairs until the merged objects fit after evicting
    // everything that does not take part in a merge.
    auto plan = [&](std::size_t count, std::set<CachedQueryId>& participants) {
      participants.clear();
      double merged = 0.0;
      for (std::size_t p = 0; p < count; ++p) {
        participants.insert(pairs[p].first->id);
        participants.insert(pairs[p].second->id);
        merged += pairs[p].first->volumeGB + pairs[p].second->volumeGB;
      }
      double participantVolume = 0.0;
      for (const auto& e : entries_) {
        if (participants.contains(e.id)) participantVolume += e.volumeGB;
      }
      return usedGB_ - participantVolume + merged;
    };
    std::set<CachedQueryId> participants;
    std::size_t count = pairs.size();
    while (count > 0) {
      const double after = plan(count, participants);
      double evictable = 0.0;
      for (const auto& e : entries_) {
        if (!participants.contains(e.id)) evictable += e.volumeGB;
      }
      if (after - evictable <= capacityGB_ + kEpsilonGB) break;
      --count;
    }
    pairs.resize(count);
    if (count > 0) {
      const double after = plan(count, participants);
      std::vector<CachedQuery> merged;
      for (const auto& [a, b] : pairs) {
        auto id = ids.allocate();
        auto m = make_cached_query(id, QueryEvaluationTree{id, QetNode::combine(Operator::Parallel, {a->expr.root, b->expr.root})},
                                   id_);
        for (const auto* src : {a, b}) {
          for (const auto& [loc, n] : src->freq) m.freq[loc] += n;
          for (const auto& [loc, ts] : src->lastUsed) m.lastUsed[loc] = std::max(m.lastUsed[loc], ts);
          for (const auto& [other, n] : src->coQueried) {
            if (other != a->id && other != b->id) m.coQueried[other] += n;
          }
          for (const auto& [loc, n] : src->window.freq) m.window.freq[loc] += n;
        }
        actions.push_back({ActionKind::Aggregate, {a->id, b->id}, {id}, {}, {}, {}});
        merged.push_back(std::move(m));
      }
      // Make room by evicting non-participants, candidates first.
      double excess = after - capacityGB_;
      if (excess > kEpsilonGB) {
        std::vector<CachedQueryId> pinned(participants.begin(), participants.end());
        for (const auto& victim : eviction_order(params.windowEnd, pinned)) {
          if (excess <= kEpsilonGB) break;
          excess -= find(victim)->volumeGB;
          remove(victim);
          actions.push_back({ActionKind::Evict, {victim}, {}, {}, {}, {}});
        }
      }
      for (const auto& id : participants) remove(id);
      for (auto& m : merged) {
        usedGB_ += m.volumeGB;
        entries_.push_back(std::move(m));
      }
    }
  }

  // Relocate: propose moving objects whose window demand is dominated by a
  // location closer to another unit.
  if (nearestUnit) {
    for (const auto& e : entries_) {
      if (e.evictionCandidate || e.window.freq.empty()) continue;
      const LocationId* best = nullptr;
      std::uint64_t bestCount = 0;
      for (const auto& [loc, n] : e.window.freq) {
        if (n > bestCount || (n == bestCount && best && natural_less(loc, *best))) {
          best = &loc;
          bestCount = n;
        }
      }
      if (best == nullptr || bestCount == 0) continue;
      auto target = nearestUnit(*best);
      if (target != id_) {
        actions.push_back({ActionKind::Relocate, {e.id}, {}, *best, std::move(target), e.window.freq});
      }
    }
  }

  for (auto& e : entries_) e.window = fresh_window(e.expr.root->children().size());
  return actions;
}

double duplication_overhead(const CacheUnit& u) { return duplication_overhead(std::span<const CacheUnit>(&u, 1)); }

double duplication_overhead(std::span<const CacheUnit> units) {
  std::map<std::string, std::pair<std::size_t, double>> copies;
  for (const auto& u : units) {
    for (const auto& e : u.entries()) {
      for (const QetNode* leaf : leaves(e.expr)) {
        auto& [count, volume] = copies[leaf->id()];
        ++count;
        volume = leaf->volume();
      }
    }
  }
  double overhead = 0.0;
  for (const auto& [id, cv] : copies) overhead += static_cast<double>(cv.first - 1) * cv.second;
  return overhead;
}

// -- dump ---------------------------------------------------------------------

namespace {

constexpr std::string_view kDumpMagic = "sqf-cache-dump 1";
constexpr std::string_view kDumpColumns = "id|expr|cloc|volume_gb|complexity|last_used|freq|co_queried";

template <typename Pairs>
std::string join_pairs(const Pairs& pairs) {
  std::string out;
  for (const auto& [k, v] : pairs) {
    if (!out.empty()) out += ',';
    out += fmt::format("{}:{}", k, v);
  }
  return out;
}

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
T parse_value(std::string_view text, std::size_t record, std::string_view field) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size() || text.empty()) {
    throw LoadError(fmt::format("field {}: '{}' is not a valid number", field, text), record);
  }
  return v;
}

template <typename T>
std::vector<std::pair<std::string, T>> parse_pairs(std::string_view text, std::size_t record, std::string_view field) {
  std::vector<std::pair<std::string, T>> out;
  if (text.empty()) return out;
  for (auto item : split(text, ',')) {
    const auto colon = item.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw LoadError(fmt::format("field {}: expected key:value, got '{}'", field, item), record);
    }
    out.emplace_back(std::string(item.substr(0, colon)), parse_value<T>(item.substr(colon + 1), record, field));
  }
  return out;
}

}  // namespace

CacheDumpRecord to_dump_record(const CachedQuery& c) {
  CacheDumpRecord r;
  r.id = c.id;
  r.expr = to_infix(c.expr);
  r.cloc = c.cloc;
  r.volumeGB = c.volumeGB;
  r.complexity = c.complexity;
  auto byNatural = [](const auto& a, const auto& b) { return natural_less(a.first, b.first); };
  r.lastUsed.assign(c.lastUsed.begin(), c.lastUsed.end());
  r.freq.assign(c.freq.begin(), c.freq.end());
  r.coQueried.assign(c.coQueried.begin(), c.coQueried.end());
  std::sort(r.lastUsed.begin(), r.lastUsed.end(), byNatural);
  std::sort(r.freq.begin(), r.freq.end(), byNatural);
  std::sort(r.coQueried.begin(), r.coQueried.end(), byNatural);
  return r;
}

std::string write_cache_dump(std::span<const CacheDumpRecord> records) {
  std::string out = fmt::format("{}\n{}\n", kDumpMagic, kDumpColumns);
  for (const auto& r : records) {
    out += fmt::format("{}|{}|{}|{}|{}|{}|{}|{}\n", r.id, r.expr, r.cloc, r.volumeGB, r.complexity,
                       join_pairs(r.lastUsed), join_pairs(r.freq), join_pairs(r.coQueried));
  }
  return out;
}

std::string write_cache_dump(std::span<const CacheUnit> units) {
  std::vector<CacheDumpRecord> records;
  for (const auto& u : units) {
    std::vector<const CachedQuery*> sorted;
    for (const auto& e : u.entries()) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(),
              [](const CachedQuery* a, const CachedQuery* b) { return natural_less(a->id, b->id); });
    for (const auto* e : sorted) records.push_back(to_dump_record(*e));
  }
  return write_cache_dump(std::span<const CacheDumpRecord>(records));
}

std::vector<CacheDumpRecord> read_cache_dump(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines[0] != kDumpMagic) {
    throw LoadError(fmt::format("missing '{}' header", kDumpMagic), 0);
  }
  if (lines.size() < 2 || lines[1] != kDumpColumns) throw LoadError("unexpected column line", 0);

  std::vector<CacheDumpRecord> out;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const std::size_t record = i - 2;
    const auto fields = split(lines[i], '|');
    if (fields.size() != 8) {
      throw LoadError(fmt::format("expected 8 fields, found {}", fields.size()), record);
    }
    CacheDumpRecord r;
    r.id = std::string(fields[0]);
    r.expr = std::string(fields[1]);
    r.cloc = std::string(fields[2]);
    if (r.id.empty() || r.expr.empty() || r.cloc.empty()) throw LoadError("empty id, expr or cloc", record);
    r.volumeGB = parse_value<double>(fields[3], record, "volume_gb");
    if (r.volumeGB < 0.0) throw LoadError("negative volume", record);
    r.complexity = parse_value<std::size_t>(fields[4], record, "complexity");
    r.lastUsed = parse_pairs<Timestamp>(fields[5], record, "last_used");
    r.freq = parse_pairs<std::uint64_t>(fields[6], record, "freq");
    r.coQueried = parse_pairs<std::uint64_t>(fields[7], record, "co_queried");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sqf
