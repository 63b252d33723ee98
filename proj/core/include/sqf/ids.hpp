#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sqf {

using LocationId = std::string;
using UnitId = std::string;
using CachedQueryId = std::string;
/// Logical clock ticks.
using Timestamp = double;

/// Orders embedded digit runs numerically, so `cache-2` < `cache-10`.
bool natural_less(std::string_view a, std::string_view b);

struct NaturalLess {
  using is_transparent = void;
  bool operator()(std::string_view a, std::string_view b) const { return natural_less(a, b); }
};

/// Hands out `<prefix><n>` ids, n = 1, 2, ...
class IdAllocator {
 public:
  explicit IdAllocator(std::string prefix = "c", std::uint64_t next = 1) : prefix_(std::move(prefix)), next_(next) {}

  std::string allocate() { return prefix_ + std::to_string(next_++); }
  std::uint64_t peek() const noexcept { return next_; }

 private:
  std::string prefix_;
  std::uint64_t next_;
};

}  // namespace sqf
