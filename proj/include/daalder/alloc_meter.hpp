#pragma once

// Process-wide heap accounting. The counters only move once the operator
// new/delete replacements from alloc_hooks.hpp are linked in; without them
// every query returns zero and limits are ignored.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>

namespace daalder::alloc {

namespace detail {

struct Counters {
  std::atomic<std::int64_t> current{0};
  std::atomic<std::int64_t> peak{0};
  /// Negative: unlimited.
  std::atomic<std::int64_t> limit{-1};
  std::atomic<bool> installed{false};
};

inline constinit Counters counters;

/// False if the allocation would cross the limit; nothing is recorded then.
inline bool on_allocate(std::size_t n) noexcept {
  const auto size = static_cast<std::int64_t>(n);
  const std::int64_t now = counters.current.fetch_add(size, std::memory_order_relaxed) + size;
  const std::int64_t limit = counters.limit.load(std::memory_order_relaxed);
  if (limit >= 0 && now > limit) {
    counters.current.fetch_sub(size, std::memory_order_relaxed);
    return false;
  }
  std::int64_t peak = counters.peak.load(std::memory_order_relaxed);
  while (now > peak && !counters.peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
  return true;
}

inline void on_free(std::size_t n) noexcept {
  counters.current.fetch_sub(static_cast<std::int64_t>(n), std::memory_order_relaxed);
}

}  // namespace detail

inline bool hooks_installed() noexcept { return detail::counters.installed.load(); }
inline std::int64_t current_bytes() noexcept { return detail::counters.current.load(); }
inline std::int64_t peak_bytes() noexcept { return detail::counters.peak.load(); }
/// Restarts peak tracking from the current level.
inline void reset_peak() noexcept { detail::counters.peak.store(detail::counters.current.load()); }

/// Allocations that would take the live total above `limit` throw
/// std::bad_alloc. nullopt removes the limit.
inline void set_limit(std::optional<std::int64_t> limit) noexcept {
  detail::counters.limit.store(limit ? *limit : -1);
}

}  // namespace daalder::alloc
