#pragma once

// Loop registry behind the instrumentation entry points. Handles are
// thread-affine; counters accumulate in the opening thread's frame and are
// merged into the shared record when the loop ends.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <unistd.h>

#include "mperf/roofline/report.hpp"

namespace mperf::roofline {

struct RuntimeConfig {
  Phase mode = Phase::Baseline;
  bool has_filter = false;
  std::set<std::string> filter;  // "<filename>:<line>"
  std::string out_path;

  /// MPERF_ROOFLINE_MODE, MPERF_ROOFLINE_FILTER, MPERF_ROOFLINE_OUT.
  static RuntimeConfig from_env() {
    RuntimeConfig cfg;
    if (const char* mode = std::getenv("MPERF_ROOFLINE_MODE"))
      cfg.mode = std::string_view(mode) == "instrumented" ? Phase::Instrumented : Phase::Baseline;
    if (const char* filter = std::getenv("MPERF_ROOFLINE_FILTER")) cfg.set_filter(filter);
    if (const char* out = std::getenv("MPERF_ROOFLINE_OUT"); out && *out)
      cfg.out_path = out;
    else
      cfg.out_path = "./mperf_roofline_" + std::to_string(getpid()) + ".json";
    return cfg;
  }

  void set_filter(std::string_view text) {
    has_filter = true;
    filter.clear();
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto comma = text.find(',', pos);
      if (comma == std::string_view::npos) comma = text.size();
      if (comma > pos) filter.emplace(text.substr(pos, comma - pos));
      pos = comma + 1;
    }
  }

  bool selects(const LoopInfo& info) const {
    if (mode != Phase::Instrumented) return false;
    return !has_filter || filter.count(info.filename + ":" + std::to_string(info.line)) != 0;
  }
};

using LoopHandleId = std::uint64_t;

class RooflineRuntime {
 public:
  explicit RooflineRuntime(RuntimeConfig config) : config_(std::move(config)), id_(next_runtime_id()) {}
  RooflineRuntime(const RooflineRuntime&) = delete;
  RooflineRuntime& operator=(const RooflineRuntime&) = delete;

  const RuntimeConfig& config() const { return config_; }

  LoopHandleId begin(const LoopInfo& info) {
    Entry* entry = nullptr;
    {
      std::lock_guard lock(mutex_);
      auto& slot = registry_[info];
      if (!slot) {
        slot = std::make_unique<Entry>();
        slot->info = info;
        slot->instrumented = config_.selects(info);
      }
      entry = slot.get();
    }
    const LoopHandleId id = next_handle_.fetch_add(1, std::memory_order_relaxed);
    thread_state().stack.push_back({id, entry, now_ns(), {}});
    return id;
  }

  /// Decision for the innermost loop opened on this thread; fixed per loop key.
  bool is_instrumented_profiling() {
    if (config_.mode != Phase::Instrumented) return false;
    if (!config_.has_filter) return true;
    const auto& stack = thread_state().stack;
    return !stack.empty() && stack.back().entry->instrumented;
  }

  void add_counts(LoopHandleId handle, const LoopCounters& delta) {
    if (config_.mode != Phase::Instrumented) return;
    auto& stack = thread_state().stack;
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
      if (it->id == handle) {
        it->local += delta;
        return;
      }
    }
    misuse_.fetch_add(1, std::memory_order_relaxed);
  }

  void end(LoopHandleId handle) {
    auto& stack = thread_state().stack;
    auto it = stack.end();
    for (auto s = stack.rbegin(); s != stack.rend(); ++s) {
      if (s->id == handle) {
        it = std::prev(s.base());
        break;
      }
    }
    if (it == stack.end()) {
      misuse_.fetch_add(1, std::memory_order_relaxed);
      return;
    }
    if (std::next(it) != stack.end()) misuse_.fetch_add(1, std::memory_order_relaxed);
    const std::uint64_t elapsed = std::max<std::uint64_t>(1, now_ns() - it->start_ns);
    {
      std::lock_guard lock(mutex_);
      Entry& e = *it->entry;
      e.counters += it->local;
      e.wall_ns += elapsed;
      e.invocations += 1;
    }
    stack.erase(it);
  }

  std::uint64_t misuse_count() const { return misuse_.load(std::memory_order_relaxed); }

  std::size_t registry_size() const {
    std::lock_guard lock(mutex_);
    return registry_.size();
  }

  std::size_t open_handles() { return thread_state().stack.size(); }

  /// Every loop that completed at least one invocation, ordered by key.
  RunReport snapshot() const {
    RunReport report;
    report.phase = config_.mode;
    std::lock_guard lock(mutex_);
    for (const auto& [info, e] : registry_) {
      if (e->invocations == 0) continue;
      report.records.push_back({info, e->counters, e->invocations, e->wall_ns, config_.mode});
    }
    return report;
  }

  /// Writes the report once; later calls do nothing. On an unwritable path
  /// the report goes to stderr instead. Returns true when the file was written.
  bool finalize() {
    if (finalized_.exchange(true)) return false;
    const std::string text = serialize_report(snapshot());
    std::ofstream out(config_.out_path, std::ios::trunc);
    if (out << text && out.flush()) return true;
    std::fprintf(stderr, "mperf: cannot write roofline report to %s; dumping here\n%s",
                 config_.out_path.c_str(), text.c_str());
    return false;
  }

 private:
  struct Entry {
    LoopInfo info;
    LoopCounters counters;
    std::uint64_t invocations = 0;
    std::uint64_t wall_ns = 0;
    bool instrumented = false;
  };
  struct Frame {
    LoopHandleId id;
    Entry* entry;
    std::uint64_t start_ns;
    LoopCounters local;
  };
  struct ThreadState {
    std::vector<Frame> stack;
  };

  static std::uint64_t next_runtime_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }

  static std::uint64_t now_ns() {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                          std::chrono::steady_clock::now().time_since_epoch())
                                          .count());
  }

  // Keyed by runtime id rather than address so a new runtime never sees a
  // dead one's frames.
  ThreadState& thread_state() {
    thread_local std::uint64_t cached_id = 0;
    thread_local ThreadState* cached = nullptr;
    if (cached_id == id_) return *cached;
    thread_local std::unordered_map<std::uint64_t, ThreadState> states;
    cached = &states[id_];
    cached_id = id_;
    return *cached;
  }

  RuntimeConfig config_;
  std::uint64_t id_;
  mutable std::mutex mutex_;
  std::map<LoopInfo, std::unique_ptr<Entry>> registry_;
  std::atomic<LoopHandleId> next_handle_{1};
  std::atomic<std::uint64_t> misuse_{0};
  std::atomic<bool> finalized_{false};
};

/// The process-wide runtime behind the C entry points (defined in mperf_rt).
RooflineRuntime& process_runtime();

}  // namespace mperf::roofline
