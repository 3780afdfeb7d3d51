#pragma once

// Sampling sessions: deterministic replay of a trace file, or a live
// perf_event group on Linux.

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <deque>
#include <fstream>
#include <memory>
#include <optional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mperf/error.hpp"
#include "mperf/sampling.hpp"

#ifdef __linux__
#include <fcntl.h>
#include <linux/perf_event.h>
#include <poll.h>
#include <signal.h>
#include <sys/ioctl.h>
#include <sys/mman.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>
#endif

namespace mperf {

struct SessionStats {
  std::size_t corrupt_records = 0;
  std::vector<std::string> corrupt_details;  // "line N: why"
  std::size_t equal_timestamp_warnings = 0;
  std::vector<std::string> warnings;
};

class Session {
 public:
  virtual ~Session() = default;
  /// Next record, or nullopt at end of stream.
  virtual std::optional<SampleRecord> next_sample() = 0;
  const SessionStats& stats() const { return stats_; }

 protected:
  SessionStats stats_;
};

/// Reads a whole trace up front. Records come out in timestamp order; the
/// sort is stable, so equal timestamps keep file order.
class ReplaySession final : public Session {
 public:
  ReplaySession(const std::string& path, std::set<std::string> required_counters = {})
      : required_(std::move(required_counters)) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::TraceFormatError, "cannot open trace " + path);
    load(in);
  }

  ReplaySession(std::istream& in, std::set<std::string> required_counters = {})
      : required_(std::move(required_counters)) {
    load(in);
  }

  std::optional<SampleRecord> next_sample() override {
    if (records_.empty()) return std::nullopt;
    SampleRecord r = std::move(records_.front());
    records_.pop_front();
    return r;
  }

 private:
  void load(std::istream& in) {
    std::vector<SampleRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      auto decoded = decode_trace_line(line, line_no);
      if (decoded.record) {
        for (const auto& name : required_) {
          if (!decoded.record->counter_values.count(name)) {
            decoded.problem = "missing counter '" + name + "'";
            decoded.record.reset();
            break;
          }
        }
      }
      if (!decoded.record) {
        ++stats_.corrupt_records;
        stats_.corrupt_details.push_back("line " + std::to_string(line_no) + ": " +
                                         decoded.problem);
        continue;
      }
      records.push_back(std::move(*decoded.record));
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const SampleRecord& a, const SampleRecord& b) {
                       return a.timestamp_ns < b.timestamp_ns;
                     });
    std::map<std::int32_t, std::uint64_t> last_ts;
    for (const auto& r : records) {
      auto [it, fresh] = last_ts.try_emplace(r.tid, r.timestamp_ns);
      if (!fresh) {
        if (it->second == r.timestamp_ns) ++stats_.equal_timestamp_warnings;
        it->second = r.timestamp_ns;
      }
    }
    records_.assign(std::make_move_iterator(records.begin()),
                    std::make_move_iterator(records.end()));
  }

  std::set<std::string> required_;
  std::deque<SampleRecord> records_;
};

/// Drains a session into a vector.
inline std::vector<SampleRecord> collect(Session& session) {
  std::vector<SampleRecord> out;
  while (auto r = session.next_sample()) out.push_back(std::move(*r));
  return out;
}

/// What a live session profiles: a command to launch, or a running pid.
struct ProcessTarget {
  std::vector<std::string> argv;
  std::optional<int> pid;
};

#ifdef __linux__

namespace detail {

inline long perf_event_open(perf_event_attr* attr, pid_t pid, int cpu, int group_fd,
                            unsigned long flags) {
  return syscall(SYS_perf_event_open, attr, pid, cpu, group_fd, flags);
}

inline perf_event_attr make_attr(const EventDescriptor& e) {
  perf_event_attr attr;
  std::memset(&attr, 0, sizeof(attr));
  attr.size = sizeof(attr);
  if (e.kind == EventKind::VendorRaw) {
    attr.type = PERF_TYPE_RAW;
    attr.config = e.raw_code;
  } else {
    attr.type = PERF_TYPE_HARDWARE;
    if (e.name == "cycles") attr.config = PERF_COUNT_HW_CPU_CYCLES;
    else if (e.name == "instructions") attr.config = PERF_COUNT_HW_INSTRUCTIONS;
    else if (e.name == "cache-references") attr.config = PERF_COUNT_HW_CACHE_REFERENCES;
    else if (e.name == "cache-misses") attr.config = PERF_COUNT_HW_CACHE_MISSES;
    else if (e.name == "branch-misses") attr.config = PERF_COUNT_HW_BRANCH_MISSES;
    // Vendor counters are mode-specific in hardware; only standard events
    // need privilege filtering.
    switch (e.mode_scope) {
      case ModeScope::All: break;
      case ModeScope::UserOnly: attr.exclude_kernel = 1; attr.exclude_hv = 1; break;
      case ModeScope::SupervisorOnly: attr.exclude_user = 1; attr.exclude_hv = 1; break;
      case ModeScope::MachineOnly: attr.exclude_user = 1; attr.exclude_kernel = 1; break;
    }
  }
  attr.read_format = PERF_FORMAT_GROUP | PERF_FORMAT_ID;
  return attr;
}

[[noreturn]] inline void throw_open_error(const std::string& what, int err) {
  const std::string msg = what + ": " + std::strerror(err);
  if (err == EACCES || err == EPERM)
    throw Error(ErrorKind::PermissionDenied, msg + " (check /proc/sys/kernel/perf_event_paranoid)");
  throw Error(ErrorKind::BackendUnavailable, msg);
}

/// Owns a forked child held at a pipe barrier until counters are attached.
class LaunchedChild {
 public:
  explicit LaunchedChild(const std::vector<std::string>& argv) {
    if (argv.empty()) throw Error(ErrorKind::BackendUnavailable, "empty command");
    int fds[2];
    if (pipe(fds) != 0) throw_open_error("pipe", errno);
    pid_ = fork();
    if (pid_ < 0) throw_open_error("fork", errno);
    if (pid_ == 0) {
      close(fds[1]);
      char go = 0;
      if (read(fds[0], &go, 1) != 1) _exit(127);
      std::vector<char*> args;
      for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
      args.push_back(nullptr);
      execvp(args[0], args.data());
      _exit(127);
    }
    close(fds[0]);
    barrier_ = fds[1];
  }
  LaunchedChild(const LaunchedChild&) = delete;
  LaunchedChild& operator=(const LaunchedChild&) = delete;
  ~LaunchedChild() {
    if (barrier_ >= 0) close(barrier_);
    if (pid_ > 0 && !reaped_) {
      kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
    }
  }

  pid_t pid() const { return pid_; }

  void release() {
    if (barrier_ < 0) return;
    const char go = 1;
    [[maybe_unused]] auto n = write(barrier_, &go, 1);
    close(barrier_);
    barrier_ = -1;
  }

  /// Non-blocking unless `block`. Returns true once the child has exited.
  bool poll_exit(bool block) {
    if (reaped_) return true;
    int status = 0;
    const pid_t r = waitpid(pid_, &status, block ? 0 : WNOHANG);
    if (r == pid_) {
      reaped_ = true;
      exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    }
    return reaped_;
  }

  int exit_status() const { return exit_status_; }

 private:
  pid_t pid_ = -1;
  int barrier_ = -1;
  bool reaped_ = false;
  int exit_status_ = 0;
};

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

/// One perf_event group: leader plus members, with id -> name mapping for
/// PERF_FORMAT_GROUP reads.
struct OpenGroup {
  std::vector<Fd> fds;
  std::map<std::uint64_t, std::string> id_to_name;

  void open(const GroupPlan& plan, pid_t pid, bool enable_on_exec) {
    auto leader_attr = make_attr(plan.leader);
    leader_attr.disabled = 1;
    leader_attr.enable_on_exec = enable_on_exec ? 1 : 0;
    if (plan.sampling) {
      leader_attr.freq = 1;
      leader_attr.sample_freq = plan.sample_frequency_hz;
      leader_attr.sample_type = PERF_SAMPLE_IP | PERF_SAMPLE_TID | PERF_SAMPLE_TIME |
                                PERF_SAMPLE_READ | PERF_SAMPLE_CALLCHAIN;
      leader_attr.wakeup_events = 1;
    }
    add(leader_attr, plan.leader.name, pid, -1);
    for (const auto& m : plan.members) {
      auto attr = make_attr(m);
      add(attr, m.name, pid, fds.front().get());
    }
  }

  void add(perf_event_attr& attr, const std::string& name, pid_t pid, int group_fd) {
    const long fd = perf_event_open(&attr, pid, -1, group_fd, PERF_FLAG_FD_CLOEXEC);
    if (fd < 0) throw_open_error("perf_event_open(" + name + ")", errno);
    fds.emplace_back(static_cast<int>(fd));
    std::uint64_t id = 0;
    if (ioctl(static_cast<int>(fd), PERF_EVENT_IOC_ID, &id) != 0)
      throw_open_error("PERF_EVENT_IOC_ID", errno);
    id_to_name[id] = name;
  }

  void enable() { ioctl(fds.front().get(), PERF_EVENT_IOC_ENABLE, PERF_IOC_FLAG_GROUP); }

  std::map<std::string, std::uint64_t> read_group() const {
    std::vector<std::uint64_t> buf(1 + 2 * fds.size());
    const auto bytes = buf.size() * sizeof(std::uint64_t);
    if (::read(fds.front().get(), buf.data(), bytes) < static_cast<ssize_t>(sizeof(std::uint64_t)))
      throw_open_error("read(group)", errno);
    std::map<std::string, std::uint64_t> out;
    const std::uint64_t nr = std::min<std::uint64_t>(buf[0], fds.size());
    for (std::uint64_t i = 0; i < nr; ++i) {
      const auto it = id_to_name.find(buf[2 + 2 * i]);
      if (it != id_to_name.end()) out[it->second] = buf[1 + 2 * i];
    }
    return out;
  }
};

inline void check_attach_pid(int pid) {
  if (pid <= 0 || (kill(pid, 0) != 0 && errno == ESRCH))
    throw Error(ErrorKind::BackendUnavailable, "no such process: " + std::to_string(pid));
}

}  // namespace detail

/// Live sampling through perf_event_open. The leader's ring buffer is drained
/// on demand; group reads attached to each sample carry every member value.
class LiveSession final : public Session {
 public:
  LiveSession(const GroupPlan& plan, const ProcessTarget& target) : plan_(plan) {
    if (!plan.sampling) throw Error(ErrorKind::InvalidRequest, "live session needs a sampling plan");
    if (target.pid) {
      detail::check_attach_pid(*target.pid);
      pid_ = *target.pid;
      group_.open(plan, pid_, false);
      map_buffer();
      group_.enable();
    } else {
      child_.emplace(target.argv);
      pid_ = child_->pid();
      group_.open(plan, pid_, true);
      map_buffer();
      child_->release();
    }
  }

  ~LiveSession() override {
    if (ring_ && ring_ != MAP_FAILED) munmap(ring_, ring_bytes_);
  }

  std::optional<SampleRecord> next_sample() override {
    while (pending_.empty()) {
      drain();
      if (!pending_.empty()) break;
      if (finished_) return std::nullopt;
      pollfd pfd{group_.fds.front().get(), POLLIN, 0};
      const int r = poll(&pfd, 1, 100);
      const bool exited = child_ ? child_->poll_exit(false) : (r > 0 && (pfd.revents & POLLHUP));
      if (exited) {
        drain();
        finished_ = true;
      }
    }
    SampleRecord r = std::move(pending_.front());
    pending_.pop_front();
    return r;
  }

  /// Exit status of a launched command (0 for attached processes).
  int target_exit_status() const { return child_ ? child_->exit_status() : 0; }

 private:
  static constexpr std::size_t kDataPages = 64;

  void map_buffer() {
    page_ = static_cast<std::size_t>(sysconf(_SC_PAGESIZE));
    ring_bytes_ = page_ * (1 + kDataPages);
    ring_ = mmap(nullptr, ring_bytes_, PROT_READ | PROT_WRITE, MAP_SHARED,
                 group_.fds.front().get(), 0);
    if (ring_ == MAP_FAILED) detail::throw_open_error("mmap(ring buffer)", errno);
  }

  void copy_out(std::uint64_t offset, void* dst, std::size_t n) const {
    const auto* data = static_cast<const unsigned char*>(ring_) + page_;
    const std::size_t size = page_ * kDataPages;
    auto* out = static_cast<unsigned char*>(dst);
    for (std::size_t i = 0; i < n; ++i) out[i] = data[(offset + i) % size];
  }

  void drain() {
    auto* meta = static_cast<perf_event_mmap_page*>(ring_);
    const std::uint64_t head = __atomic_load_n(&meta->data_head, __ATOMIC_ACQUIRE);
    std::uint64_t tail = meta->data_tail;
    std::vector<unsigned char> rec;
    while (tail < head) {
      perf_event_header hdr;
      copy_out(tail, &hdr, sizeof(hdr));
      if (hdr.size < sizeof(hdr)) break;
      rec.resize(hdr.size);
      copy_out(tail, rec.data(), hdr.size);
      if (hdr.type == PERF_RECORD_SAMPLE) decode_sample(rec);
      tail += hdr.size;
    }
    __atomic_store_n(&meta->data_tail, tail, __ATOMIC_RELEASE);
  }

  void decode_sample(const std::vector<unsigned char>& rec) {
    std::size_t off = sizeof(perf_event_header);
    auto u64 = [&]() {
      std::uint64_t v = 0;
      if (off + 8 <= rec.size()) std::memcpy(&v, rec.data() + off, 8);
      off += 8;
      return v;
    };
    SampleRecord s;
    s.pc = u64();
    const std::uint64_t pidtid = u64();
    s.pid = static_cast<std::int32_t>(pidtid & 0xffffffffu);
    s.tid = static_cast<std::int32_t>(pidtid >> 32);
    s.timestamp_ns = u64();
    const std::uint64_t nr = u64();
    for (std::uint64_t i = 0; i < nr; ++i) {
      const std::uint64_t value = u64();
      const std::uint64_t id = u64();
      const auto it = group_.id_to_name.find(id);
      if (it != group_.id_to_name.end()) s.counter_values[it->second] = value;
    }
    const std::uint64_t depth = u64();
    for (std::uint64_t i = 0; i < depth; ++i) {
      const std::uint64_t ip = u64();
      if (ip >= static_cast<std::uint64_t>(PERF_CONTEXT_MAX)) continue;  // context markers
      s.callchain.push_back(ip);
    }
    if (off > rec.size()) {
      ++stats_.corrupt_records;
      stats_.corrupt_details.push_back("truncated sample record");
      return;
    }
    if (s.callchain.empty()) s.callchain.push_back(s.pc);
    verify_member_reads(s);
    pending_.push_back(std::move(s));
  }

  // The leader-overflow-reads-members behaviour is observed, not documented,
  // so check it on the first sample instead of trusting it.
  void verify_member_reads(const SampleRecord& s) {
    if (verified_) return;
    verified_ = true;
    for (const auto& m : plan_.members) {
      const auto it = s.counter_values.find(m.name);
      if (it == s.counter_values.end() || it->second == 0)
        stats_.warnings.push_back("member '" + m.name +
                                  "' not delivered with leader overflow; values untrusted");
    }
  }

  GroupPlan plan_;
  detail::OpenGroup group_;
  std::optional<detail::LaunchedChild> child_;
  pid_t pid_ = -1;
  void* ring_ = nullptr;
  std::size_t ring_bytes_ = 0;
  std::size_t page_ = 4096;
  std::deque<SampleRecord> pending_;
  bool finished_ = false;
  bool verified_ = false;
};

struct CountResult {
  std::map<std::string, std::uint64_t> totals;
  int exit_status = 0;
};

/// Whole-run counting (no sampling) of a launched command.
inline CountResult count_command(const GroupPlan& plan, const std::vector<std::string>& argv) {
  detail::LaunchedChild child(argv);
  detail::OpenGroup group;
  GroupPlan counting = plan;
  counting.sampling = false;
  group.open(counting, child.pid(), true);
  child.release();
  child.poll_exit(true);
  return {group.read_group(), child.exit_status()};
}

#endif  // __linux__

struct LiveBackend {};
struct ReplayBackend {
  std::string path;
};
using Backend = std::variant<LiveBackend, ReplayBackend>;

/// Replay sessions treat every event of the plan as a required counter.
inline std::unique_ptr<Session> open_session(const GroupPlan& plan, const ProcessTarget& target,
                                             const Backend& backend) {
  if (const auto* replay = std::get_if<ReplayBackend>(&backend)) {
    const auto names = plan.event_names();
    return std::make_unique<ReplaySession>(replay->path,
                                           std::set<std::string>(names.begin(), names.end()));
  }
#ifdef __linux__
  return std::make_unique<LiveSession>(plan, target);
#else
  (void)target;
  throw Error(ErrorKind::BackendUnavailable, "live sampling needs Linux perf events");
#endif
}

}  // namespace mperf
