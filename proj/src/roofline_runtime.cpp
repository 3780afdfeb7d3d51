#include "mperf/roofline/mperf_rt.h"

#include <cstdio>
#include <cstdlib>
#include <new>

#include "mperf/roofline/runtime.hpp"

namespace mperf::roofline {

namespace {

void finalize_at_exit() { process_runtime().finalize(); }

RooflineRuntime* create_runtime() {
  // Never destroyed: atexit handlers and late-running threads may still call in.
  auto* rt = new RooflineRuntime(RuntimeConfig::from_env());
  std::atexit(finalize_at_exit);
  return rt;
}

[[noreturn]] void out_of_memory() {
  std::fputs("mperf: out of memory in roofline runtime\n", stderr);
  std::abort();
}

}  // namespace

RooflineRuntime& process_runtime() {
  static RooflineRuntime* rt = create_runtime();
  return *rt;
}

}  // namespace mperf::roofline

using mperf::roofline::process_runtime;

extern "C" {

mperf_loop_handle* mperf_roofline_internal_notify_loop_begin(uint32_t line, const char* filename,
                                                             size_t filename_len,
                                                             const char* func_name,
                                                             size_t func_name_len) {
  try {
    mperf::roofline::LoopInfo info{line, std::string(filename, filename_len),
                                   std::string(func_name, func_name_len)};
    return reinterpret_cast<mperf_loop_handle*>(process_runtime().begin(info));
  } catch (const std::bad_alloc&) {
    mperf::roofline::out_of_memory();
  }
}

bool mperf_roofline_internal_is_instrumented_profiling(void) {
  return process_runtime().is_instrumented_profiling();
}

void mperf_roofline_internal_add_counts(mperf_loop_handle* handle, uint64_t load_bytes,
                                        uint64_t store_bytes, uint64_t int_ops, uint64_t fp_ops) {
  process_runtime().add_counts(reinterpret_cast<mperf::roofline::LoopHandleId>(handle),
                               {load_bytes, store_bytes, int_ops, fp_ops});
}

void mperf_roofline_internal_notify_loop_end(mperf_loop_handle* handle) {
  try {
    process_runtime().end(reinterpret_cast<mperf::roofline::LoopHandleId>(handle));
  } catch (const std::bad_alloc&) {
    mperf::roofline::out_of_memory();
  }
}

void mperf_roofline_internal_finalize_report(void) { process_runtime().finalize(); }

}  // extern "C"
