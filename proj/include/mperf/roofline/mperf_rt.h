/* Entry points called by instrumented code. The loop-nest rewrite emits:
 *
 *   mperf_loop_handle *lh = mperf_roofline_internal_notify_loop_begin(
 *       42, "foo.c", 5, "bar", 3);
 *   if (mperf_roofline_internal_is_instrumented_profiling())
 *     bar_loop0_instrumented(args..., lh);
 *   else
 *     bar_loop0_outlined(args...);
 *   mperf_roofline_internal_notify_loop_end(lh);
 *
 * and the instrumented clone calls mperf_roofline_internal_add_counts once per
 * basic block. The report is written at exit.
 */
#ifndef MPERF_ROOFLINE_MPERF_RT_H
#define MPERF_ROOFLINE_MPERF_RT_H

#include <stddef.h>
#include <stdint.h>
#ifndef __cplusplus
#include <stdbool.h>
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mperf_loop_handle mperf_loop_handle;

mperf_loop_handle* mperf_roofline_internal_notify_loop_begin(uint32_t line, const char* filename,
                                                             size_t filename_len,
                                                             const char* func_name,
                                                             size_t func_name_len);

bool mperf_roofline_internal_is_instrumented_profiling(void);

void mperf_roofline_internal_add_counts(mperf_loop_handle* handle, uint64_t load_bytes,
                                        uint64_t store_bytes, uint64_t int_ops, uint64_t fp_ops);

void mperf_roofline_internal_notify_loop_end(mperf_loop_handle* handle);

/* Idempotent; also installed with atexit on first use. */
void mperf_roofline_internal_finalize_report(void);

#ifdef __cplusplus
}
#endif

#endif /* MPERF_ROOFLINE_MPERF_RT_H */
