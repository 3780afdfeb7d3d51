// Tiled matmul rewritten by hand the way the loop-nest pass would emit it:
// an outlined clone, an instrumented clone with one add_counts per basic
// block, and a dispatch on the runtime's decision.
//
// usage: matmul_fixture [n] [tile] [reps] [extra]
//   extra: also run a reduction loop nest, reported as a second record

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "mperf/roofline/mperf_rt.h"

namespace {

constexpr char kFile[] = "matmul_fixture.cpp";

// LoopInfo lines point at the loop headers in the outlined clones.
constexpr unsigned kMatmulLoopLine = __LINE__ + 2;
void matmul_loop0_outlined(const float* A, const float* B, float* C, int n, int TILE) {
  for (int ii = 0; ii < n; ii += TILE)
    for (int jj = 0; jj < n; jj += TILE)
      for (int kk = 0; kk < n; kk += TILE)
        for (int i = ii; i < ii + TILE && i < n; i++)
          for (int j = jj; j < jj + TILE && j < n; j++) {
            float sum = C[i * n + j];
            for (int k = kk; k < kk + TILE && k < n; k++) sum += A[i * n + k] * B[k * n + j];
            C[i * n + j] = sum;
          }
}

void matmul_loop0_instrumented(const float* A, const float* B, float* C, int n, int TILE,
                               mperf_loop_handle* lh) {
  // Latch blocks hold the induction update: (0,0,1,0).
  for (int ii = 0; ii < n; ii += TILE) {
    for (int jj = 0; jj < n; jj += TILE) {
      for (int kk = 0; kk < n; kk += TILE) {
        for (int i = ii; i < ii + TILE && i < n; i++) {
          for (int j = jj; j < jj + TILE && j < n; j++) {
            mperf_roofline_internal_add_counts(lh, 4, 0, 0, 0);
            float sum = C[i * n + j];
            for (int k = kk; k < kk + TILE && k < n; k++) {
              mperf_roofline_internal_add_counts(lh, 8, 0, 0, 2);
              sum += A[i * n + k] * B[k * n + j];
              mperf_roofline_internal_add_counts(lh, 0, 0, 1, 0);
            }
            mperf_roofline_internal_add_counts(lh, 0, 4, 0, 0);
            C[i * n + j] = sum;
            mperf_roofline_internal_add_counts(lh, 0, 0, 1, 0);
          }
          mperf_roofline_internal_add_counts(lh, 0, 0, 1, 0);
        }
        mperf_roofline_internal_add_counts(lh, 0, 0, 1, 0);
      }
      mperf_roofline_internal_add_counts(lh, 0, 0, 1, 0);
    }
    mperf_roofline_internal_add_counts(lh, 0, 0, 1, 0);
  }
}

void matmul(const float* A, const float* B, float* C, int n, int TILE) {
  static const char func[] = "matmul";
  mperf_loop_handle* lh = mperf_roofline_internal_notify_loop_begin(
      kMatmulLoopLine, kFile, sizeof(kFile) - 1, func, sizeof(func) - 1);
  if (mperf_roofline_internal_is_instrumented_profiling())
    matmul_loop0_instrumented(A, B, C, n, TILE, lh);
  else
    matmul_loop0_outlined(A, B, C, n, TILE);
  mperf_roofline_internal_notify_loop_end(lh);
}

constexpr unsigned kReduceLoopLine = __LINE__ + 3;
float reduce_loop0_outlined(const float* x, int n) {
  float s = 0;
  for (int i = 0; i < n; i++) s += x[i];
  return s;
}

float reduce_loop0_instrumented(const float* x, int n, mperf_loop_handle* lh) {
  float s = 0;
  for (int i = 0; i < n; i++) {
    mperf_roofline_internal_add_counts(lh, 4, 0, 0, 1);
    s += x[i];
    mperf_roofline_internal_add_counts(lh, 0, 0, 1, 0);
  }
  return s;
}

float reduce(const float* x, int n) {
  static const char func[] = "reduce";
  mperf_loop_handle* lh = mperf_roofline_internal_notify_loop_begin(
      kReduceLoopLine, kFile, sizeof(kFile) - 1, func, sizeof(func) - 1);
  const float s = mperf_roofline_internal_is_instrumented_profiling()
                      ? reduce_loop0_instrumented(x, n, lh)
                      : reduce_loop0_outlined(x, n);
  mperf_roofline_internal_notify_loop_end(lh);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 64;
  const int tile = argc > 2 ? std::atoi(argv[2]) : 4;
  const int reps = argc > 3 ? std::atoi(argv[3]) : 1;
  const bool extra = argc > 4 && std::strcmp(argv[4], "extra") == 0;
  if (n <= 0 || tile <= 0 || reps <= 0) {
    std::fprintf(stderr, "usage: %s [n] [tile] [reps] [extra]\n", argv[0]);
    return 2;
  }

  // Same inputs as the counting oracle in the tests.
  std::vector<float> a(static_cast<size_t>(n) * n), b(a.size()), c(a.size(), 0.0f);
  for (size_t idx = 0; idx < a.size(); ++idx) {
    a[idx] = static_cast<float>((idx % 7) + 1) * 0.25f;
    b[idx] = static_cast<float>((idx % 5) + 1) * 0.5f;
  }

  for (int r = 0; r < reps; ++r) matmul(a.data(), b.data(), c.data(), n, tile);
  double checksum = 0;
  for (float v : c) checksum += v;
  if (extra) checksum += reduce(c.data(), static_cast<int>(c.size()));
  std::printf("checksum %.6e\n", checksum);
  return 0;
}
