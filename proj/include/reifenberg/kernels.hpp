#pragma once

// Data-parallel inner loops used by the distortion scans, density sweeps and
// batched rigid-motion evaluations. Scalar reference implementations live in
// kernels.cpp; an AVX2 variant is compiled in a separate TU and selected once
// at startup. Both variants must agree to the last bit (reductions only use
// max/min and fixed-order short sums), which test_kernels verifies.

#include <cstddef>
#include <cstdint>
#include <string>

namespace reifenberg::kernels {

struct Ops {
  // max_i |a[i] - b[i]|
  double (*max_abs_diff)(const double* a, const double* b, std::size_t n);
  // max_i |a[i]|
  double (*max_abs)(const double* a, std::size_t n);
  // min_i a[i]
  double (*min_value)(const double* a, std::size_t n);
  // out[i] = squared Euclidean distance from q to pts (row-major, dim d<=8)
  void (*dist2_batch)(const double* q, const double* pts, std::size_t count,
                      std::size_t dim, double* out);
  // 2x2 rigid motion applied to a batch of 2D points: y = Q x + v
  void (*apply_rigid2_batch)(const double* Q, const double* v,
                             const double* xs, std::size_t count, double* ys);
  const char* name;
};

// Active dispatch table (scalar or avx2, chosen once per process).
const Ops& ops();

// Reference table, always scalar. Used by the equivalence tests.
const Ops& scalar_ops();

// Present only when the AVX2 TU was compiled and the CPU supports it.
const Ops* avx2_ops_if_supported();

std::string active_kernel_name();

}  // namespace reifenberg::kernels
