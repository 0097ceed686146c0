#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <vector>

#include "reifenberg/kernels.hpp"

using namespace reifenberg;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("active kernel reports a name") {
  CHECK((kernels::active_kernel_name() == "scalar" ||
         kernels::active_kernel_name() == "avx2"));
}

TEST_CASE("simd variants agree with the scalar reference bit for bit") {
  const auto& scalar = kernels::scalar_ops();
  const kernels::Ops* simd = kernels::avx2_ops_if_supported();
  if (!simd) {
    MESSAGE("no AVX2 on this host; scalar-only");
    return;
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (std::size_t n : {std::size_t(1), std::size_t(3), std::size_t(4),
                          std::size_t(7), std::size_t(64), std::size_t(1013)}) {
      const auto a = random_vec(n, seed * 2 + 1);
      const auto b = random_vec(n, seed * 2 + 2);
      CHECK(scalar.max_abs_diff(a.data(), b.data(), n) ==
            simd->max_abs_diff(a.data(), b.data(), n));
      CHECK(scalar.max_abs(a.data(), n) == simd->max_abs(a.data(), n));
      CHECK(scalar.min_value(a.data(), n) == simd->min_value(a.data(), n));
    }
    // 2D batches
    for (std::size_t count :
         {std::size_t(1), std::size_t(5), std::size_t(8), std::size_t(137)}) {
      const auto pts = random_vec(2 * count, seed * 7 + 3);
      const auto q = random_vec(2, seed * 7 + 4);
      std::vector<double> o1(count), o2(count);
      scalar.dist2_batch(q.data(), pts.data(), count, 2, o1.data());
      simd->dist2_batch(q.data(), pts.data(), count, 2, o2.data());
      for (std::size_t i = 0; i < count; ++i) CHECK(o1[i] == o2[i]);

      const auto Q = random_vec(4, seed * 7 + 5);
      const auto v = random_vec(2, seed * 7 + 6);
      std::vector<double> y1(2 * count), y2(2 * count);
      scalar.apply_rigid2_batch(Q.data(), v.data(), pts.data(), count,
                                y1.data());
      simd->apply_rigid2_batch(Q.data(), v.data(), pts.data(), count,
                               y2.data());
      for (std::size_t i = 0; i < 2 * count; ++i) CHECK(y1[i] == y2[i]);
    }
  }
}

TEST_CASE("dist2_batch matches a plain computation in 3d") {
  const auto pts = random_vec(3 * 11, 99);
  const auto q = random_vec(3, 100);
  std::vector<double> out(11);
  kernels::ops().dist2_batch(q.data(), pts.data(), 11, 3, out.data());
  for (std::size_t i = 0; i < 11; ++i) {
    double s = 0;
    for (int k = 0; k < 3; ++k) {
      const double d = pts[3 * i + k] - q[k];
      s += d * d;
    }
    CHECK(out[i] == doctest::Approx(s).epsilon(1e-15));
  }
}
