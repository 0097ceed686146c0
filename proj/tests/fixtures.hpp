#pragma once

// Shared test fixtures: line/grid/disk point clouds, abstract circles,
// flat tori and geodesic spheres.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "reifenberg/metric_space.hpp"

namespace fixtures {

using reifenberg::core::FiniteMetricSpace;

inline FiniteMetricSpace line_points(const std::vector<double>& xs) {
  std::vector<std::string> ids;
  Eigen::MatrixXd coords(xs.size(), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ids.push_back(std::to_string(i));
    coords(i, 0) = xs[i];
  }
  return FiniteMetricSpace(std::move(ids), std::move(coords), true);
}

// grid sample of the disk B_radius(0) in R^2 with the given spacing
inline FiniteMetricSpace disk_grid(double radius, double spacing) {
  std::vector<std::string> ids;
  std::vector<double> pts;
  const int k = static_cast<int>(std::floor(radius / spacing));
  for (int i = -k; i <= k; ++i)
    for (int j = -k; j <= k; ++j) {
      const double x = i * spacing, y = j * spacing;
      if (x * x + y * y <= radius * radius) {
        ids.push_back(std::to_string(ids.size()));
        pts.push_back(x);
        pts.push_back(y);
      }
    }
  Eigen::MatrixXd coords(ids.size(), 2);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    coords(i, 0) = pts[2 * i];
    coords(i, 1) = pts[2 * i + 1];
  }
  return FiniteMetricSpace(std::move(ids), std::move(coords), true);
}

// abstract circle of circumference L with the intrinsic (arc) metric
inline FiniteMetricSpace circle_intrinsic(double L, std::size_t count) {
  std::vector<std::string> ids(count);
  Eigen::MatrixXd dist(count, count);
  for (std::size_t i = 0; i < count; ++i) {
    ids[i] = std::to_string(i);
    for (std::size_t j = 0; j < count; ++j) {
      const double a = std::fabs(double(i) - double(j)) / count;
      const double frac = std::min(a, 1.0 - a);
      dist(i, j) = L * frac;
    }
  }
  return FiniteMetricSpace(std::move(ids), std::move(dist));
}

// circle with jittered (non-uniform) sampling; two seeds give two honest
// samples of the same space with a small GH mismatch
inline FiniteMetricSpace circle_jittered(double L, std::size_t count,
                                         double amp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> pos(count);
  for (std::size_t i = 0; i < count; ++i)
    pos[i] = std::fmod((i + 0.5 * amp * u(rng)) * (L / count), L);
  std::vector<std::string> ids(count);
  Eigen::MatrixXd dist(count, count);
  for (std::size_t i = 0; i < count; ++i) {
    ids[i] = std::to_string(i);
    dist(i, i) = 0.0;
    for (std::size_t j = i + 1; j < count; ++j) {
      double d = std::fabs(pos[i] - pos[j]);
      d = std::min(d, L - d);
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return FiniteMetricSpace(std::move(ids), std::move(dist));
}

// flat torus [0,L)^2 with the quotient metric, grid sample k x k
inline FiniteMetricSpace flat_torus(double L, int k) {
  const std::size_t count = static_cast<std::size_t>(k) * k;
  std::vector<std::string> ids(count);
  Eigen::MatrixXd dist(count, count);
  auto wrap = [&](double d) {
    d = std::fabs(d);
    return std::min(d, L - d);
  };
  for (std::size_t a = 0; a < count; ++a) {
    ids[a] = std::to_string(a);
    const double ax = (a % k) * (L / k), ay = (a / k) * (L / k);
    for (std::size_t b = 0; b < count; ++b) {
      const double bx = (b % k) * (L / k), by = (b / k) * (L / k);
      dist(a, b) = std::hypot(wrap(ax - bx), wrap(ay - by));
    }
  }
  return FiniteMetricSpace(std::move(ids), std::move(dist));
}

// Fibonacci sphere sample with the geodesic metric (unit radius by default)
inline FiniteMetricSpace sphere_geodesic(std::size_t count, double radius = 1.0) {
  std::vector<Eigen::Vector3d> pts(count);
  const double ga = M_PI * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double th = ga * static_cast<double>(i);
    pts[i] = {rho * std::cos(th), rho * std::sin(th), z};
  }
  std::vector<std::string> ids(count);
  Eigen::MatrixXd dist(count, count);
  for (std::size_t i = 0; i < count; ++i) {
    ids[i] = std::to_string(i);
    dist(i, i) = 0.0;
    for (std::size_t j = i + 1; j < count; ++j) {
      const double c = std::clamp(pts[i].dot(pts[j]), -1.0, 1.0);
      dist(i, j) = radius * std::acos(c);
      dist(j, i) = dist(i, j);
    }
  }
  return FiniteMetricSpace(std::move(ids), std::move(dist));
}

// independently rotated/jittered sphere sample (for the shared-atlas tests)
inline FiniteMetricSpace sphere_geodesic_rotated(std::size_t count,
                                                 double radius, double jitter,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Eigen::Vector3d> pts(count);
  const double ga = M_PI * (3.0 - std::sqrt(5.0));
  // random rotation via Gram-Schmidt on a seeded frame
  Eigen::Matrix3d F;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) F(r, c) = g(rng);
  Eigen::HouseholderQR<Eigen::Matrix3d> qr(F);
  Eigen::Matrix3d R = qr.householderQ();
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double th = ga * static_cast<double>(i) + jitter * g(rng);
    Eigen::Vector3d p{rho * std::cos(th), rho * std::sin(th), z};
    pts[i] = (R * p).normalized();
  }
  std::vector<std::string> ids(count);
  Eigen::MatrixXd dist(count, count);
  for (std::size_t i = 0; i < count; ++i) {
    ids[i] = std::to_string(i);
    dist(i, i) = 0.0;
    for (std::size_t j = i + 1; j < count; ++j) {
      const double c = std::clamp(pts[i].dot(pts[j]), -1.0, 1.0);
      dist(i, j) = radius * std::acos(c);
      dist(j, i) = dist(i, j);
    }
  }
  return FiniteMetricSpace(std::move(ids), std::move(dist));
}

}  // namespace fixtures
