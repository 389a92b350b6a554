#pragma once

#include "pointseg/rng.hpp"
#include "pointseg/types.hpp"

#include <cmath>

namespace pointseg {

// In-plane rotation combined with X/Y mirroring or swapping. The matrix is
// the product of a z-axis rotation by theta and a mirror matrix driven by
// fair bits a, b, c:
//   [ (2a-1)c     (2b-1)(1-c)  0 ]
//   [ (2a-1)(1-c) (2b-1)c      0 ]
//   [ 0           0            1 ]
// c selects between mirroring (c=1) and an X/Y swap (c=0).
struct RigidTransform {
  Eigen::Matrix3d matrix;
  double theta = 0.0;
  int a = 1, b = 1, c = 1;

  static RigidTransform from_draw(double theta, int a, int b, int c) {
    Eigen::Matrix3d rot;
    rot << std::cos(theta), -std::sin(theta), 0.0,
           std::sin(theta), std::cos(theta), 0.0,
           0.0, 0.0, 1.0;
    const double sa = 2.0 * a - 1.0;
    const double sb = 2.0 * b - 1.0;
    Eigen::Matrix3d mirror;
    mirror << sa * c, sb * (1 - c), 0.0,
              sa * (1 - c), sb * c, 0.0,
              0.0, 0.0, 1.0;
    RigidTransform t;
    t.matrix = rot * mirror;
    t.theta = theta;
    t.a = a;
    t.b = b;
    t.c = c;
    return t;
  }
};

// Draw order is fixed (theta, a, b, c): theta ~ U(0, 2pi), bits fair.
inline RigidTransform sample_transform(std::uint64_t seed) {
  Rng rng = derive_rng(seed, {rng_tag::kTransform});
  double theta = rng.uniform01() * 2.0 * M_PI;
  int a = rng.bernoulli_bit();
  int b = rng.bernoulli_bit();
  int c = rng.bernoulli_bit();
  return RigidTransform::from_draw(theta, a, b, c);
}

// Maps xyz rows by x~ = x R^T; rgb and labels are untouched.
inline PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out = cloud;
  out.xyz = cloud.xyz * t.matrix.transpose();
  return out;
}

}  // namespace pointseg
