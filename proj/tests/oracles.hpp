#pragma once

// Independent reference implementations used as test oracles. These stay
// deliberately dumb (plain loops, no shared code with the library) so they
// can catch mistakes in the production paths.

#include "pointseg/encoder.hpp"
#include "pointseg/metrics.hpp"
#include "pointseg/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracles {

using pointseg::EncoderParams;
using pointseg::Matrix;
using pointseg::PointCloud;
using pointseg::Vector;

// Straight-line re-computation of the encoder forward pass from the flat
// parameter vector, using nested std::vector arithmetic only.
inline std::vector<std::vector<double>> encoder_forward(const PointCloud& cloud,
                                                        const EncoderParams& params) {
  const int n = cloud.size();
  const int f = cloud.feature_count();
  const int d0 = params.dims[0], d1 = params.dims[1], d2 = params.dims[2], d3 = params.dims[3];
  const int k = params.num_classes;

  // standardize xyz exactly like the production path: centroid, max radius
  std::vector<std::vector<double>> x(n, std::vector<double>(f, 0.0));
  double cx = 0, cy = 0, cz = 0;
  for (int i = 0; i < n; ++i) {
    cx += cloud.xyz(i, 0);
    cy += cloud.xyz(i, 1);
    cz += cloud.xyz(i, 2);
  }
  cx /= n;
  cy /= n;
  cz /= n;
  double radius = 0;
  for (int i = 0; i < n; ++i) {
    double dx = cloud.xyz(i, 0) - cx, dy = cloud.xyz(i, 1) - cy, dz = cloud.xyz(i, 2) - cz;
    radius = std::max(radius, std::sqrt(dx * dx + dy * dy + dz * dz));
  }
  if (radius == 0) radius = 1;
  for (int i = 0; i < n; ++i) {
    x[i][0] = (cloud.xyz(i, 0) - cx) / radius;
    x[i][1] = (cloud.xyz(i, 1) - cy) / radius;
    x[i][2] = (cloud.xyz(i, 2) - cz) / radius;
    if (f == 6)
      for (int c = 0; c < 3; ++c) x[i][3 + c] = (*cloud.rgb)(i, c);
  }

  Vector flat = params.flatten();
  std::size_t at = 0;
  auto layer = [&](const std::vector<std::vector<double>>& in, int din, int dout, bool relu) {
    std::vector<std::vector<double>> w(dout, std::vector<double>(din));
    std::vector<double> b(dout);
    for (int i = 0; i < dout; ++i)
      for (int j = 0; j < din; ++j) w[i][j] = flat(static_cast<Eigen::Index>(at++));
    for (int i = 0; i < dout; ++i) b[i] = flat(static_cast<Eigen::Index>(at++));
    std::vector<std::vector<double>> out(in.size(), std::vector<double>(dout, 0.0));
    for (std::size_t r = 0; r < in.size(); ++r)
      for (int i = 0; i < dout; ++i) {
        double acc = b[i];
        for (int j = 0; j < din; ++j) acc += w[i][j] * in[r][j];
        out[r][i] = relu ? std::max(acc, 0.0) : acc;
      }
    return out;
  };

  auto h1 = layer(x, f, d0, true);
  auto h2 = layer(h1, d0, d1, true);
  auto h3 = layer(h2, d1, d2, true);

  std::vector<double> pooled(d2, 0.0);
  for (int c = 0; c < d2; ++c) {
    double best = h3[0][c];
    for (int i = 1; i < n; ++i) best = std::max(best, h3[i][c]);
    pooled[c] = best;
  }
  std::vector<std::vector<double>> u(n, std::vector<double>(d1 + d2, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d1; ++c) u[i][c] = h2[i][c];
    for (int c = 0; c < d2; ++c) u[i][d1 + c] = pooled[c];
  }
  auto h4 = layer(u, d1 + d2, d3, true);
  return layer(h4, d3, k, false);
}

// Central finite differences of an arbitrary scalar functional of the
// parameters.
inline Vector fd_gradient(const EncoderParams& base,
                          const std::function<double(const EncoderParams&)>& loss,
                          double h = 1e-5) {
  EncoderParams p = base;
  Vector flat = base.flatten();
  Vector grad(flat.size());
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    double keep = flat(i);
    flat(i) = keep + h;
    p.set_from_flat(flat);
    double up = loss(p);
    flat(i) = keep - h;
    p.set_from_flat(flat);
    double down = loss(p);
    flat(i) = keep;
    grad(i) = (up - down) / (2.0 * h);
  }
  p.set_from_flat(flat);
  return grad;
}

inline double max_rel_error(const Vector& analytic, const Vector& reference,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    double denom = std::max({std::abs(analytic(i)), std::abs(reference(i)), floor});
    worst = std::max(worst, std::abs(analytic(i) - reference(i)) / denom);
  }
  return worst;
}

// Exhaustive assignment search: the best achievable sum of IoU(pred id ->
// class) over all permutations, via plain counting.
inline double best_assignment_iou_sum(const std::vector<int>& pred, const std::vector<int>& gt,
                                      int k) {
  std::vector<std::vector<double>> iou(k, std::vector<double>(k, 0.0));
  for (int p = 0; p < k; ++p)
    for (int g = 0; g < k; ++g) {
      long inter = 0, uni = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        bool a = pred[i] == p, b = gt[i] == g;
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
      }
      iou[p][g] = uni > 0 ? double(inter) / double(uni) : 0.0;
    }
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  do {
    double sum = 0.0;
    for (int p = 0; p < k; ++p) sum += iou[p][perm[static_cast<std::size_t>(p)]];
    best = std::max(best, sum);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline double assignment_iou_sum(const std::vector<int>& pred, const std::vector<int>& gt, int k,
                                 const std::vector<int>& perm) {
  double sum = 0.0;
  for (int p = 0; p < k; ++p) {
    long inter = 0, uni = 0;
    int g = perm[static_cast<std::size_t>(p)];
    for (std::size_t i = 0; i < pred.size(); ++i) {
      bool a = pred[i] == p, b = gt[i] == g;
      inter += (a && b) ? 1 : 0;
      uni += (a || b) ? 1 : 0;
    }
    sum += uni > 0 ? double(inter) / double(uni) : 0.0;
  }
  return sum;
}

// Fraction of points whose cluster's majority label matches their own.
inline double purity(const std::vector<int>& assignment, const std::vector<int>& labels, int k) {
  int num_labels = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<long>> counts(static_cast<std::size_t>(k),
                                        std::vector<long>(static_cast<std::size_t>(num_labels), 0));
  for (std::size_t i = 0; i < assignment.size(); ++i)
    counts[static_cast<std::size_t>(assignment[i])][static_cast<std::size_t>(labels[i])] += 1;
  long hit = 0;
  for (int c = 0; c < k; ++c)
    hit += *std::max_element(counts[static_cast<std::size_t>(c)].begin(),
                             counts[static_cast<std::size_t>(c)].end());
  return static_cast<double>(hit) / static_cast<double>(assignment.size());
}

inline PointCloud random_cloud(int n, int k, std::uint64_t seed, bool with_rgb = false) {
  pointseg::Rng rng(seed);
  PointCloud cloud;
  cloud.xyz.resize(n, 3);
  cloud.labels.resize(static_cast<std::size_t>(n));
  cloud.num_classes = k;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) cloud.xyz(i, c) = rng.uniform(-1.0, 1.0);
    cloud.labels[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(k));
  }
  if (with_rgb) {
    Matrix rgb(n, 3);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) rgb(i, c) = rng.uniform01();
    cloud.rgb = rgb;
  }
  return cloud;
}

}  // namespace oracles
