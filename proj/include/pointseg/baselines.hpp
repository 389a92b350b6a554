#pragma once

#include "pointseg/graph.hpp"
#include "pointseg/rng.hpp"
#include "pointseg/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <iostream>
#include <limits>
#include <vector>

namespace pointseg {

struct Clustering {
  std::vector<int> assignment;
  int num_clusters = 0;
};

namespace detail {

inline Vector squared_dist_to(const Matrix& x, const Eigen::RowVectorXd& c) {
  return (x.rowwise() - c).rowwise().squaredNorm();
}

// k-means++ seeding: first centroid uniform, the rest proportional to the
// squared distance to the nearest chosen centroid.
inline Matrix kmeanspp_seeds(const Matrix& x, int k, Rng& rng) {
  const int n = static_cast<int>(x.rows());
  Matrix centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n))));
  Vector d2 = squared_dist_to(x, centers.row(0));
  for (int c = 1; c < k; ++c) {
    double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      double r = rng.uniform01() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = x.row(pick);
    d2 = d2.cwiseMin(squared_dist_to(x, centers.row(c)));
  }
  return centers;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Converges when assignments stop
// changing; empty clusters are reseeded at the point farthest from its
// centroid. Deterministic in the seed.
inline Clustering kmeans(const Matrix& features, int k, std::uint64_t seed,
                         int max_iters = 100) {
  const int n = static_cast<int>(features.rows());
  if (k < 1) throw ValidationError("kmeans: K must be >= 1");
  if (k > n) throw ValidationError("kmeans: K exceeds the number of points");

  Rng rng(seed);
  Matrix centers = detail::kmeanspp_seeds(features, k, rng);
  std::vector<int> assign(static_cast<std::size_t>(n), 0);

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = (features.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        double d = (features.row(i) - centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    Matrix sums = Matrix::Zero(k, features.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += features.row(i);
      counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      } else {
        // reseed at the point farthest from its own centroid
        double far = -1.0;
        int pick = 0;
        for (int i = 0; i < n; ++i) {
          double d = (features.row(i) - centers.row(assign[static_cast<std::size_t>(i)]))
                         .squaredNorm();
          if (d > far) {
            far = d;
            pick = i;
          }
        }
        centers.row(c) = features.row(pick);
      }
    }
  }

  return {assign, k};
}

inline double kmeans_objective(const Matrix& features, const Clustering& clustering) {
  Matrix sums = Matrix::Zero(clustering.num_clusters, features.cols());
  std::vector<int> counts(static_cast<std::size_t>(clustering.num_clusters), 0);
  for (int i = 0; i < static_cast<int>(features.rows()); ++i) {
    sums.row(clustering.assignment[static_cast<std::size_t>(i)]) += features.row(i);
    counts[static_cast<std::size_t>(clustering.assignment[static_cast<std::size_t>(i)])] += 1;
  }
  double obj = 0.0;
  for (int i = 0; i < static_cast<int>(features.rows()); ++i) {
    int c = clustering.assignment[static_cast<std::size_t>(i)];
    Eigen::RowVectorXd center = sums.row(c) / std::max(1, counts[static_cast<std::size_t>(c)]);
    obj += (features.row(i) - center).squaredNorm();
  }
  return obj;
}

// Normalized-cut spectral clustering: eigenvectors of the K smallest
// eigenvalues of D^{-1/2} L D^{-1/2}, row-normalized, then k-means on the
// embedding. Isolated vertices (zero degree) are excluded from the spectral
// step and assigned to the nearest centroid in raw feature space when
// features are supplied, else to cluster 0, with a warning either way.
inline Clustering ncut(const AffinityGraph& graph, int k, std::uint64_t seed,
                       const Matrix& features = Matrix()) {
  const int n = graph.size();
  if (k < 1) throw ValidationError("ncut: K must be >= 1");
  if (k > n) throw ValidationError("ncut: K exceeds the number of points");
  if (graph.has_negative)
    throw ValidationError("ncut: graph must have nonnegative weights");

  std::vector<int> active;  // vertices with positive degree
  for (int i = 0; i < n; ++i)
    if (graph.degrees(i) > 0) active.push_back(i);
  const int m = static_cast<int>(active.size());
  if (m < k) throw ValidationError("ncut: fewer connected vertices than clusters");

  // dense normalized Laplacian over the active vertices
  Matrix lsym = Matrix::Zero(m, m);
  {
    std::vector<int> pos(static_cast<std::size_t>(n), -1);
    for (int a = 0; a < m; ++a) pos[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])] = a;
    Vector dinv_sqrt(m);
    for (int a = 0; a < m; ++a)
      dinv_sqrt(a) = 1.0 / std::sqrt(graph.degrees(active[static_cast<std::size_t>(a)]));
    for (int a = 0; a < m; ++a) lsym(a, a) = 1.0;
    for (int j = 0; j < graph.weights.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(graph.weights, j); it; ++it) {
        int pa = pos[static_cast<std::size_t>(it.row())];
        int pb = pos[static_cast<std::size_t>(it.col())];
        if (pa >= 0 && pb >= 0) lsym(pa, pb) -= dinv_sqrt(pa) * it.value() * dinv_sqrt(pb);
      }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(lsym);
  if (eig.info() != Eigen::Success) throw SolverError("ncut: eigendecomposition failed");
  Matrix embedding = eig.eigenvectors().leftCols(k);  // eigenvalues ascend

  for (int i = 0; i < m; ++i) {
    double norm = embedding.row(i).norm();
    if (norm > 1e-12) embedding.row(i) /= norm;
  }

  Clustering sub = kmeans(embedding, k, derive_seed(seed, {rng_tag::kInit}));

  Clustering out;
  out.num_clusters = k;
  out.assignment.assign(static_cast<std::size_t>(n), -1);
  for (int a = 0; a < m; ++a)
    out.assignment[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])] =
        sub.assignment[static_cast<std::size_t>(a)];

  if (m < n) {
    std::cerr << "warning: ncut found " << (n - m) << " isolated vertices\n";
    Matrix centroids;
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    const bool have_features = features.rows() == n;
    if (have_features) {
      centroids = Matrix::Zero(k, features.cols());
      for (int a = 0; a < m; ++a) {
        int i = active[static_cast<std::size_t>(a)];
        centroids.row(sub.assignment[static_cast<std::size_t>(a)]) += features.row(i);
        counts[static_cast<std::size_t>(sub.assignment[static_cast<std::size_t>(a)])] += 1;
      }
      for (int c = 0; c < k; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0) centroids.row(c) /= counts[static_cast<std::size_t>(c)];
    }
    for (int i = 0; i < n; ++i) {
      if (out.assignment[static_cast<std::size_t>(i)] >= 0) continue;
      int best = 0;
      if (have_features) {
        double bd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          if (counts[static_cast<std::size_t>(c)] == 0) continue;
          double d = (features.row(i) - centroids.row(c)).squaredNorm();
          if (d < bd) {
            bd = d;
            best = c;
          }
        }
      }
      out.assignment[static_cast<std::size_t>(i)] = best;
    }
  }
  return out;
}

}  // namespace pointseg
