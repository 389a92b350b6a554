#pragma once

#include "pointseg/types.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

namespace pointseg {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Channel { Xyz, Rgb };

struct GraphParams {
  int k = 10;
  double eta = 1e3;
  bool symmetrize = true;
  bool use_rgb = true;  // color channel is added when the cloud carries one

  void validate(int n) const {
    if (k < 1) throw ValidationError("graph: k must be >= 1");
    if (k >= n) throw ValidationError("graph: k must be smaller than the point count");
    if (eta <= 0) throw ValidationError("graph: eta must be > 0");
  }
};

// Sparse affinity W with degrees d_i = sum_j w_ij and Laplacian L = D - W.
struct AffinityGraph {
  SparseMatrix weights;
  Vector degrees;
  SparseMatrix laplacian;
  std::int64_t nnz = 0;
  bool has_negative = false;  // set once must-not-link entries exist

  int size() const { return static_cast<int>(weights.rows()); }

  static AffinityGraph from_weights(SparseMatrix w) {
    AffinityGraph g;
    w.prune(0.0, 0.0);
    w.makeCompressed();
    g.nnz = w.nonZeros();
    g.degrees = Vector::Zero(w.rows());
    for (int j = 0; j < w.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(w, j); it; ++it) {
        g.degrees(it.row()) += it.value();
        if (it.value() < 0) g.has_negative = true;
      }
    SparseMatrix d(w.rows(), w.cols());
    d.reserve(Eigen::VectorXi::Constant(static_cast<int>(w.cols()), 1));
    for (int i = 0; i < w.rows(); ++i) d.insert(i, i) = g.degrees(i);
    g.laplacian = d - w;
    g.laplacian.makeCompressed();
    g.weights = std::move(w);
    return g;
  }

  static AffinityGraph empty(int n) { return from_weights(SparseMatrix(n, n)); }
};

// Euclidean (not squared) distances; symmetric with zero diagonal.
inline Matrix pairwise_distance(const PointCloud& cloud, Channel channel) {
  if (channel == Channel::Rgb && !cloud.has_rgb())
    throw ValidationError("pairwise_distance: cloud has no rgb channel");
  const Matrix& x = (channel == Channel::Xyz) ? cloud.xyz : *cloud.rgb;
  const int n = static_cast<int>(x.rows());
  Matrix d = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = (x.row(i) - x.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

namespace detail {

// Per-channel k-nn weights: w_ij = exp(-p_ij / eta) for j among the k nearest
// neighbors of i (self excluded, ties broken by lower index).
inline std::vector<Eigen::Triplet<double>> knn_triplets(const Matrix& dist, int k, double eta) {
  const int n = static_cast<int>(dist.rows());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      if (dist(i, a) != dist(i, b)) return dist(i, a) < dist(i, b);
      return a < b;
    });
    for (int m = 0; m < k; ++m)
      trips.emplace_back(i, order[static_cast<std::size_t>(m)],
                         std::exp(-dist(i, order[static_cast<std::size_t>(m)]) / eta));
  }
  return trips;
}

}  // namespace detail

// k-nn affinity graph. When rgb is present the xyz and rgb weight matrices
// are summed entry-wise; symmetrization takes the entry-wise max of W and
// its transpose so Laplacian quadratic forms stay symmetric.
inline AffinityGraph knn_weights(const PointCloud& cloud, const GraphParams& params) {
  const int n = cloud.size();
  params.validate(n);

  auto trips = detail::knn_triplets(pairwise_distance(cloud, Channel::Xyz), params.k, params.eta);
  SparseMatrix w(n, n);
  w.setFromTriplets(trips.begin(), trips.end());  // duplicates would sum; none within a channel
  if (params.use_rgb && cloud.has_rgb()) {
    auto ct = detail::knn_triplets(pairwise_distance(cloud, Channel::Rgb), params.k, params.eta);
    SparseMatrix wc(n, n);
    wc.setFromTriplets(ct.begin(), ct.end());
    w = w + wc;
  }
  if (params.symmetrize) {
    SparseMatrix wt = SparseMatrix(w.transpose());
    w = w.cwiseMax(wt);
  }
  return AffinityGraph::from_weights(std::move(w));
}

// Must-link / must-not-link overrides over every labelled pair: +1 for equal
// labels, -1 otherwise, written symmetrically. Degrees and Laplacian are
// rebuilt from the final weights. must_link_only keeps just the +1 entries,
// which preserves positive semi-definiteness of the Laplacian; the training
// regularizer relies on that (a -1 entry makes the smoothness quadratic
// unbounded below, which plain SGD can ride to divergence).
inline AffinityGraph apply_link_constraints(const AffinityGraph& graph, const LabelMask& mask,
                                            const std::vector<int>& labels,
                                            bool must_link_only = false) {
  const int n = graph.size();
  if (mask.size() != n || static_cast<int>(labels.size()) != n)
    throw ValidationError("apply_link_constraints: mask/labels size mismatch");

  std::vector<int> labelled;
  for (int i = 0; i < n; ++i)
    if (mask.is_set(i)) labelled.push_back(i);
  if (labelled.size() < 2) return graph;

  Matrix overrides = Matrix::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t a = 0; a < labelled.size(); ++a)
    for (std::size_t b = a + 1; b < labelled.size(); ++b) {
      int i = labelled[a], j = labelled[b];
      bool same = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)];
      if (!same && must_link_only) continue;
      double v = same ? 1.0 : -1.0;
      overrides(i, j) = v;
      overrides(j, i) = v;
    }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(graph.nnz) + labelled.size() * labelled.size());
  for (int j = 0; j < graph.weights.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(graph.weights, j); it; ++it)
      if (std::isnan(overrides(it.row(), it.col())))
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (std::size_t a = 0; a < labelled.size(); ++a)
    for (std::size_t b = 0; b < labelled.size(); ++b) {
      if (a == b) continue;
      int i = labelled[a], j = labelled[b];
      if (std::isnan(overrides(i, j))) continue;  // pair not constrained
      trips.emplace_back(i, j, overrides(i, j));
    }
  SparseMatrix w(n, n);
  w.setFromTriplets(trips.begin(), trips.end());
  return AffinityGraph::from_weights(std::move(w));
}

// Debug dump: "N nnz" header then one "i j w" line per stored entry.
inline void dump_triplets(const AffinityGraph& graph, std::ostream& out) {
  out << graph.size() << ' ' << graph.nnz << '\n';
  for (int j = 0; j < graph.weights.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(graph.weights, j); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace pointseg
