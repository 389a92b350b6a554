#pragma once

#include "pointseg/graph.hpp"
#include "pointseg/types.hpp"

#include <cmath>
#include <iostream>
#include <utility>

namespace pointseg {

// Scalar parts of one objective evaluation; total carries the lambda weights.
struct LossBreakdown {
  double seg = 0.0;
  double mil = 0.0;
  double sia = 0.0;
  double smo = 0.0;
  double total = 0.0;
};

namespace detail {

inline double softplus(double x) {
  // log(1 + exp(x)) without overflow
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// Row softmax with max-shift stabilization.
inline Matrix softmax_rows(const Logits& z) {
  Matrix p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double m = z.row(i).maxCoeff();
    Eigen::RowVectorXd e = (z.row(i).array() - m).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

// log softmax of the true class per row, computed via log-sum-exp.
inline Vector log_softmax_true(const Logits& z, const Matrix& onehot) {
  Vector out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double m = z.row(i).maxCoeff();
    double lse = m + std::log((z.row(i).array() - m).exp().sum());
    double zt = 0.0;
    for (Eigen::Index k = 0; k < z.cols(); ++k)
      if (onehot(i, k) != 0.0) zt = z(i, k);
    out(i) = zt - lse;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Incomplete supervision: softmax cross-entropy over masked points, divided
// by the labelled count C. Batch callers sum masked points across samples
// and pass the batch-wide C through c_override.
// ---------------------------------------------------------------------------

inline double seg_loss(const Logits& z, const Matrix& onehot, const LabelMask& mask,
                       double c_override = -1.0) {
  if (z.rows() != onehot.rows() || z.cols() != onehot.cols())
    throw ValidationError("seg_loss: logits/onehot shape mismatch");
  if (mask.size() != static_cast<int>(z.rows()))
    throw ValidationError("seg_loss: mask size mismatch");
  const double c = (c_override > 0) ? c_override : static_cast<double>(mask.count);
  if (c <= 0) throw ValidationError("seg_loss: labelled count is zero");
  Vector logp = log_softmax_true(z, onehot);
  double sum = 0.0;
  for (int i = 0; i < mask.size(); ++i)
    if (mask.is_set(i)) sum -= logp(i);
  return sum / c;
}

inline Matrix seg_loss_grad(const Logits& z, const Matrix& onehot, const LabelMask& mask,
                            double c_override = -1.0) {
  const double c = (c_override > 0) ? c_override : static_cast<double>(mask.count);
  if (c <= 0) throw ValidationError("seg_loss_grad: labelled count is zero");
  Matrix p = softmax_rows(z);
  Matrix dz = Matrix::Zero(z.rows(), z.cols());
  for (int i = 0; i < mask.size(); ++i)
    if (mask.is_set(i)) dz.row(i) = (p.row(i) - onehot.row(i)) / c;
  return dz;
}

// ---------------------------------------------------------------------------
// Inexact supervision: the sample-level label is the max over labelled rows
// of the one-hot matrix; the per-class evidence is the column max of the
// logits, trained with sigmoid cross-entropy.
// ---------------------------------------------------------------------------

inline Vector sample_level_label(const Matrix& onehot, const LabelMask& mask) {
  if (mask.count < 1)
    throw ValidationError("sample_level_label: no labelled points to pool");
  Vector y = Vector::Zero(onehot.cols());
  for (int i = 0; i < mask.size(); ++i)
    if (mask.is_set(i))
      for (Eigen::Index k = 0; k < onehot.cols(); ++k)
        if (onehot(i, k) != 0.0) y(k) = 1.0;
  return y;
}

inline double mil_loss(const Logits& z, const Vector& sample_label) {
  if (sample_label.size() != z.cols())
    throw ValidationError("mil_loss: label length must equal class count");
  const Eigen::Index k = z.cols();
  double sum = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    double zbar = z.col(c).maxCoeff();
    // -ybar*log(sigma(z)) - (1-ybar)*log(1-sigma(z)) in softplus form
    sum += sample_label(c) * detail::softplus(-zbar) +
           (1.0 - sample_label(c)) * detail::softplus(zbar);
  }
  return sum / static_cast<double>(k);
}

// Gradient touches only the argmax row of each column (ties to lowest index).
inline Matrix mil_loss_grad(const Logits& z, const Vector& sample_label) {
  const Eigen::Index k = z.cols();
  Matrix dz = Matrix::Zero(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index best = 0;
    double bv = z(0, c);
    for (Eigen::Index i = 1; i < z.rows(); ++i)
      if (z(i, c) > bv) {
        bv = z(i, c);
        best = i;
      }
    dz(best, c) = (detail::sigmoid(bv) - sample_label(c)) / static_cast<double>(k);
  }
  return dz;
}

// ---------------------------------------------------------------------------
// Siamese consistency: mean squared difference of row-softmaxed predictions
// between the original and augmented branches.
// ---------------------------------------------------------------------------

inline double siamese_loss(const Logits& za, const Logits& zb) {
  if (za.rows() != zb.rows() || za.cols() != zb.cols())
    throw ValidationError("siamese_loss: shape mismatch");
  Matrix diff = softmax_rows(za) - softmax_rows(zb);
  return diff.squaredNorm() / static_cast<double>(za.rows() * za.cols());
}

inline std::pair<Matrix, Matrix> siamese_loss_grad(const Logits& za, const Logits& zb) {
  if (za.rows() != zb.rows() || za.cols() != zb.cols())
    throw ValidationError("siamese_loss_grad: shape mismatch");
  const double scale = 2.0 / static_cast<double>(za.rows() * za.cols());
  Matrix pa = softmax_rows(za);
  Matrix pb = softmax_rows(zb);
  Matrix dza(za.rows(), za.cols());
  Matrix dzb(za.rows(), za.cols());
  for (Eigen::Index i = 0; i < za.rows(); ++i) {
    Eigen::RowVectorXd v = scale * (pa.row(i) - pb.row(i));
    // soft-max Jacobian applied to v: p .* (v - <v, p>)
    Eigen::RowVectorXd va = v - Eigen::RowVectorXd::Constant(v.size(), v.dot(pa.row(i)));
    Eigen::RowVectorXd vb = -v - Eigen::RowVectorXd::Constant(v.size(), -v.dot(pb.row(i)));
    dza.row(i) = pa.row(i).cwiseProduct(va);
    dzb.row(i) = pb.row(i).cwiseProduct(vb);
  }
  return {dza, dzb};
}

// ---------------------------------------------------------------------------
// Manifold smoothness: (2/||W||_0) tr(Z^T L Z) over raw logits. Equal to the
// pairwise form (1/||W||_0) sum_ij w_ij ||z_i - z_j||^2 for symmetric W.
// ---------------------------------------------------------------------------

inline double smooth_loss(const Logits& z, const AffinityGraph& graph) {
  if (graph.size() != static_cast<int>(z.rows()))
    throw ValidationError("smooth_loss: graph size does not match logits");
  if (graph.nnz == 0) {
    std::cerr << "warning: smooth_loss on an empty graph returns 0\n";
    return 0.0;
  }
  Matrix lz = graph.laplacian * z;
  double quad = (z.array() * lz.array()).sum();
  return 2.0 * quad / static_cast<double>(graph.nnz);
}

inline Matrix smooth_loss_grad(const Logits& z, const AffinityGraph& graph) {
  if (graph.nnz == 0) return Matrix::Zero(z.rows(), z.cols());
  Matrix lz = graph.laplacian * z;
  Matrix ltz = graph.laplacian.transpose() * z;
  return (2.0 / static_cast<double>(graph.nnz)) * (lz + ltz);
}

// ---------------------------------------------------------------------------
// Weighted total.
// ---------------------------------------------------------------------------

inline LossBreakdown total_loss(double seg, double mil, double sia, double smo,
                                const TrainConfig& config) {
  LossBreakdown b;
  b.seg = seg;
  b.mil = mil;
  b.sia = sia;
  b.smo = smo;
  b.total = seg + config.lambda_mil * mil + config.lambda_sia * sia + config.lambda_smo * smo;
  return b;
}

}  // namespace pointseg
