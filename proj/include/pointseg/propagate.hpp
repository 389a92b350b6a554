#pragma once

#include "pointseg/graph.hpp"
#include "pointseg/types.hpp"

#include <Eigen/LU>
#include <Eigen/SparseLU>

#include <cmath>
#include <iostream>
#include <vector>

namespace pointseg {

// Refined logits plus argmax predictions from solving
//   min  tr(Z~^T L Z~) + gamma ||Z~ - Z||_F^2
// whose stationarity condition is (gamma I + L) Z~ = gamma Z.
struct PropagationResult {
  Logits refined;
  std::vector<int> predicted;
  double residual = 0.0;     // worst relative column residual
  bool ridge_applied = false;
  double gamma_used = 0.0;
};

namespace detail {

// Plain conjugate gradient; A must be symmetric positive definite.
inline bool conjugate_gradient(const SparseMatrix& a, const Vector& rhs, Vector& x,
                               double tol, int max_iters) {
  x = Vector::Zero(rhs.size());
  Vector r = rhs;
  Vector p = r;
  double rs = r.squaredNorm();
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return true;
  const double target = tol * rhs_norm;
  for (int it = 0; it < max_iters; ++it) {
    if (std::sqrt(rs) <= target) return true;
    Vector ap = a * p;
    double pap = p.dot(ap);
    if (pap <= 0.0 || !std::isfinite(pap)) return false;  // lost positive definiteness
    double alpha = rs / pap;
    x += alpha * p;
    r -= alpha * ap;
    double rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  return std::sqrt(rs) <= target;
}

inline SparseMatrix shifted_system(const AffinityGraph& graph, double gamma) {
  const int n = graph.size();
  SparseMatrix eye(n, n);
  eye.setIdentity();
  SparseMatrix a = graph.laplacian + gamma * eye;
  a.makeCompressed();
  return a;
}

inline double laplacian_inf_norm(const AffinityGraph& graph) {
  Vector row_abs = Vector::Zero(graph.size());
  for (int j = 0; j < graph.laplacian.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(graph.laplacian, j); it; ++it)
      row_abs(it.row()) += std::abs(it.value());
  return graph.size() ? row_abs.maxCoeff() : 0.0;
}

// Solves (gamma I + L) x = gamma z column-by-column. CG on unconstrained
// graphs (SPD system); sparse LU once must-not-link entries may have made L
// indefinite. Returns the worst relative residual, or NaN on failure.
inline double solve_columns(const AffinityGraph& graph, const Logits& z, double gamma,
                            double tol, int max_iters, Logits& out) {
  const SparseMatrix a = shifted_system(graph, gamma);
  out.resize(z.rows(), z.cols());
  double worst = 0.0;

  Eigen::SparseLU<SparseMatrix> lu;
  if (graph.has_negative) {
    lu.compute(a);
    if (lu.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  }

  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    Vector rhs = gamma * z.col(c);
    Vector x;
    if (graph.has_negative) {
      x = lu.solve(rhs);
    } else if (!conjugate_gradient(a, rhs, x, tol, max_iters)) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    double rhs_norm = rhs.norm();
    double res = (a * x - rhs).norm();
    double rel = (rhs_norm > 0) ? res / rhs_norm : res;
    if (!std::isfinite(rel) || rel > tol) return std::numeric_limits<double>::quiet_NaN();
    worst = std::max(worst, rel);
    out.col(c) = x;
  }
  return worst;
}

}  // namespace detail

inline PropagationResult propagate(const Logits& z, const AffinityGraph& graph, double gamma,
                                   double tol = 1e-8, int max_iters = -1) {
  if (graph.size() != static_cast<int>(z.rows()))
    throw ValidationError("propagate: graph size does not match logits");
  if (gamma <= 0) throw ValidationError("propagate: gamma must be > 0");
  if (max_iters < 0) max_iters = 10 * static_cast<int>(z.rows());

  PropagationResult result;
  result.gamma_used = gamma;
  double residual = detail::solve_columns(graph, z, gamma, tol, max_iters, result.refined);
  if (!std::isfinite(residual)) {
    // near-singular shift: retry with a small ridge on gamma
    double ridge = gamma + 1e-8 * detail::laplacian_inf_norm(graph);
    std::cerr << "warning: propagate retrying with ridge gamma=" << ridge << "\n";
    residual = detail::solve_columns(graph, z, ridge, tol, max_iters, result.refined);
    if (!std::isfinite(residual))
      throw SolverError("propagate: linear solve failed even with ridge adjustment");
    result.ridge_applied = true;
    result.gamma_used = ridge;
  }
  result.residual = residual;

  result.predicted.resize(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < z.cols(); ++k)
      if (result.refined(i, k) > result.refined(i, best)) best = k;
    result.predicted[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return result;
}

// Dense reference: forms (gamma I + L) explicitly and LU-solves. Test oracle
// for the iterative path; quadratic memory, so desk scale only.
inline Logits propagate_dense_oracle(const Logits& z, const AffinityGraph& graph, double gamma) {
  const int n = graph.size();
  if (n > 2000) throw ValidationError("propagate_dense_oracle: N too large for dense solve");
  if (n != static_cast<int>(z.rows()))
    throw ValidationError("propagate_dense_oracle: graph size does not match logits");
  Matrix a = Matrix(graph.laplacian) + gamma * Matrix::Identity(n, n);
  Eigen::PartialPivLU<Matrix> lu(a);
  Matrix solved = lu.solve(gamma * z);
  double check = (a * solved - gamma * z).norm();
  double scale = (gamma * z).norm();
  if (!(check <= 1e-6 * std::max(scale, 1.0)))
    throw SolverError("propagate_dense_oracle: singular system");
  return solved;
}

}  // namespace pointseg
