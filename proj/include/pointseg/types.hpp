#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pointseg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// N x K per-point class scores produced by the encoder.
using Logits = Eigen::MatrixXd;

// Bad inputs (shape mismatches, out-of-range values, malformed files).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failures (non-finite losses, linear systems that stay singular).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One sample: N points with xyz, optional rgb in [0,1], and per-point labels.
struct PointCloud {
  Matrix xyz;                  // N x 3
  std::optional<Matrix> rgb;   // N x 3, same N as xyz when present
  std::vector<int> labels;     // N values in {0..K-1}
  int num_classes = 0;

  int size() const { return static_cast<int>(xyz.rows()); }
  bool has_rgb() const { return rgb.has_value(); }
  int feature_count() const { return has_rgb() ? 6 : 3; }

  // xyz, or [xyz rgb] when color is present.
  Matrix features() const {
    if (!has_rgb()) return xyz;
    Matrix f(xyz.rows(), 6);
    f << xyz, *rgb;
    return f;
  }

  void validate() const {
    const int n = size();
    if (n < 1) throw ValidationError("point cloud must contain at least one point");
    if (xyz.cols() != 3) throw ValidationError("xyz must have 3 columns");
    if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
    if (static_cast<int>(labels.size()) != n)
      throw ValidationError("labels length does not match point count");
    if (!xyz.allFinite()) throw ValidationError("xyz contains non-finite values");
    if (rgb) {
      if (rgb->rows() != n || rgb->cols() != 3)
        throw ValidationError("rgb shape does not match xyz");
      if (!rgb->allFinite()) throw ValidationError("rgb contains non-finite values");
    }
    for (int i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)] < 0 ||
          labels[static_cast<std::size_t>(i)] >= num_classes)
        throw ValidationError("label out of range at point " + std::to_string(i));
    }
  }
};

// Binary supervision mask M with C = ||M||_1 set bits.
struct LabelMask {
  std::vector<std::uint8_t> flags;
  int count = 0;

  int size() const { return static_cast<int>(flags.size()); }
  bool is_set(int i) const { return flags[static_cast<std::size_t>(i)] != 0; }

  static LabelMask from_flags(std::vector<std::uint8_t> f) {
    LabelMask m;
    m.count = 0;
    for (std::uint8_t v : f) m.count += (v != 0) ? 1 : 0;
    m.flags = std::move(f);
    return m;
  }

  static LabelMask full(int n) {
    return from_flags(std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1));
  }

  static LabelMask none(int n) {
    return from_flags(std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));
  }

  static LabelMask from_indices(int n, const std::vector<int>& indices) {
    std::vector<std::uint8_t> f(static_cast<std::size_t>(n), 0);
    for (int i : indices) {
      if (i < 0 || i >= n) throw ValidationError("mask index out of range");
      f[static_cast<std::size_t>(i)] = 1;
    }
    return from_flags(std::move(f));
  }
};

// Rows one-hot encode labels; row i carries a single 1 at column labels[i].
inline Matrix one_hot(const std::vector<int>& labels, int num_classes) {
  if (num_classes < 1) throw ValidationError("one_hot: K must be >= 1");
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw ValidationError("one_hot: label out of range at index " + std::to_string(i));
    y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return y;
}

// Every hyperparameter of a run; the seed fully determines all random draws.
struct TrainConfig {
  int k = 10;                 // k-nn neighbor count
  double eta = 1e3;           // graph bandwidth
  double gamma = 1.0;         // propagation fidelity weight
  double lambda_mil = 1.0;
  double lambda_sia = 1.0;
  double lambda_smo = 1.0;
  double lr = 1e-3;
  int epochs_stage1 = 60;
  int epochs_stage2 = 60;
  int batch_size = 8;
  std::uint64_t seed = 1;
  std::vector<int> encoder_dims = {64, 64, 128, 128};
  bool seg_on_augmented = false;  // also supervise the augmented branch
  double prop_tol = 1e-8;         // relative residual for label propagation

  // Link constraints applied to stage-2 training graphs. Must-link entries
  // keep the Laplacian PSD; the full mode adds must-not-link (-1) entries,
  // whose unbounded-below quadratic can destabilize long SGD runs.
  enum class TrainConstraints { MustLinkOnly, Full, None };
  TrainConstraints train_constraints = TrainConstraints::MustLinkOnly;

  void validate() const {
    if (k < 1) throw ValidationError("config: k must be >= 1");
    if (eta <= 0) throw ValidationError("config: eta must be > 0");
    if (gamma <= 0) throw ValidationError("config: gamma must be > 0");
    if (lambda_mil < 0 || lambda_sia < 0 || lambda_smo < 0)
      throw ValidationError("config: lambdas must be >= 0");
    if (lr < 0) throw ValidationError("config: lr must be >= 0");
    if (epochs_stage1 < 0 || epochs_stage2 < 0)
      throw ValidationError("config: epochs must be >= 0");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (encoder_dims.size() != 4)
      throw ValidationError("config: encoder_dims must list 4 widths");
    for (int d : encoder_dims)
      if (d < 1) throw ValidationError("config: encoder widths must be >= 1");
    if (prop_tol <= 0) throw ValidationError("config: prop_tol must be > 0");
  }
};

}  // namespace pointseg
