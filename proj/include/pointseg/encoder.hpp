#pragma once

#include "pointseg/rng.hpp"
#include "pointseg/types.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace pointseg {

// Shared-weight point encoder:
//   per-point trunk  F -> d0 -> d1 -> d2   (ReLU after every layer)
//   global max-pool over points of the d2 feature
//   per-point head   [d1 feature, pooled] -> d3 -> K  (ReLU, then linear)
// Point order never matters: every per-point op is shared and the pool is
// symmetric. Inputs are standardized (centroid removed, scaled by the max
// radius) before the first layer; rgb channels pass through unchanged.

struct EncoderLayer {
  Matrix w;  // out x in
  Vector b;  // out
};

struct EncoderParams {
  std::vector<EncoderLayer> layers;  // trunk 0..2, head 3..4
  int input_dim = 0;
  int num_classes = 0;
  std::vector<int> dims;  // {d0, d1, d2, d3}

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
  }

  Vector flatten() const {
    Vector v(param_count());
    std::int64_t at = 0;
    for (const auto& l : layers) {
      for (Eigen::Index i = 0; i < l.w.rows(); ++i)
        for (Eigen::Index j = 0; j < l.w.cols(); ++j) v(at++) = l.w(i, j);
      for (Eigen::Index i = 0; i < l.b.size(); ++i) v(at++) = l.b(i);
    }
    return v;
  }

  void set_from_flat(const Vector& v) {
    if (v.size() != param_count())
      throw ValidationError("set_from_flat: wrong parameter count");
    std::int64_t at = 0;
    for (auto& l : layers) {
      for (Eigen::Index i = 0; i < l.w.rows(); ++i)
        for (Eigen::Index j = 0; j < l.w.cols(); ++j) l.w(i, j) = v(at++);
      for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = v(at++);
    }
  }

  // theta += scale * other, layer by layer.
  void add_scaled(const EncoderParams& other, double scale) {
    if (other.layers.size() != layers.size())
      throw ValidationError("add_scaled: layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].w += scale * other.layers[i].w;
      layers[i].b += scale * other.layers[i].b;
    }
  }

  void set_zero() {
    for (auto& l : layers) {
      l.w.setZero();
      l.b.setZero();
    }
  }
};

// Gradients share the parameter layout.
using EncoderGrads = EncoderParams;

inline EncoderParams zeros_like(const EncoderParams& p) {
  EncoderParams g = p;
  g.set_zero();
  return g;
}

// Uniform init scaled by fan-in/fan-out: w ~ U(-a, a), a = sqrt(6/(in+out));
// biases start at zero. Deterministic in the seed.
inline EncoderParams init_params(std::uint64_t seed, int input_dim, int num_classes,
                                 const std::vector<int>& dims = {64, 64, 128, 128}) {
  if (input_dim != 3 && input_dim != 6)
    throw ValidationError("init_params: input dim must be 3 or 6");
  if (num_classes < 1) throw ValidationError("init_params: K must be >= 1");
  if (dims.size() != 4) throw ValidationError("init_params: dims must list 4 widths");

  const int d0 = dims[0], d1 = dims[1], d2 = dims[2], d3 = dims[3];
  std::vector<std::pair<int, int>> shapes = {
      {d0, input_dim}, {d1, d0}, {d2, d1}, {d3, d1 + d2}, {num_classes, d3}};

  Rng rng = derive_rng(seed, {rng_tag::kInit});
  EncoderParams p;
  p.input_dim = input_dim;
  p.num_classes = num_classes;
  p.dims = dims;
  for (auto [out, in] : shapes) {
    EncoderLayer layer;
    layer.w.resize(out, in);
    const double a = std::sqrt(6.0 / (in + out));
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) layer.w(i, j) = rng.uniform(-a, a);
    layer.b = Vector::Zero(out);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

// Subtract the xyz centroid and divide by the max radius; rgb is appended
// unchanged. Stands in for batch normalization, which is omitted to keep
// runs bit-reproducible.
inline Matrix standardize_features(const PointCloud& cloud) {
  Matrix f = cloud.features();
  Eigen::RowVector3d centroid = f.leftCols(3).colwise().mean();
  f.leftCols(3).rowwise() -= centroid;
  double radius = f.leftCols(3).rowwise().norm().maxCoeff();
  if (radius > 0) f.leftCols(3) /= radius;
  return f;
}

// Forward intermediates required by backward(): pre-activations, post-ReLU
// features and the pool argmax per pooled channel.
struct Tape {
  Matrix x;            // N x F standardized input
  Matrix a1, h1;       // N x d0
  Matrix a2, h2;       // N x d1
  Matrix a3, h3;       // N x d2
  std::vector<int> pool_argmax;  // d2 entries
  Vector pooled;       // d2
  Matrix u;            // N x (d1 + d2)
  Matrix a4, h4;       // N x d3
  Logits z;            // N x K
  bool valid = false;
};

inline Logits forward(const EncoderParams& params, const PointCloud& cloud,
                      Tape* tape = nullptr) {
  if (cloud.feature_count() != params.input_dim)
    throw ValidationError("forward: cloud feature count does not match encoder input dim");

  const Matrix x = standardize_features(cloud);
  const int n = static_cast<int>(x.rows());
  const auto relu = [](const Matrix& m) { return m.cwiseMax(0.0); };

  Matrix a1 = (x * params.layers[0].w.transpose()).rowwise() + params.layers[0].b.transpose();
  Matrix h1 = relu(a1);
  Matrix a2 = (h1 * params.layers[1].w.transpose()).rowwise() + params.layers[1].b.transpose();
  Matrix h2 = relu(a2);
  Matrix a3 = (h2 * params.layers[2].w.transpose()).rowwise() + params.layers[2].b.transpose();
  Matrix h3 = relu(a3);

  const int d2 = static_cast<int>(h3.cols());
  Vector pooled(d2);
  std::vector<int> argmax(static_cast<std::size_t>(d2), 0);
  for (int c = 0; c < d2; ++c) {
    int best = 0;
    double bv = h3(0, c);
    for (int i = 1; i < n; ++i)
      if (h3(i, c) > bv) {  // strict: ties keep the lowest index
        bv = h3(i, c);
        best = i;
      }
    pooled(c) = bv;
    argmax[static_cast<std::size_t>(c)] = best;
  }

  Matrix u(n, h2.cols() + d2);
  u << h2, pooled.transpose().replicate(n, 1);
  Matrix a4 = (u * params.layers[3].w.transpose()).rowwise() + params.layers[3].b.transpose();
  Matrix h4 = relu(a4);
  Logits z = (h4 * params.layers[4].w.transpose()).rowwise() + params.layers[4].b.transpose();

  if (tape) {
    tape->x = x;
    tape->a1 = std::move(a1);
    tape->h1 = std::move(h1);
    tape->a2 = std::move(a2);
    tape->h2 = std::move(h2);
    tape->a3 = std::move(a3);
    tape->h3 = std::move(h3);
    tape->pool_argmax = std::move(argmax);
    tape->pooled = std::move(pooled);
    tape->u = std::move(u);
    tape->a4 = std::move(a4);
    tape->h4 = std::move(h4);
    tape->z = z;
    tape->valid = true;
  }
  return z;
}

// Chain rule from dL/dZ back to dL/dTheta. The max-pool routes each pooled
// channel's gradient to its recorded argmax point; the ReLU subgradient is
// zero at the kink.
inline EncoderGrads backward(const EncoderParams& params, const Tape& tape, const Matrix& dz) {
  if (!tape.valid) throw ValidationError("backward: tape has no recorded forward pass");
  if (dz.rows() != tape.z.rows() || dz.cols() != tape.z.cols())
    throw ValidationError("backward: seed gradient shape mismatch");

  EncoderGrads g = zeros_like(params);
  const auto relu_mask = [](const Matrix& a) { return (a.array() > 0.0).cast<double>().matrix(); };

  // head linear layer
  g.layers[4].w = dz.transpose() * tape.h4;
  g.layers[4].b = dz.colwise().sum().transpose();
  Matrix dh4 = dz * params.layers[4].w;

  Matrix da4 = dh4.cwiseProduct(relu_mask(tape.a4));
  g.layers[3].w = da4.transpose() * tape.u;
  g.layers[3].b = da4.colwise().sum().transpose();
  Matrix du = da4 * params.layers[3].w;

  const int d1 = static_cast<int>(tape.h2.cols());
  const int d2 = static_cast<int>(tape.h3.cols());
  Matrix dh2 = du.leftCols(d1);
  Vector dpooled = du.rightCols(d2).colwise().sum().transpose();

  Matrix dh3 = Matrix::Zero(tape.h3.rows(), d2);
  for (int c = 0; c < d2; ++c)
    dh3(tape.pool_argmax[static_cast<std::size_t>(c)], c) = dpooled(c);

  Matrix da3 = dh3.cwiseProduct(relu_mask(tape.a3));
  g.layers[2].w = da3.transpose() * tape.h2;
  g.layers[2].b = da3.colwise().sum().transpose();
  dh2 += da3 * params.layers[2].w;

  Matrix da2 = dh2.cwiseProduct(relu_mask(tape.a2));
  g.layers[1].w = da2.transpose() * tape.h1;
  g.layers[1].b = da2.colwise().sum().transpose();
  Matrix dh1 = da2 * params.layers[1].w;

  Matrix da1 = dh1.cwiseProduct(relu_mask(tape.a1));
  g.layers[0].w = da1.transpose() * tape.x;
  g.layers[0].b = da1.colwise().sum().transpose();
  return g;
}

// theta <- theta - lr * g, elementwise.
inline void sgd_step(EncoderParams& params, const EncoderGrads& grads, double lr) {
  params.add_scaled(grads, -lr);
}

// ---------------------------------------------------------------------------
// Checkpoints: text header (widths, F, K, seed) plus the flat parameter list
// at 17 significant digits, which round-trips doubles exactly.
// ---------------------------------------------------------------------------

inline void save_checkpoint(const EncoderParams& params, std::uint64_t seed,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "pointseg-checkpoint 1\n";
  out << params.input_dim << ' ' << params.num_classes;
  for (int d : params.dims) out << ' ' << d;
  out << ' ' << seed << '\n';
  Vector flat = params.flatten();
  char buf[40];
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", flat(i));
    out << buf << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline EncoderParams load_checkpoint(const std::string& path, std::uint64_t* seed_out = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "pointseg-checkpoint" || version != 1)
    throw ValidationError(path + ": not a checkpoint file");
  int f = 0, k = 0;
  std::vector<int> dims(4, 0);
  std::uint64_t seed = 0;
  if (!(in >> f >> k >> dims[0] >> dims[1] >> dims[2] >> dims[3] >> seed))
    throw ValidationError(path + ": malformed checkpoint header");
  EncoderParams p = init_params(seed, f, k, dims);
  Vector flat(p.param_count());
  for (Eigen::Index i = 0; i < flat.size(); ++i)
    if (!(in >> flat(i)))
      throw ValidationError(path + ": truncated parameter list");
  p.set_from_flat(flat);
  if (seed_out) *seed_out = seed;
  return p;
}

}  // namespace pointseg
