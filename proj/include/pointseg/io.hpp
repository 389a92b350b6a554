#pragma once

#include "pointseg/rng.hpp"
#include "pointseg/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace pointseg {

// ---------------------------------------------------------------------------
// Weak-label schemes
// ---------------------------------------------------------------------------

// Supervision regimes: one labelled point per present part, a uniform
// fraction of points, or everything.
struct MaskScheme {
  enum class Kind { OnePerCategory, FractionUniform, Full };
  Kind kind = Kind::Full;
  double fraction = 1.0;  // only meaningful for FractionUniform

  static MaskScheme one_per_category() { return {Kind::OnePerCategory, 0.0}; }
  static MaskScheme fraction_uniform(double p) {
    if (!(p > 0.0 && p <= 1.0))
      throw ValidationError("FractionUniform fraction must lie in (0,1]");
    return {Kind::FractionUniform, p};
  }
  static MaskScheme full() { return {Kind::Full, 1.0}; }
};

// Fixed-budget labelling strategy: x of the samples get y of their points
// labelled, the rest get nothing.
struct BudgetSplit {
  double sample_fraction = 1.0;  // x
  double point_fraction = 1.0;   // y

  void validate() const {
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
      throw ValidationError("budget split: sample fraction must lie in (0,1]");
    if (!(point_fraction > 0.0 && point_fraction <= 1.0))
      throw ValidationError("budget split: point fraction must lie in (0,1]");
  }
};

// ---------------------------------------------------------------------------
// Synthetic shapes
// ---------------------------------------------------------------------------

enum class ShapeFamily { Barbell, Table, Rocket };

inline const char* family_name(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::Barbell: return "barbell";
    case ShapeFamily::Table: return "table";
    case ShapeFamily::Rocket: return "rocket";
  }
  return "?";
}

inline ShapeFamily family_from_name(const std::string& s) {
  if (s == "barbell") return ShapeFamily::Barbell;
  if (s == "table") return ShapeFamily::Table;
  if (s == "rocket") return ShapeFamily::Rocket;
  throw ValidationError("unknown shape family: " + s);
}

inline int family_num_parts(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::Barbell: return 3;  // large sphere, shaft, small sphere
    case ShapeFamily::Table: return 2;    // top, legs
    case ShapeFamily::Rocket: return 3;   // body, nose, fins
  }
  return 0;
}

// All analytic surface constants are fixed per family so tests can verify
// zero-jitter points against the exact equations. Shapes are axis-aligned
// with z so XoY rotations and X/Y mirrors never change part semantics.
namespace shapes {
// barbell
constexpr double kBarbellSphereAZ = -0.85, kBarbellSphereAR = 0.42;
constexpr double kBarbellSphereBZ = 0.85, kBarbellSphereBR = 0.28;
constexpr double kBarbellShaftR = 0.12;
constexpr double kBarbellShaftZ0 = kBarbellSphereAZ + kBarbellSphereAR;
constexpr double kBarbellShaftZ1 = kBarbellSphereBZ - kBarbellSphereBR;
// table
constexpr double kTableTopZ = 0.5, kTableTopR = 0.7;
constexpr double kTableLegR = 0.06, kTableLegXY = 0.45;
constexpr double kTableLegZ0 = -0.5, kTableLegZ1 = 0.5;
// rocket
constexpr double kRocketBodyR = 0.25;
constexpr double kRocketBodyZ0 = -0.6, kRocketBodyZ1 = 0.5;
constexpr double kRocketNoseZ1 = 1.0;  // apex; cone shrinks linearly from body radius
constexpr double kRocketFinR0 = kRocketBodyR, kRocketFinR1 = 0.55;
constexpr double kRocketFinZ0 = -0.6, kRocketFinZ1 = -0.25;
constexpr int kRocketFinCount = 4;
}  // namespace shapes

struct SyntheticSpec {
  ShapeFamily family = ShapeFamily::Barbell;
  int points_per_shape = 256;
  int num_shapes = 1;
  double jitter_sigma = 0.01;
  std::uint64_t seed = 1;
  bool with_rgb = false;
  // Relative spread of per-shape geometry scales (radii, part positions).
  // 0 pins every shape to the family's exact analytic constants.
  double variation = 0.0;

  void validate() const {
    if (num_shapes < 1) throw ValidationError("num_shapes must be >= 1");
    if (points_per_shape < family_num_parts(family))
      throw ValidationError("points_per_shape is smaller than the number of parts");
    if (jitter_sigma < 0) throw ValidationError("jitter_sigma must be >= 0");
    if (variation < 0 || variation > 0.4)
      throw ValidationError("variation must lie in [0, 0.4]");
  }
};

namespace detail {

inline Eigen::RowVector3d sphere_point(Rng& rng, double cz, double r) {
  // uniform direction via normalized gaussian
  double x, y, z, n;
  do {
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    n = std::sqrt(x * x + y * y + z * z);
  } while (n < 1e-12);
  return {r * x / n, r * y / n, cz + r * z / n};
}

inline Eigen::RowVector3d cylinder_point(Rng& rng, double r, double z0, double z1) {
  double a = rng.uniform(0.0, 2.0 * M_PI);
  double z = rng.uniform(z0, z1);
  return {r * std::cos(a), r * std::sin(a), z};
}

inline Eigen::RowVector3d disk_point(Rng& rng, double radius, double z) {
  double rr = radius * std::sqrt(rng.uniform01());
  double a = rng.uniform(0.0, 2.0 * M_PI);
  return {rr * std::cos(a), rr * std::sin(a), z};
}

// Fractions per part; remainder goes to part 0. Every part gets >= 1 point.
inline std::vector<int> part_counts(int n, const std::vector<double>& fractions) {
  const int parts = static_cast<int>(fractions.size());
  std::vector<int> counts(static_cast<std::size_t>(parts), 0);
  int assigned = 0;
  for (int p = 1; p < parts; ++p) {
    int c = std::max(1, static_cast<int>(std::lround(fractions[static_cast<std::size_t>(p)] * n)));
    counts[static_cast<std::size_t>(p)] = c;
    assigned += c;
  }
  counts[0] = n - assigned;
  if (counts[0] < 1) {  // tiny n: rebalance one point per part
    for (int p = 0; p < parts; ++p) counts[static_cast<std::size_t>(p)] = 1;
    int left = n - parts;
    counts[0] += left;
  }
  return counts;
}

}  // namespace detail

// Per-shape geometry; at variation 0 it equals the family constants exactly.
struct ShapeGeometry {
  double bar_az, bar_ar, bar_bz, bar_br, bar_shaft_r, bar_shaft_z0, bar_shaft_z1;
  double tab_top_z, tab_top_r, tab_leg_r, tab_leg_xy, tab_leg_z0, tab_leg_z1;
  double rk_body_r, rk_body_z0, rk_body_z1, rk_nose_z1, rk_fin_r1, rk_fin_z0, rk_fin_z1;
};

inline ShapeGeometry draw_geometry(double variation, Rng& rng) {
  using namespace shapes;
  auto scale = [&](double base) { return base * (1.0 + variation * rng.uniform(-1.0, 1.0)); };
  ShapeGeometry g;
  g.bar_az = scale(kBarbellSphereAZ);
  g.bar_ar = scale(kBarbellSphereAR);
  g.bar_bz = scale(kBarbellSphereBZ);
  g.bar_br = scale(kBarbellSphereBR);
  g.bar_shaft_r = scale(kBarbellShaftR);
  g.bar_shaft_z0 = g.bar_az + g.bar_ar;
  g.bar_shaft_z1 = g.bar_bz - g.bar_br;
  g.tab_top_z = scale(kTableTopZ);
  g.tab_top_r = scale(kTableTopR);
  g.tab_leg_r = scale(kTableLegR);
  g.tab_leg_xy = scale(kTableLegXY);
  g.tab_leg_z0 = scale(kTableLegZ0);
  g.tab_leg_z1 = g.tab_top_z;
  g.rk_body_r = scale(kRocketBodyR);
  g.rk_body_z0 = scale(kRocketBodyZ0);
  g.rk_body_z1 = scale(kRocketBodyZ1);
  g.rk_nose_z1 = g.rk_body_z1 + scale(kRocketNoseZ1 - kRocketBodyZ1);
  g.rk_fin_r1 = scale(kRocketFinR1);
  g.rk_fin_z0 = g.rk_body_z0;
  g.rk_fin_z1 = scale(kRocketFinZ1);
  return g;
}

// Generates one shape; points are grouped by part, labels follow membership.
inline PointCloud generate_shape(ShapeFamily family, int n, double jitter_sigma,
                                 bool with_rgb, double variation, Rng& rng) {
  using namespace shapes;
  const int parts = family_num_parts(family);
  std::vector<double> fractions;
  switch (family) {
    case ShapeFamily::Barbell: fractions = {0.40, 0.32, 0.28}; break;
    case ShapeFamily::Table: fractions = {0.55, 0.45}; break;
    case ShapeFamily::Rocket: fractions = {0.45, 0.30, 0.25}; break;
  }
  const std::vector<int> counts = detail::part_counts(n, fractions);
  const ShapeGeometry geom = draw_geometry(variation, rng);

  PointCloud cloud;
  cloud.xyz.resize(n, 3);
  cloud.labels.resize(static_cast<std::size_t>(n));
  cloud.num_classes = parts;

  int row = 0;
  for (int part = 0; part < parts; ++part) {
    for (int j = 0; j < counts[static_cast<std::size_t>(part)]; ++j, ++row) {
      Eigen::RowVector3d p;
      switch (family) {
        case ShapeFamily::Barbell:
          if (part == 0) p = detail::sphere_point(rng, geom.bar_az, geom.bar_ar);
          else if (part == 1) p = detail::cylinder_point(rng, geom.bar_shaft_r, geom.bar_shaft_z0, geom.bar_shaft_z1);
          else p = detail::sphere_point(rng, geom.bar_bz, geom.bar_br);
          break;
        case ShapeFamily::Table:
          if (part == 0) {
            p = detail::disk_point(rng, geom.tab_top_r, geom.tab_top_z);
          } else {
            int leg = static_cast<int>(rng.uniform_int(4));
            double sx = (leg & 1) ? 1.0 : -1.0;
            double sy = (leg & 2) ? 1.0 : -1.0;
            Eigen::RowVector3d q =
                detail::cylinder_point(rng, geom.tab_leg_r, geom.tab_leg_z0, geom.tab_leg_z1);
            p = {q.x() + sx * geom.tab_leg_xy, q.y() + sy * geom.tab_leg_xy, q.z()};
          }
          break;
        case ShapeFamily::Rocket:
          if (part == 0) {
            p = detail::cylinder_point(rng, geom.rk_body_r, geom.rk_body_z0, geom.rk_body_z1);
          } else if (part == 1) {
            // cone lateral surface, radius shrinks linearly to the apex
            double z = rng.uniform(geom.rk_body_z1, geom.rk_nose_z1);
            double r = geom.rk_body_r * (geom.rk_nose_z1 - z) / (geom.rk_nose_z1 - geom.rk_body_z1);
            double a = rng.uniform(0.0, 2.0 * M_PI);
            p = {r * std::cos(a), r * std::sin(a), z};
          } else {
            int fin = static_cast<int>(rng.uniform_int(kRocketFinCount));
            double a = fin * (2.0 * M_PI / kRocketFinCount);
            double rr = rng.uniform(geom.rk_body_r, geom.rk_fin_r1);
            double z = rng.uniform(geom.rk_fin_z0, geom.rk_fin_z1);
            p = {rr * std::cos(a), rr * std::sin(a), z};
          }
          break;
      }
      cloud.xyz.row(row) = p;
      cloud.labels[static_cast<std::size_t>(row)] = part;
    }
  }

  if (with_rgb) {
    static const double base[3][3] = {{0.9, 0.2, 0.2}, {0.2, 0.9, 0.2}, {0.2, 0.2, 0.9}};
    Matrix rgb(n, 3);
    for (int i = 0; i < n; ++i) {
      int part = cloud.labels[static_cast<std::size_t>(i)];
      for (int c = 0; c < 3; ++c) {
        double v = base[part][c] + rng.uniform(-0.05, 0.05);
        rgb(i, c) = std::clamp(v, 0.0, 1.0);
      }
    }
    cloud.rgb = rgb;
  }

  if (jitter_sigma > 0) {
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) cloud.xyz(i, c) += jitter_sigma * rng.normal();
  }
  return cloud;
}

// B clouds, deterministic in spec.seed; per-shape streams are derived from
// (seed, shape index) so shapes may be generated in parallel.
inline std::vector<PointCloud> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<PointCloud> out;
  out.reserve(static_cast<std::size_t>(spec.num_shapes));
  for (int b = 0; b < spec.num_shapes; ++b) {
    Rng rng = derive_rng(spec.seed, {rng_tag::kShape, static_cast<std::uint64_t>(b)});
    out.push_back(generate_shape(spec.family, spec.points_per_shape, spec.jitter_sigma,
                                 spec.with_rgb, spec.variation, rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mask sampling
// ---------------------------------------------------------------------------

inline LabelMask sample_mask(const PointCloud& cloud, const MaskScheme& scheme,
                             std::uint64_t seed) {
  const int n = cloud.size();
  Rng rng = derive_rng(seed, {rng_tag::kMask});
  switch (scheme.kind) {
    case MaskScheme::Kind::Full:
      return LabelMask::full(n);
    case MaskScheme::Kind::OnePerCategory: {
      std::vector<int> chosen;
      for (int label = 0; label < cloud.num_classes; ++label) {
        std::vector<int> members;
        for (int i = 0; i < n; ++i)
          if (cloud.labels[static_cast<std::size_t>(i)] == label) members.push_back(i);
        if (members.empty()) continue;  // absent part: nothing to label
        chosen.push_back(members[rng.uniform_int(members.size())]);
      }
      return LabelMask::from_indices(n, chosen);
    }
    case MaskScheme::Kind::FractionUniform: {
      int count = std::max(1, static_cast<int>(std::lround(scheme.fraction * n)));
      return LabelMask::from_indices(n, rng.sample_without_replacement(n, count));
    }
  }
  throw ValidationError("unreachable mask scheme");
}

// round(x*B) clouds get FractionUniform(y) masks, the rest get empty masks.
inline std::vector<LabelMask> split_budget(const std::vector<PointCloud>& dataset,
                                           const BudgetSplit& split, std::uint64_t seed) {
  split.validate();
  if (dataset.empty()) throw ValidationError("split_budget: empty dataset");
  const int b = static_cast<int>(dataset.size());
  const int labelled = static_cast<int>(std::lround(split.sample_fraction * b));
  if (labelled < 1)
    throw ValidationError("split_budget: sample fraction selects zero clouds");

  Rng rng = derive_rng(seed, {rng_tag::kBudget});
  std::vector<int> chosen = rng.sample_without_replacement(b, labelled);
  std::vector<std::uint8_t> is_chosen(static_cast<std::size_t>(b), 0);
  for (int i : chosen) is_chosen[static_cast<std::size_t>(i)] = 1;

  std::vector<LabelMask> masks;
  masks.reserve(dataset.size());
  for (int i = 0; i < b; ++i) {
    if (is_chosen[static_cast<std::size_t>(i)]) {
      std::uint64_t cloud_seed = derive_seed(seed, {rng_tag::kBudget, static_cast<std::uint64_t>(i)});
      masks.push_back(sample_mask(dataset[static_cast<std::size_t>(i)],
                                  MaskScheme::fraction_uniform(split.point_fraction), cloud_seed));
    } else {
      masks.push_back(LabelMask::none(dataset[static_cast<std::size_t>(i)].size()));
    }
  }
  return masks;
}

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------
//
// Point cloud file: line 1 is "N F K" with F in {3,6}; then N lines of
// F reals followed by one integer label. Label -1 marks "unknown" and is
// accepted only when allow_unknown is set (prediction files).

namespace detail {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void save_cloud(const PointCloud& cloud, const std::string& path) {
  const int n = cloud.size();
  const int f = cloud.feature_count();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << n << ' ' << f << ' ' << cloud.num_classes << '\n';
  for (int i = 0; i < n; ++i) {
    out << detail::format_real(cloud.xyz(i, 0)) << ' ' << detail::format_real(cloud.xyz(i, 1))
        << ' ' << detail::format_real(cloud.xyz(i, 2));
    if (cloud.rgb)
      out << ' ' << detail::format_real((*cloud.rgb)(i, 0)) << ' '
          << detail::format_real((*cloud.rgb)(i, 1)) << ' '
          << detail::format_real((*cloud.rgb)(i, 2));
    out << ' ' << cloud.labels[static_cast<std::size_t>(i)] << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline PointCloud load_cloud(const std::string& path, bool allow_unknown = false) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ":1: missing header");
  long n = 0, f = 0, k = 0;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> n >> f >> k) || (hs >> extra))
      throw ValidationError(path + ":1: header must be 'N F K'");
  }
  if (n < 1) throw ValidationError(path + ":1: N must be >= 1");
  if (f != 3 && f != 6) throw ValidationError(path + ":1: F must be 3 or 6");
  if (k < 1) throw ValidationError(path + ":1: K must be >= 1");

  PointCloud cloud;
  cloud.num_classes = static_cast<int>(k);
  cloud.xyz.resize(n, 3);
  if (f == 6) cloud.rgb = Matrix(n, 3);
  cloud.labels.resize(static_cast<std::size_t>(n));

  long row = 0;
  long lineno = 1;
  while (row < n) {
    if (!std::getline(in, line))
      throw ValidationError(path + ": expected " + std::to_string(n) + " rows, got " +
                            std::to_string(row));
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;  // blank
    std::istringstream ls(line);
    double vals[6];
    std::string tok;
    for (long c = 0; c < f; ++c) {
      if (!(ls >> tok))
        throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(f) + " reals and a label");
      std::size_t used = 0;
      try {
        vals[c] = std::stod(tok, &used);  // stod accepts nan/inf tokens
      } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": bad real '" + tok + "'");
      }
      if (used != tok.size())
        throw ValidationError(path + ":" + std::to_string(lineno) + ": bad real '" + tok + "'");
      if (!std::isfinite(vals[c]))
        throw ValidationError(path + ":" + std::to_string(lineno) + ": non-finite value");
    }
    long label;
    std::string extra;
    if (!(ls >> label) || (ls >> extra))
      throw ValidationError(path + ":" + std::to_string(lineno) + ": wrong column count");
    if (label < (allow_unknown ? -1 : 0) || label >= k)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": label out of range");
    cloud.xyz(row, 0) = vals[0];
    cloud.xyz(row, 1) = vals[1];
    cloud.xyz(row, 2) = vals[2];
    if (f == 6) {
      (*cloud.rgb)(row, 0) = vals[3];
      (*cloud.rgb)(row, 1) = vals[4];
      (*cloud.rgb)(row, 2) = vals[5];
    }
    cloud.labels[static_cast<std::size_t>(row)] = static_cast<int>(label);
    ++row;
  }
  return cloud;
}

// Logits file: "N K" header, then N rows of K reals.
inline void save_logits(const Logits& z, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << z.rows() << ' ' << z.cols() << '\n';
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      out << (j ? " " : "") << detail::format_real(z(i, j));
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Logits load_logits(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  long n = 0, k = 0;
  if (!(in >> n >> k) || n < 1 || k < 1)
    throw ValidationError(path + ":1: header must be 'N K'");
  Logits z(n, k);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < k; ++j) {
      double v;
      if (!(in >> v))
        throw ValidationError(path + ": truncated at row " + std::to_string(i + 2));
      if (!std::isfinite(v))
        throw ValidationError(path + ": non-finite value at row " + std::to_string(i + 2));
      z(i, j) = v;
    }
  return z;
}

// ---------------------------------------------------------------------------
// Datasets on disk: a directory of cloud files plus manifest.txt whose lines
// are "<filename> <family>".
// ---------------------------------------------------------------------------

struct Dataset {
  std::vector<PointCloud> clouds;
  std::vector<std::string> names;
  std::vector<std::string> categories;

  std::size_t size() const { return clouds.size(); }
};

inline void save_dataset(const std::vector<PointCloud>& clouds, const std::string& family,
                         const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw IoError("cannot write manifest in " + dir);
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "cloud_%04zu.txt", i);
    save_cloud(clouds[i], (fs::path(dir) / name).string());
    manifest << name << ' ' << family << '\n';
  }
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw IoError("missing manifest.txt in " + dir);
  Dataset ds;
  std::string name, family;
  while (manifest >> name >> family) {
    ds.clouds.push_back(load_cloud((fs::path(dir) / name).string()));
    ds.names.push_back(name);
    ds.categories.push_back(family);
  }
  if (ds.clouds.empty()) throw ValidationError("empty manifest in " + dir);
  return ds;
}

}  // namespace pointseg
