#include <catch2/catch.hpp>

#include "pointseg/baselines.hpp"
#include "oracles.hpp"

#include <Eigen/Eigenvalues>

using namespace pointseg;

namespace {

// two tight blobs far apart in 2-d feature space
std::pair<Matrix, std::vector<int>> separated_blobs(int per_blob, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(2 * per_blob, 2);
  std::vector<int> labels(static_cast<std::size_t>(2 * per_blob));
  for (int i = 0; i < per_blob; ++i) {
    x(i, 0) = rng.uniform(-1.0, 1.0);
    x(i, 1) = rng.uniform(-1.0, 1.0);
    labels[static_cast<std::size_t>(i)] = 0;
    x(per_blob + i, 0) = 100.0 + rng.uniform(-1.0, 1.0);
    x(per_blob + i, 1) = 100.0 + rng.uniform(-1.0, 1.0);
    labels[static_cast<std::size_t>(per_blob + i)] = 1;
  }
  return {x, labels};
}

AffinityGraph two_cliques(int clique_size) {
  const int n = 2 * clique_size;
  SparseMatrix w(n, n);
  for (int block = 0; block < 2; ++block)
    for (int i = 0; i < clique_size; ++i)
      for (int j = 0; j < clique_size; ++j) {
        if (i == j) continue;
        w.insert(block * clique_size + i, block * clique_size + j) = 1.0;
      }
  return AffinityGraph::from_weights(std::move(w));
}

}  // namespace

TEST_CASE("kmeans separates well-separated blobs exactly", "[baselines]") {
  auto [x, labels] = separated_blobs(20, 3);
  Clustering clus = kmeans(x, 2, 17);
  REQUIRE(oracles::purity(clus.assignment, labels, 2) == 1.0);
}

TEST_CASE("kmeans with one cluster returns the mean centroid", "[baselines]") {
  Matrix x = Matrix::Random(12, 3);
  Clustering clus = kmeans(x, 1, 5);
  for (int v : clus.assignment) REQUIRE(v == 0);
  REQUIRE(kmeans_objective(x, clus) ==
          Approx((x.rowwise() - x.colwise().mean()).squaredNorm()).margin(1e-10));
}

TEST_CASE("kmeans objective is non-increasing over iterations", "[baselines]") {
  PointCloud c = oracles::random_cloud(60, 3, 8);
  Matrix x = c.xyz;
  double previous = std::numeric_limits<double>::infinity();
  for (int iters = 1; iters <= 6; ++iters) {
    Clustering clus = kmeans(x, 4, 23, iters);
    double obj = kmeans_objective(x, clus);
    REQUIRE(obj <= previous + 1e-12);
    previous = obj;
  }
}

TEST_CASE("kmeans is deterministic in the seed and validates K", "[baselines]") {
  Matrix x = Matrix::Random(30, 3);
  REQUIRE(kmeans(x, 3, 9).assignment == kmeans(x, 3, 9).assignment);
  REQUIRE_THROWS_AS(kmeans(x, 31, 9), ValidationError);
}

TEST_CASE("ncut recovers two disconnected cliques exactly", "[baselines]") {
  AffinityGraph g = two_cliques(8);
  std::vector<int> truth(16, 0);
  for (int i = 8; i < 16; ++i) truth[static_cast<std::size_t>(i)] = 1;
  Clustering clus = ncut(g, 2, 7);
  REQUIRE(oracles::purity(clus.assignment, truth, 2) == 1.0);
  REQUIRE(clus.assignment == ncut(g, 2, 7).assignment);  // deterministic
}

TEST_CASE("ncut with K=1 puts everything together", "[baselines]") {
  AffinityGraph g = two_cliques(4);
  Clustering clus = ncut(g, 1, 3);
  for (int v : clus.assignment) REQUIRE(v == 0);
}

TEST_CASE("normalized laplacian eigenvalues live in [0,2]", "[baselines]") {
  PointCloud c = oracles::random_cloud(40, 3, 12);
  GraphParams params;
  params.k = 6;
  AffinityGraph g = knn_weights(c, params);

  Matrix lsym = Matrix::Identity(40, 40);
  for (int j = 0; j < g.weights.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(g.weights, j); it; ++it)
      lsym(it.row(), it.col()) -=
          it.value() / std::sqrt(g.degrees(it.row()) * g.degrees(it.col()));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(lsym);
  REQUIRE(eig.eigenvalues().minCoeff() > -1e-8);
  REQUIRE(eig.eigenvalues().maxCoeff() < 2.0 + 1e-8);

  // the spectral embedding rows normalize to unit length
  Matrix embedding = eig.eigenvectors().leftCols(3);
  for (int i = 0; i < embedding.rows(); ++i) {
    double norm = embedding.row(i).norm();
    REQUIRE(norm > 1e-12);
    REQUIRE((embedding.row(i) / norm).norm() == Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("ncut assigns isolated vertices by raw-feature fallback", "[baselines]") {
  // clique pair plus one vertex with no edges at all
  const int n = 9;
  SparseMatrix w(n, n);
  for (int block = 0; block < 2; ++block)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        if (i == j) continue;
        w.insert(block * 4 + i, block * 4 + j) = 1.0;
      }
  AffinityGraph g = AffinityGraph::from_weights(std::move(w));
  REQUIRE(g.degrees(8) == 0.0);

  Matrix features(n, 1);
  features << 0, 0, 0, 0, 10, 10, 10, 10, 9.5;  // straggler sits near the second clique
  Clustering clus = ncut(g, 2, 5, features);
  REQUIRE(clus.assignment[8] == clus.assignment[4]);
  REQUIRE(clus.assignment[0] != clus.assignment[4]);
}

TEST_CASE("ncut rejects negative weights and oversized K", "[baselines]") {
  SparseMatrix w(3, 3);
  w.insert(0, 1) = -1.0;
  w.insert(1, 0) = -1.0;
  AffinityGraph g = AffinityGraph::from_weights(std::move(w));
  REQUIRE_THROWS_AS(ncut(g, 2, 1), ValidationError);
  REQUIRE_THROWS_AS(ncut(two_cliques(2), 5, 1), ValidationError);
}
