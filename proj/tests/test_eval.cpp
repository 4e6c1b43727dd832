#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <vector>

#include "dirsel/dataset.hpp"
#include "dirsel/errors.hpp"
#include "dirsel/eval.hpp"
#include "dirsel/graph_learner.hpp"
#include "dirsel/matrix.hpp"
#include "dirsel/rng.hpp"
#include "dirsel/train.hpp"
#include "doctest.h"

using namespace dirsel;

namespace {

// Reference alignment: enumerate every bijective class matching and keep the
// best accuracy. Exponential, so only usable for small class counts; the
// production algorithm is checked against this.
double brute_force_align(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::vector<int> pred_ids(pred), truth_ids(truth);
  std::sort(pred_ids.begin(), pred_ids.end());
  pred_ids.erase(std::unique(pred_ids.begin(), pred_ids.end()), pred_ids.end());
  std::sort(truth_ids.begin(), truth_ids.end());
  truth_ids.erase(std::unique(truth_ids.begin(), truth_ids.end()), truth_ids.end());

  const std::size_t s = std::max(pred_ids.size(), truth_ids.size());
  std::vector<std::size_t> perm(s);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t matched = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const std::size_t a = static_cast<std::size_t>(
          std::lower_bound(pred_ids.begin(), pred_ids.end(), pred[i]) - pred_ids.begin());
      const std::size_t b = static_cast<std::size_t>(
          std::lower_bound(truth_ids.begin(), truth_ids.end(), truth[i]) - truth_ids.begin());
      if (perm[a] == b) matched += 1;
    }
    best = std::max(best, matched);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

Matrix column_matrix(const std::vector<double>& values) {
  Matrix out(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) out(i, 0) = values[i];
  return out;
}

Dataset subset_features(const Dataset& d, const std::vector<std::size_t>& cols) {
  Dataset out;
  out.x = select_columns(d.x, cols);
  out.labels = d.labels;
  return out;
}

// Two internally connected triangles with no edge between them.
SimilarityGraph two_component_graph() {
  const std::size_t n = 6;
  SimilarityGraph g;
  g.s = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if ((i < 3) == (j < 3)) g.s(i, j) = 1.0;
    }
  }
  g.s_hat = Matrix(n, n);
  g.laplacian = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      g.s_hat(i, j) = 0.5 * (g.s(i, j) + g.s(j, i));
      degree += g.s_hat(i, j);
    }
    g.laplacian(i, i) = degree;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) g.laplacian(i, j) -= g.s_hat(i, j);
    }
  }
  return g;
}

std::vector<int> random_labels(std::size_t n, int classes, CounterRng& rng) {
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<int>(rng.next_below(classes));
  return out;
}

}  // namespace

TEST_CASE("alignment matches the brute-force oracle on random labelings") {
  CounterRng rng("test.align_oracle", 0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 8 + rng.next_below(20);
    const int cp = 2 + static_cast<int>(rng.next_below(3));  // 2..4 predicted classes
    const int ct = 2 + static_cast<int>(rng.next_below(3));
    std::vector<int> pred = random_labels(n, cp, rng);
    std::vector<int> truth = random_labels(n, ct, rng);
    CHECK(hungarian_align(pred, truth) == doctest::Approx(brute_force_align(pred, truth))
                                              .epsilon(1e-12));
  }
}

TEST_CASE("alignment handles the documented examples") {
  // Renaming classes cannot change the aligned accuracy.
  const std::vector<int> truth = {0, 0, 1, 1, 2, 2};
  const std::vector<int> renamed = {2, 2, 0, 0, 1, 1};
  CHECK(hungarian_align(renamed, truth) == doctest::Approx(1.0));

  // Confusion [[10,0,0],[0,0,10],[0,10,0]]: rows 1 and 2 are swapped columns.
  std::vector<int> pred, labels;
  for (int i = 0; i < 10; ++i) {
    pred.push_back(0);
    labels.push_back(0);
  }
  for (int i = 0; i < 10; ++i) {
    pred.push_back(1);
    labels.push_back(2);
  }
  for (int i = 0; i < 10; ++i) {
    pred.push_back(2);
    labels.push_back(1);
  }
  CHECK(hungarian_align(pred, labels) == doctest::Approx(1.0));

  CHECK_THROWS_AS(hungarian_align({0, 1}, {0}), ShapeError);
}

TEST_CASE("alignment of uniform random predictions sits near chance") {
  CounterRng rng("test.align_chance", 1);
  const std::size_t n = 1000;
  std::vector<int> truth(n), pred = random_labels(n, 2, rng);
  for (std::size_t i = 0; i < n; ++i) truth[i] = static_cast<int>(i % 2);
  const double acc = hungarian_align(pred, truth);
  CHECK(acc >= 0.45);
  CHECK(acc <= 0.55);
}

TEST_CASE("alignment is invariant to relabeling the predictions") {
  CounterRng rng("test.align_perm", 2);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 10 + rng.next_below(30);
    std::vector<int> pred = random_labels(n, 3, rng);
    std::vector<int> truth = random_labels(n, 3, rng);
    std::vector<int> remap = {1, 2, 0};
    std::vector<int> renamed(n);
    for (std::size_t i = 0; i < n; ++i) renamed[i] = remap[pred[i]];
    CHECK(hungarian_align(pred, truth) ==
          doctest::Approx(hungarian_align(renamed, truth)).epsilon(1e-12));
  }
}

TEST_CASE("kmeans separates two obvious 1-D groups") {
  const Matrix x = column_matrix({0.0, 0.1, 10.0, 10.1});
  const std::vector<int> labels = kmeans(x, 2, 0);
  CHECK(labels[0] == labels[1]);
  CHECK(labels[2] == labels[3]);
  CHECK(labels[0] != labels[2]);
}

TEST_CASE("kmeans degenerate cluster counts") {
  const Matrix x = column_matrix({3.0, -1.0, 7.0, 2.0, 5.0});
  const std::vector<int> one = kmeans(x, 1, 0);
  for (int l : one) CHECK(l == one[0]);

  const std::vector<int> all = kmeans(x, x.rows(), 0);
  CHECK(wcss(x, all) == doctest::Approx(0.0).epsilon(1e-15));

  CHECK_THROWS_AS(kmeans(x, 0, 0), ConfigError);
  CHECK_THROWS_AS(kmeans(x, 6, 0), ConfigError);
}

TEST_CASE("kmeans survives duplicate points outnumbering clusters") {
  const Matrix x = column_matrix({0.0, 0.0, 0.0, 10.0});
  const std::vector<int> labels = kmeans(x, 3, 0);
  REQUIRE(labels.size() == 4);
  for (int l : labels) {
    CHECK(l >= 0);
    CHECK(l < 3);
  }
  CHECK(labels[0] == labels[1]);
  CHECK(labels[1] == labels[2]);
  CHECK(labels[0] != labels[3]);
  CHECK(wcss(x, labels) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("kmeans is deterministic per seed") {
  const Dataset data = standardize(gen_synthetic(SyntheticKind::blobs, 60, 9));
  const std::vector<int> a = kmeans(data.x, 2, 42);
  const std::vector<int> b = kmeans(data.x, 2, 42);
  CHECK(a == b);
}

TEST_CASE("nearest neighbour vote follows the hand example") {
  Dataset train;
  train.x = column_matrix({0.0, 0.2, 1.0, 1.1, 1.2});
  train.labels = {0, 0, 1, 1, 1};
  Dataset test;
  test.x = column_matrix({0.5});
  test.labels = {0};

  // k=3 nearest of 0.5: 0.2, then the tie 0.0 / 1.0 resolved by index.
  CHECK(knn_classify(train, test, 3) == doctest::Approx(1.0));
  // k=5 lets the three far 1-labels outvote the two 0-labels.
  CHECK(knn_classify(train, test, 5) == doctest::Approx(0.0));
  // A test point sitting exactly on a training point takes its label.
  Dataset exact;
  exact.x = column_matrix({1.1});
  exact.labels = {1};
  CHECK(knn_classify(train, exact, 1) == doctest::Approx(1.0));

  CHECK_THROWS_AS(knn_classify(train, test, 0), ConfigError);
  CHECK_THROWS_AS(knn_classify(train, test, 6), ConfigError);
}

TEST_CASE("planted features classify blobs while noise features guess") {
  const Dataset data = standardize(gen_synthetic(SyntheticKind::blobs, 200, 4));
  const auto [train, test] = train_test_split(data, 0.8, 4);
  const double informative =
      knn_classify(subset_features(train, {0, 1}), subset_features(test, {0, 1}), 1);
  const double distractor =
      knn_classify(subset_features(train, {5, 11}), subset_features(test, {5, 11}), 1);
  CHECK(informative >= 0.95);
  CHECK(distractor >= 0.35);
  CHECK(distractor <= 0.65);
}

TEST_CASE("reconstruction of linearly generated data is near-exact") {
  // Six columns spanned by two latent factors; the identity map is
  // representable, so the regressor should drive the error toward zero.
  CounterRng rng("test.recon_linear", 0);
  const std::size_t n = 120, d = 6;
  Matrix latent(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    latent(i, 0) = rng.next_gaussian();
    latent(i, 1) = rng.next_gaussian();
  }
  Matrix mix(2, d);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < d; ++j) mix(i, j) = 2.0 * rng.next_uniform() - 1.0;
  }
  Dataset full;
  full.x = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      full.x(i, j) = 0.3 * (latent(i, 0) * mix(0, j) + latent(i, 1) * mix(1, j));
    }
  }
  const auto [train, test] = train_test_split(full, 0.67, 0);

  std::vector<std::size_t> all(d);
  std::iota(all.begin(), all.end(), 0);
  const double rmse_all = reconstruction_rmse(train, test, all);
  CHECK(rmse_all < 0.05);

  // The bar must mean something: the fit beats predicting all zeros by far.
  double sq = 0.0;
  for (std::size_t i = 0; i < test.n(); ++i) {
    for (std::size_t j = 0; j < d; ++j) sq += test.x(i, j) * test.x(i, j);
  }
  const double zero_baseline = std::sqrt(sq / (static_cast<double>(test.n()) * d));
  CHECK(rmse_all < zero_baseline / 3.0);

  // Any proper subset can only do worse on this fixed instance.
  const double rmse_one = reconstruction_rmse(train, test, {0});
  CHECK(rmse_all <= rmse_one);
}

TEST_CASE("reconstruction error ignores sample order") {
  const Dataset data = standardize(gen_synthetic(SyntheticKind::blobs, 60, 6));
  const auto [train, test] = train_test_split(data, 0.7, 6);
  const double base = reconstruction_rmse(train, test, {0, 1});

  Dataset shuffled = test;
  const std::size_t n = test.n();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = n - 1 - i;
    for (std::size_t j = 0; j < test.d(); ++j) shuffled.x(i, j) = test.x(src, j);
    shuffled.labels[i] = test.labels[src];
  }
  CHECK(reconstruction_rmse(train, shuffled, {0, 1}) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("pure-noise targets stay near unit error for any features") {
  CounterRng rng("test.recon_noise", 3);
  const std::size_t n = 150, d = 8;
  Dataset noise;
  noise.x = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) noise.x(i, j) = rng.next_gaussian();
  }
  const auto [train, test] = train_test_split(noise, 0.67, 1);
  const double a = reconstruction_rmse(train, test, {0});
  const double b = reconstruction_rmse(train, test, {3, 5});
  CHECK(a >= 0.85);
  CHECK(a <= 1.2);
  CHECK(b >= 0.85);
  CHECK(b <= 1.2);
  CHECK(std::fabs(a - b) < 0.1);
}

TEST_CASE("spectral clustering recovers disconnected components exactly") {
  const SimilarityGraph g = two_component_graph();
  const std::vector<int> labels = spectral_clustering(g, 2, 0);
  const std::vector<int> truth = {0, 0, 0, 1, 1, 1};
  CHECK(hungarian_align(labels, truth) == doctest::Approx(1.0));
}

TEST_CASE("spectral clustering on the learned graph beats the noisy heat graph") {
  // The evaluated object is the learned (soft) graph: its small spread-out
  // weights keep each blob connected, whereas the exported hard limit can
  // splinter a blob into sub-components and leave the c-eigenvector
  // embedding underdetermined.
  const Dataset data = standardize(gen_synthetic(SyntheticKind::blobs, 120, 3));
  GraphLearnerConfig gcfg;
  gcfg.k = 5;

  const SimilarityGraph learned = assemble_graph(select_columns(data.x, {0, 1}), gcfg);
  const double acc_learned =
      hungarian_align(spectral_clustering(learned, 2, 7), data.labels);
  CHECK(acc_learned >= 0.95);

  const SimilarityGraph heat = heat_kernel_graph(data.x, 1.0, gcfg.k);
  const double acc_heat = hungarian_align(spectral_clustering(heat, 2, 7), data.labels);
  CHECK(acc_learned > acc_heat);
}

TEST_CASE("laplacian score prefers smooth features on a clean graph") {
  // Three coherent functions of one latent line coordinate plus one i.i.d.
  // noise column; the manifold dominates the 2-NN geometry.
  CounterRng rng("test.ls_clean", 0);
  const std::size_t n = 40;
  Dataset data;
  data.x = Matrix(n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    data.x(i, 0) = t;
    data.x(i, 1) = t * t;
    data.x(i, 2) = std::sin(3.0 * t);
    data.x(i, 3) = rng.next_gaussian();
  }
  const Dataset std_data = standardize(data);
  const std::vector<std::size_t> rank = laplacian_score_rank(std_data, 1.0, 2);
  const auto pos = [&](std::size_t feature) {
    return static_cast<std::size_t>(
        std::find(rank.begin(), rank.end(), feature) - rank.begin());
  };
  CHECK(pos(0) < pos(3));
  CHECK(rank == laplacian_score_rank(std_data, 1.0, 2));  // deterministic
}

TEST_CASE("laplacian score misses planted circle features on noisy graphs") {
  int misses = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset data = standardize(gen_synthetic(SyntheticKind::circles, 100, seed));
    const std::vector<std::size_t> rank = laplacian_score_rank(data, 1.0, 5);
    const std::set<std::size_t> top2 = {rank[0], rank[1]};
    if (top2 != std::set<std::size_t>{0, 1}) ++misses;
  }
  CHECK(misses >= 5);
}

TEST_CASE("inter-class edge fraction on a hand-built graph") {
  SimilarityGraph g;
  g.s_hat = Matrix(3, 3);
  g.s_hat(0, 1) = g.s_hat(1, 0) = 2.0;  // within class 0
  g.s_hat(0, 2) = g.s_hat(2, 0) = 1.0;  // across
  g.s_hat(1, 2) = g.s_hat(2, 1) = 3.0;  // across
  const std::vector<int> labels = {0, 0, 1};
  CHECK(inter_class_edge_fraction(g, labels) == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  CHECK_THROWS_AS(inter_class_edge_fraction(g, {0, 1}), ShapeError);

  SimilarityGraph empty;
  empty.s_hat = Matrix(3, 3);
  CHECK(inter_class_edge_fraction(empty, labels) == 0.0);
}

TEST_CASE("report defaults are in range") {
  EvalReport report;
  CHECK(report.clustering_acc >= 0.0);
  CHECK(report.clustering_acc <= 1.0);
  CHECK(report.classification_acc >= 0.0);
  CHECK(report.classification_acc <= 1.0);
  CHECK(report.reconstruction_rmse >= 0.0);
  CHECK(report.metadata.empty());
}
