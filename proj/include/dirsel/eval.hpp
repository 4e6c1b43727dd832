#ifndef DIRSEL_EVAL_HPP
#define DIRSEL_EVAL_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dirsel/dataset.hpp"
#include "dirsel/graph_learner.hpp"
#include "dirsel/matrix.hpp"

namespace dirsel {

// Downstream scores for one selection/graph under one split. Accuracies live
// in [0,1]; the rmse is nonnegative. metadata carries free-form context
// (method, dataset, hyperparameters) for report files.
struct EvalReport {
  double clustering_acc = 0.0;
  double classification_acc = 0.0;
  double reconstruction_rmse = 0.0;
  double graph_inter_class_edge_fraction = 0.0;
  std::map<std::string, std::string> metadata;
};

// Best-of-restarts Lloyd iteration with k-means++ seeding; deterministic per
// seed. A cluster that empties is reseeded from the point farthest to its
// centroid. Capped at 300 iterations or a relative WCSS change of 1e-6.
std::vector<int> kmeans(const Matrix& x, std::size_t c, std::uint64_t seed,
                        std::size_t restarts = 10);

// Within-cluster sum of squares for given labels (centroids are class means).
double wcss(const Matrix& x, const std::vector<int>& labels);

// Maximum-accuracy bijective matching between predicted and true class ids,
// found with the assignment (Hungarian) algorithm on the confusion matrix.
double hungarian_align(const std::vector<int>& pred, const std::vector<int>& truth);

// Majority vote over the k nearest training rows (Euclidean, distance ties by
// lowest row index, vote ties by smallest label). Returns test accuracy.
double knn_classify(const Dataset& train, const Dataset& test, std::size_t k = 1);

// Trains a one-hidden-layer ReLU regressor from the selected columns to all
// columns (hidden = ceil(hidden_mult * m), Adam lr 1e-3, 500 epochs, weights
// N(0, 1/fan_in)); returns sqrt(sum ||x_i - xhat_i||^2 / (n d)) on test.
double reconstruction_rmse(const Dataset& train, const Dataset& test,
                           const std::vector<std::size_t>& selected, double hidden_mult = 1.5,
                           std::uint64_t seed = 0);

// k-means in the embedding spanned by the c eigenvectors of the Laplacian
// with smallest eigenvalues.
std::vector<int> spectral_clustering(const SimilarityGraph& g, std::size_t c,
                                     std::uint64_t seed);

// Features ranked by increasing Dirichlet energy on a heat-kernel graph built
// from all features; the front of the ranking is the smoothest feature.
std::vector<std::size_t> laplacian_score_rank(const Dataset& data, double sigma, std::size_t k);

// Weighted fraction of symmetrized edge mass joining different classes.
// A graph with no edge mass at all scores 0.
double inter_class_edge_fraction(const SimilarityGraph& g, const std::vector<int>& labels);

}  // namespace dirsel

#endif  // DIRSEL_EVAL_HPP
