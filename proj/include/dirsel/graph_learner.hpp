#pragma once

#include <cstddef>
#include <vector>

#include "dirsel/autodiff.hpp"
#include "dirsel/matrix.hpp"

namespace dirsel {

struct GraphLearnerConfig {
  std::size_t k = 5;        // neighbors per row
  double gamma = 0.1;       // entropy weight of the regularized transport problem
  std::size_t zeta = 200;   // Bregman iteration count
  bool rescale_rows = true; // divide each distance row by its off-diagonal max
  double diag_mask = 1e6;   // self-distance replacement, applied after rescaling
};

// k >= 1, k + 2 <= n (the leftover target needs mass), gamma > 0, zeta >= 1.
void validate(const GraphLearnerConfig& cfg, std::size_t n);

struct TransportPlan {
  Matrix gamma_matrix;  // n x (k+2), nonnegative
};

// delta: soft membership of the k smallest entries; xi: soft indicator of the
// (k+1)-th smallest. Hard variants are 0/1 with exactly k ones and one-hot xi.
struct SelectorPair {
  std::vector<double> delta;
  std::vector<double> xi;
};

struct SimilarityGraph {
  Matrix s;          // n x n, zero diagonal
  Matrix s_hat;      // (s + s^T) / 2
  Matrix laplacian;  // diag(rowsum(s_hat)) - s_hat
};

// Row i of the squared-distance matrix with the self entry replaced by
// diag_mask; when rescale_rows is set, real entries are first divided by the
// row's off-diagonal maximum so they land in [0,1]. An all-equal row (zero
// spread) raises DegenerateRowError.
std::vector<double> distance_row(const Matrix& e, std::size_t i, const GraphLearnerConfig& cfg);

// Transport costs against the integer supports 0..k+1: cost(i,j) = (e_i - j)^2.
Matrix build_cost(const std::vector<double>& e_row, std::size_t k);

// Entropy-regularized transport plan between e-row mass (1/n each) and the
// supports 0..k+1 (1/n each for the first k+1, the rest pooled on the last).
// Scaling iterations run in the log domain, which tolerates gamma down to
// 1e-3 and below; the result equals the textbook u/v iteration in exact
// arithmetic, u initialized to 1/(k+2).
TransportPlan sinkhorn_bregman(const Matrix& cost, std::size_t k, double gamma, std::size_t zeta);

// delta = n * (sum of the first k plan columns); xi = n * column k (0-based).
SelectorPair extract_selectors(const TransportPlan& plan, std::size_t k);

// Exact sorting-based selectors; ties broken by lowest index.
SelectorPair exact_knn_row(const std::vector<double>& e_row, std::size_t k);

// Closed-form row weights s_j = ((e.xi - e_j) / (k e.xi - e.delta))_+ .
// Denominator at or below 1e-12 (all k+1 nearest equidistant) raises
// DegenerateRowError carrying row_hint.
std::vector<double> graph_row_weights(const std::vector<double>& e_row, const SelectorPair& sel,
                                      std::size_t k, std::size_t row_hint = 0);

// Per-row pipeline distance_row -> build_cost -> sinkhorn_bregman ->
// extract_selectors -> graph_row_weights over all rows of x_hat.
SimilarityGraph assemble_graph(const Matrix& x_hat, const GraphLearnerConfig& cfg);

// Same assembly with exact_knn_row selectors (the export/inference path).
SimilarityGraph assemble_graph_hard(const Matrix& x_hat, const GraphLearnerConfig& cfg);

// tr(V^T L V); nonnegative for PSD L.
double dirichlet_energy(const Matrix& laplacian, const Matrix& v);

// Heat-kernel similarities exp(-dist^2 / (2 sigma^2)), sparsified to the k
// nearest neighbors per row (zero diagonal), then symmetrized. Rows are not
// normalized.
SimilarityGraph heat_kernel_graph(const Matrix& x, double sigma, std::size_t k);

// Tape-recorded pairwise squared distances r 1^T + 1 r^T - 2 X X^T.
ad::Var pairwise_sq_dists_on_tape(ad::Tape& tape, const ad::Var& x_hat);

// Fused transport-plan node: input is a masked (and rescaled) distance row
// (1 x n), output the n x (k+2) plan. Forward runs the plain u/v iteration on
// K = exp(-(C - per-row min C) / gamma); backward replays all zeta iterations
// in reverse, so the gradient is exactly that of the unrolled loop. Non-finite
// iterates raise NumericError suggesting a larger gamma.
ad::Var sinkhorn_plan_on_tape(ad::Tape& tape, const ad::Var& e_row, const GraphLearnerConfig& cfg);

// Full soft graph on the tape from a pairwise squared-distance matrix:
// per-row mask/rescale, transport plan, soft selectors, closed-form weights,
// rows stacked into the n x n similarity matrix.
ad::Var soft_similarity_on_tape(ad::Tape& tape, const ad::Var& e_full,
                                const GraphLearnerConfig& cfg);

}  // namespace dirsel
