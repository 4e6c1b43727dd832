#ifndef DIRSEL_TRAIN_HPP
#define DIRSEL_TRAIN_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dirsel/autodiff.hpp"
#include "dirsel/dataset.hpp"
#include "dirsel/graph_learner.hpp"
#include "dirsel/matrix.hpp"
#include "dirsel/selector.hpp"

namespace dirsel {

// Which part of the pipeline to switch off, if any.
enum class Ablation { none, no_ufs, fixed_heat_graph };

Ablation ablation_from_string(const std::string& name);
std::string to_string(Ablation ablation);

struct TrainConfig {
  std::size_t m = 2;           // selected feature count
  std::size_t k = 5;           // neighbors per row
  double gamma = 0.1;          // entropy weight of the transport subproblem
  std::size_t zeta = 200;      // scaling iterations per row
  double lr = 1e-2;            // Adam learning rate
  std::size_t epochs = 1000;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::none;
  double heat_sigma = 1.0;     // bandwidth of the fixed-graph ablation
  std::size_t log_every = 100; // progress cadence for front ends; 0 = silent
  double epsilon = 1e-4;       // Gram regularizer of the selector
  double t0 = 10.0;            // initial softmax temperature
  double t_min = 0.01;         // final softmax temperature
};

// Throws ConfigError naming the offending field.
void validate(const TrainConfig& cfg, const Dataset& data);

GraphLearnerConfig graph_config(const TrainConfig& cfg);

// Standard Adam with bias correction. Moments are lazily sized on first use.
struct AdamState {
  Matrix first;
  Matrix second;
  std::size_t step = 0;
};

void adam_step(Matrix& params, const Matrix& grad, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// One full forward pass on the tape: selector -> orthogonalization ->
// projected features -> learned graph -> smoothness objective. The returned
// Var is the 1x1 loss; gradients reach theta both through the projected
// features and through the graph weights. When cfg.ablation is
// fixed_heat_graph, `fixed_laplacian` must point at the precomputed Laplacian.
ad::Var loss_forward(ad::Tape& tape, const Matrix& x, const ad::Var& theta,
                     const Matrix& gumbel, double temperature, const TrainConfig& cfg,
                     std::size_t epoch, const Matrix* fixed_laplacian = nullptr);

struct TrainReport {
  TrainConfig config;
  std::vector<double> loss_trace;  // one entry per epoch
  HardSelection selection;         // argmax of the cooled noise-free selector
  SimilarityGraph hard_graph;      // exact-sort graph on the selected columns
  double wall_seconds = 0.0;       // measured, never serialized
};

TrainReport train(const Dataset& data, const TrainConfig& cfg);

// Columns of x at the selected indices (duplicates allowed).
Matrix select_columns(const Matrix& x, const std::vector<std::size_t>& indices);

}  // namespace dirsel

#endif  // DIRSEL_TRAIN_HPP
