#include "dirsel/train.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <utility>

#include "dirsel/errors.hpp"
#include "dirsel/rng.hpp"

namespace dirsel {

using ad::Tape;
using ad::Var;

Ablation ablation_from_string(const std::string& name) {
  if (name == "none") return Ablation::none;
  if (name == "no_ufs") return Ablation::no_ufs;
  if (name == "fixed_heat_graph") return Ablation::fixed_heat_graph;
  throw ConfigError("ablation: unknown value '" + name +
                    "' (expected none, no_ufs, or fixed_heat_graph)");
}

std::string to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::none: return "none";
    case Ablation::no_ufs: return "no_ufs";
    case Ablation::fixed_heat_graph: return "fixed_heat_graph";
  }
  throw ConfigError("ablation: unrepresentable value");
}

void validate(const TrainConfig& cfg, const Dataset& data) {
  if (data.n() == 0 || data.d() == 0) throw EmptyDatasetError("training data is empty");
  if (cfg.m < 1) throw ConfigError("m: must be at least 1");
  if (cfg.m > data.d()) {
    throw ConfigError("m: cannot select " + std::to_string(cfg.m) + " features out of " +
                      std::to_string(data.d()));
  }
  validate(graph_config(cfg), data.n());
  // lr = 0 is allowed on purpose: a frozen run is the cheapest way to audit
  // initialization and reporting without touching the optimizer.
  if (!(cfg.lr >= 0.0)) throw ConfigError("lr: must be nonnegative");
  if (cfg.epochs < 1) throw ConfigError("epochs: must be at least 1");
  if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon: must be positive");
  if (!(cfg.t_min > 0.0)) throw ConfigError("t_min: must be positive");
  if (!(cfg.t0 >= cfg.t_min)) throw ConfigError("t0: must be at least t_min");
  if (cfg.ablation == Ablation::fixed_heat_graph && !(cfg.heat_sigma > 0.0)) {
    throw ConfigError("heat_sigma: must be positive");
  }
}

GraphLearnerConfig graph_config(const TrainConfig& cfg) {
  GraphLearnerConfig gcfg;
  gcfg.k = cfg.k;
  gcfg.gamma = cfg.gamma;
  gcfg.zeta = cfg.zeta;
  return gcfg;
}

void adam_step(Matrix& params, const Matrix& grad, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  if (grad.rows() != params.rows() || grad.cols() != params.cols()) {
    throw ShapeError("adam_step: gradient shape does not match parameters");
  }
  if (state.step == 0) {
    state.first = Matrix(params.rows(), params.cols());
    state.second = Matrix(params.rows(), params.cols());
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  const std::size_t total = params.rows() * params.cols();
  double* p = params.data();
  const double* g = grad.data();
  double* m = state.first.data();
  double* v = state.second.data();
  for (std::size_t i = 0; i < total; ++i) {
    if (!std::isfinite(g[i])) {
      throw NumericError("adam_step: non-finite gradient at flat index " + std::to_string(i));
    }
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

Var loss_forward(Tape& tape, const Matrix& x, const Var& theta, const Matrix& gumbel,
                 double temperature, const TrainConfig& cfg, std::size_t epoch,
                 const Matrix* fixed_laplacian) {
  const Var f_hat = soft_selection(tape, theta, gumbel, temperature);
  const Var f = cfg.ablation == Ablation::no_ufs
                    ? f_hat
                    : orthogonalize_practical(tape, f_hat, cfg.epsilon);
  const Var x_hat = ad::matmul(tape.constant(x), f);

  if (cfg.ablation == Ablation::fixed_heat_graph) {
    if (fixed_laplacian == nullptr) {
      throw ConfigError("ablation: fixed_heat_graph requires a precomputed Laplacian");
    }
    return ad::quad_form_trace(x_hat, tape.constant(*fixed_laplacian));
  }

  const Var e = pairwise_sq_dists_on_tape(tape, x_hat);
  Var s;
  try {
    s = soft_similarity_on_tape(tape, e, graph_config(cfg));
  } catch (const DegenerateRowError& err) {
    const std::string prefix = "degenerate distance row " + std::to_string(err.row()) + ": ";
    std::string detail = err.what();
    if (detail.rfind(prefix, 0) == 0) detail = detail.substr(prefix.size());
    throw DegenerateRowError(err.row(), detail + " (epoch " + std::to_string(epoch) + ")");
  }
  // tr(Xhat^T L Xhat) = 1/2 sum_ij S_ij E_ij because E is symmetric with a
  // zero diagonal; this form keeps the tape free of an explicit Laplacian.
  return ad::smul(ad::sum_all(ad::mul(s, e)), 0.5);
}

Matrix select_columns(const Matrix& x, const std::vector<std::size_t>& indices) {
  Matrix out(x.rows(), indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= x.cols()) throw ShapeError("select_columns: index out of range");
    for (std::size_t i = 0; i < x.rows(); ++i) out(i, j) = x(i, indices[j]);
  }
  return out;
}

namespace {

HardSelection final_selection(const Matrix& theta, const TrainConfig& cfg) {
  Tape tape;
  const Var theta_var = tape.constant(theta);
  const Matrix no_noise(theta.rows(), theta.cols(), 0.0);
  const Var f_hat = soft_selection(tape, theta_var, no_noise, cfg.t_min);
  return hard_selection(f_hat.value());
}

}  // namespace

TrainReport train(const Dataset& data, const TrainConfig& cfg) {
  validate(cfg, data);
  const auto started = std::chrono::steady_clock::now();
  const Matrix& x = data.x;
  const std::size_t d = x.cols();

  CounterRng theta_rng("train.theta", cfg.seed);
  Matrix theta(d, cfg.m);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < cfg.m; ++j) theta(i, j) = 0.01 * theta_rng.next_gaussian();
  }

  Matrix fixed_laplacian;
  const Matrix* fixed_ptr = nullptr;
  if (cfg.ablation == Ablation::fixed_heat_graph) {
    fixed_laplacian = heat_kernel_graph(x, cfg.heat_sigma, cfg.k).laplacian;
    fixed_ptr = &fixed_laplacian;
  }

  AdamState adam;
  TrainReport report;
  report.config = cfg;
  report.loss_trace.reserve(cfg.epochs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double temperature = anneal_temperature(epoch, cfg.epochs, cfg.t0, cfg.t_min);
    // One fresh stream per epoch keeps every draw addressable by (seed, epoch)
    // regardless of matrix sizes, so traces replay bit-for-bit.
    CounterRng gumbel_rng("train.gumbel", cfg.seed, epoch + 1);
    const Matrix gumbel = sample_gumbel(d, cfg.m, gumbel_rng);

    Tape tape;
    const Var theta_var = tape.leaf(theta, true);
    const Var loss =
        loss_forward(tape, x, theta_var, gumbel, temperature, cfg, epoch, fixed_ptr);
    const double loss_value = loss.value()(0, 0);
    if (!std::isfinite(loss_value)) {
      throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
    }
    report.loss_trace.push_back(loss_value);

    auto grads = tape.backward(loss);
    try {
      adam_step(theta, grads.at(theta_var.id), adam, cfg.lr);
    } catch (const NumericError& err) {
      throw NumericError(std::string(err.what()) + " (epoch " + std::to_string(epoch) + ")");
    }

    if (cfg.log_every > 0 && ((epoch + 1) % cfg.log_every == 0 || epoch + 1 == cfg.epochs)) {
      std::fprintf(stderr, "[train] epoch %zu/%zu  loss %.6g  temperature %.4g\n", epoch + 1,
                   cfg.epochs, loss_value, temperature);
    }
  }

  report.selection = final_selection(theta, cfg);
  report.hard_graph =
      assemble_graph_hard(select_columns(x, report.selection.indices), graph_config(cfg));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace dirsel
