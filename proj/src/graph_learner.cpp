#include "dirsel/graph_learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "dirsel/errors.hpp"
#include "dirsel/linalg.hpp"

namespace dirsel {

using ad::Tape;
using ad::Var;

namespace {

constexpr double kDenominatorFloor = 1e-12;

SimilarityGraph similarity_from(Matrix s) {
  SimilarityGraph g;
  const std::size_t n = s.rows();
  g.s_hat = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g.s_hat(i, j) = 0.5 * (s(i, j) + s(j, i));
  }
  g.laplacian = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < n; ++j) degree += g.s_hat(i, j);
    for (std::size_t j = 0; j < n; ++j) g.laplacian(i, j) = -g.s_hat(i, j);
    g.laplacian(i, i) += degree;
  }
  g.s = std::move(s);
  return g;
}

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> target_masses(std::size_t n, std::size_t k) {
  std::vector<double> nu(k + 2, 1.0 / static_cast<double>(n));
  nu[k + 1] = static_cast<double>(n - k - 1) / static_cast<double>(n);
  return nu;
}

// Warm-start potentials for the target side. At small gamma a cold start
// spends thousands of iterations in an auction-like transient: the pooled
// column's potential creeps by O(gamma) per iteration across the cost spread
// of its suppliers. The unregularized problem is a sorted assignment, so its
// dual potentials have a closed form: chain the midpoints of the local
// dual-feasibility intervals backward from the pooled column. Starting there
// puts the iteration directly into its geometric-convergence phase. The
// fixed point does not depend on the starting point, so the converged plan
// is unchanged.
std::vector<double> warm_target_potentials(const Matrix& cost, std::size_t k) {
  const std::size_t n = cost.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cost(a, 0) < cost(b, 0); });
  std::vector<double> g(k + 2, 0.0);
  // Feasibility for target j-1 (1-based source rank j) brackets the potential
  // step between the j-th and (j+1)-th smallest sources.
  const auto dcost = [&](std::size_t rank, std::size_t j) {
    return cost(order[rank], j - 1) - cost(order[rank], j);
  };
  for (std::size_t j = k + 1; j >= 1; --j) {
    const double lo = dcost(j - 1, j);
    const double hi = j < n ? dcost(j, j) : lo;
    g[j - 1] = g[j] + 0.5 * (lo + hi);
  }
  return g;
}

}  // namespace

void validate(const GraphLearnerConfig& cfg, std::size_t n) {
  if (cfg.k == 0) throw ConfigError("graph config: k must be at least 1");
  if (cfg.k + 2 > n) {
    throw ConfigError("graph config: need k + 2 <= n, got k=" + std::to_string(cfg.k) +
                      ", n=" + std::to_string(n));
  }
  if (!(cfg.gamma > 0.0)) throw ConfigError("graph config: gamma must be positive");
  if (cfg.zeta == 0) throw ConfigError("graph config: zeta must be at least 1");
  if (!(cfg.diag_mask > 0.0)) throw ConfigError("graph config: diag_mask must be positive");
}

std::vector<double> distance_row(const Matrix& e, std::size_t i, const GraphLearnerConfig& cfg) {
  const std::size_t n = e.cols();
  if (e.rows() != n) throw ShapeError("distance_row: matrix must be square");
  if (i >= n) throw ShapeError("distance_row: row index out of range");
  std::vector<double> row(n);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = e(i, j);
    if (j != i) {
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
  }
  if (hi == lo) {
    throw DegenerateRowError(i, "distance row has zero spread (all neighbors equidistant)");
  }
  if (cfg.rescale_rows) {
    for (std::size_t j = 0; j < n; ++j) row[j] /= hi;
  }
  row[i] = cfg.diag_mask;
  return row;
}

Matrix build_cost(const std::vector<double>& e_row, std::size_t k) {
  Matrix cost(e_row.size(), k + 2);
  for (std::size_t i = 0; i < e_row.size(); ++i) {
    for (std::size_t j = 0; j <= k + 1; ++j) {
      const double diff = e_row[i] - static_cast<double>(j);
      cost(i, j) = diff * diff;
    }
  }
  return cost;
}

TransportPlan sinkhorn_bregman(const Matrix& cost, std::size_t k, double gamma,
                               std::size_t zeta) {
  const std::size_t n = cost.rows();
  const std::size_t kp2 = k + 2;
  if (cost.cols() != kp2) {
    throw ShapeError("sinkhorn_bregman: cost must have k + 2 columns, got " +
                     std::to_string(cost.cols()));
  }
  if (n < k + 1) throw ConfigError("sinkhorn_bregman: need n >= k + 1");
  if (!(gamma > 0.0)) throw ConfigError("sinkhorn_bregman: gamma must be positive");
  if (zeta == 0) throw ConfigError("sinkhorn_bregman: zeta must be at least 1");
  if (!all_finite(cost)) throw NumericError("sinkhorn_bregman: cost matrix is not finite");

  const double neg_inf = -std::numeric_limits<double>::infinity();
  const double log_mu = -std::log(static_cast<double>(n));
  const std::vector<double> nu = target_masses(n, k);
  std::vector<double> log_nu(kp2);
  for (std::size_t j = 0; j < kp2; ++j) log_nu[j] = nu[j] > 0.0 ? std::log(nu[j]) : neg_inf;

  // Potentials f (sources) and g (targets), iterated in the log domain so
  // tiny gamma cannot underflow the scaling vectors.
  std::vector<double> f(n, 0.0);
  std::vector<double> g = warm_target_potentials(cost, k);
  std::vector<double> work_row(kp2);
  std::vector<double> work_col(n);
  for (std::size_t t = 0; t < zeta; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < kp2; ++j) work_row[j] = (g[j] - cost(i, j)) / gamma;
      f[i] = gamma * (log_mu - log_sum_exp(work_row));
    }
    for (std::size_t j = 0; j < kp2; ++j) {
      if (log_nu[j] == neg_inf) {
        g[j] = neg_inf;
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) work_col[i] = (f[i] - cost(i, j)) / gamma;
      g[j] = gamma * (log_nu[j] - log_sum_exp(work_col));
    }
  }

  TransportPlan plan;
  plan.gamma_matrix = Matrix(n, kp2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kp2; ++j) {
      const double expo = f[i] + g[j] - cost(i, j);
      plan.gamma_matrix(i, j) = expo == neg_inf ? 0.0 : std::exp(expo / gamma);
    }
  }
  if (!all_finite(plan.gamma_matrix)) {
    throw NumericError("sinkhorn_bregman: non-finite transport plan; increase gamma");
  }
  return plan;
}

SelectorPair extract_selectors(const TransportPlan& plan, std::size_t k) {
  const Matrix& g = plan.gamma_matrix;
  const std::size_t n = g.rows();
  if (g.cols() != k + 2) throw ShapeError("extract_selectors: plan must have k + 2 columns");
  SelectorPair sel;
  sel.delta.assign(n, 0.0);
  sel.xi.assign(n, 0.0);
  const auto scale_n = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += g(i, j);
    sel.delta[i] = scale_n * s;
    sel.xi[i] = scale_n * g(i, k);
  }
  return sel;
}

SelectorPair exact_knn_row(const std::vector<double>& e_row, std::size_t k) {
  const std::size_t n = e_row.size();
  if (n < k + 1) throw ShapeError("exact_knn_row: need at least k + 1 entries");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return e_row[a] < e_row[b]; });
  SelectorPair sel;
  sel.delta.assign(n, 0.0);
  sel.xi.assign(n, 0.0);
  for (std::size_t r = 0; r < k; ++r) sel.delta[order[r]] = 1.0;
  sel.xi[order[k]] = 1.0;
  return sel;
}

std::vector<double> graph_row_weights(const std::vector<double>& e_row, const SelectorPair& sel,
                                      std::size_t k, std::size_t row_hint) {
  const std::size_t n = e_row.size();
  if (sel.delta.size() != n || sel.xi.size() != n) {
    throw ShapeError("graph_row_weights: selector length mismatch");
  }
  double e_delta = 0.0;
  double e_xi = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    e_delta += e_row[j] * sel.delta[j];
    e_xi += e_row[j] * sel.xi[j];
  }
  const double denom = static_cast<double>(k) * e_xi - e_delta;
  if (denom <= kDenominatorFloor) {
    throw DegenerateRowError(row_hint,
                             "weight denominator vanished (all k+1 nearest equidistant)");
  }
  std::vector<double> s(n);
  for (std::size_t j = 0; j < n; ++j) s[j] = std::max(0.0, (e_xi - e_row[j]) / denom);
  return s;
}

namespace {

SimilarityGraph assemble_impl(const Matrix& x_hat, const GraphLearnerConfig& cfg, bool hard) {
  const std::size_t n = x_hat.rows();
  validate(cfg, n);
  if (!all_finite(x_hat)) throw NumericError("assemble_graph: input matrix is not finite");
  const Matrix e = pairwise_sq_dists(x_hat);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> row = distance_row(e, i, cfg);
    const SelectorPair sel =
        hard ? exact_knn_row(row, cfg.k)
             : extract_selectors(sinkhorn_bregman(build_cost(row, cfg.k), cfg.k, cfg.gamma,
                                                  cfg.zeta),
                                 cfg.k);
    const std::vector<double> w = graph_row_weights(row, sel, cfg.k, i);
    for (std::size_t j = 0; j < n; ++j) s(i, j) = w[j];
  }
  return similarity_from(std::move(s));
}

}  // namespace

SimilarityGraph assemble_graph(const Matrix& x_hat, const GraphLearnerConfig& cfg) {
  return assemble_impl(x_hat, cfg, false);
}

SimilarityGraph assemble_graph_hard(const Matrix& x_hat, const GraphLearnerConfig& cfg) {
  return assemble_impl(x_hat, cfg, true);
}

double dirichlet_energy(const Matrix& laplacian, const Matrix& v) {
  if (laplacian.rows() != laplacian.cols() || laplacian.rows() != v.rows()) {
    throw ShapeError("dirichlet_energy: shape mismatch");
  }
  const Matrix lv = matmul(laplacian, v);
  double total = 0.0;
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (std::size_t j = 0; j < v.cols(); ++j) total += v(i, j) * lv(i, j);
  }
  return total;
}

SimilarityGraph heat_kernel_graph(const Matrix& x, double sigma, std::size_t k) {
  if (!(sigma > 0.0)) throw ConfigError("heat_kernel_graph: sigma must be positive");
  const std::size_t n = x.rows();
  if (k == 0 || k + 1 > n) throw ConfigError("heat_kernel_graph: need 1 <= k <= n - 1");
  const Matrix e = pairwise_sq_dists(x);
  const double denom = 2.0 * sigma * sigma;
  Matrix s(n, n);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row[j] = e(i, j);
    row[i] = std::numeric_limits<double>::infinity();  // self never a neighbor
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = order[r];
      s(i, j) = std::exp(-e(i, j) / denom);
    }
  }
  return similarity_from(std::move(s));
}

Var pairwise_sq_dists_on_tape(Tape& tape, const Var& x_hat) {
  const std::size_t n = x_hat.rows();
  const Var r = ad::row_sum(ad::square(x_hat));                     // n x 1
  const Var ones_row = tape.constant(Matrix(1, n, 1.0));
  const Var ones_col = tape.constant(Matrix(n, 1, 1.0));
  const Var left = ad::matmul(r, ones_row);                        // r 1^T
  const Var right = ad::matmul(ones_col, ad::transpose(r));        // 1 r^T
  const Var cross = ad::smul(ad::matmul(x_hat, ad::transpose(x_hat)), 2.0);
  return ad::sub(ad::add(left, right), cross);
}

namespace {

// Transport plan of one distance row with the gradient of the fully unrolled
// scaling loop. K is stored column-major ((k+2) runs of n) so every kernel is
// a contiguous n-length pass. Only the u iterates are kept; each v_t is
// recomputed during the reverse sweep from u_{t-1}, bit-identical to the
// forward pass. Once u reaches a bitwise fixed point the remaining iterations
// provably repeat it, so storage stops there while the reverse sweep still
// walks all zeta steps.
class SinkhornPlanNode final : public ad::Node {
 public:
  SinkhornPlanNode(const Matrix& e_row, std::size_t k, double gamma, std::size_t zeta)
      : k_(k), gamma_(gamma), zeta_(zeta), n_(e_row.cols()), kp2_(k + 2) {
    if (e_row.rows() != 1) throw ShapeError("sinkhorn_plan: e_row must be 1 x n");
    if (n_ < k_ + 2) throw ConfigError("sinkhorn_plan: need n >= k + 2");
    if (!all_finite(e_row)) throw NumericError("sinkhorn_plan: distance row is not finite");

    kcol_.resize(kp2_ * n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double e = e_row(0, i);
      double cmin = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < kp2_; ++j) {
        const double d = e - static_cast<double>(j);
        cmin = std::min(cmin, d * d);
      }
      for (std::size_t j = 0; j < kp2_; ++j) {
        const double d = e - static_cast<double>(j);
        kcol_[j * n_ + i] = std::exp(-(d * d - cmin) / gamma_);
      }
    }

    nu_ = target_masses(n_, k_);
    mu_ = 1.0 / static_cast<double>(n_);

    u_hist_.assign(kp2_, 1.0 / static_cast<double>(kp2_));
    std::vector<double> v(n_);
    std::vector<double> u_next(kp2_);
    t_stop_ = 0;
    for (std::size_t t = 1; t <= zeta_; ++t) {
      const double* u_prev = u_hist_.data() + (t - 1) * kp2_;
      apply_k(u_prev, v.data());
      for (std::size_t i = 0; i < n_; ++i) v[i] = mu_ / v[i];
      apply_kt(v.data(), u_next.data());
      for (std::size_t j = 0; j < kp2_; ++j) u_next[j] = nu_[j] / u_next[j];
      if (std::memcmp(u_prev, u_next.data(), kp2_ * sizeof(double)) == 0) break;
      u_hist_.insert(u_hist_.end(), u_next.begin(), u_next.end());
      t_stop_ = t;
    }

    // Final scalings: v comes from the previous u (the loop updates v first),
    // so the plan is diag(v_zeta) K diag(u_zeta).
    const double* u_fin = u_at(zeta_);
    std::vector<double> v_fin(n_);
    apply_k(u_at(zeta_ - 1), v_fin.data());
    for (std::size_t i = 0; i < n_; ++i) v_fin[i] = mu_ / v_fin[i];

    value = Matrix(n_, kp2_);
    for (std::size_t j = 0; j < kp2_; ++j) {
      const double* col = kcol_.data() + j * n_;
      for (std::size_t i = 0; i < n_; ++i) value(i, j) = v_fin[i] * col[i] * u_fin[j];
    }
    bool ok = all_finite(value);
    for (std::size_t j = 0; ok && j < kp2_; ++j) ok = std::isfinite(u_fin[j]);
    for (std::size_t i = 0; ok && i < n_; ++i) ok = std::isfinite(v_fin[i]);
    if (!ok) {
      throw NumericError(
          "sinkhorn_plan: scaling iterates are not finite; increase gamma or keep row "
          "rescaling enabled");
    }
  }

  void backward(const Matrix& out_grad, ad::BackwardCtx& ctx) override {
    if (!ctx.needs(inputs[0])) return;
    const Matrix& e_row = ctx.value(inputs[0]);

    std::vector<double> kbar(kp2_ * n_, 0.0);
    std::vector<double> ubar(kp2_);
    std::vector<double> vbar(n_);
    std::vector<double> v_t(n_);
    std::vector<double> qbar(kp2_);
    std::vector<double> pbar(n_);
    std::vector<double> vbar_plan(n_, 0.0);

    // Every step with u_{t-1} already at the bitwise fixed point sees the same
    // v, so recompute it once and share it across those steps.
    std::vector<double> v_fix(n_);
    apply_k(u_at(t_stop_), v_fix.data());
    for (std::size_t i = 0; i < n_; ++i) v_fix[i] = mu_ / v_fix[i];

    // For those same steps the rank-one K adjoints v qbar^T and pbar u^T share
    // their v / u factor, so the qbar / pbar sides accumulate here and land in
    // kbar in a single flush after the sweep.
    std::vector<double> qbar_sum(kp2_, 0.0);
    std::vector<double> pbar_sum(n_, 0.0);
    const double inv_mu = 1.0 / mu_;

    // Injection from Gamma = diag(v) K diag(u): precompute the v-part lazily
    // inside the t == zeta step below; the u-part needs v_zeta first.
    for (std::size_t t = zeta_; t >= 1; --t) {
      const double* u_prev = u_at(t - 1);
      const double* u_cur = u_at(t);
      const bool at_fix = t - 1 >= t_stop_;
      const double* v_cur = v_fix.data();
      if (!at_fix) {
        apply_k(u_prev, v_t.data());
        for (std::size_t i = 0; i < n_; ++i) v_t[i] = mu_ / v_t[i];
        v_cur = v_t.data();
      }

      if (t == zeta_) {
        for (std::size_t j = 0; j < kp2_; ++j) {
          const double* col = kcol_.data() + j * n_;
          double acc = 0.0;
          for (std::size_t i = 0; i < n_; ++i) {
            const double gk = out_grad(i, j) * col[i];
            acc += gk * v_cur[i];
            vbar_plan[i] += gk * u_cur[j];
            kbar[j * n_ + i] += out_grad(i, j) * v_cur[i] * u_cur[j];
          }
          ubar[j] = acc;
        }
      }

      for (std::size_t j = 0; j < kp2_; ++j) {
        qbar[j] = -(ubar[j] * u_cur[j] * u_cur[j]) / nu_[j];
      }
      if (at_fix) {
        for (std::size_t j = 0; j < kp2_; ++j) qbar_sum[j] += qbar[j];
      } else {
        for (std::size_t j = 0; j < kp2_; ++j) {
          double* kb = kbar.data() + j * n_;
          const double q = qbar[j];
          for (std::size_t i = 0; i < n_; ++i) kb[i] += v_cur[i] * q;
        }
      }
      apply_k(qbar.data(), vbar.data());
      if (t == zeta_) {
        for (std::size_t i = 0; i < n_; ++i) vbar[i] += vbar_plan[i];
      }
      for (std::size_t i = 0; i < n_; ++i) {
        pbar[i] = -(vbar[i] * v_cur[i] * v_cur[i]) * inv_mu;
      }
      if (at_fix) {
        for (std::size_t i = 0; i < n_; ++i) pbar_sum[i] += pbar[i];
      } else {
        for (std::size_t j = 0; j < kp2_; ++j) {
          double* kb = kbar.data() + j * n_;
          const double u = u_prev[j];
          for (std::size_t i = 0; i < n_; ++i) kb[i] += pbar[i] * u;
        }
      }
      if (t > 1) apply_kt(pbar.data(), ubar.data());
    }

    if (t_stop_ < zeta_) {
      const double* u_fix = u_at(t_stop_);
      for (std::size_t j = 0; j < kp2_; ++j) {
        double* kb = kbar.data() + j * n_;
        const double q = qbar_sum[j];
        const double u = u_fix[j];
        for (std::size_t i = 0; i < n_; ++i) kb[i] += v_fix[i] * q + pbar_sum[i] * u;
      }
    }

    // K_ij = exp(-((e_i - j)^2 - shift_i)/gamma); the shift leaves the plan
    // unchanged for nearby inputs, so it contributes no gradient.
    Matrix ebar(1, n_);
    for (std::size_t j = 0; j < kp2_; ++j) {
      const double* col = kcol_.data() + j * n_;
      const double* kb = kbar.data() + j * n_;
      const double b = static_cast<double>(j);
      for (std::size_t i = 0; i < n_; ++i) {
        ebar(0, i) += kb[i] * col[i] * (-2.0 / gamma_) * (e_row(0, i) - b);
      }
    }
    ctx.accumulate(inputs[0], std::move(ebar));
  }

 private:
  const double* u_at(std::size_t t) const { return u_hist_.data() + std::min(t, t_stop_) * kp2_; }

  // out[i] = sum_j K_ij in[j]
  void apply_k(const double* in, double* out) const {
    std::fill(out, out + n_, 0.0);
    for (std::size_t j = 0; j < kp2_; ++j) {
      const double* col = kcol_.data() + j * n_;
      const double c = in[j];
      for (std::size_t i = 0; i < n_; ++i) out[i] += col[i] * c;
    }
  }

  // out[j] = sum_i K_ij in[i]. Eight independent accumulators let the
  // reduction vectorize; a single serial chain runs an order of magnitude
  // slower here.
  void apply_kt(const double* in, double* out) const {
    for (std::size_t j = 0; j < kp2_; ++j) {
      const double* col = kcol_.data() + j * n_;
      double s[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
      std::size_t i = 0;
      for (; i + 8 <= n_; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) s[l] += col[i + l] * in[i + l];
      }
      double acc = ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
      for (; i < n_; ++i) acc += col[i] * in[i];
      out[j] = acc;
    }
  }

  std::size_t k_;
  double gamma_;
  std::size_t zeta_;
  std::size_t n_;
  std::size_t kp2_;
  std::vector<double> kcol_;    // column-major K
  std::vector<double> u_hist_;  // u_0 .. u_{t_stop}
  std::vector<double> nu_;
  double mu_;
  std::size_t t_stop_;
};

}  // namespace

Var sinkhorn_plan_on_tape(Tape& tape, const Var& e_row, const GraphLearnerConfig& cfg) {
  validate(cfg, e_row.cols());
  auto node = std::make_unique<SinkhornPlanNode>(e_row.value(), cfg.k, cfg.gamma, cfg.zeta);
  node->inputs = {e_row.id};
  return tape.record(std::move(node));
}

Var soft_similarity_on_tape(Tape& tape, const Var& e_full, const GraphLearnerConfig& cfg) {
  const std::size_t n = e_full.rows();
  if (e_full.cols() != n) throw ShapeError("soft_similarity: distance matrix must be square");
  validate(cfg, n);
  const Var ones_row = tape.constant(Matrix(1, n, 1.0));
  std::vector<std::size_t> first_k(cfg.k);
  std::iota(first_k.begin(), first_k.end(), 0);
  const auto scale_n = static_cast<double>(n);

  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Degeneracy check mirrors distance_row on the recorded values.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      lo = std::min(lo, e_full.value()(i, j));
      hi = std::max(hi, e_full.value()(i, j));
    }
    if (hi == lo) {
      throw DegenerateRowError(i, "distance row has zero spread (all neighbors equidistant)");
    }

    Var e = ad::gather_rows(e_full, {i});
    if (cfg.rescale_rows) e = ad::div_by_scalar(e, ad::reduce_max(e));
    e = ad::set_entries(e, {{0, i}}, cfg.diag_mask);

    const Var plan = sinkhorn_plan_on_tape(tape, e, cfg);
    const Var delta = ad::smul(ad::row_sum(ad::gather_cols(plan, first_k)), scale_n);  // n x 1
    const Var xi = ad::smul(ad::gather_cols(plan, {cfg.k}), scale_n);                  // n x 1
    const Var e_delta = ad::matmul(e, delta);                                          // 1 x 1
    const Var e_xi = ad::matmul(e, xi);                                                // 1 x 1
    const Var denom = ad::sub(ad::smul(e_xi, static_cast<double>(cfg.k)), e_delta);
    if (denom.value()(0, 0) <= kDenominatorFloor) {
      throw DegenerateRowError(i, "weight denominator vanished (all k+1 nearest equidistant)");
    }
    const Var numer = ad::relu(ad::sub(ad::matmul(e_xi, ones_row), e));
    rows.push_back(ad::div_by_scalar(numer, denom));
  }
  return ad::stack_rows(rows);
}

}  // namespace dirsel
