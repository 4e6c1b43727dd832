#include "dirsel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "dirsel/autodiff.hpp"
#include "dirsel/errors.hpp"
#include "dirsel/linalg.hpp"
#include "dirsel/rng.hpp"
#include "dirsel/train.hpp"

namespace dirsel {

namespace {

double sq_dist_rows(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
  double total = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    const double diff = a(i, c) - b(j, c);
    total += diff * diff;
  }
  return total;
}

struct LloydResult {
  std::vector<int> labels;
  double wcss = std::numeric_limits<double>::infinity();
};

// k-means++ seeding: first centroid uniform, the rest D^2-sampled.
Matrix seed_centroids(const Matrix& x, std::size_t c, CounterRng& rng) {
  const std::size_t n = x.rows();
  Matrix centroids(c, x.cols());
  std::vector<std::size_t> chosen;
  chosen.push_back(rng.next_below(n));
  std::vector<double> best_d(n, std::numeric_limits<double>::infinity());
  for (std::size_t r = 0;; ++r) {
    const std::size_t pick = chosen.back();
    for (std::size_t col = 0; col < x.cols(); ++col) centroids(r, col) = x(pick, col);
    if (r + 1 == c) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best_d[i] = std::min(best_d[i], sq_dist_rows(x, i, x, pick));
      total += best_d[i];
    }
    std::size_t next = 0;
    if (total > 0.0) {
      const double target = rng.next_uniform() * total;
      double running = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        running += best_d[i];
        if (running >= target) {
          next = i;
          break;
        }
        next = i;
      }
    } else {
      next = rng.next_below(n);  // all mass on already-chosen points
    }
    chosen.push_back(next);
  }
  return centroids;
}

LloydResult lloyd(const Matrix& x, std::size_t c, CounterRng& rng) {
  const std::size_t n = x.rows();
  Matrix centroids = seed_centroids(x, c, rng);
  std::vector<int> labels(n, 0);
  double prev_wcss = std::numeric_limits<double>::infinity();
  double cur_wcss = prev_wcss;

  for (std::size_t iter = 0; iter < 300; ++iter) {
    cur_wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (std::size_t r = 0; r < c; ++r) {
        const double d = sq_dist_rows(x, i, centroids, r);
        if (d < best) {
          best = d;
          best_c = static_cast<int>(r);
        }
      }
      labels[i] = best_c;
      cur_wcss += best;
    }

    Matrix sums(c, x.cols());
    std::vector<std::size_t> counts(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      counts[labels[i]] += 1;
      for (std::size_t col = 0; col < x.cols(); ++col) sums(labels[i], col) += x(i, col);
    }
    for (std::size_t r = 0; r < c; ++r) {
      if (counts[r] == 0) {
        // Reseed an emptied centroid from the point farthest to its own
        // centroid, which splits the widest cluster on the next sweep.
        std::size_t farthest = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = sq_dist_rows(x, i, centroids, labels[i]);
          if (d > far_d) {
            far_d = d;
            farthest = i;
          }
        }
        for (std::size_t col = 0; col < x.cols(); ++col) centroids(r, col) = x(farthest, col);
        continue;
      }
      for (std::size_t col = 0; col < x.cols(); ++col) {
        centroids(r, col) = sums(r, col) / static_cast<double>(counts[r]);
      }
    }

    if (std::fabs(prev_wcss - cur_wcss) <= 1e-6 * std::max(cur_wcss, 1e-300)) break;
    prev_wcss = cur_wcss;
  }

  // Final assignment so labels match the last centroid update.
  cur_wcss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t r = 0; r < c; ++r) {
      const double d = sq_dist_rows(x, i, centroids, r);
      if (d < best) {
        best = d;
        best_c = static_cast<int>(r);
      }
    }
    labels[i] = best_c;
    cur_wcss += best;
  }
  return {std::move(labels), cur_wcss};
}

// Minimum-cost perfect assignment on a square matrix via the potentials
// method; returns the column matched to each row.
std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      std::size_t j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

std::vector<int> distinct_sorted(const std::vector<int>& labels) {
  std::vector<int> out = labels;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::vector<int> kmeans(const Matrix& x, std::size_t c, std::uint64_t seed,
                        std::size_t restarts) {
  if (x.rows() == 0) throw EmptyDatasetError("kmeans: no rows");
  if (c < 1) throw ConfigError("clusters: must be at least 1");
  if (c > x.rows()) throw ConfigError("clusters: more clusters than points");
  if (restarts < 1) throw ConfigError("restarts: must be at least 1");

  LloydResult best;
  for (std::size_t r = 0; r < restarts; ++r) {
    CounterRng rng("eval.kmeans", seed, r + 1);
    LloydResult run = lloyd(x, c, rng);
    if (run.wcss < best.wcss) best = std::move(run);
  }
  return best.labels;
}

double wcss(const Matrix& x, const std::vector<int>& labels) {
  if (labels.size() != x.rows()) throw ShapeError("wcss: one label per row required");
  const std::vector<int> classes = distinct_sorted(labels);
  double total = 0.0;
  for (int cls : classes) {
    Matrix mean(1, x.cols());
    std::size_t count = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (labels[i] != cls) continue;
      count += 1;
      for (std::size_t col = 0; col < x.cols(); ++col) mean(0, col) += x(i, col);
    }
    for (std::size_t col = 0; col < x.cols(); ++col) mean(0, col) /= static_cast<double>(count);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (labels[i] != cls) continue;
      total += sq_dist_rows(x, i, mean, 0);
    }
  }
  return total;
}

double hungarian_align(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("hungarian_align: label vectors differ in length");
  }
  if (pred.empty()) throw EmptyDatasetError("hungarian_align: no labels");

  const std::vector<int> pred_ids = distinct_sorted(pred);
  const std::vector<int> truth_ids = distinct_sorted(truth);
  const std::size_t s = std::max(pred_ids.size(), truth_ids.size());

  auto index_of = [](const std::vector<int>& ids, int value) {
    return static_cast<std::size_t>(
        std::lower_bound(ids.begin(), ids.end(), value) - ids.begin());
  };

  std::vector<std::vector<double>> count(s, std::vector<double>(s, 0.0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    count[index_of(pred_ids, pred[i])][index_of(truth_ids, truth[i])] += 1.0;
  }

  // Maximize matched count == minimize (n - count) cell-wise.
  const double n = static_cast<double>(pred.size());
  std::vector<std::vector<double>> cost(s, std::vector<double>(s, 0.0));
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) cost[a][b] = n - count[a][b];
  }
  const std::vector<std::size_t> assign = min_cost_assignment(cost);
  double matched = 0.0;
  for (std::size_t a = 0; a < s; ++a) matched += count[a][assign[a]];
  return matched / n;
}

double knn_classify(const Dataset& train, const Dataset& test, std::size_t k) {
  if (!train.has_labels() || !test.has_labels()) {
    throw ConfigError("knn_classify: both splits need labels");
  }
  if (train.d() != test.d()) throw ShapeError("knn_classify: feature counts differ");
  if (k < 1 || k > train.n()) throw ConfigError("k: must be in [1, train size]");

  std::size_t correct = 0;
  std::vector<std::size_t> order(train.n());
  for (std::size_t t = 0; t < test.n(); ++t) {
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> dist(train.n());
    for (std::size_t i = 0; i < train.n(); ++i) dist[i] = sq_dist_rows(test.x, t, train.x, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    std::map<int, std::size_t> votes;
    for (std::size_t r = 0; r < k; ++r) votes[train.labels[order[r]]] += 1;
    int winner = votes.begin()->first;
    for (const auto& [label, tally] : votes) {
      if (tally > votes.at(winner)) winner = label;
    }
    if (winner == test.labels[t]) correct += 1;
  }
  return static_cast<double>(correct) / static_cast<double>(test.n());
}

double reconstruction_rmse(const Dataset& train, const Dataset& test,
                           const std::vector<std::size_t>& selected, double hidden_mult,
                           std::uint64_t seed) {
  if (selected.empty()) throw ConfigError("selected: at least one feature required");
  if (train.d() != test.d()) throw ShapeError("reconstruction_rmse: feature counts differ");
  if (!(hidden_mult > 0.0)) throw ConfigError("hidden_mult: must be positive");

  const std::size_t m = selected.size();
  const std::size_t d = train.d();
  const std::size_t hidden = static_cast<std::size_t>(
      std::ceil(hidden_mult * static_cast<double>(m)));

  const Matrix x_in = select_columns(train.x, selected);
  CounterRng rng("eval.reconstruction", seed);
  auto init = [&](std::size_t rows, std::size_t cols, double fan_in) {
    Matrix w(rows, cols);
    const double scale = 1.0 / std::sqrt(fan_in);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) w(i, j) = scale * rng.next_gaussian();
    }
    return w;
  };
  Matrix w1 = init(m, hidden, static_cast<double>(m));
  Matrix b1(1, hidden);
  Matrix w2 = init(hidden, d, static_cast<double>(hidden));
  Matrix b2(1, d);

  auto predict = [&](ad::Tape& tape, const Matrix& input, const ad::Var& vw1, const ad::Var& vb1,
                     const ad::Var& vw2, const ad::Var& vb2) {
    const ad::Var x = tape.constant(input);
    const ad::Var ones = tape.constant(Matrix(input.rows(), 1, 1.0));
    const ad::Var h = ad::relu(ad::add(ad::matmul(x, vw1), ad::matmul(ones, vb1)));
    return ad::add(ad::matmul(h, vw2), ad::matmul(ones, vb2));
  };

  AdamState s1, s2, s3, s4;
  const double inv_nd = 1.0 / (static_cast<double>(train.n()) * static_cast<double>(d));
  for (std::size_t epoch = 0; epoch < 500; ++epoch) {
    ad::Tape tape;
    const ad::Var vw1 = tape.leaf(w1, true);
    const ad::Var vb1 = tape.leaf(b1, true);
    const ad::Var vw2 = tape.leaf(w2, true);
    const ad::Var vb2 = tape.leaf(b2, true);
    const ad::Var out = predict(tape, x_in, vw1, vb1, vw2, vb2);
    const ad::Var loss =
        ad::smul(ad::sum_all(ad::square(ad::sub(out, tape.constant(train.x)))), inv_nd);
    auto grads = tape.backward(loss);
    adam_step(w1, grads.at(vw1.id), s1, 1e-3);
    adam_step(b1, grads.at(vb1.id), s2, 1e-3);
    adam_step(w2, grads.at(vw2.id), s3, 1e-3);
    adam_step(b2, grads.at(vb2.id), s4, 1e-3);
  }

  ad::Tape tape;
  const ad::Var out = predict(tape, select_columns(test.x, selected), tape.constant(w1),
                              tape.constant(b1), tape.constant(w2), tape.constant(b2));
  const Matrix& y = out.value();
  double total = 0.0;
  for (std::size_t i = 0; i < test.n(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = y(i, j) - test.x(i, j);
      total += diff * diff;
    }
  }
  return std::sqrt(total / (static_cast<double>(test.n()) * static_cast<double>(d)));
}

std::vector<int> spectral_clustering(const SimilarityGraph& g, std::size_t c,
                                     std::uint64_t seed) {
  const std::size_t n = g.laplacian.rows();
  if (c < 1 || c > n) throw ConfigError("clusters: must be in [1, n]");
  const SymEig eig = jacobi_eigh(g.laplacian);
  Matrix embedding(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) embedding(i, j) = eig.vectors(i, j);
  }
  return kmeans(embedding, c, seed);
}

std::vector<std::size_t> laplacian_score_rank(const Dataset& data, double sigma,
                                              std::size_t k) {
  const SimilarityGraph g = heat_kernel_graph(data.x, sigma, k);
  const std::size_t d = data.d();
  std::vector<double> score(d);
  for (std::size_t j = 0; j < d; ++j) {
    Matrix col(data.n(), 1);
    for (std::size_t i = 0; i < data.n(); ++i) col(i, 0) = data.x(i, j);
    score[j] = dirichlet_energy(g.laplacian, col);
  }
  std::vector<std::size_t> rank(d);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  return rank;
}

double inter_class_edge_fraction(const SimilarityGraph& g, const std::vector<int>& labels) {
  const std::size_t n = g.s_hat.rows();
  if (labels.size() != n) throw ShapeError("inter_class_edge_fraction: one label per node");
  double cross = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = g.s_hat(i, j);
      total += w;
      if (labels[i] != labels[j]) cross += w;
    }
  }
  return total > 0.0 ? cross / total : 0.0;
}

}  // namespace dirsel
