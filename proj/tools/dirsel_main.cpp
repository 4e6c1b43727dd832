// Command-line front end: dataset generation, training, evaluation, graph
// export, and the self-test battery, wired for reproducible runs.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "dirsel/checks.hpp"
#include "dirsel/dataset.hpp"
#include "dirsel/errors.hpp"
#include "dirsel/eval.hpp"
#include "dirsel/graph_learner.hpp"
#include "dirsel/io.hpp"
#include "dirsel/selector.hpp"
#include "dirsel/train.hpp"

namespace {

using namespace dirsel;

// ---------------------------------------------------------------------------
// Config resolution: defaults, then --config file, then explicit flags.

class ConfigArgs {
 public:
  ConfigArgs() = default;
  ConfigArgs(const ConfigArgs&) = delete;
  ConfigArgs& operator=(const ConfigArgs&) = delete;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path_,
                    "JSON config file; explicit flags override its values");
    opt(cmd, "--m", "number of features to select",
        +[](RunConfig& c) -> std::size_t& { return c.train.m; });
    opt(cmd, "--k", "neighbors per row in the learned graph",
        +[](RunConfig& c) -> std::size_t& { return c.train.k; });
    opt(cmd, "--gamma", "entropy regularization of the transport plan",
        +[](RunConfig& c) -> double& { return c.train.gamma; });
    opt(cmd, "--zeta", "Bregman projection iterations",
        +[](RunConfig& c) -> std::size_t& { return c.train.zeta; });
    opt(cmd, "--lr", "Adam learning rate",
        +[](RunConfig& c) -> double& { return c.train.lr; });
    opt(cmd, "--epochs", "training epochs",
        +[](RunConfig& c) -> std::size_t& { return c.train.epochs; });
    opt(cmd, "--seed", "training seed",
        +[](RunConfig& c) -> std::uint64_t& { return c.train.seed; });
    opt(cmd, "--heat-sigma", "bandwidth of the fixed heat-kernel graph ablation",
        +[](RunConfig& c) -> double& { return c.train.heat_sigma; });
    opt(cmd, "--log-every", "progress print period (0 = silent)",
        +[](RunConfig& c) -> std::size_t& { return c.train.log_every; });
    opt(cmd, "--epsilon", "orthogonalization perturbation",
        +[](RunConfig& c) -> double& { return c.train.epsilon; });
    opt(cmd, "--t0", "initial Gumbel-softmax temperature",
        +[](RunConfig& c) -> double& { return c.train.t0; });
    opt(cmd, "--t-min", "final Gumbel-softmax temperature",
        +[](RunConfig& c) -> double& { return c.train.t_min; });
    add(cmd->add_option("--ablation", ablation_, "none | no_ufs | fixed_heat_graph"),
        [this](RunConfig& c) { c.train.ablation = ablation_from_string(ablation_); });
    opt(cmd, "--dataset", "blobs | moons | circles | csv",
        +[](RunConfig& c) -> std::string& { return c.dataset_kind; });
    opt(cmd, "--n", "synthetic sample count",
        +[](RunConfig& c) -> std::size_t& { return c.dataset_n; });
    opt(cmd, "--dataset-seed", "synthetic generation seed",
        +[](RunConfig& c) -> std::uint64_t& { return c.dataset_seed; });
    opt(cmd, "--csv", "input CSV path (dataset csv)",
        +[](RunConfig& c) -> std::string& { return c.csv_path; });
    add(cmd->add_option("--label-column", label_column_,
                        "CSV column holding labels (-1 = unlabeled)"),
        [this](RunConfig& c) {
          if (label_column_ < 0) {
            c.csv_label_column.reset();
          } else {
            c.csv_label_column = static_cast<std::size_t>(label_column_);
          }
        });
    opt(cmd, "--splits", "evaluation split seeds",
        +[](RunConfig& c) -> std::size_t& { return c.eval_splits; });
    opt(cmd, "--train-ratio", "train fraction per split",
        +[](RunConfig& c) -> double& { return c.eval_train_ratio; });
    opt(cmd, "--knn-k", "neighbors for the k-NN classifier",
        +[](RunConfig& c) -> std::size_t& { return c.eval_knn_k; });
    add(cmd->add_flag("--tune-by-test", flags_.tune_by_test,
                      "pick the classifier k by test accuracy (leakage-prone)"),
        [this](RunConfig& c) { c.tune_by_test = flags_.tune_by_test; });
    opt(cmd, "--out", "output directory",
        +[](RunConfig& c) -> std::string& { return c.out_dir; });
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path_.empty()) {
      cfg = run_config_from_json(read_text_file(config_path_));
    }
    for (const auto& [option, apply] : appliers_) {
      if (option->count() > 0) apply(cfg);
    }
    return cfg;
  }

 private:
  // Binds a flag to the member selected by `member` in the scratch config,
  // and remembers how to copy it into the resolved config when passed.
  template <typename T>
  void opt(CLI::App* cmd, const char* name, const char* help, T& (*member)(RunConfig&)) {
    add(cmd->add_option(name, member(flags_), help),
        [this, member](RunConfig& cfg) { member(cfg) = member(flags_); });
  }
  void add(const CLI::Option* option, std::function<void(RunConfig&)> apply) {
    appliers_.emplace_back(option, std::move(apply));
  }

  std::string config_path_;
  RunConfig flags_;
  std::string ablation_ = "none";
  long long label_column_ = -1;
  std::vector<std::pair<const CLI::Option*, std::function<void(RunConfig&)>>> appliers_;
};

// ---------------------------------------------------------------------------
// Shared plumbing

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void echo_config(const RunConfig& cfg) {
  std::fputs(run_config_to_json(cfg).c_str(), stdout);
}

void write_resolved(const RunConfig& cfg, const std::string& dir) {
  write_text_file(dir + "/resolved_config.json", run_config_to_json(cfg));
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset_kind == "csv") {
    if (cfg.csv_path.empty()) {
      throw ConfigError("csv_path: required when dataset_kind is \"csv\"");
    }
    CsvOptions opts;
    opts.label_column = cfg.csv_label_column;
    return load_csv(cfg.csv_path, opts);
  }
  return gen_synthetic(synthetic_kind_from_string(cfg.dataset_kind), cfg.dataset_n,
                       cfg.dataset_seed);
}

// Training, evaluation, and graph export all assume the preprocessing the
// objective is derived under: zero-mean, unit-norm features with constant
// columns dropped. Only `gen` touches the raw samples, since its job is to
// write them out.
Dataset load_standardized(const RunConfig& cfg) { return standardize(load_dataset(cfg)); }

void check_selection_bounds(const HardSelection& sel, std::size_t d) {
  for (const std::size_t idx : sel.indices) {
    if (idx >= d) {
      throw ConfigError("selection: index " + std::to_string(idx) +
                        " out of range for a dataset with " + std::to_string(d) +
                        " features");
    }
  }
}

std::string join_indices(const std::vector<std::size_t>& indices) {
  std::string out;
  for (const std::size_t idx : indices) {
    if (!out.empty()) out += " ";
    out += std::to_string(idx);
  }
  return out;
}

// ---------------------------------------------------------------------------
// gen

int run_gen(const RunConfig& cfg) {
  if (cfg.dataset_kind == "csv") {
    throw ConfigError("dataset_kind: gen requires a synthetic kind (blobs|moons|circles)");
  }
  echo_config(cfg);
  const Dataset data = load_dataset(cfg);
  ensure_dir(cfg.out_dir);
  write_resolved(cfg, cfg.out_dir);
  const std::string csv_path = cfg.out_dir + "/dataset.csv";
  const std::string sidecar_path = cfg.out_dir + "/dataset.json";
  save_csv(csv_path, data);
  write_text_file(sidecar_path, dataset_sidecar_json(cfg.dataset_kind, cfg.dataset_n,
                                                     cfg.dataset_seed, data.informative));
  std::printf("wrote %s (%zu rows, %zu columns)\n", csv_path.c_str(), data.n(),
              data.d() + (data.has_labels() ? 1 : 0));
  std::printf("wrote %s\n", sidecar_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train

TrainReport train_into(const RunConfig& cfg, const std::string& dir) {
  const Dataset data = load_standardized(cfg);
  const TrainReport report = train(data, cfg.train);
  ensure_dir(dir);
  RunConfig resolved = cfg;
  resolved.out_dir = dir;
  write_resolved(resolved, dir);
  write_text_file(dir + "/report.json", train_report_to_json(report));
  write_text_file(dir + "/selection.json", selection_to_json(report.selection));
  write_loss_csv(dir + "/loss.csv", report.loss_trace);
  write_graph_csv(dir + "/graph.csv", report.hard_graph.s);
  write_text_file(dir + "/graph.json",
                  graph_header_json(data.n(), cfg.train.k, cfg.train.gamma, cfg.train.seed));
  return report;
}

int run_train(const RunConfig& cfg) {
  echo_config(cfg);
  const TrainReport report = train_into(cfg, cfg.out_dir);
  std::printf("final loss: %.17g\n", report.loss_trace.back());
  std::printf("selected indices: %s\n", join_indices(report.selection.indices).c_str());
  std::printf("duplicates: %s\n", report.selection.has_duplicates ? "true" : "false");
  std::printf("wall seconds: %.3f\n", report.wall_seconds);
  std::printf("wrote %s/{resolved_config.json,report.json,selection.json,loss.csv,graph.csv,graph.json}\n",
              cfg.out_dir.c_str());
  return 0;
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const std::size_t dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      return {static_cast<std::uint64_t>(std::stoull(text))};
    }
    const std::uint64_t first = std::stoull(text.substr(0, dots));
    const std::uint64_t last = std::stoull(text.substr(dots + 2));
    if (last < first) throw ConfigError("seeds: range end precedes start");
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = first; s <= last; ++s) seeds.push_back(s);
    return seeds;
  } catch (const std::logic_error&) {
    throw ConfigError("seeds: expected N or FIRST..LAST, got \"" + text + "\"");
  }
}

int run_train_fanout(const RunConfig& base, const std::vector<std::uint64_t>& seeds) {
  echo_config(base);
  ensure_dir(base.out_dir);
  write_resolved(base, base.out_dir);

  struct SeedOutcome {
    std::string error;  // empty on success
    std::string summary;
  };
  std::vector<SeedOutcome> outcomes(seeds.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      RunConfig cfg = base;
      cfg.train.seed = seeds[i];
      cfg.train.log_every = 0;  // interleaved progress lines are useless
      const std::string dir = base.out_dir + "/seed-" + std::to_string(seeds[i]);
      try {
        const TrainReport report = train_into(cfg, dir);
        outcomes[i].summary = "seed " + std::to_string(seeds[i]) + ": indices " +
                              join_indices(report.selection.indices) + "  duplicates " +
                              (report.selection.has_duplicates ? "true" : "false") +
                              "  final loss " + format_double(report.loss_trace.back());
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };

  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(hw, seeds.size()); ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  int failures = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (outcomes[i].error.empty()) {
      std::printf("%s\n", outcomes[i].summary.c_str());
    } else {
      std::fprintf(stderr, "seed %llu failed: %s\n",
                   static_cast<unsigned long long>(seeds[i]), outcomes[i].error.c_str());
      ++failures;
    }
  }
  std::printf("%zu/%zu seeds completed under %s/seed-*/\n", seeds.size() - failures,
              seeds.size(), base.out_dir.c_str());
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// eval

struct SplitMetrics {
  double clustering = 0.0;
  double classification = 0.0;
  double rmse = 0.0;
  std::size_t knn_k = 1;
};

Dataset with_columns(const Dataset& d, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.x = select_columns(d.x, indices);
  out.labels = d.labels;
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (const double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (const double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

int run_eval(const RunConfig& cfg, const std::string& selection_path) {
  if (cfg.eval_splits == 0) throw ConfigError("eval_splits: must be at least 1");
  if (!(cfg.eval_train_ratio > 0.0 && cfg.eval_train_ratio < 1.0)) {
    throw ConfigError("eval_train_ratio: must lie strictly between 0 and 1");
  }
  if (cfg.eval_knn_k == 0) throw ConfigError("eval_knn_k: must be at least 1");
  echo_config(cfg);

  const HardSelection selection = selection_from_json(read_text_file(selection_path));
  const Dataset data = load_standardized(cfg);
  check_selection_bounds(selection, data.d());
  if (!data.has_labels()) {
    throw ConfigError("dataset: evaluation needs labels (label column or synthetic data)");
  }
  const std::set<int> distinct(data.labels.begin(), data.labels.end());
  const std::size_t classes = distinct.size();

  const Dataset selected_full = with_columns(data, selection.indices);
  const SimilarityGraph graph =
      assemble_graph(selected_full.x, graph_config(cfg.train));
  const double edge_fraction = inter_class_edge_fraction(graph, data.labels);

  std::vector<SplitMetrics> per_seed(cfg.eval_splits);
  for (std::size_t s = 0; s < cfg.eval_splits; ++s) {
    SplitMetrics& m = per_seed[s];
    m.clustering =
        hungarian_align(kmeans(selected_full.x, classes, s), data.labels);
    const auto [train_part, test_part] = train_test_split(data, cfg.eval_train_ratio, s);
    const Dataset train_sel = with_columns(train_part, selection.indices);
    const Dataset test_sel = with_columns(test_part, selection.indices);
    if (cfg.tune_by_test) {
      // Opt-in shortcut: tunes the classifier on the test split itself, so
      // the reported accuracy is optimistically biased.
      for (const std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{5}}) {
        if (k > train_sel.n()) continue;
        const double acc = knn_classify(train_sel, test_sel, k);
        if (acc > m.classification) {
          m.classification = acc;
          m.knn_k = k;
        }
      }
    } else {
      m.knn_k = cfg.eval_knn_k;
      m.classification = knn_classify(train_sel, test_sel, cfg.eval_knn_k);
    }
    m.rmse = reconstruction_rmse(train_part, test_part, selection.indices, 1.5, s);
  }

  std::vector<double> clustering, classification, rmse;
  std::vector<std::vector<std::string>> rows;
  for (std::size_t s = 0; s < cfg.eval_splits; ++s) {
    const SplitMetrics& m = per_seed[s];
    clustering.push_back(m.clustering);
    classification.push_back(m.classification);
    rmse.push_back(m.rmse);
    rows.push_back({std::to_string(s), format_double(m.clustering),
                    format_double(m.classification), format_double(m.rmse),
                    std::to_string(m.knn_k)});
  }
  const auto [clu_mean, clu_std] = mean_std(clustering);
  const auto [cls_mean, cls_std] = mean_std(classification);
  const auto [rec_mean, rec_std] = mean_std(rmse);

  EvalReport report;
  report.clustering_acc = clu_mean;
  report.classification_acc = cls_mean;
  report.reconstruction_rmse = rec_mean;
  report.graph_inter_class_edge_fraction = edge_fraction;
  report.metadata["clustering_acc_std"] = format_double(clu_std);
  report.metadata["classification_acc_std"] = format_double(cls_std);
  report.metadata["reconstruction_rmse_std"] = format_double(rec_std);
  report.metadata["splits"] = std::to_string(cfg.eval_splits);
  report.metadata["train_ratio"] = format_double(cfg.eval_train_ratio);
  report.metadata["selection_indices"] = join_indices(selection.indices);
  report.metadata["knn_k_policy"] =
      cfg.tune_by_test ? "tuned on test accuracy over {1,3,5} (leakage-prone)"
                       : "fixed k = " + std::to_string(cfg.eval_knn_k);

  ensure_dir(cfg.out_dir);
  write_resolved(cfg, cfg.out_dir);
  write_text_file(cfg.out_dir + "/eval.json", eval_report_to_json(report));
  write_table_csv(cfg.out_dir + "/eval_seeds.csv",
                  {"seed", "clustering_acc", "classification_acc", "reconstruction_rmse",
                   "knn_k"},
                  rows);

  std::printf("clustering accuracy:       %.4f +/- %.4f\n", clu_mean, clu_std);
  std::printf("classification accuracy:   %.4f +/- %.4f\n", cls_mean, cls_std);
  std::printf("reconstruction rmse:       %.4f +/- %.4f\n", rec_mean, rec_std);
  std::printf("inter-class edge fraction: %.6f\n", edge_fraction);
  std::printf("wrote %s/{resolved_config.json,eval.json,eval_seeds.csv}\n",
              cfg.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// export-graph

int run_export_graph(const RunConfig& cfg, const std::string& selection_path) {
  echo_config(cfg);
  const HardSelection selection = selection_from_json(read_text_file(selection_path));
  const Dataset data = load_standardized(cfg);
  check_selection_bounds(selection, data.d());
  const Matrix sub = select_columns(data.x, selection.indices);
  const SimilarityGraph graph = assemble_graph_hard(sub, graph_config(cfg.train));
  ensure_dir(cfg.out_dir);
  write_resolved(cfg, cfg.out_dir);
  write_graph_csv(cfg.out_dir + "/graph.csv", graph.s);
  write_text_file(cfg.out_dir + "/graph.json",
                  graph_header_json(data.n(), cfg.train.k, cfg.train.gamma, cfg.train.seed));
  std::printf("wrote %s/{resolved_config.json,graph.csv,graph.json}\n", cfg.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// selftest

int run_selftest(std::uint64_t seed) {
  std::printf("selftest seed: %llu\n", static_cast<unsigned long long>(seed));
  const std::vector<checks::CheckResult> results = checks::run_all(seed);
  std::size_t failed = 0;
  for (const checks::CheckResult& r : results) {
    std::printf("[%s] %-48s max error %.3e  tolerance %.0e%s%s\n",
                r.pass ? "ok " : "FAIL", r.name.c_str(), r.max_error, r.tolerance,
                r.detail.empty() ? "" : "  -- ", r.detail.c_str());
    if (!r.pass) ++failed;
  }
  std::printf("selftest: %zu/%zu checks passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint unsupervised feature selection and differentiable k-NN graph learning"};
  app.require_subcommand(1);
  int rc = 0;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset CSV + sidecar");
  ConfigArgs gen_args;
  gen_args.attach(gen);
  std::string gen_kind;
  long long gen_n = -1, gen_seed = -1;
  gen->add_option("kind", gen_kind, "blobs | moons | circles");
  gen->add_option("samples", gen_n, "sample count");
  gen->add_option("rng-seed", gen_seed, "generation seed");
  gen->callback([&] {
    RunConfig cfg = gen_args.resolve();
    if (!gen_kind.empty()) cfg.dataset_kind = gen_kind;
    if (gen_n >= 0) cfg.dataset_n = static_cast<std::size_t>(gen_n);
    if (gen_seed >= 0) cfg.dataset_seed = static_cast<std::uint64_t>(gen_seed);
    rc = run_gen(cfg);
  });

  CLI::App* train_cmd =
      app.add_subcommand("train", "Train the selector and graph on a dataset");
  ConfigArgs train_args;
  train_args.attach(train_cmd);
  std::string seeds_range;
  train_cmd->add_option("--seeds", seeds_range,
                        "fan out over seeds (FIRST..LAST) into per-seed directories");
  train_cmd->callback([&] {
    const RunConfig cfg = train_args.resolve();
    rc = seeds_range.empty() ? run_train(cfg)
                             : run_train_fanout(cfg, parse_seed_range(seeds_range));
  });

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate a saved selection on downstream tasks");
  ConfigArgs eval_args;
  eval_args.attach(eval_cmd);
  std::string eval_selection;
  eval_cmd->add_option("--selection", eval_selection, "selection JSON produced by train")
      ->required();
  eval_cmd->callback([&] { rc = run_eval(eval_args.resolve(), eval_selection); });

  CLI::App* export_cmd =
      app.add_subcommand("export-graph", "Rebuild and export the hard k-NN graph");
  ConfigArgs export_args;
  export_args.attach(export_cmd);
  std::string export_selection;
  export_cmd->add_option("--selection", export_selection, "selection JSON produced by train")
      ->required();
  export_cmd->callback([&] { rc = run_export_graph(export_args.resolve(), export_selection); });

  CLI::App* selftest_cmd =
      app.add_subcommand("selftest", "Run the numerical verification battery");
  std::uint64_t selftest_seed = 0;
  selftest_cmd->add_option("--seed", selftest_seed, "seed for the randomized checks");
  selftest_cmd->callback([&] { rc = run_selftest(selftest_seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const dirsel::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
