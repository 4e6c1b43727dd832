#include "dirsel/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dirsel/errors.hpp"
#include "json.hpp"

namespace dirsel {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json parse_or_throw(const std::string& text) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw ParseError(std::string("invalid JSON: ") + err.what());
  }
}

// Pulls `key` out of `obj` into `target` when present, enforcing the type;
// removes consumed keys so the caller can reject leftovers by name.
template <typename T>
void take(ordered_json& obj, const char* key, T& target) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    target = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(key) + ": wrong JSON type");
  }
  obj.erase(it);
}

void reject_leftovers(const ordered_json& obj, const char* scope) {
  if (obj.empty()) return;
  throw ConfigError(std::string(scope) + ": unknown field '" + obj.begin().key() + "'");
}

ordered_json train_config_json(const TrainConfig& cfg) {
  ordered_json j;
  j["m"] = cfg.m;
  j["k"] = cfg.k;
  j["gamma"] = cfg.gamma;
  j["zeta"] = cfg.zeta;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["ablation"] = to_string(cfg.ablation);
  j["heat_sigma"] = cfg.heat_sigma;
  j["log_every"] = cfg.log_every;
  j["epsilon"] = cfg.epsilon;
  j["t0"] = cfg.t0;
  j["t_min"] = cfg.t_min;
  return j;
}

TrainConfig train_config_from(ordered_json obj) {
  if (!obj.is_object()) throw ConfigError("train config: expected a JSON object");
  TrainConfig cfg;
  take(obj, "m", cfg.m);
  take(obj, "k", cfg.k);
  take(obj, "gamma", cfg.gamma);
  take(obj, "zeta", cfg.zeta);
  take(obj, "lr", cfg.lr);
  take(obj, "epochs", cfg.epochs);
  take(obj, "seed", cfg.seed);
  std::string ablation = to_string(cfg.ablation);
  take(obj, "ablation", ablation);
  cfg.ablation = ablation_from_string(ablation);
  take(obj, "heat_sigma", cfg.heat_sigma);
  take(obj, "log_every", cfg.log_every);
  take(obj, "epsilon", cfg.epsilon);
  take(obj, "t0", cfg.t0);
  take(obj, "t_min", cfg.t_min);
  reject_leftovers(obj, "train config");
  return cfg;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return std::move(buffer).str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

std::string train_config_to_json(const TrainConfig& cfg) {
  return train_config_json(cfg).dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
  return train_config_from(parse_or_throw(text));
}

std::string run_config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["train"] = train_config_json(cfg.train);
  ordered_json dataset;
  dataset["kind"] = cfg.dataset_kind;
  dataset["n"] = cfg.dataset_n;
  dataset["seed"] = cfg.dataset_seed;
  dataset["csv_path"] = cfg.csv_path;
  if (cfg.csv_label_column.has_value()) {
    dataset["csv_label_column"] = *cfg.csv_label_column;
  } else {
    dataset["csv_label_column"] = nullptr;
  }
  j["dataset"] = dataset;
  ordered_json eval;
  eval["splits"] = cfg.eval_splits;
  eval["train_ratio"] = cfg.eval_train_ratio;
  eval["knn_k"] = cfg.eval_knn_k;
  eval["tune_by_test"] = cfg.tune_by_test;
  j["eval"] = eval;
  j["out_dir"] = cfg.out_dir;
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  ordered_json obj = parse_or_throw(text);
  if (!obj.is_object()) throw ConfigError("run config: expected a JSON object");
  RunConfig cfg;
  int version = kSchemaVersion;
  take(obj, "schema_version", version);
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion) + ", got " +
                      std::to_string(version));
  }
  if (const auto it = obj.find("train"); it != obj.end()) {
    cfg.train = train_config_from(*it);
    obj.erase(it);
  }
  if (const auto it = obj.find("dataset"); it != obj.end()) {
    ordered_json dataset = *it;
    obj.erase(it);
    if (!dataset.is_object()) throw ConfigError("dataset: expected a JSON object");
    take(dataset, "kind", cfg.dataset_kind);
    take(dataset, "n", cfg.dataset_n);
    take(dataset, "seed", cfg.dataset_seed);
    take(dataset, "csv_path", cfg.csv_path);
    if (const auto lc = dataset.find("csv_label_column"); lc != dataset.end()) {
      if (lc->is_null()) {
        cfg.csv_label_column.reset();
      } else if (lc->is_number_unsigned()) {
        cfg.csv_label_column = lc->get<std::size_t>();
      } else {
        throw ConfigError("csv_label_column: wrong JSON type");
      }
      dataset.erase(lc);
    }
    reject_leftovers(dataset, "dataset");
  }
  if (const auto it = obj.find("eval"); it != obj.end()) {
    ordered_json eval = *it;
    obj.erase(it);
    if (!eval.is_object()) throw ConfigError("eval: expected a JSON object");
    take(eval, "splits", cfg.eval_splits);
    take(eval, "train_ratio", cfg.eval_train_ratio);
    take(eval, "knn_k", cfg.eval_knn_k);
    take(eval, "tune_by_test", cfg.tune_by_test);
    reject_leftovers(eval, "eval");
  }
  take(obj, "out_dir", cfg.out_dir);
  reject_leftovers(obj, "run config");
  return cfg;
}

std::string train_report_to_json(const TrainReport& report) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = train_config_json(report.config);
  j["loss_trace"] = report.loss_trace;
  ordered_json selection;
  selection["indices"] = report.selection.indices;
  selection["has_duplicates"] = report.selection.has_duplicates;
  j["selection"] = selection;
  ordered_json edges = ordered_json::array();
  const Matrix& s = report.hard_graph.s;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t col = 0; col < s.cols(); ++col) {
      if (s(i, col) != 0.0) edges.push_back({i, col, s(i, col)});
    }
  }
  j["hard_graph_edges"] = edges;
  return j.dump(2) + "\n";
}

std::string selection_to_json(const HardSelection& selection) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["indices"] = selection.indices;
  j["has_duplicates"] = selection.has_duplicates;
  return j.dump(2) + "\n";
}

HardSelection selection_from_json(const std::string& text) {
  ordered_json obj = parse_or_throw(text);
  if (!obj.is_object()) throw ConfigError("selection: expected a JSON object");
  HardSelection sel;
  int version = kSchemaVersion;
  take(obj, "schema_version", version);
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion) + ", got " +
                      std::to_string(version));
  }
  take(obj, "indices", sel.indices);
  take(obj, "has_duplicates", sel.has_duplicates);
  reject_leftovers(obj, "selection");
  if (sel.indices.empty()) throw ConfigError("indices: selection must not be empty");
  return sel;
}

std::string eval_report_to_json(const EvalReport& report) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["clustering_acc"] = report.clustering_acc;
  j["classification_acc"] = report.classification_acc;
  j["reconstruction_rmse"] = report.reconstruction_rmse;
  j["graph_inter_class_edge_fraction"] = report.graph_inter_class_edge_fraction;
  j["metadata"] = report.metadata;
  return j.dump(2) + "\n";
}

std::string dataset_sidecar_json(const std::string& kind, std::size_t n, std::uint64_t seed,
                                 const std::vector<std::size_t>& informative) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  j["n"] = n;
  j["seed"] = seed;
  j["informative_indices"] = informative;
  return j.dump(2) + "\n";
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_loss_csv(const std::string& path, const std::vector<double>& trace) {
  std::string text = "# schema_version=1\nepoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    text += std::to_string(i);
    text += ',';
    text += format_double(trace[i]);
    text += '\n';
  }
  write_text_file(path, text);
}

void write_graph_csv(const std::string& path, const Matrix& s) {
  std::string text = "# schema_version=1\ni,j,weight\n";
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) {
      if (s(i, j) == 0.0) continue;
      text += std::to_string(i);
      text += ',';
      text += std::to_string(j);
      text += ',';
      text += format_double(s(i, j));
      text += '\n';
    }
  }
  write_text_file(path, text);
}

std::string graph_header_json(std::size_t n, std::size_t k, double gamma, std::uint64_t seed) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["n"] = n;
  j["k"] = k;
  j["gamma"] = gamma;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::string text = "# schema_version=1\n";
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c > 0) text += ',';
    text += header[c];
  }
  text += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) {
      throw ShapeError("write_table_csv: row width differs from header");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) text += ',';
      text += row[c];
    }
    text += '\n';
  }
  write_text_file(path, text);
}

}  // namespace dirsel
