#ifndef DIRSEL_IO_HPP
#define DIRSEL_IO_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dirsel/eval.hpp"
#include "dirsel/matrix.hpp"
#include "dirsel/selector.hpp"
#include "dirsel/train.hpp"

namespace dirsel {

// Every file this project writes carries schema_version so readers can detect
// stale artifacts; bump on any layout change.
inline constexpr int kSchemaVersion = 1;

// Resolved configuration of one CLI run: training hyperparameters plus the
// dataset source, evaluation toggles, and the output directory. JSON keys use
// these exact field names grouped as {train, dataset, eval, out_dir}.
struct RunConfig {
  TrainConfig train;

  std::string dataset_kind = "blobs";  // blobs | moons | circles | csv
  std::size_t dataset_n = 600;
  std::uint64_t dataset_seed = 0;
  std::string csv_path;                           // used when dataset_kind == "csv"
  std::optional<std::size_t> csv_label_column;    // null = unlabeled CSV

  std::size_t eval_splits = 10;
  double eval_train_ratio = 0.8;
  std::size_t eval_knn_k = 1;
  bool tune_by_test = false;  // leakage-prone protocol, off unless asked

  std::string out_dir = "runs";
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Strict parsers: malformed JSON raises ParseError; unknown or mistyped
// fields raise ConfigError naming the field. Missing fields keep defaults.
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

// Wall-clock time is deliberately left out of the report JSON so identical
// (dataset, config, seed) runs serialize to identical bytes.
std::string train_report_to_json(const TrainReport& report);

std::string selection_to_json(const HardSelection& selection);
HardSelection selection_from_json(const std::string& text);

std::string eval_report_to_json(const EvalReport& report);

std::string dataset_sidecar_json(const std::string& kind, std::size_t n, std::uint64_t seed,
                                 const std::vector<std::size_t>& informative);

// "# schema_version=1", then "epoch,loss" rows with round-trip doubles.
void write_loss_csv(const std::string& path, const std::vector<double>& trace);

// Row-major nonzero entries of s as "i,j,weight" rows.
void write_graph_csv(const std::string& path, const Matrix& s);
std::string graph_header_json(std::size_t n, std::size_t k, double gamma, std::uint64_t seed);

// Generic CSV with the schema comment, a header row, and pre-rendered cells.
void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

// Round-trip double rendering shared by the CSV writers.
std::string format_double(double v);

}  // namespace dirsel

#endif  // DIRSEL_IO_HPP
