#include "dirsel/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dirsel/errors.hpp"
#include "dirsel/rng.hpp"

namespace dirsel {

namespace {

constexpr std::size_t kTotalFeatures = 20;
constexpr std::size_t kShapeFeatures = 2;
constexpr double kShapeNoiseStd = 0.1;

void shape_point(SyntheticKind kind, std::size_t index, std::size_t per_class, int cls,
                 double& sx, double& sy) {
  const double pi = std::numbers::pi;
  switch (kind) {
    case SyntheticKind::blobs:
      sx = cls == 0 ? -2.0 : 2.0;
      sy = 0.0;
      return;
    case SyntheticKind::moons: {
      // Half circles traced inclusively over [0, pi], inner one flipped and
      // shifted right by 1 and down by 0.5 so the arcs interleave.
      const double t = per_class > 1
                           ? pi * static_cast<double>(index) / static_cast<double>(per_class - 1)
                           : 0.0;
      if (cls == 0) {
        sx = std::cos(t);
        sy = std::sin(t);
      } else {
        sx = 1.0 - std::cos(t);
        sy = 0.5 - std::sin(t);
      }
      return;
    }
    case SyntheticKind::circles: {
      const double t = 2.0 * pi * static_cast<double>(index) / static_cast<double>(per_class);
      const double r = cls == 0 ? 1.0 : 0.5;
      sx = r * std::cos(t);
      sy = r * std::sin(t);
      return;
    }
  }
  throw ConfigError("gen_synthetic: unknown kind");
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || begin == end) {
    throw ParseError("csv row " + std::to_string(row) + ", column " + std::to_string(col) +
                     ": cannot parse \"" + cell + "\" as a number");
  }
  return value;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

void format_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

Dataset take_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
  Dataset part;
  part.x = Matrix(rows.size(), d.d());
  part.informative = d.informative;
  part.dropped = d.dropped;
  if (d.has_labels()) part.labels.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < d.d(); ++c) part.x(r, c) = d.x(rows[r], c);
    if (d.has_labels()) part.labels[r] = d.labels[rows[r]];
  }
  return part;
}

}  // namespace

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "blobs") return SyntheticKind::blobs;
  if (name == "moons") return SyntheticKind::moons;
  if (name == "circles") return SyntheticKind::circles;
  throw ConfigError("dataset: unknown synthetic kind \"" + name +
                    "\" (expected blobs, moons, or circles)");
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::blobs:
      return "blobs";
    case SyntheticKind::moons:
      return "moons";
    case SyntheticKind::circles:
      return "circles";
  }
  return "unknown";
}

Dataset gen_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed) {
  if (n < 20) throw ConfigError("gen_synthetic: n must be at least 20, got " + std::to_string(n));
  if (n % 2 != 0) {
    throw ConfigError("gen_synthetic: n must be even for two balanced classes, got " +
                      std::to_string(n));
  }
  const std::size_t per_class = n / 2;
  Dataset d;
  d.x = Matrix(n, kTotalFeatures);
  d.labels.resize(n);
  d.informative = {0, 1};
  CounterRng rng("data.gen." + to_string(kind), seed);
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = i < per_class ? 0 : 1;
    const std::size_t index = cls == 0 ? i : i - per_class;
    double sx = 0.0;
    double sy = 0.0;
    shape_point(kind, index, per_class, cls, sx, sy);
    d.x(i, 0) = sx + kShapeNoiseStd * rng.next_gaussian();
    d.x(i, 1) = sy + kShapeNoiseStd * rng.next_gaussian();
    for (std::size_t c = kShapeFeatures; c < kTotalFeatures; ++c) {
      d.x(i, c) = rng.next_gaussian();
    }
    d.labels[i] = cls;
  }
  return d;
}

Dataset standardize(const Dataset& d) {
  const std::size_t n = d.n();
  if (n == 0) throw EmptyDatasetError("standardize: dataset has no rows");
  std::vector<std::size_t> keep;
  std::vector<std::size_t> dropped = d.dropped;
  for (std::size_t c = 0; c < d.d(); ++c) {
    double lo = d.x(0, c);
    double hi = lo;
    for (std::size_t i = 1; i < n; ++i) {
      lo = std::min(lo, d.x(i, c));
      hi = std::max(hi, d.x(i, c));
    }
    if (hi == lo) {
      dropped.push_back(c);
    } else {
      keep.push_back(c);
    }
  }
  if (keep.empty()) {
    throw EmptyDatasetError("standardize: every feature is constant; nothing left to keep");
  }
  Dataset out;
  out.x = Matrix(n, keep.size());
  out.labels = d.labels;
  out.dropped = std::move(dropped);
  for (std::size_t idx : d.informative) {
    auto it = std::find(keep.begin(), keep.end(), idx);
    if (it != keep.end()) {
      out.informative.push_back(static_cast<std::size_t>(it - keep.begin()));
    }
  }
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const std::size_t c = keep[k];
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += d.x(i, c);
    mean /= static_cast<double>(n);
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = d.x(i, c) - mean;
      out.x(i, k) = v;
      norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    for (std::size_t i = 0; i < n; ++i) out.x(i, k) /= norm;
  }
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double train_ratio,
                                             std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw ConfigError("train_test_split: train_ratio must lie strictly between 0 and 1");
  }
  const std::size_t n = d.n();
  const auto n_train =
      static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw ConfigError("train_test_split: split leaves an empty part (n=" + std::to_string(n) +
                      ", train_ratio=" + std::to_string(train_ratio) + ")");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  CounterRng rng("data.split", seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> test_rows(order.begin() + static_cast<long>(n_train), order.end());
  return {take_rows(d, train_rows), take_rows(d, test_rows)};
}

Dataset load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw IoError("load_csv: cannot open " + path);
  std::vector<std::vector<double>> values;
  std::vector<int> labels;
  std::size_t expected_fields = 0;
  std::size_t line_no = 0;
  bool header_pending = opts.has_header;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = split_fields(line);
    if (expected_fields == 0) {
      expected_fields = fields.size();
      if (opts.label_column && *opts.label_column >= expected_fields) {
        throw ConfigError("load_csv: label_column " + std::to_string(*opts.label_column) +
                          " out of range for " + std::to_string(expected_fields) + " fields");
      }
    } else if (fields.size() != expected_fields) {
      throw ParseError("csv row " + std::to_string(line_no) + ": expected " +
                       std::to_string(expected_fields) + " fields, got " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(expected_fields);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const double v = parse_cell(fields[c], line_no, c + 1);
      if (opts.label_column && c == *opts.label_column) {
        const int lbl = static_cast<int>(std::llround(v));
        if (static_cast<double>(lbl) != v) {
          throw ParseError("csv row " + std::to_string(line_no) + ", column " +
                           std::to_string(c + 1) + ": label must be an integer, got \"" +
                           fields[c] + "\"");
        }
        labels.push_back(lbl);
      } else {
        row.push_back(v);
      }
    }
    values.push_back(std::move(row));
  }
  if (values.empty()) throw EmptyDatasetError("load_csv: no data rows in " + path);
  Dataset d;
  d.x = Matrix(values.size(), values.front().size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t c = 0; c < values[i].size(); ++c) d.x(i, c) = values[i][c];
  }
  d.labels = std::move(labels);
  return d;
}

void save_csv(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw IoError("save_csv: cannot open " + path + " for writing");
  std::string text = "# schema_version=1\n";
  for (std::size_t c = 0; c < d.d(); ++c) {
    if (c > 0) text += ',';
    text += 'f';
    text += std::to_string(c);
  }
  if (d.has_labels()) text += ",label";
  text += '\n';
  for (std::size_t i = 0; i < d.n(); ++i) {
    for (std::size_t c = 0; c < d.d(); ++c) {
      if (c > 0) text += ',';
      format_double(text, d.x(i, c));
    }
    if (d.has_labels()) {
      text += ',';
      text += std::to_string(d.labels[i]);
    }
    text += '\n';
  }
  out << text;
  if (!out) throw IoError("save_csv: write to " + path + " failed");
}

}  // namespace dirsel
