#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dirsel/matrix.hpp"

namespace dirsel {

enum class SyntheticKind { blobs, moons, circles };

SyntheticKind synthetic_kind_from_string(const std::string& name);
std::string to_string(SyntheticKind kind);

struct Dataset {
  Matrix x;                              // n samples by d features
  std::vector<int> labels;               // empty when unlabeled, else size n
  std::vector<std::size_t> informative;  // planted feature columns (synthetic data)
  std::vector<std::size_t> dropped;      // original column indices removed by standardize

  std::size_t n() const { return x.rows(); }
  std::size_t d() const { return x.cols(); }
  bool has_labels() const { return !labels.empty(); }
};

// Two-class shapes in columns 0..1 plus 18 standard-normal distractor columns.
// blobs: isotropic clusters at (-2,0) and (2,0); moons: interleaved half
// circles with 0.5 vertical offset; circles: concentric radii 1 and 0.5.
// Shape coordinates get additive N(0, 0.1^2) noise. n must be even and >= 20.
Dataset gen_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed);

// Drops exactly-constant columns, then centers each survivor and scales it to
// unit L2 norm. Dropped original indices are recorded; labels pass through.
// Throws EmptyDatasetError when no feature survives.
Dataset standardize(const Dataset& d);

// Deterministic shuffled split; train gets round(train_ratio * n) rows.
// Both parts must end up non-empty.
std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double train_ratio,
                                             std::uint64_t seed);

struct CsvOptions {
  bool has_header = false;
  // When set, this column is read as integer labels instead of a feature.
  std::optional<std::size_t> label_column;
};

// Strict numeric CSV. Lines starting with '#' are skipped; every data row
// must have the same field count; malformed cells raise ParseError naming
// the 1-based row and column.
Dataset load_csv(const std::string& path, const CsvOptions& opts = {});

// Writes "# schema_version=1", a header row, then one row per sample with
// round-trip double formatting. Labels become a trailing "label" column.
void save_csv(const std::string& path, const Dataset& d);

}  // namespace dirsel
