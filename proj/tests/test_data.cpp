#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "dirsel/dataset.hpp"
#include "dirsel/errors.hpp"
#include "dirsel/matrix.hpp"
#include "doctest.h"

using namespace dirsel;

namespace {

// Leave-one-out 1-nearest-neighbour accuracy on a subset of columns.
double loo_knn_accuracy(const Dataset& d, const std::vector<std::size_t>& cols) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    double best = 1e300;
    int vote = -1;
    for (std::size_t j = 0; j < d.n(); ++j) {
      if (j == i) continue;
      double dist = 0.0;
      for (std::size_t c : cols) {
        const double diff = d.x(i, c) - d.x(j, c);
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        vote = d.labels[j];
      }
    }
    if (vote == d.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(d.n());
}

double column_mean(const Matrix& x, std::size_t c) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, c);
  return s / static_cast<double>(x.rows());
}

double column_var(const Matrix& x, std::size_t c) {
  const double m = column_mean(x, c);
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double v = x(i, c) - m;
    s += v * v;
  }
  return s / static_cast<double>(x.rows() - 1);
}

const char* kTmpCsv = "test_data_tmp.csv";

void write_file(const char* path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("gen_synthetic shapes, balance, and determinism") {
  for (auto kind : {SyntheticKind::blobs, SyntheticKind::moons, SyntheticKind::circles}) {
    const Dataset d = gen_synthetic(kind, 600, 7);
    CHECK(d.n() == 600);
    CHECK(d.d() == 20);
    CHECK(d.labels.size() == 600);
    CHECK(d.informative == std::vector<std::size_t>{0, 1});
    CHECK(std::count(d.labels.begin(), d.labels.end(), 0) == 300);
    CHECK(std::count(d.labels.begin(), d.labels.end(), 1) == 300);
    CHECK(all_finite(d.x));

    const Dataset again = gen_synthetic(kind, 600, 7);
    CHECK(max_abs_diff(d.x, again.x) == 0.0);
    const Dataset other = gen_synthetic(kind, 600, 8);
    CHECK(max_abs_diff(d.x, other.x) > 0.0);
  }
}

TEST_CASE("gen_synthetic distractor columns are standard normal") {
  const Dataset d = gen_synthetic(SyntheticKind::blobs, 600, 11);
  for (std::size_t c : {std::size_t{2}, std::size_t{5}, std::size_t{19}}) {
    CHECK(std::abs(column_mean(d.x, c)) < 0.15);
    CHECK(column_var(d.x, c) == doctest::Approx(1.0).epsilon(0.15));
  }
}

TEST_CASE("gen_synthetic blob geometry") {
  const Dataset d = gen_synthetic(SyntheticKind::blobs, 600, 3);
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double cx = d.labels[i] == 0 ? -2.0 : 2.0;
    CHECK(std::abs(d.x(i, 0) - cx) < 0.6);  // 6 sigma
    CHECK(std::abs(d.x(i, 1)) < 0.6);
  }
}

TEST_CASE("gen_synthetic circles geometry") {
  const Dataset d = gen_synthetic(SyntheticKind::circles, 600, 3);
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double r = std::hypot(d.x(i, 0), d.x(i, 1));
    const double target = d.labels[i] == 0 ? 1.0 : 0.5;
    CHECK(std::abs(r - target) < 0.6);
  }
}

TEST_CASE("planted columns separate the classes") {
  const std::vector<std::size_t> cols{0, 1};
  CHECK(loo_knn_accuracy(gen_synthetic(SyntheticKind::blobs, 600, 1), cols) >= 0.99);
  CHECK(loo_knn_accuracy(gen_synthetic(SyntheticKind::moons, 600, 1), cols) >= 0.9);
  CHECK(loo_knn_accuracy(gen_synthetic(SyntheticKind::circles, 600, 1), cols) >= 0.9);
}

TEST_CASE("distractor columns alone do not separate the classes") {
  const std::vector<std::size_t> cols{2, 3};
  const double acc = loo_knn_accuracy(gen_synthetic(SyntheticKind::blobs, 600, 1), cols);
  CHECK(acc < 0.7);
}

TEST_CASE("gen_synthetic input validation") {
  CHECK_THROWS_AS(gen_synthetic(SyntheticKind::blobs, 601, 0), ConfigError);
  CHECK_THROWS_AS(gen_synthetic(SyntheticKind::blobs, 10, 0), ConfigError);
  CHECK_THROWS_AS(synthetic_kind_from_string("spirals"), ConfigError);
  CHECK(synthetic_kind_from_string("moons") == SyntheticKind::moons);
  CHECK(to_string(SyntheticKind::circles) == "circles");
}

TEST_CASE("standardize matches the hand-worked column") {
  // Column (1,2,3): mean 2, centered (-1,0,1), norm sqrt(2).
  Dataset d;
  d.x = Matrix::from_rows({{1.0}, {2.0}, {3.0}});
  const Dataset s = standardize(d);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(s.x(0, 0) == doctest::Approx(-inv_sqrt2).epsilon(1e-12));
  CHECK(s.x(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.x(2, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-12));
}

TEST_CASE("standardize yields zero mean and unit norm columns") {
  const Dataset d = gen_synthetic(SyntheticKind::moons, 200, 5);
  const Dataset s = standardize(d);
  CHECK(s.d() == 20);
  CHECK(s.dropped.empty());
  for (std::size_t c = 0; c < s.d(); ++c) {
    CHECK(std::abs(column_mean(s.x, c)) < 1e-12);
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < s.n(); ++i) norm_sq += s.x(i, c) * s.x(i, c);
    CHECK(norm_sq == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("standardize is idempotent") {
  const Dataset d = gen_synthetic(SyntheticKind::circles, 100, 9);
  const Dataset once = standardize(d);
  const Dataset twice = standardize(once);
  CHECK(max_abs_diff(once.x, twice.x) < 1e-12);
}

TEST_CASE("standardize drops constant columns and remaps informative indices") {
  Dataset d;
  d.x = Matrix::from_rows({{7.0, 1.0, 5.0}, {7.0, 2.0, 4.0}, {7.0, 3.0, 6.0}});
  d.informative = {1, 2};
  d.labels = {0, 0, 1};
  const Dataset s = standardize(d);
  CHECK(s.d() == 2);
  CHECK(s.dropped == std::vector<std::size_t>{0});
  CHECK(s.informative == std::vector<std::size_t>{0, 1});
  CHECK(s.labels == d.labels);
}

TEST_CASE("standardize rejects an all-constant dataset") {
  Dataset d;
  d.x = Matrix::from_rows({{1.0, 2.0}, {1.0, 2.0}});
  CHECK_THROWS_AS(standardize(d), EmptyDatasetError);
}

TEST_CASE("train_test_split sizes and disjointness") {
  const Dataset d = gen_synthetic(SyntheticKind::blobs, 600, 2);
  const auto [train, test] = train_test_split(d, 0.8, 42);
  CHECK(train.n() == 480);
  CHECK(test.n() == 120);
  CHECK(train.d() == 20);

  // Every original row appears exactly once across the two parts.
  std::multiset<double> seen;
  for (std::size_t i = 0; i < train.n(); ++i) seen.insert(train.x(i, 0));
  for (std::size_t i = 0; i < test.n(); ++i) seen.insert(test.x(i, 0));
  std::multiset<double> expected;
  for (std::size_t i = 0; i < d.n(); ++i) expected.insert(d.x(i, 0));
  CHECK(seen == expected);
}

TEST_CASE("train_test_split keeps labels aligned with rows") {
  const Dataset d = gen_synthetic(SyntheticKind::blobs, 100, 13);
  const auto [train, test] = train_test_split(d, 0.8, 1);
  for (std::size_t i = 0; i < train.n(); ++i) {
    const int expected = train.x(i, 0) < 0.0 ? 0 : 1;
    CHECK(train.labels[i] == expected);
  }
  for (std::size_t i = 0; i < test.n(); ++i) {
    const int expected = test.x(i, 0) < 0.0 ? 0 : 1;
    CHECK(test.labels[i] == expected);
  }
}

TEST_CASE("train_test_split on ten rows gives eight and two") {
  Dataset d;
  d.x = Matrix(10, 1);
  for (std::size_t i = 0; i < 10; ++i) d.x(i, 0) = static_cast<double>(i);
  const auto [train, test] = train_test_split(d, 0.8, 0);
  CHECK(train.n() == 8);
  CHECK(test.n() == 2);

  const auto [train2, test2] = train_test_split(d, 0.8, 0);
  CHECK(max_abs_diff(train.x, train2.x) == 0.0);
  const auto [train3, test3] = train_test_split(d, 0.8, 1);
  CHECK(max_abs_diff(train.x, train3.x) > 0.0);
}

TEST_CASE("train_test_split validation") {
  Dataset d;
  d.x = Matrix(10, 1);
  CHECK_THROWS_AS(train_test_split(d, 0.0, 0), ConfigError);
  CHECK_THROWS_AS(train_test_split(d, 1.0, 0), ConfigError);
  CHECK_THROWS_AS(train_test_split(d, 0.01, 0), ConfigError);
}

TEST_CASE("csv round trip preserves values and labels exactly") {
  const Dataset d = gen_synthetic(SyntheticKind::moons, 40, 21);
  save_csv(kTmpCsv, d);
  CsvOptions opts;
  opts.has_header = true;
  opts.label_column = 20;
  const Dataset back = load_csv(kTmpCsv, opts);
  CHECK(back.n() == d.n());
  CHECK(back.d() == d.d());
  CHECK(max_abs_diff(back.x, d.x) == 0.0);
  CHECK(back.labels == d.labels);
  std::remove(kTmpCsv);
}

TEST_CASE("csv writer emits the schema comment first") {
  Dataset d;
  d.x = Matrix::from_rows({{1.5, -2.0}});
  save_csv(kTmpCsv, d);
  std::ifstream in(kTmpCsv);
  std::string first;
  std::getline(in, first);
  CHECK(first == "# schema_version=1");
  std::remove(kTmpCsv);
}

TEST_CASE("csv parser rejects ragged rows") {
  write_file(kTmpCsv, "1,2,3\n4,5\n");
  CHECK_THROWS_WITH_AS(load_csv(kTmpCsv), doctest::Contains("expected 3 fields, got 2"),
                       ParseError);
  std::remove(kTmpCsv);
}

TEST_CASE("csv parser names the bad cell") {
  write_file(kTmpCsv, "# comment\n1,2\n3,oops\n");
  CHECK_THROWS_WITH_AS(load_csv(kTmpCsv), doctest::Contains("row 3, column 2"), ParseError);
  std::remove(kTmpCsv);
}

TEST_CASE("csv parser rejects non-integer labels and empty files") {
  write_file(kTmpCsv, "1,2,0.5\n");
  CsvOptions opts;
  opts.label_column = 2;
  CHECK_THROWS_AS(load_csv(kTmpCsv, opts), ParseError);
  write_file(kTmpCsv, "# only a comment\n");
  CHECK_THROWS_AS(load_csv(kTmpCsv), EmptyDatasetError);
  std::remove(kTmpCsv);
  CHECK_THROWS_AS(load_csv("no_such_file.csv"), IoError);
}
