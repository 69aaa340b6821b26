// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rknode/data.hpp"

using namespace rknode;

namespace {

// leave-one-out 1-nearest-neighbor accuracy; crude but a good separability probe
double loo_1nn(const Dataset& ds) {
  const auto n = ds.size();
  const auto d = ds.dim();
  int hits = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    double best = 1e300;
    int best_label = -1;
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double dist = 0;
      for (std::int64_t k = 0; k < d; ++k) {
        double diff = ds.features.data[i * d + k] - ds.features.data[j * d + k];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_label = ds.labels[j];
      }
    }
    if (best_label == ds.labels[i]) ++hits;
  }
  return double(hits) / double(n);
}

std::string tmp_path(const char* stem) {
  return std::string("/tmp/rknode_data_test_") + stem;
}

void write_be32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

// tiny synthetic IDX pair: n 2x2 images, labels 0..n-1 mod 3
void write_idx_pair(const std::string& img, const std::string& lab, int n,
                    std::uint32_t img_magic = 0x00000803,
                    std::uint32_t lab_magic = 0x00000801,
                    int lab_count = -1, bool truncate_pixels = false) {
  std::ofstream fi(img, std::ios::binary);
  write_be32(fi, img_magic);
  write_be32(fi, static_cast<std::uint32_t>(n));
  write_be32(fi, 2);
  write_be32(fi, 2);
  int pixels = truncate_pixels ? n * 4 - 3 : n * 4;
  for (int i = 0; i < pixels; ++i) {
    unsigned char p = static_cast<unsigned char>((i * 37) % 256);
    fi.write(reinterpret_cast<const char*>(&p), 1);
  }
  fi.close();
  std::ofstream fl(lab, std::ios::binary);
  write_be32(fl, lab_magic);
  write_be32(fl, static_cast<std::uint32_t>(lab_count < 0 ? n : lab_count));
  int m = lab_count < 0 ? n : lab_count;
  for (int i = 0; i < m; ++i) {
    unsigned char l = static_cast<unsigned char>(i % 3);
    fl.write(reinterpret_cast<const char*>(&l), 1);
  }
}

}  // namespace

TEST_CASE("spirals: deterministic, balanced, unit range, separable") {
  Dataset a = make_spirals(120, 2, 0.02, 7);
  Dataset b = make_spirals(120, 2, 0.02, 7);
  REQUIRE(a.size() == 240);
  REQUIRE(a.dim() == 2);
  CHECK(a.num_classes == 2);
  CHECK(a.features.data == b.features.data);  // bitwise determinism
  CHECK(a.labels == b.labels);

  std::map<int, int> counts;
  for (int l : a.labels) ++counts[l];
  CHECK(counts[0] == 120);
  CHECK(counts[1] == 120);

  double lo = 1e300, hi = -1e300;
  for (double v : a.features.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.0);
  CHECK(lo == doctest::Approx(0.0).epsilon(1e-12));  // min-max hits the ends
  CHECK(hi == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(loo_1nn(a) == 1.0);  // low noise leaves the arms cleanly separated

  Dataset c = make_spirals(120, 2, 0.02, 8);
  CHECK(c.features.data != a.features.data);  // seed matters
}

TEST_CASE("spirals support more than two arms") {
  Dataset d = make_spirals(40, 3, 0.01, 5);
  CHECK(d.num_classes == 3);
  CHECK(d.size() == 120);
  CHECK(*std::max_element(d.labels.begin(), d.labels.end()) == 2);
}

TEST_CASE("circles: two rings, near-even split, separable at a wide gap") {
  Dataset d = make_circles(201, 0.5, 0.01, 11);
  CHECK(d.size() == 201);
  CHECK(d.num_classes == 2);
  int ones = 0;
  for (int l : d.labels) ones += l;
  CHECK(std::abs(2 * ones - 201) <= 1);  // differs by at most one point
  CHECK(loo_1nn(d) > 0.99);
}

TEST_CASE("idx loader round-trips a synthetic pair") {
  auto img = tmp_path("ok.images"), lab = tmp_path("ok.labels");
  write_idx_pair(img, lab, 6);
  Dataset d = load_idx(img, lab);
  REQUIRE(d.size() == 6);
  CHECK(d.dim() == 4);
  CHECK(d.num_classes == 3);
  CHECK(d.labels[4] == 1);
  // first pixel of the first image is 0, scaled stays 0; 37/255 next
  CHECK(d.features.data[0] == 0.0);
  CHECK(d.features.data[1] == doctest::Approx(37.0 / 255.0).epsilon(1e-15));
  CHECK(d.range_lo == 0.0);
  CHECK(d.range_hi == 1.0);

  Dataset first2 = load_idx(img, lab, 2);
  CHECK(first2.size() == 2);
  CHECK(first2.features.data ==
        std::vector<double>(d.features.data.begin(), d.features.data.begin() + 8));
}

TEST_CASE("idx loader names the offending file in its errors") {
  auto img = tmp_path("bad.images"), lab = tmp_path("bad.labels");

  SUBCASE("bad image magic") {
    write_idx_pair(img, lab, 3, 0x00000807);
    CHECK_THROWS_WITH_AS(load_idx(img, lab),
                         doctest::Contains("bad.images"), std::runtime_error);
  }
  SUBCASE("bad label magic") {
    write_idx_pair(img, lab, 3, 0x00000803, 0x00000805);
    CHECK_THROWS_WITH_AS(load_idx(img, lab),
                         doctest::Contains("bad.labels"), std::runtime_error);
  }
  SUBCASE("truncated pixel payload") {
    write_idx_pair(img, lab, 3, 0x00000803, 0x00000801, -1, true);
    CHECK_THROWS_AS(load_idx(img, lab), std::runtime_error);
  }
  SUBCASE("count mismatch between the two files") {
    write_idx_pair(img, lab, 3, 0x00000803, 0x00000801, 5);
    CHECK_THROWS_AS(load_idx(img, lab), std::runtime_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx(tmp_path("nowhere.images"), lab),
                    std::runtime_error);
  }
}

TEST_CASE("splits are stratified and keep every class in training") {
  Dataset d = make_spirals(50, 2, 0.05, 3);
  assign_splits(d, 0.7, 0.15, 99);
  REQUIRE(d.split.size() == static_cast<std::size_t>(d.size()));

  std::map<int, std::map<Split, int>> table;
  for (std::int64_t i = 0; i < d.size(); ++i) ++table[d.labels[i]][d.split[i]];
  for (auto& [label, row] : table) {
    CHECK(row[Split::train] == 35);  // round(0.7 * 50) per class
    CHECK(row[Split::val] == 8);     // round(0.15 * 50) = round(7.5)
    CHECK(row[Split::test] == 7);
  }

  // tiny per-class counts still leave at least one training sample
  Dataset tiny = make_spirals(2, 2, 0.05, 3);
  assign_splits(tiny, 0.1, 0.1, 1);
  std::map<int, int> train_per_class;
  for (std::int64_t i = 0; i < tiny.size(); ++i)
    if (tiny.split[i] == Split::train) ++train_per_class[tiny.labels[i]];
  CHECK(train_per_class[0] >= 1);
  CHECK(train_per_class[1] >= 1);

  Dataset d2 = make_spirals(50, 2, 0.05, 3);
  assign_splits(d2, 0.7, 0.15, 99);
  CHECK(d2.split == d.split);  // deterministic per seed
  assign_splits(d2, 0.7, 0.15, 100);
  CHECK(d2.split != d.split);

  CHECK_THROWS_AS(assign_splits(d, 0.9, 0.2, 1), std::invalid_argument);
  CHECK_THROWS_AS(assign_splits(d, 0.0, 0.5, 1), std::invalid_argument);
}

TEST_CASE("subset keeps original order and copies metadata") {
  Dataset d = make_spirals(30, 2, 0.05, 4);
  assign_splits(d, 0.6, 0.2, 17);
  Dataset tr = subset(d, Split::train);
  Dataset va = subset(d, Split::val);
  Dataset te = subset(d, Split::test);
  CHECK(tr.size() + va.size() + te.size() == d.size());
  CHECK(tr.num_classes == 2);
  CHECK(tr.range_hi == d.range_hi);

  // walk the full set and compare against the subset rows in order
  std::int64_t k = 0;
  for (std::int64_t i = 0; i < d.size(); ++i) {
    if (d.split[i] != Split::train) continue;
    for (std::int64_t c = 0; c < d.dim(); ++c)
      CHECK(tr.features.data[k * d.dim() + c] == d.features.data[i * d.dim() + c]);
    CHECK(tr.labels[k] == d.labels[i]);
    ++k;
  }
  CHECK(k == tr.size());

  CHECK_THROWS_AS(subset(make_spirals(4, 2, 0.0, 1), Split::train),
                  std::invalid_argument);  // no splits assigned yet
}

TEST_CASE("dataset csv round-trip is value-identical") {
  Dataset d = make_spirals(25, 2, 0.03, 9);
  std::ostringstream os;
  write_dataset_csv(os, d);
  std::string text = os.str();
  CHECK(text.rfind("label,f0,f1\n", 0) == 0);

  std::istringstream is(text);
  Dataset back = read_dataset_csv(is);
  CHECK(back.size() == d.size());
  CHECK(back.labels == d.labels);
  CHECK(back.num_classes == d.num_classes);
  for (std::size_t i = 0; i < d.features.data.size(); ++i)
    CHECK(back.features.data[i] == d.features.data[i]);  // 17 digits round-trip
}
