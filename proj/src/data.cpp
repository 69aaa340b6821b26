// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rknode/rng.hpp"

namespace rknode {

namespace {

// Rescale every feature column to exactly [0,1]. Constant columns map to 0.
void min_max_scale(Tensor& x) {
  const auto n = x.rows(), d = x.cols();
  for (std::int64_t j = 0; j < d; ++j) {
    double lo = x.at(0, j), hi = x.at(0, j);
    for (std::int64_t i = 1; i < n; ++i) {
      lo = std::min(lo, x.at(i, j));
      hi = std::max(hi, x.at(i, j));
    }
    const double span = hi - lo;
    for (std::int64_t i = 0; i < n; ++i)
      x.at(i, j) = span > 0.0 ? (x.at(i, j) - lo) / span : 0.0;
  }
}

std::uint32_t read_be32(std::istream& is, const std::string& path) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4))
    throw std::runtime_error("idx: truncated file (header) in " + path);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

Dataset make_spirals(int n_per_class, int classes, double noise_sigma,
                     std::uint64_t seed) {
  if (n_per_class < 1)
    throw std::invalid_argument("make_spirals: n_per_class must be >= 1");
  if (classes < 2)
    throw std::invalid_argument("make_spirals: need at least 2 classes");
  Rng rng(seed);
  const std::int64_t n = std::int64_t(n_per_class) * classes;
  Dataset ds;
  ds.features = Tensor({n, 2});
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.num_classes = classes;

  const double turns = 1.5;
  std::int64_t row = 0;
  for (int c = 0; c < classes; ++c) {
    const double offset = 2.0 * std::numbers::pi * c / classes;
    for (int i = 0; i < n_per_class; ++i, ++row) {
      // march outward along the arm; keep away from the origin so arms of
      // different classes never meet at r = 0
      const double t = (i + 0.5) / n_per_class;
      const double r = 0.1 + 0.9 * t;
      const double a = 2.0 * std::numbers::pi * turns * t + offset;
      ds.features.at(row, 0) = r * std::cos(a) + noise_sigma * rng.normal();
      ds.features.at(row, 1) = r * std::sin(a) + noise_sigma * rng.normal();
      ds.labels[static_cast<std::size_t>(row)] = c;
    }
  }
  min_max_scale(ds.features);
  return ds;
}

Dataset make_circles(int n, double radius_gap, double noise_sigma,
                     std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_circles: need at least 2 points");
  Rng rng(seed);
  Dataset ds;
  ds.features = Tensor({n, 2});
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.num_classes = 2;

  const int n0 = (n + 1) / 2;  // inner circle gets the odd one out
  for (int i = 0; i < n; ++i) {
    const bool inner = i < n0;
    const int k = inner ? i : i - n0;
    const int m = inner ? n0 : n - n0;
    const double r = inner ? 0.5 : 0.5 + radius_gap;
    const double a = 2.0 * std::numbers::pi * (k + 0.5) / m;
    ds.features.at(i, 0) = r * std::cos(a) + noise_sigma * rng.normal();
    ds.features.at(i, 1) = r * std::sin(a) + noise_sigma * rng.normal();
    ds.labels[static_cast<std::size_t>(i)] = inner ? 0 : 1;
  }
  min_max_scale(ds.features);
  return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::int64_t limit) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("idx: cannot open " + images_path);
  const std::uint32_t img_magic = read_be32(imgs, images_path);
  if (img_magic != 0x00000803u) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "0x%08x", img_magic);
    throw std::runtime_error("idx: bad magic " + std::string(buf) + " in " +
                             images_path + " (expected 0x00000803)");
  }
  const std::int64_t n_img = read_be32(imgs, images_path);
  const std::int64_t rows = read_be32(imgs, images_path);
  const std::int64_t cols = read_be32(imgs, images_path);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw std::runtime_error("idx: cannot open " + labels_path);
  const std::uint32_t lab_magic = read_be32(labs, labels_path);
  if (lab_magic != 0x00000801u) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "0x%08x", lab_magic);
    throw std::runtime_error("idx: bad magic " + std::string(buf) + " in " +
                             labels_path + " (expected 0x00000801)");
  }
  const std::int64_t n_lab = read_be32(labs, labels_path);
  if (n_img != n_lab)
    throw std::runtime_error("idx: " + std::to_string(n_img) + " images in " +
                             images_path + " but " + std::to_string(n_lab) +
                             " labels in " + labels_path);

  std::int64_t n = n_img;
  if (limit > 0 && limit < n) n = limit;
  const std::int64_t d = rows * cols;

  Dataset ds;
  ds.features = Tensor({n, d});
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.num_classes = 0;

  std::vector<unsigned char> pix(static_cast<std::size_t>(d));
  for (std::int64_t i = 0; i < n; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(pix.data()),
                   static_cast<std::streamsize>(pix.size())))
      throw std::runtime_error("idx: truncated file (image " +
                               std::to_string(i) + ") in " + images_path);
    for (std::int64_t j = 0; j < d; ++j)
      ds.features.at(i, j) = pix[static_cast<std::size_t>(j)] / 255.0;
    unsigned char y;
    if (!labs.read(reinterpret_cast<char*>(&y), 1))
      throw std::runtime_error("idx: truncated file (label " +
                               std::to_string(i) + ") in " + labels_path);
    ds.labels[static_cast<std::size_t>(i)] = y;
    ds.num_classes = std::max(ds.num_classes, int(y) + 1);
  }
  return ds;
}

void assign_splits(Dataset& ds, double train_frac, double val_frac,
                   std::uint64_t seed) {
  if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0)
    throw std::invalid_argument(
        "assign_splits: fractions must satisfy train > 0, val >= 0, "
        "train + val <= 1");
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(ds.size());
  ds.split.assign(n, Split::test);

  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < n; ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  for (auto& idx : by_class) {
    shuffle_vec(idx, rng);
    const auto nc = idx.size();
    auto n_train = static_cast<std::size_t>(
        std::llround(train_frac * static_cast<double>(nc)));
    n_train = std::max<std::size_t>(1, std::min(n_train, nc));
    auto n_val = static_cast<std::size_t>(
        std::llround(val_frac * static_cast<double>(nc)));
    n_val = std::min(n_val, nc - n_train);
    for (std::size_t k = 0; k < nc; ++k)
      ds.split[idx[k]] = k < n_train            ? Split::train
                         : k < n_train + n_val ? Split::val
                                               : Split::test;
  }
}

Dataset subset(const Dataset& ds, Split which) {
  if (ds.split.size() != static_cast<std::size_t>(ds.size()))
    throw std::invalid_argument("subset: dataset has no split assignment");
  std::vector<std::int64_t> rows;
  for (std::int64_t i = 0; i < ds.size(); ++i)
    if (ds.split[static_cast<std::size_t>(i)] == which) rows.push_back(i);

  Dataset out;
  out.num_classes = ds.num_classes;
  out.range_lo = ds.range_lo;
  out.range_hi = ds.range_hi;
  out.features = Tensor({static_cast<std::int64_t>(rows.size()), ds.dim()});
  out.labels.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::int64_t j = 0; j < ds.dim(); ++j)
      out.features.at(static_cast<std::int64_t>(k), j) = ds.features.at(rows[k], j);
    out.labels[k] = ds.labels[static_cast<std::size_t>(rows[k])];
  }
  return out;
}

void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  os << "label";
  for (std::int64_t j = 0; j < ds.dim(); ++j) os << ",f" << j;
  os << '\n';
  char buf[40];
  for (std::int64_t i = 0; i < ds.size(); ++i) {
    os << ds.labels[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.features.at(i, j));
      os << ',' << buf;
    }
    os << '\n';
  }
}

Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("dataset csv: empty input");
  std::int64_t d = 0;
  for (char ch : line)
    if (ch == ',') ++d;

  Dataset ds;
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ','))
      throw std::runtime_error("dataset csv: malformed row '" + line + "'");
    ds.labels.push_back(std::stoi(cell));
    std::int64_t got = 0;
    while (std::getline(row, cell, ',')) {
      values.push_back(std::stod(cell));
      ++got;
    }
    if (got != d)
      throw std::runtime_error("dataset csv: row has " + std::to_string(got) +
                               " features, expected " + std::to_string(d));
  }
  const auto n = static_cast<std::int64_t>(ds.labels.size());
  ds.features = Tensor({n, d}, std::move(values));
  for (int y : ds.labels) ds.num_classes = std::max(ds.num_classes, y + 1);
  return ds;
}

}  // namespace rknode
