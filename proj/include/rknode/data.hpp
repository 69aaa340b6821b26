// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rknode/tensor.hpp"

namespace rknode {

enum class Split : int { train = 0, val = 1, test = 2 };

struct Dataset {
  Tensor features;          // (N, d), finite, within [range_lo, range_hi]
  std::vector<int> labels;  // N entries in [0, num_classes)
  int num_classes = 0;
  std::vector<Split> split;  // empty until assign_splits
  double range_lo = 0.0;
  double range_hi = 1.0;

  std::int64_t size() const { return features.rows(); }
  std::int64_t dim() const { return features.cols(); }
};

// Interleaved Archimedean spirals (one per class, ~1.5 turns), Gaussian
// feature noise, min-max scaled to [0,1]. Deterministic per seed.
Dataset make_spirals(int n_per_class, int classes, double noise_sigma,
                     std::uint64_t seed);

// Two concentric circles separated by `radius_gap`, n points total split as
// evenly as the parity of n allows, scaled to [0,1].
Dataset make_circles(int n, double radius_gap, double noise_sigma,
                     std::uint64_t seed);

// IDX binary pair (big-endian magic 0x00000803 for images, 0x00000801 for
// labels). Pixels are scaled to [0,1]. limit > 0 keeps only the first
// `limit` samples. Throws std::runtime_error on bad magic, truncation, or
// an image/label count mismatch.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::int64_t limit = 0);

// Stratified split: per class, shuffle then deal out train/val/test by the
// given fractions. Every class lands at least one training sample. The
// remaining fraction (1 - train - val) becomes the test split.
void assign_splits(Dataset& ds, double train_frac, double val_frac,
                   std::uint64_t seed);

// Rows belonging to one split, in the original order.
Dataset subset(const Dataset& ds, Split which);

// CSV `label,f0..f{d-1}`; features at 17 significant digits so the
// round-trip is value-identical. Splits are not serialized.
void write_dataset_csv(std::ostream& os, const Dataset& ds);
Dataset read_dataset_csv(std::istream& is);

}  // namespace rknode
