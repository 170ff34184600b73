// Copyright 2026 The Evoarch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evoarch/genome.hpp"
#include "evoarch/rng.hpp"

namespace evoarch {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadMagic : DataError {
  using DataError::DataError;
};
struct TruncatedFile : DataError {
  using DataError::DataError;
};
struct CountMismatch : DataError {
  using DataError::DataError;
};
struct LabelOutOfRange : DataError {
  using DataError::DataError;
};

/// Images stored one per column, channel-major within a column
/// (index = c * h * w + y * w + x), pixels as float.
struct ImageSet {
  TensorShape shape;
  Eigen::MatrixXf pixels;
  std::vector<std::uint8_t> labels;
  int num_classes = 10;

  std::size_t size() const { return labels.size(); }
  ImageSet subset(const std::vector<std::size_t>& indices) const;
};

struct DatasetSplit {
  ImageSet train;
  ImageSet validation;
  ImageSet test;
  /// Random pad-and-crop on training batches only.
  bool augment_crop = false;
  int crop_pad = 4;
  std::string preprocessing = "none";
  std::uint64_t seed = 0;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kCifarRecordBytes = 3073;

/// Reads an IDX image/label file pair; pixels are scaled to [0,1].
ImageSet load_mnist(const std::filesystem::path& image_path,
                    const std::filesystem::path& label_path);

/// Reads CIFAR-10 binary batches (1 label byte + 3072 channel-major pixels).
ImageSet load_cifar10(const std::vector<std::filesystem::path>& batch_paths);

/// Per image: subtract the mean, divide by max(std, 1e-8).
void global_contrast_normalize(ImageSet& images);
Eigen::VectorXf global_contrast_normalize(const Eigen::VectorXf& image);

/// Zero-pads by `pad` on every side and crops back to the original size at
/// offset (dy, dx) in [0, 2 * pad].
Eigen::VectorXf pad_and_crop(const Eigen::VectorXf& image, const TensorShape& shape,
                             int pad, int dy, int dx);
Eigen::VectorXf pad_and_random_crop(const Eigen::VectorXf& image,
                                    const TensorShape& shape, int pad, Rng& rng);

/// Truncates to the first `subset_n` records (if given), shuffles with
/// `seed`, and moves the last `fraction` of the shuffled order into the
/// validation set.
DatasetSplit split_train_val(const ImageSet& train, double fraction,
                             std::uint64_t seed,
                             std::optional<std::size_t> subset_n = std::nullopt);

/// Index partition used by split_train_val; exposed for leakage checks.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
SplitIndices split_indices(std::size_t n, double fraction, std::uint64_t seed);

/// Locates the canonical files under `root` (or `root/mnist`) and builds a
/// split; the test set is loaded alongside.
DatasetSplit load_mnist_split(const std::filesystem::path& root, double fraction,
                              std::uint64_t seed,
                              std::optional<std::size_t> subset_n = std::nullopt);
/// CIFAR-10 from `root/cifar-10-batches-bin` (or `root`), GCN applied,
/// random crops enabled for training.
DatasetSplit load_cifar10_split(const std::filesystem::path& root, double fraction,
                                std::uint64_t seed,
                                std::optional<std::size_t> subset_n = std::nullopt);

}  // namespace evoarch
