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

#include "evoarch/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

namespace evoarch {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const fs::path& path) {
  if (bytes.size() < offset + 4) {
    throw TruncatedFile(path.string() + ": header ends early");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

fs::path first_existing(const std::vector<fs::path>& candidates) {
  for (const auto& p : candidates) {
    if (fs::exists(p)) return p;
  }
  return candidates.front();
}

}  // namespace

ImageSet ImageSet::subset(const std::vector<std::size_t>& indices) const {
  ImageSet out;
  out.shape = shape;
  out.num_classes = num_classes;
  out.pixels.resize(pixels.rows(), static_cast<Eigen::Index>(indices.size()));
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.pixels.col(static_cast<Eigen::Index>(i)) =
        pixels.col(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

ImageSet load_mnist(const fs::path& image_path, const fs::path& label_path) {
  const auto images = read_file(image_path);
  const auto labels = read_file(label_path);

  if (const auto magic = read_be32(images, 0, image_path); magic != kIdxImageMagic) {
    throw BadMagic(image_path.string() + ": unexpected magic " + std::to_string(magic));
  }
  if (const auto magic = read_be32(labels, 0, label_path); magic != kIdxLabelMagic) {
    throw BadMagic(label_path.string() + ": unexpected magic " + std::to_string(magic));
  }
  const std::size_t count = read_be32(images, 4, image_path);
  const std::size_t rows = read_be32(images, 8, image_path);
  const std::size_t cols = read_be32(images, 12, image_path);
  const std::size_t label_count = read_be32(labels, 4, label_path);
  if (count != label_count) {
    throw CountMismatch("image file holds " + std::to_string(count) +
                        " records but label file holds " + std::to_string(label_count));
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + count * pixels) {
    throw TruncatedFile(image_path.string() + ": expected " +
                        std::to_string(16 + count * pixels) + " bytes, found " +
                        std::to_string(images.size()));
  }
  if (labels.size() < 8 + count) {
    throw TruncatedFile(label_path.string() + ": expected " + std::to_string(8 + count) +
                        " bytes, found " + std::to_string(labels.size()));
  }

  ImageSet set;
  set.shape = TensorShape{1, static_cast<int>(rows), static_cast<int>(cols), true};
  set.num_classes = 10;
  set.pixels.resize(static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(count));
  set.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* src = images.data() + 16 + i * pixels;
    float* dst = set.pixels.col(static_cast<Eigen::Index>(i)).data();
    for (std::size_t p = 0; p < pixels; ++p) dst[p] = static_cast<float>(src[p]) / 255.0f;
    set.labels[i] = labels[8 + i];
    if (set.labels[i] >= set.num_classes) {
      throw LabelOutOfRange(label_path.string() + ": label " +
                            std::to_string(set.labels[i]) + " at record " +
                            std::to_string(i));
    }
  }
  return set;
}

ImageSet load_cifar10(const std::vector<fs::path>& batch_paths) {
  constexpr std::size_t kPixels = kCifarRecordBytes - 1;
  std::vector<std::vector<std::uint8_t>> files;
  std::size_t total = 0;
  for (const auto& path : batch_paths) {
    files.push_back(read_file(path));
    if (files.back().size() % kCifarRecordBytes != 0) {
      throw TruncatedFile(path.string() + ": size " + std::to_string(files.back().size()) +
                          " is not a multiple of " + std::to_string(kCifarRecordBytes));
    }
    total += files.back().size() / kCifarRecordBytes;
  }

  ImageSet set;
  set.shape = TensorShape{3, 32, 32, true};
  set.num_classes = 10;
  set.pixels.resize(static_cast<Eigen::Index>(kPixels), static_cast<Eigen::Index>(total));
  set.labels.resize(total);
  std::size_t record = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto& bytes = files[f];
    for (std::size_t offset = 0; offset < bytes.size(); offset += kCifarRecordBytes) {
      const std::uint8_t label = bytes[offset];
      if (label >= set.num_classes) {
        throw LabelOutOfRange(batch_paths[f].string() + ": label " + std::to_string(label) +
                              " at byte " + std::to_string(offset));
      }
      set.labels[record] = label;
      float* dst = set.pixels.col(static_cast<Eigen::Index>(record)).data();
      for (std::size_t p = 0; p < kPixels; ++p) {
        dst[p] = static_cast<float>(bytes[offset + 1 + p]) / 255.0f;
      }
      ++record;
    }
  }
  return set;
}

Eigen::VectorXf global_contrast_normalize(const Eigen::VectorXf& image) {
  const double mean = image.cast<double>().mean();
  const Eigen::VectorXd centered = image.cast<double>().array() - mean;
  const double std = std::sqrt(centered.squaredNorm() / static_cast<double>(image.size()));
  return (centered / std::max(std, 1e-8)).cast<float>();
}

void global_contrast_normalize(ImageSet& images) {
  for (Eigen::Index i = 0; i < images.pixels.cols(); ++i) {
    images.pixels.col(i) = global_contrast_normalize(Eigen::VectorXf(images.pixels.col(i)));
  }
}

Eigen::VectorXf pad_and_crop(const Eigen::VectorXf& image, const TensorShape& shape,
                             int pad, int dy, int dx) {
  const int h = shape.height;
  const int w = shape.width;
  Eigen::VectorXf out = Eigen::VectorXf::Zero(image.size());
  for (int c = 0; c < shape.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      const int sy = y + dy - pad;
      if (sy < 0 || sy >= h) continue;
      for (int x = 0; x < w; ++x) {
        const int sx = x + dx - pad;
        if (sx < 0 || sx >= w) continue;
        out[(c * h + y) * w + x] = image[(c * h + sy) * w + sx];
      }
    }
  }
  return out;
}

Eigen::VectorXf pad_and_random_crop(const Eigen::VectorXf& image,
                                    const TensorShape& shape, int pad, Rng& rng) {
  const auto span = static_cast<std::size_t>(2 * pad + 1);
  const int dy = static_cast<int>(uniform_index(rng, span));
  const int dx = static_cast<int>(uniform_index(rng, span));
  return pad_and_crop(image, shape, pad, dy, dx);
}

SplitIndices split_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in (0,1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x5eed));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  const auto validation =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  SplitIndices out;
  out.train.assign(order.begin(), order.end() - static_cast<long>(validation));
  out.validation.assign(order.end() - static_cast<long>(validation), order.end());
  return out;
}

DatasetSplit split_train_val(const ImageSet& train, double fraction, std::uint64_t seed,
                             std::optional<std::size_t> subset_n) {
  const std::size_t n = subset_n ? std::min(*subset_n, train.size()) : train.size();
  const SplitIndices parts = split_indices(n, fraction, seed);
  DatasetSplit split;
  split.train = train.subset(parts.train);
  split.validation = train.subset(parts.validation);
  split.test.shape = train.shape;
  split.test.num_classes = train.num_classes;
  split.test.pixels.resize(train.pixels.rows(), 0);
  split.seed = seed;
  return split;
}

DatasetSplit load_mnist_split(const fs::path& root, double fraction, std::uint64_t seed,
                              std::optional<std::size_t> subset_n) {
  const fs::path dir = first_existing({root / "mnist", root});
  const ImageSet train = load_mnist(dir / "train-images-idx3-ubyte",
                                    dir / "train-labels-idx1-ubyte");
  DatasetSplit split = split_train_val(train, fraction, seed, subset_n);
  const fs::path test_images = dir / "t10k-images-idx3-ubyte";
  if (fs::exists(test_images)) {
    split.test = load_mnist(test_images, dir / "t10k-labels-idx1-ubyte");
  }
  split.preprocessing = "scale[0,1]";
  return split;
}

DatasetSplit load_cifar10_split(const fs::path& root, double fraction, std::uint64_t seed,
                                std::optional<std::size_t> subset_n) {
  const fs::path dir = first_existing({root / "cifar-10-batches-bin", root});
  std::vector<fs::path> batches;
  for (int i = 1; i <= 5; ++i) {
    batches.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  }
  ImageSet train = load_cifar10(batches);
  global_contrast_normalize(train);
  DatasetSplit split = split_train_val(train, fraction, seed, subset_n);
  const fs::path test_batch = dir / "test_batch.bin";
  if (fs::exists(test_batch)) {
    split.test = load_cifar10({test_batch});
    global_contrast_normalize(split.test);
  }
  split.augment_crop = true;
  split.crop_pad = 4;
  split.preprocessing = "scale[0,1]+gcn";
  return split;
}

}  // namespace evoarch
