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
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "evoarch/data.hpp"
#include "evoarch/genome.hpp"

namespace evoarch {

/// SGD hyperparameters and the three-stage schedule. Within stage s the
/// rate is stage_lrs[s] * (1 + gamma * t)^(-alpha), with t counted from the
/// start of the stage.
struct TrainPlan {
  int max_iters = 600;
  std::array<int, 2> stage_boundaries = {300, 450};
  std::array<double, 3> stage_lrs = {1e-1, 1e-3, 1e-5};
  double gamma = 0.001;
  double alpha = 0.75;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 64;
  std::uint64_t seed = 0;

  /// 20000 iterations, stages at 10000 and 15000, batch 128.
  static TrainPlan full_scale();
  /// `iters` iterations with the same 50% / 25% / 25% stage split, batch 64.
  static TrainPlan desk(int iters = 600);

  /// Throws std::invalid_argument if the plan is inconsistent.
  void check() const;
};

double lr_at(int global_t, const TrainPlan& plan);

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Learnable tensors of one layer. Convolution weights are laid out
/// (in_channels * filter^2) x out_channels; dense weights out x in.
template <typename Scalar>
struct ParamBlock {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
  Vector<Scalar> scale;  // batch norm, convolutions only
  Vector<Scalar> shift;
};

template <typename Scalar>
using Gradients = std::map<NodeId, ParamBlock<Scalar>>;

template <typename Scalar>
struct ModelState {
  std::map<NodeId, ParamBlock<Scalar>> params;
  std::map<NodeId, ParamBlock<Scalar>> velocity;
  std::map<NodeId, Vector<Scalar>> running_mean;
  std::map<NodeId, Vector<Scalar>> running_var;

  std::int64_t parameter_count() const;
};

enum class Mode { train, eval };

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kRunningMomentum = 0.9;

/// He-normal weights, zero biases, unit scale, running stats (0, 1).
template <typename Scalar>
ModelState<Scalar> init_model(const Genome& genome, std::uint64_t seed);

/// Batch is laid out one sample per column. Train mode uses batch
/// statistics (and refreshes the running ones) and applies dropout masks
/// derived from `dropout_seed`.
template <typename Scalar>
Matrix<Scalar> forward(ModelState<Scalar>& model, const Genome& genome,
                       const Matrix<Scalar>& batch, Mode mode,
                       std::uint64_t dropout_seed = 0);

/// Which ReLUs fire and which pooling inputs win; two batches with equal
/// patterns lie on the same smooth piece of the network function.
template <typename Scalar>
std::vector<std::int32_t> activation_pattern(ModelState<Scalar>& model, const Genome& genome,
                                             const Matrix<Scalar>& batch, Mode mode,
                                             std::uint64_t dropout_seed = 0);

template <typename Scalar>
Matrix<Scalar> softmax(const Matrix<Scalar>& logits);

template <typename Scalar>
Scalar cross_entropy(const Matrix<Scalar>& logits, std::span<const int> labels);

template <typename Scalar>
struct LossAndGrads {
  Scalar loss;
  Gradients<Scalar> grads;
};

/// Mean softmax cross-entropy in train mode plus reverse-mode gradients.
template <typename Scalar>
LossAndGrads<Scalar> loss_and_grads(ModelState<Scalar>& model, const Genome& genome,
                                    const Matrix<Scalar>& batch,
                                    std::span<const int> labels,
                                    std::uint64_t dropout_seed = 0);

/// v <- momentum * v + g + weight_decay * w;  w <- w - lr * v.
/// Batch-norm scale and shift are not decayed.
template <typename Scalar>
void sgd_step(ModelState<Scalar>& model, const Gradients<Scalar>& grads, double lr,
              const TrainPlan& plan);

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergedTraining : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CurvePoint {
  int iteration;
  double lr;
  double loss;
};

struct TrainResult {
  double validation_accuracy = 0.0;
  ModelState<float> model;
  std::vector<CurvePoint> curve;
};

/// Fresh initialization, `plan.max_iters` minibatch steps over shuffled
/// epochs, then eval-mode accuracy on the validation set.
TrainResult train(const Genome& genome, const DatasetSplit& split, const TrainPlan& plan);

double accuracy(ModelState<float>& model, const Genome& genome, const ImageSet& images,
                int batch_size = 256);

void write_curve_csv(const std::vector<CurvePoint>& curve,
                     const std::filesystem::path& path);

/// Raw little-endian float32 arrays in weights.bin plus a JSON manifest.
void save_model(const ModelState<float>& model, const std::filesystem::path& dir);
ModelState<float> load_model(const std::filesystem::path& dir);

}  // namespace evoarch
