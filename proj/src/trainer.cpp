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

#include "evoarch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "evoarch/rng.hpp"

namespace evoarch {

TrainPlan TrainPlan::full_scale() {
  TrainPlan plan;
  plan.max_iters = 20000;
  plan.stage_boundaries = {10000, 15000};
  plan.batch_size = 128;
  return plan;
}

TrainPlan TrainPlan::desk(int iters) {
  TrainPlan plan;
  plan.max_iters = iters;
  plan.stage_boundaries = {iters / 2, (iters * 3) / 4};
  return plan;
}

void TrainPlan::check() const {
  if (max_iters < 0) throw std::invalid_argument("max_iters must be non-negative");
  if (max_iters > 0 && !(0 < stage_boundaries[0] && stage_boundaries[0] < stage_boundaries[1] &&
                         stage_boundaries[1] < max_iters)) {
    throw std::invalid_argument("stage boundaries must satisfy 0 < b1 < b2 < max_iters");
  }
  for (double lr : stage_lrs) {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  }
  if (!(gamma > 0.0) || !(alpha > 0.0)) {
    throw std::invalid_argument("gamma and alpha must be positive");
  }
  if (momentum < 0.0 || weight_decay < 0.0) {
    throw std::invalid_argument("momentum and weight decay must be non-negative");
  }
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
}

double lr_at(int global_t, const TrainPlan& plan) {
  int stage = 0;
  int start = 0;
  if (global_t >= plan.stage_boundaries[1]) {
    stage = 2;
    start = plan.stage_boundaries[1];
  } else if (global_t >= plan.stage_boundaries[0]) {
    stage = 1;
    start = plan.stage_boundaries[0];
  }
  const double local = static_cast<double>(global_t - start);
  return plan.stage_lrs[stage] * std::pow(1.0 + plan.gamma * local, -plan.alpha);
}

template <typename Scalar>
std::int64_t ModelState<Scalar>::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& [id, block] : params) {
    total += block.weight.size() + block.bias.size() + block.scale.size() +
             block.shift.size();
  }
  return total;
}

namespace {

template <typename Scalar>
using MatrixMap = Eigen::Map<Matrix<Scalar>>;
template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const Matrix<Scalar>>;

struct ConvGeometry {
  int in_channels, height, width;
  int out_channels, out_height, out_width;
  int filter, stride, pad;

  int in_plane() const { return height * width; }
  int out_plane() const { return out_height * out_width; }
  int patch() const { return in_channels * filter * filter; }
  bool pointwise() const { return filter == 1 && stride == 1 && pad == 0; }
};

// Unfolds one sample (channel-major planes) into an
// (out_plane x in_channels * filter^2) patch matrix.
template <typename Scalar>
void im2col(const Scalar* in, const ConvGeometry& g, Matrix<Scalar>& cols) {
  const int f = g.filter;
  cols.resize(g.out_plane(), g.patch());
  for (int c = 0; c < g.in_channels; ++c) {
    for (int ky = 0; ky < f; ++ky) {
      for (int kx = 0; kx < f; ++kx) {
        Scalar* dst = cols.col((c * f + ky) * f + kx).data();
        for (int oy = 0; oy < g.out_height; ++oy) {
          Scalar* row = dst + oy * g.out_width;
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) {
            std::fill(row, row + g.out_width, Scalar(0));
            continue;
          }
          const Scalar* src = in + (c * g.height + iy) * g.width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            row[ox] = (ix >= 0 && ix < g.width) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Matrix<Scalar>& dcols, const ConvGeometry& g, Scalar* dx) {
  const int f = g.filter;
  for (int c = 0; c < g.in_channels; ++c) {
    for (int ky = 0; ky < f; ++ky) {
      for (int kx = 0; kx < f; ++kx) {
        const Scalar* src = dcols.col((c * f + ky) * f + kx).data();
        for (int oy = 0; oy < g.out_height; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          Scalar* dst = dx + (c * g.height + iy) * g.width;
          const Scalar* row = src + oy * g.out_width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

template <typename Scalar>
struct NodeCache {
  Matrix<Scalar> out;
  Matrix<Scalar> xhat;
  Vector<Scalar> inv_std;
  std::vector<int> argmax;
  Matrix<Scalar> mask;
};

// One forward pass over a genome with the intermediates needed for
// backpropagation.
template <typename Scalar>
class Pass {
 public:
  explicit Pass(const Genome& genome)
      : genome_(genome), order_(genome.topological_order()), shapes_(infer_shapes(genome)) {}

  const Matrix<Scalar>& run(ModelState<Scalar>& model, const Matrix<Scalar>& batch, Mode mode,
                            std::uint64_t dropout_seed) {
    const TensorShape& input = genome_.input_shape();
    if (batch.rows() != input.size()) {
      throw std::invalid_argument("batch rows " + std::to_string(batch.rows()) +
                                  " do not match input shape " + to_string(input));
    }
    batch_size_ = static_cast<int>(batch.cols());
    for (NodeId id : order_) {
      const Node& node = genome_.node(id);
      NodeCache<Scalar>& slot = cache_[id];
      switch (node.type()) {
        case LayerType::input:
          slot.out = batch;
          break;
        case LayerType::convolution:
          conv_forward(model, id, node, mode, slot);
          break;
        case LayerType::max_pool:
          pool_forward(id, node, slot);
          break;
        case LayerType::fully_connected:
        case LayerType::classifier_head: {
          const auto& p = model.params.at(id);
          slot.out.noalias() = p.weight * cache_.at(node.inputs[0]).out;
          slot.out.colwise() += p.bias;
          break;
        }
        case LayerType::dropout:
          dropout_forward(id, node, mode, dropout_seed, slot);
          break;
        case LayerType::skip:
          slot.out = cache_.at(node.inputs[0]).out + cache_.at(node.inputs[1]).out;
          break;
        case LayerType::concat: {
          const auto& a = cache_.at(node.inputs[0]).out;
          const auto& b = cache_.at(node.inputs[1]).out;
          slot.out.resize(a.rows() + b.rows(), a.cols());
          slot.out.topRows(a.rows()) = a;
          slot.out.bottomRows(b.rows()) = b;
          break;
        }
        case LayerType::global_pool: {
          const TensorShape& s = shapes_.at(node.inputs[0]);
          const int plane = s.height * s.width;
          const auto& x = cache_.at(node.inputs[0]).out;
          slot.out.resize(s.channels, x.cols());
          for (int c = 0; c < s.channels; ++c) {
            slot.out.row(c) = x.middleRows(c * plane, plane).colwise().mean();
          }
          break;
        }
      }
    }
    return cache_.at(order_.back()).out;
  }

  // ReLU on/off bits and pooling winners of the last run.
  std::vector<std::int32_t> pattern() const {
    std::vector<std::int32_t> out;
    for (NodeId id : order_) {
      const auto type = genome_.node(id).type();
      const auto& slot = cache_.at(id);
      if (type == LayerType::convolution) {
        for (Eigen::Index i = 0; i < slot.out.size(); ++i) {
          out.push_back(slot.out.data()[i] > Scalar(0) ? 1 : 0);
        }
      } else if (type == LayerType::max_pool) {
        out.insert(out.end(), slot.argmax.begin(), slot.argmax.end());
      }
    }
    return out;
  }

  Gradients<Scalar> backward(const ModelState<Scalar>& model, const Matrix<Scalar>& dlogits) {
    Gradients<Scalar> grads;
    std::map<NodeId, Matrix<Scalar>> upstream;
    upstream[order_.back()] = dlogits;
    auto accumulate = [&](NodeId id, const auto& g) {
      auto it = upstream.find(id);
      if (it == upstream.end()) {
        upstream.emplace(id, g);
      } else {
        it->second += g;
      }
    };

    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      const NodeId id = *it;
      auto up = upstream.find(id);
      if (up == upstream.end()) continue;
      const Matrix<Scalar>& dout = up->second;
      const Node& node = genome_.node(id);
      switch (node.type()) {
        case LayerType::input:
          break;
        case LayerType::convolution:
          accumulate(node.inputs[0], conv_backward(model, id, node, dout, grads[id]));
          break;
        case LayerType::max_pool: {
          const auto& x = cache_.at(node.inputs[0]).out;
          const auto& argmax = cache_.at(id).argmax;
          Matrix<Scalar> dx = Matrix<Scalar>::Zero(x.rows(), x.cols());
          const Eigen::Index out_rows = dout.rows();
          for (Eigen::Index s = 0; s < dout.cols(); ++s) {
            for (Eigen::Index r = 0; r < out_rows; ++r) {
              dx(argmax[s * out_rows + r], s) += dout(r, s);
            }
          }
          accumulate(node.inputs[0], dx);
          break;
        }
        case LayerType::fully_connected:
        case LayerType::classifier_head: {
          const auto& x = cache_.at(node.inputs[0]).out;
          const auto& p = model.params.at(id);
          auto& g = grads[id];
          g.weight.noalias() = dout * x.transpose();
          g.bias = dout.rowwise().sum();
          accumulate(node.inputs[0], Matrix<Scalar>(p.weight.transpose() * dout));
          break;
        }
        case LayerType::dropout:
          accumulate(node.inputs[0], Matrix<Scalar>(dout.cwiseProduct(cache_.at(id).mask)));
          break;
        case LayerType::skip:
          accumulate(node.inputs[0], dout);
          accumulate(node.inputs[1], dout);
          break;
        case LayerType::concat: {
          const auto rows_a = cache_.at(node.inputs[0]).out.rows();
          accumulate(node.inputs[0], Matrix<Scalar>(dout.topRows(rows_a)));
          accumulate(node.inputs[1], Matrix<Scalar>(dout.bottomRows(dout.rows() - rows_a)));
          break;
        }
        case LayerType::global_pool: {
          const TensorShape& s = shapes_.at(node.inputs[0]);
          const int plane = s.height * s.width;
          Matrix<Scalar> dx(s.size(), dout.cols());
          for (int c = 0; c < s.channels; ++c) {
            dx.middleRows(c * plane, plane) =
                (dout.row(c) / static_cast<Scalar>(plane)).replicate(plane, 1);
          }
          accumulate(node.inputs[0], dx);
          break;
        }
      }
      upstream.erase(up);
    }
    return grads;
  }

 private:
  ConvGeometry geometry(NodeId id, const Node& node) const {
    const auto& conv = std::get<Convolution>(node.kind);
    const TensorShape& in = shapes_.at(node.inputs[0]);
    const TensorShape& out = shapes_.at(id);
    return {in.channels, in.height, in.width, out.channels, out.height, out.width,
            conv.filter, conv.stride, conv.pad};
  }

  void conv_forward(ModelState<Scalar>& model, NodeId id, const Node& node, Mode mode,
                    NodeCache<Scalar>& slot) {
    const ConvGeometry g = geometry(id, node);
    const auto& p = model.params.at(id);
    const auto& x = cache_.at(node.inputs[0]).out;
    const int plane = g.out_plane();
    const Eigen::Index n = x.cols();

    Matrix<Scalar> z(static_cast<Eigen::Index>(g.out_channels) * plane, n);
    Matrix<Scalar> cols;
    for (Eigen::Index s = 0; s < n; ++s) {
      MatrixMap<Scalar> zs(z.col(s).data(), plane, g.out_channels);
      if (g.pointwise()) {
        ConstMatrixMap<Scalar> xs(x.col(s).data(), plane, g.in_channels);
        zs.noalias() = xs * p.weight;
      } else {
        im2col(x.col(s).data(), g, cols);
        zs.noalias() = cols * p.weight;
      }
      zs.rowwise() += p.bias.transpose();
    }

    slot.xhat.resize(z.rows(), n);
    slot.inv_std.resize(g.out_channels);
    slot.out.resize(z.rows(), n);
    auto& running_mean = model.running_mean.at(id);
    auto& running_var = model.running_var.at(id);
    const Scalar count = static_cast<Scalar>(plane) * static_cast<Scalar>(n);
    for (int c = 0; c < g.out_channels; ++c) {
      auto block = z.middleRows(static_cast<Eigen::Index>(c) * plane, plane);
      Scalar mean;
      Scalar var;
      if (mode == Mode::train) {
        mean = block.sum() / count;
        var = (block.array() - mean).square().sum() / count;
        running_mean[c] = static_cast<Scalar>(kRunningMomentum) * running_mean[c] +
                          static_cast<Scalar>(1.0 - kRunningMomentum) * mean;
        running_var[c] = static_cast<Scalar>(kRunningMomentum) * running_var[c] +
                         static_cast<Scalar>(1.0 - kRunningMomentum) * var;
      } else {
        mean = running_mean[c];
        var = running_var[c];
      }
      const Scalar inv = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kBatchNormEpsilon));
      slot.inv_std[c] = inv;
      auto xhat = slot.xhat.middleRows(static_cast<Eigen::Index>(c) * plane, plane);
      xhat = (block.array() - mean) * inv;
      slot.out.middleRows(static_cast<Eigen::Index>(c) * plane, plane) =
          (xhat.array() * p.scale[c] + p.shift[c]).cwiseMax(Scalar(0));
    }
  }

  Matrix<Scalar> conv_backward(const ModelState<Scalar>& model, NodeId id, const Node& node,
                               const Matrix<Scalar>& dout, ParamBlock<Scalar>& grad) {
    const ConvGeometry g = geometry(id, node);
    const auto& p = model.params.at(id);
    const auto& slot = cache_.at(id);
    const auto& x = cache_.at(node.inputs[0]).out;
    const int plane = g.out_plane();
    const Eigen::Index n = x.cols();
    const Scalar count = static_cast<Scalar>(plane) * static_cast<Scalar>(n);

    Matrix<Scalar> dy = dout.cwiseProduct(
        (slot.out.array() > Scalar(0)).template cast<Scalar>().matrix());
    grad.scale.resize(g.out_channels);
    grad.shift.resize(g.out_channels);
    Matrix<Scalar> dz(dy.rows(), n);
    for (int c = 0; c < g.out_channels; ++c) {
      const Eigen::Index start = static_cast<Eigen::Index>(c) * plane;
      auto dyb = dy.middleRows(start, plane);
      auto xhat = slot.xhat.middleRows(start, plane);
      const Scalar dscale = (dyb.array() * xhat.array()).sum();
      const Scalar dshift = dyb.sum();
      grad.scale[c] = dscale;
      grad.shift[c] = dshift;
      const Scalar gamma = p.scale[c];
      // d/dz of gamma * xhat with batch statistics.
      dz.middleRows(start, plane) =
          ((dyb.array() * gamma * count - gamma * dshift - xhat.array() * gamma * dscale) *
           (slot.inv_std[c] / count))
              .matrix();
    }

    grad.weight = Matrix<Scalar>::Zero(p.weight.rows(), p.weight.cols());
    grad.bias = Vector<Scalar>::Zero(g.out_channels);
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(x.rows(), n);
    Matrix<Scalar> cols;
    Matrix<Scalar> dcols;
    for (Eigen::Index s = 0; s < n; ++s) {
      ConstMatrixMap<Scalar> dzs(dz.col(s).data(), plane, g.out_channels);
      grad.bias += dzs.colwise().sum().transpose();
      if (g.pointwise()) {
        ConstMatrixMap<Scalar> xs(x.col(s).data(), plane, g.in_channels);
        grad.weight.noalias() += xs.transpose() * dzs;
        MatrixMap<Scalar> dxs(dx.col(s).data(), plane, g.in_channels);
        dxs.noalias() = dzs * p.weight.transpose();
      } else {
        im2col(x.col(s).data(), g, cols);
        grad.weight.noalias() += cols.transpose() * dzs;
        dcols.noalias() = dzs * p.weight.transpose();
        col2im(dcols, g, dx.col(s).data());
      }
    }
    return dx;
  }

  void pool_forward(NodeId id, const Node& node, NodeCache<Scalar>& slot) {
    const auto& pool = std::get<MaxPool>(node.kind);
    const TensorShape& in = shapes_.at(node.inputs[0]);
    const TensorShape& out = shapes_.at(id);
    const auto& x = cache_.at(node.inputs[0]).out;
    const Eigen::Index n = x.cols();
    const Eigen::Index out_rows = out.size();
    slot.out.resize(out_rows, n);
    slot.argmax.assign(static_cast<std::size_t>(out_rows * n), 0);
    for (Eigen::Index s = 0; s < n; ++s) {
      const Scalar* src = x.col(s).data();
      Scalar* dst = slot.out.col(s).data();
      int* arg = slot.argmax.data() + s * out_rows;
      for (int c = 0; c < in.channels; ++c) {
        for (int oy = 0; oy < out.height; ++oy) {
          for (int ox = 0; ox < out.width; ++ox) {
            Scalar best = -std::numeric_limits<Scalar>::infinity();
            int best_index = -1;
            for (int ky = 0; ky < pool.kernel; ++ky) {
              const int iy = oy * pool.stride - pool.pad + ky;
              if (iy < 0 || iy >= in.height) continue;
              for (int kx = 0; kx < pool.kernel; ++kx) {
                const int ix = ox * pool.stride - pool.pad + kx;
                if (ix < 0 || ix >= in.width) continue;
                const int index = (c * in.height + iy) * in.width + ix;
                if (best_index < 0 || src[index] > best) {
                  best = src[index];
                  best_index = index;
                }
              }
            }
            const int o = (c * out.height + oy) * out.width + ox;
            dst[o] = best;
            arg[o] = best_index;
          }
        }
      }
    }
  }

  void dropout_forward(NodeId id, const Node& node, Mode mode, std::uint64_t seed,
                       NodeCache<Scalar>& slot) {
    const auto& x = cache_.at(node.inputs[0]).out;
    if (mode == Mode::eval) {
      slot.out = x;
      return;
    }
    const double ratio = std::get<Dropout>(node.kind).ratio;
    const double keep = 1.0 - ratio;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(id)));
    slot.mask.resize(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        slot.mask(i, j) = uniform_real(rng) < keep ? static_cast<Scalar>(1.0 / keep) : Scalar(0);
      }
    }
    slot.out = x.cwiseProduct(slot.mask);
  }

  const Genome& genome_;
  std::vector<NodeId> order_;
  ShapeMap shapes_;
  std::map<NodeId, NodeCache<Scalar>> cache_;
  int batch_size_ = 0;
};

template <typename Scalar>
Matrix<Scalar> random_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = static_cast<Scalar>(standard_normal(rng) * stddev);
    }
  }
  return m;
}

template <typename Scalar>
Matrix<Scalar> softmax_cross_entropy_grad(const Matrix<Scalar>& logits,
                                          std::span<const int> labels) {
  Matrix<Scalar> grad = softmax(logits);
  const Scalar n = static_cast<Scalar>(logits.cols());
  for (Eigen::Index s = 0; s < logits.cols(); ++s) grad(labels[s], s) -= Scalar(1);
  return grad / n;
}

template <typename T, typename Scalar>
void momentum_update(T& weight, T& velocity, const T& grad, double lr, double momentum,
                     double decay) {
  if (grad.size() == 0) return;
  if (velocity.size() != weight.size()) velocity = T::Zero(weight.rows(), weight.cols());
  velocity = static_cast<Scalar>(momentum) * velocity + grad +
             static_cast<Scalar>(decay) * weight;
  weight -= static_cast<Scalar>(lr) * velocity;
}

}  // namespace

template <typename Scalar>
ModelState<Scalar> init_model(const Genome& genome, std::uint64_t seed) {
  const ShapeMap shapes = infer_shapes(genome);
  Rng rng(seed);
  ModelState<Scalar> model;
  for (const auto& [id, node] : genome.nodes()) {
    ParamBlock<Scalar> block;
    if (const auto* conv = std::get_if<Convolution>(&node.kind)) {
      const int fan_in = shapes.at(node.inputs[0]).channels * conv->filter * conv->filter;
      block.weight = random_normal<Scalar>(rng, fan_in, conv->channels, std::sqrt(2.0 / fan_in));
      block.bias = Vector<Scalar>::Zero(conv->channels);
      block.scale = Vector<Scalar>::Ones(conv->channels);
      block.shift = Vector<Scalar>::Zero(conv->channels);
      model.running_mean[id] = Vector<Scalar>::Zero(conv->channels);
      model.running_var[id] = Vector<Scalar>::Ones(conv->channels);
    } else if (node.type() == LayerType::fully_connected ||
               node.type() == LayerType::classifier_head) {
      const auto fan_in = static_cast<Eigen::Index>(shapes.at(node.inputs[0]).size());
      const Eigen::Index units = shapes.at(id).channels;
      block.weight = random_normal<Scalar>(rng, units, fan_in,
                                           std::sqrt(2.0 / static_cast<double>(fan_in)));
      block.bias = Vector<Scalar>::Zero(units);
    } else {
      continue;
    }
    model.params.emplace(id, std::move(block));
  }
  return model;
}

template <typename Scalar>
Matrix<Scalar> forward(ModelState<Scalar>& model, const Genome& genome,
                       const Matrix<Scalar>& batch, Mode mode, std::uint64_t dropout_seed) {
  Pass<Scalar> pass(genome);
  return pass.run(model, batch, mode, dropout_seed);
}

template <typename Scalar>
std::vector<std::int32_t> activation_pattern(ModelState<Scalar>& model, const Genome& genome,
                                             const Matrix<Scalar>& batch, Mode mode,
                                             std::uint64_t dropout_seed) {
  Pass<Scalar> pass(genome);
  pass.run(model, batch, mode, dropout_seed);
  return pass.pattern();
}

template <typename Scalar>
Matrix<Scalar> softmax(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.cols(); ++s) {
    const Scalar top = logits.col(s).maxCoeff();
    out.col(s) = (logits.col(s).array() - top).exp();
    out.col(s) /= out.col(s).sum();
  }
  return out;
}

template <typename Scalar>
Scalar cross_entropy(const Matrix<Scalar>& logits, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.cols()) {
    throw std::invalid_argument("label count does not match batch size");
  }
  Scalar total = 0;
  for (Eigen::Index s = 0; s < logits.cols(); ++s) {
    const int label = labels[static_cast<std::size_t>(s)];
    if (label < 0 || label >= logits.rows()) {
      throw std::invalid_argument("label " + std::to_string(label) + " out of range");
    }
    const Scalar top = logits.col(s).maxCoeff();
    const Scalar lse = top + std::log((logits.col(s).array() - top).exp().sum());
    total += lse - logits(label, s);
  }
  return total / static_cast<Scalar>(logits.cols());
}

template <typename Scalar>
LossAndGrads<Scalar> loss_and_grads(ModelState<Scalar>& model, const Genome& genome,
                                    const Matrix<Scalar>& batch, std::span<const int> labels,
                                    std::uint64_t dropout_seed) {
  Pass<Scalar> pass(genome);
  const Matrix<Scalar>& logits = pass.run(model, batch, Mode::train, dropout_seed);
  const Scalar loss = cross_entropy<Scalar>(logits, labels);
  if (!std::isfinite(static_cast<double>(loss))) {
    throw NonFiniteLoss("loss is not finite");
  }
  Matrix<Scalar> dlogits = softmax_cross_entropy_grad<Scalar>(logits, labels);
  return {loss, pass.backward(model, dlogits)};
}

template <typename Scalar>
void sgd_step(ModelState<Scalar>& model, const Gradients<Scalar>& grads, double lr,
              const TrainPlan& plan) {
  for (const auto& [id, g] : grads) {
    auto& w = model.params.at(id);
    auto& v = model.velocity[id];
    momentum_update<Matrix<Scalar>, Scalar>(w.weight, v.weight, g.weight, lr, plan.momentum,
                                            plan.weight_decay);
    momentum_update<Vector<Scalar>, Scalar>(w.bias, v.bias, g.bias, lr, plan.momentum,
                                            plan.weight_decay);
    momentum_update<Vector<Scalar>, Scalar>(w.scale, v.scale, g.scale, lr, plan.momentum, 0.0);
    momentum_update<Vector<Scalar>, Scalar>(w.shift, v.shift, g.shift, lr, plan.momentum, 0.0);
  }
}

double accuracy(ModelState<float>& model, const Genome& genome, const ImageSet& images,
                int batch_size) {
  if (images.size() == 0) return 0.0;
  Pass<float> pass(genome);
  std::size_t correct = 0;
  const auto n = static_cast<Eigen::Index>(images.size());
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - start);
    const Matrix<float> batch = images.pixels.middleCols(start, count);
    const Matrix<float>& logits = pass.run(model, batch, Mode::eval, 0);
    for (Eigen::Index s = 0; s < count; ++s) {
      Eigen::Index best = 0;
      logits.col(s).maxCoeff(&best);
      if (best == images.labels[static_cast<std::size_t>(start + s)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(images.size());
}

TrainResult train(const Genome& genome, const DatasetSplit& split, const TrainPlan& plan) {
  plan.check();
  TrainResult result;
  result.model = init_model<float>(genome, mix_seed(plan.seed, 1));
  const ImageSet& data = split.train;
  const std::size_t n = data.size();
  if (plan.max_iters > 0 && n == 0) throw std::invalid_argument("empty training set");

  Rng rng(mix_seed(plan.seed, 2));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n;
  const int batch_size = static_cast<int>(std::min<std::size_t>(plan.batch_size, n));
  Matrix<float> batch(data.pixels.rows(), batch_size);
  std::vector<int> labels(static_cast<std::size_t>(batch_size));

  Pass<float> pass(genome);
  for (int it = 0; it < plan.max_iters; ++it) {
    for (int b = 0; b < batch_size; ++b) {
      if (cursor == n) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        cursor = 0;
      }
      const std::size_t index = order[cursor++];
      if (split.augment_crop) {
        batch.col(b) = pad_and_random_crop(
            Eigen::VectorXf(data.pixels.col(static_cast<Eigen::Index>(index))), data.shape,
            split.crop_pad, rng);
      } else {
        batch.col(b) = data.pixels.col(static_cast<Eigen::Index>(index));
      }
      labels[static_cast<std::size_t>(b)] = data.labels[index];
    }

    const std::uint64_t dropout_seed = mix_seed(plan.seed, 1000 + static_cast<std::uint64_t>(it));
    const Matrix<float>& logits = pass.run(result.model, batch, Mode::train, dropout_seed);
    const float loss = cross_entropy<float>(logits, labels);
    if (!std::isfinite(loss) || !logits.allFinite()) {
      throw DivergedTraining("non-finite loss at iteration " + std::to_string(it));
    }
    const double lr = lr_at(it, plan);
    const auto grads = pass.backward(result.model,
                                     softmax_cross_entropy_grad<float>(logits, labels));
    sgd_step(result.model, grads, lr, plan);
    result.curve.push_back({it, lr, static_cast<double>(loss)});
  }
  result.validation_accuracy = accuracy(result.model, genome, split.validation);
  return result;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iteration,lr,loss\n";
  char line[128];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof line, "%d,%.10g,%.8g\n", p.iteration, p.lr, p.loss);
    out << line;
  }
}

#define EVOARCH_INSTANTIATE(Scalar)                                                          \
  template struct ModelState<Scalar>;                                                        \
  template ModelState<Scalar> init_model<Scalar>(const Genome&, std::uint64_t);              \
  template Matrix<Scalar> forward<Scalar>(ModelState<Scalar>&, const Genome&,                \
                                          const Matrix<Scalar>&, Mode, std::uint64_t);       \
  template std::vector<std::int32_t> activation_pattern<Scalar>(                            \
      ModelState<Scalar>&, const Genome&, const Matrix<Scalar>&, Mode, std::uint64_t);       \
  template Matrix<Scalar> softmax<Scalar>(const Matrix<Scalar>&);                            \
  template Scalar cross_entropy<Scalar>(const Matrix<Scalar>&, std::span<const int>);        \
  template LossAndGrads<Scalar> loss_and_grads<Scalar>(ModelState<Scalar>&, const Genome&,   \
                                                       const Matrix<Scalar>&,                \
                                                       std::span<const int>, std::uint64_t); \
  template void sgd_step<Scalar>(ModelState<Scalar>&, const Gradients<Scalar>&, double,      \
                                 const TrainPlan&);

EVOARCH_INSTANTIATE(float)
EVOARCH_INSTANTIATE(double)

#undef EVOARCH_INSTANTIATE

}  // namespace evoarch
