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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "evoarch/gradcheck.hpp"
#include "evoarch/trainer.hpp"

using namespace evoarch;

namespace {

constexpr TensorShape kSmall{2, 6, 6, true};

DatasetSplit noise_split(std::size_t train_n, std::size_t val_n, std::uint64_t seed) {
  Rng rng(seed);
  auto fill = [&](ImageSet& set, std::size_t n) {
    set.shape = kSmall;
    set.num_classes = 10;
    set.pixels.resize(kSmall.size(), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < set.pixels.size(); ++i) {
      set.pixels.data()[i] = static_cast<float>(uniform_real(rng));
    }
    for (std::size_t i = 0; i < n; ++i) set.labels.push_back(static_cast<std::uint8_t>(i % 10));
  };
  DatasetSplit split;
  fill(split.train, train_n);
  fill(split.validation, val_n);
  return split;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  const TrainPlan plan = TrainPlan::full_scale();
  CHECK(lr_at(0, plan) == 0.1);
  const double expected = 0.1 * std::pow(2.0, -0.75);
  CHECK(std::abs(lr_at(1000, plan) - expected) / expected < 1e-9);
  CHECK(std::abs(lr_at(1000, plan) - 0.0594604) < 1e-7);
  CHECK(lr_at(plan.stage_boundaries[0], plan) == 1e-3);
  CHECK(lr_at(plan.stage_boundaries[1], plan) == 1e-5);

  const TrainPlan desk = TrainPlan::desk();
  CHECK(desk.stage_boundaries == std::array<int, 2>{300, 450});
  for (int t = 1; t < desk.max_iters; ++t) {
    if (t == desk.stage_boundaries[0] || t == desk.stage_boundaries[1]) {
      CHECK(lr_at(t, desk) < lr_at(t - 1, desk));
    } else {
      CHECK(lr_at(t, desk) <= lr_at(t - 1, desk));
    }
  }

  TrainPlan bad = desk;
  bad.stage_boundaries = {450, 300};
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);
}

TEST_CASE("initialization") {
  const Genome seed = new_seed_genome(SeedKind::global_pool, {3, 32, 32, true}, 10);
  const auto model = init_model<float>(seed, 1);
  REQUIRE(model.params.size() == 1);
  CHECK(model.params.begin()->first == *seed.head_id());
  CHECK(model.parameter_count() == parameter_count(seed));

  const auto again = init_model<float>(seed, 1);
  CHECK(model.params.begin()->second.weight == again.params.begin()->second.weight);

  Genome g({64, 8, 8, true}, 10);
  const NodeId in = g.add_node(InputLayer{}, {});
  const NodeId c = g.add_node(Convolution{64, 3, 1, 1}, {in});
  const NodeId gp = g.add_node(GlobalPool{}, {c});
  g.add_node(ClassifierHead{10}, {gp});
  const auto conv_model = init_model<double>(g, 7);
  const auto& w = conv_model.params.at(c).weight;
  const double mean = w.mean();
  const double std = std::sqrt((w.array() - mean).square().mean());
  CHECK(std::abs(std / std::sqrt(2.0 / 576.0) - 1.0) < 0.05);
  CHECK(conv_model.parameter_count() == parameter_count(g));
}

TEST_CASE("forward pass") {
  const Genome seed = new_seed_genome(SeedKind::global_pool, kSmall, 10);
  auto model = init_model<double>(seed, 3);
  model.params.begin()->second.weight.setZero();
  const Matrix<double> zeros = Matrix<double>::Zero(kSmall.size(), 4);
  const Matrix<double> logits = forward(model, seed, zeros, Mode::eval);
  CHECK(logits.cwiseAbs().maxCoeff() == 0.0);
  const Matrix<double> p = softmax(logits);
  CHECK(std::abs(p(3, 2) - 0.1) < 1e-15);
  const std::vector<int> labels = {0, 1, 2, 3};
  CHECK(cross_entropy<double>(logits, labels) == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  SUBCASE("eval mode is repeatable") {
    Genome g(kSmall, 10);
    const NodeId in = g.add_node(InputLayer{}, {});
    const NodeId c = g.add_node(Convolution{3, 3, 1, 1}, {in});
    const NodeId f = g.add_node(FullyConnected{5}, {c});
    const NodeId d = g.add_node(Dropout{0.5}, {f});
    g.add_node(ClassifierHead{10}, {d});
    auto m = init_model<double>(g, 1);
    Rng rng(2);
    Matrix<double> x(kSmall.size(), 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    const auto a = forward(m, g, x, Mode::eval);
    const auto b = forward(m, g, x, Mode::eval);
    CHECK(a == b);
    const auto t1 = forward(m, g, x, Mode::train, 5);
    const auto t2 = forward(m, g, x, Mode::train, 6);
    CHECK(t1 != t2);
  }

  SUBCASE("skip of a node with itself doubles it") {
    Genome with_skip(kSmall, 10);
    const NodeId in = with_skip.add_node(InputLayer{}, {});
    const NodeId s = with_skip.add_node(Skip{}, {in, in});
    const NodeId f = with_skip.add_node(FullyConnected{4}, {s});
    with_skip.add_node(ClassifierHead{10}, {f});
    Genome plain(kSmall, 10);
    const NodeId in2 = plain.add_node(InputLayer{}, {});
    const NodeId f2 = plain.add_node(FullyConnected{4}, {in2});
    const NodeId h2 = plain.add_node(ClassifierHead{10}, {f2});
    auto m1 = init_model<double>(with_skip, 9);
    ModelState<double> m2;
    m2.params[f2] = m1.params.at(f);
    m2.params[h2] = m1.params.at(*with_skip.head_id());
    Rng rng(4);
    Matrix<double> x(kSmall.size(), 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    const auto a = forward(m1, with_skip, x, Mode::eval);
    const auto b = forward(m2, plain, Matrix<double>(2.0 * x), Mode::eval);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("wrong batch shape") {
    const Matrix<double> wrong = Matrix<double>::Zero(5, 2);
    CHECK_THROWS_AS(forward(model, seed, wrong, Mode::eval), std::invalid_argument);
  }
}

TEST_CASE("softmax and loss") {
  Rng rng(10);
  Matrix<double> logits(10, 50);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = 20.0 * standard_normal(rng);
  const Matrix<double> p = softmax(logits);
  for (Eigen::Index j = 0; j < p.cols(); ++j) CHECK(std::abs(p.col(j).sum() - 1.0) < 1e-12);

  std::vector<int> labels(50);
  for (int i = 0; i < 50; ++i) labels[static_cast<std::size_t>(i)] = i % 10;
  Matrix<double> doubled(10, 100);
  doubled << logits, logits;
  std::vector<int> labels2 = labels;
  labels2.insert(labels2.end(), labels.begin(), labels.end());
  CHECK(cross_entropy<double>(doubled, labels2) ==
        doctest::Approx(cross_entropy<double>(logits, labels)).epsilon(1e-12));

  const std::vector<int> bad = {12};
  CHECK_THROWS(cross_entropy<double>(Matrix<double>::Zero(10, 1), bad));

  const Genome seed = new_seed_genome(SeedKind::fully_connected, kSmall, 10);
  auto model = init_model<double>(seed, 1);
  Matrix<double> x = Matrix<double>::Zero(kSmall.size(), 1);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const std::vector<int> one = {1};
  CHECK_THROWS_AS(loss_and_grads<double>(model, seed, x, one), NonFiniteLoss);
}

TEST_CASE("sgd step") {
  TrainPlan plan;
  ModelState<double> model;
  model.params[1].weight = Matrix<double>::Constant(1, 1, 1.0);
  Gradients<double> grads;
  grads[1].weight = Matrix<double>::Constant(1, 1, 1.0);
  sgd_step(model, grads, 0.1, plan);
  CHECK(model.velocity.at(1).weight(0, 0) == doctest::Approx(1.0005).epsilon(1e-15));
  CHECK(model.params.at(1).weight(0, 0) == doctest::Approx(0.89995).epsilon(1e-15));

  SUBCASE("zero gradients without decay leave the model alone") {
    TrainPlan no_decay;
    no_decay.weight_decay = 0.0;
    ModelState<double> m;
    m.params[1].weight = Matrix<double>::Constant(2, 2, 0.3);
    Gradients<double> zero;
    zero[1].weight = Matrix<double>::Zero(2, 2);
    sgd_step(m, zero, 0.1, no_decay);
    CHECK(m.params.at(1).weight == Matrix<double>::Constant(2, 2, 0.3));
  }

  SUBCASE("weight decay shrinks weights but not batch-norm terms") {
    ModelState<double> m;
    m.params[1].weight = Matrix<double>::Constant(1, 1, 2.0);
    m.params[1].scale = Vector<double>::Constant(1, 2.0);
    Gradients<double> zero;
    zero[1].weight = Matrix<double>::Zero(1, 1);
    zero[1].scale = Vector<double>::Zero(1);
    const double lr = 0.1;
    const double wd = plan.weight_decay;
    const double mu = plan.momentum;
    sgd_step(m, zero, lr, plan);
    sgd_step(m, zero, lr, plan);
    const double v1 = wd * 2.0;
    const double w1 = 2.0 - lr * v1;
    const double v2 = mu * v1 + wd * w1;
    const double w2 = w1 - lr * v2;
    CHECK(m.params.at(1).weight(0, 0) == doctest::Approx(w2).epsilon(1e-15));
    CHECK(m.params.at(1).scale[0] == 2.0);
  }
}

TEST_CASE("gradient check") {
  const GradCheckReport report = run_gradient_suite(17, 5);
  for (const auto& c : report.cases) {
    CHECK_MESSAGE(c.max_rel_err <= 1e-4, c.name);
    CHECK(c.entries > 0);
  }
  CHECK(report.kinks * 20 < report.entries);
}

TEST_CASE("training") {
  Genome g(kSmall, 10);
  const NodeId in = g.add_node(InputLayer{}, {});
  const NodeId c = g.add_node(Convolution{4, 3, 1, 1}, {in});
  const NodeId f = g.add_node(FullyConnected{8}, {c});
  const NodeId d = g.add_node(Dropout{0.5}, {f});
  g.add_node(ClassifierHead{10}, {d});

  SUBCASE("untrained accuracy is near chance") {
    const DatasetSplit split = noise_split(10, 3000, 1);
    TrainPlan plan;
    plan.max_iters = 0;
    const TrainResult r = train(g, split, plan);
    CHECK(std::abs(r.validation_accuracy - 0.1) <= 0.03);
  }

  SUBCASE("deterministic for a fixed seed") {
    const DatasetSplit split = noise_split(200, 100, 2);
    TrainPlan plan = TrainPlan::desk(20);
    plan.batch_size = 16;
    plan.seed = 42;
    const TrainResult a = train(g, split, plan);
    const TrainResult b = train(g, split, plan);
    CHECK(a.validation_accuracy == b.validation_accuracy);
    REQUIRE(a.curve.size() == 20);
    for (std::size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].loss == b.curve[i].loss);
    CHECK(a.curve[0].lr == 0.1);
  }

  SUBCASE("learns a separable problem") {
    DatasetSplit split = noise_split(400, 200, 3);
    for (ImageSet* set : {&split.train, &split.validation}) {
      for (std::size_t i = 0; i < set->size(); ++i) {
        set->pixels(set->labels[i], static_cast<Eigen::Index>(i)) += 3.0f;
      }
    }
    TrainPlan plan = TrainPlan::desk(200);
    plan.batch_size = 32;
    CHECK(train(g, split, plan).validation_accuracy > 0.9);
  }
}

TEST_CASE("model files") {
  Genome g(kSmall, 10);
  const NodeId in = g.add_node(InputLayer{}, {});
  const NodeId c = g.add_node(Convolution{4, 3, 1, 1}, {in});
  const NodeId gp = g.add_node(GlobalPool{}, {c});
  g.add_node(ClassifierHead{10}, {gp});
  const auto model = init_model<float>(g, 5);
  const auto dir = std::filesystem::temp_directory_path() / "evoarch_model_test";
  std::filesystem::remove_all(dir);
  save_model(model, dir);
  CHECK(std::filesystem::file_size(dir / "weights.bin") ==
        static_cast<std::uintmax_t>(model.parameter_count() + 8) * sizeof(float));
  const auto back = load_model(dir);
  REQUIRE(back.params.size() == model.params.size());
  for (const auto& [id, block] : model.params) {
    CHECK(back.params.at(id).weight == block.weight);
    CHECK(back.params.at(id).bias == block.bias);
    CHECK(back.params.at(id).scale == block.scale);
    CHECK(back.params.at(id).shift == block.shift);
  }
  CHECK(back.running_var.at(c) == model.running_var.at(c));

  write_curve_csv({{0, 0.1, 2.3}, {1, 0.09, 2.1}}, dir / "curve.csv");
  std::ifstream in2(dir / "curve.csv");
  std::string header;
  std::getline(in2, header);
  CHECK(header == "iteration,lr,loss");
  std::filesystem::remove_all(dir);
}
