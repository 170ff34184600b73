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
#include <memory>

#include "doctest.h"
#include "evoarch/fitness.hpp"
#include "support.hpp"

using namespace evoarch;

namespace {

constexpr TensorShape kCifar{3, 32, 32, true};

Genome conv_chain(int convs) {
  Genome g(kCifar, 10);
  NodeId prev = g.add_node(InputLayer{}, {});
  for (int i = 0; i < convs; ++i) prev = g.add_node(Convolution{8, 3, 1, 1}, {prev});
  const NodeId gp = g.add_node(GlobalPool{}, {prev});
  g.add_node(ClassifierHead{10}, {gp});
  return g;
}

// Counts the evaluations it is asked for.
class CountingEvaluator : public FitnessEvaluator {
 public:
  EvaluatorKind kind() const override { return EvaluatorKind::surrogate; }
  Evaluation evaluate(const Genome& genome, std::uint64_t seed) const override {
    ++calls;
    return {evaluate_surrogate(genome) * 0.5 + static_cast<double>(seed % 1000) / 4000.0, ""};
  }
  mutable std::atomic<int> calls{0};
};

}  // namespace

TEST_CASE("surrogate closed form") {
  CHECK(evaluate_surrogate(new_seed_genome(SeedKind::global_pool, kCifar, 10)) == 0.0);
  CHECK(evaluate_surrogate(new_seed_genome(SeedKind::fully_connected, kCifar, 10)) == 0.0);
  CHECK(evaluate_surrogate(conv_chain(1)) == doctest::Approx(1.0 - std::exp(-0.15)));
  CHECK(std::abs(evaluate_surrogate(conv_chain(1)) - 0.139292) < 5e-7);

  const double f11 = evaluate_surrogate(conv_chain(11));
  const double f12 = evaluate_surrogate(conv_chain(12));
  const double f13 = evaluate_surrogate(conv_chain(13));
  CHECK(f13 - f12 < f12 - f11);

  for (int c = 0; c < 12; ++c) CHECK(evaluate_surrogate(conv_chain(c + 1)) > evaluate_surrogate(conv_chain(c)));
}

TEST_CASE("surrogate range and monotonicity on random genomes") {
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    const Genome g = testing::random_genome(rng, 15);
    const double f = evaluate_surrogate(g);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    if (g.nodes_of(LayerType::convolution).size() >= 12) continue;
    Rng op(static_cast<std::uint64_t>(i));
    const auto out = apply_mutation(g, MutationKind::add_convolution, op);
    if (!out.accepted()) continue;
    // Repair may add more convolutions; the count only grows.
    CHECK(evaluate_surrogate(*out.genome) > f);
  }
}

TEST_CASE("trained evaluator maps divergence to zero") {
  DatasetSplit split;
  split.train.shape = split.validation.shape = {1, 4, 4, true};
  split.train.pixels = Eigen::MatrixXf::Constant(16, 8, 1e30f);
  split.train.labels.assign(8, 1);
  split.validation.pixels = Eigen::MatrixXf::Zero(16, 4);
  split.validation.labels.assign(4, 1);
  TrainPlan plan = TrainPlan::desk(8);
  plan.stage_lrs = {1e6, 1e6, 1e6};
  const Genome g = new_seed_genome(SeedKind::fully_connected, {1, 4, 4, true}, 10);
  const Evaluation e = evaluate_trained(g, split, plan);
  CHECK(e.fitness == 0.0);
  CHECK(e.note.find("diverged") != std::string::npos);

  TrainedEvaluator evaluator(std::make_shared<const DatasetSplit>(split), plan);
  CHECK(evaluator.evaluate(g, 3).fitness == 0.0);
}

TEST_CASE("batch evaluation") {
  Rng rng(12);
  Population base;
  for (IndividualId id = 0; id < 16; ++id) {
    base.emplace_back(id, std::make_shared<const Genome>(testing::random_genome(rng, 8)), 0);
  }

  SUBCASE("worker count does not change results") {
    CountingEvaluator ev;
    Population a = base;
    Population b = base;
    evaluate_batch(a, ev, 1, 99);
    const auto audit = evaluate_batch(b, ev, 8, 99);
    REQUIRE(audit.size() == 16);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id() == b[i].id());
      CHECK(*a[i].fitness() == *b[i].fitness());
      CHECK(audit[i].individual_id == b[i].id());
    }
  }

  SUBCASE("only gaps are filled") {
    CountingEvaluator ev;
    Population p = base;
    p[3].set_fitness(0.25);
    p[7].set_fitness(0.75);
    const auto audit = evaluate_batch(p, ev, 2, 1);
    CHECK(audit.size() == 14);
    CHECK(ev.calls == 14);
    CHECK(*p[3].fitness() == 0.25);
    for (const auto& i : p) CHECK(i.evaluated());

    const auto again = evaluate_batch(p, ev, 2, 1);
    CHECK(again.empty());
    CHECK(ev.calls == 14);
  }

  SUBCASE("clones inherit fitness") {
    CountingEvaluator ev;
    Population p = base;
    evaluate_batch(p, ev, 1, 1);
    Population clones{p[0].clone_as(100, 1), p[1].clone_as(101, 1)};
    evaluate_batch(clones, ev, 1, 1);
    CHECK(ev.calls == 16);
    CHECK(*clones[0].fitness() == *p[0].fitness());
  }

  SUBCASE("same genome and seed give the same fitness") {
    SurrogateEvaluator ev;
    CHECK(ev.evaluate(base[0].genome(), 5).fitness == ev.evaluate(base[0].genome(), 5).fitness);
  }

  SUBCASE("failures are aggregated") {
    class Failing : public FitnessEvaluator {
     public:
      EvaluatorKind kind() const override { return EvaluatorKind::surrogate; }
      Evaluation evaluate(const Genome&, std::uint64_t) const override {
        throw std::runtime_error("boom");
      }
    } failing;
    Population p = base;
    try {
      evaluate_batch(p, failing, 3, 0);
      FAIL("expected an exception");
    } catch (const BatchEvaluationError& e) {
      CHECK(e.failures.size() == 16);
    }
    for (const auto& i : p) CHECK_FALSE(i.evaluated());
  }
}
