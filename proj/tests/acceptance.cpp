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

// Runs the acceptance criteria and prints one PASS/FAIL line for each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "evoarch/compare.hpp"
#include "evoarch/data.hpp"
#include "evoarch/engine.hpp"
#include "evoarch/gradcheck.hpp"
#include "support.hpp"

using namespace evoarch;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

template <typename... Args>
std::string fmt(const char* pattern, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

Outcome schedule() {
  TrainPlan plan = TrainPlan::full_scale();
  const double at1000 = lr_at(1000, plan);
  const double want = 0.1 * std::pow(2.0, -0.75);
  const bool ok = lr_at(0, plan) == 0.1 && std::abs(at1000 - want) / want <= 1e-9 &&
                  lr_at(plan.stage_boundaries[0], plan) == 1e-3 &&
                  lr_at(plan.stage_boundaries[1], plan) == 1e-5;
  return {ok, fmt("lr(0)=%.17g lr(1000)=%.17g stage starts %.3g %.3g", lr_at(0, plan), at1000,
                  lr_at(plan.stage_boundaries[0], plan), lr_at(plan.stage_boundaries[1], plan))};
}

Outcome closure() {
  Rng rng(20260101);
  int invalid = 0;
  int calls = 0;
  int exhausted = 0;
  while (calls < 10000) {
    Genome g = testing::random_genome(rng, 10);
    for (int i = 0; i < 10 && calls < 10000; ++i, ++calls) {
      const auto stage = uniform_index(rng, 2) == 0 ? EvolutionStage::early : EvolutionStage::late;
      try {
        g = mutate_until_valid(g, MutationWeights::for_stage(stage), rng).genome;
      } catch (const ExhaustedRetries&) {
        ++exhausted;
        continue;
      }
      if (!validate(g).ok) ++invalid;
    }
  }
  return {invalid == 0,
          fmt("%d calls, %d invalid accepted, %d exhausted retries", calls, invalid, exhausted)};
}

Outcome selection_oracle() {
  Rng rng(77);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    Population pop;
    for (std::size_t i = 0; i < n; ++i) {
      Individual ind(static_cast<IndividualId>(i),
                     std::make_shared<const Genome>(testing::random_genome(rng, 8)), 0);
      // Coarse levels half the time so ties on fitness actually occur.
      const double f = uniform_index(rng, 2) == 0
                           ? static_cast<double>(uniform_index(rng, 4)) / 4.0
                           : uniform_real(rng);
      ind.set_fitness(f);
      pop.push_back(ind);
    }
    const int k = 1 + static_cast<int>(uniform_index(rng, n));
    const int d = static_cast<int>(uniform_index(rng, 4));
    const Population got = aggressive_select(rank(pop), k, d);
    std::vector<IndividualId> ids;
    for (const auto& i : got) ids.push_back(i.id());
    if (ids != testing::oracle_aggressive(pop, k, d)) ++mismatches;
  }
  return {mismatches == 0, fmt("1000 populations, %d mismatches", mismatches)};
}

Outcome gradients() {
  const GradCheckReport r = run_gradient_suite(2026, 20);
  return {r.passed(1e-4) && r.max_rel_err <= 1e-4,
          fmt("%zu cases, %lld entries, %lld kinks skipped, max rel err %.3e", r.cases.size(),
              static_cast<long long>(r.entries), static_cast<long long>(r.kinks), r.max_rel_err)};
}

const ComparisonResult& surrogate_race() {
  static const ComparisonResult result = [] {
    SurrogateEvaluator surrogate;
    ComparisonConfig c;
    c.base.max_generations = 100;
    c.n_seeds = 20;
    for (int k : {1, 2, 5, 10}) c.variants.push_back(k_variant(k, 1));
    for (auto s : {SelectionStrategy::tournament, SelectionStrategy::sample_uniform,
                   SelectionStrategy::sample_by_fitness}) {
      c.variants.push_back(make_variant(s, c.base.selection));
    }
    return compare_strategies(c, surrogate);
  }();
  return result;
}

const VariantSummary& summary(const std::string& label) {
  for (const auto& s : surrogate_race().summary) {
    if (s.label == label) return s;
  }
  throw std::logic_error("no variant " + label);
}

Outcome k_sweep() {
  const double m1 = summary("k=1").median;
  const double m2 = summary("k=2").median;
  const double m10 = summary("k=10").median;
  return {m1 <= m2 && m2 < m10,
          fmt("tau=%.4f medians k=1 %.1f, k=2 %.1f, k=5 %.1f, k=10 %.1f", surrogate_race().tau,
              m1, m2, summary("k=5").median, m10)};
}

Outcome strategy_race() {
  const double a = summary("k=1").median;
  const double t = summary("tournament").median;
  const double u = summary("sample_uniform").median;
  const double f = summary("sample_by_fitness").median;
  return {a < t && a < u && a < f,
          fmt("medians aggressive %.1f, tournament %.1f, sample_uniform %.1f (%d/20 reached), "
              "sample_by_fitness %.1f",
              a, t, u, summary("sample_uniform").reached, f)};
}

Outcome mnist_evolution(const fs::path& data_dir, const fs::path& out_dir) {
  EvolutionConfig c;
  c.population_size = 10;
  c.selection.k = 2;
  c.selection.distance_threshold = 1;
  c.max_generations = 15;
  c.seed = 0;
  c.evaluator = EvaluatorKind::trained;
  c.input_shape = TensorShape{1, 28, 28, true};
  c.plan = TrainPlan::desk(600);
  auto split = std::make_shared<const DatasetSplit>(load_mnist_split(data_dir, 0.1, c.seed, 8000));
  if (split->validation.size() != 800) {
    return {false, fmt("validation split has %zu images", split->validation.size())};
  }
  TrainedEvaluator evaluator(split, c.plan);
  const EvolutionResult r = run(c, evaluator, out_dir);
  bool monotone = true;
  for (std::size_t g = 1; g < r.history.size(); ++g) {
    monotone = monotone && r.history[g].best_fitness >= r.history[g - 1].best_fitness;
  }
  const double best = r.history.back().best_fitness;
  return {best >= 0.90 && monotone,
          fmt("%zu generations, best validation accuracy %.4f, params %lld, %s",
              r.history.size() - 1, best, static_cast<long long>(r.history.back().best_params),
              monotone ? "non-decreasing" : "series decreased")};
}

Outcome determinism(const fs::path& scratch) {
  SurrogateEvaluator surrogate;
  EvolutionConfig c;
  c.seed = 42;
  c.max_generations = 20;
  c.stop_on_saturation = false;
  fs::remove_all(scratch);
  run(c, surrogate, scratch / "a");
  run(c, surrogate, scratch / "b");
  const std::string a = slurp(scratch / "a" / "stats.csv");
  const bool identical = !a.empty() && a == slurp(scratch / "b" / "stats.csv");

  EvolutionConfig head = c;
  head.max_generations = 5;
  head.checkpoint_interval = 5;
  run(head, surrogate, scratch / "head");
  Checkpoint cp = checkpoint_load(scratch / "head" / "checkpoints" / "gen_0005.json");
  cp.config.max_generations = 20;
  run(cp.config, surrogate, scratch / "head", std::move(cp.state));
  const bool resumed = slurp(scratch / "head" / "stats.csv") == a;
  fs::remove_all(scratch);
  return {identical && resumed, fmt("repeat runs %s, resumed-at-5 run %s",
                                    identical ? "byte-identical" : "differ",
                                    resumed ? "matches" : "differs")};
}

void write_cifar_fixture(const fs::path& dir) {
  fs::create_directories(dir);
  Rng rng(9);
  std::string record(kCifarRecordBytes, '\0');
  auto write_batch = [&](const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary);
    for (int r = 0; r < 10000; ++r) {
      record[0] = static_cast<char>(uniform_index(rng, 10));
      for (std::size_t p = 1; p < record.size(); ++p) {
        record[p] = static_cast<char>(uniform_index(rng, 256));
      }
      out.write(record.data(), static_cast<std::streamsize>(record.size()));
    }
  };
  for (int i = 1; i <= 5; ++i) write_batch("data_batch_" + std::to_string(i) + ".bin");
  write_batch("test_batch.bin");
}

template <typename E>
bool raises(const std::function<void()>& f) {
  try {
    f();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

Outcome loaders(const fs::path& data_dir, const fs::path& scratch) {
  std::vector<std::string> notes;
  bool ok = true;

  const fs::path mnist = data_dir / "mnist";
  const ImageSet train = load_mnist(mnist / "train-images-idx3-ubyte",
                                    mnist / "train-labels-idx1-ubyte");
  const ImageSet test = load_mnist(mnist / "t10k-images-idx3-ubyte",
                                   mnist / "t10k-labels-idx1-ubyte");
  const TensorShape mshape{1, 28, 28, true};
  ok = ok && train.size() == 60000 && test.size() == 10000 && train.shape == mshape &&
       test.shape == mshape && train.pixels.cols() == 60000 && train.pixels.rows() == 784;
  notes.push_back(fmt("mnist %zu/%zu %s", train.size(), test.size(),
                      to_string(train.shape).c_str()));

  // No CIFAR-10 download is available here; a synthetic set in the real
  // record format stands in for it.
  fs::path cifar = data_dir / "cifar-10-batches-bin";
  bool synthetic = false;
  if (!fs::exists(cifar / "data_batch_1.bin")) {
    cifar = scratch / "cifar-10-batches-bin";
    write_cifar_fixture(cifar);
    synthetic = true;
  }
  std::vector<fs::path> batches;
  for (int i = 1; i <= 5; ++i) batches.push_back(cifar / ("data_batch_" + std::to_string(i) + ".bin"));
  {
    const ImageSet ctrain = load_cifar10(batches);
    const ImageSet ctest = load_cifar10({cifar / "test_batch.bin"});
    const TensorShape cshape{3, 32, 32, true};
    ok = ok && ctrain.size() == 50000 && ctest.size() == 10000 && ctrain.shape == cshape &&
         ctest.shape == cshape;
    notes.push_back(fmt("cifar10%s %zu/%zu %s", synthetic ? " (synthetic)" : "", ctrain.size(),
                        ctest.size(), to_string(ctrain.shape).c_str()));
  }

  const fs::path bad = scratch / "malformed";
  fs::create_directories(bad);
  const std::string image_bytes = slurp(mnist / "t10k-images-idx3-ubyte");
  const std::string label_bytes = slurp(mnist / "t10k-labels-idx1-ubyte");
  auto put = [&](const std::string& name, const std::string& bytes) {
    std::ofstream(bad / name, std::ios::binary) << bytes;
    return bad / name;
  };
  std::string wrong_magic = image_bytes;
  wrong_magic[3] = 0x02;
  std::string short_count = label_bytes;
  short_count[7] = static_cast<char>(short_count[7] - 1);
  std::string bad_label = label_bytes;
  bad_label[8] = 10;
  const fs::path images = put("images", image_bytes);
  const bool cases[] = {
      raises<BadMagic>([&] { load_mnist(put("magic", wrong_magic), put("l0", label_bytes)); }),
      raises<TruncatedFile>([&] {
        load_mnist(put("trunc", image_bytes.substr(0, image_bytes.size() - 100)),
                   put("l1", label_bytes));
      }),
      raises<CountMismatch>([&] { load_mnist(images, put("count", short_count)); }),
      raises<LabelOutOfRange>([&] { load_mnist(images, put("label", bad_label)); }),
      raises<TruncatedFile>([&] {
        load_cifar10({put("cifar_trunc", std::string(kCifarRecordBytes * 3 - 7, '\1'))});
      }),
      raises<LabelOutOfRange>([&] {
        std::string rec(kCifarRecordBytes, '\0');
        rec[0] = 11;
        load_cifar10({put("cifar_label", rec)});
      }),
      raises<DataError>([&] { load_mnist(bad / "absent", bad / "absent2"); }),
  };
  int raised = 0;
  for (bool c : cases) raised += c ? 1 : 0;
  ok = ok && raised == static_cast<int>(std::size(cases));
  notes.push_back(fmt("malformed files %d/%zu raised the expected error", raised, std::size(cases)));
  fs::remove_all(scratch);

  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
  return {ok, detail};
}

Outcome model_size(const fs::path& scratch) {
  SurrogateEvaluator surrogate;
  fs::remove_all(scratch);
  EvolutionConfig probe;
  run(probe, surrogate, scratch);
  const std::string header = slurp(scratch / "stats.csv").substr(0, 60);
  const bool has_column = header.find("best_params") != std::string::npos;
  fs::remove_all(scratch);

  int grew = 0;
  int flat = 0;
  int saturated_runs = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EvolutionConfig c;
    c.seed = seed;
    const EvolutionResult r = run(c, surrogate);
    const auto& h = r.history;
    if (h.back().best_params >= h.front().best_params) ++grew;
    if (!r.saturated) continue;
    ++saturated_runs;
    const std::size_t w = static_cast<std::size_t>(c.saturation_window);
    if (h.back().best_params == h[h.size() - 1 - w].best_params) ++flat;
  }
  return {has_column && grew == 20 && saturated_runs > 0 && flat == saturated_runs,
          fmt("best_params column %s; final >= initial in %d/20 runs; size unchanged over the "
              "last window in %d/%d saturated runs",
              has_column ? "present" : "missing", grew, flat, saturated_runs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string data_dir = "data";
  std::string out_dir = "acceptance_runs";
  std::vector<int> criteria = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  app.add_option("--data-dir", data_dir, "Directory holding mnist/");
  app.add_option("--out-dir", out_dir, "Where run artifacts go");
  app.add_option("--criteria", criteria, "Which criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const fs::path scratch = fs::temp_directory_path() / "evoarch_acceptance";
  const std::map<int, std::pair<std::string, double>> info = {
      {1, {"schedule fidelity", 1}},
      {2, {"mutation closure", 60}},
      {3, {"selection oracle equivalence", 10}},
      {4, {"gradient correctness", 300}},
      {5, {"k-sweep on the surrogate", 300}},
      {6, {"strategy race on the surrogate", 600}},
      {7, {"desk-scale MNIST evolution", 4 * 3600}},
      {8, {"determinism and resume", 120}},
      {9, {"loader fidelity", 30}},
      {10, {"model-size tracking", 300}},
  };
  const std::map<int, std::function<Outcome()>> checks = {
      {1, schedule},
      {2, closure},
      {3, selection_oracle},
      {4, gradients},
      {5, k_sweep},
      {6, strategy_race},
      {7, [&] { return mnist_evolution(data_dir, out_dir); }},
      {8, [&] { return determinism(scratch / "determinism"); }},
      {9, [&] { return loaders(data_dir, scratch / "loaders"); }},
      {10, [&] { return model_size(scratch / "size"); }},
  };

  int failures = 0;
  for (int id : criteria) {
    const auto it = checks.find(id);
    if (it == checks.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    const auto& [name, budget] = info.at(id);
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= budget;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.1fs, budget %.0fs%s]\n", pass ? "PASS" : "FAIL", id,
                name.c_str(), o.detail.c_str(), secs, budget, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
