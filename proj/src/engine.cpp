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

#include "evoarch/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace evoarch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json shape_json(const TensorShape& s) { return json::array({s.channels, s.height, s.width}); }

TensorShape shape_from(const json& j) {
  return TensorShape{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), true};
}

json stats_json(const GenerationStats& s) {
  return {{"generation", s.generation},     {"best_fitness", s.best_fitness},
          {"mean_fitness", s.mean_fitness}, {"best_id", s.best_id},
          {"best_params", s.best_params},   {"selected_ids", s.selected_ids},
          {"wall_seconds", s.wall_seconds}};
}

GenerationStats stats_from(const json& j) {
  GenerationStats s;
  s.generation = j.at("generation").get<int>();
  s.best_fitness = j.at("best_fitness").get<double>();
  s.mean_fitness = j.at("mean_fitness").get<double>();
  s.best_id = j.at("best_id").get<IndividualId>();
  s.best_params = j.at("best_params").get<std::int64_t>();
  s.selected_ids = j.at("selected_ids").get<std::vector<IndividualId>>();
  s.wall_seconds = j.at("wall_seconds").get<double>();
  return s;
}

GenerationStats summarize(const Population& population, int generation) {
  GenerationStats s;
  s.generation = generation;
  const Individual& best = best_of(population);
  s.best_fitness = *best.fitness();
  s.best_id = best.id();
  s.best_params = best.params();
  double total = 0.0;
  for (const auto& individual : population) total += *individual.fitness();
  s.mean_fitness = total / static_cast<double>(population.size());
  return s;
}

void record_fitness(RunRecorder& recorder, const std::vector<FitnessAuditEntry>& entries) {
  if (!recorder.active()) return;
  for (const auto& e : entries) {
    json line = {{"individual_id", e.individual_id},
                 {"evaluator", to_string(e.evaluator)},
                 {"fitness", e.fitness},
                 {"wall_seconds", e.wall_seconds}};
    if (!e.note.empty()) line["note"] = e.note;
    recorder.fitness(line.dump());
  }
}

Population select_survivors(const RankedPopulation& ranked, const EvolutionConfig& config,
                            Rng& rng) {
  const int p = config.population_size;
  switch (config.selection.strategy) {
    case SelectionStrategy::aggressive:
      return aggressive_select(ranked, config.selection.k, config.selection.distance_threshold);
    case SelectionStrategy::tournament: {
      Population out;
      for (int i = 0; i < p; ++i) out.push_back(tournament_select(ranked.members(), rng));
      return out;
    }
    case SelectionStrategy::sample_uniform:
      return sample_uniform_select(ranked.members(), rng, p);
    case SelectionStrategy::sample_by_fitness:
      return sample_by_fitness_select(ranked.members(), rng, p);
  }
  throw std::logic_error("unknown selection strategy");
}

fs::path checkpoint_path(const fs::path& dir, int generation) {
  char name[32];
  std::snprintf(name, sizeof name, "gen_%04d.json", generation);
  return dir / "checkpoints" / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

void EvolutionConfig::check() const {
  if (population_size < 2) throw ConfigError("population size must be at least 2");
  if (selection.k < 1) throw ConfigError("k must be at least 1");
  if (selection.k > population_size) throw ConfigError("k must not exceed population size");
  if (selection.distance_threshold < 0) throw ConfigError("distance threshold must be >= 0");
  if (saturation_window < 1) throw ConfigError("saturation window must be at least 1");
  if (saturation_epsilon < 0.0) throw ConfigError("saturation epsilon must be >= 0");
  if (max_generations < 0) throw ConfigError("max generations must be >= 0");
  if (early_stage_generations < 0) throw ConfigError("early stage length must be >= 0");
  if (max_retries < 1) throw ConfigError("max retries must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (num_classes < 2) throw ConfigError("need at least two classes");
  if (input_shape.channels < 1 || input_shape.height < 1 || input_shape.width < 1) {
    throw ConfigError("input shape must be positive");
  }
  if (checkpoint_interval < 0) throw ConfigError("checkpoint interval must be >= 0");
  try {
    plan.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string config_to_json(const EvolutionConfig& c) {
  const json j = {
      {"population_size", c.population_size},
      {"k", c.selection.k},
      {"distance_threshold", c.selection.distance_threshold},
      {"strategy", to_string(c.selection.strategy)},
      {"early_stage_generations", c.early_stage_generations},
      {"max_generations", c.max_generations},
      {"saturation_window", c.saturation_window},
      {"saturation_epsilon", c.saturation_epsilon},
      {"stop_on_saturation", c.stop_on_saturation},
      {"seed", c.seed},
      {"max_retries", c.max_retries},
      {"workers", c.workers},
      {"input_shape", shape_json(c.input_shape)},
      {"num_classes", c.num_classes},
      {"menus",
       {{"channels", c.menus.channels},
        {"filters", c.menus.filters},
        {"strides", c.menus.strides},
        {"fc_units", c.menus.fc_units},
        {"insert_channels", c.menus.insert_channels},
        {"dropout_ratio", c.menus.dropout_ratio}}},
      {"evaluator", to_string(c.evaluator)},
      {"plan",
       {{"max_iters", c.plan.max_iters},
        {"stage_boundaries", c.plan.stage_boundaries},
        {"stage_lrs", c.plan.stage_lrs},
        {"gamma", c.plan.gamma},
        {"alpha", c.plan.alpha},
        {"momentum", c.plan.momentum},
        {"weight_decay", c.plan.weight_decay},
        {"batch_size", c.plan.batch_size}}},
      {"checkpoint_interval", c.checkpoint_interval}};
  return j.dump(2) + "\n";
}

EvolutionConfig config_from_json(std::string_view text) {
  const json j = json::parse(text);
  EvolutionConfig c;
  c.population_size = j.at("population_size").get<int>();
  c.selection.k = j.at("k").get<int>();
  c.selection.distance_threshold = j.at("distance_threshold").get<int>();
  const auto strategy = strategy_from_string(j.at("strategy").get<std::string>());
  if (!strategy) throw ConfigError("unknown strategy in config");
  c.selection.strategy = *strategy;
  c.early_stage_generations = j.at("early_stage_generations").get<int>();
  c.max_generations = j.at("max_generations").get<int>();
  c.saturation_window = j.at("saturation_window").get<int>();
  c.saturation_epsilon = j.at("saturation_epsilon").get<double>();
  c.stop_on_saturation = j.at("stop_on_saturation").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.max_retries = j.at("max_retries").get<int>();
  c.workers = j.at("workers").get<int>();
  c.input_shape = shape_from(j.at("input_shape"));
  c.num_classes = j.at("num_classes").get<int>();
  const json& m = j.at("menus");
  c.menus.channels = m.at("channels").get<std::vector<int>>();
  c.menus.filters = m.at("filters").get<std::vector<int>>();
  c.menus.strides = m.at("strides").get<std::vector<int>>();
  c.menus.fc_units = m.at("fc_units").get<std::vector<int>>();
  c.menus.insert_channels = m.at("insert_channels").get<int>();
  c.menus.dropout_ratio = m.at("dropout_ratio").get<double>();
  const auto evaluator = evaluator_from_string(j.at("evaluator").get<std::string>());
  if (!evaluator) throw ConfigError("unknown evaluator in config");
  c.evaluator = *evaluator;
  const json& p = j.at("plan");
  c.plan.max_iters = p.at("max_iters").get<int>();
  c.plan.stage_boundaries = p.at("stage_boundaries").get<std::array<int, 2>>();
  c.plan.stage_lrs = p.at("stage_lrs").get<std::array<double, 3>>();
  c.plan.gamma = p.at("gamma").get<double>();
  c.plan.alpha = p.at("alpha").get<double>();
  c.plan.momentum = p.at("momentum").get<double>();
  c.plan.weight_decay = p.at("weight_decay").get<double>();
  c.plan.batch_size = p.at("batch_size").get<int>();
  c.checkpoint_interval = j.at("checkpoint_interval").get<int>();
  return c;
}

RunRecorder::RunRecorder(const fs::path& dir, bool append) : active_(true) {
  fs::create_directories(dir);
  const auto mode = append ? std::ios::app : std::ios::trunc;
  mutation_.open(dir / "mutation_audit.jsonl", std::ios::out | mode);
  selection_.open(dir / "selection_audit.jsonl", std::ios::out | mode);
  fitness_.open(dir / "fitness_audit.jsonl", std::ios::out | mode);
  timing_.open(dir / "timing.csv", std::ios::out | mode);
  if (!mutation_ || !selection_ || !fitness_ || !timing_) {
    throw std::runtime_error("cannot open audit logs in " + dir.string());
  }
  if (!append) timing_ << "generation,wall_s\n";
}

void RunRecorder::mutation(const std::string& line) {
  if (active_) mutation_ << line << '\n';
}
void RunRecorder::selection(const std::string& line) {
  if (active_) selection_ << line << '\n';
}
void RunRecorder::fitness(const std::string& line) {
  if (active_) fitness_ << line << '\n';
}
void RunRecorder::timing(int generation, double wall_seconds) {
  if (active_) timing_ << generation << ',' << wall_seconds << '\n' << std::flush;
}

const Individual& best_of(const Population& population) {
  if (population.empty()) throw std::invalid_argument("empty population");
  return *std::min_element(population.begin(), population.end(), ranks_before);
}

Population init_population(const EvolutionConfig& config, IdAllocator& ids) {
  const auto pool_seed = std::make_shared<const Genome>(
      new_seed_genome(SeedKind::global_pool, config.input_shape, config.num_classes));
  const auto fc_seed = std::make_shared<const Genome>(
      new_seed_genome(SeedKind::fully_connected, config.input_shape, config.num_classes));
  Population population;
  for (int i = 0; i < config.population_size; ++i) {
    population.emplace_back(ids.next(), i % 2 == 0 ? pool_seed : fc_seed, 0);
  }
  return population;
}

EvolutionState initial_state(const EvolutionConfig& config, const FitnessEvaluator& evaluator,
                             RunRecorder& recorder) {
  const auto start = std::chrono::steady_clock::now();
  EvolutionState state;
  state.rng.seed(mix_seed(config.seed, 0xe70));
  state.population = init_population(config, state.ids);
  record_fitness(recorder,
                 evaluate_batch(state.population, evaluator, config.workers, config.seed));
  GenerationStats stats = summarize(state.population, 0);
  stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  recorder.timing(0, stats.wall_seconds);
  state.history.push_back(stats);
  return state;
}

GenerationStats step_generation(EvolutionState& state, const EvolutionConfig& config,
                                const FitnessEvaluator& evaluator, RunRecorder& recorder) {
  const auto start = std::chrono::steady_clock::now();
  const int generation = state.generation + 1;
  const auto weights = MutationWeights::for_stage(
      generation <= config.early_stage_generations ? EvolutionStage::early
                                                   : EvolutionStage::late);

  Population children;
  children.reserve(state.population.size());
  for (const Individual& parent : state.population) {
    const IndividualId child_id = state.ids.next();
    json line = {{"generation", generation},
                 {"parent_id", parent.id()},
                 {"child_id", child_id}};
    json attempts = json::array();
    auto log_attempts = [&](const std::vector<MutationAttempt>& list) {
      for (const auto& a : list) {
        json entry = {{"kind", to_string(a.kind)}, {"accepted", a.accepted}};
        if (a.repair_fixes) entry["repair_fixes"] = a.repair_fixes;
        if (!a.note.empty()) entry["note"] = a.note;
        attempts.push_back(entry);
      }
    };
    try {
      MutatedGenome m = mutate_until_valid(parent.genome(), weights, state.rng,
                                           config.max_retries, config.menus);
      log_attempts(m.attempts);
      line["kind"] = to_string(m.kind);
      line["retries"] = m.retries;
      line["repair_fixes"] = m.repair_fixes;
      children.emplace_back(child_id, std::make_shared<const Genome>(std::move(m.genome)),
                            generation, parent.id());
    } catch (const ExhaustedRetries& e) {
      log_attempts(e.attempts);
      line["kind"] = nullptr;
      line["exhausted"] = true;
      children.push_back(parent.clone_as(child_id, generation));
    }
    line["attempts"] = std::move(attempts);
    recorder.mutation(line.dump());
  }

  record_fitness(recorder, evaluate_batch(children, evaluator, config.workers, config.seed));

  Population pool = state.population;
  pool.insert(pool.end(), children.begin(), children.end());
  const RankedPopulation ranked = rank(std::move(pool));
  const Population selected = select_survivors(ranked, config, state.rng);

  if (recorder.active()) {
    json ids = json::array();
    json fitnesses = json::array();
    json distances = json::array();
    std::vector<std::string> sequences;
    for (const auto& s : selected) {
      ids.push_back(s.id());
      fitnesses.push_back(*s.fitness());
      sequences.push_back(canonical_node_sequence(s.genome()));
    }
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < sequences.size(); ++j) {
        row.push_back(hamming_distance(sequences[i], sequences[j]));
      }
      distances.push_back(std::move(row));
    }
    recorder.selection(json{{"generation", generation},
                            {"strategy", to_string(config.selection.strategy)},
                            {"selected_ids", ids},
                            {"fitnesses", fitnesses},
                            {"pairwise_distances", distances}}
                           .dump());
  }

  state.population = clone_refill(selected, config.population_size, state.ids, generation);
  state.generation = generation;

  GenerationStats stats = summarize(state.population, generation);
  // Report the survivors themselves rather than their fresh clones.
  const Individual& best_survivor = best_of(selected);
  stats.best_id = best_survivor.id();
  for (const auto& s : selected) stats.selected_ids.push_back(s.id());
  stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  recorder.timing(generation, stats.wall_seconds);
  state.history.push_back(stats);
  return stats;
}

bool saturated(const std::vector<GenerationStats>& history, int window, double epsilon) {
  if (window < 1 || history.size() <= static_cast<std::size_t>(window)) return false;
  const double now = history.back().best_fitness;
  const double before = history[history.size() - 1 - static_cast<std::size_t>(window)].best_fitness;
  return now - before < epsilon;
}

std::string stats_csv(const std::vector<GenerationStats>& history) {
  std::string out = "generation,best_fitness,mean_fitness,best_params,best_id\n";
  char line[160];
  for (const auto& s : history) {
    std::snprintf(line, sizeof line, "%d,%.10f,%.10f,%lld,%llu\n", s.generation,
                  s.best_fitness, s.mean_fitness, static_cast<long long>(s.best_params),
                  static_cast<unsigned long long>(s.best_id));
    out += line;
  }
  return out;
}

EvolutionResult run(const EvolutionConfig& config, const FitnessEvaluator& evaluator,
                    const std::optional<fs::path>& out_dir, std::optional<EvolutionState> resume) {
  config.check();
  if (evaluator.kind() != config.evaluator) {
    throw ConfigError("evaluator does not match the configured kind");
  }
  const bool resuming = resume.has_value();
  RunRecorder recorder = out_dir ? RunRecorder(*out_dir, resuming) : RunRecorder();
  if (out_dir) write_text(*out_dir / "config.json", config_to_json(config));

  EvolutionState state = resuming ? std::move(*resume) : initial_state(config, evaluator, recorder);
  bool is_saturated = false;
  while (true) {
    if (config.stop_on_saturation &&
        saturated(state.history, config.saturation_window, config.saturation_epsilon)) {
      is_saturated = true;
      break;
    }
    if (state.generation >= config.max_generations) break;
    step_generation(state, config, evaluator, recorder);
    if (out_dir && config.checkpoint_interval > 0 &&
        state.generation % config.checkpoint_interval == 0) {
      fs::create_directories(*out_dir / "checkpoints");
      checkpoint_save(state, config, checkpoint_path(*out_dir, state.generation));
    }
  }

  const Individual best = best_of(state.population);
  if (out_dir) {
    write_text(*out_dir / "stats.csv", stats_csv(state.history));
    write_text(*out_dir / "best_genome.json", serialize(best.genome()));
  }
  std::vector<GenerationStats> history = state.history;
  return EvolutionResult{best, std::move(history), std::move(state), is_saturated};
}

void checkpoint_save(const EvolutionState& state, const EvolutionConfig& config,
                     const fs::path& path) {
  json population = json::array();
  for (const auto& individual : state.population) {
    json entry = {{"id", individual.id()},
                  {"born_generation", individual.born_generation()},
                  {"genome", json::parse(serialize(individual.genome()))}};
    entry["parent_id"] = individual.parent_id() ? json(*individual.parent_id()) : json(nullptr);
    entry["fitness"] = individual.fitness() ? json(*individual.fitness()) : json(nullptr);
    population.push_back(std::move(entry));
  }
  json history = json::array();
  for (const auto& s : state.history) history.push_back(stats_json(s));
  const json j = {{"format_version", kCheckpointVersion},
                  {"generation", state.generation},
                  {"next_id", state.ids.peek()},
                  {"rng_state", rng_state(state.rng)},
                  {"config", json::parse(config_to_json(config))},
                  {"population", population},
                  {"history", history}};
  write_text(path, j.dump() + "\n");
}

Checkpoint checkpoint_load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint format version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint cp;
    cp.config = config_from_json(j.at("config").dump());
    cp.state.generation = j.at("generation").get<int>();
    cp.state.ids = IdAllocator(j.at("next_id").get<IndividualId>());
    restore_rng_state(cp.state.rng, j.at("rng_state").get<std::string>());
    for (const auto& e : j.at("population")) {
      std::optional<IndividualId> parent;
      if (!e.at("parent_id").is_null()) parent = e.at("parent_id").get<IndividualId>();
      Individual individual(e.at("id").get<IndividualId>(),
                            std::make_shared<const Genome>(deserialize(e.at("genome").dump())),
                            e.at("born_generation").get<int>(), parent);
      if (!e.at("fitness").is_null()) individual.set_fitness(e.at("fitness").get<double>());
      cp.state.population.push_back(std::move(individual));
    }
    for (const auto& s : j.at("history")) cp.state.history.push_back(stats_from(s));
    return cp;
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace evoarch
