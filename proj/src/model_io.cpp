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

#include <bit>
#include <cstring>
#include <fstream>
#include "evoarch/trainer.hpp"
#include "json.hpp"

namespace evoarch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "weights.bin is written in native order");

struct Writer {
  std::ofstream& out;
  json& entries;
  std::size_t offset = 0;

  template <typename T>
  void put(NodeId id, const char* field, const T& values) {
    if (values.size() == 0) return;
    entries.push_back({{"node", id},
                       {"field", field},
                       {"rows", values.rows()},
                       {"cols", values.cols()},
                       {"offset", offset}});
    const auto bytes = static_cast<std::streamsize>(values.size() * sizeof(float));
    out.write(reinterpret_cast<const char*>(values.data()), bytes);
    offset += static_cast<std::size_t>(bytes);
  }
};

}  // namespace

void save_model(const ModelState<float>& model, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "weights.bin", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / "weights.bin").string());
  json entries = json::array();
  Writer w{out, entries};
  for (const auto& [id, block] : model.params) {
    w.put(id, "weight", block.weight);
    w.put(id, "bias", block.bias);
    w.put(id, "scale", block.scale);
    w.put(id, "shift", block.shift);
  }
  for (const auto& [id, v] : model.running_mean) w.put(id, "running_mean", v);
  for (const auto& [id, v] : model.running_var) w.put(id, "running_var", v);
  const json manifest = {{"dtype", "float32"}, {"byte_order", "little"}, {"tensors", entries}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

ModelState<float> load_model(const fs::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw std::runtime_error("cannot read " + (dir / "manifest.json").string());
  const json manifest = json::parse(min);
  std::ifstream bin(dir / "weights.bin", std::ios::binary);
  const std::vector<char> bytes{std::istreambuf_iterator<char>(bin),
                                std::istreambuf_iterator<char>()};

  ModelState<float> model;
  for (const auto& e : manifest.at("tensors")) {
    const auto id = e.at("node").get<NodeId>();
    const auto field = e.at("field").get<std::string>();
    const auto rows = e.at("rows").get<Eigen::Index>();
    const auto cols = e.at("cols").get<Eigen::Index>();
    const auto offset = e.at("offset").get<std::size_t>();
    const std::size_t size = static_cast<std::size_t>(rows * cols) * sizeof(float);
    if (offset + size > bytes.size()) throw std::runtime_error("weights.bin is truncated");
    Matrix<float> m(rows, cols);
    std::memcpy(m.data(), bytes.data() + offset, size);
    if (field == "weight") {
      model.params[id].weight = m;
    } else if (field == "bias") {
      model.params[id].bias = m;
    } else if (field == "scale") {
      model.params[id].scale = m;
    } else if (field == "shift") {
      model.params[id].shift = m;
    } else if (field == "running_mean") {
      model.running_mean[id] = m;
    } else if (field == "running_var") {
      model.running_var[id] = m;
    } else {
      throw std::runtime_error("unknown tensor field " + field);
    }
  }
  return model;
}

}  // namespace evoarch
