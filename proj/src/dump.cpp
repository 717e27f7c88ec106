// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/dump.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dualmfa/error.hpp"

namespace dualmfa {

void write_pgm(const std::string& path, const std::vector<double>& values, std::size_t width,
               std::size_t height) {
  if (values.size() != width * height) {
    throw dimension_error("pgm: " + std::to_string(values.size()) + " values for a " +
                          std::to_string(width) + "x" + std::to_string(height) + " map");
  }
  const double lo = *std::min_element(values.begin(), values.end());
  const double hi = *std::max_element(values.begin(), values.end());
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write graymap: " + path);
  out << "P2\n" << width << ' ' << height << "\n255\n";
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (x) out << ' ';
      out << static_cast<int>(std::lround((values[y * width + x] - lo) * scale));
    }
    out << '\n';
  }
}

void write_attention_dump(const std::string& dir, DualMfaModel& model, const Dataset& data) {
  namespace fs = std::filesystem;
  if (data.instances.empty()) throw data_error("empty dataset");
  fs::create_directories(dir);

  const ModelConfig& cfg = model.config();
  std::ofstream records(fs::path(dir) / "attention.jsonl", std::ios::binary);
  if (!records) throw data_error("cannot write attention records in " + dir);

  for (std::size_t i = 0; i < data.instances.size(); ++i) {
    const VqaInstance& inst = data.instances[i];
    Graph g;
    ModelForward out = model.forward(g, inst);
    const std::size_t pred = model.predict(g.value(out.probabilities), inst.choices, data.answers);

    nlohmann::json rec;
    rec["sample"] = i;
    rec["question_type"] = inst.question_type();
    rec["prediction"] = data.answers.answer(pred);
    rec["a1"] = out.attention.a1.values();
    rec["a2"] = out.attention.a2.values();
    records << rec.dump() << '\n';

    if (cfg.use_region_branch) {
      const std::size_t cells = cfg.grid_cells();
      for (std::size_t glimpse = 0; glimpse < cfg.glimpses; ++glimpse) {
        const double* row = out.attention.a1.data() + glimpse * cells;
        std::vector<double> map(row, row + cells);
        const std::string name =
            "a1_sample" + std::to_string(i) + "_g" + std::to_string(glimpse) + ".pgm";
        write_pgm((fs::path(dir) / name).string(), map, cfg.grid_w, cfg.grid_h);
      }
    }
  }
}

}  // namespace dualmfa
