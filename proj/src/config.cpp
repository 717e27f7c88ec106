// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dualmfa/error.hpp"

namespace dualmfa {

std::string to_string(FusionOp v) { return v == FusionOp::Mul ? "mul" : "add"; }

std::string to_string(NormOp v) {
  switch (v) {
    case NormOp::L2: return "l2";
    case NormOp::Power: return "power";
    default: return "none";
  }
}

std::string to_string(CombineOp v) {
  switch (v) {
    case CombineOp::Add: return "add";
    case CombineOp::Mul: return "mul";
    default: return "cat";
  }
}

FusionOp parse_fusion(const std::string& s) {
  if (s == "mul") return FusionOp::Mul;
  if (s == "add") return FusionOp::Add;
  throw config_error("unknown fusion op '" + s + "' (expected mul|add)");
}

NormOp parse_norm(const std::string& s) {
  if (s == "l2") return NormOp::L2;
  if (s == "power") return NormOp::Power;
  if (s == "none") return NormOp::None;
  throw config_error("unknown normalization '" + s + "' (expected l2|power|none)");
}

CombineOp parse_combine(const std::string& s) {
  if (s == "add") return CombineOp::Add;
  if (s == "mul") return CombineOp::Mul;
  if (s == "cat") return CombineOp::Cat;
  throw config_error("unknown combine op '" + s + "' (expected add|mul|cat)");
}

std::size_t ModelConfig::combine_dim() const {
  if (combine == CombineOp::Cat && dual()) return 2 * pooled_dim();
  return pooled_dim();
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw config_error(std::string(name) + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(question_len, "question_len");
  positive(image_channels, "image_channels");
  positive(grid_h, "grid_h");
  positive(grid_w, "grid_w");
  positive(det_channels, "det_channels");
  positive(num_boxes, "num_boxes");
  positive(common_dim, "common_dim");
  positive(glimpses, "glimpses");
  positive(n_answers, "n_answers");
  if (!use_region_branch && !use_detection_branch) {
    throw config_error("both branches disabled; enable at least one");
  }
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.vocab_size = 11;
  c.embed_dim = 5;
  c.hidden_dim = 8;
  c.question_len = 4;
  c.image_channels = 6;
  c.grid_h = 3;
  c.grid_w = 3;
  c.det_channels = 5;
  c.num_boxes = 4;
  c.common_dim = 7;
  c.glimpses = 2;
  c.n_answers = 6;
  return c;
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.vocab_size = 7;  // <pad>, region, detection, ch0..ch3
  c.embed_dim = 32;
  c.hidden_dim = 64;
  c.question_len = 8;
  c.image_channels = 8;
  c.grid_h = 4;
  c.grid_w = 4;
  c.det_channels = 8;
  c.num_boxes = 6;
  c.common_dim = 32;
  c.glimpses = 2;
  c.n_answers = 4;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw config_error("batch_size must be positive");
  if (max_iterations == 0) throw config_error("max_iterations must be positive");
  if (validation_interval == 0) throw config_error("validation_interval must be positive");
  if (early_stop_patience == 0) throw config_error("early_stop_patience must be positive");
  if (learning_rate <= 0.0) throw config_error("learning_rate must be positive");
  if (decay < 0.0 || decay >= 1.0) throw config_error("decay must be in [0, 1)");
  if (weight_decay < 0.0) throw config_error("weight_decay must be non-negative");
  if (epsilon <= 0.0) throw config_error("epsilon must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw config_error("dropout_rate must be in [0, 1)");
  if (clip_threshold <= 0.0) throw config_error("clip_threshold must be positive");
}

TrainConfig TrainConfig::desk() {
  TrainConfig t;
  t.batch_size = 32;
  t.max_iterations = 2000;
  t.validation_interval = 250;
  t.early_stop_patience = 5;
  t.learning_rate = 1e-3;
  t.dropout_rate = 0.2;
  return t;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw config_error("bad value for " + key + ": '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw config_error("bad value for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw config_error("bad value for " + key + ": '" + v + "' (expected true|false)");
}

}  // namespace

std::string write_config(const ModelConfig& m, const TrainConfig& t) {
  std::ostringstream os;
  os << "vocab_size=" << m.vocab_size << '\n'
     << "embed_dim=" << m.embed_dim << '\n'
     << "hidden_dim=" << m.hidden_dim << '\n'
     << "question_len=" << m.question_len << '\n'
     << "image_channels=" << m.image_channels << '\n'
     << "grid_h=" << m.grid_h << '\n'
     << "grid_w=" << m.grid_w << '\n'
     << "det_channels=" << m.det_channels << '\n'
     << "num_boxes=" << m.num_boxes << '\n'
     << "common_dim=" << m.common_dim << '\n'
     << "glimpses=" << m.glimpses << '\n'
     << "n_answers=" << m.n_answers << '\n'
     << "fusion=" << to_string(m.fusion) << '\n'
     << "normalization=" << to_string(m.normalization) << '\n'
     << "combine=" << to_string(m.combine) << '\n'
     << "use_region_branch=" << (m.use_region_branch ? "true" : "false") << '\n'
     << "use_detection_branch=" << (m.use_detection_branch ? "true" : "false") << '\n'
     << "batch_size=" << t.batch_size << '\n'
     << "max_iterations=" << t.max_iterations << '\n'
     << "validation_interval=" << t.validation_interval << '\n'
     << "early_stop_patience=" << t.early_stop_patience << '\n'
     << "learning_rate=" << fmt_double(t.learning_rate) << '\n'
     << "decay=" << fmt_double(t.decay) << '\n'
     << "weight_decay=" << fmt_double(t.weight_decay) << '\n'
     << "epsilon=" << fmt_double(t.epsilon) << '\n'
     << "dropout_rate=" << fmt_double(t.dropout_rate) << '\n'
     << "clip_threshold=" << fmt_double(t.clip_threshold) << '\n'
     << "seed=" << t.seed << '\n';
  return os.str();
}

void parse_config_text(const std::string& text, ModelConfig& m, TrainConfig& t) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) throw config_error("expected key=value, got '" + stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string val = trim(stripped.substr(eq + 1));

    if (key == "vocab_size") m.vocab_size = parse_size(key, val);
    else if (key == "embed_dim") m.embed_dim = parse_size(key, val);
    else if (key == "hidden_dim") m.hidden_dim = parse_size(key, val);
    else if (key == "question_len") m.question_len = parse_size(key, val);
    else if (key == "image_channels") m.image_channels = parse_size(key, val);
    else if (key == "grid_h") m.grid_h = parse_size(key, val);
    else if (key == "grid_w") m.grid_w = parse_size(key, val);
    else if (key == "det_channels") m.det_channels = parse_size(key, val);
    else if (key == "num_boxes") m.num_boxes = parse_size(key, val);
    else if (key == "common_dim") m.common_dim = parse_size(key, val);
    else if (key == "glimpses") m.glimpses = parse_size(key, val);
    else if (key == "n_answers") m.n_answers = parse_size(key, val);
    else if (key == "fusion") m.fusion = parse_fusion(val);
    else if (key == "normalization") m.normalization = parse_norm(val);
    else if (key == "combine") m.combine = parse_combine(val);
    else if (key == "use_region_branch") m.use_region_branch = parse_bool(key, val);
    else if (key == "use_detection_branch") m.use_detection_branch = parse_bool(key, val);
    else if (key == "batch_size") t.batch_size = parse_size(key, val);
    else if (key == "max_iterations") t.max_iterations = parse_size(key, val);
    else if (key == "validation_interval") t.validation_interval = parse_size(key, val);
    else if (key == "early_stop_patience") t.early_stop_patience = parse_size(key, val);
    else if (key == "learning_rate") t.learning_rate = parse_double(key, val);
    else if (key == "decay") t.decay = parse_double(key, val);
    else if (key == "weight_decay") t.weight_decay = parse_double(key, val);
    else if (key == "epsilon") t.epsilon = parse_double(key, val);
    else if (key == "dropout_rate") t.dropout_rate = parse_double(key, val);
    else if (key == "clip_threshold") t.clip_threshold = parse_double(key, val);
    else if (key == "seed") t.seed = parse_size(key, val);
    else throw config_error("unknown config key '" + key + "'");
  }
}

void load_config_file(const std::string& path, ModelConfig& m, TrainConfig& t) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  parse_config_text(os.str(), m, t);
}

}  // namespace dualmfa
