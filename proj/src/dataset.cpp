// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/dataset.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dualmfa/error.hpp"

namespace dualmfa {

std::string to_string(PlantedMeta::Type t) {
  return t == PlantedMeta::Type::Region ? "region" : "detection";
}

std::string VqaInstance::question_type() const {
  return planted ? to_string(planted->type) : "unknown";
}

void PlantedGenConfig::validate(const ModelConfig& cfg) const {
  if (buckets < 2) throw config_error("planted generator needs at least 2 buckets");
  if (query_channels == 0) throw config_error("planted generator needs a query channel");
  if (spike < 0.0) throw config_error("spike magnitude must be non-negative");
  if (noise_sigma < 0.0) throw config_error("noise sigma must be non-negative");
  if (cfg.n_answers != buckets) {
    throw config_error("n_answers (" + std::to_string(cfg.n_answers) +
                       ") must equal the planted bucket count (" + std::to_string(buckets) + ")");
  }
  if (cfg.vocab_size != 3 + query_channels) {
    throw config_error("vocab_size (" + std::to_string(cfg.vocab_size) +
                       ") must be 3 + query_channels (" + std::to_string(3 + query_channels) + ")");
  }
  if (cfg.image_channels <= query_channels || cfg.det_channels <= query_channels) {
    throw config_error("feature channels must exceed query_channels + value channel");
  }
  if (cfg.question_len < 2) throw config_error("question_len must be at least 2");
  if (patch == 0 || patch > cfg.grid_h || patch > cfg.grid_w) {
    throw config_error("planted patch does not fit the grid");
  }
}

std::vector<std::string> planted_vocabulary(const PlantedGenConfig& gen) {
  std::vector<std::string> vocab{"<pad>", "region", "detection"};
  for (std::size_t c = 0; c < gen.query_channels; ++c) {
    vocab.push_back("ch" + std::to_string(c));
  }
  return vocab;
}

std::vector<std::string> planted_answer_names(const PlantedGenConfig& gen) {
  std::vector<std::string> names;
  for (std::size_t b = 0; b < gen.buckets; ++b) names.push_back("b" + std::to_string(b));
  return names;
}

namespace {

double bucket_center(std::size_t b, std::size_t buckets) {
  return static_cast<double>(b) + 0.5 - static_cast<double>(buckets) / 2.0;
}

std::size_t bucket_of(double v, std::size_t buckets) {
  const double raw = std::floor(v + static_cast<double>(buckets) / 2.0);
  if (raw < 0.0) return 0;
  const auto b = static_cast<std::size_t>(raw);
  return b >= buckets ? buckets - 1 : b;
}

}  // namespace

Dataset generate_planted(std::size_t n, const ModelConfig& cfg, const PlantedGenConfig& gen,
                         std::uint64_t seed) {
  if (n == 0) throw contract_error("generate_planted: n must be positive");
  cfg.validate();
  gen.validate(cfg);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, gen.noise_sigma);
  std::uniform_real_distribution<double> jitter(-0.4, 0.4);

  Dataset data;
  data.vocabulary = planted_vocabulary(gen);
  data.answers = AnswerVocabulary(planted_answer_names(gen));

  const std::size_t cells = cfg.grid_cells();
  const std::size_t vc = gen.value_channel();

  for (std::size_t s = 0; s < n; ++s) {
    VqaInstance inst;
    inst.image.values = Tensor({cfg.image_channels, cfg.grid_h, cfg.grid_w});
    inst.detections.values = Tensor({cfg.det_channels, cfg.num_boxes});
    for (std::size_t i = 0; i < inst.image.values.size(); ++i) inst.image.values[i] = noise(rng);
    for (std::size_t i = 0; i < inst.detections.values.size(); ++i) {
      inst.detections.values[i] = noise(rng);
    }

    const bool detection_type = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    const std::size_t channel =
        std::uniform_int_distribution<std::size_t>(0, gen.query_channels - 1)(rng);
    const std::size_t bucket = std::uniform_int_distribution<std::size_t>(0, gen.buckets - 1)(rng);
    const double value = bucket_center(bucket, gen.buckets) + jitter(rng);

    PlantedMeta meta;
    meta.channel = channel;
    meta.bucket = bucket;

    if (detection_type) {
      meta.type = PlantedMeta::Type::Detection;
      const std::size_t box = std::uniform_int_distribution<std::size_t>(0, cfg.num_boxes - 1)(rng);
      meta.location = box;
      inst.detections.values.at(channel, box) += gen.spike;
      inst.detections.values.at(vc, box) = value;
      inst.question = TokenSequence::padded({2, 3 + channel}, cfg.question_len);
    } else {
      meta.type = PlantedMeta::Type::Region;
      const std::size_t ph =
          std::uniform_int_distribution<std::size_t>(0, cfg.grid_h - gen.patch)(rng);
      const std::size_t pw =
          std::uniform_int_distribution<std::size_t>(0, cfg.grid_w - gen.patch)(rng);
      meta.location = ph * cfg.grid_w + pw;
      for (std::size_t dy = 0; dy < gen.patch; ++dy) {
        for (std::size_t dx = 0; dx < gen.patch; ++dx) {
          const std::size_t cell = (ph + dy) * cfg.grid_w + (pw + dx);
          inst.image.values[channel * cells + cell] += gen.spike;
          inst.image.values[vc * cells + cell] = value;
        }
      }
      inst.question = TokenSequence::padded({1, 3 + channel}, cfg.question_len);
    }

    inst.planted = meta;
    inst.answers = {data.answers.answer(bucket)};
    data.instances.push_back(std::move(inst));
  }
  return data;
}

std::size_t planted_label_rule(const VqaInstance& inst, const ModelConfig& cfg,
                               const PlantedGenConfig& gen) {
  if (!inst.planted) throw contract_error("planted_label_rule: instance has no planted metadata");
  const PlantedMeta& meta = *inst.planted;
  const std::size_t vc = gen.value_channel();
  if (meta.type == PlantedMeta::Type::Detection) {
    return bucket_of(inst.detections.values.at(vc, meta.location), gen.buckets);
  }
  const std::size_t cells = cfg.grid_cells();
  const std::size_t ph = meta.location / cfg.grid_w;
  const std::size_t pw = meta.location % cfg.grid_w;
  double sum = 0.0;
  for (std::size_t dy = 0; dy < gen.patch; ++dy) {
    for (std::size_t dx = 0; dx < gen.patch; ++dx) {
      sum += inst.image.values[vc * cells + (ph + dy) * cfg.grid_w + (pw + dx)];
    }
  }
  return bucket_of(sum / static_cast<double>(gen.patch * gen.patch), gen.buckets);
}

VqaInstance random_instance(const ModelConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  VqaInstance inst;
  inst.image.values = Tensor({cfg.image_channels, cfg.grid_h, cfg.grid_w});
  inst.detections.values = Tensor({cfg.det_channels, cfg.num_boxes});
  for (std::size_t i = 0; i < inst.image.values.size(); ++i) inst.image.values[i] = unit(rng);
  for (std::size_t i = 0; i < inst.detections.values.size(); ++i) {
    inst.detections.values[i] = unit(rng);
  }
  std::uniform_int_distribution<std::size_t> token(1, cfg.vocab_size - 1);
  std::vector<std::size_t> tokens;
  const std::size_t n_tokens = std::max<std::size_t>(1, cfg.question_len - 1);
  for (std::size_t t = 0; t < n_tokens; ++t) tokens.push_back(token(rng));
  inst.question = TokenSequence::padded(std::move(tokens), cfg.question_len);
  std::uniform_int_distribution<std::size_t> answer(0, cfg.n_answers - 1);
  inst.answers = {std::to_string(answer(rng))};
  return inst;
}

// ---------------------------------------------------------------------------
// File format: UTF-8 manifest + one binary blob of little-endian f64.

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) {
    crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  }
  return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr const char* kManifestHeader = "dualmfa-manifest v1";

void append_f64_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

double read_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string escape_field(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    if (c == '%' || c == '|' || c == '\t' || c == '\n' || c == '\r') {
      char buf[4];
      std::snprintf(buf, sizeof(buf), "%%%02X", c);
      out += buf;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

std::string unescape_field(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out.push_back(static_cast<char>(std::stoul(s.substr(i + 1, 2), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::string join_list(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back('|');
    out += escape_field(parts[i]);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == '|') {
      parts.push_back(unescape_field(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(unescape_field(cur));
  return parts;
}

std::vector<std::string> split_char(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

Shape parse_shape(const std::string& s, const std::string& where) {
  Shape shape;
  for (const std::string& part : split_char(s, 'x')) {
    try {
      shape.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw data_error(where + ": bad shape '" + s + "'");
    }
  }
  return shape;
}

std::string shape_field(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out.push_back('x');
    out += std::to_string(s[i]);
  }
  return out;
}

}  // namespace

void write_dataset(const std::string& dir, const Dataset& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::string blob;
  std::ostringstream manifest;
  manifest << kManifestHeader << '\n';

  for (std::size_t i = 0; i < data.instances.size(); ++i) {
    const VqaInstance& inst = data.instances[i];
    const std::size_t off = blob.size();
    std::string record;
    for (double v : inst.image.values.values()) append_f64_le(record, v);
    for (double v : inst.detections.values.values()) append_f64_le(record, v);
    const std::uint32_t crc =
        crc32(reinterpret_cast<const unsigned char*>(record.data()), record.size());
    blob += record;

    manifest << "id=" << i << '\t' << "q=";
    for (std::size_t t = 0; t < inst.question.ids.size(); ++t) {
      if (t) manifest << ',';
      manifest << inst.question.ids[t];
    }
    manifest << '\t' << "img=" << shape_field(inst.image.values.shape()) << '\t'
             << "det=" << shape_field(inst.detections.values.shape()) << '\t' << "off=" << off
             << '\t' << "len=" << record.size() << '\t' << "crc=";
    char crcbuf[16];
    std::snprintf(crcbuf, sizeof(crcbuf), "%08x", crc);
    manifest << crcbuf << '\t' << "ans=" << join_list(inst.answers);
    if (!inst.choices.empty()) manifest << '\t' << "choices=" << join_list(inst.choices);
    if (inst.planted) {
      manifest << '\t' << "meta=" << to_string(inst.planted->type) << ','
               << inst.planted->channel << ',' << inst.planted->location << ','
               << inst.planted->bucket;
    }
    manifest << '\n';
  }

  {
    std::ofstream out(fs::path(dir) / "manifest.txt", std::ios::binary);
    if (!out) throw data_error("cannot write manifest in " + dir);
    out << manifest.str();
  }
  {
    std::ofstream out(fs::path(dir) / "features.bin", std::ios::binary);
    if (!out) throw data_error("cannot write feature blob in " + dir);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
  save_vocabulary((fs::path(dir) / "vocab.txt").string(), data.vocabulary);
  data.answers.save((fs::path(dir) / "answers.txt").string());
}

Dataset read_dataset(const std::string& dir, const ModelConfig* expect) {
  namespace fs = std::filesystem;
  const fs::path root(dir);

  Dataset data;
  data.vocabulary = load_vocabulary((root / "vocab.txt").string());
  data.answers = AnswerVocabulary::load((root / "answers.txt").string());

  std::ifstream blob_in(root / "features.bin", std::ios::binary);
  if (!blob_in) throw data_error("cannot open feature blob in " + dir);
  std::string blob((std::istreambuf_iterator<char>(blob_in)), std::istreambuf_iterator<char>());

  std::ifstream man(root / "manifest.txt");
  if (!man) throw data_error("cannot open manifest in " + dir);
  std::string line;
  if (!std::getline(man, line) || line != kManifestHeader) {
    throw data_error("manifest header mismatch in " + dir);
  }

  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::string id = "?", q, img, det, ans, choices, meta;
    std::size_t off = 0, len = 0;
    std::uint32_t crc_want = 0;
    bool have_crc = false;
    for (const std::string& field : split_char(line, '\t')) {
      const std::size_t eq = field.find('=');
      if (eq == std::string::npos) throw data_error("manifest record: bad field '" + field + "'");
      const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
      if (key == "id") id = val;
      else if (key == "q") q = val;
      else if (key == "img") img = val;
      else if (key == "det") det = val;
      else if (key == "off") off = std::stoull(val);
      else if (key == "len") len = std::stoull(val);
      else if (key == "crc") { crc_want = static_cast<std::uint32_t>(std::stoul(val, nullptr, 16)); have_crc = true; }
      else if (key == "ans") ans = val;
      else if (key == "choices") choices = val;
      else if (key == "meta") meta = val;
      else throw data_error("manifest record " + id + ": unknown field '" + key + "'");
    }
    const std::string where = "record " + id;
    if (q.empty() || img.empty() || det.empty() || ans.empty() || !have_crc) {
      throw data_error(where + ": missing required fields");
    }
    if (off + len > blob.size()) {
      throw data_error(where + ": blob truncated (need " + std::to_string(off + len) +
                       " bytes, have " + std::to_string(blob.size()) + ")");
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data()) + off;
    if (crc32(bytes, len) != crc_want) throw data_error(where + ": checksum mismatch");

    VqaInstance inst;
    const Shape img_shape = parse_shape(img, where);
    const Shape det_shape = parse_shape(det, where);
    if (img_shape.size() != 3 || det_shape.size() != 2) {
      throw data_error(where + ": expected rank-3 image and rank-2 detection shapes");
    }
    const std::size_t img_n = shape_size(img_shape), det_n = shape_size(det_shape);
    if (len != 8 * (img_n + det_n)) {
      throw data_error(where + ": length " + std::to_string(len) + " does not match shapes");
    }
    if (expect) {
      if (img_shape != Shape{expect->image_channels, expect->grid_h, expect->grid_w}) {
        throw data_error(where + ": image shape " + shape_str(img_shape) +
                         " does not match config");
      }
      if (det_shape != Shape{expect->det_channels, expect->num_boxes}) {
        throw data_error(where + ": detection shape " + shape_str(det_shape) +
                         " does not match config");
      }
    }

    std::vector<double> img_vals(img_n), det_vals(det_n);
    for (std::size_t i = 0; i < img_n; ++i) img_vals[i] = read_f64_le(bytes + 8 * i);
    for (std::size_t i = 0; i < det_n; ++i) det_vals[i] = read_f64_le(bytes + 8 * (img_n + i));
    inst.image.values = Tensor(img_shape, std::move(img_vals));
    inst.detections.values = Tensor(det_shape, std::move(det_vals));

    for (const std::string& tok : split_char(q, ',')) {
      try {
        inst.question.ids.push_back(std::stoull(tok));
      } catch (const std::exception&) {
        throw data_error(where + ": bad token id '" + tok + "'");
      }
    }
    for (auto it = inst.question.ids.rbegin(); it != inst.question.ids.rend() && *it == 0; ++it) {
      ++inst.question.pad_len;
    }

    inst.answers = split_list(ans);
    if (inst.answers.empty() || (inst.answers.size() == 1 && inst.answers[0].empty())) {
      throw data_error(where + ": empty answer list");
    }
    if (!choices.empty()) inst.choices = split_list(choices);
    if (!meta.empty()) {
      const auto parts = split_char(meta, ',');
      if (parts.size() != 4) throw data_error(where + ": bad meta field");
      PlantedMeta pm;
      if (parts[0] == "region") pm.type = PlantedMeta::Type::Region;
      else if (parts[0] == "detection") pm.type = PlantedMeta::Type::Detection;
      else throw data_error(where + ": unknown planted type '" + parts[0] + "'");
      pm.channel = std::stoull(parts[1]);
      pm.location = std::stoull(parts[2]);
      pm.bucket = std::stoull(parts[3]);
      inst.planted = pm;
    }
    data.instances.push_back(std::move(inst));
  }
  return data;
}

std::vector<std::string> load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open vocabulary: " + path);
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  if (vocab.empty() || vocab[0] != "<pad>") {
    throw data_error("vocabulary " + path + ": line 0 must be the literal <pad>");
  }
  return vocab;
}

void save_vocabulary(const std::string& path, const std::vector<std::string>& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write vocabulary: " + path);
  for (const std::string& v : vocab) out << v << '\n';
}

}  // namespace dualmfa
