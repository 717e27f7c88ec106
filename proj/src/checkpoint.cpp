// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "dualmfa/dataset.hpp"
#include "dualmfa/error.hpp"

namespace dualmfa {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'F', 'A', 'C', 'K', 'P', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string str(std::size_t len) {
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw data_error("checkpoint truncated: " + path_);
  }
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, DualMfaModel& model, const TrainConfig& train) {
  std::string body;
  const std::string config = write_config(model.config(), train);
  put_u64(body, config.size());
  body += config;

  const std::vector<Parameter*> params = model.parameters();
  put_u64(body, params.size());
  for (const Parameter* p : params) {
    put_u64(body, p->name.size());
    body += p->name;
    put_u64(body, p->value.rank());
    for (std::size_t i = 0; i < p->value.rank(); ++i) put_u64(body, p->value.extent(i));
    for (std::size_t i = 0; i < p->value.size(); ++i) put_f64(body, p->value[i]);
  }

  const std::uint32_t crc =
      crc32(reinterpret_cast<const unsigned char*>(body.data()), body.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((crc >> (8 * i)) & 0xFFu));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + 4 ||
      bytes.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0) {
    throw data_error("not a checkpoint file: " + path);
  }
  const std::string body = bytes.substr(sizeof(kMagic), bytes.size() - sizeof(kMagic) - 4);
  std::uint32_t crc_want = 0;
  for (int i = 0; i < 4; ++i) {
    crc_want |= static_cast<std::uint32_t>(
                    static_cast<unsigned char>(bytes[bytes.size() - 4 + i]))
                << (8 * i);
  }
  if (crc32(reinterpret_cast<const unsigned char*>(body.data()), body.size()) != crc_want) {
    throw data_error("checkpoint checksum mismatch: " + path);
  }

  Reader r(body, path);
  Checkpoint ckpt;
  const std::uint64_t config_len = r.u64();
  parse_config_text(r.str(config_len), ckpt.model, ckpt.train);

  const std::uint64_t n_params = r.u64();
  for (std::uint64_t pi = 0; pi < n_params; ++pi) {
    const std::uint64_t name_len = r.u64();
    std::string name = r.str(name_len);
    const std::uint64_t rank = r.u64();
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(r.u64());
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = r.f64();
    ckpt.params.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return ckpt;
}

DualMfaModel model_from_checkpoint(const Checkpoint& ckpt) {
  DualMfaModel model(ckpt.model);
  std::vector<Parameter*> params = model.parameters();
  if (params.size() != ckpt.params.size()) {
    throw data_error("checkpoint holds " + std::to_string(ckpt.params.size()) +
                     " parameters, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, value] = ckpt.params[i];
    if (params[i]->name != name) {
      throw data_error("checkpoint parameter '" + name + "' does not match expected '" +
                       params[i]->name + "'");
    }
    if (!params[i]->value.same_shape(value)) {
      throw data_error("checkpoint parameter '" + name + "' has shape " +
                       shape_str(value.shape()) + ", expected " +
                       shape_str(params[i]->value.shape()));
    }
    params[i]->value = value;
  }
  return model;
}

}  // namespace dualmfa
