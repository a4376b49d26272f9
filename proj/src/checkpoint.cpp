// SPDX-License-Identifier: Apache-2.0
#include "maskrate/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "maskrate/run_config.hpp"

namespace maskrate {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'R', 'C', 'K', 'P', 'T', '0', '1'};
constexpr int kFormatVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw std::runtime_error("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_tensors(std::ostream& out, const ModelParams& p) {
  for_each_matrix(p, [&](const Matrix& m, TensorRole) {
    for (double x : m.data) put_u64(out, std::bit_cast<std::uint64_t>(x));
  });
}

void get_tensors(std::istream& in, ModelParams& p) {
  for_each_matrix(p, [&](Matrix& m, TensorRole) {
    for (double& x : m.data) x = std::bit_cast<double>(get_u64(in));
  });
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  json header;
  header["format"] = kFormatVersion;
  header["model"] = model_config_to_json(ckpt.params.config);
  header["train"] = ckpt.train ? train_config_to_json(*ckpt.train) : json(nullptr);
  header["step"] = ckpt.step;
  header["rng"] = json{{"seed", ckpt.seed}, {"next_step", ckpt.step}};
  header["vocab"] = ckpt.vocab.tokens();
  json tensors = json::array();
  for_each_tensor(ckpt.params, [&](const std::string& name, const Matrix& m, TensorRole) {
    tensors.push_back(json{{"name", name}, {"rows", m.rows}, {"cols", m.cols}});
  });
  header["tensors"] = tensors;
  header["optimizer"] = ckpt.opt ? json{{"step", ckpt.opt->step}} : json(nullptr);

  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_tensors(out, ckpt.params);
  if (ckpt.opt) {
    put_tensors(out, ckpt.opt->m);
    put_tensors(out, ckpt.opt->v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a checkpoint file (bad magic)");
  const std::uint64_t len = get_u64(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint header");
  const json header = json::parse(text);
  if (header.at("format").get<int>() != kFormatVersion) {
    throw std::runtime_error("unsupported checkpoint format version");
  }

  Checkpoint ckpt;
  const ModelConfig cfg = model_config_from_json(header.at("model"));
  ckpt.params = init_params(cfg);
  std::size_t i = 0;
  const auto& tensors = header.at("tensors");
  for_each_tensor(ckpt.params, [&](const std::string& name, const Matrix& m, TensorRole) {
    if (i >= tensors.size() || tensors[i].at("name") != name || tensors[i].at("rows") != m.rows ||
        tensors[i].at("cols") != m.cols) {
      throw std::runtime_error("checkpoint tensor table does not match the model config");
    }
    ++i;
  });
  if (i != tensors.size()) throw std::runtime_error("checkpoint tensor table does not match the model config");

  if (!header.at("train").is_null()) ckpt.train = train_config_from_json(header.at("train"));
  ckpt.step = header.at("step").get<std::int64_t>();
  ckpt.seed = header.at("rng").at("seed").get<std::uint64_t>();
  ckpt.vocab = Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  if (ckpt.vocab.size() != cfg.vocab_size) throw std::runtime_error("checkpoint vocab size mismatch");

  get_tensors(in, ckpt.params);
  if (!header.at("optimizer").is_null()) {
    OptState opt = init_opt_state(ckpt.params);
    opt.step = header.at("optimizer").at("step").get<std::int64_t>();
    get_tensors(in, opt.m);
    get_tensors(in, opt.v);
    ckpt.opt = std::move(opt);
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path));
  write_checkpoint(ckpt, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path));
  return read_checkpoint(in);
}

}  // namespace maskrate
