// SPDX-License-Identifier: Apache-2.0
//
// Container layout:
//   8 bytes  magic "TRJSCKPT"
//   u32      format version
//   u64      header length, then the JSON header
//   per parameter, in header order: values, first moments, second moments
//   (raw little-endian doubles)
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "trajset/config_io.hpp"
#include "trajset/error.hpp"
#include "trajset/harness.hpp"

namespace trajset {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'J', 'S', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

nlohmann::json kv_to_json(const KeyValues& kv) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : kv) j[k] = v;
  return j;
}

KeyValues json_to_kv(const nlohmann::json& j) {
  KeyValues kv;
  for (auto it = j.begin(); it != j.end(); ++it) kv.emplace_back(it.key(), it.value().get<std::string>());
  return kv;
}

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError(path + ": truncated checkpoint");
  return v;
}

void write_doubles(std::ofstream& os, std::span<const double> v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& is, std::span<double> v, const std::string& path) {
  if (!is.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)))) {
    throw IoError(path + ": truncated checkpoint");
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const auto& items = ck.params.registry.items();
  if (ck.optimizer.m.size() != items.size() || ck.optimizer.v.size() != items.size()) {
    throw ContractError("checkpoint optimizer state does not match the parameters");
  }
  nlohmann::json header;
  header["model"] = kv_to_json(to_key_values(ck.model));
  header["train"] = kv_to_json(to_key_values(ck.train));
  header["epoch"] = ck.epoch;
  header["batch"] = ck.batch;
  header["step"] = ck.step;
  header["optimizer_step"] = ck.optimizer.step;
  header["rng"] = {{"scheme", "counter"}, {"seed", ck.train.seed}};
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : items) {
    tensors.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, Checkpoint::kFormatVersion);
  write_pod(os, static_cast<std::uint64_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    write_doubles(os, items[i].tensor.values());
    write_doubles(os, ck.optimizer.m[i]);
    write_doubles(os, ck.optimizer.v[i]);
  }
  if (!os) throw IoError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path + ": not a checkpoint file");
  }
  const auto version = read_pod<std::uint32_t>(is, path);
  if (version != Checkpoint::kFormatVersion) {
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = read_pod<std::uint64_t>(is, path);
  if (len > (1ULL << 30)) throw IoError(path + ": corrupt header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) {
    throw IoError(path + ": truncated checkpoint");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": corrupt header: " + e.what());
  }

  Checkpoint ck;
  try {
    apply_key_values(ck.model, json_to_kv(header.at("model")));
    apply_key_values(ck.train, json_to_kv(header.at("train")));
    ck.epoch = header.at("epoch").get<std::size_t>();
    ck.batch = header.at("batch").get<std::size_t>();
    ck.step = header.at("step").get<std::size_t>();
    ck.optimizer.step = header.at("optimizer_step").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": malformed header: " + e.what());
  }
  ck.params = ModelParams::create(ck.model, 0);
  const auto& items = ck.params.registry.items();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != items.size()) throw IoError(path + ": parameter count mismatch");
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (tensors[i].at("name").get<std::string>() != items[i].name ||
        tensors[i].at("shape").get<Shape>() != items[i].tensor.shape()) {
      throw IoError(path + ": parameter layout mismatch at " + items[i].name);
    }
    Tensor t = items[i].tensor;
    read_doubles(is, t.mutable_values(), path);
    ck.optimizer.m.emplace_back(t.numel());
    ck.optimizer.v.emplace_back(t.numel());
    read_doubles(is, ck.optimizer.m.back(), path);
    read_doubles(is, ck.optimizer.v.back(), path);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError(path + ": trailing bytes");
  return ck;
}

}  // namespace trajset
