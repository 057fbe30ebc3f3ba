#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "capvo/model.hpp"

// Checkpoint container. Byte layout (all integers little-endian):
//   8 bytes   magic "CAPVOCK1"
//   u32       format version (1)
//   u32       config length, then that many bytes of NetConfig JSON
//   u32       tensor count
//   per tensor, in net_for_each_tensor order:
//     u32     name length, then name bytes
//     u32     dtype (0 = float32, 1 = float64)
//     u32     rank, then rank u64 dims
//     raw values, row-major
// Save/load round-trips byte-identically for a given parameter set.

namespace capvo {

inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'P', 'V',
                                             'O', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json net_config_to_json(const NetConfig& cfg) {
  return nlohmann::json{{"dropout_rate", cfg.dropout_rate},
                        {"inception_widths", cfg.inception_widths},
                        {"input_h", cfg.input_h},
                        {"input_w", cfg.input_w},
                        {"lstm_hidden", cfg.lstm_hidden},
                        {"precision", cfg.precision}};
}

inline NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig cfg;
  try {
    j.at("dropout_rate").get_to(cfg.dropout_rate);
    j.at("inception_widths").get_to(cfg.inception_widths);
    j.at("input_h").get_to(cfg.input_h);
    j.at("input_w").get_to(cfg.input_w);
    j.at("lstm_hidden").get_to(cfg.lstm_hidden);
    j.at("precision").get_to(cfg.precision);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("net config json: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace detail {

template <typename T>
constexpr std::uint32_t dtype_code() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "checkpoint supports float32/float64 tensors");
  return std::is_same_v<T, float> ? 0u : 1u;
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t read_u32(std::istream& is, const char* what) {
  std::uint32_t v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError(std::string("checkpoint: truncated at ") + what);
  return v;
}
inline std::uint64_t read_u64(std::istream& is, const char* what) {
  std::uint64_t v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError(std::string("checkpoint: truncated at ") + what);
  return v;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const NetConfig& cfg,
                     const NetworkParams<T>& params) {
  if (detail::dtype_code<T>() == 0 && cfg.precision != "float32")
    throw ConfigError("checkpoint: params dtype disagrees with config precision");
  if (detail::dtype_code<T>() == 1 && cfg.precision != "float64")
    throw ConfigError("checkpoint: params dtype disagrees with config precision");

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open for write: " + path);
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_u32(os, kCheckpointVersion);

  const std::string cfg_json = net_config_to_json(cfg).dump();
  detail::write_u32(os, static_cast<std::uint32_t>(cfg_json.size()));
  os.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));

  auto tensors = net_tensor_list(const_cast<NetworkParams<T>&>(params));
  detail::write_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u32(os, detail::dtype_code<T>());
    detail::write_u32(os, static_cast<std::uint32_t>(tensor->rank()));
    for (std::size_t d = 0; d < tensor->rank(); ++d)
      detail::write_u64(os, tensor->dim(d));
    os.write(reinterpret_cast<const char*>(tensor->data()),
             static_cast<std::streamsize>(tensor->size() * sizeof(T)));
  }
  if (!os) throw IoError("checkpoint: write failed: " + path);
}

// Reads just the config so callers can dispatch on precision before
// instantiating parameters.
inline NetConfig load_checkpoint_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open: " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) ||
      std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw ValidationError("checkpoint: bad magic: " + path);
  const std::uint32_t version = detail::read_u32(is, "version");
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported version " +
                          std::to_string(version));
  const std::uint32_t len = detail::read_u32(is, "config length");
  std::string cfg_json(len, '\0');
  if (!is.read(cfg_json.data(), len))
    throw IoError("checkpoint: truncated config: " + path);
  return net_config_from_json(nlohmann::json::parse(cfg_json));
}

template <typename T>
std::pair<NetConfig, NetworkParams<T>> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open: " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) ||
      std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw ValidationError("checkpoint: bad magic: " + path);
  const std::uint32_t version = detail::read_u32(is, "version");
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported version " +
                          std::to_string(version));
  const std::uint32_t len = detail::read_u32(is, "config length");
  std::string cfg_json(len, '\0');
  if (!is.read(cfg_json.data(), len))
    throw IoError("checkpoint: truncated config: " + path);
  NetConfig cfg = net_config_from_json(nlohmann::json::parse(cfg_json));

  const bool want_f32 = detail::dtype_code<T>() == 0;
  if (want_f32 != (cfg.precision == "float32"))
    throw ConfigError("checkpoint: precision mismatch, file is " +
                      cfg.precision);

  // Allocate the right shapes from config, then fill records in order.
  NetworkParams<T> params = net_init<T>(cfg, 0);
  auto tensors = net_tensor_list(params);
  const std::uint32_t count = detail::read_u32(is, "tensor count");
  if (count != tensors.size())
    throw ValidationError("checkpoint: tensor count mismatch");
  for (auto& [name, tensor] : tensors) {
    const std::uint32_t name_len = detail::read_u32(is, "name length");
    std::string rec_name(name_len, '\0');
    if (!is.read(rec_name.data(), name_len))
      throw IoError("checkpoint: truncated name");
    if (rec_name != name)
      throw ValidationError("checkpoint: expected tensor '" + name +
                            "', found '" + rec_name + "'");
    const std::uint32_t dtype = detail::read_u32(is, "dtype");
    if (dtype != detail::dtype_code<T>())
      throw ValidationError("checkpoint: dtype mismatch for " + name);
    const std::uint32_t rank = detail::read_u32(is, "rank");
    if (rank != tensor->rank())
      throw ValidationError("checkpoint: rank mismatch for " + name);
    for (std::size_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = detail::read_u64(is, "dim");
      if (dim != tensor->dim(d))
        throw ValidationError("checkpoint: shape mismatch for " + name);
    }
    if (!is.read(reinterpret_cast<char*>(tensor->data()),
                 static_cast<std::streamsize>(tensor->size() * sizeof(T))))
      throw IoError("checkpoint: truncated values for " + name);
  }
  return {cfg, std::move(params)};
}

}  // namespace capvo
