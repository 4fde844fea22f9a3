#pragma once

// Checkpoint layout (a directory):
//   manifest.json   architecture, tensor shapes, seed, update index,
//                   parameter count and FNV-1a-64 checksum of params.bin
//   params.bin      parameters as little-endian IEEE-754 binary64, tensors in
//                   PolicyParams::visit order, row-major within a tensor
//   optimizer.bin   optional Adam state, same encoding: step count followed
//                   by first and then second moments

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfqmm/errors.hpp"
#include "rfqmm/neural_policy.hpp"

namespace rfqmm {

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string encode_f64_le(std::span<const double> values) {
  std::string out(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

inline std::vector<double> decode_f64_le(std::string_view bytes) {
  if (bytes.size() % 8 != 0) throw ShapeMismatch("binary payload is not a whole number of doubles");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("short write to " + p.string());
}

struct AdamState {
  double step = 0.0;
  std::vector<double> m;
  std::vector<double> v;
};

struct Checkpoint {
  PolicyParams params;
  std::uint64_t seed = 0;
  std::size_t update = 0;  // number of completed updates
  std::optional<AdamState> optimizer;
};

inline nlohmann::json tensor_shapes(const PolicyParams& p) {
  nlohmann::json shapes = nlohmann::json::array();
  p.for_each([&](std::string_view name, const auto& t) {
    shapes.push_back({{"name", std::string(name)}, {"rows", t.rows()}, {"cols", t.cols()}});
  });
  return shapes;
}

inline void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::string payload = encode_f64_le(to_flat(ck.params));
  nlohmann::ordered_json m;
  m["architecture"] = std::string(kArchitecture);
  m["shapes"] = tensor_shapes(ck.params);
  m["parameter_count"] = ck.params.size();
  m["seed"] = ck.seed;
  m["update"] = ck.update;
  m["encoding"] = "f64-le";
  m["checksum_fnv1a64"] = hex64(fnv1a64(payload));
  if (ck.optimizer) {
    std::vector<double> flat{ck.optimizer->step};
    flat.insert(flat.end(), ck.optimizer->m.begin(), ck.optimizer->m.end());
    flat.insert(flat.end(), ck.optimizer->v.begin(), ck.optimizer->v.end());
    const std::string opt = encode_f64_le(flat);
    write_file(dir / "optimizer.bin", opt);
    m["optimizer_checksum_fnv1a64"] = hex64(fnv1a64(opt));
  }
  write_file(dir / "params.bin", payload);
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("unreadable checkpoint manifest: " + std::string(e.what()));
  }
  Checkpoint ck;
  ck.params = PolicyParams::zeros();
  try {
    if (m.at("architecture").get<std::string>() != kArchitecture)
      throw ShapeMismatch("architecture '" + m.at("architecture").get<std::string>() + "'");
    if (m.at("shapes") != tensor_shapes(ck.params)) throw ShapeMismatch("tensor shapes differ");
    if (m.at("parameter_count").get<std::size_t>() != ck.params.size()) throw ShapeMismatch("parameter count");
    ck.seed = m.at("seed").get<std::uint64_t>();
    ck.update = m.at("update").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ShapeMismatch("malformed manifest: " + std::string(e.what()));
  }
  const std::string payload = read_file(dir / "params.bin");
  if (hex64(fnv1a64(payload)) != m.value("checksum_fnv1a64", std::string()))
    throw ChecksumMismatch((dir / "params.bin").string());
  ck.params = from_flat(decode_f64_le(payload));
  if (m.contains("optimizer_checksum_fnv1a64") && std::filesystem::exists(dir / "optimizer.bin")) {
    const std::string opt = read_file(dir / "optimizer.bin");
    if (hex64(fnv1a64(opt)) != m.value("optimizer_checksum_fnv1a64", std::string()))
      throw ChecksumMismatch((dir / "optimizer.bin").string());
    const std::vector<double> flat = decode_f64_le(opt);
    const std::size_t n = ck.params.size();
    if (flat.size() != 1 + 2 * n) throw ShapeMismatch("optimizer state size");
    AdamState st;
    st.step = flat[0];
    st.m.assign(flat.begin() + 1, flat.begin() + 1 + static_cast<std::ptrdiff_t>(n));
    st.v.assign(flat.begin() + 1 + static_cast<std::ptrdiff_t>(n), flat.end());
    ck.optimizer = std::move(st);
  }
  return ck;
}

}  // namespace rfqmm
